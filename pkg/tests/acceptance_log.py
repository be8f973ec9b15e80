"""Collects one PASS/FAIL line per acceptance criterion."""

import time
from contextlib import contextmanager

RESULTS = []


@contextmanager
def criterion(name, limit_s):
    """Time the block; the criterion passes only if its checks hold within ``limit_s``.

    The block yields a dict; set ``ok`` and ``detail`` in it.
    """
    out = {"ok": False, "detail": ""}
    start = time.perf_counter()
    try:
        yield out
    finally:
        elapsed = time.perf_counter() - start
        ok = bool(out["ok"]) and elapsed < limit_s
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {out['detail']} [{elapsed:.1f}s / limit {limit_s:g}s]"
        RESULTS.append(line)
        print(line)
    assert out["ok"], line
    assert elapsed < limit_s, line
