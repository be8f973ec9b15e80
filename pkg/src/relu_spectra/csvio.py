"""CSV reading/writing with atomic file replacement."""

import csv
import io
import os
import tempfile
from pathlib import Path

from .errors import DataError


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write_text(path, to_csv_text(header, rows))


def read_csv(path):
    """Return ``(header, rows)`` where rows are lists of strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV file (no header row)") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}"
                )
            rows.append(row)
    return header, rows


def numeric_column(path, header, rows, name):
    """Extract column ``name`` as floats, naming the column on failure."""
    if name not in header:
        raise DataError(f"{path}: missing column {name!r}")
    j = header.index(name)
    out = []
    for i, row in enumerate(rows, start=2):
        try:
            out.append(float(row[j]))
        except ValueError:
            raise DataError(
                f"{path}: column {name!r} has non-numeric value {row[j]!r} at row {i}"
            ) from None
    return out
