"""Plain CSV with a leading ``# key=value`` metadata block."""

import csv
import io
import math

SCHEMA_VERSION = 1


def fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def write_table(path, meta, columns, rows):
    """Write ``rows`` (iterables matching ``columns``) below a metadata block.

    ``columns=None`` writes a headerless numeric block (used for matrices).
    Output is built in memory and written once so repeated runs are byte-identical.
    """
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    for key, value in meta.items():
        buf.write(f"# {key}={fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if columns is not None:
        writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_table(path, header=True):
    """Return ``(meta, columns, rows)``; values stay strings, ``columns`` is None if headerless."""
    meta = {}
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader, None) if header else None
    return meta, columns, list(reader)


def parse_float(text):
    return float(text) if text != "" else None
