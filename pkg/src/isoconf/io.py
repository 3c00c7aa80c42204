"""CSV input and provenance-stamped CSV output."""

import csv
import os
import tempfile

import numpy as np

from .errors import DegenerateDataError, ValidationError


class ParseError(ValidationError):
    """A data file could not be parsed; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _data_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def _is_header(row):
    try:
        [float(c) for c in row]
    except ValueError:
        return True
    return False


def read_current_status_csv(path):
    """Read ``t,delta`` rows (header optional) into time and indicator arrays."""
    times, deltas = [], []
    first = True
    for lineno, row in _data_rows(path):
        if first and _is_header(row):
            first = False
            continue
        first = False
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, found {len(row)}", lineno)
        try:
            t = float(row[0])
            d = float(row[1])
        except ValueError:
            raise ParseError(f"non-numeric value in {row!r}", lineno) from None
        if not np.isfinite(t):
            raise ParseError("non-finite time", lineno)
        if d not in (0.0, 1.0):
            raise ParseError(f"indicator must be 0 or 1, got {row[1]!r}", lineno)
        times.append(t)
        deltas.append(int(d))
    if not times:
        raise DegenerateDataError(f"{path}: no observations")
    return np.array(times), np.array(deltas, dtype=np.int64)


def read_times_csv(path):
    """Read a single column ``t`` of raw observations (header optional)."""
    times = []
    first = True
    for lineno, row in _data_rows(path):
        if first and _is_header(row):
            first = False
            continue
        first = False
        if len(row) != 1:
            raise ParseError(f"expected 1 column, found {len(row)}", lineno)
        try:
            t = float(row[0])
        except ValueError:
            raise ParseError(f"non-numeric value {row[0]!r}", lineno) from None
        if not np.isfinite(t):
            raise ParseError("non-finite value", lineno)
        times.append(t)
    if not times:
        raise DegenerateDataError(f"{path}: no observations")
    return np.array(times)


def format_value(x):
    """Shortest round-tripping text for numbers, ``str`` otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, columns, rows, header=()):
    """Write ``rows`` under ``# ``-prefixed ``header`` lines, atomically."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".isoconf-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(x) for x in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_table(path):
    """Read a file written by :func:`write_csv`: ``(header_lines, columns, rows)``."""
    header, rows, columns = [], [], None
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                header.append(line[2:].rstrip("\n"))
            else:
                break
        fh.seek(0)
        body = (line for line in fh if not line.startswith("#"))
        for row in csv.reader(body):
            if columns is None:
                columns = row
            else:
                rows.append(row)
    return header, columns, rows
