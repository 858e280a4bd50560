"""Small CSV helpers shared by the analysis modules (UTF-8, header row, '.' decimals)."""

import csv
import math
from pathlib import Path


def fmt(x) -> str:
    if isinstance(x, (bool, int)):
        return str(int(x))
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(float(x))
    try:
        return fmt(x.item())
    except AttributeError:
        return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
