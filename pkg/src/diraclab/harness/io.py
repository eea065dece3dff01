"""On-disk result formats.

CSV cells print floats with 17 significant digits, which round-trips IEEE
doubles bit-exactly; the JSON export mirrors the CSV rows losslessly.
"""

from __future__ import annotations

import csv
import io
import json
import os


def fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_cell(s, like):
    if isinstance(like, float):
        return float(s)
    if isinstance(like, bool):
        return s == "true"
    if isinstance(like, int):
        return int(s)
    return s


def rows_to_csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_csv_rows(path):
    with open(path) as fh:
        rd = csv.reader(fh)
        header = next(rd)
        return header, [dict(zip(header, row)) for row in rd]


def export_results(manifest, fmt="csv"):
    """Re-emit the run's rows in the requested format; returns file paths.

    The JSON mirror parses the CSV text back so both carry identical values
    (floats pass through the 17-significant-digit decimal form).
    """
    out = []
    for csv_path in manifest.output_files:
        if not csv_path.endswith(".csv"):
            continue
        if fmt == "csv":
            out.append(csv_path)
            continue
        if fmt != "json":
            raise ValueError(f"unknown export format {fmt!r}")
        header, rows = read_csv_rows(csv_path)
        jpath = csv_path[:-4] + ".rows.json"
        write_atomic(jpath, json.dumps({"columns": header, "rows": rows},
                                       indent=1, sort_keys=True) + "\n")
        out.append(jpath)
    return out


def json_default(o):
    import numpy as np
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")
