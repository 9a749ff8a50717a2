"""CSV artifacts.  Every file starts with one ``#`` metadata line, then a header."""
from __future__ import annotations

import csv
import glob
import os

import numpy as np

from .engine import CHECKPOINT_COLUMNS, PathRecord

DECADE_COLUMNS = ("decade", "max_stat", "min_stat")
SUMMARY_COLUMNS = ("stream", "statistic", "value")
REPORT_COLUMNS = ("experiment", "stream", "statistic", "window", "value", "target", "citation")


def meta_line(config, **extra):
    items = {"experiment": config.name, "config_sha256": config.digest, "seed": config.seed}
    items.update(extra)
    return "# " + " ".join(f"{k}={v}" for k, v in items.items())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows, meta):
    with open(path, "w", newline="") as fh:
        fh.write(meta + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        meta = fh.readline().rstrip("\n")
        rows = list(csv.reader(fh))
    return meta, rows[0], rows[1:]


def path_filename(stream):
    return f"path_{stream:05d}.csv"


def decades_filename(stream):
    return f"decades_{stream:05d}.csv"


def write_path(record, out_dir, meta):
    s = record.meta["stream"]
    rows = []
    for row in record.checkpoints:
        rows.append([int(row[0]), int(row[1]), *row[2:]])
    write_csv(os.path.join(out_dir, path_filename(s)), CHECKPOINT_COLUMNS, rows, meta)
    drows = [[int(d), mx, mn] for d, mx, mn in record.decade_extremes]
    write_csv(os.path.join(out_dir, decades_filename(s)), DECADE_COLUMNS, drows, meta)


def read_path(out_dir, stream, meta=None):
    _, _, rows = read_csv(os.path.join(out_dir, path_filename(stream)))
    ckpt = np.array([[float(v) for v in r] for r in rows])
    _, _, drows = read_csv(os.path.join(out_dir, decades_filename(stream)))
    ext = np.array([[float(v) for v in r] for r in drows]).reshape(-1, 3)
    m = {"stream": stream, "n_steps": int(ckpt[-1, 0]), "absorbed_at": None}
    absorbed = np.flatnonzero(ckpt[:, 1] == 0)
    if absorbed.size:
        m["absorbed_at"] = int(ckpt[absorbed[0], 0])
    m.update(meta or {})
    return PathRecord(ckpt, ext, m)


def list_streams(out_dir):
    names = sorted(glob.glob(os.path.join(out_dir, "path_*.csv")))
    return [int(os.path.basename(n)[5:-4]) for n in names]


def write_summary(summary, path, meta):
    rows = []
    for s in summary.streams:
        for k, v in summary.terminals[s].items():
            rows.append([s, k, v])
    for k, v in summary.stats().items():
        rows.append(["all", k, v])
    write_csv(path, SUMMARY_COLUMNS, rows, meta)
