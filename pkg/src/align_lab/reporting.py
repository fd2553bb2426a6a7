"""Run outputs on disk: records, diagnostics CSVs, result JSON, and tidy plot data."""

import csv
import json
from dataclasses import fields
from pathlib import Path

from .engine import Diagnostics, EpochRecord
from .errors import MissingRecords

RECORD_COLUMNS = [f.name for f in fields(EpochRecord)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ";".join(str(int(c)) for c in v)
    return str(v)


def write_records(records: list[EpochRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])


def read_records(path) -> list[EpochRecord]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            hist = row["pseudo_label_histogram"]
            out.append(EpochRecord(
                epoch=int(row["epoch"]),
                eta=float(row["eta"]),
                supervised_loss=float(row["supervised_loss"]),
                unsupervised_loss=float(row["unsupervised_loss"]),
                val_auc=float(row["val_auc"]),
                val_mca=float(row["val_mca"]),
                pseudo_label_histogram=tuple(int(c) for c in hist.split(";")) if hist else (),
                frobenius_distance=float(row["frobenius_distance"]),
            ))
    return out


def write_diagnostics(diag: Diagnostics, out_dir) -> None:
    out_dir = Path(out_dir)
    with (out_dir / "class_distance.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "class", "distance", "frobenius_total"])
        for epoch, dist, total in diag.class_distances:
            for i, d in enumerate(dist):
                w.writerow([epoch, i, repr(float(d)), repr(float(total))])
    with (out_dir / "queue_occupancy.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "class", "capacity", "occupancy", "tau"])
        for epoch, cap, occ, tau in diag.queue:
            for i in range(len(cap)):
                w.writerow([epoch, i, int(cap[i]), int(occ[i]), repr(float(tau[i]))])
    with (out_dir / "stats.jsonl").open("w", encoding="utf-8") as fh:
        for (epoch, stats), pre in zip(diag.stats, diag.frobenius_pre):
            fh.write(json.dumps({"epoch": epoch, "frobenius_pre_update": pre, **stats}) + "\n")
    with (out_dir / "trace.jsonl").open("w", encoding="utf-8") as fh:
        for epoch, event in diag.trace:
            fh.write(json.dumps({"epoch": epoch, "event": event}) + "\n")


def find_record_files(root) -> list[Path]:
    root = Path(root)
    files = sorted(root.rglob("records.csv"))
    if not files:
        raise MissingRecords(f"no records.csv under {root}")
    return files


def _seed_of(run_dir: Path) -> int:
    result = run_dir / "result.json"
    if result.exists():
        return int(json.loads(result.read_text())["seed"])
    name = run_dir.name
    return int(name.split("_", 1)[1]) if name.startswith("seed_") else 0


def collect_runs(root) -> list[dict]:
    """One entry per records.csv under ``root``: point label, seed and records."""
    root = Path(root)
    runs = []
    for path in find_record_files(root):
        run_dir = path.parent
        point = run_dir.parent.relative_to(root).as_posix() if run_dir != root else "."
        runs.append({"point": point, "seed": _seed_of(run_dir), "dir": run_dir,
                     "records": read_records(path)})
    return runs


def export_plot_data(root, out_dir=None) -> dict[str, Path]:
    """Write tidy CSVs (one row per seed/epoch[/class]) for plotting tools."""
    root = Path(root)
    out_dir = Path(out_dir) if out_dir else root
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = collect_runs(root)
    paths = {name: out_dir / f"{name}.csv" for name in
             ("auc_vs_epoch", "frobenius_vs_epoch", "pseudo_histogram_vs_epoch")}
    handles = {k: p.open("w", newline="", encoding="utf-8") for k, p in paths.items()}
    try:
        writers = {k: csv.writer(h, lineterminator="\n") for k, h in handles.items()}
        writers["auc_vs_epoch"].writerow(["point", "seed", "epoch", "val_auc", "val_mca"])
        writers["frobenius_vs_epoch"].writerow(["point", "seed", "epoch", "frobenius_distance"])
        writers["pseudo_histogram_vs_epoch"].writerow(["point", "seed", "epoch", "class", "count"])
        for run in runs:
            for r in run["records"]:
                key = [run["point"], run["seed"], r.epoch]
                writers["auc_vs_epoch"].writerow(key + [repr(r.val_auc), repr(r.val_mca)])
                writers["frobenius_vs_epoch"].writerow(key + [repr(r.frobenius_distance)])
                for c, count in enumerate(r.pseudo_label_histogram):
                    writers["pseudo_histogram_vs_epoch"].writerow(key + [c, count])
    finally:
        for h in handles.values():
            h.close()
    return paths
