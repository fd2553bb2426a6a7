"""Execute resolved configs: one directory per (sweep point, seed)."""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigFile, RunConfig
from .data import gen_synthetic, load_csv, split
from .engine import Diagnostics, evaluate, self_train
from .metrics import histogram_entropy
from .model import save_two_stream
from .reporting import write_diagnostics, write_records

log = logging.getLogger(__name__)

OUT_ENV = "ALIGN_LAB_OUT"
METADATA = {
    "auc_averaging": "macro one-vs-rest, classes lacking positives or negatives skipped",
    "distance_marginals": "unscaled labeled marginals",
    "inference_model": "encoder2 + head",
}


def output_root(cfg: RunConfig) -> Path:
    root = os.environ.get(OUT_ENV) or cfg["output.dir"]
    return Path(root) / cfg["name"]


def build_split(cfg: RunConfig, seed: int):
    if cfg["data.source"] == "csv":
        ds = load_csv(cfg["data.path"], n=cfg["data.n_classes"])
    else:
        ds = gen_synthetic(cfg.synth_spec(seed))
    sp = split(ds, cfg["split.labeled"], cfg["split.val_per_class"],
               cfg["split.test_per_class"], seed)
    return sp.upper_bound() if cfg["split.upper_bound"] else sp


def run_seed(cfg: RunConfig, seed: int, out_dir) -> dict:
    """Train one seed and write its outputs; returns the result dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    data = build_split(cfg, seed)
    diag = Diagnostics()
    ts, records = self_train(data, cfg.schedule(seed), cfg.vcq(), cfg["omega"], cfg.method(), diag)
    test_auc, test_mca, cm = evaluate(ts, data.test.features, data.test.labels)
    echo = cfg.with_overrides(seeds=[seed])

    write_records(records, out_dir / "records.csv")
    write_diagnostics(diag, out_dir)
    save_two_stream(ts, out_dir / "params.bin")
    (out_dir / "config.txt").write_text(echo.to_text(), encoding="utf-8")
    result = {
        "seed": seed,
        "test": {"auc": test_auc, "mca": test_mca, "confusion": cm.tolist()},
        "val": {"auc": records[-1].val_auc, "mca": records[-1].val_mca},
        "final_pseudo_label_histogram": list(records[-1].pseudo_label_histogram),
        "final_pseudo_label_entropy": histogram_entropy(records[-1].pseudo_label_histogram),
        "wall_time_s": time.perf_counter() - start,
        "metadata": METADATA,
        "config": echo.values,
    }
    (out_dir / "result.json").write_text(json.dumps(result, indent=2), encoding="utf-8")
    log.info("seed %d done: test auc %.4f mca %.4f", seed, test_auc, test_mca)
    return result


def summarize(results: list[dict]) -> dict:
    auc = np.array([r["test"]["auc"] for r in results])
    mca = np.array([r["test"]["mca"] for r in results])
    return {
        "seeds": [r["seed"] for r in results],
        "test_auc_mean": float(auc.mean()),
        "test_auc_std": float(auc.std()),
        "test_mca_mean": float(mca.mean()),
        "test_mca_std": float(mca.std()),
        "test_auc": auc.tolist(),
        "test_mca": mca.tolist(),
        "final_pseudo_label_entropy": [r["final_pseudo_label_entropy"] for r in results],
    }


def _task(args):
    values, seed, out_dir = args
    return run_seed(RunConfig(values), seed, out_dir)


def run_config(cfg_file: ConfigFile, jobs: int = 1) -> dict[str, dict]:
    """Run every sweep point and seed; writes ``summary.json`` per point."""
    tasks, layout = [], []
    for label, cfg in cfg_file.points():
        point_dir = output_root(cfg) / label if label else output_root(cfg)
        layout.append((label, point_dir, len(cfg.seeds)))
        for seed in cfg.seeds:
            tasks.append((cfg.values, seed, point_dir / f"seed_{seed}"))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    summaries, k = {}, 0
    for label, point_dir, count in layout:
        summary = summarize(results[k:k + count])
        summary["point"] = label
        k += count
        (point_dir / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
        summaries[label] = summary
    return summaries
