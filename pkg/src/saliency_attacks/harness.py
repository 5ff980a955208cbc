"""Batch experiment runner: datasets in, per-image records and aggregate
tables out.

Every run writes diff-able CSV artifacts with fixed headers (see the
``*_HEADER`` constants, schema :data:`SCHEMA_VERSION`): one records row
per (image, attack, config), one aggregate row per (attack, budget), and
a per-query trace file.  All randomness derives from ``(seed, image id)``,
so reruns with the same spec are byte-identical regardless of worker
scheduling; records are ordered by image id, not completion order.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from saliency_attacks.attacks import (
    AttackConfig,
    greedy_block_search,
    resolve_mode_mask,
    saliency_attack,
    square_attack,
)
from saliency_attacks.backend import ClassifierBackend
from saliency_attacks.image import load_image, resize_bilinear
from saliency_attacks.metrics import ImperceptibilityReport, aggregate, measure
from saliency_attacks.remote import RemoteBackend
from saliency_attacks.saliency import binarize, load_saliency, spectral_residual
from saliency_attacks.weights import EmbeddedBackend

SCHEMA_VERSION = "v1"
ATTACKS = ("saliency", "square", "square-sal", "greedy")

RECORDS_HEADER = [
    "image_id",
    "label",
    "attack",
    "config_hash",
    "status",
    "prior_misclassified",
    "success",
    "queries",
    "best_f",
    "l0_fraction",
    "l2",
    "linf",
    "mad",
]
AGGREGATE_HEADER = [
    "attack",
    "budget",
    "config_hash",
    "n",
    "sr",
    "sr_true",
    "mad_threshold",
    "l2_mean",
    "l2_sd",
    "l0_mean",
    "l0_sd",
    "mad_mean",
    "mad_sd",
]
TRACE_HEADER = ["image_id", "query", "best_f", "success"]
CONVERGENCE_HEADER = ["mad_threshold", "queries", "sr_true"]
SWEEP_HEADER = ["k_int", "n", "sr", "queries_mean", "l2_mean", "mad_mean"]
PAIRED_HEADER = ["image_id", "mad_a", "mad_b"]


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one batch run needs; all paths must exist at load time."""

    dataset_dir: Path
    labels_file: Path
    attack: str
    config: AttackConfig
    output_dir: Path
    weights_path: Optional[Path] = None
    endpoint_url: Optional[str] = None
    saliency_dir: Optional[Path] = None  # None: built-in spectral residual
    mad_thresholds: tuple = (30.0,)
    resize: int = 256
    workers: int = 1

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise ValueError(f"unknown attack {self.attack!r}; expected one of {ATTACKS}")
        if (self.weights_path is None) == (self.endpoint_url is None):
            raise ValueError("exactly one of weights_path / endpoint_url must be given")
        for path in (self.dataset_dir, self.labels_file, self.weights_path, self.saliency_dir):
            if path is not None and not Path(path).exists():
                raise ValueError(f"path does not exist: {path}")
        if self.resize < 1 or (self.resize & (self.resize - 1)) != 0:
            raise ValueError(f"resize target must be a power of two, got {self.resize}")


@dataclass
class RunRecord:
    """One attacked image; carries the inputs of every aggregate."""

    image_id: str
    label: int
    attack: str
    config_hash: str
    status: str  # ok | error
    prior_misclassified: bool
    success: bool
    queries: int
    best_f: float
    l0_fraction: float
    l2: float
    linf: float
    mad: float
    trace: list = field(default_factory=list, repr=False)

    def row(self) -> list:
        return [
            self.image_id,
            self.label,
            self.attack,
            self.config_hash,
            self.status,
            int(self.prior_misclassified),
            int(self.success),
            self.queries,
            _fmt(self.best_f),
            _fmt(self.l0_fraction),
            _fmt(self.l2),
            _fmt(self.linf),
            _fmt(self.mad),
        ]


def _fmt(v: float) -> str:
    if v != v:  # nan
        return "nan"
    if v == float("-inf"):
        return "-inf"
    return format(float(v), ".9g")


def config_hash(spec: "ExperimentSpec") -> str:
    """Stable short hash of everything that shapes the attack behavior."""
    cfg = spec.config
    payload = {
        "schema": SCHEMA_VERSION,
        "attack": spec.attack,
        "epsilon": cfg.epsilon,
        "k_int": cfg.k_int,
        "budget": cfg.budget,
        "phi": cfg.phi,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "resize": spec.resize,
        "saliency": "external" if spec.saliency_dir else "builtin",
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def load_labels(path) -> list:
    """Parse the ``filename,class_index`` CSV (header row optional)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#"):
                continue
            if rec[0] == "filename":
                continue
            rows.append((rec[0], int(rec[1])))
    if not rows:
        raise ValueError(f"labels file {path} holds no entries")
    return rows


def make_backend(spec: ExperimentSpec) -> ClassifierBackend:
    if spec.weights_path is not None:
        return EmbeddedBackend.from_file(spec.weights_path)
    return RemoteBackend(spec.endpoint_url)


def _image_seed(base_seed: int, image_id: str) -> int:
    digest = hashlib.sha256(f"{base_seed}:{image_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def prepare_image(spec: ExperimentSpec, filename: str) -> np.ndarray:
    x = load_image(Path(spec.dataset_dir) / filename)
    if x.shape[0] != spec.resize or x.shape[1] != spec.resize:
        x = resize_bilinear(x, spec.resize)
    return x


def prepare_mask(spec: ExperimentSpec, filename: str, x: np.ndarray) -> np.ndarray:
    if spec.saliency_dir is not None:
        map_path = Path(spec.saliency_dir) / (Path(filename).stem + ".png")
        scores = load_saliency(map_path, shape=x.shape[:2])
    else:
        scores = spectral_residual(x)
    return binarize(scores, spec.config.phi)


def dispatch_attack(spec: ExperimentSpec, backend, x: np.ndarray, label: int, image_id: str):
    """Run the spec's attack on one prepared image; returns the outcome."""
    cfg = replace(spec.config, seed=_image_seed(spec.config.seed, image_id))
    if spec.attack == "square":
        return square_attack(x, label, backend, cfg, mask=None)
    mask = resolve_mode_mask(prepare_mask(spec, image_id + ".png", x), cfg.mode, x.shape[:2])
    if spec.attack == "saliency":
        return saliency_attack(x, label, mask, backend, cfg)
    if spec.attack == "square-sal":
        return square_attack(x, label, backend, cfg, mask=mask)
    return greedy_block_search(x, label, mask, backend, cfg.k_int, cfg.budget, cfg.epsilon)


def attack_one(spec: ExperimentSpec, backend, filename: str, label: int) -> RunRecord:
    image_id = Path(filename).stem
    chash = config_hash(spec)
    try:
        x = prepare_image(spec, filename)
        outcome = dispatch_attack(spec, backend, x, label, image_id)
        report = measure(x, outcome.adversarial)
        return RunRecord(
            image_id=image_id,
            label=label,
            attack=spec.attack,
            config_hash=chash,
            status="ok",
            prior_misclassified=outcome.prior_misclassified,
            success=outcome.success,
            queries=outcome.queries,
            best_f=outcome.best_f,
            l0_fraction=report.l0_fraction,
            l2=report.l2,
            linf=report.linf,
            mad=report.mad,
            trace=outcome.trace,
        )
    except Exception as exc:  # per-image failures never abort the suite
        return RunRecord(
            image_id=image_id,
            label=label,
            attack=spec.attack,
            config_hash=chash,
            status=f"error:{type(exc).__name__}",
            prior_misclassified=False,
            success=False,
            queries=0,
            best_f=float("nan"),
            l0_fraction=float("nan"),
            l2=float("nan"),
            linf=float("nan"),
            mad=float("nan"),
        )


def run_suite(spec: ExperimentSpec):
    """Attack every dataset image; write records, traces and aggregates.

    Returns ``(records_path, aggregate_path, records)``.
    """
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = load_labels(spec.labels_file)
    backend = make_backend(spec)

    def work(item):
        filename, label = item
        return attack_one(spec, backend, filename, label)

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(work, labels))
    else:
        records = [work(item) for item in labels]
    records.sort(key=lambda r: r.image_id)

    records_path = out_dir / "records.csv"
    with open(records_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORDS_HEADER)
        for rec in records:
            writer.writerow(rec.row())

    traces_path = out_dir / "traces.csv"
    with open(traces_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for rec in records:
            for q, best_f, hit in rec.trace:
                writer.writerow([rec.image_id, q, _fmt(best_f), int(hit)])

    aggregate_path = out_dir / "aggregates.csv"
    write_aggregates(records, spec.config.budget, spec.mad_thresholds, aggregate_path)
    return records_path, aggregate_path, records


def write_aggregates(records: Sequence[RunRecord], budget: int, thresholds, path):
    ok = [r for r in records if r.status == "ok"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_HEADER)
        if not ok:
            return
        batch = [(r.success, _report(r)) for r in ok]
        for threshold in thresholds:
            stats = aggregate(batch, mad_threshold=threshold)
            writer.writerow(
                [
                    ok[0].attack,
                    budget,
                    ok[0].config_hash,
                    stats.n,
                    _fmt(stats.sr),
                    _fmt(stats.sr_true),
                    _fmt(threshold),
                    _fmt(stats.l2_mean),
                    _fmt(stats.l2_sd),
                    _fmt(stats.l0_mean),
                    _fmt(stats.l0_sd),
                    _fmt(stats.mad_mean),
                    _fmt(stats.mad_sd),
                ]
            )


def _report(r: RunRecord) -> ImperceptibilityReport:
    return ImperceptibilityReport(
        l0_fraction=r.l0_fraction, l2=r.l2, linf=r.linf, mad=r.mad
    )


def read_records(path) -> list:
    """Load a records CSV back into RunRecord objects (traces not included)."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                RunRecord(
                    image_id=row["image_id"],
                    label=int(row["label"]),
                    attack=row["attack"],
                    config_hash=row["config_hash"],
                    status=row["status"],
                    prior_misclassified=bool(int(row["prior_misclassified"])),
                    success=bool(int(row["success"])),
                    queries=int(row["queries"]),
                    best_f=float(row["best_f"]),
                    l0_fraction=float(row["l0_fraction"]),
                    l2=float(row["l2"]),
                    linf=float(row["linf"]),
                    mad=float(row["mad"]),
                )
            )
    return records


def convergence(records: Sequence[RunRecord], thresholds, path, query_grid=None):
    """Cumulative true-success curves: queries vs fraction of images whose
    first success came within the budget point and whose final MAD is at or
    below the threshold."""
    ok = [r for r in records if r.status == "ok"]
    if query_grid is None:
        points = sorted({r.queries for r in ok if r.success})
        query_grid = points or [1]
    n = max(len(ok), 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONVERGENCE_HEADER)
        for threshold in thresholds:
            for q in query_grid:
                wins = sum(
                    1 for r in ok if r.success and r.queries <= q and r.mad <= threshold
                )
                writer.writerow([_fmt(threshold), q, _fmt(wins / n)])
    return path


def sweep_kint(spec: ExperimentSpec, k_list: Sequence[int], path=None):
    """Run the suite once per initial block side; one aggregate row per k.

    Rows report runs the model classified correctly at the outset
    (prior misclassifications are excluded); `queries_mean` is over all
    such runs, `l2_mean`/`mad_mean` over the successful ones.
    """
    for k in k_list:
        if k <= 1 or (k & (k - 1)) != 0 or k > spec.resize:
            raise ValueError(f"invalid k_int {k} for image side {spec.resize}")
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = Path(path) if path else out_dir / "sweep_kint.csv"
    rows = []
    for k in k_list:
        sub = replace(
            spec,
            config=replace(spec.config, k_int=k),
            output_dir=out_dir / f"k{k}",
        )
        _, _, records = run_suite(sub)
        attacked = [r for r in records if r.status == "ok" and not r.prior_misclassified]
        wins = [r for r in attacked if r.success]
        n = len(attacked)
        rows.append(
            [
                k,
                n,
                _fmt(len(wins) / n if n else float("nan")),
                _fmt(float(np.mean([r.queries for r in attacked])) if attacked else float("nan")),
                _fmt(float(np.mean([r.l2 for r in wins])) if wins else float("nan")),
                _fmt(float(np.mean([r.mad for r in wins])) if wins else float("nan")),
            ]
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    return path


def compare_paired(records_a: Sequence[RunRecord], records_b: Sequence[RunRecord], path):
    """Per-image MAD pairing of two record sets over identical image ids.

    Writes ``image_id, mad_a, mad_b`` rows and returns the fraction of
    images where B's MAD is strictly lower than A's.
    """
    by_a = {r.image_id: r for r in records_a}
    by_b = {r.image_id: r for r in records_b}
    if set(by_a) != set(by_b):
        missing = set(by_a) ^ set(by_b)
        raise ValueError(f"record sets cover different images (e.g. {sorted(missing)[:4]})")
    if not by_a:
        raise ValueError("empty record sets")
    better = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PAIRED_HEADER)
        for image_id in sorted(by_a):
            mad_a, mad_b = by_a[image_id].mad, by_b[image_id].mad
            if mad_b < mad_a:
                better += 1
            writer.writerow([image_id, _fmt(mad_a), _fmt(mad_b)])
    return better / len(by_a)
