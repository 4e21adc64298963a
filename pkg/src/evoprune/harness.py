"""Experiment harness: configuration, seeded runs, and report emission.

A run configuration (JSON) names a dataset, a split, an architecture, and a
mode; `run_experiment` executes n seeded repetitions of that mode (cycling
folds for k-fold splits), writes per-evaluation logs and report files, and
returns the aggregated report. Outputs are byte-identical across reruns of
the same configuration; wall-clock timings go to a separate file so they
never perturb the deterministic artifacts.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ga
from .baselines import (
    GRID_FRACTIONS,
    DecaySchedule,
    run_polynomial_decay,
    run_pruned_baseline,
    run_reference,
)
from .data import FeatureDataset, SplitSpec, load_dataset, make_folds
from .encoding import EncodingKind, decode
from .network import HeadArchitecture, SparseMask, TrainConfig, evaluate, save_head, train

EVOLVE_MODES = ("evolve-neurons-L1", "evolve-neurons-L2", "evolve-both",
                "evolve-connections", "evolve-fs")
BASELINE_MODES = ("baseline-weight", "baseline-neuron", "baseline-polydecay")
REFERENCE_MODES = ("reference-dense", "reference-grid")
ALL_MODES = EVOLVE_MODES + BASELINE_MODES + REFERENCE_MODES

# fixed column order and display names for comparison tables
METHOD_ORDER = (
    ("reference-dense", "Not Pruned"),
    ("reference-grid", "Best Fixed"),
    ("baseline-weight", "Weight"),
    ("baseline-polydecay", "Poly. Decay"),
    ("baseline-neuron", "Neuron"),
    ("evolve-neurons-L1", "Neurons L1"),
    ("evolve-neurons-L2", "Neurons L2"),
    ("evolve-both", "Both Layers"),
    ("evolve-connections", "Connections"),
    ("evolve-fs", "Feature Selection"),
)

_ENCODING_BY_MODE = {
    "evolve-neurons-L1": lambda layers: EncodingKind.neurons(1),
    "evolve-neurons-L2": lambda layers: EncodingKind.neurons(2),
    "evolve-both": lambda layers: EncodingKind.neurons_both(),
    "evolve-connections": lambda layers: EncodingKind.connections(layers[0]),
    "evolve-fs": lambda layers: EncodingKind.feature_selection(),
}


class ConfigError(ValueError):
    """The run configuration is inconsistent or incomplete."""


@dataclass
class RunConfig:
    """Everything one experiment needs; JSON keys mirror the field names."""

    dataset: str
    mode: str
    out_dir: str = "runs"
    dataset_format: str | None = None
    test_dataset: str | None = None
    split_kind: str = "fixed-train-test"
    split_k: int = 5
    split_fold_index: int | None = None
    split_seed: int = 0
    hidden_sizes: tuple[int, ...] = (512,)
    n_runs: int = 5
    seed: int = 0
    population_size: int = 30
    max_evals: int | None = None
    nam_candidates: int = 3
    p_mut: float = 0.07
    p_one: float = 0.5
    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 600
    patience: int = 10
    s_final: float | None = None
    reference_report: str | None = None
    s_initial: float = 0.1
    alpha: float = 3.0
    extra_epochs: int = 25
    apply_every_epochs: int = 5
    fine_tune_epochs: int = 25
    layers: tuple[int, ...] = (1,)
    dump_weights: bool = False

    def __post_init__(self):
        if self.mode not in ALL_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {ALL_MODES}")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        self.layers = tuple(int(l) for l in self.layers)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def resolved_max_evals(self) -> int:
        if self.max_evals is not None:
            return self.max_evals
        return 300 if self.mode == "evolve-both" else 200

    def ga_config(self, run_seed: int) -> ga.GAConfig:
        return ga.GAConfig(self.population_size, self.resolved_max_evals(),
                           self.nam_candidates, self.p_mut, self.p_one, run_seed)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.max_epochs,
                           self.patience, seed)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.split_kind, self.split_k, self.split_fold_index,
                         self.split_seed)


@dataclass(frozen=True)
class RunRow:
    run: int
    fold: int
    seed: int
    accuracy: float
    active_fraction: float
    evals: int


@dataclass
class RunReport:
    """Per-run results plus aggregates; aggregates are plain means of the rows."""

    dataset: str
    mode: str
    rows: list[RunRow]
    mean_accuracy: float
    mean_active_fraction: float
    config: dict = field(default_factory=dict)
    wall_times: list[float] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "mode": self.mode,
            "rows": [asdict(r) for r in self.rows],
            "aggregate": {
                "mean_accuracy": self.mean_accuracy,
                "mean_active_fraction": self.mean_active_fraction,
                "mean_active_percent": 100.0 * self.mean_active_fraction,
            },
            "config": self.config,
        }

    @classmethod
    def from_json(cls, path) -> "RunReport":
        with open(path) as fh:
            raw = json.load(fh)
        rows = [RunRow(**r) for r in raw["rows"]]
        return cls(raw["dataset"], raw["mode"], rows,
                   raw["aggregate"]["mean_accuracy"],
                   raw["aggregate"]["mean_active_fraction"],
                   raw.get("config", {}))


def _mask_active_fraction(mask: SparseMask, mode: str, layers: tuple[int, ...]) -> float:
    """Realized active share over the structure a baseline mode prunes."""
    if mode in ("baseline-weight", "baseline-polydecay"):
        pool = np.concatenate([mask.layers[l - 1].ravel() for l in layers])
        return float(pool.mean())
    cols = np.concatenate([mask.layers[l - 1].any(axis=0) for l in layers])
    return float(cols.mean())


def resolve_s_final(cfg: RunConfig) -> float:
    """Sparsity target for a baseline: explicit, or the complement of the
    mean active fraction of a referenced evolutionary report."""
    if cfg.s_final is not None:
        return cfg.s_final
    if not cfg.reference_report:
        raise ConfigError(f"mode {cfg.mode} needs s_final or reference_report")
    path = Path(cfg.reference_report)
    if not path.exists():
        raise ConfigError(f"referenced report {path} does not exist")
    report = RunReport.from_json(path)
    return 1.0 - report.mean_active_fraction


def _evolve_fitness(arch, kind, train_ds, test_ds, cfg):
    def fitness(chrom, seed):
        head = train(arch, decode(chrom, arch), train_ds, cfg.train_config(seed))
        return evaluate(head, test_ds)
    return fitness


def _write_eval_log(path: Path, history) -> None:
    lines = [f"{r.eval_index},{r.fitness!r},{r.active},{len(r.chromosome)},{r.chromosome.to_text()}"
             for r in history]
    path.write_text("\n".join(lines) + "\n")


def _run_one(cfg: RunConfig, arch: HeadArchitecture, train_ds: FeatureDataset,
             test_ds: FeatureDataset, run_seed: int, s_final: float | None):
    """One (run, fold) execution. Returns (accuracy, active_fraction, evals,
    history-or-None, head-or-None)."""
    mode = cfg.mode
    if mode in EVOLVE_MODES:
        kind = _ENCODING_BY_MODE[mode](cfg.layers)
        kind.validate_for(arch)
        fitness = _evolve_fitness(arch, kind, train_ds, test_ds, cfg)
        best, history = ga.run(cfg.ga_config(run_seed), kind.length(arch), fitness, kind)
        head = None
        if cfg.dump_weights:
            head = train(arch, decode(best.chromosome, arch), train_ds,
                         cfg.train_config(best.seed_used))
        return best.fitness, best.active / len(best.chromosome), len(history), history, head

    if mode == "reference-dense":
        head = run_reference(arch, train_ds, cfg.train_config(run_seed), 1.0)
        return evaluate(head, test_ds), 1.0, 1, None, head

    if mode == "reference-grid":
        best_acc, best_fraction, best_head = -1.0, None, None
        for fraction in GRID_FRACTIONS:
            head = run_reference(arch, train_ds, cfg.train_config(run_seed), fraction)
            acc = evaluate(head, test_ds)
            if acc > best_acc:
                best_acc, best_fraction, best_head = acc, fraction, head
        return best_acc, best_fraction, len(GRID_FRACTIONS), None, best_head

    assert mode in BASELINE_MODES
    if mode == "baseline-polydecay":
        sched = DecaySchedule.standard(train_ds.n, cfg.batch_size, s_final,
                                       cfg.s_initial, cfg.alpha,
                                       cfg.extra_epochs, cfg.apply_every_epochs)
        head = run_polynomial_decay(arch, train_ds, sched, cfg.train_config(run_seed),
                                    cfg.layers)
    else:
        method = "weight" if mode == "baseline-weight" else "neuron"
        head = run_pruned_baseline(arch, train_ds, method, cfg.layers, s_final,
                                   cfg.train_config(run_seed), cfg.fine_tune_epochs)
    active = _mask_active_fraction(head.mask, mode, cfg.layers)
    return evaluate(head, test_ds), active, 1, None, head


def run_experiment(cfg: RunConfig) -> RunReport:
    """Execute the configured mode for n_runs seeded repetitions.

    Per-run seeds are seed + run_index. For k-fold splits each run executes
    every fold and the run's row values are recorded per fold. Report files
    (report.csv, report.txt, report.json, evals_run{i}[_fold{j}].log) land in
    out_dir; wall times go to timings.txt.
    """
    dataset = load_dataset(cfg.dataset, cfg.dataset_format)
    test_ds = load_dataset(cfg.test_dataset, cfg.dataset_format) if cfg.test_dataset else None
    folds = make_folds(dataset, cfg.split_spec(), test_ds)
    if cfg.split_kind == "k-fold" and cfg.split_fold_index is not None:
        folds = [folds[cfg.split_fold_index]]
    arch = HeadArchitecture(cfg.hidden_sizes, dataset.feature_dim, dataset.n_classes)
    s_final = resolve_s_final(cfg) if cfg.mode in BASELINE_MODES else None

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[RunRow] = []
    wall_times: list[float] = []
    for run_idx in range(cfg.n_runs):
        run_seed = cfg.seed + run_idx
        for fold_idx, (train_ds, fold_test) in enumerate(folds):
            started = time.perf_counter()
            acc, active, evals, history, head = _run_one(
                cfg, arch, train_ds, fold_test, run_seed, s_final)
            wall_times.append(time.perf_counter() - started)
            suffix = f"_fold{fold_idx}" if len(folds) > 1 else ""
            if history is not None:
                _write_eval_log(out / f"evals_run{run_idx}{suffix}.log", history)
            if cfg.dump_weights and head is not None:
                save_head(head, out / f"head_run{run_idx}{suffix}.eptw")
            rows.append(RunRow(run_idx, fold_idx, run_seed, acc, active, evals))

    mean_acc = float(np.mean([r.accuracy for r in rows]))
    mean_active = float(np.mean([r.active_fraction for r in rows]))
    config_echo = {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg).items()}
    report = RunReport(dataset.name, cfg.mode, rows, mean_acc, mean_active,
                       config_echo, wall_times)
    _write_report_files(report, out)
    return report


def _write_report_files(report: RunReport, out: Path) -> None:
    header = "run,fold,seed,accuracy,active_fraction,evals"
    lines = [header]
    for r in report.rows:
        lines.append(f"{r.run},{r.fold},{r.seed},{r.accuracy!r},{r.active_fraction!r},{r.evals}")
    lines.append(f"mean,,,{report.mean_accuracy!r},{report.mean_active_fraction!r},")
    (out / "report.csv").write_text("\n".join(lines) + "\n")

    text, _csv = report_table([report])
    (out / "report.txt").write_text(text)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if report.wall_times:
        timing_lines = [f"run {r.run} fold {r.fold}: {w:.3f} s"
                        for r, w in zip(report.rows, report.wall_times)]
        (out / "timings.txt").write_text("\n".join(timing_lines) + "\n")


def report_table(reports: list[RunReport]) -> tuple[str, str]:
    """Comparison table over methods: per dataset, mean accuracy and % active.

    Returns (aligned plain text, CSV text). Methods appear in a fixed order;
    accuracies render to 3 decimals (round-half-even), active percentages to
    one decimal.
    """
    by_dataset: dict[str, dict[str, RunReport]] = {}
    for report in reports:
        methods = by_dataset.setdefault(report.dataset, {})
        if report.mode in methods:
            raise ValueError(f"duplicate reports for {report.dataset}/{report.mode}")
        methods[report.mode] = report
    present = [m for m, _ in METHOD_ORDER
               if any(m in methods for methods in by_dataset.values())]
    names = dict(METHOD_ORDER)

    csv_lines = ["dataset,measure," + ",".join(names[m] for m in present)]
    col_width = max([len(names[m]) for m in present] + [12])
    label_width = max([len(d) for d in by_dataset] + [8]) + 2
    text_lines = ["".ljust(label_width) + "measure".ljust(16)
                  + "".join(names[m].rjust(col_width + 2) for m in present)]
    for ds, methods in by_dataset.items():
        acc_cells, active_cells = [], []
        for m in present:
            if m in methods:
                acc_cells.append(f"{methods[m].mean_accuracy:.3f}")
                active_cells.append(f"{100.0 * methods[m].mean_active_fraction:.1f}")
            else:
                acc_cells.append("")
                active_cells.append("")
        csv_lines.append(f"{ds},accuracy," + ",".join(acc_cells))
        csv_lines.append(f"{ds},active_pct," + ",".join(active_cells))
        text_lines.append(ds.ljust(label_width) + "Accuracy".ljust(16)
                          + "".join(c.rjust(col_width + 2) for c in acc_cells))
        text_lines.append("".ljust(label_width) + "% Active".ljust(16)
                          + "".join(c.rjust(col_width + 2) for c in active_cells))
    return "\n".join(text_lines) + "\n", "\n".join(csv_lines) + "\n"
