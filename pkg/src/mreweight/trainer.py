"""Experiment orchestration: data, model, optimizer, reweighting, metrics."""
import csv
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import CsvSchema, gen_blobs, inject_label_noise, load_csv, train_test_split
from .errors import DataError, ParameterError
from .losses import LossKind, LossModel, ModelKind
from .objective import MixupObjective, Objective
from .optim import OptimConfig, mr_sgd_run, sgd_run
from .tensor import make_rng, spawn_seeds

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("epoch", "weighted_loss", "clean_train_loss", "test_acc", "grad_norm",
                 "noisy_mass", "eta", "skipped_batches")
DEGENERATE_MASS = 1.0 - 1e-6


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "blobs"
    n_per_class: int = 250
    n_classes: int = 4
    dim: int = 8
    separation: float = 3.0
    noise_ratio: float = 0.4
    include_original: bool = False
    path: str | None = None
    label_column: str = "label"

    def __post_init__(self):
        if self.kind not in ("blobs", "csv"):
            raise ParameterError(f"dataset.kind must be 'blobs' or 'csv', got {self.kind!r}")
        if self.kind == "csv" and not self.path:
            raise ParameterError("dataset.path is required for csv datasets")
        if not 0.0 <= self.noise_ratio < 1.0:
            raise ParameterError("dataset.noise_ratio must lie in [0, 1)")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "mlp1"
    hidden: int = 16
    l2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("softmax", "mlp1"):
            raise ParameterError(f"model.kind must be 'softmax' or 'mlp1', got {self.kind!r}")
        if self.hidden < 1:
            raise ParameterError("model.hidden must be >= 1")
        if not self.l2 >= 0:
            raise ParameterError("model.l2 must be >= 0")


@dataclass(frozen=True)
class MethodSpec:
    mr: bool = True
    mixup: bool = False
    mixup_alpha: float = 1.0
    mixup_weighting: str = "primary"
    label_smoothing: bool = False
    smoothing_factor: float = 0.1

    def __post_init__(self):
        if not self.mixup_alpha > 0:
            raise ParameterError("method.mixup_alpha must be positive")
        if self.mixup_weighting not in ("primary", "blend"):
            raise ParameterError("method.mixup_weighting must be 'primary' or 'blend'")
        if not 0.0 <= self.smoothing_factor < 1.0:
            raise ParameterError("method.smoothing_factor must lie in [0, 1)")


DEFAULT_OPTIM = OptimConfig(alpha=0.1, eta=0.01, batch_size=32, epochs=30, momentum=0.9)


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: DatasetSpec = DatasetSpec()
    model: ModelSpec = ModelSpec()
    optim: OptimConfig = DEFAULT_OPTIM
    method: MethodSpec = MethodSpec()
    eval_fraction: float = 0.2
    seed: int = 0
    trace: bool = True

    def __post_init__(self):
        if not 0.0 < self.eval_fraction < 1.0:
            raise ParameterError("eval_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")

    def replace(self, **sections):
        """Copy with some sections or section fields replaced.

        ``spec.replace(seed=3, method={"mr": False})`` updates one field of
        the method section and keeps the rest.
        """
        changes = {}
        for key, value in sections.items():
            current = getattr(self, key)
            if isinstance(value, dict) and dataclasses.is_dataclass(current):
                value = dataclasses.replace(current, **value)
            changes[key] = value
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = dataclasses.asdict(self)
        for key in ("lr_milestones", "eta_milestones"):
            out["optim"][key] = list(out["optim"][key])
        out["optim"].pop("seed")
        return out


_SECTIONS = {"dataset": DatasetSpec, "model": ModelSpec, "optim": OptimConfig, "method": MethodSpec}
_TOP_LEVEL = {"eval_fraction": float, "seed": int, "trace": bool}


def _check_type(name, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int) and not isinstance(default, bool):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, tuple):
        ok = isinstance(value, (list, tuple)) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
        value = tuple(value) if ok else value
    elif isinstance(default, str) or default is None:
        ok = value is None or isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ParameterError(f"{name}: unexpected value {value!r}")
    return value


def _section(cls, data, prefix):
    if not isinstance(data, dict):
        raise ParameterError(f"{prefix}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls) if f.name != "seed"}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ParameterError(f"{prefix}: unknown field(s) {', '.join(unknown)}")
    base = DEFAULT_OPTIM if cls is OptimConfig else cls()
    kwargs = {k: _check_type(f"{prefix}.{k}", v, getattr(base, k)) for k, v in data.items()}
    try:
        return dataclasses.replace(base, **kwargs)
    except ParameterError as exc:
        msg = str(exc)
        raise ParameterError(msg if msg.startswith(prefix) else f"{prefix}: {msg}") from None


def spec_from_dict(data):
    """Validated spec; unknown fields anywhere are rejected."""
    if not isinstance(data, dict):
        raise ParameterError("spec must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS) - set(_TOP_LEVEL))
    if unknown:
        raise ParameterError(f"unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for key, cls in _SECTIONS.items():
        if key in data:
            kwargs[key] = _section(cls, data[key], key)
    for key, typ in _TOP_LEVEL.items():
        if key in data:
            kwargs[key] = _check_type(key, data[key], typ(0) if typ is not bool else False)
    return ExperimentSpec(**kwargs)


def load_spec(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read spec {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"spec {path} is not valid JSON: {exc}") from None
    return spec_from_dict(data)


@dataclass
class EpochRecord:
    epoch: int
    weighted_loss: float
    clean_train_loss: float
    test_acc: float
    grad_norm: float
    noisy_mass: float
    eta: float
    skipped_batches: int


@dataclass
class TrainingTrace:
    records: list = field(default_factory=list)
    final_dist: np.ndarray | None = None
    final_theta: np.ndarray | None = None
    final_test_acc: float = math.nan
    final_test_loss: float = math.nan
    noise_rate: float = 0.0

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)


def evaluate(model, theta, X, y):
    """Accuracy of argmax (or sign) predictions and mean per-example loss."""
    X = np.asarray(X)
    if X.shape[0] == 0:
        raise DataError("cannot evaluate on an empty dataset")
    pred = model.predict(theta, X)
    acc = float(np.mean(pred == np.asarray(y)))
    return {"accuracy": acc, "mean_loss": float(np.mean(model.without_smoothing().losses(theta, X, y)))}


def build_model(spec, n_features, n_classes):
    kind = ModelKind.MLP1 if spec.model.kind == "mlp1" else ModelKind.SOFTMAX
    smoothing = spec.method.smoothing_factor if spec.method.label_smoothing else 0.0
    return LossModel(kind, LossKind.CROSS_ENTROPY, n_features=n_features, n_classes=n_classes,
                     hidden=spec.model.hidden, l2=spec.model.l2, smoothing=smoothing)


def build_data(spec):
    """(train, test): the test split is always noise-free."""
    data_seed, split_seed, noise_seed = spawn_seeds(spec.seed, 3)
    d = spec.dataset
    if d.kind == "blobs":
        full = gen_blobs(d.n_per_class, d.n_classes, d.dim, d.separation, make_rng(data_seed))
    else:
        full = load_csv(d.path, CsvSchema(label=d.label_column))
    train, test = train_test_split(full, spec.eval_fraction, make_rng(split_seed))
    if d.noise_ratio > 0:
        train = inject_label_noise(train, d.noise_ratio, make_rng(noise_seed), d.include_original)
    return train, test


def run_experiment(spec):
    train, test = build_data(spec)
    init_seed, shuffle_seed, mixup_seed = spawn_seeds(spec.seed + 1, 3)
    model = build_model(spec, train.dim, train.n_classes)
    X, y = train.train_view()
    if spec.method.mixup:
        obj = MixupObjective(model, X, y, spec.method.mixup_alpha, make_rng(mixup_seed), spec.method.mixup_weighting)
    else:
        obj = Objective(model, X, y)
    config = dataclasses.replace(spec.optim, seed=shuffle_seed)
    theta0 = model.init_params(make_rng(init_seed))
    eval_model = model.without_smoothing()
    trace = TrainingTrace(noise_rate=train.noise_rate)

    def record(report):
        if spec.trace:
            clean_loss = float(np.mean(eval_model.losses(report.theta, X, train.clean_labels)))
            test_acc = evaluate(model, report.theta, test.inputs, test.labels)["accuracy"]
            noisy = report.noisy_mass
        else:
            clean_loss = test_acc = noisy = math.nan
        trace.records.append(EpochRecord(report.epoch, report.weighted_loss, clean_loss, test_acc,
                                         report.grad_norm, noisy, report.eta, report.skipped_batches))

    mask = train.mask if spec.trace else None
    if spec.method.mr:
        result = mr_sgd_run(config, obj, theta0, mask=mask, callback=record)
    else:
        result = sgd_run(config, obj, theta0, mask=mask, callback=record)
    trace.final_theta = result.final_theta
    trace.final_dist = result.reports[-1].dist
    metrics = evaluate(model, trace.final_theta, test.inputs, test.labels)
    trace.final_test_acc = metrics["accuracy"]
    trace.final_test_loss = metrics["mean_loss"]
    return trace


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else format(v, ".17g")


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in trace.records:
            w.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])


def summary_dict(spec, trace):
    p = trace.final_dist
    return {
        "final_test_acc": trace.final_test_acc,
        "final_test_loss": trace.final_test_loss,
        "final_weighted_loss": trace.records[-1].weighted_loss,
        "final_noisy_mass": None if math.isnan(trace.records[-1].noisy_mass) else trace.records[-1].noisy_mass,
        "initial_noisy_mass": None if math.isnan(trace.records[0].noisy_mass) else trace.records[0].noisy_mass,
        "train_noise_rate": trace.noise_rate,
        "max_probability": float(p.max()),
        "epochs": len(trace.records) - 1,
        "spec": spec.to_dict(),
    }


def write_summary_json(spec, trace, path):
    with open(path, "w") as fh:
        json.dump(summary_dict(spec, trace), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_oned_trace(trace, path):
    rows = list(trace.rows())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([_fmt(v) for v in row.values()])


@dataclass
class GridRow:
    eta: float
    test_acc: float
    max_probability: float
    degenerate: bool


@dataclass
class GridResult:
    rows: list
    selected_eta: float


def _grid_run(spec):
    trace = run_experiment(spec)
    pmax = float(trace.final_dist.max())
    return GridRow(spec.optim.eta, trace.final_test_acc, pmax, pmax > DEGENERATE_MASS)


def grid_search_eta(spec, candidates, workers=0):
    """One MR run per eta on the same data, init and shuffles.

    Rows come back sorted by test accuracy (ties keep candidate order);
    ``degenerate`` flags runs where one example holds almost all the mass.
    """
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ParameterError("need at least one eta candidate")
    specs = [spec.replace(optim={"eta": eta}, method={"mr": True}) for eta in candidates]
    if workers and workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(specs))) as pool:
            rows = list(pool.map(_grid_run, specs))
    else:
        rows = [_grid_run(s) for s in specs]
    order = sorted(range(len(rows)), key=lambda i: (-rows[i].test_acc, i))
    rows = [rows[i] for i in order]
    return GridResult(rows, rows[0].eta)


def write_grid_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "test_acc", "max_probability", "degenerate", "selected"])
        for r in result.rows:
            w.writerow([_fmt(r.eta), _fmt(r.test_acc), _fmt(r.max_probability), int(r.degenerate),
                        int(r.eta == result.selected_eta)])


def threads_from_env():
    raw = os.environ.get("MR_OPTIM_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"MR_OPTIM_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ParameterError("MR_OPTIM_THREADS must be >= 0")
    return value


__all__ = [
    "DatasetSpec", "ModelSpec", "MethodSpec", "ExperimentSpec", "EpochRecord", "TrainingTrace",
    "GridRow", "GridResult", "spec_from_dict", "load_spec", "run_experiment",
    "evaluate", "grid_search_eta", "write_trace_csv", "write_summary_json", "write_grid_csv",
    "write_oned_trace", "threads_from_env",
]
