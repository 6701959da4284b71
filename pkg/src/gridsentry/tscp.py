"""Loading-scenario generation and the stability-shift regressor.

Running a swing simulation for every contingency and every credible loading
condition is too slow for real-time use, so this module learns the mapping
from a loading condition to the generation shift that restores stability:

* per-load Gaussian kernel densities fitted on historical megawatt samples
  (Silverman's rule bandwidth), with seeded sampling clipped to the observed
  range, produce a ``ScenarioSet``;
* each scenario is labeled by the full simulation pipeline (stable cases
  contribute a zero label);
* a least-squares affine model (optionally ridge-regularized) maps the load
  vector to the predicted shift; predictions are clamped at zero and flagged;
* evaluation reports RMSE, the coefficient of determination, mean bias
  deviation (positive means the model under-predicts the needed shift, the
  unsafe direction), and the R^2 drop under seeded relative input noise.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .grid_model import Contingency, GridCase, InjectionState
from .transient import SimParams, shift_dispatch, transient_correction

__all__ = [
    "LoadDensity",
    "LoadKde",
    "ScenarioSet",
    "TscpModel",
    "Prediction",
    "TscpMetrics",
    "fit_kde",
    "sample_scenarios",
    "fit_tscp",
    "predict_tscf",
    "evaluate",
    "label_scenarios",
    "save_model",
    "load_model",
    "write_scenarios",
    "read_scenarios",
]


# ---------------------------------------------------------------------------
# kernel density estimation


@dataclass(frozen=True)
class LoadDensity:
    """Gaussian-kernel density over one load's historical samples."""

    points: np.ndarray
    bandwidth: float
    degenerate: bool = False


@dataclass(frozen=True)
class LoadKde:
    """One density per load, keyed by load id, column order preserved."""

    densities: dict[str, LoadDensity]

    @property
    def load_ids(self) -> tuple[str, ...]:
        return tuple(self.densities)


def silverman_bandwidth(x: np.ndarray) -> float:
    """Rule-of-thumb kernel width: 0.9 min(sd, IQR/1.34) n^(-1/5)."""
    n = len(x)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def fit_kde(history: Mapping[str, Sequence[float]]) -> LoadKde:
    """Fit an independent Gaussian-kernel density per load.

    Constant (degenerate) histories get a zero bandwidth — draws repeat the
    constant — and raise a warning since they carry no variability.
    """
    if not history:
        raise ValueError("need at least one load history")
    densities: dict[str, LoadDensity] = {}
    for load_id, values in history.items():
        x = np.asarray(values, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise ValueError(f"load {load_id!r}: need at least 2 samples, got {x.size}")
        h = silverman_bandwidth(x)
        degenerate = h <= 0.0
        if degenerate:
            warnings.warn(
                f"load {load_id!r} has constant history; density collapses to a point",
                stacklevel=2,
            )
        densities[load_id] = LoadDensity(points=x, bandwidth=max(h, 0.0), degenerate=degenerate)
    return LoadKde(densities=densities)


@dataclass(frozen=True)
class ScenarioSet:
    """Matrix of load samples in MW, one row per scenario."""

    load_ids: tuple[str, ...]
    samples: np.ndarray
    provenance: str  # "kde" | "file"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "load_ids", tuple(self.load_ids))
        if s.ndim != 2:
            raise ValueError("samples must be a 2-D matrix [n_samples x n_loads]")
        if s.shape[0] < 1:
            raise ValueError("a scenario set needs at least one sample")
        if s.shape[1] != len(self.load_ids):
            raise ValueError(
                f"{len(self.load_ids)} load ids but {s.shape[1]} sample columns"
            )

    @property
    def n(self) -> int:
        return int(self.samples.shape[0])

    def take(self, rows: Sequence[int]) -> "ScenarioSet":
        return ScenarioSet(self.load_ids, self.samples[list(rows), :], self.provenance)

    def row_loads(self, i: int) -> dict[str, float]:
        return {g: float(v) for g, v in zip(self.load_ids, self.samples[i])}


def sample_scenarios(
    kde: LoadKde,
    n: int,
    seed: int,
    bounds: Mapping[str, tuple[float, float]] | None = None,
) -> ScenarioSet:
    """Draw ``n`` independent loading conditions from the fitted densities.

    Each draw picks a historical point and jitters it by the kernel width,
    then clips to the observed range (or to explicit per-load ``bounds``).
    Deterministic for a fixed seed.
    """
    if n <= 0:
        raise ValueError("need a positive number of draws")
    rng = np.random.default_rng(seed)
    cols = []
    for load_id in kde.load_ids:
        d = kde.densities[load_id]
        idx = rng.integers(0, len(d.points), size=n)
        draw = d.points[idx]
        if not d.degenerate:
            draw = draw + d.bandwidth * rng.standard_normal(n)
        lo, hi = (bounds or {}).get(
            load_id, (float(np.min(d.points)), float(np.max(d.points)))
        )
        cols.append(np.clip(draw, lo, hi))
    return ScenarioSet(load_ids=kde.load_ids, samples=np.column_stack(cols), provenance="kde")


# ---------------------------------------------------------------------------
# regression model


@dataclass(frozen=True)
class TscpModel:
    """Affine predictor of the stabilizing generation shift from loads."""

    load_ids: tuple[str, ...]
    weights: np.ndarray  # one per load
    intercept: float
    contingency_label: str
    n_train: int
    batch_size: int
    ridge: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "load_ids", tuple(self.load_ids))
        if w.ndim != 1 or len(w) != len(self.load_ids):
            raise ValueError("one weight per load id is required")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.intercept)):
            raise ValueError("model weights must be finite")


def fit_tscp(
    scenarios: ScenarioSet,
    y: Sequence[float],
    contingency_label: str = "",
    ridge: float = 0.0,
) -> TscpModel:
    """Least-squares fit of shift labels on load columns plus an intercept.

    ``ridge > 0`` adds a quadratic penalty on the load weights (never on the
    intercept) and tolerates rank deficiency; the plain fit rejects rank
    deficiency outright.
    """
    y = np.asarray(y, dtype=float)
    x = scenarios.samples
    if y.ndim != 1 or len(y) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} scenarios but {y.size} labels")
    a = np.hstack([x, np.ones((x.shape[0], 1))])
    if ridge < 0:
        raise ValueError("regularization strength must be nonnegative")
    if ridge == 0.0:
        if np.linalg.matrix_rank(a) < a.shape[1]:
            raise ValueError(
                "design matrix is rank deficient; pass ridge > 0 to regularize"
            )
        theta, *_ = np.linalg.lstsq(a, y, rcond=None)
    else:
        pen = np.eye(a.shape[1])
        pen[-1, -1] = 0.0
        theta = np.linalg.solve(a.T @ a + ridge * pen, a.T @ y)
    return TscpModel(
        load_ids=scenarios.load_ids,
        weights=theta[:-1],
        intercept=float(theta[-1]),
        contingency_label=contingency_label,
        n_train=len(y),
        batch_size=len(y),
        ridge=float(ridge),
    )


@dataclass(frozen=True)
class Prediction:
    """Clamped shift prediction; ``clamped`` marks raw negatives cut to 0."""

    value: float | np.ndarray
    clamped: bool | np.ndarray
    raw: float | np.ndarray


def predict_tscf(
    m: TscpModel, loads: Mapping[str, float] | Sequence[float] | np.ndarray
) -> Prediction:
    """Evaluate the affine model; negative raw values clamp to zero.

    Accepts a mapping keyed by load id, a single load vector, or a matrix of
    row vectors (one prediction per row).
    """
    if isinstance(loads, Mapping):
        vec = np.array([loads[g] for g in m.load_ids], dtype=float)
        return predict_tscf(m, vec)
    x = np.asarray(loads, dtype=float)
    if x.ndim == 1:
        if len(x) != len(m.load_ids):
            raise ValueError(f"expected {len(m.load_ids)} loads, got {len(x)}")
        raw = float(x @ m.weights + m.intercept)
        return Prediction(value=max(raw, 0.0), clamped=raw < 0.0, raw=raw)
    if x.ndim == 2:
        if x.shape[1] != len(m.load_ids):
            raise ValueError(f"expected {len(m.load_ids)} load columns, got {x.shape[1]}")
        raw = x @ m.weights + m.intercept
        return Prediction(value=np.maximum(raw, 0.0), clamped=raw < 0.0, raw=raw)
    raise ValueError("loads must be a mapping, vector, or matrix")


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class TscpMetrics:
    """Test-set scores; ``mbd > 0`` means the unsafe under-prediction bias."""

    rmse: float
    r2: float
    mbd: float
    r2_robustness: float
    noise_level: float
    n_test: int

    @property
    def unsafe_bias(self) -> bool:
        return self.mbd > 0.0


def _r2(y: np.ndarray, yhat: np.ndarray) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def evaluate(
    m: TscpModel,
    scenarios: ScenarioSet,
    y: Sequence[float],
    noise_level: float = 0.01,
    seed: int = 0,
) -> TscpMetrics:
    """Score the model on held-out labels.

    ``r2_robustness`` is the R^2 drop when every input load is perturbed by
    seeded Gaussian noise with relative standard deviation ``noise_level``
    (0 disables the perturbation and reports exactly 0).
    """
    y = np.asarray(y, dtype=float)
    x = scenarios.samples
    if y.ndim != 1 or len(y) != x.shape[0] or len(y) == 0:
        raise ValueError("test set must be nonempty with one label per scenario")
    yhat = np.asarray(predict_tscf(m, x).value, dtype=float)
    rmse = float(np.sqrt(np.mean((y - yhat) ** 2)))
    r2 = _r2(y, yhat)
    mbd = float(np.mean(y - yhat))
    if noise_level > 0.0:
        rng = np.random.default_rng(seed)
        noisy = x * (1.0 + noise_level * rng.standard_normal(x.shape))
        r2_noisy = _r2(y, np.asarray(predict_tscf(m, noisy).value, dtype=float))
        robustness = r2 - r2_noisy
    else:
        robustness = 0.0
    return TscpMetrics(
        rmse=rmse,
        r2=r2,
        mbd=mbd,
        r2_robustness=robustness,
        noise_level=float(noise_level),
        n_test=len(y),
    )


# ---------------------------------------------------------------------------
# labeling through the swing pipeline


def label_scenarios(
    case: GridCase,
    contingency: Contingency,
    scenarios: ScenarioSet,
    base_inj: InjectionState,
    params: SimParams | None = None,
    max_rounds: int = 5,
) -> np.ndarray:
    """Compute the shift label for every scenario row.

    Each row overrides the listed loads and rescales generation pro rata so
    total generation matches total load. The label is the cumulative shift
    the verify-and-repeat procedure dispatches before the simulation comes
    back stable (zero when the first run is already stable) — the same loop
    the real-time stage runs, so labels match what would be commanded.
    """
    params = params or SimParams()
    total_gen0 = sum(base_inj.gen_p.values())
    if total_gen0 <= 0:
        raise ValueError("base injections must have positive total generation")
    out = np.zeros(scenarios.n)
    for i in range(scenarios.n):
        load_p = dict(base_inj.load_p)
        load_p.update(scenarios.row_loads(i))
        factor = sum(load_p.values()) / total_gen0
        gen_p = {g: v * factor for g, v in base_inj.gen_p.items()}
        inj = InjectionState(gen_p=gen_p, load_p=load_p)
        total = 0.0
        for _ in range(max_rounds):
            dp, res, _ = transient_correction(case, inj, contingency, params)
            if dp <= 0.0:
                break
            inj = shift_dispatch(case, inj, res.cm, res.nm, dp)
            total += dp
        out[i] = total
    return out


# ---------------------------------------------------------------------------
# persistence

_MODEL_SCHEMA = "tscp-model/v1"


def save_model(m: TscpModel, path: str | Path) -> None:
    blob = {
        "schema": _MODEL_SCHEMA,
        "load_ids": list(m.load_ids),
        "weights": [float(w) for w in m.weights],
        "intercept": m.intercept,
        "contingency_label": m.contingency_label,
        "n_train": m.n_train,
        "batch_size": m.batch_size,
        "ridge": m.ridge,
    }
    Path(path).write_text(json.dumps(blob, indent=2) + "\n")


def load_model(path: str | Path) -> TscpModel:
    blob = json.loads(Path(path).read_text())
    if blob.get("schema") != _MODEL_SCHEMA:
        raise ValueError(f"unrecognized model schema: {blob.get('schema')!r}")
    return TscpModel(
        load_ids=tuple(blob["load_ids"]),
        weights=np.array(blob["weights"], dtype=float),
        intercept=float(blob["intercept"]),
        contingency_label=blob["contingency_label"],
        n_train=int(blob["n_train"]),
        batch_size=int(blob["batch_size"]),
        ridge=float(blob.get("ridge", 0.0)),
    )


def write_scenarios(s: ScenarioSet, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(s.load_ids)
        for row in s.samples:
            w.writerow([f"{v:.10g}" for v in row])


def read_scenarios(path: str | Path) -> ScenarioSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError("scenario file needs a header and at least one row")
    ids = tuple(rows[0])
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    return ScenarioSet(load_ids=ids, samples=data, provenance="file")
