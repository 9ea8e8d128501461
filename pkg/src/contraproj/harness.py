"""Seeded experiment grids over the synthetic model, with deterministic CSV I/O.

Each runner expands a parameter grid into cells, derives one 64-bit seed per
(base seed, cell) pair, evaluates cells independently (optionally in a process
pool), and assembles a :class:`ResultTable` sorted by grid coordinates so that
serial and parallel runs emit identical bytes.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import itertools
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ._version import __version__
from .asymptotics import (
    AsymptoticProblem,
    delta_star,
    solve_asymptotics,
)
from .downstream import (
    EtaProjector,
    apply_eta,
    gmm_test_error,
    lowdim_asymptotic_error,
    max_margin,
    ridge_coef_scale_root,
    ridge_logistic_fit,
)
from .gmm import GmmConfig, Spike, derive_seed, sample_feature_matrix
from .inhomo import InhomoConfig, solve_T_star
from .loss import LossContext
from .phase import PhaseConfig, classify_regime
from .trainer import TrainConfig, TrainingDivergedError, spectral_report, train_projector

logger = logging.getLogger(__name__)

PHASE_HEATMAP = "PhaseHeatmap"
ETA_SWEEP = "EtaSweep"
CGMT_TABLE = "CgmtTable"
INHOMO_CURVE = "InhomoCurve"
LOWDIM_LOGISTIC = "LowdimLogistic"
PROJECTOR_DIAGNOSTICS = "ProjectorDiagnostics"


class SpecError(ValueError):
    """Experiment description failed validation."""


class FeatureParseError(ValueError):
    """A feature CSV could not be parsed into a matrix plus labels."""


# Parameter schema per experiment kind: (required names, optional names).
_TRAIN_KNOBS = frozenset({"epochs", "step_size", "batch_size"})
_SCHEMAS: Dict[str, Tuple[frozenset, frozenset]] = {
    PHASE_HEATMAP: (frozenset({"tau", "sigma_aug", "n", "p", "mu_norm"}), _TRAIN_KNOBS),
    ETA_SWEEP: (frozenset({"eta", "rho", "p", "n"}), frozenset()),
    CGMT_TABLE: (frozenset({"delta", "rho", "eta"}), frozenset()),
    INHOMO_CURVE: (
        frozenset({"tau", "n", "p", "mu_norm", "sigma_aug", "rho_aug", "r"}),
        _TRAIN_KNOBS,
    ),
    LOWDIM_LOGISTIC: (frozenset({"eta", "lambda", "n", "p", "mu_norm"}), frozenset()),
    PROJECTOR_DIAGNOSTICS: (
        frozenset({"tau", "sigma_aug", "input_path", "label_column"}),
        _TRAIN_KNOBS,
    ),
}

# Row ordering: grid coordinates (then base seed) so serial and parallel
# execution assemble byte-identical tables.
_SORT_KEYS: Dict[str, Tuple[str, ...]] = {
    PHASE_HEATMAP: ("tau", "sigma_aug"),
    ETA_SWEEP: ("p", "rho", "eta"),
    CGMT_TABLE: ("delta", "rho", "eta"),
    INHOMO_CURVE: ("tau",),
    LOWDIM_LOGISTIC: ("n", "p", "mu_norm", "eta", "lambda"),
    PROJECTOR_DIAGNOSTICS: ("tau", "sigma_aug", "sv_index"),
}

_COLUMNS: Dict[str, Tuple[str, ...]] = {
    PHASE_HEATMAP: ("tau", "sigma_aug", "T_empirical", "regime_theory", "tau_star",
                    "base_seed", "cell_seed"),
    ETA_SWEEP: ("p", "rho", "eta", "err_empirical", "kappa_hat", "u_hat",
                "predicted_error", "separable", "base_seed", "cell_seed"),
    CGMT_TABLE: ("delta", "rho", "eta", "c", "kappa_star", "u_star", "delta_star",
                 "predicted_error", "regime", "base_seed", "cell_seed"),
    INHOMO_CURVE: ("tau", "T_theory", "T_empirical", "tau1_star", "phase",
                   "base_seed", "cell_seed"),
    LOWDIM_LOGISTIC: ("n", "p", "mu_norm", "eta", "lambda", "err_empirical",
                      "err_theory", "kappa_psi", "base_seed", "cell_seed"),
    PROJECTOR_DIAGNOSTICS: ("tau", "sigma_aug", "sv_index", "singular_value",
                            "mu_score_cum", "base_seed", "cell_seed"),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a kind tag, a parameter grid, seeds, and an output dir.

    Grid values may be scalars (held fixed) or lists (swept); the cell set is
    the Cartesian product of the swept values.
    """

    kind: str
    grid: Mapping[str, object]
    seeds: Tuple[int, ...]
    output_dir: Path

    def __post_init__(self) -> None:
        if self.kind not in _SCHEMAS:
            raise SpecError(f"unknown experiment kind {self.kind!r}")
        required, optional = _SCHEMAS[self.kind]
        names = set(self.grid)
        missing = required - names
        if missing:
            raise SpecError(f"{self.kind}: missing grid parameters {sorted(missing)}")
        unknown = names - required - optional
        if unknown:
            raise SpecError(f"{self.kind}: unknown grid parameters {sorted(unknown)}")
        if len(self.seeds) == 0:
            raise SpecError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read experiment spec {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise SpecError("experiment spec must be a JSON object")
        extra = set(raw) - {"kind", "grid", "seeds", "output_dir"}
        if extra:
            raise SpecError(f"unknown spec fields {sorted(extra)}")
        try:
            return cls(
                kind=raw["kind"],
                grid=dict(raw["grid"]),
                seeds=tuple(raw.get("seeds", ())),
                output_dir=Path(raw.get("output_dir", ".")),
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed experiment spec: {exc}") from exc

    def content_hash(self) -> str:
        payload = json.dumps(
            {"kind": self.kind,
             "grid": {k: self.grid[k] for k in sorted(self.grid)},
             "seeds": list(self.seeds)},
            sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.blake2b(payload.encode(), digest_size=8).hexdigest()

    def cells(self) -> List[Dict[str, object]]:
        """Cartesian product of swept parameters; scalars repeat into each cell."""
        keys = sorted(self.grid)
        pools = []
        for k in keys:
            v = self.grid[k]
            pools.append(list(v) if isinstance(v, (list, tuple)) else [v])
        return [dict(zip(keys, combo)) for combo in itertools.product(*pools)]


@dataclass
class ResultTable:
    """Column-oriented results with provenance (spec hash, seeds, version)."""

    columns: Dict[str, list]
    provenance: Tuple[str, str, str]
    flagged_rows: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")
        if not all(self.provenance):
            raise ValueError("provenance fields must be non-empty")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def row(self, i: int) -> Dict[str, object]:
        return {k: v[i] for k, v in self.columns.items()}

    def write_csv(self, path, *, timestamp: bool = True) -> None:
        spec_hash, seeds, version = self.provenance
        lines = [f"# spec_hash: {spec_hash}", f"# seeds: {seeds}",
                 f"# version: {version}"]
        if timestamp:
            now = datetime.datetime.now(datetime.timezone.utc).isoformat()
            lines.append(f"# created: {now}")
        if self.flagged_rows:
            lines.append("# flagged_rows: " + ",".join(map(str, self.flagged_rows)))
        with open(path, "w", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            names = list(self.columns)
            writer.writerow(names)
            for i in range(self.n_rows):
                writer.writerow([_format_value(self.columns[k][i]) for k in names])


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def read_result_csv(path) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Read back an emitted table: (provenance comments, header, raw rows)."""
    meta: Dict[str, str] = {}
    header: List[str] = []
    rows: List[List[str]] = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            reader = csv.reader([line] + list(fh))
            header = next(reader)
            rows = [r for r in reader]
            break
    return meta, header, rows


# ---------------------------------------------------------------------------
# per-cell evaluation (top-level functions so process pools can pickle them)

def _signal_config(p: int, mu_norm: float, sigma_aug: float,
                   spike: Optional[Spike] = None) -> GmmConfig:
    mu = np.zeros(p)
    mu[0] = mu_norm
    return GmmConfig(p=p, mu=mu, sigma_aug=sigma_aug, spike=spike)


def _train_config(cell: Mapping[str, object], cell_seed: int) -> TrainConfig:
    return TrainConfig(
        step_size=float(cell.get("step_size", 0.2)),
        epochs=int(cell.get("epochs", 150)),
        batch_size=int(cell.get("batch_size", 64)),
        seed=derive_seed(cell_seed, "train"),
    )


def _phase_cell(cell, base_seed, cell_seed):
    tau = float(cell["tau"])
    sigma_aug = float(cell["sigma_aug"])
    p, n = int(cell["p"]), int(cell["n"])
    mu_norm = float(cell["mu_norm"])
    pcfg = PhaseConfig(sigma_aug_sq=sigma_aug ** 2, tau=tau, mu_norm_sq=mu_norm ** 2)
    report = classify_regime(pcfg)
    row = {"tau": tau, "sigma_aug": sigma_aug, "T_empirical": math.nan,
           "regime_theory": report.regime, "tau_star": report.tau_star,
           "base_seed": base_seed, "cell_seed": cell_seed}
    cfg = _signal_config(p, mu_norm, sigma_aug)
    H0, _ = sample_feature_matrix(cfg, n, seed=derive_seed(cell_seed, "data"))
    try:
        trace = train_projector(cfg, LossContext(cfg, tau),
                                _train_config(cell, cell_seed), H0)
    except TrainingDivergedError as exc:
        logger.warning("phase cell tau=%g sigma_aug=%g diverged: %s", tau, sigma_aug, exc)
        return row, True
    row["T_empirical"] = trace.T_per_epoch[-1]
    return row, False


def _eta_cell(cell, base_seed, cell_seed):
    p, n = int(cell["p"]), int(cell["n"])
    rho, eta = float(cell["rho"]), float(cell["eta"])
    cfg = _signal_config(p, math.sqrt(rho), 0.0)
    H0, y = sample_feature_matrix(cfg, n, seed=derive_seed(cell_seed, "data"))
    proj = EtaProjector(eta=eta, mu=cfg.mu)
    Z = apply_eta(proj, H0)
    fit = max_margin(Z, y, mu=cfg.mu)
    prob = AsymptoticProblem(delta=n / p, rho=rho, eta=eta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        predicted = solve_asymptotics(prob).predicted_error
    if fit.separable:
        err = gmm_test_error(fit.beta_hat, 0.0, cfg.mu, proj)
        u_hat = fit.u_hat / (1.0 + eta)
        kappa_hat = fit.margin
    else:
        err, u_hat, kappa_hat = 0.5, math.nan, 0.0
    row = {"p": p, "rho": rho, "eta": eta, "err_empirical": err,
           "kappa_hat": kappa_hat, "u_hat": u_hat, "predicted_error": predicted,
           "separable": fit.separable, "base_seed": base_seed, "cell_seed": cell_seed}
    return row, False


def _cgmt_cell(cell, base_seed, cell_seed):
    delta, rho, eta = float(cell["delta"]), float(cell["rho"]), float(cell["eta"])
    prob = AsymptoticProblem(delta=delta, rho=rho, eta=eta)
    threshold = delta_star(rho)
    flagged = abs(delta - threshold) <= 0.01 * threshold
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve_asymptotics(prob)
    row = {"delta": delta, "rho": rho, "eta": eta, "c": prob.c,
           "kappa_star": sol.kappa_star, "u_star": sol.u_star,
           "delta_star": sol.delta_star, "predicted_error": sol.predicted_error,
           "regime": sol.regime, "base_seed": base_seed, "cell_seed": cell_seed}
    return row, flagged


def _inhomo_cell(cell, base_seed, cell_seed):
    tau = float(cell["tau"])
    p, n = int(cell["p"]), int(cell["n"])
    mu_norm = float(cell["mu_norm"])
    sigma_aug = float(cell["sigma_aug"])
    rho_aug, r = float(cell["rho_aug"]), float(cell["r"])
    v_aug = np.zeros(p)
    v_aug[0] = r
    v_aug[1] = math.sqrt(max(0.0, 1.0 - r * r))
    cfg = _signal_config(p, mu_norm, sigma_aug, spike=Spike(rho_aug=rho_aug, v_aug=v_aug))
    sol = solve_T_star(InhomoConfig.from_model(cfg, tau))
    row = {"tau": tau, "T_theory": sol.T_star, "T_empirical": math.nan,
           "tau1_star": sol.tau1_star, "phase": sol.regime,
           "base_seed": base_seed, "cell_seed": cell_seed}
    H0, _ = sample_feature_matrix(cfg, n, seed=derive_seed(cell_seed, "data"))
    try:
        trace = train_projector(cfg, LossContext(cfg, tau),
                                _train_config(cell, cell_seed), H0)
    except TrainingDivergedError as exc:
        logger.warning("spiked cell tau=%g diverged: %s", tau, exc)
        return row, True
    row["T_empirical"] = trace.T_per_epoch[-1]
    return row, False


def _lowdim_cell(cell, base_seed, cell_seed):
    n, p = int(cell["n"]), int(cell["p"])
    mu_norm, eta = float(cell["mu_norm"]), float(cell["eta"])
    lam = float(cell["lambda"])
    cfg = _signal_config(p, mu_norm, 0.0)
    H0, y = sample_feature_matrix(cfg, n, seed=derive_seed(cell_seed, "data"))
    proj = EtaProjector(eta=eta, mu=cfg.mu)
    fit = ridge_logistic_fit(apply_eta(proj, H0), y, lam)
    err = gmm_test_error(fit.beta_hat, fit.gamma_hat, cfg.mu, proj)
    try:
        kappa_psi = ridge_coef_scale_root(lam, eta, mu_norm)
    except Exception as exc:  # no admissible root for this (lambda, mu) corner
        logger.warning("psi root failed at lambda=%g eta=%g: %s", lam, eta, exc)
        kappa_psi = math.nan
    row = {"n": n, "p": p, "mu_norm": mu_norm, "eta": eta, "lambda": lam,
           "err_empirical": err, "err_theory": lowdim_asymptotic_error(mu_norm),
           "kappa_psi": kappa_psi, "base_seed": base_seed, "cell_seed": cell_seed}
    return row, False


def _diagnostics_cell(cell, base_seed, cell_seed):
    tau = float(cell["tau"])
    sigma_aug = float(cell["sigma_aug"])
    X, y = ingest_features(cell["input_path"], str(cell["label_column"]))
    mu_hat = 0.5 * (X[y == 1].mean(axis=0) - X[y == -1].mean(axis=0))
    cfg = GmmConfig(p=X.shape[1], mu=mu_hat, sigma_aug=sigma_aug)
    trace = train_projector(cfg, LossContext(cfg, tau),
                            _train_config(cell, cell_seed), X)
    report = spectral_report(trace.final_projector, mu_hat)
    rows = []
    for j, (sv, score) in enumerate(zip(report.singular_values, report.mu_scores)):
        rows.append(({"tau": tau, "sigma_aug": sigma_aug, "sv_index": j,
                      "singular_value": sv, "mu_score_cum": score,
                      "base_seed": base_seed, "cell_seed": cell_seed}, False))
    return rows


_CELL_FUNCS: Dict[str, Callable] = {
    PHASE_HEATMAP: _phase_cell,
    ETA_SWEEP: _eta_cell,
    CGMT_TABLE: _cgmt_cell,
    INHOMO_CURVE: _inhomo_cell,
    LOWDIM_LOGISTIC: _lowdim_cell,
    PROJECTOR_DIAGNOSTICS: _diagnostics_cell,
}


def _cell_worker(task):
    kind, cell, base_seed, cell_seed = task
    out = _CELL_FUNCS[kind](cell, base_seed, cell_seed)
    return out if isinstance(out, list) else [out]


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Evaluate every (seed, cell) pair and assemble the sorted result table."""
    tasks = []
    for base_seed in spec.seeds:
        for cell in spec.cells():
            tags = [f"{k}={cell[k]!r}" for k in sorted(cell)]
            cell_seed = derive_seed(base_seed, spec.kind, *tags)
            tasks.append((spec.kind, cell, base_seed, cell_seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_cell_worker, tasks))
    else:
        chunks = [_cell_worker(t) for t in tasks]

    names = _COLUMNS[spec.kind]
    flat = [pair for chunk in chunks for pair in chunk]
    sort_keys = _SORT_KEYS[spec.kind] + ("base_seed",)
    flat.sort(key=lambda pair: tuple(float(pair[0][k]) for k in sort_keys))
    columns: Dict[str, list] = {k: [row[k] for row, _ in flat] for k in names}
    flagged = [i for i, (_, bad) in enumerate(flat) if bad]
    table = ResultTable(
        columns=columns,
        provenance=(spec.content_hash(),
                    ",".join(map(str, spec.seeds)),
                    __version__),
        flagged_rows=flagged,
    )
    return table


def run_phase_heatmap(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Trained expansion measure over a (τ, σ_aug) grid plus theory columns."""
    if spec.kind != PHASE_HEATMAP:
        raise SpecError(f"expected kind {PHASE_HEATMAP}, got {spec.kind}")
    return run_experiment(spec, jobs)


def run_eta_sweep(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Max-margin downstream error across one-parameter projectors."""
    if spec.kind != ETA_SWEEP:
        raise SpecError(f"expected kind {ETA_SWEEP}, got {spec.kind}")
    return run_experiment(spec, jobs)


def run_cgmt_table(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Scalar-system solutions tabulated over (δ, ρ, η)."""
    if spec.kind != CGMT_TABLE:
        raise SpecError(f"expected kind {CGMT_TABLE}, got {spec.kind}")
    return run_experiment(spec, jobs)


def run_inhomo_curve(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Theoretical vs trained alignment under spiked augmentation, per τ."""
    if spec.kind != INHOMO_CURVE:
        raise SpecError(f"expected kind {INHOMO_CURVE}, got {spec.kind}")
    return run_experiment(spec, jobs)


def run_lowdim_logistic(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Ridge-logistic downstream error in the fixed-dimension regime."""
    if spec.kind != LOWDIM_LOGISTIC:
        raise SpecError(f"expected kind {LOWDIM_LOGISTIC}, got {spec.kind}")
    return run_experiment(spec, jobs)


def run_projector_diagnostics(spec: ExperimentSpec, jobs: int = 1) -> ResultTable:
    """Spectral diagnostics of projectors trained on user-supplied features."""
    if spec.kind != PROJECTOR_DIAGNOSTICS:
        raise SpecError(f"expected kind {PROJECTOR_DIAGNOSTICS}, got {spec.kind}")
    return run_experiment(spec, jobs)


# ---------------------------------------------------------------------------
# feature-matrix ingestion for externally extracted representations

def ingest_features(path, label_column: str):
    """Read a feature CSV (header row, one label column) into (X, y).

    The two distinct label values are mapped to -1/+1 (numerically when both
    parse as numbers, else lexicographically); the mapping is logged.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FeatureParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise FeatureParseError(f"{path}: empty file")
        if label_column not in header:
            raise FeatureParseError(
                f"{path}: label column {label_column!r} not found in header {header}")
        label_idx = header.index(label_column)
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        if not feat_idx:
            raise FeatureParseError(f"{path}: no feature columns besides the label")
        feats: List[List[float]] = []
        labels: List[str] = []
        bad_lines: List[int] = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise FeatureParseError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(rec)}")
            try:
                vals = [float(rec[i]) for i in feat_idx]
            except ValueError:
                raise FeatureParseError(
                    f"{path}: line {lineno}: non-numeric feature value") from None
            if not all(math.isfinite(v) for v in vals):
                bad_lines.append(lineno)
            feats.append(vals)
            labels.append(rec[label_idx])
    if bad_lines:
        raise FeatureParseError(
            f"{path}: non-finite feature values on lines {bad_lines}")
    if not feats:
        raise FeatureParseError(f"{path}: no data rows")
    distinct = sorted(set(labels))
    if len(distinct) != 2:
        raise FeatureParseError(
            f"{path}: need exactly 2 distinct labels, found {distinct[:5]}")
    try:
        ordered = sorted(distinct, key=float)
    except ValueError:
        ordered = distinct
    mapping = {ordered[0]: -1, ordered[1]: 1}
    logger.info("label mapping: %r -> -1, %r -> +1", ordered[0], ordered[1])
    X = np.asarray(feats, dtype=float)
    y = np.asarray([mapping[lab] for lab in labels], dtype=int)
    return X, y


def emit_features(path, X: np.ndarray, y: np.ndarray,
                  label_column: str = "label") -> None:
    """Inverse of :func:`ingest_features`; floats are written with repr so the
    round trip is bit-exact."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j}" for j in range(X.shape[1])] + [label_column])
        for i in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[i]] + [str(int(y[i]))])
