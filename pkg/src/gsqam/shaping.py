"""GMI-maximising geometric shaping of the per-quadrature PAM levels.

Levels are parameterised by log-increments ``u``: the positive half is
``cumsum(exp(u))``, mirrored about zero and normalised. This keeps the set
ordered and symmetric, so an unconstrained quasi-Newton search applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .bfgs import minimize_bfgs
from .constellation import PamLevels, kurtosis_from_levels, uniform_levels, _check_bits
from .errors import InvalidInputError, InvalidParameterError, InvalidStartError, ModelDomainError
from .gmi import DEFAULT_NODES, ChannelSnr, as_snr, gmi_pam_noise
from .link import kurtosis_coupled_snr

MERGE_TOL = 1e-9
SNR_GRID_RANGE_DB = (10.0, 30.0)


class ShapingMode(str, Enum):
    UNIFORM = "uniform_baseline"
    AWGN = "awgn_tailored"
    NONLINEAR = "nonlinearity_tailored"

    @classmethod
    def parse(cls, value) -> "ShapingMode":
        if isinstance(value, cls):
            return value
        aliases = {"uniform": cls.UNIFORM, "awgn": cls.AWGN, "nonlinear": cls.NONLINEAR, "nlin": cls.NONLINEAR}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameterError(f"unknown shaping mode {value!r}") from None


@dataclass(frozen=True)
class ShapingProblem:
    """What to optimise: bits per dimension, mode and design SNR.

    ``snr_ref`` is the Gaussian-modulation optimum SNR. In nonlinearity mode
    each candidate is evaluated at that SNR scaled by the optimum-SNR ratio
    for its own kurtosis with coupling ratio ``c``.
    """

    m: int
    mode: ShapingMode = ShapingMode.AWGN
    snr_ref: ChannelSnr = field(default_factory=lambda: ChannelSnr.from_db(18.0))
    c: float = 0.0
    quadrature_nodes: int = DEFAULT_NODES

    def __post_init__(self):
        object.__setattr__(self, "m", _check_bits(self.m))
        object.__setattr__(self, "mode", ShapingMode.parse(self.mode))
        object.__setattr__(self, "snr_ref", as_snr(self.snr_ref))
        if not np.isfinite(self.c):
            raise InvalidParameterError("c must be finite")
        if self.quadrature_nodes < 10:
            raise InvalidParameterError("quadrature_nodes must be >= 10")

    @classmethod
    def from_db(cls, m, mode, snr_db, c=0.0, nodes=DEFAULT_NODES):
        return cls(m, ShapingMode.parse(mode), ChannelSnr.from_db(snr_db), float(c), int(nodes))

    @property
    def snr_ref_db(self) -> float:
        return self.snr_ref.db

    def evaluation_snr(self, kurtosis: float) -> ChannelSnr:
        if self.mode is ShapingMode.NONLINEAR:
            return kurtosis_coupled_snr(self.snr_ref, self.c, kurtosis)
        return self.snr_ref

    def coupled(self) -> "ShapingProblem":
        """Same design point, evaluated under the kurtosis-coupled rule."""
        return replace(self, mode=ShapingMode.NONLINEAR)


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 5
    seed: int = 0
    gtol: float = 1e-7
    max_iter: int = 500
    fd_step: float = 1e-6
    perturbation: float = 0.05

    def __post_init__(self):
        if self.restarts < 0:
            raise InvalidParameterError("restarts must be >= 0")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")


@dataclass(frozen=True)
class ShapingResult:
    levels: PamLevels
    gmi_2d: float
    gmi_4d: float
    kurtosis: float
    effective_snr_db: float
    iterations: int
    converged: bool
    mode: ShapingMode = ShapingMode.AWGN
    snr_ref_db: float = float("nan")
    c: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "bits_per_dimension": self.levels.bits,
            "snr_ref_db": self.snr_ref_db,
            "c": self.c,
            "gmi_2d": self.gmi_2d,
            "gmi_4d": self.gmi_4d,
            "kurtosis": self.kurtosis,
            "effective_snr_db": self.effective_snr_db,
            "iterations": self.iterations,
            "converged": self.converged,
            "levels": [float(v) for v in self.levels.levels],
        }


def _merged_levels(positive) -> np.ndarray | None:
    pos = np.sort(np.abs(np.asarray(positive, dtype=float)))
    lv = np.concatenate([-pos[::-1], pos])
    power = np.mean(lv**2)
    if not power > 0:
        return None
    lv = lv / np.sqrt(2.0 * power)
    # snap near-coincident neighbours onto their mean
    out = lv.copy()
    start = 0
    for i in range(1, lv.size + 1):
        if i == lv.size or lv[i] - lv[i - 1] >= MERGE_TOL:
            if i - start > 1:
                out[start:i] = np.mean(lv[start:i])
            start = i
    return out


def _kurtosis_raw(lv: np.ndarray) -> float:
    mu2 = np.mean(lv**2)
    return float((np.mean(lv**4) / mu2**2 + 1.0) / 2.0 - 2.0)


def objective(positive_levels, problem: ShapingProblem) -> float:
    """Per-2D GMI of the symmetric level set built from its positive half.

    Degenerate inputs (coincident levels) are scored as the merged-level
    constellation and an all-zero set scores 0, so the function stays finite
    along any line search. Out-of-domain kurtosis in nonlinearity mode also
    scores 0. Non-finite parameters give NaN.
    """
    p = np.asarray(positive_levels, dtype=float)
    if not np.all(np.isfinite(p)):
        return float("nan")
    with np.errstate(over="ignore", invalid="ignore"):
        lv = _merged_levels(p)
        if lv is None or not np.all(np.isfinite(lv)):
            return 0.0 if lv is None else float("nan")
        try:
            snr = problem.evaluation_snr(_kurtosis_raw(lv))
        except ModelDomainError:
            return 0.0
    return 2.0 * gmi_pam_noise(lv, 0.5 / snr.snr_linear, problem.quadrature_nodes)


def levels_to_params(levels: PamLevels) -> np.ndarray:
    pos = levels.positive
    return np.log(np.diff(np.concatenate([[0.0], pos])))


def params_to_positive(u) -> np.ndarray:
    return np.cumsum(np.exp(np.asarray(u, dtype=float)))


def params_to_levels(u) -> PamLevels:
    return PamLevels.from_positive(params_to_positive(u)).normalized()


def evaluate(levels: PamLevels, problem: ShapingProblem) -> float:
    """Per-2D GMI of a given level set under the problem's evaluation rule."""
    return objective(levels.positive, problem)


def _result(levels, problem, iterations, converged) -> ShapingResult:
    levels = levels.normalized()
    kurt = kurtosis_from_levels(levels)
    gmi2 = evaluate(levels, problem)
    return ShapingResult(
        levels=levels,
        gmi_2d=gmi2,
        gmi_4d=2.0 * gmi2,
        kurtosis=kurt,
        effective_snr_db=problem.evaluation_snr(kurt).db,
        iterations=iterations,
        converged=converged,
        mode=problem.mode,
        snr_ref_db=float(problem.snr_ref_db),
        c=problem.c,
    )


def optimize(problem: ShapingProblem, init: PamLevels | None = None, config: OptimizerConfig | None = None) -> ShapingResult:
    """Maximise GMI over symmetric level sets with multi-start BFGS.

    The first run starts at ``init`` (uniform by default); ``config.restarts``
    further runs start from seeded lognormal perturbations of its increments.
    The best run is kept, so the result is never worse than ``init``.
    """
    config = config or OptimizerConfig()
    if init is None:
        init = uniform_levels(problem.m)
    if init.bits != problem.m:
        raise InvalidInputError(f"init has {init.bits} bits per dimension, problem has {problem.m}")
    if problem.mode is ShapingMode.UNIFORM:
        return _result(init, problem, 0, True)

    u0 = levels_to_params(init)

    def neg(u):
        return -objective(params_to_positive(u), problem)

    if not np.isfinite(neg(u0)):
        raise InvalidStartError("objective is not finite at the initial levels")

    rng = np.random.default_rng(config.seed)
    starts = [u0] + [u0 + rng.normal(0.0, config.perturbation, u0.size) for _ in range(config.restarts)]
    best = None
    for start in starts:
        run = minimize_bfgs(neg, start, gtol=config.gtol, max_iter=config.max_iter, fd_step=config.fd_step)
        if best is None or run.fun < best.fun:
            best = run
    return _result(params_to_levels(best.x), problem, best.iterations, best.converged)


@dataclass(frozen=True)
class DesignPoint:
    snr_db: float
    uniform_4d: float
    awgn_tailored_4d: float
    nonlinearity_tailored_4d: float
    uniform_awgn_rule_4d: float
    awgn_tailored_awgn_rule_4d: float
    kurtosis_awgn: float
    kurtosis_nonlinear: float

    COLUMNS = (
        "snr_db",
        "uniform_4d",
        "awgn_tailored_4d",
        "nonlinearity_tailored_4d",
        "uniform_awgn_rule_4d",
        "awgn_tailored_awgn_rule_4d",
        "kurtosis_awgn",
        "kurtosis_nonlinear",
    )

    def as_row(self) -> list[float]:
        return [getattr(self, k) for k in self.COLUMNS]


@dataclass
class DesignCurve:
    points: list[DesignPoint]
    awgn_results: list[ShapingResult]
    nonlinear_results: list[ShapingResult]


def design_curve(template: ShapingProblem, snr_grid_db, config: OptimizerConfig | None = None) -> DesignCurve:
    """Uniform, AWGN-tailored and nonlinearity-tailored GMI over a design-SNR grid.

    The headline columns evaluate every constellation at its kurtosis-coupled
    SNR for the grid's Gaussian-reference value (coupling ratio
    ``template.c``); the ``*_awgn_rule`` columns evaluate at the grid SNR
    itself. Each grid point warm-starts from the previous point's solution.
    """
    grid = sorted(float(s) for s in snr_grid_db)
    if not grid:
        raise InvalidParameterError("empty SNR grid")
    lo, hi = SNR_GRID_RANGE_DB
    if grid[0] < lo or grid[-1] > hi:
        raise InvalidParameterError(f"design SNR grid must lie within [{lo}, {hi}] dB")
    config = config or OptimizerConfig()
    uni = uniform_levels(template.m)
    warm_awgn = warm_nl = uni
    points, awgn_res, nl_res = [], [], []
    for snr_db in grid:
        snr = ChannelSnr.from_db(snr_db)
        p_awgn = ShapingProblem(template.m, ShapingMode.AWGN, snr, template.c, template.quadrature_nodes)
        p_nl = replace(p_awgn, mode=ShapingMode.NONLINEAR)
        r_awgn = optimize(p_awgn, warm_awgn, config)
        r_nl = optimize(p_nl, warm_nl, config)
        warm_awgn, warm_nl = r_awgn.levels, r_nl.levels
        awgn_res.append(r_awgn)
        nl_res.append(r_nl)
        points.append(
            DesignPoint(
                snr_db=snr_db,
                uniform_4d=2.0 * evaluate(uni, p_nl),
                awgn_tailored_4d=2.0 * evaluate(r_awgn.levels, p_nl),
                nonlinearity_tailored_4d=r_nl.gmi_4d,
                uniform_awgn_rule_4d=2.0 * evaluate(uni, p_awgn),
                awgn_tailored_awgn_rule_4d=r_awgn.gmi_4d,
                kurtosis_awgn=r_awgn.kurtosis,
                kurtosis_nonlinear=r_nl.kurtosis,
            )
        )
    return DesignCurve(points, awgn_res, nl_res)
