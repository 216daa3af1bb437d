"""Launch-power sweeps in the model domain and link-parameter fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, nnls

from .constellation import PamLevels, kurtosis_from_levels
from .errors import FitError, InvalidInputError, InvalidParameterError
from .gmi import DEFAULT_NODES, ChannelSnr, gmi_2d
from .link import (
    LinkParams,
    NliCoefficients,
    db_to_linear,
    dbm_to_watt,
    effective_snr_curve,
    eta_tot,
    linear_to_db,
    optimal_launch_power,
    watt_to_dbm,
)

DEFAULT_POWER_GRID_DBM = tuple(np.round(np.arange(-2.0, 7.0 + 1e-9, 0.25), 10))
MIN_ROWS = 4
MIN_SPAN_DB = 6.0
# a noise term must reach this share of the total at some power to be identifiable
IDENTIFIABLE_SHARE = 0.01

# back-to-back SNR [dB] and eta_tot [dB re 1 W^-2] per constellation
TABLE1 = {
    "uniform": (22.78, 27.61),
    "awgn_tailored": (21.63, 28.23),
    "nonlinearity_tailored": (22.01, 28.08),
}


@dataclass(frozen=True)
class SweepRow:
    power_dbm: float
    snr_db: float
    gmi_2d: float
    gmi_4d: float


@dataclass
class SweepCurve:
    constellation_id: str
    rows: list[SweepRow]
    link: LinkParams
    kurtosis: float

    @property
    def power_dbm(self) -> np.ndarray:
        return np.array([r.power_dbm for r in self.rows])

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([r.snr_db for r in self.rows])

    @property
    def gmi_4d(self) -> np.ndarray:
        return np.array([r.gmi_4d for r in self.rows])

    def peak_gmi(self) -> SweepRow:
        return max(self.rows, key=lambda r: r.gmi_2d)

    def peak_snr(self) -> SweepRow:
        return max(self.rows, key=lambda r: r.snr_db)

    def summary(self) -> dict:
        pg, ps = self.peak_gmi(), self.peak_snr()
        out = {
            "constellation_id": self.constellation_id,
            "kurtosis": self.kurtosis,
            "peak_gmi_power_dbm": pg.power_dbm,
            "peak_gmi_2d": pg.gmi_2d,
            "peak_gmi_4d": pg.gmi_4d,
            "peak_snr_power_dbm": ps.power_dbm,
            "peak_snr_db": ps.snr_db,
            "link": self.link.to_dict(),
        }
        try:
            p_opt, snr_opt = optimal_launch_power(self.link, self.kurtosis)
        except InvalidParameterError:
            out["optimal_launch_power_dbm"] = None
            out["optimal_snr_db"] = None
        else:
            out["optimal_launch_power_dbm"] = watt_to_dbm(p_opt)
            out["optimal_snr_db"] = snr_opt.db
        return out


def run_sweep(
    levels: PamLevels,
    link: LinkParams,
    power_grid_dbm=DEFAULT_POWER_GRID_DBM,
    constellation_id: str = "",
    nodes: int = DEFAULT_NODES,
) -> SweepCurve:
    """SNR and GMI of one square constellation across launch powers."""
    kurt = kurtosis_from_levels(levels)
    powers = np.sort(np.asarray(power_grid_dbm, dtype=float))
    if powers.size == 0:
        raise InvalidParameterError("empty power grid")
    snr = effective_snr_curve(link, kurt, dbm_to_watt(powers))
    rows = []
    for p_dbm, s in zip(powers, np.atleast_1d(snr)):
        g = gmi_2d(levels, ChannelSnr(float(s)), nodes).value
        rows.append(SweepRow(float(p_dbm), float(linear_to_db(s)), g, 2.0 * g))
    return SweepCurve(constellation_id, rows, link, kurt)


@dataclass(frozen=True)
class MeasuredSweep:
    power_dbm: np.ndarray
    snr_db: np.ndarray
    source: str = ""

    def __post_init__(self):
        p = np.asarray(self.power_dbm, dtype=float).ravel()
        s = np.asarray(self.snr_db, dtype=float).ravel()
        if p.size != s.size:
            raise InvalidInputError("power and SNR columns differ in length")
        if p.size < MIN_ROWS:
            raise FitError(f"need at least {MIN_ROWS} rows to fit three noise terms, got {p.size}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(s))):
            raise InvalidInputError("measured sweep contains non-finite values")
        if np.ptp(p) < MIN_SPAN_DB:
            raise FitError(f"measured powers must span at least {MIN_SPAN_DB} dB, got {np.ptp(p):.3g} dB")
        order = np.argsort(p, kind="stable")
        object.__setattr__(self, "power_dbm", p[order])
        object.__setattr__(self, "snr_db", s[order])

    @classmethod
    def from_rows(cls, rows, source=""):
        arr = np.asarray(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], source)


@dataclass
class LinkFit:
    link: LinkParams
    residual_rms_db: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def identifiable(self) -> bool:
        return all(self.diagnostics.get("identifiable", {}).values())

    @property
    def eta_tot(self) -> float:
        return self.link.nli.eta1

    def to_dict(self) -> dict:
        return {
            "link": self.link.to_dict(),
            "residual_rms_db": self.residual_rms_db,
            "identifiable": self.identifiable,
            "diagnostics": self.diagnostics,
        }


def fit_link_params(measured: MeasuredSweep, snr_btb_db: float | None = None) -> LinkFit:
    """Least-squares fit of N(P) = p_ase + eta_tot P^3 + P / SNR_btb.

    N(P) = P / SNR(P) is formed from each row. Rows are weighted by
    1 / N_measured so residuals are relative, matching errors quoted in dB.
    With a known back-to-back SNR the remaining two terms are solved in
    closed form; otherwise all three are fitted by nonnegative least squares.
    """
    p = dbm_to_watt(measured.power_dbm)
    n_meas = p / db_to_linear(measured.snr_db)
    w = 1.0 / n_meas

    if snr_btb_db is not None:
        btb = db_to_linear(float(snr_btb_db))
        target = (n_meas - p / btb) * w
        design = np.column_stack([np.ones_like(p), p**3]) * w[:, None]
        norms = np.linalg.norm(design, axis=0)
        coef, _, rank, sv = np.linalg.lstsq(design / norms, target, rcond=None)
        if rank < 2:
            raise FitError("design matrix is rank deficient")
        coef = coef / norms
        p_ase, eta = float(coef[0]), float(coef[1])
        inv_btb = 1.0 / btb
    else:
        design = np.column_stack([np.ones_like(p), p**3, p]) * w[:, None]
        norms = np.linalg.norm(design, axis=0)
        sv = np.linalg.svd(design / norms, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            raise FitError("design matrix is rank deficient")
        coef, _ = nnls(design / norms, np.ones_like(p))
        coef = coef / norms
        p_ase, eta, inv_btb = (float(v) for v in coef)
        btb = 1.0 / inv_btb if inv_btb > 0 else math.inf

    if not p_ase > 0:
        raise FitError(f"fitted ASE power is not positive ({p_ase:.3g} W)")
    eta_fit = max(eta, 0.0)
    link = LinkParams(p_ase, NliCoefficients.fixed(eta_fit), btb)
    n_model = link.noise_power(0.0, p)
    resid_db = linear_to_db(p / n_model) - measured.snr_db
    shares = {
        "p_ase": float(np.max(p_ase / n_model)),
        "eta_tot": float(np.max(eta_fit * p**3 / n_model)),
        "snr_btb": float(np.max(p * inv_btb / n_model)),
    }
    identifiable = {k: v >= IDENTIFIABLE_SHARE for k, v in shares.items()}
    if snr_btb_db is not None:
        identifiable["snr_btb"] = True
    diagnostics = {
        "max_noise_share": shares,
        "identifiable": identifiable,
        "condition_number": float(sv[0] / sv[-1]) if len(sv) and sv[-1] > 0 else math.inf,
        "rows": int(p.size),
        "fixed_snr_btb": snr_btb_db is not None,
        "raw_eta_tot": eta,
    }
    return LinkFit(link, float(np.sqrt(np.mean(resid_db**2))), diagnostics)


@dataclass(frozen=True)
class Table1Row:
    name: str
    btb_snr_db: float
    eta_tot_db: float


def table1_report(fits, kurtosis=None) -> list[Table1Row]:
    """Back-to-back SNR and eta_tot per constellation, in input order.

    ``fits`` maps a name to a LinkParams or LinkFit. ``kurtosis`` is only
    needed for links whose NLI coefficient depends on modulation.
    """
    rows = []
    for name, fit in fits.items():
        link = fit.link if isinstance(fit, LinkFit) else fit
        k = 0.0 if kurtosis is None else kurtosis.get(name, 0.0)
        rows.append(Table1Row(name, link.snr_btb_db, linear_to_db(eta_tot(link.nli, k))))
    return rows


def format_table1(rows) -> str:
    width = max([len(r.name) for r in rows] + [12])
    lines = [f"{'':<{width}}  BtB SNR [dB]  eta_tot [dB]"]
    for r in rows:
        lines.append(f"{r.name:<{width}}  {r.btb_snr_db:12.2f}  {r.eta_tot_db:12.2f}")
    return "\n".join(lines)


def calibrate_p_ase(target_snr_db: float, eta: float, snr_btb_linear: float = math.inf) -> float:
    """ASE power (W) that puts the model's optimum SNR at ``target_snr_db``.

    At the optimum power P* = (p_ase / (2 eta))^(1/3) the SNR is
    P* / (1.5 p_ase + P* / SNR_btb), which falls monotonically with p_ase.
    """
    if not eta > 0:
        raise InvalidParameterError("calibration needs eta > 0")
    target = db_to_linear(target_snr_db)
    if math.isfinite(snr_btb_linear) and target >= snr_btb_linear:
        raise InvalidParameterError("target SNR must be below the back-to-back SNR")

    def gap(log_p):
        pa = math.exp(log_p)
        ps = (pa / (2.0 * eta)) ** (1.0 / 3.0)
        return math.log(ps / (1.5 * pa + ps / snr_btb_linear)) - math.log(target)

    lo, hi = math.log(1e-15), math.log(1e3)
    return math.exp(brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))


@dataclass
class ReferencePreset:
    """Per-constellation links from the reference BtB/eta_tot table and a calibrated ASE power."""

    links: dict
    gaussian_link: LinkParams
    eta1: float
    c: float
    target_snr_db: float


def reference_links(
    kurtosis_uniform: float,
    c: float = 0.55,
    target_snr_db: float = 18.0,
    include_transceiver: bool = True,
) -> ReferencePreset:
    """Calibrated links for the three reference constellations in ``TABLE1``.

    The Gaussian-modulation coefficient eta1 follows from the uniform
    constellation's eta_tot and kurtosis. p_ase is chosen so that Gaussian
    modulation peaks at ``target_snr_db``; with ``include_transceiver`` the
    Gaussian reference shares the uniform constellation's back-to-back SNR.
    """
    btb_uni, eta_uni_db = TABLE1["uniform"]
    eta1 = db_to_linear(eta_uni_db) / (1.0 + c * kurtosis_uniform)
    btb_ref = db_to_linear(btb_uni) if include_transceiver else math.inf
    p_ase = calibrate_p_ase(target_snr_db, eta1, btb_ref)
    meta = {"calibration": "gaussian_optimum", "target_snr_db": target_snr_db, "c": c}
    links = {
        name: LinkParams(p_ase, NliCoefficients.fixed(db_to_linear(eta_db)), db_to_linear(btb_db), dict(meta))
        for name, (btb_db, eta_db) in TABLE1.items()
    }
    gaussian = LinkParams(p_ase, NliCoefficients.from_ratio(eta1, c), btb_ref, dict(meta))
    return ReferencePreset(links, gaussian, eta1, c, target_snr_db)
