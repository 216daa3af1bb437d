"""Closed-form link model: kurtosis-dependent NLI, ASE and transceiver noise.

Powers are in watts and NLI coefficients in W^-2 internally; the JSON
interface uses dBm and dB re 1 W^-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, ModelDomainError
from .gmi import ChannelSnr, as_snr


def db_to_linear(x_db):
    out = 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return out if out.ndim else float(out)


def linear_to_db(x):
    out = 10.0 * np.log10(np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def dbm_to_watt(p_dbm):
    return db_to_linear(p_dbm) * 1e-3


def watt_to_dbm(p_w):
    return linear_to_db(np.asarray(p_w, dtype=float) * 1e3)


@dataclass(frozen=True)
class NliCoefficients:
    """``eta_tot = eta1 + eta2 * K``; ``c = eta2 / eta1``."""

    eta1: float
    eta2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.eta1) and math.isfinite(self.eta2)):
            raise InvalidParameterError("NLI coefficients must be finite")
        if self.eta1 < 0:
            raise InvalidParameterError(f"eta1 must be >= 0, got {self.eta1}")

    @classmethod
    def from_ratio(cls, eta1: float, c: float) -> "NliCoefficients":
        return cls(float(eta1), float(eta1) * float(c))

    @classmethod
    def fixed(cls, eta_tot: float) -> "NliCoefficients":
        """Modulation-independent coefficient, e.g. a per-constellation fit."""
        return cls(float(eta_tot), 0.0)

    @property
    def c(self) -> float:
        return self.eta2 / self.eta1 if self.eta1 > 0 else math.nan


def _check_validity(c: float, kurtosis: float, what: str = "constellation"):
    if not 1.0 + c * kurtosis > 0:
        raise ModelDomainError(
            f"NLI model invalid for {what}: 1 + c*K = {1.0 + c * kurtosis:.6g} <= 0 "
            f"(c={c:.6g}, K={kurtosis:.6g})"
        )


def eta_tot(nli: NliCoefficients, kurtosis: float) -> float:
    """Total NLI coefficient in W^-2 for a constellation with excess kurtosis K."""
    if nli.eta1 > 0:
        _check_validity(nli.c, kurtosis)
    value = nli.eta1 + nli.eta2 * kurtosis
    if value < 0:
        raise ModelDomainError(f"negative NLI coefficient {value:.6g} for K={kurtosis:.6g}")
    return value


def snr_opt_ratio(c: float, k_a: float, k_b: float) -> float:
    """SNR_opt(A) / SNR_opt(B) for an ASE+NLI-limited link."""
    _check_validity(c, k_a, "constellation A")
    _check_validity(c, k_b, "constellation B")
    return ((1.0 + c * k_b) / (1.0 + c * k_a)) ** (1.0 / 3.0)


def kurtosis_coupled_snr(snr_ref_gaussian, c: float, kurtosis: float) -> ChannelSnr:
    """Optimum-power SNR seen by a constellation, given the Gaussian-modulation one."""
    ref = as_snr(snr_ref_gaussian)
    return ChannelSnr(ref.snr_linear * snr_opt_ratio(c, kurtosis, 0.0))


@dataclass(frozen=True)
class LinkParams:
    p_ase: float
    nli: NliCoefficients
    snr_btb_linear: float = math.inf
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.p_ase) and self.p_ase > 0):
            raise InvalidParameterError(f"p_ase must be positive, got {self.p_ase}")
        if not self.snr_btb_linear > 0:
            raise InvalidParameterError(f"back-to-back SNR must be positive, got {self.snr_btb_linear}")

    @classmethod
    def from_db(cls, p_ase_dbm, eta_tot_db=None, snr_btb_db=None, eta1_db=None, c=None):
        if (eta_tot_db is None) == (eta1_db is None):
            raise InvalidInputError("give exactly one of eta_tot_db or (eta1_db, c)")
        if eta_tot_db is not None:
            nli = NliCoefficients.fixed(db_to_linear(eta_tot_db))
        else:
            if c is None:
                raise InvalidInputError("eta1_db requires c")
            nli = NliCoefficients.from_ratio(db_to_linear(eta1_db), c)
        btb = math.inf if snr_btb_db is None else db_to_linear(snr_btb_db)
        return cls(dbm_to_watt(p_ase_dbm), nli, btb)

    @property
    def p_ase_dbm(self) -> float:
        return watt_to_dbm(self.p_ase)

    @property
    def snr_btb_db(self) -> float:
        return linear_to_db(self.snr_btb_linear) if math.isfinite(self.snr_btb_linear) else math.inf

    def noise_power(self, kurtosis: float, launch_power):
        """ASE + NLI + transceiver noise in W at the given launch power(s)."""
        eta = eta_tot(self.nli, kurtosis)
        p = np.asarray(launch_power, dtype=float)
        return self.p_ase + eta * p**3 + p / self.snr_btb_linear

    def to_dict(self) -> dict:
        out = {"p_ase_dbm": self.p_ase_dbm}
        if self.nli.eta2 == 0.0:
            out["eta_tot_db_per_w2"] = linear_to_db(self.nli.eta1) if self.nli.eta1 > 0 else None
        else:
            out["eta1_db_per_w2"] = linear_to_db(self.nli.eta1)
            out["c"] = self.nli.c
        out["snr_btb_db"] = self.snr_btb_db if math.isfinite(self.snr_btb_linear) else None
        if self.metadata:
            out["metadata"] = dict(self.metadata)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LinkParams":
        if not isinstance(data, dict):
            raise InvalidInputError("link parameters must be a JSON object")
        if "p_ase_dbm" not in data:
            raise InvalidInputError("missing key 'p_ase_dbm'")
        has_tot = "eta_tot_db_per_w2" in data
        has_split = "eta1_db_per_w2" in data or "c" in data
        if has_tot == has_split:
            raise InvalidInputError(
                "exactly one of 'eta_tot_db_per_w2' or ('eta1_db_per_w2', 'c') must be present"
            )
        if has_split and not ("eta1_db_per_w2" in data and "c" in data):
            raise InvalidInputError("'eta1_db_per_w2' and 'c' must be given together")
        btb = data.get("snr_btb_db")
        btb_lin = math.inf if btb is None else db_to_linear(float(btb))
        if has_tot:
            tot = data["eta_tot_db_per_w2"]
            nli = NliCoefficients.fixed(0.0 if tot is None else db_to_linear(float(tot)))
        else:
            nli = NliCoefficients.from_ratio(db_to_linear(float(data["eta1_db_per_w2"])), float(data["c"]))
        return cls(dbm_to_watt(float(data["p_ase_dbm"])), nli, btb_lin, dict(data.get("metadata", {})))


def effective_snr(link: LinkParams, kurtosis: float, launch_power: float) -> ChannelSnr:
    """SNR = P / (p_ase + eta_tot P^3 + P / SNR_btb) at launch power P in W."""
    if not launch_power > 0:
        raise InvalidParameterError(f"launch power must be positive, got {launch_power}")
    return ChannelSnr(launch_power / float(link.noise_power(kurtosis, launch_power)))


def effective_snr_curve(link: LinkParams, kurtosis: float, launch_power) -> np.ndarray:
    """Vectorised linear SNR over an array of launch powers in W."""
    p = np.asarray(launch_power, dtype=float)
    if np.any(p <= 0):
        raise InvalidParameterError("launch powers must be positive")
    return p / link.noise_power(kurtosis, p)


def optimal_launch_power_closed_form(p_ase: float, eta: float):
    """ASE+NLI-only optimum: P* = (p_ase / (2 eta))^(1/3), SNR* = P* / (1.5 p_ase)."""
    if not eta > 0:
        raise InvalidParameterError("optimum launch power needs eta_tot > 0")
    p_star = (p_ase / (2.0 * eta)) ** (1.0 / 3.0)
    return p_star, ChannelSnr(p_star / (1.5 * p_ase))


def _snr_slope(link: LinkParams, eta: float, p: float) -> float:
    # sign of dSNR/dP = (N - P N') / N^2
    n = link.p_ase + eta * p**3 + p / link.snr_btb_linear
    dn = 3.0 * eta * p**2 + 1.0 / link.snr_btb_linear
    return n - p * dn


def optimal_launch_power(link: LinkParams, kurtosis: float, grid_points: int = 2001):
    """Launch power (W) maximising the full model SNR, and that SNR.

    A logarithmic grid brackets the maximum, then the sign change of the
    analytic derivative is bisected to machine precision.
    """
    eta = eta_tot(link.nli, kurtosis)
    if not eta > 0:
        raise InvalidParameterError("SNR is monotone increasing without NLI; no optimum launch power")
    p_guess, _ = optimal_launch_power_closed_form(link.p_ase, eta)
    grid = p_guess * np.logspace(-3, 3, grid_points)
    snr = effective_snr_curve(link, kurtosis, grid)
    i = int(np.argmax(snr))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if _snr_slope(link, eta, lo) <= 0 or _snr_slope(link, eta, hi) >= 0:
        p_best = grid[i]
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _snr_slope(link, eta, mid) > 0:
                lo = mid
            else:
                hi = mid
        p_best = 0.5 * (lo + hi)
    p_best = float(p_best)
    return p_best, effective_snr(link, kurtosis, p_best)
