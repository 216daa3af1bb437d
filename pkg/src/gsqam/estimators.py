"""scikit-learn style wrappers around the shaping optimiser and the link fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .constellation import PamLevels, square_qam
from .errors import InvalidInputError
from .gmi import ChannelSnr, gmi_2d
from .link import dbm_to_watt, effective_snr_curve, linear_to_db
from .shaping import OptimizerConfig, ShapingProblem, optimize
from .sweep import MeasuredSweep, fit_link_params


class GeometricShaper(TransformerMixin, BaseEstimator):
    """Learn a GMI-optimal square constellation; map labels to I/Q points.

    ``fit`` ignores ``X`` apart from an optional initial level set (a 1-D
    array of ``2**bits_per_dim`` increasing, zero-symmetric amplitudes).
    ``transform`` maps integer labels, or rows of ``2*bits_per_dim`` bits
    (MSB first), to an ``(n, 2)`` array of in-phase and quadrature values.
    """

    def __init__(
        self,
        bits_per_dim=4,
        mode="awgn",
        snr_db=18.0,
        c=0.55,
        quadrature_nodes=64,
        restarts=5,
        seed=0,
        max_iter=500,
        gtol=1e-7,
    ):
        self.bits_per_dim = bits_per_dim
        self.mode = mode
        self.snr_db = snr_db
        self.c = c
        self.quadrature_nodes = quadrature_nodes
        self.restarts = restarts
        self.seed = seed
        self.max_iter = max_iter
        self.gtol = gtol

    def _problem(self):
        return ShapingProblem.from_db(self.bits_per_dim, self.mode, self.snr_db, self.c, self.quadrature_nodes)

    def fit(self, X=None, y=None):
        problem = self._problem()
        init = None
        if X is not None:
            init = PamLevels(check_array(X, ensure_2d=False).ravel())
        config = OptimizerConfig(self.restarts, self.seed, self.gtol, self.max_iter)
        self.result_ = optimize(problem, init, config)
        self.levels_ = self.result_.levels
        self.constellation_ = square_qam(self.levels_)
        self.kurtosis_ = self.result_.kurtosis
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "constellation_")
        m_total = 2 * self.levels_.bits
        X = np.asarray(X)
        if X.ndim == 2 and X.shape[1] == m_total:
            bits = check_array(X, dtype=np.int64)
            if np.any((bits != 0) & (bits != 1)):
                raise InvalidInputError("bit matrix must contain only 0 and 1")
            labels = bits @ (1 << np.arange(m_total - 1, -1, -1))
        else:
            labels = check_array(X, ensure_2d=False, dtype=np.int64).ravel()
        if np.any((labels < 0) | (labels >= 2**m_total)):
            raise InvalidInputError(f"labels must lie in [0, {2**m_total - 1}]")
        pts = self.constellation_.by_label()[labels]
        return np.column_stack([pts.real, pts.imag])

    def inverse_transform(self, X):
        """Nearest-point (hard decision) labels for ``(n, 2)`` I/Q samples."""
        check_is_fitted(self, "constellation_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise InvalidInputError("expected an (n, 2) array of I/Q values")
        y = X[:, 0] + 1j * X[:, 1]
        pts = self.constellation_.by_label()
        return np.argmin(np.abs(y[:, None] - pts[None, :]), axis=1)

    def score(self, X=None, y=None):
        """Per-2D GMI of the fitted levels under the design evaluation rule."""
        check_is_fitted(self, "result_")
        return self.result_.gmi_2d

    def gmi(self, snr_db):
        check_is_fitted(self, "levels_")
        return gmi_2d(self.levels_, ChannelSnr.from_db(snr_db), self.quadrature_nodes)


class LinkNoiseRegressor(RegressorMixin, BaseEstimator):
    """Fit SNR(P) = P / (p_ase + eta_tot P^3 + P / SNR_btb) to a power sweep.

    ``X`` holds launch powers in dBm (one column), ``y`` the measured SNR in
    dB. ``predict`` returns the model SNR in dB.
    """

    def __init__(self, snr_btb_db=None):
        self.snr_btb_db = snr_btb_db

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        if X.shape[1] != 1:
            raise InvalidInputError("X must have a single column of launch powers in dBm")
        self.fit_ = fit_link_params(MeasuredSweep(X[:, 0], y), self.snr_btb_db)
        self.link_ = self.fit_.link
        self.p_ase_ = self.link_.p_ase
        self.eta_tot_ = self.link_.nli.eta1
        self.snr_btb_ = self.link_.snr_btb_linear
        self.residual_rms_db_ = self.fit_.residual_rms_db
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "link_")
        X = check_array(X)
        return linear_to_db(effective_snr_curve(self.link_, 0.0, dbm_to_watt(X[:, 0])))
