"""Harmonic logistic occurrence model and censoring cutoffs.

Each site's wet indicator ``1{y > 0}`` is regressed on an intercept and
``H`` day-of-year harmonic pairs by iteratively reweighted least squares;
``H`` is picked by AIC.  The cutoff at (t, s) is the sample quantile of the
site's record at probability ``1 - O_hat_t(s)``, floored at the instrument
precision limit ``u_r``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .data import PrecipPanel
from .errors import ConfigError, DataError

PROB_FLOOR = 1e-6
IRLS_TOL = 1e-10
IRLS_MAXITER = 100
_SEPARATION_ETA = 30.0


class OccurrenceWarning(UserWarning):
    pass


def harmonic_design(day_of_year, H) -> np.ndarray:
    d = np.asarray(day_of_year, dtype=float)
    cols = [np.ones_like(d)]
    for j in range(1, H + 1):
        ang = 2.0 * np.pi * j * d / 365.0
        cols += [np.sin(ang), np.cos(ang)]
    return np.column_stack(cols)


def _bernoulli_loglik(y, p):
    p = np.clip(p, PROB_FLOOR, 1 - PROB_FLOOR)
    return float(np.sum(y * np.log(p) + (1 - y) * np.log1p(-p)))


def irls_logistic(X, y, tol=IRLS_TOL, maxiter=IRLS_MAXITER):
    """Logistic regression by IRLS.

    Returns ``(coef, loglik, converged, separated, n_iter)``.
    """
    n, k = X.shape
    beta = np.zeros(k)
    ll_old = _bernoulli_loglik(y, np.full(n, 0.5))
    for it in range(1, maxiter + 1):
        eta = X @ beta
        p = special.expit(eta)
        w = np.maximum(p * (1 - p), 1e-12)
        z = eta + (y - p) / w
        XtW = X.T * w
        try:
            beta = np.linalg.solve(XtW @ X, XtW @ z)
        except np.linalg.LinAlgError:
            return beta, ll_old, False, True, it
        eta = X @ beta
        if np.max(np.abs(eta)) > _SEPARATION_ETA:
            return beta, _bernoulli_loglik(y, special.expit(eta)), False, True, it
        ll = _bernoulli_loglik(y, special.expit(eta))
        if abs(ll - ll_old) <= tol * max(abs(ll), 1.0):
            return beta, ll, True, False, it
        ll_old = ll
    return beta, ll_old, False, False, maxiter


@dataclass
class SiteOccurrence:
    H: int
    coef: np.ndarray
    aic: dict = field(default_factory=dict)
    warning: str | None = None

    def prob(self, day_of_year):
        X = harmonic_design(day_of_year, self.H)
        return np.clip(special.expit(X @ self.coef), PROB_FLOOR, 1 - PROB_FLOOR)


@dataclass
class OccurrenceModel:
    sites: list
    H_max: int
    fits: list  # SiteOccurrence per site

    @property
    def H(self) -> list:
        return [f.H for f in self.fits]

    @property
    def warnings(self) -> list:
        return [f"{s}: {f.warning}" for s, f in zip(self.sites, self.fits) if f.warning]

    def predict(self, day_of_year) -> np.ndarray:
        """Clamped wet probabilities, shape (T, N)."""
        return np.column_stack([f.prob(day_of_year) for f in self.fits])

    def to_dict(self):
        return {
            "H_max": self.H_max,
            "sites": {
                s: {
                    "H": f.H,
                    "coef": [float(c) for c in f.coef],
                    "aic": {str(h): (None if not np.isfinite(a) else float(a)) for h, a in f.aic.items()},
                    "warning": f.warning,
                }
                for s, f in zip(self.sites, self.fits)
            },
        }

    @classmethod
    def from_dict(cls, d):
        fits = []
        for s, v in d["sites"].items():
            aic = {int(h): (np.inf if a is None else a) for h, a in v["aic"].items()}
            fits.append(SiteOccurrence(int(v["H"]), np.array(v["coef"], dtype=float), aic, v.get("warning")))
        return cls(list(d["sites"]), int(d["H_max"]), fits)


def _intercept_only(y, reason=None):
    p = float(np.clip(y.mean(), PROB_FLOOR, 1 - PROB_FLOOR))
    aic = -2 * _bernoulli_loglik(y, np.full(len(y), p)) + 2
    return SiteOccurrence(0, np.array([special.logit(p)]), {0: aic}, reason)


def fit_site(y, day_of_year, H_max) -> SiteOccurrence:
    y = np.asarray(y, dtype=float)
    if y.min() == y.max():
        label = "dry" if y[0] == 0 else "wet"
        return _intercept_only(y, f"all-{label} record; intercept-only with clamped probability")
    best = _intercept_only(y)
    aic = dict(best.aic)
    problems = []
    n_days = len(np.unique(day_of_year))
    for H in range(1, H_max + 1):
        X = harmonic_design(day_of_year, H)
        # harmonics need more distinct days than coefficients to be identifiable
        if n_days < X.shape[1] or np.linalg.matrix_rank(np.unique(X, axis=0)) < X.shape[1]:
            aic[H] = np.inf
            continue
        coef, ll, converged, separated, _ = irls_logistic(X, y)
        if separated or not converged:
            aic[H] = np.inf
            problems.append(f"H={H}: {'complete separation' if separated else 'IRLS did not converge'}")
            continue
        aic[H] = -2 * ll + 2 * X.shape[1]
        if aic[H] < aic[best.H]:
            best = SiteOccurrence(H, coef)
    best.aic = aic
    if problems:
        best.warning = "; ".join(problems) + f"; kept H={best.H}"
    return best


def fit_occurrence(panel: PrecipPanel, H_max: int = 2) -> OccurrenceModel:
    if int(H_max) != H_max or H_max < 0:
        raise ConfigError(f"H_max must be a nonnegative integer, got {H_max!r}")
    H_max = int(H_max)
    doy = panel.day_of_year()
    wet = (panel.values > 0).astype(float)
    fits = [fit_site(wet[:, j], doy, H_max) for j in range(panel.N)]
    model = OccurrenceModel(list(panel.sites), H_max, fits)
    for msg in model.warnings:
        warnings.warn(msg, OccurrenceWarning, stacklevel=2)
    return model


@dataclass
class CutoffField:
    """Censoring thresholds u_t(s) >= u_r, with the raw quantiles q_t(s)."""

    u: np.ndarray
    u_r: float
    q: np.ndarray | None = None
    timestamps: np.ndarray | None = None
    sites: list | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if not (self.u_r > 0):
            raise ConfigError(f"u_r must be > 0, got {self.u_r!r}")
        if self.u.ndim != 2:
            raise DataError("cutoff field must be a T x N matrix")
        if np.any(np.isnan(self.u)) or np.any(self.u < self.u_r):
            raise DataError("every cutoff must be >= u_r")

    @classmethod
    def constant(cls, value, T, N, u_r=None):
        u_r = value if u_r is None else u_r
        return cls(np.full((T, N), float(value)), float(u_r))

    @property
    def shape(self):
        return self.u.shape

    def as_panel(self, like: PrecipPanel | None = None) -> PrecipPanel:
        if like is not None:
            return like.with_values(self.u)
        if self.timestamps is not None:
            return PrecipPanel(self.timestamps, self.sites, self.u)
        return PrecipPanel.from_array(self.u, self.sites)


def estimate_cutoffs(panel: PrecipPanel, occ: OccurrenceModel, u_r) -> CutoffField:
    """u_t(s) = max(q_t(s), u_r), q_t(s) the (1 - O_hat_t(s)) sample quantile of site s."""
    if not (u_r is not None and np.isfinite(u_r) and u_r > 0):
        raise ConfigError(f"u_r must be a positive number, got {u_r!r}")
    if list(occ.sites) != list(panel.sites):
        raise ConfigError("occurrence model sites do not match the panel")
    probs = occ.predict(panel.day_of_year())
    q = np.empty_like(panel.values)
    for j in range(panel.N):
        q[:, j] = np.quantile(panel.values[:, j], 1.0 - probs[:, j], method="linear")
    u = np.maximum(q, u_r)
    return CutoffField(u, float(u_r), q, panel.timestamps.copy(), list(panel.sites))
