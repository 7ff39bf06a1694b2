"""Censored likelihood and maximum-likelihood fitting.

Model, for t >= 2 and every site s::

    X_t(s) = beta_s' y_{t-1} + sigma_t z_t(s),   sigma_t = b0 + b1 * mean(y_{t-1}),
    Y_t(s) = X_t(s) if X_t(s) > u_t(s) else 0,

with ``z`` i.i.d. scaled skew-t (mean 0, variance 1) or standard normal.
Wet cells contribute ``log f((y - loc)/sigma) - log sigma`` and dry cells
``log F((u - loc)/sigma)``.

Fitting profiles ``nu`` over a grid.  For each ``nu`` the remaining
parameters are optimized in unconstrained coordinates::

    eta = (logit c, log rho, log b0, log(b1 + 1e-8), atanh(alpha/A) * A),  phi = c * phi_max(rho),

where ``phi_max(rho) = min(rho/(N max d), 1/r(K_rho))`` and ``r(K_rho)`` is the
spectral radius of the unit-phi kernel matrix, so every iterate satisfies both
the ratio bound and the eigenvalue condition.  A hard rejection wall at
radius one would stall line searches instead.  The skewness map is the
identity near zero but keeps ``|alpha| < A = 50``: beyond that the density
is numerically the half-t limit, the likelihood is flat, and unbounded
drifts (to 1e6 and more) carry no information.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import distributions as dist
from .data import PrecipPanel
from .errors import ConfigError, DataError, FittingError
from .occurrence import CutoffField
from .spatial import GaugeNetwork, ar_matrix, stable_phi_max

log = logging.getLogger(__name__)

LOGLIK_SENTINEL = -1e300
B1_EPS = 1e-8
B1_ZERO = 1e-6
DEFAULT_NU_GRID = (3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0, 50.0)
Z95 = 1.959963984540054
ALPHA_MAX = 50.0
PARAM_NAMES = ("phi", "rho", "b0", "b1", "alpha")


@dataclass(frozen=True)
class ModelParams:
    """theta = (phi, rho, b0, b1, alpha, nu); ``nu=None`` selects Gaussian errors."""

    phi: float
    rho: float
    b0: float
    b1: float
    alpha: float = 0.0
    nu: float | None = None

    def __post_init__(self):
        if not (self.phi >= 0 and self.rho > 0 and self.b0 > 0 and self.b1 >= 0):
            raise ConfigError(
                f"invalid parameters: need phi >= 0, rho > 0, b0 > 0, b1 >= 0 (got {self})"
            )
        if self.nu is not None and not self.nu > 2:
            raise ConfigError(f"nu must be > 2 (or None for Gaussian), got {self.nu!r}")

    @property
    def gaussian(self) -> bool:
        return self.nu is None

    def to_dict(self):
        return {
            "phi": self.phi,
            "rho": self.rho,
            "b0": self.b0,
            "b1": self.b1,
            "alpha": self.alpha,
            "nu": self.nu,
            "errors": "gaussian" if self.gaussian else "skew-t",
        }

    @classmethod
    def from_dict(cls, d):
        nu = d.get("nu")
        return cls(
            float(d["phi"]), float(d["rho"]), float(d["b0"]), float(d["b1"]),
            float(d.get("alpha", 0.0)), None if nu is None else float(nu),
        )


def _values(panel):
    return panel.values if isinstance(panel, PrecipPanel) else np.asarray(panel, dtype=float)


def _dist(net):
    return net.dist if isinstance(net, GaugeNetwork) else np.asarray(net, dtype=float)


def cutoff_array(cutoffs) -> np.ndarray:
    return cutoffs.u if isinstance(cutoffs, CutoffField) else np.asarray(cutoffs, dtype=float)


# --------------------------------------------------------------------------
# Innovation log-densities and log-CDFs on standardized residuals


def innovation_logpdf(z, alpha, nu):
    if nu is None:
        return -0.5 * z * z - 0.5 * math.log(2 * math.pi)
    s = dist.scale_skewt(alpha, nu)
    v = (z - s.xi) / s.omega
    w = alpha * v * np.sqrt((nu + 1.0) / (nu + v * v))
    with np.errstate(divide="ignore"):
        logT = np.log(dist.t_cdf(w, nu + 1.0))
    return math.log(2.0) + dist.t_logpdf(v, nu) + logT - math.log(s.omega)


def innovation_logcdf(z, alpha, nu):
    if nu is None:
        return special.log_ndtr(z)
    s = dist.scale_skewt(alpha, nu)
    with np.errstate(divide="ignore"):
        return np.log(dist.skewt_cdf_std((np.asarray(z) - s.xi) / s.omega, alpha, nu))


def innovation_cdf(z, alpha, nu):
    if nu is None:
        return special.ndtr(z)
    s = dist.scale_skewt(alpha, nu)
    return dist.skewt_cdf_std((np.asarray(z, dtype=float) - s.xi) / s.omega, alpha, nu)


# --------------------------------------------------------------------------
# Likelihood


class CensoredLikelihood:
    """Log-likelihood of one panel, with the data-only bookkeeping precomputed."""

    def __init__(self, panel, net, cutoffs):
        y = _values(panel)
        d = _dist(net)
        u = cutoff_array(cutoffs)
        if y.ndim != 2 or u.shape != y.shape:
            raise ConfigError(f"panel {y.shape} and cutoffs {u.shape} are not conformable")
        if d.shape != (y.shape[1], y.shape[1]):
            raise ConfigError(f"distance matrix {d.shape} does not match {y.shape[1]} sites")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(u)):
            raise DataError("panel and cutoffs must be finite")
        if y.shape[0] < 2:
            raise DataError("need at least two time steps")
        self.dist = d
        self.T, self.N = y.shape
        prev, cur, ucur = y[:-1], y[1:], u[1:]
        self.prev = prev
        self.ybar = prev.mean(axis=1)
        quiet = ~np.any(prev > 0, axis=1)  # previous step dry everywhere: loc = 0, sigma = b0
        wet = cur > 0
        self.wet_rows, self.wet_cols = np.nonzero(wet)
        self.y_wet = cur[wet]
        dry_active = ~wet & ~quiet[:, None]
        self.dry_rows, self.dry_cols = np.nonzero(dry_active)
        self.u_dry = ucur[dry_active]
        self.quiet_u, self.quiet_count = np.unique(ucur[~wet & quiet[:, None]], return_counts=True)
        self.n_terms = (self.T - 1) * self.N
        self.n_evals = 0

    def __call__(self, theta: ModelParams) -> float:
        return self.loglik(theta)

    def loglik(self, theta: ModelParams) -> float:
        self.n_evals += 1
        b0, b1 = theta.b0, theta.b1
        sigma = b0 + b1 * self.ybar
        if not (b0 > 0) or np.any(~(sigma > 0)):
            return LOGLIK_SENTINEL
        B = ar_matrix(self.dist, theta.phi, theta.rho)
        loc = self.prev @ B.T
        alpha, nu = theta.alpha, theta.nu
        total = 0.0
        if self.y_wet.size:
            r, c = self.wet_rows, self.wet_cols
            s = sigma[r]
            z = (self.y_wet - loc[r, c]) / s
            total += float(np.sum(innovation_logpdf(z, alpha, nu)) - np.sum(np.log(s)))
        if self.u_dry.size:
            r, c = self.dry_rows, self.dry_cols
            z = (self.u_dry - loc[r, c]) / sigma[r]
            total += float(np.sum(innovation_logcdf(z, alpha, nu)))
        if self.quiet_u.size:
            total += float(np.dot(self.quiet_count, innovation_logcdf(self.quiet_u / b0, alpha, nu)))
        if not math.isfinite(total):
            return LOGLIK_SENTINEL
        return total


def loglik(panel, net, cutoffs, theta: ModelParams) -> float:
    """Censored log-likelihood, conditional on the first time step."""
    return CensoredLikelihood(panel, net, cutoffs).loglik(theta)


def gaussian_loglik(panel, net, cutoffs, theta: ModelParams) -> float:
    """The same likelihood with standard normal errors (alpha and nu ignored)."""
    g = ModelParams(theta.phi, theta.rho, theta.b0, theta.b1, 0.0, None)
    return CensoredLikelihood(panel, net, cutoffs).loglik(g)


# --------------------------------------------------------------------------
# Parameter transforms


class Transform:
    """Map between unconstrained ``eta`` and natural parameters for one network."""

    def __init__(self, net, nu):
        self.dist = _dist(net)
        if self.dist.max() <= 0:
            raise ConfigError("degenerate network: all pairwise distances are zero")
        self.nu = nu
        self.dim = 4 if nu is None else 5

    def phi_max(self, rho) -> float:
        return stable_phi_max(self.dist, rho)

    def to_params(self, eta) -> ModelParams:
        c = float(special.expit(eta[0]))
        rho = math.exp(min(max(eta[1], -700.0), 700.0))
        b1 = max(math.exp(min(eta[3], 700.0)) - B1_EPS, 0.0)
        alpha = 0.0 if self.nu is None else ALPHA_MAX * math.tanh(eta[4] / ALPHA_MAX)
        phi = c * self.phi_max(rho)
        return ModelParams(phi, rho, math.exp(min(eta[2], 700.0)), b1, alpha, self.nu)

    def to_eta(self, theta: ModelParams) -> np.ndarray:
        c = theta.phi / self.phi_max(theta.rho)
        if not 0 < c < 1:
            raise ConfigError(f"phi = {theta.phi:g} at rho = {theta.rho:g} is outside the stationary region")
        eta = [special.logit(c), math.log(theta.rho), math.log(theta.b0), math.log(theta.b1 + B1_EPS)]
        if self.nu is not None:
            a = min(max(theta.alpha / ALPHA_MAX, -1 + 1e-12), 1 - 1e-12)
            eta.append(ALPHA_MAX * math.atanh(a))
        return np.array(eta, dtype=float)

    def jacobian(self, eta) -> np.ndarray:
        """d(phi, rho, b0, b1[, alpha]) / d eta."""
        th = self.to_params(eta)
        c = float(special.expit(eta[0]))
        h = 1e-6
        up, down = self.phi_max(th.rho * math.exp(h)), self.phi_max(th.rho * math.exp(-h))
        J = np.zeros((self.dim, self.dim))
        J[0, 0] = th.phi * (1 - c)
        J[0, 1] = th.phi * (math.log(up) - math.log(down)) / (2 * h)
        J[1, 1] = th.rho
        J[2, 2] = th.b0
        J[3, 3] = math.exp(eta[3])
        if self.dim == 5:
            J[4, 4] = 1.0 - math.tanh(eta[4] / ALPHA_MAX) ** 2
        return J


# --------------------------------------------------------------------------
# Numerical derivatives


def fd_step(eta):
    return 1e-5 * np.maximum(1.0, np.abs(eta))


def fd_gradient(f, eta, step=None):
    """Central-difference gradient; this is the gradient the BFGS runs use."""
    eta = np.asarray(eta, dtype=float)
    h = fd_step(eta) if step is None else np.broadcast_to(step, eta.shape)
    g = np.empty_like(eta)
    for i in range(eta.size):
        e = np.zeros_like(eta)
        e[i] = h[i]
        g[i] = (f(eta + e) - f(eta - e)) / (2 * h[i])
    return g


def fd_hessian(f, eta, step=None):
    eta = np.asarray(eta, dtype=float)
    n = eta.size
    h = 1e-4 * np.maximum(1.0, np.abs(eta)) if step is None else np.broadcast_to(step, eta.shape)
    f0 = f(eta)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(eta + ei) - 2 * f0 + f(eta - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(eta + ei + ej) - f(eta + ei - ej) - f(eta - ei + ej) + f(eta - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


# --------------------------------------------------------------------------
# Fitting


@dataclass
class FitOptions:
    nu_grid: tuple = DEFAULT_NU_GRID
    include_gaussian: bool = True
    gaussian_baseline: bool = False
    n_starts: int = 4
    algorithms: tuple = ("nelder-mead", "bfgs")
    maxiter: int = 2000
    seed: int = 0

    def __post_init__(self):
        self.nu_grid = tuple(float(v) for v in self.nu_grid)
        if any(not v > 2 for v in self.nu_grid):
            raise ConfigError("every nu in the grid must be > 2")
        if self.n_starts < 1:
            raise ConfigError("n_starts must be >= 1")
        self.algorithms = tuple(a.lower() for a in self.algorithms)
        unknown = set(self.algorithms) - set(_ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}; choose from {sorted(_ALGORITHMS)}")


@dataclass
class ProfileEntry:
    nu: float | None
    loglik: float
    params: ModelParams | None
    converged: bool


@dataclass
class FitResult:
    theta_hat: ModelParams
    loglik: float
    nu_profile: list
    ci95: dict | None
    optimizer_trace: list = field(default_factory=list)
    ci_note: str | None = None

    @property
    def ci_available(self) -> bool:
        return self.ci95 is not None

    def to_dict(self):
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "loglik": self.loglik,
            "nu_profile": [
                {
                    "nu": e.nu,
                    "loglik": e.loglik,
                    "converged": e.converged,
                    "params": None if e.params is None else e.params.to_dict(),
                }
                for e in self.nu_profile
            ],
            "ci95": self.ci95,
            "ci_note": self.ci_note,
            "optimizer_trace": self.optimizer_trace,
        }

    @classmethod
    def from_dict(cls, d):
        prof = [
            ProfileEntry(
                e["nu"], e["loglik"], None if e["params"] is None else ModelParams.from_dict(e["params"]),
                e["converged"],
            )
            for e in d["nu_profile"]
        ]
        ci = d.get("ci95")
        if ci is not None:
            ci = {k: tuple(v) for k, v in ci.items()}
        return cls(ModelParams.from_dict(d["theta_hat"]), d["loglik"], prof, ci,
                   d.get("optimizer_trace", []), d.get("ci_note"))


def start_points(y, net_dist, n_starts, gaussian) -> list:
    """Dispersed starting values in natural coordinates (phi given as the fraction c)."""
    pos = y[y > 0]
    scale = float(np.std(pos)) if pos.size > 1 and np.std(pos) > 0 else 1.0
    off = net_dist[np.triu_indices(net_dist.shape[0], 1)]
    off = off[off > 0]
    rhos = (float(np.median(off)), float(off.max())) if off.size else (1.0, 1.0)
    levels = {
        "b1": (0.01 * scale, 0.5 * scale),
        "alpha": (0.0,) if gaussian else (0.0, 2.0),
        "c": (0.25, 0.75),
        "rho": rhos,
    }
    keys = list(levels)
    combos = [()]
    for k in keys:
        combos = [cmb + (i,) for cmb in combos for i in range(len(levels[k]))]
    # greedy max-min Hamming ordering from the all-low corner
    order = [combos.pop(0)]
    while combos:
        dists = [min(sum(a != b for a, b in zip(cmb, o)) for o in order) for cmb in combos]
        order.append(combos.pop(int(np.argmax(dists))))
    starts = []
    for cmb in order[:n_starts]:
        v = {k: levels[k][i] for k, i in zip(keys, cmb)}
        starts.append(dict(b0=scale, **v))
    while len(starts) < n_starts:  # Gaussian design has only 8 distinct corners
        j = len(starts)
        base = dict(starts[j % len(order)])
        base["b0"] = scale * (0.5 + 0.25 * (j // len(order)))
        starts.append(base)
    return starts


def _run_nelder_mead(obj, eta0, maxiter):
    sim = np.vstack([eta0] + [eta0 + 0.5 * np.eye(eta0.size)[i] for i in range(eta0.size)])
    res = optimize.minimize(
        obj, eta0, method="Nelder-Mead",
        options=dict(initial_simplex=sim, xatol=1e-6, fatol=1e-10, maxiter=maxiter, maxfev=2 * maxiter),
    )
    return res, bool(res.success)


def _run_bfgs(obj, eta0, maxiter):
    grad = lambda e: fd_gradient(obj, e)  # noqa: E731
    res = optimize.minimize(obj, eta0, method="BFGS", jac=grad, options=dict(gtol=1e-6, maxiter=maxiter))
    g = np.max(np.abs(res.jac)) if res.jac is not None else np.inf
    # status 2 (line search lost precision) at a flat gradient is a converged optimum
    clean = bool(res.success) or (res.status == 2 and g < 1e-4)
    return res, clean


def _run_cobyla(obj, eta0, maxiter):
    res = optimize.minimize(obj, eta0, method="COBYLA", options=dict(rhobeg=0.5, tol=1e-8, maxiter=maxiter))
    return res, bool(res.success)


_ALGORITHMS = {"nelder-mead": _run_nelder_mead, "bfgs": _run_bfgs, "cobyla": _run_cobyla}


def _profile_point(lik, net_dist, y, nu, opts: FitOptions, trace):
    tr = Transform(net_dist, nu)
    n = lik.n_terms

    def obj(eta):
        if not np.all(np.isfinite(eta)):
            return 1e300
        try:
            th = tr.to_params(eta)
        except ConfigError:
            return 1e300
        return -lik.loglik(th) / n

    best = None
    for k, st in enumerate(start_points(y, net_dist, opts.n_starts, nu is None)):
        phi0 = st["c"] * tr.phi_max(st["rho"])
        theta0 = ModelParams(phi0, st["rho"], st["b0"], st["b1"], st["alpha"], nu)
        eta0 = tr.to_eta(theta0)
        for alg in opts.algorithms:
            before = lik.n_evals
            try:
                res, clean = _ALGORITHMS[alg](obj, eta0.copy(), opts.maxiter)
                ll = -float(res.fun) * n
                eta = np.asarray(res.x, dtype=float)
                msg = str(res.message)
                status = int(res.status)
            except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
                clean, ll, eta, msg, status = False, LOGLIK_SENTINEL, eta0, repr(exc), -1
            entry = {
                "nu": nu, "start": k, "algorithm": alg, "clean": clean, "status": status,
                "message": msg, "nfev": lik.n_evals - before, "loglik": ll,
                "eta": [float(v) for v in eta],
            }
            trace.append(entry)
            log.debug("nu=%s start=%d %s ll=%.6f clean=%s", nu, k, alg, ll, clean)
            if clean and ll > LOGLIK_SENTINEL and (best is None or ll > best[0]):
                best = (ll, eta)
    if best is None:
        return ProfileEntry(nu, LOGLIK_SENTINEL, None, False), None, tr
    return ProfileEntry(nu, best[0], tr.to_params(best[1]), True), best[1], tr


def _saturated(tr: Transform, eta) -> list:
    """Coordinates of ``eta`` sitting on a boundary, where the likelihood is flat."""
    th = tr.to_params(eta)
    off = tr.dist[tr.dist > 0]
    held = []
    if abs(eta[0]) > 12.0:  # phi at 0 or at the stationarity ceiling
        held.append(0)
    if th.rho > 1e3 * off.max() or th.rho < 1e-3 * off.min():  # kernel constant in rho
        held.append(1)
    if th.b1 < B1_ZERO:
        held.append(3)
    if tr.dim == 5 and abs(th.alpha) > 0.999 * ALPHA_MAX:
        held.append(4)
    return held


def wald_intervals(lik, tr: Transform, eta_hat):
    """95% Wald intervals from the numerical Hessian in eta, mapped by the delta method.

    Coordinates on a boundary (see ``_saturated``) are held at their estimate;
    the note names them.
    """
    held = _saturated(tr, eta_hat)
    free = [i for i in range(tr.dim) if i not in held]
    if not free:
        return None, "every parameter is on a boundary; intervals unavailable"

    def f(sub):
        e = np.array(eta_hat, dtype=float)
        e[free] = sub
        return lik.loglik(tr.to_params(e))

    info = -fd_hessian(f, np.asarray(eta_hat, dtype=float)[free])
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return None, "observed information not positive definite; intervals unavailable"
    cov_eta = np.zeros((tr.dim, tr.dim))
    cov_eta[np.ix_(free, free)] = np.linalg.inv(info)
    J = tr.jacobian(eta_hat)
    cov = J @ cov_eta @ J.T
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    th = tr.to_params(eta_hat)
    vals = [th.phi, th.rho, th.b0, th.b1, th.alpha][: tr.dim]
    ci = {name: (float(v - Z95 * s), float(v + Z95 * s)) for name, v, s in zip(PARAM_NAMES, vals, se)}
    note = None
    if held:
        labels = ("phi/phi_max", "rho", "b0", "b1", "alpha")
        note = "held at boundary: " + ", ".join(labels[i] for i in held)
    return ci, note


def fit(panel, net, cutoffs, options: FitOptions | None = None, **kw) -> FitResult:
    """Maximum-likelihood fit with nu profiled over a grid.

    Every grid value gets ``n_starts`` starting points, each run through
    every algorithm in ``options.algorithms``; the best clean run is kept.
    ``nu_hat`` maximizes the profile.  Intervals come from the numerical
    Hessian at ``nu_hat``.
    """
    opts = options if options is not None else FitOptions(**kw)
    y = _values(panel)
    d = _dist(net)
    lik = CensoredLikelihood(y, d, cutoffs)
    if opts.gaussian_baseline:
        grid = [None]
    else:
        grid = list(opts.nu_grid) + ([None] if opts.include_gaussian else [])
    trace: list = []
    profile, winners = [], []
    for nu in grid:
        entry, eta, tr = _profile_point(lik, d, y, nu, opts, trace)
        profile.append(entry)
        winners.append((eta, tr))
    ok = [i for i, e in enumerate(profile) if e.converged]
    if not ok:
        raise FittingError("no optimizer run converged for any nu", trace)
    i_best = max(ok, key=lambda i: profile[i].loglik)
    eta_hat, tr = winners[i_best]
    theta = profile[i_best].params
    if theta.b1 < B1_ZERO:
        theta = ModelParams(theta.phi, theta.rho, theta.b0, 0.0, theta.alpha, theta.nu)
    ci, note = wald_intervals(lik, tr, eta_hat)
    return FitResult(theta, profile[i_best].loglik, profile, ci, trace, note)
