"""Simulation from the censored autoregression.

Replicate ``k`` of an ensemble draws all of its innovations from RNG
substream ``k`` of the master seed, so any replicate can be regenerated on
its own and ``K=1`` reproduces a single unconditional run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PrecipPanel
from .distributions import sample_sst_direct
from .errors import ConfigError
from .inference import FitResult, ModelParams, cutoff_array
from .rng import make_rng
from .spatial import GaugeNetwork, ar_matrix, check_stationarity, spectral_radius

BURN_IN = 500
MODES = ("unconditional", "one_step_conditional")


@dataclass
class SimulationEnsemble:
    replicates: np.ndarray  # (K, T, N)
    mode: str
    seed: int
    params: ModelParams
    cutoffs: np.ndarray
    streams: list = field(default_factory=list)
    timestamps: np.ndarray | None = None
    sites: list | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown ensemble mode {self.mode!r}")
        self.replicates = np.asarray(self.replicates, dtype=float)
        if not self.streams:
            self.streams = list(range(self.K))

    @property
    def K(self) -> int:
        return self.replicates.shape[0]

    @property
    def T(self) -> int:
        return self.replicates.shape[1]

    @property
    def N(self) -> int:
        return self.replicates.shape[2]

    def panel(self, k) -> PrecipPanel:
        if self.timestamps is not None:
            return PrecipPanel(self.timestamps, self.sites, self.replicates[k])
        return PrecipPanel.from_array(self.replicates[k], self.sites)


def check_params(params: ModelParams, net) -> np.ndarray:
    """AR matrix for ``params``, refusing non-stationary settings."""
    d = net.dist if isinstance(net, GaugeNetwork) else np.asarray(net, dtype=float)
    if d.shape[0] >= 2:
        if not isinstance(net, GaugeNetwork):
            net = GaugeNetwork([str(i) for i in range(d.shape[0])], None, d)
        chk = check_stationarity(net, params.phi, params.rho)
        if not chk.passed:
            raise ConfigError(
                f"stationarity violated: phi/rho = {chk.ratio:.6g} (bound 1/(N max d) = {chk.bound:.6g}), "
                f"spectral radius of B = {chk.spectral_radius:.6g} (must be < 1)"
            )
    B = ar_matrix(d, params.phi, params.rho)
    if d.shape[0] == 1 and spectral_radius(B) >= 1:
        raise ConfigError(f"stationarity violated: phi = {params.phi:g} >= 1 for a single site")
    return B


def innovations(params: ModelParams, rng, shape) -> np.ndarray:
    n = int(np.prod(shape))
    if params.gaussian:
        z = rng.standard_normal(n)
    else:
        z = sample_sst_direct(params.alpha, params.nu, n, rng)
    return z.reshape(shape)


def _run(B, b0, b1, u, z, y0):
    """Advance K paths in lockstep.  ``u`` and ``z`` are (T, N) and (K, T, N)."""
    K, T, N = z.shape
    out = np.empty((K, T, N))
    y = y0
    for t in range(T):
        sigma = b0 + b1 * y.mean(axis=1, keepdims=True)
        x = y @ B.T + sigma * z[:, t, :]
        y = np.where(x > u[t], x, 0.0)
        out[:, t, :] = y
    return out


def _ensemble_unconditional(params, net, cutoffs, T, streams, seed, y0=None, burn_in=None):
    B = check_params(params, net)
    u = cutoff_array(cutoffs)
    N = B.shape[0]
    if T is None:
        T = u.shape[0]
    if u.shape != (T, N):
        raise ConfigError(f"cutoffs {u.shape} do not match T={T}, N={N}")
    if y0 is None:
        y0 = np.zeros(N)
        burn = BURN_IN if burn_in is None else int(burn_in)
    else:
        y0 = np.asarray(y0, dtype=float)
        if y0.shape != (N,) or np.any(y0 < 0) or not np.all(np.isfinite(y0)):
            raise ConfigError("y0 must be a finite nonnegative vector of length N")
        burn = 0 if burn_in is None else int(burn_in)
    z = np.stack([innovations(params, make_rng(seed, k), (burn + T, N)) for k in streams])
    u_full = np.vstack([np.repeat(u[:1], burn, axis=0), u]) if burn else u
    paths = _run(B, params.b0, params.b1, u_full, z, np.broadcast_to(y0, (len(streams), N)))
    return paths[:, burn:, :]


def simulate_unconditional(params: ModelParams, net, cutoffs, T=None, y0=None, seed=None, stream=0,
                           burn_in=None) -> np.ndarray:
    """One free-running T x N path from RNG substream ``stream``.

    With ``y0=None`` the path starts from zero and discards ``BURN_IN``
    warm-up steps run at the first row of cutoffs.
    """
    if seed is None:
        raise ConfigError("a seed is required")
    return _ensemble_unconditional(params, net, cutoffs, T, [stream], seed, y0, burn_in)[0]


def parametric_bootstrap(fit, net, cutoffs, T=None, K=50, seed=None, y0=None) -> SimulationEnsemble:
    """K independent unconditional replicates under the fitted (or given) parameters."""
    if seed is None:
        raise ConfigError("a seed is required")
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    params = fit.theta_hat if isinstance(fit, FitResult) else fit
    reps = _ensemble_unconditional(params, net, cutoffs, T, range(K), seed, y0)
    sites = net.site_ids if isinstance(net, GaugeNetwork) else None
    ts = getattr(cutoffs, "timestamps", None)
    return SimulationEnsemble(reps, "unconditional", seed, params, cutoff_array(cutoffs), list(range(K)), ts, sites)


def simulate_conditional_one_step(params: ModelParams, net, cutoffs, panel, K, seed) -> SimulationEnsemble:
    """Each step drawn given the OBSERVED previous step; row 0 copies the observations."""
    if seed is None:
        raise ConfigError("a seed is required")
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    B = check_params(params, net)
    obs = panel.values if isinstance(panel, PrecipPanel) else np.asarray(panel, dtype=float)
    u = cutoff_array(cutoffs)
    if u.shape != obs.shape or obs.shape[1] != B.shape[0]:
        raise ConfigError(f"panel {obs.shape}, cutoffs {u.shape} and network ({B.shape[0]} sites) disagree")
    prev = obs[:-1]
    loc = prev @ B.T
    sigma = (params.b0 + params.b1 * prev.mean(axis=1))[:, None]
    T, N = obs.shape
    reps = np.empty((K, T, N))
    for k in range(K):
        z = innovations(params, make_rng(seed, k), (T - 1, N))
        x = loc + sigma * z
        reps[k, 0] = obs[0]
        reps[k, 1:] = np.where(x > u[1:], x, 0.0)
    ts = panel.timestamps if isinstance(panel, PrecipPanel) else None
    sites = panel.sites if isinstance(panel, PrecipPanel) else None
    return SimulationEnsemble(reps, "one_step_conditional", seed, params, u, list(range(K)), ts, sites)


def predict(ensemble: SimulationEnsemble, levels=(0.95,)) -> dict:
    """Cellwise ensemble mean and central quantile bands.

    A level ``L`` maps to the ``(1 - L)/2`` and ``(1 + L)/2`` empirical
    quantiles across replicates.
    """
    if ensemble.mode != "one_step_conditional":
        raise ConfigError("predict needs a one-step conditional ensemble")
    if ensemble.K < 2:
        raise ConfigError("predict needs at least two replicates")
    levels = [float(v) for v in levels]
    if any(not 0 < v < 1 for v in levels):
        raise ConfigError("prediction levels must lie in (0, 1)")
    reps = ensemble.replicates
    out = {"mean": reps.mean(axis=0), "bands": {}}
    for lev in levels:
        lo, hi = np.quantile(reps, [(1 - lev) / 2, (1 + lev) / 2], axis=0)
        out["bands"][lev] = (lo, hi)
    return out


def median_params(params_list) -> ModelParams:
    """Componentwise median of several parameter vectors sharing one error family."""
    fams = {p.nu for p in params_list}
    nu = fams.pop() if len(fams) == 1 else float(np.median([p.nu for p in params_list if p.nu is not None]))
    arr = np.array([[p.phi, p.rho, p.b0, p.b1, p.alpha] for p in params_list])
    med = np.median(arr, axis=0)
    return ModelParams(*med, nu=nu)
