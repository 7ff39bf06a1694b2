"""Metrics comparing observed panels with simulated ensembles.

"Wet" means ``y > 0`` everywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PrecipPanel
from .errors import ConfigError, DomainError
from .generator import SimulationEnsemble
from .inference import ModelParams, innovation_cdf
from .spatial import GaugeNetwork, ar_matrix

DEFAULT_QQ_PROBS = np.concatenate([np.linspace(0.005, 0.995, 199), [0.999, 0.9995]])
TRANSITION_KEYS = ("wet|wet", "dry|wet", "wet|dry", "dry|dry")  # state now | state before


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, PrecipPanel) else np.asarray(x, dtype=float)


def _replicates(ens) -> np.ndarray:
    reps = ens.replicates if isinstance(ens, SimulationEnsemble) else np.asarray(ens, dtype=float)
    return reps[None] if reps.ndim == 2 else reps


def mrmse(obs, ens) -> float:
    """Mean over replicates of the RMSE against ``obs``, times 100."""
    y = _values(obs)
    reps = _replicates(ens)
    if reps.shape[1:] != y.shape:
        raise ConfigError(f"ensemble replicates {reps.shape[1:]} do not match observations {y.shape}")
    rmse = np.sqrt(np.mean((reps - y) ** 2, axis=(1, 2)))
    return float(100.0 * rmse.mean())


@dataclass
class TransitionTable:
    probs: dict  # key "now|before" -> probability or None when undefined
    counts: dict  # same keys -> number of pairs
    flags: list

    def row_sums(self):
        out = {}
        for before in ("wet", "dry"):
            a, b = self.probs[f"wet|{before}"], self.probs[f"dry|{before}"]
            out[before] = None if a is None else a + b
        return out

    def to_dict(self):
        return {"probs": self.probs, "counts": self.counts, "flags": self.flags}


def transition_probs(panel) -> TransitionTable:
    """P(state at t | state at t-1), pooled over sites and time."""
    y = _values(panel)
    if y.shape[0] < 2:
        raise ConfigError("transition probabilities need T >= 2")
    before, now = y[:-1] > 0, y[1:] > 0
    counts = {
        "wet|wet": int(np.sum(before & now)),
        "dry|wet": int(np.sum(before & ~now)),
        "wet|dry": int(np.sum(~before & now)),
        "dry|dry": int(np.sum(~before & ~now)),
    }
    probs, flags = {}, []
    for prev in ("wet", "dry"):
        n = counts[f"wet|{prev}"] + counts[f"dry|{prev}"]
        if n == 0:
            probs[f"wet|{prev}"] = probs[f"dry|{prev}"] = None
            flags.append(f"no {prev} steps to condition on; {prev} row undefined")
            continue
        p = counts[f"wet|{prev}"] / n
        probs[f"wet|{prev}"] = p
        probs[f"dry|{prev}"] = counts[f"dry|{prev}"] / n
        if p + probs[f"dry|{prev}"] != 1.0:  # rounding can leave one ulp; keep rows exactly stochastic
            probs[f"dry|{prev}"] = 1.0 - p
    return TransitionTable(probs, counts, flags)


def concurrence_histogram(panel) -> np.ndarray:
    """Counts of time steps with 0, 1, ..., N sites wet.

    An ensemble (K, T, N) is pooled over replicates, so counts sum to K*T.
    """
    arr = _values(panel) if not isinstance(panel, SimulationEnsemble) else panel.replicates
    arr = np.asarray(arr)
    N = arr.shape[-1]
    n_wet = np.sum(arr > 0, axis=-1).ravel()
    return np.bincount(n_wet, minlength=N + 1)


def total_variation(h1, h2) -> float:
    p = np.asarray(h1, dtype=float)
    q = np.asarray(h2, dtype=float)
    return float(0.5 * np.abs(p / p.sum() - q / q.sum()).sum())


@dataclass
class QQTable:
    probs: np.ndarray
    observed: np.ndarray
    replicates: np.ndarray  # (K, P)
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def rows(self):
        return zip(self.probs, self.observed, self.median, self.lower, self.upper)

    def outside_upper(self, idx=None):
        """Boolean mask of grid points where the observed quantile exceeds the band."""
        out = self.observed > self.upper
        return out if idx is None else out[idx]


def _qq(obs_vals, rep_vals, probs):
    observed = np.quantile(obs_vals, probs)
    per_rep = np.array([np.quantile(r, probs) for r in rep_vals])
    lo, med, hi = np.quantile(per_rep, [0.025, 0.5, 0.975], axis=0)
    return QQTable(np.asarray(probs, dtype=float), observed, per_rep, med, lo, hi)


def qq_pairs(obs, ens, probs=None) -> dict:
    """QQ tables over all values and over positive values, sites pooled.

    Returns ``{"all": QQTable, "positive": QQTable | None, "flags": [...]}``.
    Each replicate contributes its own quantile curve; the band is the
    2.5%/97.5% envelope of those curves.
    """
    probs = DEFAULT_QQ_PROBS if probs is None else np.asarray(probs, dtype=float)
    if np.any((probs <= 0) | (probs >= 1)):
        raise ConfigError("QQ probabilities must lie strictly inside (0, 1)")
    y = _values(obs).ravel()
    reps = _replicates(ens)
    rep_flat = [r.ravel() for r in reps]
    out = {"all": _qq(y, rep_flat, probs), "positive": None, "flags": []}
    ypos = y[y > 0]
    rpos = [r[r > 0] for r in rep_flat]
    if ypos.size == 0 or any(r.size == 0 for r in rpos):
        out["flags"].append("positive-only table absent: no positive values in observations or a replicate")
    else:
        out["positive"] = _qq(ypos, rpos, probs)
    return out


def _sigma(params: ModelParams, y_prev):
    sigma = params.b0 + params.b1 * float(np.mean(y_prev))
    if not sigma > 0:
        raise DomainError(f"innovation scale must be > 0, got {sigma!r}")
    return sigma


def dry_probability(params: ModelParams, cutoffs, y_prev, net) -> np.ndarray:
    """Model probability that each site is dry at the next step given ``y_prev``.

    ``cutoffs`` is the N-vector of thresholds for that step.  With
    ``y_prev = 0`` this is ``F(u / b0)``, the consecutive-dry case.
    """
    y_prev = np.asarray(y_prev, dtype=float)
    if np.any(y_prev < 0):
        raise DomainError("y_prev must be nonnegative")
    d = net.dist if isinstance(net, GaugeNetwork) else np.asarray(net, dtype=float)
    u = np.broadcast_to(np.asarray(cutoffs, dtype=float), y_prev.shape)
    loc = ar_matrix(d, params.phi, params.rho) @ y_prev
    z = (u - loc) / _sigma(params, y_prev)
    return np.asarray(innovation_cdf(z, params.alpha, params.nu), dtype=float)


def all_dry_probability(params: ModelParams, cutoffs, y_prev, net) -> float:
    """All sites dry together: the product of the per-site probabilities."""
    return float(np.prod(dry_probability(params, cutoffs, y_prev, net)))


def dry_probability_curve(params: ModelParams, cutoffs, panel, net) -> np.ndarray:
    """For t >= 2, the model probability that every site is dry given observed y_{t-1}."""
    y = _values(panel)
    u = cutoffs.u if hasattr(cutoffs, "u") else np.asarray(cutoffs, dtype=float)
    d = net.dist if isinstance(net, GaugeNetwork) else np.asarray(net, dtype=float)
    prev = y[:-1]
    sigma = params.b0 + params.b1 * prev.mean(axis=1)
    if np.any(~(sigma > 0)):
        raise DomainError("innovation scale must be > 0")
    z = (u[1:] - prev @ ar_matrix(d, params.phi, params.rho).T) / sigma[:, None]
    p = np.asarray(innovation_cdf(z.ravel(), params.alpha, params.nu)).reshape(z.shape)
    return p.prod(axis=1)


@dataclass
class EvaluationReport:
    mrmse: float
    qq: dict
    transitions: TransitionTable
    transitions_ensemble: list
    concurrence: np.ndarray
    concurrence_ensemble: np.ndarray
    dry_prob_curve: np.ndarray | None = None

    def summary(self) -> dict:
        ens_tr = [t.probs for t in self.transitions_ensemble]
        mean_tr = {}
        for key in TRANSITION_KEYS:
            vals = [p[key] for p in ens_tr if p[key] is not None]
            mean_tr[key] = float(np.mean(vals)) if vals else None
        return {
            "mrmse_percent": self.mrmse,
            "transitions_observed": self.transitions.to_dict(),
            "transitions_ensemble_mean": mean_tr,
            "concurrence_observed": [int(c) for c in self.concurrence],
            "concurrence_ensemble": [int(c) for c in self.concurrence_ensemble],
            "concurrence_tv_distance": total_variation(self.concurrence, self.concurrence_ensemble),
            "qq_flags": list(self.qq["flags"]),
            "dry_prob_mean": None if self.dry_prob_curve is None else float(np.mean(self.dry_prob_curve)),
        }


def evaluate(obs, ens, params=None, cutoffs=None, net=None, probs=None) -> EvaluationReport:
    reps = _replicates(ens)
    curve = None
    if params is not None and cutoffs is not None and net is not None:
        curve = dry_probability_curve(params, cutoffs, obs, net)
    return EvaluationReport(
        mrmse(obs, reps),
        qq_pairs(obs, reps, probs),
        transition_probs(obs),
        [transition_probs(r) for r in reps],
        concurrence_histogram(obs),
        concurrence_histogram(reps),
        curve,
    )
