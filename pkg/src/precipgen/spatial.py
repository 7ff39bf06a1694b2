"""Gauge networks and the Whittle-Matern autoregression matrix.

The autoregression coefficient between sites i and j is

    beta_ij = phi * (d_ij/rho) * K1(d_ij/rho),

so the diagonal equals ``phi`` (``x K1(x) -> 1`` as ``x -> 0``) and
coefficients decay with distance.

Stationarity is checked two ways: the inequality ``phi/rho < 1/(N max d)``
and the numerical spectral radius of B.  The inequality alone is not
sufficient once ``rho > max d`` (e.g. N=2, d=1.1, rho=2, phi=0.68 passes
it with spectral radius 1.23), so both must hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigError, DataError, DomainError


def bessel_k1(x):
    """Modified Bessel function of the second kind, order one (x > 0)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("bessel_k1 requires x > 0")
    out = special.k1(arr)
    return float(out) if out.ndim == 0 else out


def _x_k1(x):
    """x*K1(x) with the analytic limit 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    out[x > 700] = 0.0  # underflows; also avoids inf * 0
    mid = (x > 0) & (x <= 700)
    out[mid] = x[mid] * special.k1(x[mid])
    return out


@dataclass
class GaugeNetwork:
    """Site labels, planar coordinates and the pairwise distance matrix.

    Distances share units with the range parameter ``rho``.  When ``dist``
    is given it takes precedence over ``coords``.
    """

    site_ids: list
    coords: np.ndarray | None = None
    dist: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.site_ids = [str(s) for s in self.site_ids]
        n = len(self.site_ids)
        if len(set(self.site_ids)) != n:
            raise DataError("duplicate site labels in network")
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float).reshape(n, 2)
        if self.dist is None:
            if self.coords is None:
                raise ConfigError("network needs coordinates or a distance matrix")
            diff = self.coords[:, None, :] - self.coords[None, :, :]
            self.dist = np.sqrt((diff**2).sum(-1))
        else:
            d = np.asarray(self.dist, dtype=float)
            if d.shape != (n, n):
                raise DataError(f"distance matrix must be {n}x{n}, got {d.shape}")
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                raise DataError("distances must be finite and nonnegative")
            if not np.array_equal(d, d.T):
                i, j = np.argwhere(d != d.T)[0]
                raise DataError(
                    f"distance matrix is not symmetric: d[{i}][{j}]={d[i, j]!r} "
                    f"but d[{j}][{i}]={d[j, i]!r}"
                )
            if np.any(np.diag(d) != 0):
                raise DataError("distance matrix must have a zero diagonal")
            self.dist = d

    @property
    def n_sites(self) -> int:
        return len(self.site_ids)

    @property
    def max_distance(self) -> float:
        return float(self.dist.max())

    def subset(self, site_ids):
        idx = [self.site_ids.index(s) for s in site_ids]
        coords = None if self.coords is None else self.coords[idx]
        return GaugeNetwork(list(site_ids), coords, self.dist[np.ix_(idx, idx)])


@dataclass
class ARMatrix:
    beta: np.ndarray
    phi: float
    rho: float


def ar_matrix(dist, phi, rho) -> np.ndarray:
    """Kernel evaluation on a raw distance matrix (no validation)."""
    with np.errstate(over="ignore"):
        scaled = np.asarray(dist, dtype=float) / rho
    return phi * _x_k1(scaled)


def build_ar_matrix(net: GaugeNetwork, phi, rho) -> ARMatrix:
    if not (phi >= 0 and np.isfinite(phi)):
        raise DomainError(f"phi must be >= 0, got {phi!r}")
    if not (rho > 0 and np.isfinite(rho)):
        raise DomainError(f"rho must be > 0, got {rho!r}")
    return ARMatrix(ar_matrix(net.dist, phi, rho), float(phi), float(rho))


def spectral_radius(mat) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(mat, dtype=float)))))


@dataclass
class StationarityCheck:
    passed: bool
    ratio: float  # phi/rho
    bound: float  # 1/(N max d)
    margin: float  # bound - ratio
    spectral_radius: float


def stationarity_bound(net: GaugeNetwork) -> float:
    if net.n_sites < 1 or net.max_distance <= 0:
        raise ConfigError("degenerate network: all pairwise distances are zero")
    return 1.0 / (net.n_sites * net.max_distance)


def check_stationarity(net: GaugeNetwork, phi, rho) -> StationarityCheck:
    """Pass iff ``phi/rho < 1/(N max d)`` and the spectral radius of B is below one."""
    bound = stationarity_bound(net)
    ratio = float(phi) / float(rho)
    radius = spectral_radius(build_ar_matrix(net, phi, rho).beta)
    return StationarityCheck(ratio < bound and radius < 1.0, ratio, bound, bound - ratio, radius)


def stable_phi_max(dist, rho) -> float:
    """Largest admissible phi at range ``rho``: ``min(rho/(N max d), 1/r(K))``.

    B = phi * K with K = ar_matrix(dist, 1, rho) positive and symmetric, so its
    spectral radius is phi times the top eigenvalue of K.  Any phi strictly
    below this value passes both stationarity checks.
    """
    d = np.asarray(dist, dtype=float)
    if d.max() <= 0:
        raise ConfigError("degenerate network: all pairwise distances are zero")
    top = float(np.linalg.eigvalsh(ar_matrix(d, 1.0, rho))[-1])
    return float(min(rho / (d.shape[0] * d.max()), 1.0 / top))


def phi_from_fraction(c, rho, net: GaugeNetwork) -> float:
    """phi for stationarity fraction ``c`` in (0, 1): ``phi = c * rho / (N max d)``."""
    return c * rho * stationarity_bound(net)


def fraction_from_phi(phi, rho, net: GaugeNetwork) -> float:
    return phi / (rho * stationarity_bound(net))


def logit(p):
    return math.log(p) - math.log1p(-p)


def expit(x):
    return float(special.expit(x))
