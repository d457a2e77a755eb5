"""Function-space norms on band-limited data: H^s, B^s, B^s_{p,q}, X_T^s, L^p."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere_basis import GridField, SpectralField, make_grid, mu, synthesize

__all__ = [
    "japanese",
    "BandNormProfile",
    "TrajectoryProfile",
    "sobolev_norm",
    "modulation_norm",
    "besov_blocks",
    "besov_norm",
    "xts_norm",
    "lp_norm",
]


def japanese(a):
    """``<a> = (1 + a^2)^{1/2}``."""
    return np.sqrt(1.0 + np.square(a))


def _bracket_mu(K: int) -> np.ndarray:
    return japanese(mu(np.arange(K + 1)))


@dataclass(frozen=True, eq=False)
class BandNormProfile:
    K: int
    per_band: np.ndarray

    @classmethod
    def of(cls, u: SpectralField) -> "BandNormProfile":
        return cls(u.K, u.band_norms())


@dataclass(frozen=True, eq=False)
class TrajectoryProfile:
    """Per-band L² norms ``per_band[t_index, k]`` sampled at increasing times."""

    times: np.ndarray
    per_band: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        per_band = np.atleast_2d(np.asarray(self.per_band, dtype=float))
        if times.ndim != 1 or times.size == 0:
            raise ValueError("trajectory needs at least one sample time")
        if per_band.shape[0] != times.size:
            raise ValueError("one profile per time required")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "per_band", per_band)

    @property
    def K(self) -> int:
        return self.per_band.shape[1] - 1

    @classmethod
    def from_fields(cls, times, fields) -> "TrajectoryProfile":
        return cls(np.asarray(times, dtype=float), np.array([f.band_norms() for f in fields]))

    def extended(self, t: float, profile) -> "TrajectoryProfile":
        return TrajectoryProfile(
            np.append(self.times, t), np.vstack([self.per_band, np.asarray(profile, dtype=float)])
        )


def sobolev_norm(u: SpectralField, s: float) -> float:
    """``(sum_k <mu_k>^{2s} ||P_k u||^2)^{1/2}``."""
    w = _bracket_mu(u.K) ** s
    return float(np.sqrt(np.sum((w * u.band_norms()) ** 2)))


def modulation_norm(u: SpectralField, s: float) -> float:
    """``sum_k <mu_k>^s ||P_k u||``, the ℓ¹-in-band weighted norm."""
    return float(np.sum(_bracket_mu(u.K) ** s * u.band_norms()))


def besov_blocks(K: int) -> list[range]:
    """Dyadic degree blocks ``[2^j - 1, 2^{j+1} - 1)`` clipped to ``k <= K``."""
    blocks = []
    j = 0
    while 2**j - 1 <= K:
        blocks.append(range(2**j - 1, min(2 ** (j + 1) - 1, K + 1)))
        j += 1
    return blocks


def besov_norm(u: SpectralField, s: float, p: float = 2, q: float = 2, grid=None) -> float:
    """Dyadic-block Besov norm ``|| 2^{js} ||sum_{k in block j} P_k u||_{L^p} ||_{ℓ^q_j}``.

    For ``p == 2`` the block norms come from Parseval. Other ``p`` are
    evaluated by quadrature on ``grid`` (default: the exact grid for the
    band limit, which is exact for ``p`` in {2, 4}).
    """
    if not (1 <= p <= np.inf and 1 <= q <= np.inf):
        raise ValueError("need 1 <= p, q <= inf")
    bn = u.band_norms()
    blocks = besov_blocks(u.K)
    vals = np.empty(len(blocks))
    if p == 2:
        for j, blk in enumerate(blocks):
            vals[j] = np.sqrt(np.sum(bn[list(blk)] ** 2))
    else:
        if grid is None:
            grid = make_grid(u.K)
        for j, blk in enumerate(blocks):
            c = np.zeros_like(u.coeffs)
            c[list(blk)] = u.coeffs[list(blk)]
            vals[j] = lp_norm(synthesize(SpectralField(u.K, c), grid), p)
    vals *= 2.0 ** (s * np.arange(len(blocks)))
    if q == np.inf:
        return float(vals.max())
    return float(np.sum(vals**q) ** (1.0 / q))


def xts_norm(traj: TrajectoryProfile, s: float) -> float:
    """``sum_k <mu_k>^s max_t ||P_k u(t)||`` over the sampled times."""
    return float(np.sum(_bracket_mu(traj.K) ** s * traj.per_band.max(axis=0)))


def lp_norm(f: GridField, p: float) -> float:
    """Quadrature L^p norm on the sphere; ``p = inf`` is the max over nodes."""
    if p < 1:
        raise ValueError("p must be >= 1")
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max())
    return float(np.real(f.grid.integrate(a**p)) ** (1.0 / p))
