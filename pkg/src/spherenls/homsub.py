"""The homogeneous-harmonic algebra ``span{sin^k(theta) e^{ik phi}}``.

Products of ``w_k = sin^k(theta) e^{ik phi}`` satisfy ``w_j w_l = w_{j+l}``,
so ``u^3`` for ``u = sum a_k w_k`` is the triple convolution of the
coefficient sequence. Each ``w_k`` is a multiple of ``Y_k^k`` and hence a
Laplace eigenfunction, which makes ``i u_t + Lap u = u^3`` a closed ODE
system for the ``a_k``.

Time-frequency norms use the unitary Fourier transform in ``t``, so that
``X^{0,0}`` is exactly ``L^2_{t,x}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .norms import japanese
from .sphere_basis import SpectralField, mu, raw_highest_norm

__all__ = [
    "HomState",
    "HomTrajectory",
    "bump",
    "hom_cube",
    "hom_evolve",
    "xsb_norm",
    "cutoff_ratio",
    "duhamel_residual",
    "bilinear_lhs",
    "verify_bilinear_xsb",
    "compute_M",
    "verify_trilinear",
    "picard_solve",
]


def basis_norms(K: int) -> np.ndarray:
    """``nu_k = ||w_k||_{L^2(S^2)} = sqrt(2 pi W_{2k+1})``."""
    return np.array([raw_highest_norm(k) for k in range(K + 1)])


def _eigs(K: int) -> np.ndarray:
    return (np.arange(K + 1) * np.arange(1, K + 2)).astype(float)


@dataclass(frozen=True, eq=False)
class HomState:
    """Coefficients ``a_k`` of ``u = sum_k a_k sin^k(theta) e^{ik phi}``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=complex))
        if a.ndim != 1:
            raise ValueError("coefficients must be a 1-D sequence")
        object.__setattr__(self, "a", a)

    @property
    def K(self) -> int:
        return self.a.size - 1

    @property
    def basis_norms(self) -> np.ndarray:
        return basis_norms(self.K)

    @classmethod
    def zeros(cls, K: int) -> "HomState":
        return cls(np.zeros(K + 1, dtype=complex))

    @classmethod
    def random(cls, K: int, rng: np.random.Generator, h14: float | None = None) -> "HomState":
        """Gaussian coefficients on the unit-norm basis, optionally scaled to ``||u||_{H^{1/4}} = h14``."""
        z = rng.standard_normal(K + 1) + 1j * rng.standard_normal(K + 1)
        st = cls(z / basis_norms(K))
        return st if h14 is None else st.scale(h14 / st.sobolev_norm(0.25))

    def scale(self, c: complex) -> "HomState":
        return HomState(self.a * c)

    def truncated(self, K: int) -> "HomState":
        out = np.zeros(K + 1, dtype=complex)
        n = min(K, self.K) + 1
        out[:n] = self.a[:n]
        return HomState(out)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.a) ** 2 * self.basis_norms**2)))

    def sobolev_norm(self, s: float) -> float:
        w = japanese(mu(np.arange(self.K + 1))) ** (2 * s)
        return float(np.sqrt(np.sum(w * np.abs(self.a) ** 2 * self.basis_norms**2)))

    def to_spectral(self, K: int | None = None) -> SpectralField:
        """Orthonormal-harmonic coefficients: ``w_k = (-1)^k nu_k Y_k^k``."""
        K = self.K if K is None else K
        modes = {(k, k): self.a[k] * self.basis_norms[k] * (-1.0) ** k for k in range(min(K, self.K) + 1)}
        return SpectralField.from_modes(K, modes)

    @classmethod
    def from_spectral(cls, f: SpectralField) -> "HomState":
        nu = basis_norms(f.K)
        return cls(np.array([f[(k, k)] * (-1.0) ** k / nu[k] for k in range(f.K + 1)]))


@dataclass(frozen=True, eq=False)
class HomTrajectory:
    """Coefficient histories ``a[n, k]`` on a uniform time grid."""

    times: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        a = np.asarray(self.a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != times.size:
            raise ValueError("need one coefficient row per time")
        if times.size > 2:
            d = np.diff(times)
            if np.any(np.abs(d - d[0]) > 1e-9 * abs(d[0])):
                raise ValueError("time grid must be uniform")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "a", a)

    @property
    def K(self) -> int:
        return self.a.shape[1] - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def state(self, n: int) -> HomState:
        return HomState(self.a[n])

    def __sub__(self, other: "HomTrajectory") -> "HomTrajectory":
        K = max(self.K, other.K)
        return HomTrajectory(self.times, _pad(self.a, K) - _pad(other.a, K))

    def sup_sobolev(self, s: float) -> float:
        w = japanese(mu(np.arange(self.K + 1))) ** (2 * s) * basis_norms(self.K) ** 2
        return float(np.sqrt(np.max(np.sum(w * np.abs(self.a) ** 2, axis=1))))


def _pad(a: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros(a.shape[:-1] + (K + 1,), dtype=complex)
    n = min(K + 1, a.shape[-1])
    out[..., :n] = a[..., :n]
    return out


def bump(t):
    """``exp(1 - 1/(1 - t^2))`` on ``|t| < 1``, zero outside; equals 1 at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _cube_coeffs(a: np.ndarray) -> np.ndarray:
    """Triple self-convolution along the last axis (length ``3K + 1``)."""
    n = a.shape[-1]
    L = 3 * (n - 1) + 1
    size = 1 << (L - 1).bit_length()
    fa = np.fft.fft(a, n=size, axis=-1)
    return np.fft.ifft(fa**3, axis=-1)[..., :L]


def hom_cube(u: HomState) -> HomState:
    """Exact coefficients of ``u^3``: ``(u^3)_m = sum_{k1+k2+k3=m} a_k1 a_k2 a_k3``."""
    return HomState(np.convolve(np.convolve(u.a, u.a), u.a))


def _hom_rhs(t: float, v: np.ndarray, sign: int) -> np.ndarray:
    K = v.size - 1
    rot = np.exp(1j * t * _eigs(K))
    c = np.convolve(np.convolve(v / rot, v / rot), v / rot)[: K + 1]
    return (-1j * sign) * rot * c


def hom_evolve(
    u0: HomState,
    T: float,
    dt: float,
    K_keep: int | None = None,
    sign: int = 1,
    sample_stride: int = 1,
) -> HomTrajectory:
    """Lawson-RK4 for ``i a_m' - mu_m^2 a_m = sign * (u^3)_m`` truncated at ``K_keep``."""
    K = u0.K if K_keep is None else K_keep
    if K < u0.K:
        raise ValueError("K_keep must be >= the data band limit")
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * T:
        raise ValueError("T must be a positive integer multiple of dt")
    v = u0.truncated(K).a.copy()
    times, rows = [0.0], [v.copy()]
    t = 0.0
    for n in range(1, n_steps + 1):
        h = dt
        k1 = _hom_rhs(t, v, sign)
        k2 = _hom_rhs(t + h / 2, v + h / 2 * k1, sign)
        k3 = _hom_rhs(t + h / 2, v + h / 2 * k2, sign)
        k4 = _hom_rhs(t + h, v + h * k3, sign)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = n * dt
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > 1e12:
            from .evolution import NumericalGuardError

            raise NumericalGuardError(t, "homogeneous solution left the finite regime")
        if n % sample_stride == 0 or n == n_steps:
            times.append(t)
            rows.append(v * np.exp(-1j * t * _eigs(K)))
    return HomTrajectory(np.array(times), np.array(rows))


def xsb_norm(traj: HomTrajectory, s: float, b: float, window: bool = True, pad: int = 8) -> float:
    """Discrete ``X^{s,b}`` norm of a homogeneous trajectory.

    ``(sum_k nu_k^2 <mu_k>^{2s} int <tau + mu_k^2>^{2b} |a_k^(tau)|^2 dtau)^{1/2}``
    with the unitary transform in ``t``. With ``window=True`` the samples are
    first multiplied by the bump stretched over the sampled interval; the
    transform is zero-padded ``pad``-fold.
    """
    t = traj.times
    N, K = t.size, traj.K
    if N < 2:
        raise ValueError("need at least two samples")
    dt = traj.dt
    lam = _eigs(K)
    active = np.flatnonzero(np.any(traj.a != 0, axis=0))
    if active.size and lam[active].max() >= 0.9 * math.pi / dt:
        raise ValueError(
            f"time step {dt:g} cannot resolve temporal frequency {lam[active].max():g}; refine the grid"
        )
    a = traj.a
    if window:
        span = t[-1] - t[0]
        a = a * bump(2.0 * (t - t[0]) / span - 1.0)[:, None]
    n_fft = pad * N
    tau = 2.0 * math.pi * np.fft.fftfreq(n_fft, d=dt)
    ahat = np.fft.fft(a, n=n_fft, axis=0) * (dt / math.sqrt(2.0 * math.pi))
    ahat *= np.exp(-1j * tau * t[0])[:, None]
    dtau = 2.0 * math.pi / (n_fft * dt)
    weight = japanese(tau[:, None] + lam[None, :]) ** (2 * b)
    per_k = np.sum(weight * np.abs(ahat) ** 2, axis=0) * dtau
    spatial = basis_norms(K) ** 2 * japanese(mu(np.arange(K + 1))) ** (2 * s)
    return float(math.sqrt(np.sum(spatial * per_k)))


def cutoff_ratio(traj: HomTrajectory, T: float, s: float, b: float) -> float:
    """``||theta_T f||_{X^{s,b}} / (T^{1/2-b} ||f||_{X^{s,b}})`` with ``theta_T(t) = bump(t/T)``."""
    cut = HomTrajectory(traj.times, traj.a * bump(traj.times / T)[:, None])
    return xsb_norm(cut, s, b, window=False) / (T ** (0.5 - b) * xsb_norm(traj, s, b, window=False))


def _ddt(a: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order central difference in time on interior samples (two dropped at each end)."""
    return (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * dt)


def duhamel_residual(traj: HomTrajectory, sign: int = 1) -> float:
    """Max over interior samples of ``||i u_t + Lap u - sign u^3||_{L^2}`` (truncated at ``K``)."""
    K = traj.K
    if traj.times.size < 5:
        raise ValueError("need at least five samples")
    a = traj.a
    r = 1j * _ddt(a, traj.dt) - _eigs(K) * a[2:-2] - sign * _cube_coeffs(a[2:-2])[:, : K + 1]
    return float(np.max(np.sqrt(np.sum(np.abs(r) ** 2 * basis_norms(K) ** 2, axis=1))))


# ---------------------------------------------------------------------------
# multilinear estimates

def _random_packet(rng, K, times, n_waves=3, omega=10.0, profile=None) -> np.ndarray:
    """Windowed sums of near-dispersive waves ``e^{-i(mu_k^2 + w) t}``, ``|w| <= omega``."""
    lam = _eigs(K)
    nu = basis_norms(K)
    a = np.zeros((times.size, K + 1), dtype=complex)
    amp = rng.standard_normal(K + 1) + 1j * rng.standard_normal(K + 1)
    if profile is not None:
        amp *= profile
    for _ in range(n_waves):
        w = rng.uniform(-omega, omega, K + 1)
        c = (rng.standard_normal(K + 1) + 1j * rng.standard_normal(K + 1)) / math.sqrt(n_waves)
        a += (amp * c / nu)[None, :] * np.exp(-1j * np.outer(times, lam + w))
    return a


def _single_mode(k, K, times) -> np.ndarray:
    a = np.zeros((times.size, K + 1), dtype=complex)
    a[:, k] = np.exp(-1j * _eigs(k)[-1] * times) / raw_highest_norm(k)
    return a


def _time_grid(max_freq: float, T: float = 1.0) -> np.ndarray:
    # samples resolve ``max_freq`` with a 4x margin under Nyquist
    n = int(math.ceil(T * 4.0 * max_freq / math.pi)) + 1
    return np.linspace(0.0, T, max(n, 64))


def bilinear_lhs(a1: np.ndarray, a2: np.ndarray, times: np.ndarray) -> float:
    """``||f1 f2||_{L^2_{t,x}}`` from coefficient histories via the product rule ``w_j w_l = w_{j+l}``."""
    prod = np.array([np.convolve(x, y) for x, y in zip(a1, a2)])
    nu2 = basis_norms(prod.shape[1] - 1) ** 2
    dens = np.sum(np.abs(prod) ** 2 * nu2, axis=1)
    return float(math.sqrt(np.trapezoid(dens, times)))


def _windowed(a, times):
    return a * bump(2.0 * times / times[-1] - 1.0)[:, None]


def verify_bilinear_xsb(
    trials: int, K, b: float, seed: int = 0, weight: float = 0.25, omega: float = 10.0
) -> dict:
    """Max of ``||f1 f2||_{L^2} / (||f1||_{X^{0,b}} ||f2||_{X^{weight,b}})`` over homogeneous pairs.

    Both placements of the derivative weight are evaluated; ``max_ratio``
    takes the larger of the two per pair. Candidates are random windowed
    packets plus the structured pairs (w_K, w_K), (w_K, w_0), (w_0, w_K).
    """
    if b <= 3.0 / 8.0:
        raise ValueError("bilinear estimate requires b > 3/8")
    Ks = [K] if np.isscalar(K) else list(K)
    ratio_by_K, w1_by_K, w2_by_K = {}, {}, {}
    for Kc in Ks:
        rng = np.random.default_rng([seed, Kc])
        times = _time_grid(_eigs(Kc)[-1] + omega)
        tr = lambda a: HomTrajectory(times, a)  # noqa: E731
        cands = [
            (_single_mode(Kc, Kc, times), _single_mode(Kc, Kc, times)),
            (_single_mode(Kc, Kc, times), _single_mode(0, Kc, times)),
            (_single_mode(0, Kc, times), _single_mode(Kc, Kc, times)),
        ]
        for _ in range(trials):
            cands.append((_random_packet(rng, Kc, times, omega=omega), _random_packet(rng, Kc, times, omega=omega)))
        best = best1 = best2 = 0.0
        for a1, a2 in cands:
            a1, a2 = _windowed(a1, times), _windowed(a2, times)
            lhs = bilinear_lhs(a1, a2, times)
            n1_0, n2_0 = xsb_norm(tr(a1), 0.0, b, window=False), xsb_norm(tr(a2), 0.0, b, window=False)
            n1_w, n2_w = xsb_norm(tr(a1), weight, b, window=False), xsb_norm(tr(a2), weight, b, window=False)
            r2 = lhs / (n1_0 * n2_w)
            r1 = lhs / (n1_w * n2_0)
            best1, best2 = max(best1, r1), max(best2, r2)
            best = max(best, r1, r2)
        ratio_by_K[int(Kc)] = best
        w1_by_K[int(Kc)] = best1
        w2_by_K[int(Kc)] = best2
    return {
        "K": Ks if len(Ks) > 1 else Ks[0],
        "b": b,
        "b_prime": None,
        "weight": weight,
        "trials": trials,
        "max_ratio": max(ratio_by_K.values()),
        "ratio_by_K": ratio_by_K,
        "ratio_weight_on_f1_by_K": w1_by_K,
        "ratio_weight_on_f2_by_K": w2_by_K,
    }


def _m_sums(m: int, taus: np.ndarray, expo: float) -> np.ndarray:
    k1 = np.arange(m + 1)
    g = k1 * (k1 + 1) + (m - k1) * (m - k1 + 1)
    return np.sum(japanese(taus[:, None] - g[None, :]) ** (-expo), axis=1)


def compute_M(tau_grid=None, m_max: int = 64, b: float = 0.5) -> float:
    """``sup_{tau, m <= m_max} sum_{k1 <= m} <tau - mu_{k1}^2 - mu_{m-k1}^2>^{1-4b}`` (the squared constant).

    Without an explicit ``tau_grid`` the sup over ``tau`` is taken, per ``m``,
    over the peak locations ``mu_{k1}^2 + mu_{m-k1}^2`` and the midpoints
    between consecutive peaks.
    """
    expo = 4.0 * b - 1.0
    best = 0.0
    for m in range(m_max + 1):
        if tau_grid is None:
            k1 = np.arange(m + 1)
            g = np.unique(k1 * (k1 + 1) + (m - k1) * (m - k1 + 1)).astype(float)
            taus = np.concatenate([g, 0.5 * (g[1:] + g[:-1])])
        else:
            taus = np.asarray(tau_grid, dtype=float)
        best = max(best, float(_m_sums(m, taus, expo).max()))
    return best


def trilinear_ratio(a_list, times, b, b_prime, weights=(0.25, 0.25, 0.25), out_weight=0.25) -> float:
    a1, a2, a3 = (_windowed(a, times) for a in a_list)
    prod = np.array([np.convolve(np.convolve(x, y), z) for x, y, z in zip(a1, a2, a3)])
    num = xsb_norm(HomTrajectory(times, prod), out_weight, b_prime - 1.0, window=False)
    den = 1.0
    for a, w in zip((a1, a2, a3), weights):
        den *= xsb_norm(HomTrajectory(times, a), w, b, window=False)
    return num / den


def verify_trilinear(
    trials: int, K, b: float, b_prime: float, seed: int = 0, weight: float = 0.25, omega: float = 10.0
) -> dict:
    """Max of ``||f1 f2 f3||_{X^{1/4,b'-1}} / prod ||f_j||_{X^{weight,b}}`` over homogeneous triples.

    The product is formed exactly in the algebra and its norm computed
    directly (equivalent to the duality pairing against the unit ball of
    ``X^{-1/4, 1-b'}``). Structured candidates: (w_K, w_0, w_0), (w_K, w_K, w_K).
    """
    if not (b > 3.0 / 8.0 and b_prime < 5.0 / 8.0):
        raise ValueError("trilinear estimate requires b > 3/8 and b' < 5/8")
    Ks = [K] if np.isscalar(K) else list(K)
    ratio_by_K = {}
    for Kc in Ks:
        rng = np.random.default_rng([seed, Kc, 3])
        times = _time_grid(_eigs(3 * Kc)[-1] + 3 * omega)
        cands = [
            [_single_mode(Kc, Kc, times), _single_mode(0, Kc, times), _single_mode(0, Kc, times)],
            [_single_mode(Kc, Kc, times)] * 3,
            [_single_mode(0, Kc, times)] * 3,
        ]
        for _ in range(trials):
            cands.append([_random_packet(rng, Kc, times, omega=omega) for _ in range(3)])
        ratio_by_K[int(Kc)] = max(
            trilinear_ratio(c, times, b, b_prime, weights=(weight,) * 3) for c in cands
        )
    return {
        "K": Ks if len(Ks) > 1 else Ks[0],
        "b": b,
        "b_prime": b_prime,
        "weight": weight,
        "trials": trials,
        "max_ratio": max(ratio_by_K.values()),
        "ratio_by_K": ratio_by_K,
    }


# ---------------------------------------------------------------------------
# contraction map

def _cumulative_integral(g: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order cumulative integral along axis 0 of uniformly sampled ``g``."""
    n = g.shape[0]
    out = np.zeros_like(g)
    if n < 4:
        # short grids: trapezoid
        out[1:] = np.cumsum(0.5 * h * (g[1:] + g[:-1]), axis=0)
        return out
    pieces = np.empty((n - 1,) + g.shape[1:], dtype=g.dtype)
    pieces[0] = h * (9 * g[0] + 19 * g[1] - 5 * g[2] + g[3]) / 24
    pieces[1:-1] = h * (-g[:-3] + 13 * g[1:-2] + 13 * g[2:-1] - g[3:]) / 24
    pieces[-1] = h * (g[-4] - 5 * g[-3] + 19 * g[-2] + 9 * g[-1]) / 24
    out[1:] = np.cumsum(pieces, axis=0)
    return out


def duhamel_map(u0: HomState, traj: HomTrajectory, sign: int = 1) -> HomTrajectory:
    """``e^{it Lap} u0 - i sign int_0^t e^{i(t-t') Lap} u^3(t') dt'`` on the trajectory's time grid."""
    K = traj.K
    t = traj.times
    rot = np.exp(1j * np.outer(t, _eigs(K)))
    g = rot * _cube_coeffs(traj.a)[:, : K + 1]
    v = u0.truncated(K).a[None, :] - 1j * sign * _cumulative_integral(g, traj.dt)
    return HomTrajectory(t, v / rot)


def picard_solve(
    u0: HomState,
    T: float,
    b: float = 0.51,
    max_iter: int = 30,
    dt: float = 1e-4,
    K_keep: int | None = None,
    s: float = 0.25,
    sign: int = 1,
    tol: float = 1e-13,
):
    """Fixed-point iteration of the Duhamel map on ``[0, T]``.

    Returns the last iterate and a report with the ``X^{s,b}`` norms of
    successive differences and their ratios; ``contracting`` is True when
    every ratio from the second on is at most 1/2.
    """
    K = u0.K if K_keep is None else K_keep
    n = int(round(T / dt))
    times = np.linspace(0.0, n * dt, n + 1)
    rot = np.exp(-1j * np.outer(times, _eigs(K)))
    current = HomTrajectory(times, u0.truncated(K).a[None, :] * rot)
    scale = max(xsb_norm(current, s, b), 1e-300)
    diffs = []
    converged = False
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = duhamel_map(u0, current, sign)
            d = xsb_norm(nxt - current, s, b)
        diffs.append(d)
        current = nxt
        if not math.isfinite(d):
            break
        if d <= tol * scale or d == 0.0:
            converged = True
            break
    ratios = [diffs[i + 1] / diffs[i] for i in range(len(diffs) - 1) if 0 < diffs[i] < math.inf]
    report = {
        "T": T,
        "b": b,
        "s": s,
        "iterations": len(diffs),
        "differences": diffs,
        "ratios": ratios,
        "converged": converged,
        "contracting": all(r <= 0.5 for r in ratios[1:]) and all(map(math.isfinite, diffs)),
    }
    return current, report
