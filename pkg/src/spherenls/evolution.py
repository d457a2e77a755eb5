"""Galerkin-truncated cubic NLS on S² in interaction-picture variables.

The unknown is ``v_k = e^{i t mu_k^2} P_k u`` band by band, which obeys

    dv/dt = -i * sign * e^{i t mu^2} P_{<=K} N(e^{-i t mu^2} v),

with ``N(u) = |u|^2 u`` (or ``u^3`` for the non-gauge-invariant variant).
Classical RK4 applied to ``v`` is the Lawson integrating-factor scheme:
the linear flow is exact and only the nonlinear interaction is stepped.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .norms import TrajectoryProfile, japanese, modulation_norm, xts_norm
from .resonance import DEFAULT_EPS, ResonanceParams, resonance_mask, weight_kernel
from .sphere_basis import (
    GridField,
    SpectralField,
    analyze,
    make_grid,
    mu,
    synthesize,
)

__all__ = [
    "EvolutionConfig",
    "State",
    "RunRecord",
    "NumericalGuardError",
    "cubic_term",
    "energy",
    "step",
    "evolve",
    "apriori_diagnostics",
    "difference_diagnostics",
    "continuity_modulus",
    "optimal_delta",
]

GUARD_H1 = 1.0e6
VARIANTS = ("cubic", "u3")


class NumericalGuardError(RuntimeError):
    """Raised when the solution leaves the finite / bounded regime."""

    def __init__(self, t: float, reason: str, record=None):
        super().__init__(f"numerical guard tripped at t={t:.6g}: {reason}")
        self.t = t
        self.reason = reason
        self.record = record


@dataclass(frozen=True)
class EvolutionConfig:
    K: int
    dt: float
    T: float
    delta: float = 0.1
    s: float = 0.25
    sample_stride: int = 10
    nonlinearity_sign: int = 1
    variant: str = "cubic"

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.nonlinearity_sign not in (-1, 0, 1):
            raise ValueError("nonlinearity_sign must be -1, 0 or +1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * max(1.0, self.T / self.dt):
            raise ValueError("T must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True, eq=False)
class State:
    t: float
    v: SpectralField


def _eigs(K: int) -> np.ndarray:
    return (np.arange(K + 1) * np.arange(1, K + 2)).astype(float)


def _nonlinear(coeffs: np.ndarray, K: int, grid, variant: str) -> np.ndarray:
    f = synthesize(SpectralField(K, coeffs), grid).values
    g = f * f * f if variant == "u3" else (f * np.conj(f)) * f
    return analyze(GridField(grid, g), K).coeffs


def cubic_term(u: SpectralField, grid=None, variant: str = "cubic") -> SpectralField:
    """Degree-``<= K`` projection of ``|u|^2 u`` (or ``u^3``), computed pseudo-spectrally.

    The default grid integrates degree-``4K`` polynomials exactly, so the
    projection carries no aliasing error.
    """
    if grid is None:
        grid = make_grid(u.K)
    return SpectralField(u.K, _nonlinear(u.coeffs, u.K, grid, variant))


def energy(u: SpectralField, sign: int = 1, grid=None) -> float:
    """``int |grad u|^2 + (sign/2) int |u|^4``."""
    if grid is None:
        grid = make_grid(u.K)
    kinetic = np.sum(_eigs(u.K)[:, None] * np.abs(u.coeffs) ** 2)
    f = synthesize(u, grid).values
    quartic = np.real(grid.integrate(np.abs(f) ** 4))
    return float(kinetic + 0.5 * sign * quartic)


def _rotation(K: int, t: float) -> np.ndarray:
    return np.exp(1j * t * _eigs(K))[:, None]


def _rhs(t: float, v: np.ndarray, cfg: EvolutionConfig, grid) -> np.ndarray:
    if cfg.nonlinearity_sign == 0:
        return np.zeros_like(v)
    rot = _rotation(cfg.K, t)
    u = v / rot
    return (-1j * cfg.nonlinearity_sign) * rot * _nonlinear(u, cfg.K, grid, cfg.variant)


def _rk4(t: float, v: np.ndarray, h: float, cfg: EvolutionConfig, grid) -> np.ndarray:
    k1 = _rhs(t, v, cfg, grid)
    k2 = _rhs(t + h / 2, v + (h / 2) * k1, cfg, grid)
    k3 = _rhs(t + h / 2, v + (h / 2) * k2, cfg, grid)
    k4 = _rhs(t + h, v + h * k3, cfg, grid)
    return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_guard(t: float, u: np.ndarray, K: int) -> None:
    if not np.all(np.isfinite(u)):
        raise NumericalGuardError(t, "nonfinite coefficients")
    h1 = math.sqrt(float(np.sum((1.0 + _eigs(K))[:, None] * np.abs(u) ** 2)))
    if h1 > GUARD_H1:
        raise NumericalGuardError(t, f"H^1 norm {h1:.3g} exceeds {GUARD_H1:g}")


def step(state: State, cfg: EvolutionConfig, grid=None) -> State:
    """Advance one Lawson-RK4 step of size ``cfg.dt``."""
    if grid is None:
        grid = make_grid(cfg.K)
    v = state.v.padded(cfg.K).coeffs
    v_new = _rk4(state.t, v, cfg.dt, cfg, grid)
    t_new = state.t + cfg.dt
    _check_guard(t_new, v_new, cfg.K)
    return State(t_new, SpectralField(cfg.K, v_new))


def to_physical(state: State) -> SpectralField:
    """``u = e^{-i t mu^2} v``."""
    return SpectralField(state.v.K, state.v.coeffs / _rotation(state.v.K, state.t))


@dataclass(eq=False)
class RunRecord:
    """Sampled output of :func:`evolve`. ``snapshots[n]`` holds the physical coefficients at ``times[n]``."""

    config: EvolutionConfig
    times: np.ndarray
    snapshots: np.ndarray
    mass: np.ndarray
    energy: np.ndarray | None
    aborted_at: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.config.K

    def field_at(self, n: int) -> SpectralField:
        return SpectralField(self.K, self.snapshots[n])

    @property
    def initial(self) -> SpectralField:
        return self.field_at(0)

    @property
    def trajectory(self) -> TrajectoryProfile:
        return TrajectoryProfile(self.times, np.sqrt(np.sum(np.abs(self.snapshots) ** 2, axis=2)))

    def xts(self, s: float = 0.25) -> float:
        return xts_norm(self.trajectory, s)

    def to_dict(self) -> dict:
        snaps = self.snapshots
        return {
            "config": asdict(self.config),
            "times": self.times.tolist(),
            "mass": self.mass.tolist(),
            "energy": None if self.energy is None else self.energy.tolist(),
            "per_band": self.trajectory.per_band.tolist(),
            "snapshots": {"real": snaps.real.tolist(), "imag": snaps.imag.tolist()},
            "aborted_at": self.aborted_at,
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        snaps = np.array(d["snapshots"]["real"]) + 1j * np.array(d["snapshots"]["imag"])
        return cls(
            EvolutionConfig(**d["config"]),
            np.array(d["times"], dtype=float),
            snaps,
            np.array(d["mass"], dtype=float),
            None if d["energy"] is None else np.array(d["energy"], dtype=float),
            d.get("aborted_at"),
            d.get("extra", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def to_csv(self, columns: dict | None = None) -> str:
        """One row per snapshot: t, mass, energy, per-band norms, then any extra series."""
        per_band = self.trajectory.per_band
        columns = columns or {}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mass", "energy"] + [f"band_{k}" for k in range(self.K + 1)] + list(columns))
        for n, t in enumerate(self.times):
            e = "" if self.energy is None else repr(float(self.energy[n]))
            extra = [repr(float(np.asarray(v)[n])) for v in columns.values()]
            w.writerow([repr(float(t)), repr(float(self.mass[n])), e] + [repr(float(x)) for x in per_band[n]] + extra)
        return buf.getvalue()


def evolve(u0: SpectralField, cfg: EvolutionConfig, grid=None) -> RunRecord:
    """Run the truncated flow from ``u0`` to ``cfg.T`` and record samples every ``sample_stride`` steps.

    On a guard trip the partially filled record is attached to the
    :class:`NumericalGuardError` and the error is re-raised.
    """
    if u0.K > cfg.K:
        raise ValueError(f"initial data has band limit {u0.K} > K={cfg.K}")
    if grid is None:
        grid = make_grid(cfg.K)
    K = cfg.K
    v = u0.padded(K).coeffs.copy()
    times, snaps = [0.0], [v.copy()]
    n_steps = cfg.n_steps
    t = 0.0
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(1, n_steps + 1):
                v = _rk4(t, v, cfg.dt, cfg, grid)
                t = n * cfg.dt
                _check_guard(t, v, K)
                if n % cfg.sample_stride == 0 or n == n_steps:
                    times.append(t)
                    snaps.append(v / _rotation(K, t))
    except NumericalGuardError as err:
        err.record = _build_record(cfg, times, snaps, grid, aborted_at=err.t)
        raise
    return _build_record(cfg, times, snaps, grid)


def _build_record(cfg, times, snaps, grid, aborted_at=None) -> RunRecord:
    snaps = np.array(snaps)
    mass = np.sum(np.abs(snaps) ** 2, axis=(1, 2))
    en = None
    if cfg.variant == "cubic":
        en = np.array([energy(SpectralField(cfg.K, c), cfg.nonlinearity_sign, grid) for c in snaps])
    return RunRecord(cfg, np.array(times), snaps, mass, en, aborted_at)


def optimal_delta(T: float, lo: float = 1e-12, hi: float = 1.0 - 1e-12) -> float:
    """Minimiser over ``(0, 1)`` of ``sqrt(T/delta) + delta^{1/4}``: ``(2 sqrt(T))^{4/3}`` clipped."""
    if T <= 0:
        return lo
    return float(np.clip((2.0 * math.sqrt(T)) ** (4.0 / 3.0), lo, hi))


def _apriori_rhs(b0: float, X: float, T: float, delta: float) -> float:
    return b0 + (math.sqrt(T / delta) + delta**0.25) * X**2 + math.sqrt(T) * X**3


def apriori_diagnostics(rec: RunRecord, p: ResonanceParams, eps: float = DEFAULT_EPS, grid=None) -> dict:
    """Discrete J1..J5 and the residual ratio of the a priori bound.

    Time integrals use the trapezoid rule over the stored samples. ``k >~ k1``
    is taken as ``mu_k >= mu_{k1}/2`` and ``k1 >> k`` as its complement.
    """
    K = rec.K
    if grid is None:
        grid = make_grid(K)
    t = rec.times
    T = float(t[-1] - t[0])
    br = japanese(mu(np.arange(K + 1)))
    per_band = rec.trajectory.per_band
    b = per_band * br**0.25
    nb = np.array(
        [cubic_term(rec.field_at(n), grid, rec.config.variant).band_norms() for n in range(len(t))]
    )

    res = resonance_mask(K, p)
    nonres = ~res
    W = np.where(nonres, weight_kernel(K, eps), 0.0)
    mk = mu(np.arange(K + 1))
    near = (mk[:, None] >= 0.5 * mk[None, :])[:, :, None, None]
    W4 = np.where(near, W, 0.0)
    W5 = np.where(nonres & ~near, weight_kernel(K, eps, power=0.75), 0.0)

    def trap(y):
        return float(np.trapezoid(y, t)) if len(t) > 1 else 0.0

    j1_t = np.einsum("kabc,na,nb,nc->n", res.astype(float), b, b, b)
    B = b.max(axis=0)
    J2 = float(np.einsum("kabc,a,b,c->", W, B, B, B))
    j3_t = np.sum(nb / br ** (0.75 - eps), axis=1)
    n1 = nb / br ** (0.75 - eps)
    j4_t = np.einsum("kabc,na,nb,nc->n", W4, n1, b, b)
    j5_t = np.einsum("kabc,na,nb,nc->n", W5, nb, b, b)

    X = xts_norm(rec.trajectory, 0.25)
    X16 = xts_norm(rec.trajectory, 1.0 / 6.0)
    b0 = modulation_norm(rec.initial, 0.25)
    d_opt = optimal_delta(T)
    out = {
        "J1": trap(j1_t),
        "J2": J2,
        "J3": trap(j3_t),
        "J4": trap(j4_t),
        "J5": trap(j5_t),
        "X": X,
        "B0": b0,
        "T": T,
        "delta": p.delta,
        "delta_opt": d_opt,
        "eps": eps,
    }
    if X == 0.0:
        out.update(residual=0.0, residual_opt=0.0, J1_ratio=0.0, J2_ratio=0.0, J3_ratio=0.0, J4_ratio=0.0, J5_ratio=0.0)
        return out
    out["residual"] = X / _apriori_rhs(b0, X, T, p.delta)
    out["residual_opt"] = X / _apriori_rhs(b0, X, T, d_opt)
    out["J1_ratio"] = out["J1"] / ((T / p.delta) * X**3) if T > 0 else 0.0
    out["J2_ratio"] = J2 / X**3
    out["J3_ratio"] = out["J3"] / (T * X16**3) if T > 0 else 0.0
    out["J4_ratio"] = out["J4"] / (T * X**5) if T > 0 else 0.0
    out["J5_ratio"] = out["J5"] / (T * X**5) if T > 0 else 0.0
    return out


def _same_run_shape(a: RunRecord, b: RunRecord) -> None:
    ca, cb = asdict(a.config), asdict(b.config)
    if ca != cb:
        diff = sorted(k for k in ca if ca[k] != cb[k])
        raise ValueError(f"mismatched configs: {diff}")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
        raise ValueError("mismatched sample times")


def difference_diagnostics(recA: RunRecord, recB: RunRecord) -> dict:
    """Difference of two runs in ``X_T^{1/4}`` against the initial ``B^{1/4}`` distance."""
    _same_run_shape(recA, recB)
    diff = TrajectoryProfile(recA.times, np.sqrt(np.sum(np.abs(recA.snapshots - recB.snapshots) ** 2, axis=2)))
    d = xts_norm(diff, 0.25)
    d0 = modulation_norm(recA.initial - recB.initial, 0.25)
    M = max(recA.xts(0.25), recB.xts(0.25))
    T = float(recA.times[-1] - recA.times[0])
    delta = optimal_delta(T)
    rhs = d0 + (math.sqrt(T / delta) + delta**0.25) * M * d + math.sqrt(T) * M**2 * d
    return {
        "diff_xts": d,
        "initial_diff": d0,
        "M": M,
        "T": T,
        "delta_opt": delta,
        "lipschitz_ratio": d / d0 if d0 > 0 else 0.0,
        "residual": d / rhs if rhs > 0 else 0.0,
    }


@dataclass
class ContinuityReport:
    lags: np.ndarray
    increments: np.ndarray
    bounds: np.ndarray
    ratios: np.ndarray

    @property
    def worst(self) -> float:
        return float(self.ratios.max()) if self.ratios.size else 0.0


def _min_bound(lag: float, X: float) -> float:
    d = optimal_delta(lag)
    return (math.sqrt(lag / d) + d**0.25) * X**2 + math.sqrt(lag) * X**3


def continuity_modulus(rec: RunRecord, s: float = 0.25) -> ContinuityReport:
    """``||u(t1) - u(t2)||_{B^s}`` for every sample pair versus the best-delta bound."""
    n = len(rec.times)
    if n < 2:
        raise ValueError("need at least two snapshots")
    X = rec.xts(s)
    lags, incs, bounds = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            lag = float(rec.times[j] - rec.times[i])
            inc = modulation_norm(rec.field_at(j) - rec.field_at(i), s)
            lags.append(lag)
            incs.append(inc)
            bounds.append(_min_bound(lag, X))
    incs, bounds = np.array(incs), np.array(bounds)
    ratios = np.divide(incs, bounds, out=np.zeros_like(incs), where=bounds > 0)
    return ContinuityReport(np.array(lags), incs, bounds, ratios)
