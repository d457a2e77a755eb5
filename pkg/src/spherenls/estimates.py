"""Empirical growth exponents for eigenfunction and bilinear estimates.

Each measurement takes, per degree, the max of a norm ratio over random
unit fields in ``H_k`` and a few structured candidates (the zonal
``Y_k^0`` and the highest harmonic ``Y_k^k``), then fits a log-log slope
over degrees ``k >= 8``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .norms import besov_norm, japanese, modulation_norm, sobolev_norm
from .sphere_basis import (
    SpectralField,
    highest_harmonic,
    make_grid,
    synthesize,
    wallis,
)

__all__ = [
    "ExponentFit",
    "fit_exponent",
    "lp_ratio",
    "random_band_field",
    "measure_sogge",
    "measure_bilinear",
    "bilinear_ratio",
    "restriction_counterexample",
    "restriction_ratio_exact",
    "four_norms",
]

MIN_FIT_DEGREE = 8


@dataclass(frozen=True, eq=False)
class ExponentFit:
    """Least-squares fit ``log y = slope * log x + intercept``.

    ``labels`` names the candidate attaining each ``ys`` entry and
    ``candidates`` keeps the per-candidate ratios for every ``x``.
    """

    xs: np.ndarray
    ys: np.ndarray
    slope: float
    intercept: float
    residual: float
    degrees: np.ndarray | None = None
    labels: list = field(default_factory=list)
    candidates: dict = field(default_factory=dict)

    def candidate_fit(self, name: str, min_degree: int = MIN_FIT_DEGREE) -> "ExponentFit":
        return fit_exponent(self.xs, self.candidates[name], degrees=self.degrees, min_degree=min_degree)

    def to_dict(self) -> dict:
        return {
            "xs": [float(x) for x in self.xs],
            "ys": [float(y) for y in self.ys],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "labels": list(self.labels),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "ratio", "candidate"])
        ks = self.degrees if self.degrees is not None else self.xs
        labels = self.labels or [""] * len(ks)
        for k, y, lab in zip(ks, self.ys, labels):
            w.writerow([int(k) if float(k).is_integer() else repr(float(k)), repr(float(y)), lab])
        return buf.getvalue()


def fit_exponent(xs, ys, degrees=None, min_degree: int = MIN_FIT_DEGREE, **extra) -> ExponentFit:
    """Fit on entries whose degree is at least ``min_degree`` (degree defaults to ``xs``)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    deg = xs if degrees is None else np.asarray(degrees, dtype=float)
    sel = deg >= min_degree
    if sel.sum() < 2:
        raise ValueError(f"need at least two points with degree >= {min_degree}")
    if np.any(xs[sel] <= 0) or np.any(ys[sel] <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(xs[sel]), np.log(ys[sel])
    (slope, intercept), res, *_ = np.polyfit(lx, ly, 1, full=True)
    residual = float(np.sqrt(res[0] / sel.sum())) if res.size else 0.0
    return ExponentFit(xs, ys, float(slope), float(intercept), residual, degrees=None if degrees is None else deg, **extra)


def random_band_field(k: int, rng: np.random.Generator) -> SpectralField:
    """Unit-L² field in ``H_k`` with complex-Gaussian coefficients over ``m``."""
    c = np.zeros((k + 1, 2 * k + 1), dtype=complex)
    c[k] = rng.standard_normal(2 * k + 1) + 1j * rng.standard_normal(2 * k + 1)
    f = SpectralField(k, c)
    return f.scale(1.0 / f.l2_norm())


def _zonal(k: int) -> SpectralField:
    return SpectralField.from_modes(k, {(k, 0): 1.0})


def _pole_values(f: SpectralField) -> np.ndarray:
    # Y_k^m at the poles vanishes unless m = 0, where it is (+-1)^k sqrt((2k+1)/4pi)
    k = np.arange(f.K + 1)
    c0 = f.coeffs[:, f.K] * np.sqrt((2 * k + 1) / (4 * math.pi))
    return np.array([np.sum(c0), np.sum(c0 * (-1.0) ** k)])


def _grid_for(p: float, k: int):
    if p == np.inf:
        return make_grid(max(2 * k, 4))
    if float(p).is_integer() and int(p) % 2 == 0:
        # |f|^p has degree p*k, integrated exactly by the grid for ceil(p*k/4)
        return make_grid(max(math.ceil(p * k / 4), k, 1))
    return make_grid(max(math.ceil(p * k / 4) + 8, k, 4))


def lp_ratio(f: SpectralField, p: float, grid=None) -> float:
    """``||f||_{L^p} / ||f||_{L^2}``; exact for even ``p`` on the default grid."""
    if p < 2:
        raise ValueError("p must be >= 2")
    k = f.K
    grid = _grid_for(p, k) if grid is None else grid
    vals = np.abs(synthesize(f, grid).values)
    if p == np.inf:
        num = max(vals.max(), np.abs(_pole_values(f)).max())
    else:
        num = float(np.real(grid.integrate(vals**p))) ** (1.0 / p)
    return float(num / f.l2_norm())


def measure_sogge(p: float, k_range, trials: int = 64, seed: int = 0, structured: bool = True) -> ExponentFit:
    """Growth of ``sup_{f in H_k} ||f||_{L^p} / ||f||_{L^2}`` in ``k``."""
    if p < 2:
        raise ValueError("p must be >= 2")
    ks = [int(k) for k in k_range]
    cand = {"random": [], "zonal": [], "highest": []}
    best, labels = [], []
    for k in ks:
        rng = np.random.default_rng([seed, k])
        grid = _grid_for(p, k)
        r = max((lp_ratio(random_band_field(k, rng), p, grid) for _ in range(trials)), default=0.0)
        cand["random"].append(r)
        if structured:
            cand["zonal"].append(lp_ratio(_zonal(k), p, grid))
            cand["highest"].append(lp_ratio(highest_harmonic(k), p, grid))
        row = {n: v[-1] for n, v in cand.items() if v}
        name = max(row, key=row.get)
        best.append(row[name])
        labels.append(name)
    cand = {n: np.array(v) for n, v in cand.items() if v}
    return fit_exponent(ks, best, labels=labels, candidates=cand)


def bilinear_ratio(f: SpectralField, g: SpectralField, grid=None) -> float:
    """``||f g||_{L^2} / (||f||_{L^2} ||g||_{L^2})``; exact on the default grid."""
    if grid is None:
        grid = make_grid(max(math.ceil((f.K + g.K) / 2), f.K, g.K, 1))
    prod = synthesize(f, grid).values * synthesize(g, grid).values
    return float(math.sqrt(np.real(grid.integrate(np.abs(prod) ** 2))) / (f.l2_norm() * g.l2_norm()))


def measure_bilinear(k_pairs, trials: int = 16, seed: int = 0, against: str = "min") -> ExponentFit:
    """Growth of ``sup ||f g||_{L^2}`` over unit ``f in H_k1``, ``g in H_k2``.

    The fit abscissa is ``min(<k1>, <k2>)`` (``against="min"``) or
    ``<max(k1, k2)>`` (``against="max"``); the fit uses pairs whose smaller
    degree is at least 8 for ``"min"`` and whose larger is for ``"max"``.
    """
    pairs = [(int(a), int(b)) for a, b in k_pairs]
    best, labels, cand = [], [], {"random": [], "highest": [], "zonal": []}
    for k1, k2 in pairs:
        rng = np.random.default_rng([seed, k1, k2])
        grid = make_grid(max(math.ceil((k1 + k2) / 2), k1, k2, 1))
        r = max(
            (bilinear_ratio(random_band_field(k1, rng), random_band_field(k2, rng), grid) for _ in range(trials)),
            default=0.0,
        )
        row = {
            "random": r,
            "highest": bilinear_ratio(highest_harmonic(k1), highest_harmonic(k2), grid),
            "zonal": bilinear_ratio(_zonal(k1), _zonal(k2), grid),
        }
        for n, v in row.items():
            cand[n].append(v)
        name = max(row, key=row.get)
        best.append(row[name])
        labels.append(name)
    lo = np.array([min(a, b) for a, b in pairs], dtype=float)
    hi = np.array([max(a, b) for a, b in pairs], dtype=float)
    if against == "min":
        xs, deg = japanese(lo), lo
    elif against == "max":
        xs, deg = japanese(hi), hi
    else:
        raise ValueError("against must be 'min' or 'max'")
    return fit_exponent(xs, best, degrees=deg, labels=labels, candidates={n: np.array(v) for n, v in cand.items()})


def restriction_ratio_exact(k: int) -> float:
    """``||w_k||_{L^4} / ||w_k||_{L^2}`` for ``w_k = sin^k(theta) e^{ik phi}`` from Wallis integrals."""
    return (2 * math.pi * wallis(4 * k + 1)) ** 0.25 / math.sqrt(2 * math.pi * wallis(2 * k + 1))


def restriction_counterexample(k_range, check_quadrature: bool = False) -> ExponentFit:
    """L⁴/L² growth of the highest harmonics; optionally cross-checked by quadrature."""
    ks = [int(k) for k in k_range]
    ys = np.array([restriction_ratio_exact(k) for k in ks])
    cand = {"wallis": ys}
    if check_quadrature:
        cand["quadrature"] = np.array([lp_ratio(highest_harmonic(k), 4) for k in ks])
    return fit_exponent(ks, ys, labels=["highest"] * len(ks), candidates=cand)


def four_norms(k: int, s: float = 0.25) -> dict:
    """``B^s``, ``B^s_{2,1}``, ``H^s`` and ``B^s_{2,inf}`` norms of the raw ``w_k``."""
    w = highest_harmonic(k, normalized=False)
    return {
        "modulation": modulation_norm(w, s),
        "besov_2_1": besov_norm(w, s, 2, 1),
        "sobolev": sobolev_norm(w, s),
        "besov_2_inf": besov_norm(w, s, 2, np.inf),
    }
