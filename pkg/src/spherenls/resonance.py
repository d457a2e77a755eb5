"""Interaction phases, the resonant index sets and their structural audits.

For an output degree ``k`` and input degrees ``(k1, k2, k3)`` the phase is
``mu_k^2 - mu_{k1}^2 + mu_{k2}^2 - mu_{k3}^2`` and the triple is resonant
when ``mu_k <= 1/delta`` or ``|mu_k - sqrt(r)| <= 1`` with radicand
``r = mu_{k1}^2 - mu_{k2}^2 + mu_{k3}^2``. A negative radicand never
satisfies the second clause.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .norms import japanese
from .sphere_basis import mu

__all__ = [
    "PhaseQuadruple",
    "ResonanceParams",
    "phase",
    "radicand",
    "in_resonant_set",
    "resonance_mask",
    "weight_kernel",
    "nonresonant_weight",
    "AuditReport",
    "audit_disjointness",
    "audit_nonvanishing_phase",
    "lemma_exponent",
    "convolution_integral",
    "convolution_lemma_check",
    "weight_sum",
]

DEFAULT_EPS = 0.1


@dataclass(frozen=True)
class PhaseQuadruple:
    k: int
    k1: int
    k2: int
    k3: int

    def __post_init__(self):
        if min(self.k, self.k1, self.k2, self.k3) < 0:
            raise ValueError("degrees must be nonnegative")


@dataclass(frozen=True)
class ResonanceParams:
    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def _lam(k):
    # mu_k^2 as an exact integer
    return k * (k + 1)


def phase(q: PhaseQuadruple) -> int:
    return _lam(q.k) - _lam(q.k1) + _lam(q.k2) - _lam(q.k3)


def radicand(q: PhaseQuadruple) -> int:
    return _lam(q.k1) - _lam(q.k2) + _lam(q.k3)


def in_resonant_set(q: PhaseQuadruple, p: ResonanceParams) -> bool:
    mk = mu(q.k)
    if mk <= 1.0 / p.delta:
        return True
    r = radicand(q)
    return r >= 0 and abs(mk - math.sqrt(r)) <= 1.0


def _radicand_grid(K: int) -> np.ndarray:
    lam = np.arange(K + 1) * np.arange(1, K + 2)
    return lam[:, None, None] - lam[None, :, None] + lam[None, None, :]


def resonance_mask(K: int, p: ResonanceParams) -> np.ndarray:
    """Boolean ``mask[k, k1, k2, k3]``: True where the triple lies in the resonant set of ``k``."""
    r = _radicand_grid(K)
    root = np.sqrt(np.where(r >= 0, r, 0).astype(float))
    mk = mu(np.arange(K + 1))
    close = (r >= 0)[None] & (np.abs(mk[:, None, None, None] - root[None]) <= 1.0)
    low = (mk <= 1.0 / p.delta)[:, None, None, None]
    return close | low


def weight_kernel(K: int, eps: float = DEFAULT_EPS, power: float | None = None) -> np.ndarray:
    """``1 / (<mu_k - sqrt(r)> <mu_k>^power)`` on the full index grid (resonance ignored).

    ``power`` defaults to ``eps``. Where the radicand is negative the first
    factor is replaced by ``<mu_k>``.
    """
    if power is None:
        power = eps
    r = _radicand_grid(K)
    root = np.sqrt(np.where(r >= 0, r, 0).astype(float))
    mk = mu(np.arange(K + 1))[:, None, None, None]
    gap = np.where((r >= 0)[None], japanese(mk - root[None]), japanese(mk))
    return 1.0 / (gap * japanese(mk) ** power)


def nonresonant_weight(
    q: PhaseQuadruple, p: ResonanceParams, eps: float = DEFAULT_EPS
) -> float:
    """Kernel ``1 / (<mu_k - sqrt(r)> <mu_k>^eps)`` for a non-resonant quadruple."""
    if in_resonant_set(q, p):
        raise ValueError(f"{q} is resonant for delta={p.delta}")
    mk = mu(q.k)
    r = radicand(q)
    gap = japanese(mk - math.sqrt(r)) if r >= 0 else japanese(mk)
    return float(1.0 / (gap * japanese(mk) ** eps))


@dataclass
class AuditReport:
    """Result of an exhaustive audit; violations are records, never exceptions."""

    kind: str
    K: int
    delta: float
    checked: int = 0
    violations: list = field(default_factory=list)
    out_of_hypothesis: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _record(k, k1, k2, k3, p: ResonanceParams, eps: float) -> dict:
    q = PhaseQuadruple(int(k), int(k1), int(k2), int(k3))
    member = in_resonant_set(q, p)
    return {
        "k": q.k,
        "k1": q.k1,
        "k2": q.k2,
        "k3": q.k3,
        "phase": phase(q),
        "member": member,
        "weight": None if member else nonresonant_weight(q, p, eps),
    }


def audit_disjointness(K: int, p: ResonanceParams, eps: float = DEFAULT_EPS) -> AuditReport:
    """Check that resonant sets of well-separated high degrees never intersect.

    Every pair ``k < k'`` with ``|k - k'| > 2`` and ``min(mu_k, mu_k') > 2/delta``
    is checked against all triples with entries ``<= K``. Pairs failing
    only the separation condition are listed in ``out_of_hypothesis``.
    """
    mask = resonance_mask(K, p)
    mk = mu(np.arange(K + 1))
    report = AuditReport("disjointness", K, p.delta)
    for k in range(K + 1):
        for kp in range(k + 1, K + 1):
            high = min(mk[k], mk[kp]) > 2.0 / p.delta
            if not high:
                continue
            if kp - k <= 2:
                report.out_of_hypothesis.append([k, kp])
                continue
            report.checked += 1
            both = np.argwhere(mask[k] & mask[kp])
            for k1, k2, k3 in both:
                rec = _record(k, k1, k2, k3, p, eps)
                rec["k_prime"] = kp
                report.violations.append(rec)
    return report


def audit_nonvanishing_phase(K: int, p: ResonanceParams, eps: float = DEFAULT_EPS) -> AuditReport:
    """Check that every non-resonant quadruple with entries ``<= K`` has nonzero phase."""
    mask = resonance_mask(K, p)
    lam = np.arange(K + 1) * np.arange(1, K + 2)
    ph = lam[:, None, None, None] - _radicand_grid(K)[None]
    report = AuditReport("nonvanishing_phase", K, p.delta)
    report.checked = int(np.count_nonzero(~mask))
    for idx in np.argwhere(~mask & (ph == 0)):
        report.violations.append(_record(*idx, p, eps))
    return report


def lemma_exponent(alpha: float, beta: float, eps: float) -> float:
    """Decay exponent of the two-bracket convolution integral."""
    if not (0.0 < alpha <= beta and alpha + beta > 1.0 and eps > 0.0):
        raise ValueError("need 0 < alpha <= beta, alpha + beta > 1, eps > 0")
    if beta < 1.0:
        return alpha + beta - 1.0
    if beta == 1.0:
        return alpha - eps
    return alpha


TRUNCATION = 1.0e6


def convolution_integral(a: float, b: float, alpha: float, beta: float, L: float = TRUNCATION) -> float:
    """``int dt / (<t - a>^alpha <t - b>^beta)`` over the real line.

    Quadrature on ``|t - c| <= L`` (``c`` the midpoint of ``a, b``) split at
    the peaks and on a geometric ladder outward, plus the tail estimate
    ``2 int_L^inf t^{-(alpha+beta)} dt``.
    """

    def f(t):
        return japanese(t - a) ** (-alpha) * japanese(t - b) ** (-beta)

    lo, hi = min(a, b), max(a, b)
    c = 0.5 * (a + b)
    pts = [lo, hi]
    # interior ladder between the two peaks
    gap = hi - lo
    if gap > 2.0:
        step = 1.0
        while step < gap / 2.0:
            pts += [lo + step, hi - step]
            step *= 4.0
    # outward ladders
    step = 1.0
    while step < L:
        pts += [hi + step, lo - step]
        step *= 4.0
    pts += [c + L, c - L]
    pts = np.unique(np.clip(pts, c - L, c + L))
    total = 0.0
    for x0, x1 in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(f, x0, x1, limit=200, epsabs=0.0, epsrel=1e-11)
        total += val
    s = alpha + beta
    tail = 2.0 * L ** (1.0 - s) / (s - 1.0)
    return total + tail


def convolution_lemma_check(a: float, b: float, alpha: float, beta: float, eps: float = DEFAULT_EPS) -> float:
    """Ratio of the convolution integral to ``<a - b>^{-gamma}``."""
    gamma = lemma_exponent(alpha, beta, eps)
    return convolution_integral(a, b, alpha, beta) * float(japanese(a - b)) ** gamma


def weight_sum(k1: int, k2: int, k3: int, K: int, p: ResonanceParams, eps: float = DEFAULT_EPS) -> float:
    """``sum_{k <= K, non-resonant} nonresonant_weight(k, k1, k2, k3)`` for a fixed input triple."""
    total = 0.0
    for k in range(K + 1):
        q = PhaseQuadruple(k, k1, k2, k3)
        if not in_resonant_set(q, p):
            total += nonresonant_weight(q, p, eps)
    return total
