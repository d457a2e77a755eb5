import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherenls import homsub as H
from spherenls.evolution import EvolutionConfig, evolve
from spherenls.sphere_basis import GridField, analyze, make_grid, synthesize, wallis

coeffs = st.lists(
    st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False), min_size=1, max_size=9
)


def test_cube_examples():
    assert np.allclose(H.hom_cube(H.HomState([1, 0, 0])).a[:3], [1, 0, 0])
    out = H.hom_cube(H.HomState([0, 1])).a
    assert np.allclose(out, [0, 0, 0, 1])
    out = H.hom_cube(H.HomState([0, 1, 1])).a
    assert np.allclose(out[3:7], [1, 3, 3, 1]) and np.allclose(out[:3], 0)


@settings(max_examples=20, deadline=None)
@given(a=coeffs)
def test_cube_matches_full_sphere(a):
    u = H.HomState(a)
    K3 = 3 * u.K
    g = make_grid(K3)
    f = synthesize(u.to_spectral(K3), g).values
    c = analyze(GridField(g, f**3), K3)
    assert np.max(np.abs(H.HomState.from_spectral(c).a - H.hom_cube(u).a)) < 1e-10


def test_fft_cube_matches_direct(rng):
    a = rng.standard_normal((3, 7)) + 1j * rng.standard_normal((3, 7))
    fast = H._cube_coeffs(a)
    for row, f in zip(a, fast):
        assert np.allclose(f, H.hom_cube(H.HomState(row)).a)


def test_basis_norms_quadrature(rng):
    nu = H.basis_norms(32)
    for k in (0, 1, 7, 32):
        assert nu[k] ** 2 == pytest.approx(2 * math.pi * wallis(2 * k + 1), rel=1e-14)
        g = make_grid(k)
        vals = np.sin(g.theta[:, None]) ** k * np.exp(1j * k * g.phi[None, :])
        assert np.real(g.integrate(np.abs(vals) ** 2)) == pytest.approx(nu[k] ** 2, rel=1e-12)


def test_state_norms(rng):
    u = H.HomState.random(6, rng, h14=0.3)
    assert u.sobolev_norm(0.25) == pytest.approx(0.3)
    assert u.l2_norm() == pytest.approx(u.to_spectral().l2_norm())
    assert np.allclose(H.HomState.from_spectral(u.to_spectral()).a, u.a)


def test_evolve_zero_and_linear(rng):
    z = H.hom_evolve(H.HomState.zeros(4), 0.1, 1e-2)
    assert not np.any(z.a)
    u0 = H.HomState.random(5, rng)
    tr = H.hom_evolve(u0, 0.2, 1e-2, sign=0)
    lam = np.arange(6) * np.arange(1, 7)
    assert np.max(np.abs(tr.a - u0.a[None] * np.exp(-1j * np.outer(tr.times, lam)))) < 1e-13


def test_evolve_rejects_bad_args(rng):
    u0 = H.HomState.random(5, rng)
    with pytest.raises(ValueError):
        H.hom_evolve(u0, 0.1, 1e-2, K_keep=3)
    with pytest.raises(ValueError):
        H.hom_evolve(u0, 0.1, 0.03)


def test_agrees_with_full_sphere_u3(rng):
    u0 = H.HomState.random(8, rng, h14=0.5)
    tr = H.hom_evolve(u0, 0.2, 1e-3)
    rec = evolve(u0.to_spectral(), EvolutionConfig(K=8, dt=1e-3, T=0.2, sample_stride=50, variant="u3"))
    for n, t in enumerate(rec.times):
        m = int(np.argmin(np.abs(tr.times - t)))
        assert np.max(np.abs(H.HomState.from_spectral(rec.field_at(n)).a - tr.a[m])) < 1e-8


def test_duhamel_residual_order(rng):
    u0 = H.HomState.random(5, rng, h14=0.5)
    r = [H.duhamel_residual(H.hom_evolve(u0, 0.1, dt)) for dt in (4e-3, 2e-3)]
    assert r[1] < r[0] / 8


def _mode_traj(k, K, t):
    a = np.zeros((t.size, K + 1), dtype=complex)
    a[:, k] = np.exp(-1j * k * (k + 1) * t)
    return H.HomTrajectory(t, a)


def test_xsb_zero_and_single_mode():
    t = np.linspace(0, 1, 2001)
    assert H.xsb_norm(H.HomTrajectory(t, np.zeros((t.size, 4))), 0.25, 0.5) == 0
    vals = []
    for k in (1, 3, 6):
        n = H.xsb_norm(_mode_traj(k, 6, t), 0.25, 0.51)
        vals.append(n / (H.basis_norms(6)[k] * (1 + k * (k + 1)) ** 0.125))
    assert max(vals) / min(vals) < 1 + 1e-5


def test_xsb_plancherel_at_b0(rng):
    t = np.linspace(0, 1, 1001)
    a = rng.standard_normal((t.size, 4)) + 1j * rng.standard_normal((t.size, 4))
    a *= H.bump(2 * t - 1)[:, None]
    tr = H.HomTrajectory(t, a)
    direct = math.sqrt(np.sum(np.abs(a) ** 2 * H.basis_norms(3) ** 2) * (t[1] - t[0]))
    assert H.xsb_norm(tr, 0.0, 0.0, window=False) == pytest.approx(direct, rel=1e-12)


def test_xsb_refinement_stable():
    vals = []
    for n in (1001, 2001):
        t = np.linspace(0, 1, n)
        vals.append(H.xsb_norm(_mode_traj(4, 4, t), 0.25, 0.51))
    assert vals[1] == pytest.approx(vals[0], rel=1e-2)


def test_xsb_rejects_coarse_grid():
    t = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        H.xsb_norm(_mode_traj(5, 5, t), 0.25, 0.5)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        H.HomTrajectory([0.0, 0.1, 0.3], np.zeros((3, 2)))
    with pytest.raises(ValueError):
        H.HomTrajectory([0.0, 0.1], np.zeros((3, 2)))


def test_cutoff_constant_stable(rng):
    t = np.linspace(-1, 1, 4001)
    a = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    lam = np.arange(5) * np.arange(1, 6)
    tr = H.HomTrajectory(t, H.bump(t)[:, None] * a * np.exp(-1j * np.outer(t, lam)))
    c = [H.cutoff_ratio(tr, T, 0.25, 0.51) for T in (0.1, 0.2, 0.4)]
    assert max(c) / min(c) <= 1.25


def test_bilinear_constant_mode_case():
    t = H._time_grid(20.0)
    f1 = H._windowed(H._single_mode(3, 3, t), t)
    f2 = np.zeros_like(f1)
    f2[:, 0] = 1.0
    lhs = H.bilinear_lhs(f1, f2, t)
    # multiplying by the constant w_0 = 1 leaves the L^2 norm unchanged
    assert lhs == pytest.approx(H.xsb_norm(H.HomTrajectory(t, f1), 0, 0, window=False), rel=1e-9)


def test_bilinear_rejects_hypothesis():
    with pytest.raises(ValueError):
        H.verify_bilinear_xsb(1, 4, 0.375)
    with pytest.raises(ValueError):
        H.verify_trilinear(1, 4, 0.3, 0.5)
    with pytest.raises(ValueError):
        H.verify_trilinear(1, 4, 0.5, 0.7)


def test_bilinear_report_shape():
    rep = H.verify_bilinear_xsb(2, [4, 6], 0.51)
    assert set(rep) >= {"K", "b", "b_prime", "trials", "max_ratio", "ratio_by_K"}
    assert rep["max_ratio"] == max(rep["ratio_by_K"].values())
    assert rep["max_ratio"] == max(
        max(rep["ratio_weight_on_f1_by_K"].values()), max(rep["ratio_weight_on_f2_by_K"].values())
    )


def test_bilinear_sharpness_probe():
    rep = H.verify_bilinear_xsb(2, [8, 16, 32], 0.51, weight=0.15)
    ks = sorted(rep["ratio_by_K"])
    slope = np.polyfit(np.log(ks), np.log([rep["ratio_by_K"][k] for k in ks]), 1)[0]
    assert slope > 0


def test_trilinear_negative_control():
    rep = H.verify_trilinear(1, [4, 8, 16], 0.51, 0.6, weight=0.0)
    r = [rep["ratio_by_K"][k] for k in (4, 8, 16)]
    assert r[0] < r[1] < r[2]


def test_compute_M():
    m64 = H.compute_M(None, 64, 0.5)
    m128 = H.compute_M(None, 128, 0.5)
    assert np.isfinite(m64) and abs(m128 - m64) / m64 < 0.1
    marginal = [H.compute_M(None, m, 0.375) for m in (32, 64, 128)]
    assert marginal[0] < marginal[1] < marginal[2]
    # an explicit grid can only see a subset of the peaks
    assert H.compute_M(np.linspace(0, 200, 41), 16, 0.5) <= H.compute_M(None, 16, 0.5) + 1e-12


def test_compute_M_single_term_bound():
    # each summand is at most 1, so the two nearest roots contribute at most 2
    for m in (5, 12):
        k1 = np.arange(m + 1)
        g = k1 * (k1 + 1) + (m - k1) * (m - k1 + 1)
        for tau in (g.min() + 0.5, g.mean()):
            terms = np.sort((1 + (tau - g) ** 2) ** (-0.5))[::-1]
            assert terms[:2].sum() <= 2


def test_picard_zero():
    tr, rep = H.picard_solve(H.HomState.zeros(4), 0.1, dt=1e-3)
    assert rep["iterations"] == 1 and rep["converged"]
    assert not np.any(tr.a)


def test_picard_contracts_and_matches_rk4(rng):
    u0 = H.HomState.random(8, rng, h14=0.1)
    fixed, rep = H.picard_solve(u0, 0.1, b=0.51, dt=1e-4)
    assert rep["converged"] and rep["contracting"]
    ref = H.hom_evolve(u0, 0.1, 1e-4)
    assert (fixed - ref).sup_sobolev(0.25) < 1e-8


def test_picard_reports_non_contraction():
    u0 = H.HomState.random(3, np.random.default_rng(1), h14=30.0)
    _, rep = H.picard_solve(u0, 0.5, dt=1e-3, max_iter=8)
    assert not rep["converged"]
    assert not rep["contracting"]
