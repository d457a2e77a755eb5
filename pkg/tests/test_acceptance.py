"""Acceptance criteria: one printed PASS/FAIL line per criterion, then the assertion."""
import itertools
import json
import math
import time

import numpy as np
import pytest

from spherenls import cli
from spherenls import estimates as E
from spherenls import homsub as H
from spherenls.evolution import (
    EvolutionConfig,
    apriori_diagnostics,
    cubic_term,
    difference_diagnostics,
    evolve,
    optimal_delta,
)
from spherenls.norms import modulation_norm
from spherenls.resonance import (
    ResonanceParams,
    audit_disjointness,
    audit_nonvanishing_phase,
    convolution_lemma_check,
)
from spherenls.sphere_basis import (
    GridField,
    SpectralField,
    analyze,
    legendre_table,
    make_grid,
    synthesize,
)

# constants fixed once for the whole suite
APRIORI_C = 1.0
LIPSCHITZ_C = 2.0
LEMMA_RATIO_BOUND = 25.0


@pytest.fixture
def report(capsys):
    def emit(tag, title, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {tag} {'PASS' if ok else 'FAIL'} {title}: {detail}")
        return ok

    return emit


def test_c01_transform_fidelity(report):
    t0 = time.perf_counter()
    K = 64
    f = SpectralField.random(K, np.random.default_rng(1))
    err = float(np.max(np.abs(analyze(synthesize(f, make_grid(K)), K).coeffs - f.coeffs)))
    # Gram matrix of all Y_k^m, k <= 32, factorised as longitude DFT times latitude quadrature
    L = 32
    g = make_grid(L)
    P = legendre_table(g, L)
    gram_err = 0.0
    for m in range(-L, L + 1):
        A = P[m + L, abs(m) :, :]
        G = 2 * math.pi * (A * g.weights) @ A.T
        gram_err = max(gram_err, float(np.max(np.abs(G - np.eye(G.shape[0])))))
    dm = np.arange(-2 * L, 2 * L + 1)
    dft = np.exp(1j * np.outer(dm, g.phi)).mean(axis=1)
    lon_err = float(np.max(np.abs(dft - (dm == 0))))
    elapsed = time.perf_counter() - t0
    ok = err < 1e-12 and max(gram_err, lon_err) < 1e-12 and elapsed < 10
    report(
        "C01", "transform fidelity", ok,
        f"roundtrip={err:.2e} gram={gram_err:.2e} longitude={lon_err:.2e} (<1e-12), {elapsed:.2f}s (<10s)",
    )
    assert ok


def _band_field(K, k, rng):
    c = np.zeros((K + 1, 2 * K + 1), dtype=complex)
    c[k, K - k : K + k + 1] = rng.standard_normal(2 * k + 1) + 1j * rng.standard_normal(2 * k + 1)
    return SpectralField(K, c)


def test_c02_degree_constraint(report):
    K = 24
    grid = make_grid(K)
    rng = np.random.default_rng(2)
    vals = [synthesize(_band_field(K, k, rng), grid).values for k in range(9)]
    worst = 0.0
    for k1, k2, k3 in itertools.product(range(9), repeat=3):
        out = analyze(GridField(grid, vals[k1] * np.conj(vals[k2]) * vals[k3]), K).band_norms()
        worst = max(worst, float(np.max(out[k1 + k2 + k3 + 1 :], initial=0.0)))
    for k in range(9):
        out = cubic_term(_band_field(K, k, rng), grid).band_norms()
        worst = max(worst, float(np.max(out[3 * k + 1 :], initial=0.0)))
    ok = worst < 1e-12
    report("C02", "degree-constraint law", ok, f"max leakage above k1+k2+k3 = {worst:.2e} (<1e-12) over 729 triples")
    assert ok


def test_c03_resonance_audits(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for delta in (0.1, 0.5, 0.9):
        p = ResonanceParams(delta)
        d, n = audit_disjointness(32, p), audit_nonvanishing_phase(32, p)
        ok &= d.ok and n.ok
        lines.append(f"delta={delta}: {len(d.violations)}+{len(n.violations)} violations")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    report("C03", "resonance audits K=32", ok, "; ".join(lines) + f", {elapsed:.1f}s (<300s)")
    assert ok


def _final_coeffs(K, amp, T, dt):
    u = SpectralField.random(K, np.random.default_rng(0))
    cfg = EvolutionConfig(K=K, dt=dt, T=T, sample_stride=10**6)
    return evolve(u.scale(amp / u.l2_norm()), cfg).snapshots[-1]


def test_c04_conservation_and_order(report):
    u0 = SpectralField.random(32, np.random.default_rng(4), decay=1.0)
    u0 = u0.scale(1.0 / modulation_norm(u0, 0.25))
    rec = evolve(u0, EvolutionConfig(K=32, dt=1e-3, T=1.0, sample_stride=100))
    dm = float(np.max(np.abs(rec.mass - rec.mass[0])) / rec.mass[0])
    de = float(np.max(np.abs(rec.energy - rec.energy[0])) / abs(rec.energy[0]))
    ends = [_final_coeffs(8, 2.0, 0.5, dt) for dt in (0.005, 0.0025, 0.00125)]
    e = [np.max(np.abs(ends[0] - ends[1])), np.max(np.abs(ends[1] - ends[2]))]
    ratio = float(e[0] / e[1])
    ok = dm < 1e-8 and de < 1e-6 and 12 <= ratio <= 20
    report(
        "C04", "conservation and order", ok,
        f"mass drift={dm:.1e} (<1e-8) energy drift={de:.1e} (<1e-6) K=32 T=1 dt=1e-3; "
        f"dt-halving error ratio={ratio:.2f} in [12, 20] (K=8)",
    )
    assert ok


def _data(K, seed, amp):
    u = SpectralField.random(K, np.random.default_rng(seed), decay=1.0)
    return u.scale(amp / modulation_norm(u, 0.25))


def test_c05_apriori_residual(report):
    T = 0.5
    delta = optimal_delta(T)
    R = []
    for seed in range(20):
        amp = np.random.default_rng([seed, 5]).uniform(0.1, 1.0)
        rec = evolve(_data(16, seed, amp), EvolutionConfig(K=16, dt=1e-3, T=T, delta=delta, sample_stride=10))
        d = apriori_diagnostics(rec, ResonanceParams(delta))
        R.append(d["residual_opt"] / APRIORI_C)
    ok = APRIORI_C <= 10 and max(R) <= 1
    report("C05", "a priori bound residual", ok, f"max R={max(R):.3f} (<=1) with C={APRIORI_C} (<=10), 20 seeds, delta={delta:.3f}")
    assert ok


def test_c06_lipschitz(report):
    ratios = []
    cfg = EvolutionConfig(K=16, dt=1e-3, T=0.25, sample_stride=10)
    for seed in range(20):
        rng = np.random.default_rng([seed, 6])
        u0 = _data(16, seed, rng.uniform(0.1, 1.0))
        w = _data(16, 1000 + seed, rng.uniform(0.01, 0.5))
        ratios.append(difference_diagnostics(evolve(u0, cfg), evolve(u0 + w, cfg))["lipschitz_ratio"])
    ok = max(ratios) <= LIPSCHITZ_C
    report("C06", "Lipschitz dependence", ok, f"max ratio={max(ratios):.4f} (<= C'={LIPSCHITZ_C}), min={min(ratios):.4f}, 20 pairs")
    assert ok


KS = [8, 11, 16, 23, 32, 45, 64]


def test_c07_sogge(report):
    p6 = E.measure_sogge(6, KS, trials=16)
    pinf = E.measure_sogge(np.inf, KS, trials=4)
    zonal = pinf.candidate_fit("zonal").slope
    ok = abs(p6.slope - 1 / 6) <= 0.05 and abs(zonal - 0.5) <= 0.05
    report("C07", "eigenfunction L^p exponents", ok, f"p=6 slope={p6.slope:.4f} (1/6+-0.05), p=inf zonal slope={zonal:.4f} (1/2+-0.05)")
    assert ok


def test_c08_bilinear(report):
    diag = E.measure_bilinear([(k, k) for k in KS], trials=8)
    flat = E.measure_bilinear([(4, k) for k in KS], trials=8, against="max")
    ok = diag.slope <= 0.30 and flat.slope <= 0.05
    report("C08", "bilinear eigenfunction bound", ok, f"slope vs min={diag.slope:.4f} (<=0.30), slope in larger index={flat.slope:.4f} (<=0.05)")
    assert ok


def test_c09_highest_harmonic_family(report):
    vals = np.array([list(E.four_norms(k).values()) for k in range(4, 65)])
    band = float(vals.max() / vals.min())
    fit = E.restriction_counterexample(KS)
    ok = band <= 2 and abs(fit.slope - 1 / 8) <= 0.03
    report("C09", "highest-harmonic family", ok, f"four-norm band={band:.3f} (<=2), L4/L2 exponent={fit.slope:.4f} (1/8+-0.03)")
    assert ok


def test_c10_homogeneous_subsystem(report):
    cube_err = 0.0
    rng = np.random.default_rng(10)
    for K in range(0, 9):
        u = H.HomState(rng.standard_normal(K + 1) + 1j * rng.standard_normal(K + 1))
        g = make_grid(3 * K)
        f = synthesize(u.to_spectral(3 * K), g).values
        c = analyze(GridField(g, f**3), 3 * K)
        cube_err = max(cube_err, float(np.max(np.abs(H.HomState.from_spectral(c).a - H.hom_cube(u).a))))
    u0 = H.HomState.random(8, np.random.default_rng(11), h14=0.1)
    fixed, rep = H.picard_solve(u0, 0.1, b=0.51, dt=1e-4)
    disc = (fixed - H.hom_evolve(u0, 0.1, 1e-4)).sup_sobolev(0.25)
    worst_ratio = max(rep["ratios"][1:], default=0.0)
    ok = cube_err < 1e-10 and rep["contracting"] and rep["converged"] and disc < 1e-8
    report(
        "C10", "homogeneous subsystem", ok,
        f"cube vs sphere={cube_err:.1e} (<1e-10); Picard ratios after it. 2 <= {worst_ratio:.2e} (<=1/2), "
        f"{rep['iterations']} iterations; fixed point vs RK4={disc:.1e} (<1e-8)",
    )
    assert ok


def test_c11_xsb_lemmas(report):
    bil = H.verify_bilinear_xsb(4, [16, 32], 0.51, seed=11)
    tri = H.verify_trilinear(2, [16, 32], 0.51, 0.6, seed=11)
    gb = bil["ratio_by_K"][32] / bil["ratio_by_K"][16] - 1
    gt = tri["ratio_by_K"][32] / tri["ratio_by_K"][16] - 1
    m64, m128 = H.compute_M(None, 64, 0.5), H.compute_M(None, 128, 0.5)
    dM = abs(m128 - m64) / m64
    grid = [(0.75, 0.75), (0.6, 1.2), (1.0, 1.0), (0.5, 0.7), (0.9, 2.0), (1.0, 1.5)]
    lemma = max(convolution_lemma_check(0.0, d, a, b) for a, b in grid for d in (0, 1, 10, 100, 1e3, 1e4))
    ok = gb < 0.25 and gt < 0.25 and dM < 0.10 and lemma <= LEMMA_RATIO_BOUND
    report(
        "C11", "X^{s,b} lemmas", ok,
        f"bilinear growth 16->32={gb:+.2%}, trilinear={gt:+.2%} (<25%); M change 64->128={dM:.2%} (<10%); "
        f"convolution ratio max={lemma:.2f} (<={LEMMA_RATIO_BOUND})",
    )
    assert ok


EXPERIMENTS = [
    ["evolve", "--K", "8", "--dt", "1e-2", "--T", "0.2", "--seed", "7"],
    ["homsub", "--verify-K", "4,6", "--trials", "2", "--m-max", "16", "--seed", "3"],
    ["picard", "--K", "6", "--T", "0.05", "--dt", "1e-3", "--seed", "5"],
    ["verify-estimates", "--k", "4,8,12", "--trials", "3", "--seed", "9"],
    ["resonance-audit", "--K", "12", "--delta", "0.3"],
    ["instability", "--k", "4,8", "--T", "0.05"],
]


def test_c12_determinism(tmp_path, report):
    same = []
    for args in EXPERIMENTS:
        outs = []
        for rep in ("a", "b"):
            assert cli.main([*args, "--out", str(tmp_path / rep)]) == 0
            outs.append((tmp_path / rep / f"{args[0]}.results.json").read_bytes())
        json.loads(outs[0])
        same.append(outs[0] == outs[1])
    ok = all(same)
    report("C12", "determinism", ok, f"{sum(same)}/{len(same)} seeded experiments byte-identical on re-run")
    assert ok
