"""Acceptance criteria 1-9; each test records one PASS/FAIL line."""
import time

import numpy as np

from conftest import record
from kscontrol import biortho, cli, entire_functions as ef
from kscontrol import fourier_space as fs
from kscontrol import moment_control as mc
from kscontrol import pde_sim as ps
from kscontrol import spectrum


def _init(u, v, kmax=3):
    return fs.StatePair(fs.PeriodicField.from_dict(u, kmax), fs.PeriodicField.from_dict(v, kmax))


INIT_U = _init({1: 0.5, -1: 0.5, 3: 0.2 - 0.1j, -3: 0.2 + 0.1j, 0: 0.3}, {2: 0.3j, -2: -0.3j})
INITS = {
    "interior_v": _init({2: 0.4, -2: 0.4}, {0: 0.5, 1: 0.2 - 0.1j, -1: 0.2 + 0.1j, 3: 0.1j, -3: -0.1j}),
    "boundary_u": _init({1: 0.3j, -1: -0.3j, 3: 0.1, -3: 0.1}, {0: -0.4, 2: 0.25, -2: 0.25}),
    "boundary_v": _init({1: 0.5, -1: 0.5}, {2: 0.3j, -2: -0.3j, 3: 0.1, -3: 0.1}),
}
BAD = {"interior_u": _init({}, {0: 1.0}), "interior_v": _init({0: 1.0}, {}),
       "boundary_u": _init({0: 1.0}, {}), "boundary_v": _init({}, {0: 1.0})}


def test_criterion_1_spectral_exactness():
    t = time.perf_counter()
    rs, rp = spectrum.vieta_residuals(200)
    lp, lm = spectrum.eigenvalues(1)
    dt = time.perf_counter() - t
    err = max(abs(lp - (-0.86439 + 1.37214j)), abs(lm - (-0.13561 - 1.37214j)))
    ok = max(rs, rp) <= 1e-9 and err <= 1e-4 and dt < 1.0
    record(1, ok, f"vieta {max(rs, rp):.1e}, lambda_1 error {err:.1e}, {dt:.2f} s")
    assert ok


def test_criterion_2_distinctness_and_denominators():
    t = time.perf_counter()
    gap, pair = spectrum.spectral_gap(50)
    du, dvp, dv = spectrum.denominator_check(50)
    dt = time.perf_counter() - t
    ok = min(gap, du, dvp, dv) > 0 and dt < 1.0
    record(2, ok, f"gap {gap:.5f} at {pair}, min|den_u| {du:.4f}, min|den_v| printed {dvp:.4f} "
                  f"derived {dv:.4f}, {dt:.2f} s")
    assert ok


def test_criterion_3_gram_biorthogonality():
    t = time.perf_counter()
    bio = biortho.gram_biorthogonal(biortho.mode_family(1.0, 6), precision="full")
    dt = time.perf_counter() - t
    ok = bio.residual <= 1e-8 and dt < 5.0
    record(3, ok, f"max |int Theta_j e^(-mu_l t) - delta| = {bio.residual:.1e}, "
                  f"log10 cond (scaled) {bio.cond:.1f}, raw {bio.cond_raw:.1f}, {bio.dps} digits, {dt:.2f} s")
    assert ok


def _controlled_run(scenario, init, K_c, window=mc.DEFAULT_WINDOW, precision="terminal"):
    prob = mc.build_problem(scenario, init, T=1.0, K_c=K_c, window=window)
    sig = mc.synthesize(prob, precision=precision)
    tr = ps.evolve_controlled(init, 1.0, scenario, sig, prob.profile, kmax_sim=K_c + 24,
                              dps=min(sig.dps, 200) + 20)
    return prob, sig, ps.terminal_report(tr, K_c)


def test_criterion_4_interior_u_null_control():
    t = time.perf_counter()
    d0 = fs.state_dual_norm(INIT_U)
    _, _, r10 = _controlled_run("interior_u", INIT_U, 10)
    _, _, r14 = _controlled_run("interior_u", INIT_U, 14)
    dt = time.perf_counter() - t
    ok = (r10["enforced"] <= 1e-9 and r10["dual_norm"] <= 1e-6 * d0
          and r14["leaked"] < r10["leaked"] and dt < 60)
    record(4, ok, f"enforced {r10['enforced']:.1e}, terminal/initial {r10['dual_norm'] / d0:.1e}, "
                  f"leak K_c=10 {r10['leaked']:.1e} -> K_c=14 {r14['leaked']:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_4_info_without_window():
    # control on all of [0, T]: enforced modes vanish but nothing damps the leak
    _, _, r = _controlled_run("interior_u", INIT_U, 10, window=1.0)
    print(f"info: window=1 leak {r['leaked']:.3g}, enforced {r['enforced']:.1e}")
    assert r["enforced"] <= 1e-9


def test_criterion_5_remaining_scenarios():
    t = time.perf_counter()
    lines, ok = [], True
    rng = np.random.default_rng(5)
    for scenario, init in INITS.items():
        prob = mc.build_problem(scenario, init, T=1.0, K_c=10)
        sig = mc.synthesize(prob, precision="moments")
        res = mc.moment_residuals(sig, prob)
        term = fs.StatePair(fs.random_field(rng, 3), fs.random_field(rng, 3))
        dual, _, _ = ps.duality_residual(init, term, scenario, sig, 1.0, prob.profile, dps=200)
        tr = ps.evolve_controlled(init, 1.0, scenario, sig, prob.profile, kmax_sim=34, dps=200)
        rep = ps.terminal_report(tr, 10)
        try:
            mc.synthesize(mc.MomentProblem(scenario, 1.0, 2, BAD[scenario]))
            rejected = False
        except mc.CompatibilityError as exc:
            rejected = exc.theorem == mc.THEOREMS[scenario]
        good = (res["max_log10_abs"] <= -8 and dual <= 1e-7 and rejected
                and rep["dual_norm"] <= 1e-6 * fs.state_dual_norm(init))
        ok &= good
        lines.append(f"{scenario}: moment 1e{res['max_log10_abs']:.0f}, duality {dual:.1e}, "
                     f"terminal {rep['dual_norm']:.1e}, wrong mean rejected {rejected}")
    dt = time.perf_counter() - t
    record(5, ok, "; ".join(lines) + f"; {dt:.1f} s")
    assert ok


def test_criterion_6_paley_wiener():
    t = time.perf_counter()
    grid = biortho.pw_grid(2 * np.pi, X=400.0, n=2**16)
    worst_res, worst_mass = 0.0, 1.0
    for k in (0, 1, -1, 2, -2):
        for br in ((0,) if k == 0 else spectrum.BRANCHES):
            r = biortho.theta_from_psi(grid, k, br)
            worst_res = max(worst_res, r["max_normalized"])
            worst_mass = min(worst_mass, r["mass_inside"])
    dt = time.perf_counter() - t
    ok = worst_res <= 1e-2 and worst_mass >= 0.99 and dt < 300
    record(6, ok, f"max normalised residual {worst_res:.1e}, min mass inside {worst_mass:.6f}, {dt:.1f} s")
    assert ok


def test_criterion_7_estimate_suite():
    t = time.perf_counter()
    rep = cli.run_estimates(2 * np.pi)
    bad = [k for k, v in rep["bounds"].items() if not v["holds"]]
    tn = rep["theta_norms"]
    dt = time.perf_counter() - t
    ok = not bad and tn["holds"]
    record(7, ok, f"{len(rep['bounds'])} envelopes, failing {bad or 'none'}, Theta norms "
                  f"C+ {tn['C_plus']:.2e}, C- {tn['C_minus']:.2e} (c- {tn['c_minus']:.2f}), {dt:.1f} s")
    assert ok


def test_criterion_8_auxiliary_inequalities():
    t = time.perf_counter()
    supA, vals = ef.verify_theta_bounded()
    B = [ef.verify_beta_integral(x) for x in (0, 1, -1, 10, -10, 100, -100, 1e4, -1e4)]
    holdsB = all(lo <= I <= hi for I, lo, hi in B)
    suite = ps.energy_suite(n_cases=50, kmax=8, T=1.0, seed=2024)
    dt = time.perf_counter() - t
    ok = (np.isfinite(supA) and holdsB and abs(B[0][0] - 3.40048) <= 1e-4 and suite["all_ineq0"])
    record(8, ok, f"sup|theta| {supA:.3f}, I(0) {B[0][0]:.5f}, Beta bounds hold {holdsB}, "
                  f"energy inequality on 50 trajectories {suite['all_ineq0']} "
                  f"(H2xH1 level {suite['all_ineq1']}, max estimate ratio {suite['max_ratio']:.3f}), {dt:.1f} s")
    assert ok


def test_criterion_9_diophantine():
    rho, C = mc.liouville_constant(1, 2, -1)
    dmin, q = mc.diophantine_scan(rho, 10_000)
    fmin, k = mc.profile_lower_scan(1.0, rho, 10_000)
    ok = dmin >= C and fmin > 0
    record(9, ok, f"C = {C:.5f}, min q dist(q rho, Z) = {dmin:.5f} at q = {q}, "
                  f"min k^2|f_k| = {fmin:.5f} at k = {k} (2C = {2 * C:.5f})")
    assert ok
