import mpmath as mp
import numpy as np
import pytest

from kscontrol import fourier_space as fs
from kscontrol import moment_control as mc

RHO = np.sqrt(2) - 1


def _state(u=None, v=None, kmax=3):
    return fs.StatePair(fs.PeriodicField.from_dict(u or {}, kmax),
                        fs.PeriodicField.from_dict(v or {}, kmax))


@pytest.mark.parametrize("k", [1, -2, 5, 40])
def test_profile_modulus(k):
    fk = mc.profile_fk(1.0, RHO, k)
    assert abs(fk) == pytest.approx(2 * abs(np.sin(k * RHO * np.pi / 2)) / abs(k))
    assert complex(mc.profile_fk_mp(1.0, RHO, k)) == pytest.approx(fk)
    assert mc.profile_fk(1.0, RHO, 0) == pytest.approx(RHO * np.pi)


def test_liouville_constant_sqrt2():
    rho, C = mc.liouville_constant(1, 2, -1)
    assert rho == pytest.approx(RHO)
    assert C == pytest.approx(1 / (2 * (np.sqrt(2) + 1) + 1))
    dmin, q = mc.diophantine_scan(rho, 10_000)
    assert dmin >= C
    kmin, _ = mc.profile_lower_scan(1.0, rho, 10_000)
    assert kmin >= 2 * C


@pytest.mark.parametrize("poly", [(1, -3, 2), (0, 1, 1), (1, 0, 1), (1, 4, 1)])
def test_bad_polynomials(poly):
    with pytest.raises(ValueError):
        mc.liouville_constant(*poly)


def test_profile_must_fit_the_circle():
    with pytest.raises(ValueError):
        mc.Profile(alpha=6.0, rho=RHO)


@pytest.mark.parametrize("scenario,u0,v0", [
    ("interior_u", {}, {0: 1.0}),
    ("interior_v", {0: 1.0}, {}),
    ("boundary_u", {0: 1.0}, {}),
    ("boundary_v", {}, {0: 1.0}),
    ("boundary_v", {0: 1.0}, {}),
])
def test_compatibility_errors(scenario, u0, v0):
    with pytest.raises(mc.CompatibilityError) as info:
        mc.check_compatibility(scenario, _state(u0, v0))
    assert scenario in str(info.value) and info.value.theorem == mc.THEOREMS[scenario]


def test_compatible_means_accepted():
    mc.check_compatibility("interior_u", _state({0: 1.0}, {}))
    mc.check_compatibility("boundary_u", _state({}, {0: 1.0}))


def test_gamma_examples():
    init = _state({1: 1.0})
    assert mc.gamma_targets("interior_u", init, 1, 1) == pytest.approx(2 * np.pi)
    gb = mc.gamma_targets("boundary_u", init, 1, 1)
    assert abs(gb) == pytest.approx(2 * np.pi / 1.62171, rel=1e-5)
    assert mc.gamma_targets("boundary_v", _state({}, {}), 0) == 0


def test_signal_json_and_shift_identity(tmp_path):
    sig = mc.exp_signal(1.0, [0.5 + 1j, -2.0], [1.0, 0.3j], window=0.75, dps=40)
    p = tmp_path / "c.json"
    sig.save(p)
    back = mc.ControlSignal.load(p)
    with mp.workdps(40):
        assert all(abs(a - b) < mp.mpf(10) ** -35 for a, b in zip(back.coeffs, sig.coeffs))
    assert mc.shift_identity_residual(sig, mp.mpc(-1, 2)) < 1e-30
    # zero outside the window
    assert sig.evaluate([0.9])[0] == 0
    assert sig.l2_norm() > 0


def test_moment_closed_form_against_quadrature():
    sig = mc.exp_signal(1.0, [0.5 + 1j], [1.0], window=0.8, dps=30)
    mu = -1.0 + 2.0j
    t = np.linspace(0, 0.8, 20001)
    num = np.trapezoid(np.exp(-mu * t) * sig.evaluate(t), t)
    assert complex(sig.moment(mp.mpc(mu))) == pytest.approx(num, rel=1e-7)


SMALL_INITS = {
    "interior_u": ({1: 0.5, -1: 0.5, 0: 0.2}, {2: 0.3j, -2: -0.3j}),
    "interior_v": ({}, {0: 0.4, 1: 0.2}),
    "boundary_u": ({}, {0: 0.1, 2: 0.3j, -2: -0.3j}),
    "boundary_v": ({1: 0.2}, {2: 0.3j}),
}


@pytest.mark.parametrize("scenario", mc.SCENARIOS)
def test_small_synthesis(scenario):
    prob = mc.build_problem(scenario, _state(*SMALL_INITS[scenario]), T=1.0, K_c=3)
    sig = mc.synthesize(prob)
    res = mc.moment_residuals(sig, prob, K_report=5)
    assert res["max_scaled"] < 1e-15
    assert res["max_terminal"] < 1e-15
    assert sig.labels[0] == (0, 0)


def test_synthesis_rejects_mismatched_family():
    from kscontrol import biortho
    prob = mc.build_problem("boundary_u", _state({}, {1: 1.0}), T=1.0, K_c=2)
    bio = biortho.gram_biorthogonal(biortho.mode_family(1.0, 2))
    with pytest.raises(ValueError):
        mc.synthesize(prob, bio)


def test_default_kc():
    prob = mc.build_problem("boundary_u", _state({}, {3: 1.0}))
    assert prob.K_c == 10
