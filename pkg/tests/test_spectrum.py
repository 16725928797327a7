import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kscontrol import spectrum

LAM1_PLUS = -0.8643929452353856 + 1.372145115699254j
LAM1_MINUS = -0.13560705476461437 - 1.372145115699254j


@pytest.mark.parametrize("k,p,q", [(1, 1 + 0j, 2 + 1j), (2, 16 + 6j, 68 + 8j)])
def test_modal_quadratic(k, p, q):
    assert spectrum.modal_quadratic(k) == pytest.approx((p, q))


def test_first_mode_values():
    lp, lm = spectrum.eigenvalues(1)
    assert abs(lp - LAM1_PLUS) < 1e-12
    assert abs(lm - LAM1_MINUS) < 1e-12
    # second mode, plus branch
    assert abs(spectrum.eigenvalue(2, "plus") - (-4.18821 + 2.24688j)) < 1e-4


def test_theta_and_mu_tilde():
    _, th = spectrum.eta_theta(1, 1)
    assert abs(th - (-2.372145 - 0.864393j)) < 1e-6
    assert abs(spectrum.mu_tilde(1, 1) - (1.114923 + 0.615354j)) < 1e-6
    assert spectrum.mu_tilde(-1, 1) == pytest.approx(-np.conj(spectrum.mu_tilde(1, 1)))


def test_vieta_to_200():
    rs, rp = spectrum.vieta_residuals(200)
    assert max(rs, rp) <= 1e-12


@pytest.mark.parametrize("k", [3, 10, 50, -7, 1000])
def test_branch_asymptotics(k):
    lp, lm = spectrum.eigenvalues(k)
    assert abs(lp - (-k**2 + 1j * k)) < abs(lm - (-k**2 + 1j * k))
    assert abs(lm - (-k**4 - 1j * k**3 + k**2)) / k**4 < 1e-2


@settings(max_examples=60, deadline=None, derandomize=True)
@given(st.integers(min_value=1, max_value=3000))
def test_conjugate_symmetry(k):
    lp, lm = spectrum.eigenvalues(k)
    lpn, lmn = spectrum.eigenvalues(-k)
    assert abs(lpn - np.conj(lp)) <= 1e-12 * abs(lp)
    assert abs(lmn - np.conj(lm)) <= 1e-12 * abs(lm)


def test_zero_mode_and_guards():
    assert spectrum.zero_mode()["lam"] == 0
    with pytest.raises(ValueError):
        spectrum.eigenvalues(0)
    with pytest.raises(OverflowError):
        spectrum.eigenvalues(spectrum.KMAX_GUARD + 1)
    with pytest.raises(ValueError):
        spectrum.parse_branch("sideways")


def test_gap_and_denominators():
    g1, pair = spectrum.spectral_gap(1)
    assert g1 == pytest.approx(0.72879, abs=1e-5)
    assert spectrum.spectral_gap(50)[0] == pytest.approx(g1)
    du, dvp, dv = spectrum.denominator_check(50)
    assert (du, dvp, dv) == pytest.approx((1.3788, 0.9070, 0.5461), abs=1e-4)
    d = spectrum.denominators(1, 1)[0]
    assert abs(d) == pytest.approx(1.62171, abs=1e-5)


def test_mp_eigenvalue_matches_double():
    import mpmath as mp
    with mp.workdps(50):
        for k in (1, -4, 9):
            for b in spectrum.BRANCHES:
                lam = spectrum.eigenvalue_mp(k, b)
                assert abs(complex(lam) - spectrum.eigenvalue(k, b)) < 1e-9 * max(1, abs(lam))
                p, q = spectrum.modal_quadratic(k)
                assert abs(lam**2 + p * lam + q) < mp.mpf(10) ** -40 * abs(q)
