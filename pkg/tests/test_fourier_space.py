import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kscontrol import fourier_space as fs


def test_from_samples_round_trip(rng):
    f = fs.random_field(rng, 6)
    x = 2 * np.pi * np.arange(32) / 32
    g = fs.PeriodicField.from_samples(f.evaluate(x), 6)
    assert np.allclose(g.coeffs, f.coeffs, atol=1e-13)


def test_pairing_is_l2_inner_product(rng):
    a, b = fs.random_field(rng, 3), fs.random_field(rng, 4)
    re = integrate.quad(lambda x: (a.evaluate(x) * np.conj(b.evaluate(x))).real, 0, 2 * np.pi)[0]
    im = integrate.quad(lambda x: (a.evaluate(x) * np.conj(b.evaluate(x))).imag, 0, 2 * np.pi)[0]
    assert fs.duality_pairing(a, b) == pytest.approx(re + 1j * im, abs=1e-10)


def test_mean_trace_derivative():
    f = fs.PeriodicField.from_dict({0: 2.0, 1: 1j, -1: -1j})
    assert fs.mean(f) == pytest.approx(4 * np.pi)
    assert fs.trace_at_2pi(f) == pytest.approx(f.evaluate(2 * np.pi))
    d = fs.derivative(f)
    assert d[1] == pytest.approx(-1) and d[0] == 0
    assert fs.mean(fs.project_mean_zero(f)) == 0


@pytest.mark.parametrize("s", [1, 2])
def test_dual_norm_weights(s):
    f = fs.PeriodicField.from_dict({2: 1.0})
    assert fs.dual_norm(f, s) == pytest.approx(5.0 ** (-s / 2))
    assert fs.sobolev_norm(f, s) == pytest.approx(5.0 ** (s / 2))


def test_state_json_round_trip(tmp_path, rng):
    st_ = fs.StatePair(fs.random_field(rng, 2), fs.random_field(rng, 4))
    assert st_.kmax == 4
    p = tmp_path / "s.json"
    fs.save_state(st_, p)
    back = fs.load_state(p)
    assert np.array_equal(back.u.coeffs, st_.u.coeffs)
    assert np.array_equal(back.v.coeffs, st_.v.coeffs)


def test_padding_and_errors():
    f = fs.PeriodicField.from_dict({1: 1.0})
    assert f.padded(3)[1] == 1 and f.padded(3)[3] == 0 and f[5] == 0
    with pytest.raises(ValueError):
        f.padded(0)
    with pytest.raises(ValueError):
        fs.PeriodicField(2, np.zeros(3))


@settings(max_examples=40, deadline=None, derandomize=True)
@given(st.integers(min_value=0, max_value=8), st.integers(min_value=0, max_value=2**31))
def test_pairing_hermitian(kmax, seed):
    r = np.random.default_rng(seed)
    a, b = fs.random_field(r, kmax), fs.random_field(r, kmax)
    assert fs.duality_pairing(a, b) == pytest.approx(np.conj(fs.duality_pairing(b, a)))
    assert fs.duality_pairing(a, a).real >= 0
