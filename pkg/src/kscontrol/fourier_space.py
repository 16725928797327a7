"""Band-limited periodic fields on [0, 2 pi] stored by Fourier coefficients.

Convention: f(x) = sum_k c_k e^{ikx} with c_k = (1/2pi) int_0^{2pi} f e^{-ikx} dx.
Duals are handled through the L^2 pivot, so (H^s)* carries the weights
(1 + k^2)^(-s).
"""
import json
from dataclasses import dataclass

import numpy as np


@dataclass
class PeriodicField:
    kmax: int
    coeffs: np.ndarray  # index j <-> mode k = j - kmax

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * self.kmax + 1,):
            raise ValueError("coeffs must have length 2*kmax+1")

    @classmethod
    def zeros(cls, kmax):
        return cls(kmax, np.zeros(2 * kmax + 1, dtype=complex))

    @classmethod
    def from_dict(cls, modes, kmax=None):
        if kmax is None:
            kmax = max([abs(int(k)) for k in modes] + [0])
        f = cls.zeros(kmax)
        for k, c in modes.items():
            f[int(k)] = c
        return f

    @property
    def ks(self):
        return np.arange(-self.kmax, self.kmax + 1)

    def __getitem__(self, k):
        if abs(k) > self.kmax:
            return 0j
        return self.coeffs[k + self.kmax]

    def __setitem__(self, k, value):
        self.coeffs[k + self.kmax] = value

    def __add__(self, other):
        K = max(self.kmax, other.kmax)
        return PeriodicField(K, self.padded(K).coeffs + other.padded(K).coeffs)

    def __mul__(self, s):
        return PeriodicField(self.kmax, self.coeffs * s)

    __rmul__ = __mul__

    def padded(self, kmax):
        if kmax < self.kmax:
            raise ValueError("cannot pad to a smaller kmax")
        out = np.zeros(2 * kmax + 1, dtype=complex)
        out[kmax - self.kmax:kmax + self.kmax + 1] = self.coeffs
        return PeriodicField(kmax, out)

    def is_real(self, tol=1e-12):
        return bool(np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), atol=tol, rtol=0))

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * np.multiply.outer(x, self.ks)) @ self.coeffs

    @classmethod
    def from_samples(cls, values, kmax):
        """Coefficients of a band-limited function from n >= 2 kmax + 1 uniform samples."""
        values = np.asarray(values, dtype=complex)
        n = values.size
        if n < 2 * kmax + 1:
            raise ValueError("not enough samples for the requested kmax")
        c = np.fft.fft(values) / n
        ks = np.arange(-kmax, kmax + 1)
        return cls(kmax, c[ks % n])

    def to_list(self):
        return [[int(k), float(c.real), float(c.imag)] for k, c in zip(self.ks, self.coeffs)]

    @classmethod
    def from_list(cls, rows, kmax=None):
        return cls.from_dict({int(r[0]): complex(r[1], r[2]) for r in rows}, kmax)


@dataclass
class StatePair:
    u: PeriodicField
    v: PeriodicField

    def __post_init__(self):
        K = max(self.u.kmax, self.v.kmax)
        self.u = self.u.padded(K)
        self.v = self.v.padded(K)

    @property
    def kmax(self):
        return self.u.kmax

    @classmethod
    def zeros(cls, kmax):
        return cls(PeriodicField.zeros(kmax), PeriodicField.zeros(kmax))

    def __add__(self, other):
        return StatePair(self.u + other.u, self.v + other.v)

    def __mul__(self, s):
        return StatePair(self.u * s, self.v * s)

    __rmul__ = __mul__

    def padded(self, kmax):
        return StatePair(self.u.padded(kmax), self.v.padded(kmax))

    def to_json(self):
        return {"kmax": self.kmax, "u": self.u.to_list(), "v": self.v.to_list()}

    @classmethod
    def from_json(cls, data):
        K = int(data.get("kmax", 0))
        return cls(PeriodicField.from_list(data["u"], K), PeriodicField.from_list(data["v"], K))


def sobolev_norm(f, s):
    """(sum_k (1 + k^2)^s |c_k|^2)^(1/2)."""
    w = (1.0 + f.ks.astype(float) ** 2) ** s
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def dual_norm(f, s):
    """Norm of f in (H^s)*, i.e. the H^(-s) sequence norm."""
    return sobolev_norm(f, -s)


def state_dual_norm(state):
    """||u||_{(H^2)*} + ||v||_{(H^1)*}."""
    return dual_norm(state.u, 2) + dual_norm(state.v, 1)


def duality_pairing(w, phi):
    """<w, phi> = 2 pi sum_k c_k(w) conj(c_k(phi)); equals int w conj(phi) on L^2."""
    K = max(w.kmax, phi.kmax)
    return complex(2 * np.pi * np.sum(w.padded(K).coeffs * np.conj(phi.padded(K).coeffs)))


def state_pairing(a, b):
    return duality_pairing(a.u, b.u) + duality_pairing(a.v, b.v)


def mean(f):
    """<f, 1> = 2 pi c_0."""
    return complex(2 * np.pi * f[0])


def project_mean_zero(f):
    g = PeriodicField(f.kmax, f.coeffs.copy())
    g[0] = 0
    return g


def trace_at_2pi(f):
    """Value at x = 2 pi (= x = 0) of the band-limited function."""
    return complex(np.sum(f.coeffs))


def derivative(f, order=1):
    return PeriodicField(f.kmax, (1j * f.ks) ** order * f.coeffs)


def random_field(rng, kmax, scale=1.0, decay=0.0):
    ks = np.arange(-kmax, kmax + 1)
    c = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) * scale
    return PeriodicField(kmax, c / (1.0 + ks.astype(float) ** 2) ** (decay / 2))


def load_state(path):
    with open(path) as fh:
        return StatePair.from_json(json.load(fh))


def save_state(state, path):
    with open(path, "w") as fh:
        json.dump(state.to_json(), fh, indent=1, sort_keys=True)
