"""Canonical product, sine-type factors, multipliers and interpolating functions.

All products are carried as complex logarithms (log|.| + i arg) because the
magnitudes involved overflow doubles quickly.  Truncated products are
completed by analytic tails: a truncated product is a polynomial and would
otherwise lose the growth/decay that defines its exponential type.

Exponents mu = conj(lam) and the zeros of P are the points -i mu.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import spectrum
from ._kernels import log_factor_sum

SQ2 = np.sqrt(2.0)
B1 = SQ2
B2 = 4.0 - 2.0 * SQ2  # b2 * pi * cot(pi/8) = 2 sqrt(2) pi
TAIL_RATIO = 0.5  # series tails are used only while |z * c_{N+1}| stays below this


# ---------------------------------------------------------------- nodes

@lru_cache(maxsize=32)
def _mu_arrays(n):
    ks = np.array([k for k in range(-n, n + 1) if k != 0])
    lp, lm = spectrum.eigenvalues_array(ks)
    return ks, np.conj(lp), np.conj(lm)


@dataclass
class NodeSet:
    """Exponents mu_k^{+-} for 0 < |k| <= kmax_nodes together with mu_0 = 0."""
    kmax_nodes: int
    T: float = 2 * np.pi
    ks: np.ndarray = field(init=False, repr=False)
    mu_plus: np.ndarray = field(init=False, repr=False)
    mu_minus: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.ks, self.mu_plus, self.mu_minus = _mu_arrays(self.kmax_nodes)

    def mu(self, k, branch):
        if k == 0:
            return 0j
        j = int(np.searchsorted(self.ks, k))
        return complex(self.mu_plus[j] if spectrum.parse_branch(branch) > 0 else self.mu_minus[j])

    def zero(self, k, branch):
        """The zero -i mu of P belonging to (k, branch)."""
        return -1j * self.mu(k, branch)


def node_point(k, branch=1):
    if k == 0:
        return 0j
    return -1j * np.conj(spectrum.eigenvalue(k, branch))


@dataclass
class TruncationPolicy:
    N_P: int = 64
    N_M: int = 2000
    K_long: int = 4096
    tail_bound_report: float = 0.0


def _mu_continuous(k, branch):
    """mu for real (non-integer) k, same branch rule; used for tail integrals."""
    k = np.asarray(k, dtype=float)
    r1, r2 = spectrum._roots(k)
    ap = -k**2 + 1j * k
    am = -k**4 - 1j * k**3 + k**2
    swap = np.abs(r2 - ap) + np.abs(r1 - am) < np.abs(r1 - ap) + np.abs(r2 - am)
    lp = np.where(swap, r2, r1)
    lm = np.where(swap, r1, r2)
    return np.conj(lp if branch > 0 else lm)


@lru_cache(maxsize=64)
def _P_tail_sums(N, K_long, jmax):
    """S_j = sum_{|k| > N} c_k^j with c_k = i / mu_k, both branches, j = 1..jmax."""
    ks = np.array([k for k in range(-K_long, K_long + 1) if abs(k) > N])
    out = np.zeros(jmax, dtype=complex)
    if ks.size:
        lp, lm = spectrum.eigenvalues_array(ks)
        c = np.concatenate([1j / np.conj(lp), 1j / np.conj(lm)])
        p = np.ones_like(c)
        for j in range(jmax):
            p = p * c
            out[j] = p.sum()
    K0 = max(N, K_long)
    # remainder beyond K0 for j = 1, 2: Euler-Maclaurin on the k-pair sums
    for j in (1, 2):
        if j > jmax:
            break
        def pair(k, j=j):
            tot = 0j
            for br in (1, -1):
                m = _mu_continuous(k, br)
                tot += (1j / m) ** j + (1j / np.conj(m)) ** j
            return tot
        re = integrate.quad(lambda k: pair(k).real, K0, np.inf, limit=200, epsabs=0, epsrel=1e-12)[0]
        im = integrate.quad(lambda k: pair(k).imag, K0, np.inf, limit=200, epsabs=0, epsrel=1e-12)[0]
        h = 1e-3 * K0
        dpair = (pair(K0 + h) - pair(K0 - h)) / (2 * h)
        out[j - 1] += re + 1j * im - pair(K0) / 2 - dpair / 12
    return out


def _P_needed_N(zmax, N_P):
    # |c_{N+1}| ~ 1/(N+1)^2 on the plus branch
    need = int(np.ceil(np.sqrt(zmax / TAIL_RATIO))) + 1
    return max(N_P, need)


def _series_order(ratio, tol=1e-18):
    if ratio <= 0:
        return 1
    return int(np.clip(np.ceil(np.log(tol) / np.log(ratio)), 2, 200))


def log_P(z, pol=None, exclude=None, with_tail=True):
    """Complex log of the canonical product P(z) = z prod (1 + z/(i mu_k^+))(1 + z/(i mu_k^-)).

    exclude: None, 0 (drop the leading z) or (k, branch) (drop that factor);
    dropping factors evaluates the removable-singularity quotients used for
    P' at a node and for Psi.  Returns (log value, zero flag array).
    """
    pol = pol or TruncationPolicy()
    z = np.asarray(z, dtype=complex)
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    N = _P_needed_N(zmax, pol.N_P)
    ks, mp_, mm_ = _mu_arrays(N)
    cp = 1j / mp_
    cm = 1j / mm_
    keep_p = np.ones(ks.size, bool)
    keep_m = np.ones(ks.size, bool)
    lead = exclude != 0
    if exclude not in (None, 0):
        k, br = exclude
        j = int(np.searchsorted(ks, k))
        (keep_p if spectrum.parse_branch(br) > 0 else keep_m)[j] = False
    # factor 1 + z/(i mu) = 1 - z * (i/mu)
    c = np.concatenate([cp[keep_p], cm[keep_m]])
    zf = z.ravel()
    zero = np.zeros(zf.shape, bool)
    # exact zeros
    fac = 1.0 - np.multiply.outer(zf, c) if zf.size * c.size < 4_000_000 else None
    if fac is not None:
        zero |= np.any(np.abs(fac) < 1e-14, axis=1)
    out = log_factor_sum(zf, c)
    if lead:
        with np.errstate(divide="ignore"):
            out = out + np.log(zf)
        zero |= zf == 0
    if with_tail:
        ratio = zmax / (N + 1) ** 2
        J = _series_order(ratio)
        S = _P_tail_sums(N, max(pol.K_long, N), J)
        tail = np.zeros(zf.shape, dtype=complex)
        zp = np.ones_like(zf)
        for j in range(1, J + 1):
            zp = zp * zf
            tail -= zp * S[j - 1] / j
        out = out + tail
    out = np.where(zero, -np.inf + 0j, out)
    return out.reshape(z.shape), zero.reshape(z.shape)


def canonical_P(z, pol=None):
    """(value, log|P|, zero flag) of the canonical product at z."""
    lg, zero = log_P(z, pol)
    val = np.where(zero, 0j, np.exp(lg))
    return val, lg.real, zero


def P_tail_bound(z, pol=None):
    """First-order size of the neglected factors beyond N_P (reported, not used)."""
    pol = pol or TruncationPolicy()
    z = np.abs(np.asarray(z, dtype=complex))
    N = pol.N_P
    return 2 * z / N + 2 * z / (3 * N**3)


def P_prime_at_node(k, branch=1, pol=None):
    """Complex log of P'(-i mu_k^{+-}) (P'(0) = the product without its leading z)."""
    if k == 0:
        lg, _ = log_P(np.array([0j]), pol, exclude=0)
        return complex(lg[0])
    branch = spectrum.parse_branch(branch)
    zk = node_point(k, branch)
    mu = np.conj(spectrum.eigenvalue(k, branch))
    lg, _ = log_P(np.array([zk]), pol, exclude=(k, branch))
    return complex(lg[0] - np.log(1j * mu))


# ---------------------------------------------------------- sine factors

def sine_factor(z, which, N):
    """Q1(z) = z prod (1 - z/mut_k^+) or R1(z) = z prod (1 - z/mut_k^-), 0 < |k| <= N."""
    ks = [k for k in range(-N, N + 1) if k != 0]
    br = 1 if which.upper() == "Q1" else -1
    mt = np.array([spectrum.mu_tilde(k, br) for k in ks])
    z = np.asarray(z, dtype=complex)
    return np.exp(log_factor_sum(z.ravel(), 1 / mt)).reshape(z.shape) * z


def _plain_product(z, c, lead):
    z = np.asarray(z, dtype=complex)
    return z**lead * np.exp(log_factor_sum(z.ravel(), c)).reshape(z.shape)


def Q2(z, N):
    _, mp_, _ = _mu_arrays(N)
    return _plain_product(np.asarray(z, complex) ** 2, -1 / mp_, 1)


def R2(z, N):
    _, _, mm_ = _mu_arrays(N)
    return _plain_product(np.asarray(z, complex) ** 4, -1 / mm_, 1)


def P1(z, N):
    _, mp_, _ = _mu_arrays(N)
    return _plain_product(z, -1 / (1j * mp_), 1)


def P2(z, N):
    _, _, mm_ = _mu_arrays(N)
    return _plain_product(z, -1 / (1j * mm_), 1)


def identity_residuals(z, N=20):
    """Relative residuals of the four product identities at z (equal truncation)."""
    z = complex(z)
    q1 = sine_factor(np.array([z, -z]), "Q1", N)
    r1 = sine_factor(np.array([z, -z, 1j * z, -1j * z]), "R1", N)
    rel = lambda a, b: abs(a - b) / max(abs(b), 1e-300)
    w2 = np.exp(-1j * np.pi / 4) * np.sqrt(z)
    w4 = np.exp(-1j * np.pi / 8) * z**0.25
    return {
        "Q2=-Q1(z)Q1(-z)": rel(-q1[0] * q1[1], Q2(z, N)),
        "P1=iQ2(e^{-i pi/4} sqrt z)": rel(1j * Q2(w2, N), P1(z, N)),
        "R2=-R1(z)R1(-z)R1(iz)R1(-iz)": rel(-np.prod(r1), R2(z, N)),
        "P2=iR2(e^{-i pi/8} z^(1/4))": rel(1j * R2(w4, N), P2(z, N)),
    }


# ------------------------------------------------------------ multipliers

@dataclass
class MultiplierSpec:
    which: str
    T: float
    a: float
    b: float
    gamma: float
    B: float
    taus: np.ndarray

    def s(self, t):
        return self.a * t - self.b * np.asarray(t, dtype=float) ** self.gamma

    def ds(self, t):
        return self.a - self.b * self.gamma * np.asarray(t, dtype=float) ** (self.gamma - 1)


def build_multiplier(T, which, N_M=2000):
    """Jump points tau_n (s(tau_n) = n) of the atomised counting function of M1 or M2."""
    if T <= 0:
        raise ValueError("T must be positive")
    which = which.upper()
    a = T / (4 * np.pi)
    if which == "M1":
        b, g = B1, 0.5
    elif which == "M2":
        b, g = B2, 0.25
    else:
        raise ValueError("which must be M1 or M2")
    B = (b / a) ** (1 / (1 - g))
    n = np.arange(1, N_M + 1, dtype=float)
    # s is convex and increasing beyond B: fixed-point start, Newton polish
    t = n / a + B
    for _ in range(60):
        t = (n + b * t**g) / a
    for _ in range(8):
        t = t - (a * t - b * t**g - n) / (a - b * g * t ** (g - 1))
    if not np.all(np.isfinite(t)):
        raise OverflowError("jump points overflow; reduce N_M")
    taus = t
    return MultiplierSpec(which, T, a, b, g, B, taus)


def _multiplier_tail_sums(spec, J):
    """U_j = sum_{n > N} tau_n^(-2j) via the continuous counting measure plus end corrections."""
    tN = spec.taus[-1]
    a, b, g = spec.a, spec.b, spec.gamma
    U = np.zeros(J)
    for j in range(1, J + 1):
        integral = a * tN ** (1 - 2 * j) / (2 * j - 1) - b * g * tN ** (g - 2 * j) / (2 * j - g)
        F = tN ** (-2 * j)
        dF = -2 * j * tN ** (-2 * j - 1) / spec.ds(tN)
        U[j - 1] = integral - F / 2 - dF / 12
    return U


def log_multiplier(z, spec, with_tail=True):
    """Complex log of prod_n (1 - (z - i)^2 / tau_n^2), tail beyond tau_N included."""
    z = np.asarray(z, dtype=complex)
    w2 = (z - 1j) ** 2
    out = log_factor_sum(w2.ravel(), 1.0 / spec.taus**2 + 0j).reshape(z.shape)
    if with_tail:
        wmax = float(np.sqrt(np.max(np.abs(w2)))) if z.size else 0.0
        ratio = (wmax / spec.taus[-1]) ** 2
        if ratio > TAIL_RATIO:
            raise ValueError(
                f"|z| ~ {wmax:.3g} too large for N_M = {spec.taus.size}; use multiplier_for()")
        J = _series_order(ratio)
        U = _multiplier_tail_sums(spec, J)
        tail = np.zeros(z.shape, dtype=complex)
        p = np.ones_like(w2)
        for j in range(1, J + 1):
            p = p * w2
            tail -= p * U[j - 1] / j
        out = out + tail
    return out


def multiplier_for(T, which, zmax, N_M=2000):
    """Multiplier spec whose tail series is valid for |z| <= zmax."""
    a = T / (4 * np.pi)
    need = int(np.ceil(a * (zmax + 1) / np.sqrt(TAIL_RATIO) * 1.1)) + 10
    return build_multiplier(T, which, max(N_M, need))


def eval_multiplier(z, spec):
    return np.exp(log_multiplier(z, spec))


def log_M(z, specs):
    return sum(log_multiplier(z, s) for s in specs)


# -------------------------------------------------------------------- Psi

def log_psi(z, k, branch, specs, pol=None):
    """Complex log of Psi_k^{+-}(z) (k = 0 gives Psi_0)."""
    z = np.asarray(z, dtype=complex)
    if k == 0:
        zk = 0j
        num, _ = log_P(z, pol, exclude=0)
        den, _ = log_P(np.array([zk]), pol, exclude=0)
    else:
        branch = spectrum.parse_branch(branch)
        zk = node_point(k, branch)
        num, _ = log_P(z, pol, exclude=(k, branch))
        den, _ = log_P(np.array([zk]), pol, exclude=(k, branch))
    mz = log_M(z, specs)
    mk = log_M(np.array([zk]), specs)
    return num - den[0] + mz - mk[0]


def psi(z, k, branch, specs, pol=None):
    return np.exp(log_psi(z, k, branch, specs, pol))


def default_specs(T, zmax=1000.0):
    return [multiplier_for(T, "M1", zmax), multiplier_for(T, "M2", zmax)]


def interpolation_residual(k, branch, specs, lmax=6, pol=None):
    """max |Psi_k(-i mu_l) - delta| over all nodes with |l| <= lmax."""
    pts, want = [0j], [1.0 if k == 0 else 0.0]
    for l in range(-lmax, lmax + 1):
        if l == 0:
            continue
        for br in spectrum.BRANCHES:
            pts.append(node_point(l, br))
            want.append(1.0 if (l == k and br == branch) else 0.0)
    lg = log_psi(np.array(pts), k, branch, specs, pol)
    vals = np.where(np.isfinite(lg.real), np.exp(lg), 0j)
    return float(np.max(np.abs(vals - np.array(want))))


def exponential_type_fit(k, branch, specs, ys=(50, 75, 100, 150, 200, 300), pol=None):
    """Fitted growth slope of log|Psi_k(iy)| for y -> +inf and y -> -inf.

    Model: log|Psi| = s|y| + c sqrt|y| + e |y|^(1/4) + d (least squares);
    the sub-linear terms come from the canonical product and the multipliers.
    """
    ys = np.asarray(ys, dtype=float)
    res = {}
    for sgn in (1, -1):
        lg = log_psi(1j * sgn * ys, k, branch, specs, pol).real
        A = np.stack([ys, np.sqrt(ys), ys**0.25, np.ones_like(ys)], axis=1)
        coef = np.linalg.lstsq(A, lg, rcond=None)[0]
        res[sgn] = float(coef[0])
    return res


# ------------------------------------------------- auxiliary integrals

def beta_bounds(x):
    """Lower and upper bounds for int |s|^(1/4)/(1 + (x - s)^2) ds."""
    f = np.sqrt(np.pi) * (1 + x * x) ** 0.125
    lo = f * special.gamma(5 / 8) / special.gamma(9 / 8)
    hi = f * special.gamma(3 / 8) / special.gamma(7 / 8)
    return float(lo), float(hi)


def verify_beta_integral(x):
    """(I(x), lower, upper) with I(x) = int_R |s|^(1/4) / (1 + (x - s)^2) ds."""
    x = float(x)
    f = lambda s: abs(s) ** 0.25 / (1 + (x - s) ** 2)
    pts = sorted({0.0, x})
    edges = [-np.inf] + pts + [np.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if np.isinf(lo) or np.isinf(hi):
            val, err = integrate.quad(f, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-12)
        else:
            val, err = integrate.quad(f, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-12)
        if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
            raise ArithmeticError(f"quadrature did not converge on [{lo}, {hi}]")
        total += val
    lo_b, hi_b = beta_bounds(x)
    assert lo_b <= total <= hi_b, (x, lo_b, total, hi_b)
    return total, lo_b, hi_b


def counting_potential_theta(x):
    """theta(x) = int_0^1 log|1 - x^2/t^2| d(t - t^(1/4)) for x > 0.

    With t = u^4 the measure becomes (4u^3 - 1) du and the endpoint
    singularity disappears.  For x > 1 the log x^2 part integrates to zero
    exactly and is removed before quadrature.
    """
    x = float(x)
    if x <= 0:
        raise ValueError("x must be positive")
    w = lambda u: 4 * u**3 - 1
    if x >= 1:
        f = lambda u: (-8 * np.log(u) + np.log1p(-(u**8) / x**2)) * w(u) if u > 0 else 0.0
        pts = [1.0] if x == 1 else None
        val, err = integrate.quad(f, 0, 1, points=pts, limit=400, epsabs=1e-12)
    else:
        f = lambda u: np.log(abs(1 - x**2 / u**8)) * w(u) if u > 0 else 0.0
        val, err = integrate.quad(f, 0, 1, points=[x**0.25], limit=400, epsabs=1e-12)
    if err > 1e-6:
        raise ArithmeticError("quadrature did not converge")
    return float(val)


def verify_theta_bounded(xs=None):
    """sup |theta| over a log grid (default [1e-3, 1e6])."""
    xs = np.logspace(-3, 6, 91) if xs is None else np.asarray(xs, dtype=float)
    vals = np.array([counting_potential_theta(x) for x in xs])
    return float(np.max(np.abs(vals))), vals


def U2(x, T=2 * np.pi):
    """Potential of the continuous counting measure of M2 on the real axis."""
    a = T / (4 * np.pi)
    b, g = B2, 0.25
    B = (b / a) ** (4 / 3)
    x = abs(float(x))
    dens = lambda t: a - b * g * t ** (g - 1)
    f = lambda t: np.log(abs(1 - x * x / (t * t))) * dens(t)
    pts = [B, x, 2 * x + B] if x > B else [B, 2 * B + x]
    edges = sorted(set(pts))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, lo, hi, limit=400)[0]
    total += integrate.quad(f, edges[-1], np.inf, limit=400)[0]
    return total


def U2_consistency(xs=None, T=2 * np.pi):
    """U2(x) + 2 sqrt(2) pi |x|^(1/4) over a log grid; should stay bounded."""
    xs = np.logspace(-3, 6, 37) if xs is None else np.asarray(xs, dtype=float)
    return np.array([U2(x, T) + 2 * SQ2 * np.pi * abs(x) ** 0.25 for x in xs])


# ------------------------------------------------------ fitted envelopes

def envelope_fit(log_vals, log_env, kind="upper"):
    """Fitted constant for |F| <= C env (upper) or |F| >= C env (lower).

    Works with logs.  drift compares the log ratio at the end of the range with
    its value half way, relative to the change of the envelope; a bound that
    is about to fail shows up as positive drift (upper) or negative drift
    (lower).
    """
    r = np.asarray(log_vals, dtype=float) - np.asarray(log_env, dtype=float)
    m = r.size // 2
    drift = float((r[-1] - r[m]) / (abs(log_env[-1] - log_env[m]) + 1.0))
    logC = float(np.max(r) if kind == "upper" else np.min(r))
    ok = bool(np.all(np.isfinite(r)) and (drift <= 0.05 if kind == "upper" else drift >= -0.05))
    return {"kind": kind, "log_C": logC, "drift": drift, "holds": ok,
            "log_ratio": [float(v) for v in r]}


def bound_checks(T=2 * np.pi, xs=None, k_plus=12, k_minus=8, pol=None):
    """Fitted-constant checks for P, P' at the nodes and both multipliers."""
    xs = np.logspace(0, 3, 31) if xs is None else np.asarray(xs, dtype=float)
    a = T / (4 * np.pi)
    zmax = 1.1 * max(xs.max(), abs(node_point(k_minus, -1)), abs(node_point(k_plus, 1)))
    m1 = multiplier_for(T, "M1", zmax)
    m2 = multiplier_for(T, "M2", zmax)
    out = {}
    for sgn, tag in ((1, "+"), (-1, "-")):
        x = sgn * xs + 0j
        lp, _ = log_P(x, pol)
        env = -np.log(xs) + SQ2 * np.pi * np.sqrt(xs) + 2 * SQ2 * np.pi * xs**0.25
        out[f"P_upper{tag}"] = envelope_fit(lp.real, env, "upper")
        l1 = log_multiplier(x, m1).real
        out[f"M1_upper{tag}"] = envelope_fit(l1, np.log(xs) - SQ2 * np.pi * np.sqrt(xs), "upper")
        l2 = log_multiplier(x, m2).real
        out[f"M2_upper{tag}"] = envelope_fit(l2, np.log(xs) - 2 * SQ2 * np.pi * xs**0.25, "upper")
    kp = np.arange(1, k_plus + 1)
    km = np.arange(1, k_minus + 1)
    for sgn, tag in ((1, "+"), (-1, "-")):
        zp = np.array([node_point(sgn * k, 1) for k in kp])
        zm = np.array([node_point(sgn * k, -1) for k in km])
        pp = np.array([P_prime_at_node(sgn * k, 1, pol).real for k in kp])
        pm = np.array([P_prime_at_node(sgn * k, -1, pol).real for k in km])
        out[f"Pprime_plus{tag}"] = envelope_fit(pp, -3 * np.log(kp) + 2 * np.pi * np.sqrt(kp), "lower")
        out[f"Pprime_minus{tag}"] = envelope_fit(pm, -7 * np.log(km) + 3 * np.pi * km, "lower")
        out[f"M2_lower_plus{tag}"] = envelope_fit(
            log_multiplier(zp, m2).real, np.pi * a * kp**2 - 4 * (SQ2 + 1) * np.pi * kp, "lower")
        l2m = log_multiplier(zm, m2).real
        # minus nodes: the linear coefficient c is fitted, then the constant
        c = float(np.polyfit(km, l2m - np.pi * a * km**4.0, 1)[0]) if km.size > 1 else 0.0
        fit = envelope_fit(l2m, np.pi * a * km**4.0 + c * km, "lower")
        fit["c"] = c
        out[f"M2_lower_minus{tag}"] = fit
        out[f"M1_lower_plus{tag}"] = envelope_fit(
            log_multiplier(zp, m1).real, a * np.pi * kp**2 - (5 + 2 * SQ2) * np.pi * kp, "lower")
        out[f"M1_lower_minus{tag}"] = envelope_fit(
            log_multiplier(zm, m1).real,
            a * np.pi * km**4.0 - (2 * SQ2 + 1) * np.pi * km**2.0 - 8 * km, "lower")
    return out
