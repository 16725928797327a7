"""Families biorthogonal to {e^{-mu t}} on [-T/2, T/2].

Two routes:

* Gram: Theta_j(t) = sum_l c_l e^{-conj(mu_l) t} with B c = e_j, where
  B_jl = int e^{-(mu_j + conj mu_l) t} dt.  B spans hundreds of orders of
  magnitude, so it is solved in mpmath after symmetric diagonal scaling, with
  the working precision raised until it exceeds log10(cond) by a safety margin.
* Paley-Wiener: Theta = inverse Fourier transform of Psi (see entire_functions).
"""
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from . import entire_functions as ef
from . import spectrum

DIGIT_MARGIN = 25
MAX_DPS = 4000


# ------------------------------------------------------------ families

@dataclass
class ExponentFamily:
    T: float
    labels: list  # (k, branch) with (0, 0) for mu_0 = 0
    dps: int = 30
    exponents: list = field(default=None, repr=False)  # mpc, filled lazily

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("exponents must be distinct")
        self.refresh(self.dps)

    def refresh(self, dps):
        """Recompute the exponents mu = conj(lam) at the given precision."""
        self.dps = dps
        with mp.workdps(dps):
            ex = []
            for k, br in self.labels:
                ex.append(mp.mpc(0) if k == 0 else mp.conj(spectrum.eigenvalue_mp(k, br)))
            self.exponents = ex
        return self

    def __len__(self):
        return len(self.labels)

    def index(self, k, branch):
        return self.labels.index((int(k), 0 if k == 0 else spectrum.parse_branch(branch)))

    def mu_complex(self):
        return np.array([complex(m) for m in self.exponents])


def mode_labels(K, with_zero=True):
    labels = [(0, 0)] if with_zero else []
    for k in range(-K, K + 1):
        if k != 0:
            labels += [(k, 1), (k, -1)]
    return labels


def mode_family(T, K, with_zero=True, dps=30):
    """{0} U {mu_k^+-: 0 < |k| <= K} on the window [-T/2, T/2]."""
    return ExponentFamily(float(T), mode_labels(K, with_zero), dps)


class _Custom(ExponentFamily):
    def refresh(self, dps):
        self.dps = dps
        with mp.workdps(dps):
            self.exponents = [mp.mpc(m) for m in self._raw]
        return self


def custom_family(T, exponents, dps=30):
    """Family with explicitly given exponents (labels are their indices)."""
    fam = _Custom.__new__(_Custom)
    fam.T = float(T)
    fam._raw = [complex(m) if not isinstance(m, mp.mpc) else m for m in exponents]
    fam.labels = [(i, 0) for i in range(len(exponents))]
    vals = [complex(m) for m in exponents]
    for i in range(len(vals)):
        for j in range(i):
            if vals[i] == vals[j]:
                raise ValueError("exponents must be distinct")
    fam.refresh(dps)
    return fam


# ---------------------------------------------------------------- Gram

def pair_integral(w, T):
    """int_{-T/2}^{T/2} e^{-w t} dt = 2 sinh(w T/2)/w (mpmath)."""
    T = mp.mpf(T)
    if abs(w) < mp.mpf(10) ** (-mp.mp.dps // 2):
        return T + w * w * T**3 / 24
    return 2 * mp.sinh(w * T / 2) / w


def pair_integral_np(w, T):
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) <= 1e-12
    ws = np.where(small, 1.0, w)
    return np.where(small, T + 0j, 2 * np.sinh(ws * T / 2) / ws)


def gram_matrix(family):
    """Hermitian Gram matrix B_jl = int e^{-(mu_j + conj mu_l) t} dt (mpmath matrix)."""
    n = len(family)
    mu = family.exponents
    B = mp.matrix(n, n)
    for j in range(n):
        for l in range(j, n):
            v = pair_integral(mu[j] + mp.conj(mu[l]), family.T)
            B[j, l] = v
            B[l, j] = mp.conj(v)
    return B


def gram_matrix_np(exponents, T):
    """Double-precision Gram matrix (small families / examples)."""
    mu = np.asarray(exponents, dtype=complex)
    return pair_integral_np(mu[:, None] + np.conj(mu)[None, :], T)


def _norm1(A):
    return max(mp.fsum(abs(A[i, j]) for i in range(A.rows)) for j in range(A.cols))


@dataclass
class BiorthogonalFamily:
    family: ExponentFamily
    method: str
    coeffs: object = None  # mp.matrix, column j = coefficients of Theta_j
    cond: float = float("nan")  # 1-norm condition number of the scaled Gram matrix (log10)
    cond_raw: float = float("nan")  # log10 of the unscaled estimate
    dps: int = 0
    residual: float = float("nan")
    l2_norms: list = field(default_factory=list)
    log_norms: list = field(default_factory=list)  # natural log of ||Theta_j||
    residual_scaled: float = float("nan")
    samples: dict = field(default_factory=dict)

    def theta_coeffs(self, j):
        return [self.coeffs[l, j] for l in range(self.coeffs.rows)]

    def evaluate(self, j, t):
        """Theta_j(t) in double precision (summed in mpmath)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        c = self.theta_coeffs(j)
        mu = self.family.exponents
        with mp.workdps(self.dps):
            return np.array([complex(mp.fsum(c[l] * mp.exp(-mp.conj(mu[l]) * tt)
                                              for l in range(len(c)))) for tt in t])

    def metadata(self):
        return {"method": self.method, "T": self.family.T, "n": len(self.family),
                "log10_cond_scaled": self.cond, "log10_cond_raw": self.cond_raw,
                "dps": self.dps, "residual": self.residual,
                "residual_scaled": self.residual_scaled,
                "scaling": "symmetric diagonal equilibration"}


def _solve_at(family, dps):
    with mp.workdps(dps):
        family.refresh(dps)
        B = gram_matrix(family)
        n = B.rows
        d = [1 / mp.sqrt(mp.re(B[j, j])) for j in range(n)]
        S = mp.matrix(n, n)
        for j in range(n):
            for l in range(n):
                S[j, l] = B[j, l] * d[j] * d[l]
        Si = mp.inverse(S)
        # one step of iterative refinement: Si <- Si + Si (I - S Si)
        R = mp.eye(n) - S * Si
        Si = Si + Si * R
        cond = _norm1(S) * _norm1(Si)
        C = mp.matrix(n, n)
        for j in range(n):
            for l in range(n):
                C[j, l] = d[j] * Si[j, l] * d[l]
        return B, C, cond, d


def raw_digits(family):
    """Half the decimal spread of the Gram diagonal: digits lost when unscaling."""
    with mp.workdps(30):
        diag = [pair_integral(2 * mp.re(m), family.T) for m in family.exponents]
        return float(mp.log10(max(diag) / min(diag))) / 2


def gram_biorthogonal(family, dps=None, max_dps=MAX_DPS, precision="scaled"):
    """Biorthogonal family in the span of {e^{-conj(mu_l) t}} by a Gram solve.

    The precision starts at `dps` (default 30) and is raised until it exceeds
    log10(cond) + DIGIT_MARGIN.  With precision="full" it also covers the
    spread of the Gram diagonal, so that the unscaled products
    int Theta_j e^{-mu_l t} dt are resolved, not only the scaled ones.
    Beyond max_dps the solve is refused.
    """
    if precision not in ("scaled", "full"):
        raise ValueError("precision must be 'scaled' or 'full'")
    dps = dps or 30
    extra = raw_digits(family) if precision == "full" else 0.0
    while True:
        B, C, cond, d = _solve_at(family, dps)
        lc = float(mp.log10(cond))
        need = int(np.ceil(lc + extra)) + DIGIT_MARGIN
        if need <= dps:
            break
        if need > max_dps:
            raise ArithmeticError(
                f"Gram condition 1e{lc:.0f} exceeds the precision cap; reduce K_c or enlarge T")
        dps = need + 5
    with mp.workdps(dps):
        n = B.rows
        E = B * C
        res = max(abs(E[i, j] - (1 if i == j else 0)) for i in range(n) for j in range(n))
        # scaled residual: d_i (B C - I)_ij / d_j
        res_s = max(abs(E[i, j] - (1 if i == j else 0)) * d[i] / d[j]
                    for i in range(n) for j in range(n))
        raw = max(abs(B[i, i]) for i in range(n)) / min(abs(B[i, i]) for i in range(n))
        logs = [float(mp.log(abs(mp.re(C[j, j])))) / 2 for j in range(n)]
        norms = [float(np.exp(v)) for v in logs]
        bio = BiorthogonalFamily(family, "gram", C, lc, float(mp.log10(raw)) + lc, dps,
                                 float(res), norms, logs, float(res_s))
    return bio


def biorthogonality_matrix(bio):
    """Closed-form matrix int Theta_j e^{-mu_l t} dt - delta_jl (double)."""
    with mp.workdps(bio.dps):
        B = gram_matrix(bio.family)
        E = B * bio.coeffs
        n = E.rows
        return np.array([[complex(E[l, j] - (1 if l == j else 0)) for j in range(n)]
                         for l in range(n)])


def norm_envelope(k, branch, T, c=0.0):
    """Log of the plus/minus norm envelopes without their constants."""
    k = abs(k)
    if branch > 0:
        return 2 * np.log(k) - T / 2 * k**2 - 2 * np.pi * np.sqrt(k) + 3 * (3 + 2 * np.sqrt(2)) * np.pi * k
    return 5 * np.log(k) - T / 2 * k**4 + (2 * np.sqrt(2) + 1) * np.pi * k**2 + c * np.pi * k


def norm_report(bio):
    """Per-(k, branch) norms, log ratios to the envelopes and fitted constants."""
    fam = bio.family
    T = fam.T
    rows = []
    minus = []
    for j, (k, br) in enumerate(fam.labels):
        if k == 0:
            rows.append({"k": 0, "branch": "zero", "norm": bio.l2_norms[j],
                         "log_norm": bio.log_norms[j]})
            continue
        rows.append({"k": k, "branch": spectrum.branch_label(br), "norm": bio.l2_norms[j],
                     "log_norm": bio.log_norms[j]})
        if br < 0:
            minus.append((abs(k), bio.log_norms[j] - norm_envelope(k, -1, T)))
    # minus envelope: fit c in  log ratio <= log C + c pi |k|
    if len(minus) >= 2:
        kk = np.array([m[0] for m in minus], float)
        rr = np.array([m[1] for m in minus])
        c_fit = float(np.polyfit(np.pi * kk, rr, 1)[0])
    else:
        c_fit = 0.0
    for r in rows:
        if r["branch"] == "zero":
            continue
        br = 1 if r["branch"] == "plus" else -1
        r["log_ratio"] = float(r["log_norm"] - norm_envelope(r["k"], br, T, c_fit))
    C_plus = max((np.exp(r["log_ratio"]) for r in rows if r["branch"] == "plus"), default=0.0)
    C_minus = max((np.exp(r["log_ratio"]) for r in rows if r["branch"] == "minus"), default=0.0)
    zero = [r["norm"] for r in rows if r["branch"] == "zero"]
    return {"rows": rows, "C_plus": float(C_plus), "C_minus": float(C_minus), "c_minus": c_fit,
            "theta0_norm": zero[0] if zero else None}


# -------------------------------------------------------- Paley-Wiener

@dataclass
class PWGrid:
    T: float
    X: float
    n: int
    x: np.ndarray
    log_base: np.ndarray  # log(P(x)/x) + log M(x)
    specs: list
    pol: object


def pw_grid(T, X=400.0, n=2**16, pol=None, zmax=None):
    """Shared evaluation of P(x)/x * M(x) on the real grid [-X, X)."""
    x = np.linspace(-X, X, n, endpoint=False)
    specs = ef.default_specs(T, zmax or 4 * X)
    lp, _ = ef.log_P(x + 0j, pol, exclude=0)
    base = lp + ef.log_M(x + 0j, specs)
    return PWGrid(float(T), float(X), int(n), x, base, specs, pol)


def psi_on_grid(grid, k, branch):
    """Psi_k(x) on the grid, reusing the shared product values."""
    x = grid.x + 0j
    if k == 0:
        num = grid.log_base
        zk = 0j
        den = ef.log_P(np.array([zk]), grid.pol, exclude=0)[0][0]
    else:
        branch = spectrum.parse_branch(branch)
        zk = ef.node_point(k, branch)
        mu = np.conj(spectrum.eigenvalue(k, branch))
        # P(x)/((x - zk)/(i mu)) = (P(x)/x) * x * i mu / (x - zk); Psi(0) = 0 exactly
        with np.errstate(divide="ignore"):
            num = grid.log_base + np.log(x) + np.log(1j * mu) - np.log(x - zk)
        den = ef.log_P(np.array([zk]), grid.pol, exclude=(k, branch))[0][0]
    den = den + ef.log_M(np.array([zk]), grid.specs)[0]
    return np.exp(num - den)


def theta_from_psi(grid, k, branch, nodes=None):
    """Theta = (1/2pi) int_{-X}^{X} Psi(x) e^{ixt} dx via FFT, plus diagnostics.

    Biorthogonality against each node mu is evaluated exactly in t:
    int_{-T/2}^{T/2} Theta e^{-mu t} dt = (1/2pi) int Psi(x) K(x) dx with
    K(x) = 2 sinh((ix - mu) T/2)/(ix - mu).  Residuals are reported raw and
    divided by max(1, ||e^{-mu t}||_{L2(-T/2, T/2)}), the Cauchy-Schwarz scale
    at which truncation error in Psi shows up.
    """
    T, x, n = grid.T, grid.x, grid.n
    dx = x[1] - x[0]
    ps = psi_on_grid(grid, k, branch)
    # samples: Theta(t_m), t_m = m dt (wrapped), dt = 2 pi / (n dx)
    dt = 2 * np.pi / (n * dx)
    m = np.fft.fftfreq(n, d=1.0 / n)
    t = m * dt
    theta = dx / (2 * np.pi) * np.exp(-1j * grid.X * t) * n * np.fft.ifft(ps)
    order = np.argsort(t)
    t, theta = t[order], theta[order]
    inside = np.abs(t) <= T / 2
    mass_in = np.sum(np.abs(theta[inside]) ** 2)
    mass = np.sum(np.abs(theta) ** 2)
    if nodes is None:
        nodes = mode_labels(2)
    res = []
    for (l, bl) in nodes:
        mu = 0j if l == 0 else np.conj(spectrum.eigenvalue(l, bl))
        w = 1j * x - mu
        K = pair_integral_np(-w, T)
        val = dx / (2 * np.pi) * np.sum(ps * K)
        want = 1.0 if (l == k and (l == 0 or bl == branch)) else 0.0
        scale = max(1.0, float(np.sqrt(pair_integral_np(2 * mu.real, T).real)))
        res.append({"l": l, "branch": bl, "value": complex(val), "raw": float(abs(val - want)),
                    "normalized": float(abs(val - want) / scale)})
    return {"t": t, "theta": theta, "mass_inside": float(mass_in / mass),
            "norm": float(np.sqrt(mass * dt)), "residuals": res,
            "max_normalized": max(r["normalized"] for r in res),
            "max_raw": max(r["raw"] for r in res)}
