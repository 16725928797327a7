"""Moment problems for the four control placements and control synthesis.

A mode (k, branch) with left eigen-coordinate y = u_k + conj(theta) v_k obeys
y' = mu y + D g(t), where D is the projection of the forcing on that
coordinate.  Driving y(T) to zero with a control supported in [0, Tw]
(Tw = window * T) is the moment condition

    int_{-Tw/2}^{Tw/2} e^{-mu t} G(t) dt = -e^{mu Tw/2} y(0) / D,   G(t) = g(t + Tw/2).

Enforced modes are |k| <= K_c together with the mean mode.  After Tw the
system evolves freely, which damps the unenforced modes.
"""
import json
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from . import biortho, spectrum
from .fourier_space import PeriodicField, StatePair, mean

SCENARIOS = ("interior_u", "interior_v", "boundary_u", "boundary_v")
DEFAULT_WINDOW = 0.75
MEAN_TOL = 1e-12


THEOREMS = {s: f"null-controllability theorem for {s} control" for s in
            ("interior_u", "interior_v", "boundary_u", "boundary_v")}


class CompatibilityError(ValueError):
    """Initial data violate a mean condition required by the control placement."""

    def __init__(self, message, scenario=None):
        super().__init__(message)
        self.scenario = scenario
        self.theorem = THEOREMS.get(scenario)


# ------------------------------------------------------------- profiles

@dataclass(frozen=True)
class Profile:
    alpha: float = 1.0
    rho: float = float(np.sqrt(2) - 1)

    def __post_init__(self):
        if not (0 < self.rho < 1):
            raise ValueError("rho must lie in (0, 1)")
        if not (0 < self.alpha and self.alpha + self.rho * np.pi < 2 * np.pi):
            raise ValueError("[alpha, alpha + rho pi] must lie inside (0, 2 pi)")


def profile_fk(alpha, rho, k):
    """int_0^{2pi} f e^{-ikx} dx for f the indicator of [alpha, alpha + rho pi]."""
    if k == 0:
        return complex(rho * np.pi)
    fk = np.exp(-1j * k * alpha) * (1 - np.exp(-1j * k * rho * np.pi)) / (1j * k)
    assert abs(fk) > 0
    return complex(fk)


def profile_fk_mp(alpha, rho, k):
    alpha, rho = mp.mpf(alpha), mp.mpf(rho)
    if k == 0:
        return mp.mpc(rho * mp.pi)
    return mp.exp(-1j * k * alpha) * (1 - mp.exp(-1j * k * rho * mp.pi)) / (1j * k)


def profile_field(alpha, rho, kmax):
    """Fourier coefficients c_k = f_k / 2pi of the profile."""
    return PeriodicField(kmax, [profile_fk(alpha, rho, k) / (2 * np.pi)
                                for k in range(-kmax, kmax + 1)])


# -------------------------------------------------------- Diophantine

def _quadratic_root(a, b, c):
    disc = b * b - 4 * a * c
    if a == 0:
        raise ValueError("not a quadratic")
    if disc < 0:
        raise ValueError("no real roots")
    r = math.isqrt(disc)
    if r * r == disc:
        raise ValueError("reducible polynomial: the roots are rational")
    roots = [(-b + s * np.sqrt(disc)) / (2 * a) for s in (1, -1)]
    inside = [x for x in roots if 0 < x < 1]
    if not inside:
        raise ValueError("no root in (0, 1)")
    return inside[0], roots


def liouville_constant(a, b, c):
    """(rho, C) with |rho - p/q| >= C/q^2 for all p/q, rho the root of aX^2+bX+c in (0, 1).

    C = 1/(sup_{|x - rho| <= 1} |2ax + b| + 1), from the mean value theorem on
    the integer-valued q^2 P(p/q).
    """
    rho, _ = _quadratic_root(int(a), int(b), int(c))
    sup = max(abs(2 * a * (rho - 1) + b), abs(2 * a * (rho + 1) + b))
    return rho, 1.0 / (sup + 1.0)


def diophantine_scan(rho, qmax=10_000):
    """min over 1 <= q <= qmax of q * dist(q rho, Z) = min_p q^2 |rho - p/q|."""
    q = np.arange(1, qmax + 1, dtype=float)
    x = q * rho
    d = np.abs(x - np.round(x))
    j = int(np.argmin(q * d))
    return float(q[j] * d[j]), int(q[j])


def profile_lower_scan(alpha, rho, kmax=10_000):
    """min over 0 < |k| <= kmax of k^2 |f_k| (|f_k| = 2|sin(k rho pi/2)|/|k|)."""
    k = np.arange(1, kmax + 1, dtype=float)
    vals = 2 * k * np.abs(np.sin(k * rho * np.pi / 2))
    j = int(np.argmin(vals))
    return float(vals[j]), int(k[j])


# ------------------------------------------------------------- signals

@dataclass
class ControlSignal:
    """g(s) = sum_l c_l exp(-nu_l (s - Tw/2)) on [0, Tw], zero on (Tw, T]."""
    kind: str
    T: float
    window: float
    nus: list
    coeffs: list
    dps: int
    labels: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def Tw(self):
        return self.T * self.window

    def evaluate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros(s.size, dtype=complex)
        with mp.workdps(self.dps):
            half = mp.mpf(self.Tw) / 2
            for i, si in enumerate(s):
                if 0 <= si <= self.Tw + 1e-15:
                    out[i] = complex(mp.fsum(c * mp.exp(-n * (mp.mpf(si) - half))
                                             for c, n in zip(self.coeffs, self.nus)))
        return out

    def shifted_moment(self, mu):
        """int_{-Tw/2}^{Tw/2} e^{-mu t} g(t + Tw/2) dt."""
        with mp.workdps(self.dps):
            return mp.fsum(c * biortho.pair_integral(mu + n, self.Tw)
                           for c, n in zip(self.coeffs, self.nus))

    def moment(self, mu, upto=None):
        """int_0^tau e^{-mu s} g(s) ds with tau = min(upto, Tw) (default Tw)."""
        with mp.workdps(self.dps):
            tau = mp.mpf(self.Tw if upto is None else min(upto, self.Tw))
            half = mp.mpf(self.Tw) / 2
            return mp.fsum(c * mp.exp(n * half) * expint(mu + n, tau)
                           for c, n in zip(self.coeffs, self.nus))

    def l2_norm(self):
        with mp.workdps(self.dps):
            tot = mp.mpf(0)
            n = len(self.nus)
            for j in range(n):
                for l in range(n):
                    w = mp.conj(self.nus[j]) + self.nus[l]
                    tot += mp.conj(self.coeffs[j]) * self.coeffs[l] * biortho.pair_integral(w, self.Tw)
            return float(mp.sqrt(abs(mp.re(tot))))

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def to_json(self):
        d = self.dps
        enc = lambda z: [mp.nstr(mp.re(z), d, min_fixed=1, max_fixed=0),
                         mp.nstr(mp.im(z), d, min_fixed=1, max_fixed=0)]
        with mp.workdps(self.dps):
            return {"kind": self.kind, "T": self.T, "window": self.window, "dps": self.dps,
                    "labels": [list(x) for x in self.labels],
                    "nus": [enc(z) for z in self.nus], "coeffs": [enc(z) for z in self.coeffs],
                    "meta": self.meta}

    @classmethod
    def from_json(cls, data):
        dps = int(data["dps"])
        with mp.workdps(dps):
            dec = lambda p: mp.mpc(mp.mpf(p[0]), mp.mpf(p[1]))
            return cls(data["kind"], float(data["T"]), float(data["window"]),
                       [dec(p) for p in data["nus"]], [dec(p) for p in data["coeffs"]], dps,
                       [tuple(x) for x in data.get("labels", [])], data.get("meta", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def expint(w, tau):
    """int_0^tau e^{-w s} ds in mpmath."""
    if abs(w) < mp.mpf(10) ** (-mp.mp.dps // 2):
        return tau - w * tau**2 / 2
    return (1 - mp.exp(-w * tau)) / w


def exp_signal(T, nus, coeffs, kind="g_interior", window=1.0, dps=30):
    """Signal from explicit exponentials (tests and oracles)."""
    with mp.workdps(dps):
        return ControlSignal(kind, float(T), float(window), [mp.mpc(n) for n in nus],
                             [mp.mpc(c) for c in coeffs], dps)


# ---------------------------------------------------------- forcing data

def mode_forcing(k, scenario, profile=None):
    """(F_u, F_v): per-mode forcing vector multiplying the scalar control (mpmath)."""
    if scenario in ("interior_u", "interior_v"):
        cf = profile_fk_mp(profile.alpha, profile.rho, k) / (2 * mp.pi)
        return (cf, mp.mpc(0)) if scenario == "interior_u" else (mp.mpc(0), cf)
    if scenario == "boundary_u":
        bu, bv = -(1j * k**3 + k**2 - 1j * k), -1
    elif scenario == "boundary_v":
        bu, bv = -1, 1 - 1j * k
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return mp.mpc(bu) / (2 * mp.pi), mp.mpc(bv) / (2 * mp.pi)


def projection(k, branch, vec):
    """Left eigen-coordinate u + conj(theta) v of the 2-vector vec (mpmath)."""
    lam = spectrum.eigenvalue_mp(k, branch)
    th = spectrum.theta_mp(k, lam)
    return vec[0] + mp.conj(th) * vec[1]


def check_compatibility(scenario, init, tol=MEAN_TOL):
    scale = 1.0 + float(np.max(np.abs(np.concatenate([init.u.coeffs, init.v.coeffs]))))
    mu_, mv_ = abs(mean(init.u)), abs(mean(init.v))
    need = {"interior_u": ("v",), "interior_v": ("u",), "boundary_u": ("u",),
            "boundary_v": ("u", "v")}[scenario]
    bad = [c for c in need if (mu_ if c == "u" else mv_) > tol * scale]
    if bad:
        cond = " and ".join(f"<{c}0,1> = 0" for c in need)
        raise CompatibilityError(
            f"hypothesis of the {THEOREMS[scenario]} violated: requires {cond}", scenario)


def gamma_targets(scenario, init, k, branch=1):
    """Pairing target gamma in the form g = -sum e^{mu T/2} w gamma Theta.

    interior: <u0, e^{ikx}> + conj(theta) <v0, e^{ikx}> (weights 1/f_k, 1/(conj(theta) f_k));
    boundary_u: -(that)/(ik^3 + k^2 - ik + conj(theta));
    boundary_v: (that)/(-1 + (1 - ik) conj(theta)).  Mode 0 returns gamma_0.
    """
    u0, v0 = init.u, init.v
    if k == 0:
        if scenario in ("interior_u",):
            return complex(mean(u0))
        if scenario in ("interior_v",):
            return complex(mean(v0))
        if scenario == "boundary_u":
            return complex(mean(v0))
        return 0j
    _, th = spectrum.eta_theta(k, branch)
    g = 2 * np.pi * (u0[k] + np.conj(th) * v0[k])
    if scenario.startswith("interior"):
        return complex(g)
    du, _, dv = spectrum.denominators(k, branch)
    if min(abs(du), abs(dv)) < 1e-12:
        raise ArithmeticError(f"vanishing boundary denominator at k={k}")
    return complex(-g / du) if scenario == "boundary_u" else complex(g / dv)


# ------------------------------------------------------------- problems

@dataclass
class MomentProblem:
    scenario: str
    T: float
    K_c: int
    init: StatePair
    profile: Profile = None
    window: float = DEFAULT_WINDOW
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.T <= 0 or not (0 < self.window <= 1):
            raise ValueError("need T > 0 and 0 < window <= 1")
        if self.scenario.startswith("interior") and self.profile is None:
            self.profile = Profile()
        self.labels = biortho.mode_labels(self.K_c, True)

    @property
    def Tw(self):
        return self.T * self.window

    def target(self, k, branch):
        """Right-hand side a of the shifted moment equation (mpmath, current precision)."""
        if k == 0:
            Fu, Fv = mode_forcing(0, self.scenario, self.profile)
            if self.scenario == "boundary_v":
                return mp.mpc(0)
            if Fu != 0:
                return -mp.mpc(self.init.u[0]) / Fu
            return -mp.mpc(self.init.v[0]) / Fv
        lam = spectrum.eigenvalue_mp(k, branch)
        mu = mp.conj(lam)
        th = spectrum.theta_mp(k, lam)
        y0 = mp.mpc(self.init.u[k]) + mp.conj(th) * mp.mpc(self.init.v[k])
        D = projection(k, branch, mode_forcing(k, self.scenario, self.profile))
        return -mp.exp(mu * mp.mpf(self.Tw) / 2) * y0 / D


def build_problem(scenario, init, T=1.0, K_c=None, profile=None, window=DEFAULT_WINDOW):
    """Validated moment problem; K_c defaults to 2 * (support of init) + 4."""
    check_compatibility(scenario, init)
    if K_c is None:
        nz = [abs(k) for k in range(-init.kmax, init.kmax + 1)
              if init.u[k] != 0 or init.v[k] != 0]
        K_c = 2 * max(nz + [0]) + 4
    return MomentProblem(scenario, float(T), int(K_c), init, profile, float(window))


def synthesize(problem, bio=None, precision="terminal"):
    """Control solving the enforced moment equations.

    With a Gram family `bio` the control is sum_j a_j Theta_j.  Otherwise the
    scaled Gram system is solved directly; precision="terminal" uses enough
    digits for the terminal state (log10 cond + margin), precision="moments"
    adds the digits needed to resolve the unscaled moment equations as well.
    """
    check_compatibility(problem.scenario, problem.init)
    kind = "g_interior" if problem.scenario.startswith("interior") else "q_boundary"
    if bio is None:
        fam = biortho.mode_family(problem.Tw, problem.K_c)
        bio = biortho.gram_biorthogonal(fam)
    fam = bio.family
    if fam.labels != problem.labels or abs(fam.T - problem.Tw) > 1e-14:
        raise ValueError("biorthogonal family does not match the moment problem")
    dps = bio.dps
    if precision == "moments":
        dps = int(np.ceil(bio.cond + biortho.raw_digits(fam))) + biortho.DIGIT_MARGIN + 10
    elif precision != "terminal":
        raise ValueError("precision must be 'terminal' or 'moments'")
    with mp.workdps(dps):
        fam.refresh(dps)
        a = [problem.target(k, br) for (k, br) in fam.labels]
        if dps == bio.dps:
            C = bio.coeffs
            n = len(a)
            c = [mp.fsum(C[l, j] * a[j] for j in range(n)) for l in range(n)]
        else:
            c = _direct_solve(fam, a)
        nus = [mp.conj(m) for m in fam.exponents]
        sig = ControlSignal(kind, problem.T, problem.window, nus, c, dps, list(fam.labels),
                            {"scenario": problem.scenario, "K_c": problem.K_c,
                             "log10_cond_scaled": bio.cond, "precision": precision})
    return sig


def _direct_solve(fam, a):
    """LU solve of the diagonally scaled Gram system at the current precision."""
    B = biortho.gram_matrix(fam)
    n = B.rows
    d = [1 / mp.sqrt(mp.re(B[j, j])) for j in range(n)]
    S = mp.matrix(n, n)
    for j in range(n):
        for l in range(n):
            S[j, l] = B[j, l] * d[j] * d[l]
    rhs = mp.matrix([a[j] * d[j] for j in range(n)])
    x = mp.lu_solve(S, rhs)
    x = x + mp.lu_solve(S, rhs - S * x)
    return [x[j] * d[j] for j in range(n)]


def moment_residuals(signal, problem, K_report=None):
    """Enforced residuals (log10 absolute and scaled by ||e^{-mu t}||) and leakage.

    Leakage for K_c < |k| <= K_report is the predicted modal amplitude at time
    T, |e^{mu (T - Tw/2)} D (moment - target)|.
    """
    K_report = K_report if K_report is not None else problem.K_c + 8
    rows = []
    Tw = problem.Tw
    with mp.workdps(signal.dps):
        for k in range(-K_report, K_report + 1):
            brs = (0,) if k == 0 else spectrum.BRANCHES
            for br in brs:
                mu = mp.mpc(0) if k == 0 else mp.conj(spectrum.eigenvalue_mp(k, br))
                m = signal.shifted_moment(mu)
                a = problem.target(k, br)
                r = m - a
                scale = mp.sqrt(mp.re(biortho.pair_integral(2 * mp.re(mu), Tw)))
                if k == 0:
                    Fu, Fv = mode_forcing(0, problem.scenario, problem.profile)
                    D = Fu if Fu != 0 else Fv
                else:
                    D = projection(k, br, mode_forcing(k, problem.scenario, problem.profile))
                amp = abs(mp.exp(mu * (problem.T - Tw / 2)) * D * r)
                rows.append({"k": k, "branch": "zero" if k == 0 else spectrum.branch_label(br),
                             "enforced": abs(k) <= problem.K_c,
                             "log10_abs": float(mp.log10(abs(r))) if r != 0 else -np.inf,
                             "scaled": float(abs(r) / max(1, scale)), "terminal": float(amp)})
    enf = [r for r in rows if r["enforced"]]
    leak = [r for r in rows if not r["enforced"]]
    return {"rows": rows,
            "max_log10_abs": max(r["log10_abs"] for r in enf),
            "max_scaled": max(r["scaled"] for r in enf),
            "max_terminal": max(r["terminal"] for r in enf),
            "leak_max": max((r["terminal"] for r in leak), default=0.0)}


def shift_identity_residual(signal, mu):
    """|int_0^Tw e^{-mu (s - Tw/2)} g(s) ds - shifted moment| (both in closed form)."""
    with mp.workdps(signal.dps):
        a = mp.exp(mu * mp.mpf(signal.Tw) / 2) * signal.moment(mu)
        b = signal.shifted_moment(mu)
        return float(abs(a - b) / max(1, abs(b)))
