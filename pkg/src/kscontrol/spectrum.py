"""Spectral data of the per-mode adjoint operator.

For every Fourier mode k the adjoint operator acts on (phi_k, psi_k) as the
2x2 matrix

    N_k = [[-k^4 - i k^3 + k^2, -i k], [-i k, -k^2 + i k]]

whose eigenvalues solve  lam^2 + p lam + q = 0  with
p = k^4 + i k^3 - i k and q = k^6 + i k^3 + k^2.  The "plus" branch behaves
like the heat part (lam ~ -k^2 + i k), the "minus" branch like the fourth
order part (lam ~ -k^4 - i k^3 + k^2).  Moment problems use mu = conj(lam).
"""
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np

KMAX_GUARD = 10_000
BRANCHES = (1, -1)


@dataclass(frozen=True)
class SpectralNode:
    k: int
    branch: int  # +1 or -1
    lam: complex
    mu: complex
    eta: complex
    theta: complex
    mu_tilde: complex


def branch_label(branch):
    return "plus" if branch > 0 else "minus"


def parse_branch(branch):
    if branch in (1, "+", "plus", "p"):
        return 1
    if branch in (-1, "-", "minus", "m"):
        return -1
    raise ValueError(f"unknown branch {branch!r}")


def modal_quadratic(k):
    """Coefficients (p, q) of the characteristic quadratic of mode k."""
    k = np.asarray(k, dtype=float)
    p = k**4 + 1j * k**3 - 1j * k
    q = k**6 + 1j * k**3 + k**2
    if p.ndim == 0:
        return complex(p), complex(q)
    return p, q


def _roots(k):
    p, q = modal_quadratic(k)
    d = np.sqrt(p * p - 4 * q)
    r1 = (-p + d) / 2
    r2 = (-p - d) / 2
    # the root of smaller modulus is better computed from the product
    big = np.where(np.abs(r1) >= np.abs(r2), r1, r2)
    small = q / big
    return big, small


def eigenvalues_array(k):
    """Vectorised (lam_plus, lam_minus) for an integer array k (no zeros)."""
    k = np.atleast_1d(np.asarray(k))
    if np.any(k == 0):
        raise ValueError("k = 0 is the double eigenvalue 0; use zero_mode()")
    if np.any(np.abs(k) > KMAX_GUARD):
        raise OverflowError(f"|k| > {KMAX_GUARD} is outside the supported range")
    kf = k.astype(float)
    r1, r2 = _roots(kf)
    ap = -kf**2 + 1j * kf
    am = -kf**4 - 1j * kf**3 + kf**2
    keep = np.abs(r1 - ap) + np.abs(r2 - am)
    swap = np.abs(r2 - ap) + np.abs(r1 - am)
    tie = np.isclose(keep, swap, rtol=1e-14, atol=0.0)
    if np.any(tie):
        warnings.warn("branch proximity tie; plus assigned to larger real part")
        tswap = r2.real > r1.real
        use_swap = np.where(tie, tswap, swap < keep)
    else:
        use_swap = swap < keep
    lp = np.where(use_swap, r2, r1)
    lm = np.where(use_swap, r1, r2)
    return lp, lm


def eigenvalues(k):
    """Eigenvalues (lam_plus, lam_minus) of the adjoint matrix of mode k."""
    if int(k) == 0:
        raise ValueError("k = 0 is the double eigenvalue 0; use zero_mode()")
    lp, lm = eigenvalues_array([int(k)])
    return complex(lp[0]), complex(lm[0])


def eigenvalue(k, branch):
    lp, lm = eigenvalues(k)
    return lp if parse_branch(branch) > 0 else lm


def eta_theta(k, branch):
    """(eta, theta): eigenvector (1, theta) of the adjoint matrix, theta = eta/lam."""
    lam = eigenvalue(k, branch)
    if abs(lam) < 1e-14:
        raise ArithmeticError(f"eigenvalue of mode {k} vanishes; branch error")
    eta = -1j * k**5 - (1 + lam) * 1j * k + k**2 - lam
    theta = eta / lam
    assert eta != 0 and theta != 0
    return complex(eta), complex(theta)


def theta_array(k, lam):
    """theta for arrays of modes and matching eigenvalues."""
    k = np.asarray(k, dtype=float)
    eta = -1j * k**5 - (1 + lam) * 1j * k + k**2 - lam
    return eta / lam


def mu_tilde(k, branch):
    """sgn(k) (-mu)^(1/2) on the plus branch, sgn(k) (-mu)^(1/4) on the minus branch."""
    branch = parse_branch(branch)
    mu = np.conj(eigenvalue(k, branch))
    w = -mu
    assert not (w.imag == 0 and w.real <= 0), "-mu on the branch cut"
    root = np.sqrt(w) if branch > 0 else w**0.25
    return complex(np.sign(k) * root)


def node(k, branch):
    branch = parse_branch(branch)
    lam = eigenvalue(k, branch)
    eta, theta = eta_theta(k, branch)
    return SpectralNode(int(k), branch, lam, lam.conjugate(), eta, theta,
                        mu_tilde(k, branch))


def zero_mode():
    """The k = 0 mode: double eigenvalue 0 with eigenvectors (1, 0) and (0, 1)."""
    return {"k": 0, "lam": 0j, "eigenvectors": [(1.0, 0.0), (0.0, 1.0)]}


def spectrum_table(kmax):
    """All nodes for 0 < |k| <= kmax, ordered by k then branch (plus first)."""
    return [node(k, b) for k in range(-kmax, kmax + 1) if k != 0 for b in BRANCHES]


def vieta_residuals(kmax):
    """Largest relative Vieta residuals (sum, product) over 0 < |k| <= kmax."""
    k = np.array([j for j in range(-kmax, kmax + 1) if j != 0])
    lp, lm = eigenvalues_array(k)
    p, q = modal_quadratic(k)
    rs = np.abs(lp + lm + p) / np.abs(p)
    rp = np.abs(lp * lm - q) / np.abs(q)
    return float(rs.max()), float(rp.max())


def all_eigenvalues(kmax, include_zero=True):
    k = np.array([j for j in range(-kmax, kmax + 1) if j != 0], dtype=int)
    vals = []
    if include_zero:
        vals.append(0j)
    if k.size:
        lp, lm = eigenvalues_array(k)
        vals.extend(lp)
        vals.extend(lm)
    return np.array(vals, dtype=complex)


def spectral_gap(kmax):
    """Minimum pairwise distance between eigenvalues for |k| <= kmax (with 0)."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    k = np.array([j for j in range(-kmax, kmax + 1) if j != 0])
    lp, lm = eigenvalues_array(k)
    vals = np.concatenate([[0j], lp, lm])
    labels = [(0, 0)] + [(int(j), 1) for j in k] + [(int(j), -1) for j in k]
    d = np.abs(vals[:, None] - vals[None, :])
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return float(d[i, j]), (labels[i], labels[j])


def denominators(k, branch):
    """Boundary pairing factors for mode k.

    Returns (den_u, den_v_printed, den_v): den_u = ik^3 + k^2 - ik + conj(theta),
    den_v_printed = 1 + (1 - ik) conj(theta) and the value actually produced by
    the v-boundary forcing, den_v = -1 + (1 - ik) conj(theta).
    """
    _, theta = eta_theta(k, branch)
    tb = np.conj(theta)
    den_u = 1j * k**3 + k**2 - 1j * k + tb
    den_vp = 1 + (1 - 1j * k) * tb
    den_v = -1 + (1 - 1j * k) * tb
    return complex(den_u), complex(den_vp), complex(den_v)


def denominator_check(kmax):
    """Minima over 0 < |k| <= kmax of |den_u|, |den_v_printed| and |den_v|."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    vals = np.array([[abs(d) for d in denominators(k, b)]
                     for k in range(-kmax, kmax + 1) if k != 0 for b in BRANCHES])
    return tuple(float(x) for x in vals.min(axis=0))


def figure_rows(kmax):
    """Rows (k, branch, Re lam, Im lam, Re theta, Im theta, |den_u|, |den_v_printed|, |den_v|)."""
    rows = []
    for nd in spectrum_table(kmax):
        du, dvp, dv = denominators(nd.k, nd.branch)
        rows.append((nd.k, branch_label(nd.branch), nd.lam.real, nd.lam.imag,
                     nd.theta.real, nd.theta.imag, abs(du), abs(dvp), abs(dv)))
    return rows


def eigenvalue_mp(k, branch):
    """Eigenvalue at the current mpmath precision, branch fixed by the double computation."""
    ref = eigenvalue(k, branch)
    k = mp.mpf(int(k))
    p = k**4 + 1j * k**3 - 1j * k
    q = k**6 + 1j * k**3 + k**2
    d = mp.sqrt(p * p - 4 * q)
    r1, r2 = (-p + d) / 2, (-p - d) / 2
    big, other = (r1, r2) if abs(r1) >= abs(r2) else (r2, r1)
    small = q / big
    return big if abs(big - ref) <= abs(small - ref) else small


def theta_mp(k, lam):
    k = int(k)
    eta = -1j * k**5 - (1 + lam) * 1j * k + k**2 - lam
    return eta / lam
