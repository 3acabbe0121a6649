"""Series solution of the mixed ground-surface Riemann-Hilbert problem.

The stress function derivative inside the annulus is written as
``phi'(zeta) = X(zeta) * sum_n f_n zeta^n`` where ``X`` is the branch
function carrying the square-root-type singularities at the joint images
``t1``/``t2``. The ``f_n`` follow from the traction condition on the
cavity circle ``rho = alpha``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .exceptions import BranchOverflow, DecayFailure, NonConvergence, SingularSystem

log = logging.getLogger(__name__)

DECAY_TOL = 1e-10


def kolosov_lambda(kappa: float) -> float:
    return math.log(kappa) / (2.0 * math.pi)


def binomial_series(a: complex, n: int) -> np.ndarray:
    """Generalised binomial coefficients ``C(a, k)`` for ``k = 0..n``."""
    c = np.empty(n + 1, dtype=complex)
    c[0] = 1.0
    for k in range(1, n + 1):
        c[k] = c[k - 1] * (a - k + 1) / k
    return c


def _branch_args(t1: complex, t2: complex):
    """Arguments of t1, t2 that make X continuous across the free arc.

    The free arc runs clockwise from t1 to t2; both arguments are taken
    within 2*pi below the arc midpoint angle.
    """
    tau1, tau2 = np.angle(t1), np.angle(t2)
    phi_f = tau1 - ((tau1 - tau2) % (2 * np.pi)) / 2
    a1 = phi_f - ((phi_f - tau1) % (2 * np.pi))
    a2 = phi_f - ((phi_f - tau2) % (2 * np.pi))
    return a1, a2, phi_f


@dataclass(frozen=True)
class BranchData:
    """Taylor (inside) and Laurent (outside) coefficients of ``X``."""

    kappa: float
    lam: float
    t1: complex
    t2: complex
    alpha_coeffs: np.ndarray
    beta_coeffs: np.ndarray
    c: np.ndarray

    @property
    def exponent(self) -> complex:
        return complex(-0.5, -self.lam)

    @property
    def tail(self) -> int:
        return self.alpha_coeffs.size - 1

    def x_inside(self, zeta):
        """Series value of ``X`` for ``|zeta| < 1``."""
        return np.polynomial.polynomial.polyval(np.asarray(zeta, dtype=complex), self.alpha_coeffs)

    def x_outside(self, zeta):
        """Series value of ``X`` for ``|zeta| > 1``."""
        zeta = np.asarray(zeta, dtype=complex)
        return np.polynomial.polynomial.polyval(1.0 / zeta, self.beta_coeffs)

    def free_arc_midpoint(self) -> complex:
        return complex(np.exp(1j * _branch_args(self.t1, self.t2)[2]))


def branch_data(kappa: float, t1: complex, t2: complex, tail: int) -> BranchData:
    """Expansion coefficients of ``X = (zeta - t1)^a (zeta - t2)^conj(a)``
    with ``a = -1/2 - i*lambda``, normalised so that ``X ~ 1/zeta`` at
    infinity."""
    if not kappa > 1:
        raise ValueError("kappa must exceed 1")
    t1, t2 = complex(t1), complex(t2)
    if abs(abs(t1) - 1) > 1e-12 or abs(abs(t2) - 1) > 1e-12:
        raise ValueError("joint images must have unit modulus")
    if abs(t1 - t2) < 1e-14:
        raise ValueError("joint images coincide")
    lam = kolosov_lambda(kappa)
    a = complex(-0.5, -lam)
    b = a.conjugate()
    c = binomial_series(a, tail)
    cb = np.conj(c)
    arg1, arg2, _ = _branch_args(t1, t2)
    alpha0 = -np.exp(a * 1j * arg1 + b * 1j * arg2)
    k = np.arange(tail + 1)
    with np.errstate(over="raise", invalid="raise"):
        try:
            # inside: alpha0 * (1 - zeta/t1)^a (1 - zeta/t2)^b
            u = c * (-1.0 / t1) ** k
            v = cb * (-1.0 / t2) ** k
            alpha_k = alpha0 * np.convolve(u, v)[: tail + 1]
            # outside: zeta^-1 (1 - t1/zeta)^a (1 - t2/zeta)^b
            u = c * (-t1) ** k
            v = cb * (-t2) ** k
            beta_k = np.zeros(tail + 1, dtype=complex)
            beta_k[1:] = np.convolve(u, v)[:tail]
        except FloatingPointError as exc:
            raise BranchOverflow("branch coefficients overflowed; use a smaller tail") from exc
    bad = ~np.isfinite(alpha_k) | ~np.isfinite(beta_k)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise BranchOverflow(f"branch coefficient {idx} is not finite; use a smaller tail", index=idx)
    return BranchData(kappa, lam, t1, t2, alpha_k, beta_k, c)


def x_direct(zeta, branch: BranchData, radius: float = 1e6):
    """``X`` by continuation of logarithms along straight paths.

    Starts from the exact far-field behaviour on the ray through the free
    arc midpoint, walks in to the origin and then out to ``zeta``. Points
    inside the unit circle are always valid; points outside must lie on a
    ray from the origin that crosses the free arc, since the branch cuts run
    along the fixed arc.
    """
    a = branch.exponent
    b = a.conjugate()
    t1, t2 = branch.t1, branch.t2
    start = radius * branch.free_arc_midpoint()
    log_x = -np.log(start) + a * np.log(1 - t1 / start) + b * np.log(1 - t2 / start)

    def walk(p, q):
        return a * np.log((q - t1) / (p - t1)) + b * np.log((q - t2) / (p - t2))

    origin = 0.0 + 0.0j
    log_x0 = log_x + walk(start, origin)
    zeta = np.asarray(zeta, dtype=complex)
    return np.exp(log_x0 + walk(origin, zeta))


@dataclass(frozen=True)
class BoundaryFourier:
    """Fourier data on the cavity circle ``rho = alpha``.

    ``d`` and ``h`` are stored in FFT order (index ``k mod N``); use
    :meth:`d_at` / :meth:`h_at` for signed indices.
    """

    d: np.ndarray
    h: np.ndarray
    gamma: float
    sample_count: int
    alpha: float
    area_term: complex = 0j

    def d_at(self, k):
        return self.d[np.asarray(k) % self.sample_count]

    def h_at(self, k):
        return self.h[np.asarray(k) % self.sample_count]

    def I(self, k):
        """Fourier coefficients of the integrated initial traction."""
        k = np.asarray(k)
        out = np.empty(k.shape, dtype=complex)
        nz = k != 0
        out[nz] = -self.gamma * self.h_at(k[nz] - 1) / k[nz]
        out[~nz] = -self.gamma * self.h_at(-1)
        return out

    @property
    def I0(self) -> complex:
        return complex(-self.gamma * self.h_at(-1))


def default_sample_count(M: int) -> int:
    n = max(1024, 8 * M)
    return 1 << (n - 1).bit_length()


def _check_decay(coeffs: np.ndarray, name: str, tol: float = DECAY_TOL) -> None:
    n = coeffs.size
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    tail = np.abs(k) >= (3 * n) // 8
    peak = np.abs(coeffs).max()
    if peak == 0:
        return
    worst = np.abs(coeffs[tail]).max() / peak
    if worst > tol:
        raise DecayFailure(
            f"{name} coefficients decay only to {worst:.2e} of the peak at the tail; "
            f"increase sample_count beyond {n}"
        )


def boundary_fourier(bmap, mat, sample_count: int, check: bool = True) -> BoundaryFourier:
    """Sample the cavity-circle data and transform it.

    ``d_k`` expands ``(z - conj z)/conj z'`` and ``h_k`` expands
    ``-i*y*(dx/dtheta + i*kx*dy/dtheta)/sigma``, both on ``rho = alpha``.
    """
    n = int(sample_count)
    if n < 4 or n & (n - 1):
        raise ValueError("sample_count must be a power of two >= 4")
    alpha = bmap.alpha
    sigma = np.exp(2j * np.pi * np.arange(n) / n)
    zeta = alpha * sigma
    z, dz, _ = bmap.derivatives(zeta)
    g = (z - np.conj(z)) / np.conj(dz)
    dz_dtheta = 1j * zeta * dz
    y = z.imag
    traction_dir = dz_dtheta.real + 1j * mat.kx * dz_dtheta.imag
    hfun = -1j * y * traction_dir / sigma
    d = np.fft.fft(g) / n
    h = np.fft.fft(hfun) / n
    if check:
        _check_decay(d, "d")
        _check_decay(h, "h")
    return BoundaryFourier(d, h, mat.gamma, n, alpha)


def lanczos_factors(M: int) -> np.ndarray:
    """Sigma factors ``L_k`` for ``k = -M..M`` (index ``k + M``)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    k = np.arange(-M, M + 1)
    return np.sinc(k / M)


@dataclass
class SeriesSolution:
    """Truncated coefficient sets of one stage.

    ``f[n + M]`` holds ``f_n`` and ``A[k + M + 1]``/``B[k + M + 1]`` hold
    ``A_k``/``B_k`` for ``k = -M-1..M+1``.
    """

    M: int
    f: np.ndarray
    A: np.ndarray
    B: np.ndarray
    kappa: float
    alpha: float
    I0: complex
    C0: complex = 0j
    Ca: complex = 0j
    iterations: int = 0
    history: list = field(default_factory=list)
    lsq_residual: float = 0.0
    method: str = "fixed-point"

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.M - 1, self.M + 2)

    def A_at(self, k):
        return self.A[np.asarray(k) + self.M + 1]

    def B_at(self, k):
        return self.B[np.asarray(k) + self.M + 1]

    def lanczos(self) -> np.ndarray:
        """Sigma factors aligned with ``k = -M-1..M+1``; the two outer terms get 0."""
        out = np.zeros(2 * self.M + 3)
        out[1:-1] = lanczos_factors(self.M)
        return out

    def single_valuedness_residual(self) -> float:
        a, b = self.A_at(-1), self.B_at(-1)
        return float(abs(self.kappa * a + b))

    def dump_csv(self, path, bf: Optional[BoundaryFourier] = None) -> None:
        """Write ``k, f, A, B, I`` (real and imaginary parts) with full precision."""
        ks = self.k
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "f_re", "f_im", "A_re", "A_im", "B_re", "B_im", "I_re", "I_im"])
            I = bf.I(ks) if bf is not None else np.zeros(ks.size, dtype=complex)
            for j, k in enumerate(ks):
                fk = self.f[k + self.M] if -self.M <= k <= self.M else 0j
                row = [int(k)]
                for v in (fk, self.A[j], self.B[j], I[j]):
                    row += [f"{v.real:.17e}", f"{v.imag:.17e}"]
                w.writerow(row)


def coefficient_matrices(branch: BranchData, M: int):
    """Linear maps ``f -> A`` and ``f -> B`` over ``k = -M-1..M+1``."""
    ks = np.arange(-M - 1, M + 2)
    ns = np.arange(-M, M + 1)
    off = ks[:, None] - ns[None, :]
    if branch.tail < 2 * M + 2:
        raise ValueError("branch tail shorter than 2M+2")
    amat = np.where(off >= 0, branch.alpha_coeffs[np.clip(off, 0, branch.tail)], 0)
    boff = -off
    bmat = np.where(boff >= 1, branch.beta_coeffs[np.clip(boff, 0, branch.tail)], 0)
    return amat, bmat


def solve_coeffs(
    branch: BranchData,
    bf: BoundaryFourier,
    alpha: float,
    M: int,
    tol: float = 1e-12,
    max_iter: int = 200,
    method: str = "auto",
) -> SeriesSolution:
    """Lagged fixed-point solve for ``f_n``.

    The cavity rows are written in variables scaled to unit size on the
    cavity circle. The conjugate coupling through ``d_k`` is taken from
    the previous sweep; every sweep reuses one least-squares factorisation.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    kappa = branch.kappa
    amat, bmat = coefficient_matrices(branch, M)
    ks = np.arange(-M - 1, M + 2)
    ns = np.arange(-M, M + 1)
    la = math.log(alpha)

    # f_n = s_n g_n keeps unknowns O(1); s_n = alpha^|n| for n < 0
    s = np.exp(la * np.maximum(-ns, 0))
    # A_k alpha^k as a map of g: alpha_{k-n} alpha^{k} s_n
    def a_alpha(kk):
        off = kk[:, None] - ns[None, :]
        expo = kk[:, None] + np.maximum(-ns[None, :], 0)
        vals = branch.alpha_coeffs[np.clip(off, 0, branch.tail)] * np.exp(la * np.where(off >= 0, expo, 0))
        return np.where(off >= 0, vals, 0)

    def b_scaled(kk, extra):
        # B_k * alpha^extra as a map of g
        off = ns[None, :] - kk[:, None]
        expo = extra[:, None] + np.maximum(-ns[None, :], 0)
        vals = branch.beta_coeffs[np.clip(off, 0, branch.tail)] * np.exp(la * np.where(off >= 1, expo, 0))
        return np.where(off >= 1, vals, 0)

    rows = []
    # A_{-1} alpha^{-1} and B_{-1}
    rows.append(a_alpha(np.array([-1])))
    rows.append(b_scaled(np.array([-1]), np.array([0])))
    kr = np.arange(1, M + 1)
    # alpha^{-k-1}(A_{-k-1} - alpha^{2k} B_{-k-1}) = (k/alpha)(H_{-k} - I_{-k})
    rows.append(a_alpha(-kr - 1) - b_scaled(-kr - 1, kr - 1))
    # B_{k-1} - alpha^{2k} A_{k-1} = k alpha^k (H_k - I_k)
    rows.append(b_scaled(kr - 1, np.zeros_like(kr)) - a_alpha(kr - 1) * np.exp(la * (kr + 1))[:, None])
    L = np.vstack(rows)

    I_neg = bf.I(-kr)
    I_pos = bf.I(kr)
    I0 = bf.I0

    # H_m = sum_l d_l conj(A_{l-m}) alpha^{l-m};  need H_{-k} and H_k for k = 1..M
    aa_full = a_alpha(ks)  # (2M+3, 2M+1): A_k alpha^k
    m_all = np.concatenate([-kr, kr])
    dmat = bf.d_at(m_all[:, None] + ks[None, :])  # l = m + k

    def rhs_full(g):
        aak = aa_full @ g
        H = dmat @ np.conj(aak)
        Hn, Hp = H[:M], H[M:]
        r = np.empty(2 * M + 2, dtype=complex)
        r[0] = I0 / (1 + kappa) / alpha
        r[1] = -kappa * I0 / (1 + kappa)
        r[2 : 2 + M] = kr / alpha * (Hn - I_neg)
        r[2 + M :] = kr * np.exp(la * kr) * (Hp - I_pos)
        return r

    # the k = M cavity row has no unknown of its own once A_{-M-1} is
    # truncated; it is left out of the square solve and reported instead
    drop = M + 1
    keep = np.arange(L.shape[0]) != drop
    L_full, L = L, L[keep]

    def rhs_of(g):
        return rhs_full(g)[keep]

    zero = np.zeros(2 * M + 1, dtype=complex)
    r0 = rhs_of(zero)
    history = []
    it = 0
    g = None
    if method not in ("fixed-point", "direct", "auto"):
        raise ValueError(f"unknown method {method!r}")
    if method != "direct":
        try:
            g, it, history = _fixed_point(L, rhs_of, r0, tol, max_iter)
            method_used = "fixed-point"
        except NonConvergence as exc:
            if method == "fixed-point":
                raise
            log.warning("%s; falling back to the direct real-linear solve", exc)
            history = exc.history
            it = len(history)
    if g is None:
        # rhs_of is affine in conj(g): r0 + J conj(g)
        weight = np.concatenate([[0.0, 0.0], kr / alpha, kr * np.exp(la * kr)])
        J = weight[:, None] * np.vstack([np.zeros((2, 2 * M + 1)), dmat @ np.conj(aa_full)])
        J = J[keep]
        g = _solve_real_linear(L, J, r0)
        method_used = "direct"

    r_final = rhs_full(g)
    lsq_res = float(abs(L_full[drop] @ g - r_final[drop]) / max(np.linalg.norm(r_final), 1e-300))
    f = g * s
    A = amat @ f
    B = bmat @ f
    sol = SeriesSolution(
        M, f, A, B, kappa, alpha, I0, iterations=it, history=history, lsq_residual=lsq_res, method=method_used
    )
    sol.C0 = displacement_constant(sol)
    return sol


def _fixed_point(L, rhs_of, r0, tol, max_iter):
    try:
        q, rfac = np.linalg.qr(L)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"coefficient system factorisation failed ({exc})") from exc
    diag = np.abs(np.diag(rfac))
    if diag.min() <= diag.max() * 1e-15:
        raise SingularSystem("coefficient system is rank deficient", condition=float("inf"))

    def lsq(r):
        return scipy.linalg.solve_triangular(rfac, q.conj().T @ r)

    g = lsq(r0)
    history = []
    for it in range(1, max_iter + 1):
        g_new = lsq(rhs_of(g))
        norm = np.linalg.norm(g_new)
        change = np.linalg.norm(g_new - g) / norm if norm > 0 else 0.0
        history.append(float(change))
        g = g_new
        if change < tol:
            return g, it, history
        if not np.isfinite(change) or (it > 5 and change > 1e3 * min(history)):
            break
        if it >= 20 and change > 0.99 * history[it - 11]:
            # no contraction over ten sweeps
            break
    raise NonConvergence(f"fixed-point iteration stopped after {len(history)} sweeps", history)


def _solve_real_linear(L, J, r):
    """Least-squares solution of ``L g - J conj(g) = r`` over real and imaginary parts."""
    lm, lp = L - J, L + J
    big = np.block([[lm.real, -lp.imag], [lm.imag, lp.real]])
    rhs = np.concatenate([r.real, r.imag])
    x, *_ = scipy.linalg.lstsq(big, rhs, lapack_driver="gelsd")
    if not np.all(np.isfinite(x)):
        raise SingularSystem("real-linear coefficient system produced non-finite values")
    n = L.shape[1]
    return x[:n] + 1j * x[n:]


def displacement_constant(sol: SeriesSolution, filtered: bool = True) -> complex:
    """Constant fixing zero displacement at the image of infinity."""
    k = np.arange(-sol.M, sol.M + 2)
    k = k[k != 0]
    L = sol.lanczos() if filtered else np.ones(2 * sol.M + 3)
    Am1 = sol.A_at(k - 1) * L[k - 1 + sol.M + 1]
    Bm1 = sol.B_at(k - 1) * L[k - 1 + sol.M + 1]
    return complex(-np.sum((sol.kappa * Am1 + Bm1) / k))
