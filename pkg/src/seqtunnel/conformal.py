"""Two-step bidirectional conformal map of the holed lower half-plane.

Step one is a Mobius transform taking the ground surface to the circle
``|w| = beta`` and the cavity to an interior hole. Step two maps that
interval annulus onto ``alpha <= |zeta| <= 1``: forward by charge
simulation (real logarithmic charges), backward by complex dipole
simulation (simple poles).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .exceptions import (
    ChargePointHit,
    CoincidentJoints,
    DegenerateSpacing,
    GeometryError,
    OutsideDomain,
    PoleHit,
    SingularSystem,
)
from .geometry import DensitySpec, GroundSplit, StageBoundary, check_density, collocation_points

log = logging.getLogger(__name__)

COND_WARN = 1e12


@dataclass(frozen=True)
class MobiusMap:
    """``w = beta (z - z_c) / (z - conj(z_c))``."""

    z_c: complex
    beta: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "z_c", complex(self.z_c))
        if not self.z_c.imag < 0:
            raise GeometryError("Mobius centre must lie below the ground surface")
        if not self.beta > 0:
            raise GeometryError("beta must be positive")

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        den = z - np.conj(self.z_c)
        if np.any(den == 0):
            raise PoleHit("z coincides with the mirror image of z_c")
        return self.beta * (z - self.z_c) / den

    def backward(self, w):
        w = np.asarray(w, dtype=complex)
        den = w - self.beta
        if np.any(den == 0):
            raise PoleHit("w = beta is the image of the point at infinity")
        return (w * np.conj(self.z_c) - self.beta * self.z_c) / den

    def dz_dw(self, w):
        w = np.asarray(w, dtype=complex)
        return 2j * self.beta * self.z_c.imag / (w - self.beta) ** 2

    def d2z_dw2(self, w):
        w = np.asarray(w, dtype=complex)
        return -4j * self.beta * self.z_c.imag / (w - self.beta) ** 3


def mobius_forward(z, m: MobiusMap):
    return m.forward(z)


def mobius_backward(w, m: MobiusMap):
    return m.backward(w)


def place_charges(colloc, factor: float) -> np.ndarray:
    """Charge points offset along the right-hand normal of a closed point loop.

    The offset is ``factor`` times the mean of the two adjacent chord
    lengths; indices wrap around. Order the loop so the right-hand side
    faces away from the region being mapped.
    """
    c = np.asarray(colloc, dtype=complex)
    if c.size < 3:
        raise DegenerateSpacing("need at least 3 collocation points")
    nxt = np.roll(c, -1)
    prv = np.roll(c, 1)
    fwd = np.abs(nxt - c)
    back = np.abs(c - prv)
    if np.any(fwd == 0) or np.any(nxt == prv):
        raise DegenerateSpacing("coincident neighbouring collocation points")
    h = 0.5 * (fwd + back)
    theta = np.angle(nxt - prv) - np.pi / 2
    return c + factor * h * np.exp(1j * theta)


@dataclass(frozen=True)
class ChargeSet:
    """Solved charges of both directions plus normalisation points."""

    P: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    V: np.ndarray
    log_re: float
    log_alpha: float
    w_c: complex
    w_beta: complex
    w_0: complex
    p: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    forward_condition: float = float("nan")
    backward_condition: float = float("nan")

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    @property
    def r_e(self) -> float:
        return math.exp(self.log_re)

    @property
    def poles(self) -> np.ndarray:
        return np.concatenate([self.eta, self.mu])

    @property
    def residues(self) -> np.ndarray:
        return np.concatenate([self.p, self.q])


def _solve_dense(a, b, what: str):
    try:
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularSystem(f"{what}: factorisation failed ({exc})") from exc
    if np.any(np.diag(lu) == 0):
        raise SingularSystem(f"{what}: exactly singular", condition=float("inf"))
    x = scipy.linalg.lu_solve((lu, piv), b)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > 1e16:
        raise SingularSystem(f"{what}: condition number {cond:.3e}", condition=cond)
    if cond > COND_WARN:
        log.warning("%s: condition number %.3e", what, cond)
    else:
        log.debug("%s: condition number %.3e", what, cond)
    return x, cond


def solve_forward_map(colloc_ext, colloc_int, U, V, w_c, w_beta):
    """Real charge-simulation system for the forward map.

    Returns ``(P, Q, log_re, log_alpha, condition)``.
    """
    we = np.asarray(colloc_ext, dtype=complex)
    wi = np.asarray(colloc_int, dtype=complex)
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    n0, nj = U.size, V.size
    if we.size != n0 or wi.size != nj:
        raise SingularSystem("collocation and charge counts differ")
    pts = np.concatenate([we, wi])
    n = n0 + nj + 2
    a = np.zeros((n, n))
    a[: n0 + nj, :n0] = np.log(np.abs((pts[:, None] - U[None, :]) / (w_beta - U[None, :])))
    a[: n0 + nj, n0 : n0 + nj] = np.log(np.abs((pts[:, None] - V[None, :]) / (w_beta - V[None, :])))
    a[:n0, n0 + nj] = -1.0
    a[n0 : n0 + nj, n0 + nj + 1] = -1.0
    a[n0 + nj, :n0] = 1.0
    a[n0 + nj + 1, n0 : n0 + nj] = 1.0
    rhs = np.zeros(n)
    rhs[: n0 + nj] = -np.log(np.abs((pts - w_c) / (w_beta - w_c)))
    rhs[n0 + nj] = -1.0
    x, cond = _solve_dense(a, rhs, "forward charge system")
    resid = np.linalg.norm(a @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
    log.debug("forward system relative residual %.3e", resid)
    return x[:n0], x[n0 : n0 + nj], float(x[n0 + nj]), float(x[n0 + nj + 1]), cond


def eval_forward(w, cs: ChargeSet):
    """Forward map ``zeta(w)`` in the branch-safe normalised form."""
    w = np.asarray(w, dtype=complex)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    if np.any(np.abs(w) > abs(cs.w_beta) * (1 + 1e-9)):
        raise OutsideDomain("w lies outside the interval annulus")
    if np.any(w == cs.w_c):
        raise OutsideDomain("w coincides with the interior normalisation point")
    U, V = cs.U, cs.V
    shape = w.shape
    wf = w.ravel()
    out = np.empty(wf.shape, dtype=complex)
    ref_p = np.log((cs.w_beta - U) / (cs.w_0 - U))
    ref_q = np.log((cs.w_beta - V) / (cs.w_beta - cs.w_c))
    chunk = max(1, 200_000 // max(U.size + V.size, 1))
    for s in range(0, wf.size, chunk):
        ww = wf[s : s + chunk, None]
        ep = np.log((ww - U) / (cs.w_0 - U)) - ref_p
        eq = np.log((ww - V) / (ww - cs.w_c)) - ref_q
        expo = ep @ cs.P + eq @ cs.Q
        out[s : s + chunk] = (wf[s : s + chunk] - cs.w_c) / (cs.w_beta - cs.w_c) * np.exp(expo)
    out = out.reshape(shape)
    return out[0] if scalar else out


def solve_backward_map(zeta_ext, zeta_int, w_ext, w_int, eta, mu):
    """Complex dipole system; returns ``(p, q, condition)``."""
    zeta = np.concatenate([np.asarray(zeta_ext), np.asarray(zeta_int)]).astype(complex)
    w = np.concatenate([np.asarray(w_ext), np.asarray(w_int)]).astype(complex)
    poles = np.concatenate([np.asarray(eta), np.asarray(mu)]).astype(complex)
    if zeta.size != poles.size:
        raise SingularSystem("collocation and charge counts differ")
    a = 1.0 / (zeta[:, None] - poles[None, :])
    x, cond = _solve_dense(a, w, "backward dipole system")
    n0 = np.asarray(eta).size
    return x[:n0], x[n0:], cond


def cdsm_backward(zeta, cs: ChargeSet, order: int = 0):
    """Backward rational map ``w(zeta)`` or its first/second derivative."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    zeta = np.asarray(zeta, dtype=complex)
    scalar = zeta.ndim == 0
    zf = np.atleast_1d(zeta).ravel()
    poles, res = cs.poles, cs.residues
    out = np.empty(zf.shape, dtype=complex)
    chunk = max(1, 200_000 // poles.size)
    for s in range(0, zf.size, chunk):
        d = zf[s : s + chunk, None] - poles[None, :]
        if np.any(d == 0):
            raise ChargePointHit("evaluation point coincides with a dipole location")
        inv = 1.0 / d
        if order == 0:
            out[s : s + chunk] = inv @ res
        elif order == 1:
            out[s : s + chunk] = -(inv * inv) @ res
        else:
            out[s : s + chunk] = 2.0 * (inv * inv * inv) @ res
    out = out.reshape(np.shape(zeta) if not scalar else (1,))
    return out[0] if scalar else out


@dataclass(frozen=True)
class MapOptions:
    """Tunable inputs of the two-step map."""

    beta: float = 5.0
    z_c: Optional[complex] = None
    w_c: Optional[complex] = None
    w0_factor: float = 0.9
    K0: float = 2.2
    K1: float = 1.5
    k0: float = 2.2
    k1: float = 1.5
    n_ground: int = 360
    density: DensitySpec = field(default_factory=DensitySpec)


@dataclass(frozen=True)
class BidirectionalMap:
    """Solved forward/backward map of one stage plus its joint images."""

    mobius: MobiusMap
    charges: ChargeSet
    t1: complex
    t2: complex
    epsilon: float
    colloc_z: np.ndarray
    colloc_w_ext: np.ndarray

    @property
    def alpha(self) -> float:
        return self.charges.alpha

    def zeta_of_z(self, z):
        return eval_forward(self.mobius.forward(z), self.charges)

    def z_of_zeta(self, zeta):
        return self.mobius.backward(cdsm_backward(zeta, self.charges, 0))

    def derivatives(self, zeta):
        """``(z, z', z'')`` with respect to ``zeta``."""
        w = cdsm_backward(zeta, self.charges, 0)
        w1 = cdsm_backward(zeta, self.charges, 1)
        w2 = cdsm_backward(zeta, self.charges, 2)
        zw1 = self.mobius.dz_dw(w)
        zw2 = self.mobius.d2z_dw2(w)
        return self.mobius.backward(w), zw1 * w1, zw2 * w1 * w1 + zw1 * w2

    def dz(self, zeta):
        w = cdsm_backward(zeta, self.charges, 0)
        return self.mobius.dz_dw(w) * cdsm_backward(zeta, self.charges, 1)


def map_accuracy(bmap: BidirectionalMap, colloc=None) -> float:
    """Largest physical distance between cavity midpoints and their round trip.

    Each midpoint is mapped forward, projected radially onto ``rho = alpha``
    and mapped back.
    """
    z = bmap.colloc_z if colloc is None else np.asarray(colloc, dtype=complex)
    mid = 0.5 * (z + np.roll(z, -1))
    zeta = bmap.zeta_of_z(mid)
    proj = bmap.alpha * np.exp(1j * np.angle(zeta))
    back = bmap.z_of_zeta(proj)
    return float(np.max(np.abs(back - mid)))


def joint_images(bmap, T1, T2):
    """Unit-modulus images of the two joint points."""
    mob = bmap.mobius if isinstance(bmap, BidirectionalMap) else bmap[0]
    cs = bmap.charges if isinstance(bmap, BidirectionalMap) else bmap[1]
    z = np.array([complex(T1), complex(T2)])
    w = mob.forward(z)
    # ground points are exactly on |w| = beta; guard rounding
    w = mob.beta * w / np.abs(w)
    zeta = eval_forward(w, cs)
    t = zeta / np.abs(zeta)
    if abs(t[0] - t[1]) < 1e-14:
        raise CoincidentJoints("joint points map to the same image")
    return complex(t[0]), complex(t[1])


def default_center(boundary: StageBoundary) -> complex:
    c = boundary.centroid()
    if not boundary.contains(c):
        raise GeometryError("cavity centroid lies outside the cavity; give z_c explicitly")
    return c


def build_map(boundary: StageBoundary, split: GroundSplit, options: Optional[MapOptions] = None) -> BidirectionalMap:
    """Collocate, place charges, solve both systems and score the round trip."""
    opt = options or MapOptions()
    z_c = complex(opt.z_c) if opt.z_c is not None else default_center(boundary)
    if not boundary.contains(z_c):
        raise GeometryError(f"z_c = {z_c} is not inside the cavity")
    mob = MobiusMap(z_c, opt.beta)
    w_c = complex(mob.forward(z_c)) if opt.w_c is None else complex(opt.w_c)
    w_beta = complex(opt.beta)
    w_0 = complex(opt.w0_factor * opt.beta)

    z_int = collocation_points(boundary, opt.density)
    w_int_ccw = mob.forward(z_int)
    w_int = w_int_ccw[::-1]  # clockwise so the right-hand normal points into the hole
    w_ext = collocation_points((0.0, opt.beta, opt.n_ground), check=True)
    check_density(w_int)

    U = place_charges(w_ext, opt.K0)
    V = place_charges(w_int, opt.K1)
    if np.any(np.abs(U) <= opt.beta):
        raise GeometryError("exterior charge points fall inside the interval annulus")
    P, Q, log_re, log_alpha, cond_f = solve_forward_map(w_ext, w_int, U, V, w_c, w_beta)
    cs = ChargeSet(P, Q, U, V, log_re, log_alpha, w_c, w_beta, w_0, forward_condition=cond_f)
    if not 0 < cs.alpha < 1:
        raise SingularSystem(f"forward solve gave alpha = {cs.alpha}")

    zeta_ext = eval_forward(w_ext, cs)
    zeta_int = eval_forward(w_int, cs)
    eta = place_charges(zeta_ext, opt.k0)
    mu = place_charges(zeta_int, opt.k1)
    p, q, cond_b = solve_backward_map(zeta_ext, zeta_int, w_ext, w_int, eta, mu)
    cs = ChargeSet(
        P, Q, U, V, log_re, log_alpha, w_c, w_beta, w_0,
        p=p, q=q, eta=eta, mu=mu, forward_condition=cond_f, backward_condition=cond_b,
    )
    t1, t2 = joint_images((mob, cs), split.T1, split.T2)
    partial = BidirectionalMap(mob, cs, t1, t2, float("nan"), z_int, w_ext)
    eps = map_accuracy(partial)
    return BidirectionalMap(mob, cs, t1, t2, eps, z_int, w_ext)


def curvilinear_grid(bmap: BidirectionalMap, rho_lines: int = 10, theta_lines: int = 36, samples: int = 200):
    """Images of the annulus circles and rays in the physical plane.

    Returns rows ``(family, value, param, x, y)`` where ``family`` is 0 for a
    circle ``rho = value`` (``param`` is theta) and 1 for a ray
    ``theta = value`` (``param`` is rho). Rays stop just short of the ground
    circle so the joint images stay out of the sample set.
    """
    a = bmap.alpha
    rhos = np.linspace(a, 1.0, rho_lines)
    rhos[-1] = 1.0 - 1e-6 * (1.0 - a)
    thetas = 2 * np.pi * np.arange(theta_lines) / theta_lines
    t = 2 * np.pi * np.arange(samples) / samples
    r = np.linspace(a, rhos[-1], samples)
    rows = []
    for rho in rhos:
        z = bmap.z_of_zeta(rho * np.exp(1j * t))
        rows.append(np.column_stack([np.zeros(samples), np.full(samples, rho), t, z.real, z.imag]))
    for th in thetas:
        z = bmap.z_of_zeta(r * np.exp(1j * th))
        rows.append(np.column_stack([np.ones(samples), np.full(samples, th), r, z.real, z.imag]))
    return np.vstack(rows)
