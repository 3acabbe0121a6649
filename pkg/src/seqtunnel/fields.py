"""Stress and displacement fields from a solved coefficient set.

Every quantity is evaluated on circles ``rho = const`` of the unit
annulus. Coupling terms of the form ``G * conj(phi')`` with
``G = (z - conj z) / conj z'`` are expanded in ``sigma = exp(i theta)``
and truncated to the same index window as the solve.

The "Mises" stress reported on the cavity wall is the absolute hoop
stress ``|sigma_theta|`` (the wall is nominally traction free), not the
general three-dimensional von Mises measure.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import ConformalitySingularity, DecayFailure, JointSingularity, OutsideDomain
from .geometry import Material, initial_stress_at
from .rh_solver import SeriesSolution

JOINT_EXCLUSION = 1e-3

CAVITY_COLUMNS = ("theta", "x", "y", "mises_kpa", "sigma_rho_kpa", "tau_rhotheta_kpa", "u_m", "v_m")
GROUND_COLUMNS = ("x", "sigma_x_kpa", "sigma_y_kpa", "tau_xy_kpa", "u_m", "v_m")


@dataclass(frozen=True)
class FieldSample:
    """Vectorised field values at points ``z = z(rho * exp(i theta))``.

    ``kind`` is ``"incremental"``, ``"initial"`` or ``"total"``.
    """

    z: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    sigma_rho: np.ndarray
    sigma_theta: np.ndarray
    tau_rhotheta: np.ndarray
    sigma_x: Optional[np.ndarray] = None
    sigma_y: Optional[np.ndarray] = None
    tau_xy: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    kind: str = "incremental"

    def __len__(self):
        return np.size(self.z)

    @property
    def mises(self) -> np.ndarray:
        return np.abs(self.sigma_theta)


@dataclass(frozen=True)
class RadialExpansion:
    """Fourier coefficients ``g_l`` of ``(z - conj z)/conj z'`` on one circle (FFT order)."""

    rho: float
    g: np.ndarray

    def at(self, l):
        return self.g[np.asarray(l) % self.g.size]


def g_coeffs(bmap, rho: float, sample_count: int, check: bool = False, tol: float = 1e-10) -> RadialExpansion:
    if not bmap.alpha * (1 - 1e-12) <= rho <= 1 + 1e-12:
        raise ValueError("rho must lie in [alpha, 1]")
    n = int(sample_count)
    sigma = np.exp(2j * np.pi * np.arange(n) / n)
    z, dz, _ = bmap.derivatives(rho * sigma)
    g = (z - np.conj(z)) / np.conj(dz)
    if rho >= 1 - 1e-12:
        # the ground surface: z is real up to map error
        g = (2j * z.imag) / np.conj(dz)
    coeffs = np.fft.fft(g) / n
    if check:
        k = np.fft.fftfreq(n, 1.0 / n)
        peak = np.abs(coeffs).max()
        if peak > 0 and np.abs(coeffs[np.abs(k) >= 3 * n // 8]).max() > tol * peak:
            raise DecayFailure(f"g coefficients at rho = {rho} do not decay with {n} samples")
    return RadialExpansion(float(rho), coeffs)


def _powers(rho: float, ks: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``coeffs * rho**ks`` without spurious overflow on zero coefficients."""
    out = np.zeros_like(coeffs)
    nz = coeffs != 0
    out[nz] = coeffs[nz] * np.exp(np.clip(ks[nz] * np.log(rho), -745, 700))
    return out


def _series(coeffs: np.ndarray, ks: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """``sum_k coeffs_k sigma^k`` at arbitrary unit-modulus ``sigma``."""
    theta = np.angle(sigma)
    return np.exp(1j * np.outer(theta, ks)) @ coeffs


def _coupling(sol, A, bmap, rho, sample_count):
    """Fourier coefficients ``H_m`` of ``G conj(phi')`` on ``rho``, ``m = -M-2..M+2``."""
    M = sol.M
    ks = sol.k
    n = int(sample_count)
    ge = g_coeffs(bmap, rho, n)
    Ar = _powers(rho, ks, A)
    ms = np.arange(-M - 2, M + 3)
    # H_m = sum_k g_{m+k} conj(A_k rho^k)
    H = ge.at(ms[:, None] + ks[None, :]) @ np.conj(Ar)
    return ms, H


def _check_joints(bmap, rho, sigma):
    if abs(rho - 1.0) > 1e-9:
        return
    ang = np.angle(sigma)
    for t in (bmap.t1, bmap.t2):
        if np.any(np.abs(np.angle(np.exp(1j * (ang - np.angle(t))))) < JOINT_EXCLUSION):
            raise JointSingularity("evaluation too close to a joint image on the ground surface")


def incremental_at(
    sol: SeriesSolution,
    bmap,
    mat: Material,
    rho: float,
    theta,
    lanczos: bool = True,
    sample_count: Optional[int] = None,
) -> FieldSample:
    """Incremental (excavation-induced) stresses and displacements on one circle."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    sigma = np.exp(1j * theta)
    _check_joints(bmap, rho, sigma)
    n = sample_count or max(4096, 1 << (8 * sol.M - 1).bit_length())
    A, B = sol.A, sol.B
    ks = sol.k
    M = sol.M
    kappa = sol.kappa
    lk = sol.lanczos() if lanczos else np.ones(ks.size)
    zeta = rho * sigma
    z, dz, _ = bmap.derivatives(zeta)
    if np.any(dz == 0):
        raise ConformalitySingularity("z'(zeta) vanishes")

    # the coupling term is built from unfiltered coefficients; sigma factors
    # act on the modes of each evaluated series
    ms, H = _coupling(sol, A, bmap, rho, n)
    Hd = dict(zip(ms.tolist(), H))
    # traction series, modes m = -M-1..M-1 (the window the cavity rows enforce):
    # sum_m [A_m rho^m - B_m rho^(-m-2) + (m+1) H_{m+1} / rho] sigma^m
    tw = ks <= M - 1
    kt = ks[tw]
    Hshift = np.array([Hd[m + 1] for m in kt])
    tr = _powers(rho, kt, A[tw]) - _powers(rho, -kt - 2, B[tw]) + (kt + 1) * Hshift / rho
    srho_itau = _series(tr * lk[tw], kt, sigma) / dz
    phi1 = _series(_powers(rho, ks, A) * lk, ks, sigma)
    trace = 4.0 * np.real(phi1 / dz)
    s_rho = srho_itau.real
    tau = srho_itau.imag
    s_theta = trace - s_rho

    # displacement, modes k = -M..M
    kk = np.arange(-M, M + 1)
    kk = kk[kk != 0]
    Akm1 = A[kk - 1 + M + 1]
    Bkm1 = B[kk - 1 + M + 1]
    lkk = lk[kk + M + 1]
    dcoef = (kappa * _powers(rho, kk, Akm1) + _powers(rho, -kk, Bkm1)) / kk
    c0 = -np.sum(lkk * (kappa * Akm1 + Bkm1) / kk)
    a_m1, b_m1 = A[M], B[M]
    hm = (ms >= -M) & (ms <= M)
    disp = _series(dcoef * lkk, kk, sigma) + c0 + (kappa * a_m1 - b_m1) * np.log(rho)
    disp = disp - _series(H[hm] * lk[ms[hm] + M + 1], ms[hm], sigma)
    disp = disp / (2.0 * mat.G)

    sample = FieldSample(
        z=z, rho=np.full(theta.shape, float(rho)), theta=theta,
        sigma_rho=s_rho, sigma_theta=s_theta, tau_rhotheta=tau,
        u=disp.real, v=disp.imag, kind="incremental",
    )
    return to_rectangular(sample, bmap)


def initial_curvilinear_at(bmap, mat: Material, rho: float, theta) -> FieldSample:
    """Geostatic stress resolved on the curvilinear net of the annulus."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    sigma = np.exp(1j * theta)
    z, dz, _ = bmap.derivatives(rho * sigma)
    if abs(rho - 1.0) < 1e-12:
        zq = z.real + 0j  # the unit circle is the ground surface; drop map noise in y
    else:
        zq = np.where(z.imag > 0, z.real + 0j, z)
    sx, sy, txy = initial_stress_at(zq, mat)
    rot = (dz / np.conj(dz)) * sigma * sigma
    trace = sx + sy
    dev = (sy - sx + 2j * txy) * rot
    s_theta = 0.5 * (trace + dev.real)
    s_rho = 0.5 * (trace - dev.real)
    tau = 0.5 * dev.imag
    return FieldSample(
        z=z, rho=np.full(theta.shape, float(rho)), theta=theta,
        sigma_rho=s_rho, sigma_theta=s_theta, tau_rhotheta=tau,
        sigma_x=sx, sigma_y=sy, tau_xy=txy,
        u=np.zeros(theta.shape), v=np.zeros(theta.shape), kind="initial",
    )


def total_at(sol, bmap, mat: Material, rho: float, theta, lanczos: bool = True, sample_count=None) -> FieldSample:
    """Initial plus incremental stress; displacement is the incremental part."""
    inc = incremental_at(sol, bmap, mat, rho, theta, lanczos=lanczos, sample_count=sample_count)
    ini = initial_curvilinear_at(bmap, mat, rho, theta)
    tot = FieldSample(
        z=inc.z, rho=inc.rho, theta=inc.theta,
        sigma_rho=inc.sigma_rho + ini.sigma_rho,
        sigma_theta=inc.sigma_theta + ini.sigma_theta,
        tau_rhotheta=inc.tau_rhotheta + ini.tau_rhotheta,
        u=inc.u, v=inc.v, kind="total",
    )
    return to_rectangular(tot, bmap)


def to_rectangular(sample: FieldSample, bmap) -> FieldSample:
    """Fill the Cartesian components from the curvilinear ones."""
    sigma = np.exp(1j * sample.theta)
    dz = bmap.dz(sample.rho * sigma)
    if np.any(dz == 0):
        raise ConformalitySingularity("z'(zeta) vanishes")
    trace = sample.sigma_rho + sample.sigma_theta
    dev = (sample.sigma_theta - sample.sigma_rho + 2j * sample.tau_rhotheta) * np.conj(sigma * sigma) * (
        np.conj(dz) / dz
    )
    sy = 0.5 * (trace + dev.real)
    sx = 0.5 * (trace - dev.real)
    return replace(sample, sigma_x=sx, sigma_y=sy, tau_xy=0.5 * dev.imag)


# --------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class Profile:
    columns: tuple
    data: np.ndarray  # shape (n, len(columns))

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.data:
                w.writerow([f"{v:.17e}" for v in row])


def cavity_profile(sol, bmap, mat: Material, n_points: int = 720, lanczos: bool = True, sample_count=None) -> Profile:
    """Total stress and displacement around the cavity wall ``rho = alpha``."""
    theta = 2 * np.pi * np.arange(n_points) / n_points
    s = total_at(sol, bmap, mat, bmap.alpha, theta, lanczos=lanczos, sample_count=sample_count)
    data = np.column_stack([theta, s.z.real, s.z.imag, s.mises, s.sigma_rho, s.tau_rhotheta, s.u, s.v])
    return Profile(CAVITY_COLUMNS, data)


def ground_profile(sol, bmap, mat: Material, x_samples, lanczos: bool = True, sample_count=None) -> Profile:
    """Total stress and incremental displacement along the ground surface."""
    x = np.asarray(x_samples, dtype=float)
    zeta = bmap.zeta_of_z(x + 0j)
    theta = np.angle(zeta)
    s = total_at(sol, bmap, mat, 1.0, theta, lanczos=lanczos, sample_count=sample_count)
    data = np.column_stack([x, s.sigma_x, s.sigma_y, s.tau_xy, s.u, s.v])
    return Profile(GROUND_COLUMNS, data)


def field_at_points(sol, bmap, mat: Material, z, lanczos: bool = True, sample_count=None) -> FieldSample:
    """Total field at physical points ``z`` in the ground.

    Each point is mapped to the annulus and evaluated on its own circle, so
    the cost grows with the number of distinct radii.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag > 1e-12):
        raise OutsideDomain("points above the ground surface")
    zeta = np.atleast_1d(bmap.zeta_of_z(z))
    rho = np.abs(zeta)
    a = bmap.alpha
    if np.any(rho < a * (1 - 1e-9)) or np.any(rho > 1 + 1e-9):
        raise OutsideDomain("points inside the cavity")
    rho = np.clip(rho, a, 1.0)
    theta = np.angle(zeta)
    parts = {}
    for r in np.unique(rho):
        idx = np.flatnonzero(rho == r)
        parts[float(r)] = (idx, total_at(sol, bmap, mat, float(r), theta[idx], lanczos=lanczos, sample_count=sample_count))
    names = ("sigma_rho", "sigma_theta", "tau_rhotheta", "sigma_x", "sigma_y", "tau_xy", "u", "v")
    cols = {k: np.empty(z.size) for k in names}
    for idx, s in parts.values():
        for k in names:
            cols[k][idx] = getattr(s, k)
    return FieldSample(z=z, rho=rho, theta=theta, kind="total", **cols)
