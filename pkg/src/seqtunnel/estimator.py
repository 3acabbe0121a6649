"""scikit-learn style facade over the mapping and solve pipeline.

``X`` passed to ``fit`` is a stage contour: a :class:`StageBoundary` or the
index of a built-in benchmark stage. Points passed to ``transform`` and
``predict`` are complex arrays or ``(n, 2)`` real arrays of ``(x, y)``.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .conformal import BidirectionalMap, MapOptions, build_map
from .fields import cavity_profile, field_at_points, ground_profile
from .geometry import GroundSplit, Material, StageBoundary, benchmark_stage
from .pipeline import SolverOptions, solve_stage
from .verify import Thresholds, verify_stage

PREDICT_COLUMNS = ("sigma_x_kpa", "sigma_y_kpa", "tau_xy_kpa", "u_m", "v_m")


def check_boundary(X) -> StageBoundary:
    """Accept a contour or a benchmark stage index."""
    if isinstance(X, StageBoundary):
        return X
    if isinstance(X, (int, np.integer)) and not isinstance(X, bool):
        return benchmark_stage(int(X))
    raise TypeError(f"expected a StageBoundary or a benchmark stage index, got {type(X).__name__}")


def check_points(Z) -> np.ndarray:
    """Complex 1-d array from complex input or ``(n, 2)`` coordinates."""
    a = np.asarray(Z)
    if np.iscomplexobj(a):
        out = a.astype(complex).ravel()
    else:
        a = np.asarray(a, dtype=float)
        if a.ndim == 1 and a.size == 2:
            a = a[None, :]
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValueError("points must be complex or shaped (n, 2)")
        out = a[:, 0] + 1j * a[:, 1]
    if not np.all(np.isfinite(out)):
        raise ValueError("points must be finite")
    return out


class ConformalMapper(TransformerMixin, BaseEstimator):
    """Map the ground with a cavity onto the annulus ``alpha <= |zeta| <= 1``.

    Parameters
    ----------
    beta, w0_factor, K0, K1, k0, k1, n_ground
        See :class:`MapOptions`.
    z_c, w_c : complex or None
        Interior normalisation point; ``None`` uses the cavity centroid.
    x0 : float
        Half-width of the free ground segment.

    Attributes
    ----------
    map_ : BidirectionalMap
    alpha_ : float
    epsilon_ : float
        Round-trip boundary error in metres.
    """

    def __init__(self, beta=5.0, z_c=None, w_c=None, w0_factor=0.9, K0=2.2, K1=1.5, k0=2.2, k1=1.5,
                 n_ground=360, x0=10.0):
        self.beta = beta
        self.z_c = z_c
        self.w_c = w_c
        self.w0_factor = w0_factor
        self.K0 = K0
        self.K1 = K1
        self.k0 = k0
        self.k1 = k1
        self.n_ground = n_ground
        self.x0 = x0

    def map_options(self) -> MapOptions:
        return MapOptions(
            beta=self.beta, z_c=self.z_c, w_c=self.w_c, w0_factor=self.w0_factor,
            K0=self.K0, K1=self.K1, k0=self.k0, k1=self.k1, n_ground=self.n_ground,
        )

    def fit(self, X, y=None):
        boundary = check_boundary(X)
        self.boundary_ = boundary
        self.map_: BidirectionalMap = build_map(boundary, GroundSplit(self.x0), self.map_options())
        self.alpha_ = self.map_.alpha
        self.epsilon_ = self.map_.epsilon
        self.joint_images_ = (self.map_.t1, self.map_.t2)
        return self

    def transform(self, X):
        """Physical points to annulus points."""
        check_is_fitted(self, "map_")
        return np.asarray(self.map_.zeta_of_z(check_points(X)))

    def inverse_transform(self, X):
        """Annulus points to physical points."""
        check_is_fitted(self, "map_")
        return np.asarray(self.map_.z_of_zeta(check_points(X)))

    def score(self, X=None, y=None) -> float:
        """Negative round-trip error, so larger is better."""
        check_is_fitted(self, "map_")
        return -float(self.epsilon_)


class TunnelSolver(BaseEstimator):
    """Excavation-induced and total fields for one stage.

    Parameters
    ----------
    gamma, kx, E, nu : float
        Unit weight (kN/m^3), lateral coefficient, modulus (kPa), Poisson ratio.
    x0 : float
        Half-width of the free ground segment (m).
    M : int
        Series truncation.
    mapper : ConformalMapper or None
        Mapping settings; a default mapper is used when ``None``.

    Attributes
    ----------
    solution_ : StageSolution
    coef_ : ndarray
        Unknown density coefficients ``f_{-M..M}``.
    n_iter_ : int
    """

    def __init__(self, gamma=20.0, kx=0.8, E=20e3, nu=0.3, x0=10.0, M=250, tol=1e-12, max_iter=200,
                 sample_count=None, lanczos=True, method="auto", mapper: Optional[ConformalMapper] = None):
        self.gamma = gamma
        self.kx = kx
        self.E = E
        self.nu = nu
        self.x0 = x0
        self.M = M
        self.tol = tol
        self.max_iter = max_iter
        self.sample_count = sample_count
        self.lanczos = lanczos
        self.method = method
        self.mapper = mapper

    def _material(self) -> Material:
        return Material(gamma=self.gamma, kx=self.kx, E=self.E, nu=self.nu)

    def _solver_options(self) -> SolverOptions:
        return SolverOptions(M=self.M, tol=self.tol, max_iter=self.max_iter, sample_count=self.sample_count,
                             lanczos=self.lanczos, method=self.method)

    def fit(self, X, y=None):
        boundary = check_boundary(X)
        mapper = self.mapper if self.mapper is not None else ConformalMapper(x0=self.x0)
        if getattr(mapper, "x0", self.x0) != self.x0:
            raise ValueError("mapper.x0 differs from the solver x0")
        fitted = hasattr(mapper, "map_") and mapper.boundary_ is boundary
        bmap = mapper.map_ if fitted else None
        self.solution_ = solve_stage(boundary, GroundSplit(self.x0), self._material(), mapper.map_options(),
                                     self._solver_options(), bmap=bmap)
        self.coef_ = self.solution_.series.f
        self.n_iter_ = self.solution_.series.iterations
        return self

    def predict(self, X) -> np.ndarray:
        """Columns ``sigma_x, sigma_y, tau_xy`` (kPa, total) and ``u, v`` (m, incremental)."""
        check_is_fitted(self, "solution_")
        st = self.solution_
        s = field_at_points(st.series, st.bmap, st.material, check_points(X), lanczos=self.lanczos)
        return np.column_stack([s.sigma_x, s.sigma_y, s.tau_xy, s.u, s.v])

    def cavity_profile(self, n_points: int = 720):
        check_is_fitted(self, "solution_")
        st = self.solution_
        return cavity_profile(st.series, st.bmap, st.material, n_points, lanczos=self.lanczos)

    def ground_profile(self, x):
        check_is_fitted(self, "solution_")
        st = self.solution_
        return ground_profile(st.series, st.bmap, st.material, x, lanczos=self.lanczos)

    def verify(self, thresholds: Optional[Thresholds] = None):
        check_is_fitted(self, "solution_")
        return verify_stage(self.solution_, thresholds)
