"""Charts for finite-dimensional manifolds of states and their tangent data.

A parametrization maps an m-dimensional chart box into the state space.
Tangent frames are the (possibly finite-difference) chart derivatives,
held at the geometry's working order; projections onto the frame use the
mid inner product, and whatever a frame cannot match, including spectral
mass above the working order, lands in the reported normal residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hermite import SpectralState, derivative, second_derivative, translate

__all__ = [
    "DegenerateChartError",
    "Parametrization",
    "TangentFrame",
    "ProjectionResult",
    "DistanceResult",
    "jacobian",
    "tangent_coordinates",
    "bracket",
    "distance_to_manifold",
    "translation_chart",
    "linear_span_chart",
]

FD_STEP_JACOBIAN = 1e-4
FD_STEP_HESSIAN = 1e-3


class DegenerateChartError(RuntimeError):
    """Chart derivative lost full column rank at the probed point."""


@dataclass
class Parametrization:
    """Smooth map from an m-dimensional box of chart coordinates to states.

    ``eval`` is required; ``jac`` and ``hess`` are optional analytic
    derivatives (list of m column states, and m x m nested list of
    states).  When absent, central finite differences are used.
    """

    m: int
    domain: np.ndarray  # shape (m, 2) rows (lo, hi)
    eval: Callable[[np.ndarray], object]
    jac: Optional[Callable[[np.ndarray], list]] = None
    hess: Optional[Callable[[np.ndarray], list]] = None
    kind_tag: str = "custom"
    name: str = ""

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=float).reshape(self.m, 2)
        if np.any(dom[:, 0] >= dom[:, 1]):
            raise ValueError("chart domain rows must satisfy lo < hi")
        self.domain = dom

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.domain[:, 0] + margin)
            and np.all(x <= self.domain[:, 1] - margin)
        )


@dataclass
class ProjectionResult:
    coords: np.ndarray
    residual: float  # mid norm of the component off the frame span
    rel_residual: float  # residual / field norm, with 0/0 -> 0
    field_norm: float
    spill: float  # relative mass of the field above the working order


@dataclass
class TangentFrame:
    """Chart derivative columns at one point, ready for mid-norm projections."""

    x: np.ndarray
    columns: list
    geometry: object
    base_order: object
    gram: np.ndarray
    singular_values: np.ndarray
    cond: float
    warnings: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return len(self.columns)

    def _factors(self, order):
        got = self._cache.get(order)
        if got is not None:
            return got
        geo = self.geometry
        w = geo.weight_vector(order)
        sw = np.sqrt(w)
        cols = np.stack([geo.flat(c, order) for c in self.columns], axis=1)
        b = sw[:, None] * cols
        if b.shape[1] == 1 and (nrm := np.linalg.norm(b[:, 0])) > 0.0:
            q, r = b / nrm, np.array([[nrm]])
        else:
            q, r = np.linalg.qr(b)
        self._cache[order] = (sw, b, q, r)
        return self._cache[order]

    def project(self, field_state) -> ProjectionResult:
        geo = self.geometry
        order = geo.embed_order([field_state] + self.columns)
        sw, b, q, r = self._factors(order)
        f = geo.flat(field_state, order)
        fw = sw * f
        field_norm = float(np.linalg.norm(fw))
        spill = geo.spill_ratio(field_state)
        if field_norm == 0.0:
            return ProjectionResult(np.zeros(self.m), 0.0, 0.0, 0.0, spill)
        coords = np.linalg.solve(r, q.T @ fw)
        resid_vec = fw - b @ coords
        residual = float(np.linalg.norm(resid_vec))
        return ProjectionResult(coords, residual, residual / field_norm, field_norm, spill)


def _fd_columns(param: Parametrization, x: np.ndarray, h: float) -> list:
    cols = []
    for k in range(param.m):
        e = np.zeros(param.m)
        e[k] = h
        plus = param.eval(x + e)
        minus = param.eval(x - e)
        cols.append((plus - minus) * (0.5 / h))
    return cols


def jacobian(
    param: Parametrization,
    x,
    geometry,
    *,
    mode: str = "auto",
    h_fd: float = FD_STEP_JACOBIAN,
    rank_floor: float = 1e-10,
    cond_warn: float = 1e12,
) -> TangentFrame:
    """Tangent frame at a chart point.

    ``mode`` is "auto" (analytic when the chart supplies it), "analytic",
    or "fd".  Columns are truncated to the geometry's working order; the
    frame raises for rank collapse and attaches a warning when the Gram
    matrix is badly conditioned.
    """
    x = np.asarray(x, dtype=float).reshape(param.m)
    if mode == "analytic" and param.jac is None:
        raise ValueError("chart has no analytic jacobian")
    use_analytic = param.jac is not None if mode == "auto" else mode == "analytic"
    raw = param.jac(x) if use_analytic else _fd_columns(param, x, h_fd)
    cols = [geometry.truncate_to_work(c) for c in raw]
    order = geometry.embed_order(cols)
    w = geometry.weight_vector(order)
    sw = np.sqrt(w)
    b = sw[:, None] * np.stack([geometry.flat(c, order) for c in cols], axis=1)
    if b.shape[1] == 1:
        sv = np.array([np.linalg.norm(b[:, 0])])
    else:
        sv = np.linalg.svd(b, compute_uv=False)
    if sv[-1] <= rank_floor * max(1.0, sv[0]):
        raise DegenerateChartError(
            f"chart derivative is rank deficient at x={x.tolist()}: "
            f"singular values {sv.tolist()}"
        )
    gram = b.T @ b
    cond = float((sv[0] / sv[-1]) ** 2)
    warnings = []
    if cond > cond_warn:
        warnings.append(f"ill-conditioned tangent Gram matrix at x={x.tolist()}: cond={cond:.3e}")
    return TangentFrame(x, cols, geometry, order, gram, sv, cond, warnings)


def tangent_coordinates(frame: TangentFrame, field_state) -> ProjectionResult:
    """Least-squares coordinates of a field value on the frame, mid norm."""
    return frame.project(field_state)


def _hessian_states(param: Parametrization, x: np.ndarray, h: float) -> list:
    if param.hess is not None:
        return param.hess(x)
    m = param.m
    base = param.eval(x)
    out = [[None] * m for _ in range(m)]
    for k in range(m):
        ek = np.zeros(m)
        ek[k] = h
        out[k][k] = (param.eval(x + ek) + param.eval(x - ek) - 2.0 * base) * (1.0 / h**2)
        for l in range(k + 1, m):
            el = np.zeros(m)
            el[l] = h
            mixed = (
                param.eval(x + ek + el)
                - param.eval(x + ek - el)
                - param.eval(x - ek + el)
                + param.eval(x - ek - el)
            ) * (0.25 / h**2)
            out[k][l] = mixed
            out[l][k] = mixed
    return out


def bracket(
    param: Parametrization,
    x,
    coords_a: np.ndarray,
    coords_b: np.ndarray,
    *,
    h_fd: float = FD_STEP_HESSIAN,
) -> object:
    """Second chart derivative contracted with two tangent coordinate vectors.

    Symmetric and bilinear in the coordinate arguments; uses the analytic
    chart Hessian when available, otherwise central differences.
    """
    x = np.asarray(x, dtype=float).reshape(param.m)
    ca = np.asarray(coords_a, dtype=float).reshape(param.m)
    cb = np.asarray(coords_b, dtype=float).reshape(param.m)
    hmat = _hessian_states(param, x, h_fd)
    out = None
    for k in range(param.m):
        term = hmat[k][k] * (ca[k] * cb[k])
        out = term if out is None else out + term
    for k in range(param.m):
        for l in range(k + 1, param.m):
            weight = ca[k] * cb[l] + ca[l] * cb[k]
            out = out + hmat[k][l] * weight
    return out


@dataclass
class DistanceResult:
    x: np.ndarray
    distance: float
    converged: bool
    iterations: int


def distance_to_manifold(
    param: Parametrization,
    y,
    x0,
    geometry,
    *,
    max_iter: int = 50,
    step_tol: float = 1e-10,
    h_fd: float = FD_STEP_JACOBIAN,
) -> DistanceResult:
    """Mid-norm distance from a state to the chart image via Gauss-Newton.

    Deterministic damped iteration: full step, halved until the cost
    decreases, capped backtracking.  Hitting the iteration cap without
    meeting the step tolerance is reported as non-converged.
    """
    x = np.asarray(x0, dtype=float).reshape(param.m).copy()

    def cost_at(xp):
        st = param.eval(xp)
        n = geometry.norm_diff(st, y)
        return st, 0.5 * n * n, n

    state_x, cost, dist = cost_at(x)
    converged = False
    iterations = 0
    for it in range(max_iter):
        iterations = it + 1
        try:
            frame = jacobian(param, x, geometry, h_fd=h_fd)
        except DegenerateChartError:
            break
        order = geometry.embed_order(frame.columns + [state_x, y])
        sw, b, q, r = frame._factors(order)
        fw = sw * (geometry.flat(state_x, order) - geometry.flat(y, order))
        step = -np.linalg.solve(r, q.T @ fw)
        if float(np.linalg.norm(step)) <= step_tol * (1.0 + float(np.linalg.norm(x))):
            # take the sub-tolerance step too when it helps; otherwise the
            # reported distance carries an O(step_tol) offset
            st_trial, c_trial, d_trial = cost_at(x + step)
            if c_trial < cost:
                x, state_x, cost, dist = x + step, st_trial, c_trial, d_trial
            converged = True
            break
        accepted = False
        alpha = 1.0
        for _ in range(30):
            trial = x + alpha * step
            st_trial, c_trial, d_trial = cost_at(trial)
            if c_trial < cost:
                x, state_x, cost, dist = trial, st_trial, c_trial, d_trial
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # full stall: cost differences are below float resolution, so
            # treat the iterate as converged when the pending step is tiny
            stall_tol = math.sqrt(np.finfo(float).eps)
            converged = bool(
                np.linalg.norm(step) <= stall_tol * (1.0 + float(np.linalg.norm(x)))
            )
            break
    return DistanceResult(x, dist, converged, iterations)


# -- built-in charts ---------------------------------------------------------


def translation_chart(profile: SpectralState, domain) -> Parametrization:
    """Chart x -> profile shifted by x, with analytic ladder derivatives.

    The tangent columns are minus the partial derivatives of the shifted
    profile, and the chart Hessian is the matrix of second derivatives.
    """
    d = profile.d
    cache: dict = {}

    def _base(x):
        # memoize the shifted profile; eval/jac/hess at one point share it
        key = tuple(float(v) for v in np.atleast_1d(x))
        got = cache.get(key)
        if got is None:
            if len(cache) >= 256:
                cache.clear()
            got = cache[key] = translate(profile, x)
        return got

    def _eval(x):
        return _base(x)

    def _jac(x):
        base = _base(x)
        return [-derivative(base, axis=k) for k in range(d)]

    def _hess(x):
        base = _base(x)
        out = [[None] * d for _ in range(d)]
        for k in range(d):
            for l in range(k, d):
                s = second_derivative(base, (k, l))
                out[k][l] = s
                out[l][k] = s
        return out

    return Parametrization(
        m=d, domain=domain, eval=_eval, jac=_jac, hess=_hess,
        kind_tag="translation", name="translation",
    )


def linear_span_chart(vectors: Sequence, domain) -> Parametrization:
    """Chart x -> sum_k x_k v_k with exact constant derivatives."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("linear span needs at least one vector")
    m = len(vectors)

    def _eval(x):
        out = vectors[0] * float(x[0])
        for k in range(1, m):
            out = out + vectors[k] * float(x[k])
        return out

    def _jac(x):
        return list(vectors)

    def _hess(x):
        zero = vectors[0] * 0.0
        return [[zero for _ in range(m)] for _ in range(m)]

    return Parametrization(
        m=m, domain=domain, eval=_eval, jac=_jac, hess=_hess,
        kind_tag="linear_span", name="linear_span",
    )
