"""Truncated Hermite-function calculus on a weighted regularity scale.

A state is a finite coefficient tensor over the orthonormal Hermite
functions of R^d, kept for total order ``|n| <= N``.  Regularity of
order ``q`` is measured by the weighted coefficient norm with weight
``(2|n| + d)**(2q)`` on squared coefficients.  This module provides the
coefficient-level operators the rest of the package builds on: dual
pairings, ladder derivatives, shifts realised as the matrix exponential
of the truncated derivative generator, embedding checks along a
three-norm scale, and left Riemann path integrals with a refinement
diagnostic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

HERMITE_TAG = "hermite"
GRID_TAG = "sine_grid"

__all__ = [
    "HERMITE_TAG",
    "GRID_TAG",
    "MultiIndex",
    "SpectralState",
    "DualField",
    "NormScale",
    "DEFAULT_SCALE",
    "EmbeddingReport",
    "PathIntegral",
    "norm_at",
    "pair",
    "derivative",
    "second_derivative",
    "translate",
    "check_embedding",
    "integrate_path",
    "hermite_values",
    "gauss_hermite_rule",
    "evaluate",
    "top_band_ratio",
    "hermite_weights",
    "order_grid",
    "simplex_indices",
    "state_to_json_dict",
    "state_from_json_dict",
]


class MultiIndex(tuple):
    """A d-tuple of non-negative integers; ``order`` is the entry sum."""

    def __new__(cls, entries):
        entries = tuple(int(e) for e in entries)
        if any(e < 0 for e in entries):
            raise ValueError(f"multi-index entries must be non-negative, got {entries}")
        if not entries:
            raise ValueError("multi-index needs at least one entry")
        return super().__new__(cls, entries)

    @property
    def order(self) -> int:
        return sum(self)


@lru_cache(maxsize=None)
def order_grid(d: int, n: int) -> np.ndarray:
    """Tensor of total orders |n| over the full index grid of shape (n+1,)^d."""
    out = np.indices((n + 1,) * d).sum(axis=0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def simplex_indices(d: int, n: int) -> np.ndarray:
    """All multi-indices with |n| <= n in lexicographic order, shape (count, d)."""
    rows = [i for i in itertools.product(range(n + 1), repeat=d) if sum(i) <= n]
    arr = np.array(rows, dtype=int).reshape(len(rows), d)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def hermite_weights(d: int, n: int, q: float) -> np.ndarray:
    """Norm weights (2|n| + d)^(2q) over the full (n+1,)^d index grid."""
    out = (2.0 * order_grid(d, n) + d) ** (2.0 * q)
    out.setflags(write=False)
    return out


def _mask_simplex(c: np.ndarray, d: int, n: int) -> np.ndarray:
    if d == 1:
        return c
    return np.where(order_grid(d, n) <= n, c, 0.0)


def _pad_tensor(c: np.ndarray, d: int, n_from: int, n_to: int) -> np.ndarray:
    if n_to < n_from:
        raise ValueError("cannot pad to a smaller order")
    if n_to == n_from:
        return c
    out = np.zeros((n_to + 1,) * d)
    out[tuple(slice(0, n_from + 1) for _ in range(d))] = c
    return out


class _CoeffTensor:
    """Shared storage behaviour for states and duals (frozen numpy tensor)."""

    def _init_tensor(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.N + 1,) * self.d:
            raise ValueError(
                f"coefficient tensor must have shape {(self.N + 1,) * self.d}, got {c.shape}"
            )
        c = _mask_simplex(c, self.d, self.N).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def coefficient(self, index) -> float:
        index = MultiIndex(index)
        if len(index) != self.d:
            raise ValueError("index dimension mismatch")
        if index.order > self.N:
            return 0.0
        return float(self.coeffs[index])

    def padded(self, n: int):
        if n == self.N:
            return self
        c = _pad_tensor(self.coeffs, self.d, self.N, n)
        return type(self)(self.d, n, c)

    def truncated(self, n: int):
        """Project onto |index| <= n (array resized to order min(N, n))."""
        if n >= self.N:
            return self
        sl = tuple(slice(0, n + 1) for _ in range(self.d))
        return type(self)(self.d, n, self.coeffs[sl])

    def _binary(self, other, sign):
        if not isinstance(other, type(self)):
            return NotImplemented
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        n = max(self.N, other.N)
        a = _pad_tensor(self.coeffs, self.d, self.N, n)
        b = _pad_tensor(other.coeffs, other.d, other.N, n)
        return type(self)(self.d, n, a + sign * b)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, scalar):
        return type(self)(self.d, self.N, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def l2(self) -> float:
        return float(np.linalg.norm(self.coeffs.ravel()))


@dataclass(frozen=True, eq=False)
class SpectralState(_CoeffTensor):
    """Coefficient tensor of a function over the Hermite basis, order <= N."""

    d: int
    N: int
    coeffs: np.ndarray
    basis_tag: str = HERMITE_TAG

    def __post_init__(self):
        if self.d < 1 or self.N < 0:
            raise ValueError("need d >= 1 and N >= 0")
        self._init_tensor()

    @classmethod
    def zero(cls, d: int, n: int) -> "SpectralState":
        return cls(d, n, np.zeros((n + 1,) * d))

    @classmethod
    def basis(cls, index, n: int | None = None) -> "SpectralState":
        """Unit coefficient on one multi-index (order defaults to |index|)."""
        index = MultiIndex(index)
        n = index.order if n is None else int(n)
        if n < index.order:
            raise ValueError("truncation below the requested index")
        c = np.zeros((n + 1,) * len(index))
        c[index] = 1.0
        return cls(len(index), n, c)


@dataclass(frozen=True, eq=False)
class DualField(_CoeffTensor):
    """Coefficients of a continuous linear functional against the basis."""

    d: int
    N: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.d < 1 or self.N < 0:
            raise ValueError("need d >= 1 and N >= 0")
        self._init_tensor()

    @classmethod
    def zero(cls, d: int, n: int = 0) -> "DualField":
        return cls(d, n, np.zeros((n + 1,) * d))

    @classmethod
    def dirac(cls, z, n: int) -> "DualField":
        """Point-evaluation functional truncated at order n: entries h_k(z_i)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        d = z.size
        tables = [hermite_values(n, z[i]) for i in range(d)]
        c = reduce(np.multiply.outer, tables)
        return cls(d, n, _mask_simplex(c, d, n))

    @classmethod
    def constant(cls, d: int, n: int, value: float = 1.0) -> "DualField":
        """Integration functional y -> value * integral of y."""
        marg = _basis_integrals(n)
        c = reduce(np.multiply.outer, [marg] * d) * float(value)
        return cls(d, n, _mask_simplex(c, d, n))


@lru_cache(maxsize=None)
def _basis_integrals(n: int) -> np.ndarray:
    """Integrals of the first n+1 basis functions over the real line.

    Integrating the ladder derivative identity gives the two-step
    recurrence I_{k+1} = sqrt(k / (k+1)) I_{k-1} with I_0 = sqrt(2) pi^(1/4)
    and I_1 = 0.
    """
    out = np.zeros(n + 1)
    out[0] = math.sqrt(2.0) * math.pi ** 0.25
    for k in range(1, n):
        out[k + 1] = math.sqrt(k / (k + 1.0)) * out[k - 1]
    out.setflags(write=False)
    return out


def _require_hermite(state, opname: str):
    tag = getattr(state, "basis_tag", None)
    if tag != HERMITE_TAG:
        raise TypeError(f"{opname} is defined for hermite states, got basis_tag={tag!r}")


# -- norms and pairings -----------------------------------------------------


def norm_at(state: SpectralState, q: float) -> float:
    """Weighted coefficient norm of regularity order q."""
    _require_hermite(state, "norm_at")
    w = hermite_weights(state.d, state.N, q)
    return float(np.sqrt(np.sum(w * state.coeffs**2)))


def pair(dual: DualField, state: SpectralState) -> float:
    """Duality pairing: plain coefficient contraction, bilinear and symmetric."""
    _require_hermite(state, "pair")
    if dual.d != state.d:
        raise ValueError(f"dimension mismatch: dual d={dual.d}, state d={state.d}")
    n = max(dual.N, state.N)
    a = _pad_tensor(dual.coeffs, dual.d, dual.N, n)
    b = _pad_tensor(state.coeffs, state.d, state.N, n)
    return float(np.sum(a * b))


@dataclass(frozen=True)
class NormScale:
    """Three regularity orders, strong >= mid >= weak.

    States live at the strong order, projections and noise integrands use
    the mid order, drift values are controlled at the weak order.
    """

    q_strong: float
    q_mid: float
    q_weak: float

    def __post_init__(self):
        if not (self.q_strong >= self.q_mid >= self.q_weak):
            raise ValueError(
                f"norm scale must be ordered strong >= mid >= weak, got "
                f"({self.q_strong}, {self.q_mid}, {self.q_weak})"
            )

    @classmethod
    def half_step(cls, base: float) -> "NormScale":
        """The ladder (base + 1, base + 1/2, base)."""
        return cls(base + 1.0, base + 0.5, base)


DEFAULT_SCALE = NormScale.half_step(0.0)


@dataclass(frozen=True)
class EmbeddingReport:
    ratios: np.ndarray  # (n_states, 2): weak/mid and mid/strong norm ratios
    max_ratio: float
    passed: bool


def check_embedding(scale: NormScale, states, tol: float = 1e-12) -> EmbeddingReport:
    """Verify the norm ordering weak <= mid <= strong on concrete states.

    The scale has embedding constant one, so every ratio must be <= 1 up
    to rounding slack.
    """
    rows = []
    for s in states:
        nw = norm_at(s, scale.q_weak)
        nm = norm_at(s, scale.q_mid)
        ns = norm_at(s, scale.q_strong)
        rows.append(
            (nw / nm if nm > 0.0 else 0.0, nm / ns if ns > 0.0 else 0.0)
        )
    ratios = np.array(rows).reshape(len(rows), 2)
    max_ratio = float(ratios.max()) if len(rows) else 0.0
    return EmbeddingReport(ratios, max_ratio, bool(max_ratio <= 1.0 + tol))


# -- differential operators -------------------------------------------------


def derivative(state: SpectralState, axis: int = 0) -> SpectralState:
    """Partial derivative along one axis via the ladder recurrence.

    Output truncation is N + 1; the top band is kept, not dropped.
    """
    _require_hermite(state, "derivative")
    d, n = state.d, state.N
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for d={d}")
    up, down = _ladder_factors(n)
    if d == 1:
        c = state.coeffs
        out = np.zeros(n + 2)
        out[:n] = up[:n] * c[1:]
        out[1:] -= down * c
        return SpectralState(1, n + 1, out)
    src = _pad_tensor(state.coeffs, d, n, n + 1)
    out = np.zeros_like(src)
    a = np.moveaxis(src, axis, 0)
    o = np.moveaxis(out, axis, 0)
    shape = (-1,) + (1,) * (d - 1)
    o[:-1] += up.reshape(shape) * a[1:]
    o[1:] -= down.reshape(shape) * a[:-1]
    return SpectralState(d, n + 1, out)


@lru_cache(maxsize=None)
def _ladder_factors(n: int):
    m = np.arange(n + 2)
    up = np.sqrt((m[:-1] + 1.0) / 2.0)
    down = np.sqrt(m[1:] / 2.0)
    up.setflags(write=False)
    down.setflags(write=False)
    return up, down


def second_derivative(state: SpectralState, axes=(0, 0)) -> SpectralState:
    """Mixed second derivative; axes are applied in sorted order so the
    (i, j) and (j, i) results are identical arrays."""
    i, j = sorted(int(a) for a in axes)
    return derivative(derivative(state, i), j)


@lru_cache(maxsize=None)
def _shift_eig(n: int):
    """Eigendecomposition of i * (derivative generator) at order n.

    The truncated generator is skew-symmetric and banded, so i*D is
    Hermitian; the shift group exp(-x D) is then a unitary conjugation
    with pure phases, which keeps repeated shifts well conditioned.
    """
    m = np.arange(n)
    dmat = np.zeros((n + 1, n + 1))
    up = np.sqrt((m + 1) / 2.0)
    dmat[m, m + 1] = up
    dmat[m + 1, m] = -up
    evals, evecs = np.linalg.eigh(1j * dmat)
    evals.setflags(write=False)
    return evals, evecs


def translate(state: SpectralState, shift) -> SpectralState:
    """Shift the represented function by ``shift`` (argument translation).

    Implemented as exp(-sum_i x_i D_i) with D_i the truncated derivative
    generator; a zero shift returns the input unchanged.  For d >= 2 the
    result is projected back onto the total-order simplex.
    """
    _require_hermite(state, "translate")
    x = np.atleast_1d(np.asarray(shift, dtype=float))
    if x.shape != (state.d,):
        raise ValueError(f"shift must have {state.d} entries, got shape {x.shape}")
    if np.all(x == 0.0):
        return state
    evals, evecs = _shift_eig(state.N)
    if state.d == 1:
        phase = np.exp(1j * x[0] * evals)
        c = evecs @ (phase * (state.coeffs @ evecs.conj()))
        return SpectralState(1, state.N, c.real)
    c = state.coeffs.astype(complex)
    for axis in range(state.d):
        if x[axis] == 0.0:
            continue
        phase = np.exp(1j * x[axis] * evals)
        a = np.moveaxis(c, axis, 0)
        flat = a.reshape(state.N + 1, -1)
        flat = evecs @ (phase[:, None] * (evecs.conj().T @ flat))
        c = np.moveaxis(flat.reshape(a.shape), 0, axis)
    return SpectralState(state.d, state.N, _mask_simplex(c.real, state.d, state.N))


def top_band_ratio(state: SpectralState, q: float = 0.0) -> float:
    """Relative coefficient mass on the top-order band |n| == N.

    Used as a truncation-quality proxy: a represented function whose top
    band carries visible mass is not resolved at this truncation.
    """
    _require_hermite(state, "top_band_ratio")
    w = hermite_weights(state.d, state.N, q)
    total = float(np.sqrt(np.sum(w * state.coeffs**2)))
    if total == 0.0:
        return 0.0
    band = order_grid(state.d, state.N) == state.N
    top = float(np.sqrt(np.sum((w * state.coeffs**2)[band])))
    return top / total


# -- evaluation and quadrature ---------------------------------------------


def hermite_values(n_max: int, x) -> np.ndarray:
    """Table of orthonormal Hermite function values, shape (n_max+1,) + x.shape.

    Uses the stable three-term recurrence on the normalised functions.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_max + 1,) + x.shape)
    h0 = np.pi ** (-0.25) * np.exp(-0.5 * x * x)
    out[0] = h0
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * h0
    for k in range(1, n_max):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1.0)) * out[k - 1]
    return out


@lru_cache(maxsize=None)
def gauss_hermite_rule(n_nodes: int):
    """Gauss-Hermite nodes with weights for plain dx integration.

    The returned weights absorb the Gaussian factor (Christoffel form
    1 / sum_k h_k(t)^2), which stays finite for large rules where the
    textbook weights underflow.  Exact for products of basis functions
    with combined degree <= 2*n_nodes - 1.
    """
    nodes, _ = np.polynomial.hermite.hermgauss(n_nodes)
    table = hermite_values(n_nodes - 1, nodes)
    weights = 1.0 / np.sum(table * table, axis=0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def evaluate(state: SpectralState, points) -> np.ndarray:
    """Pointwise values of the represented function.

    For d == 1 ``points`` is any float array; for d >= 2 it must have
    trailing dimension d.
    """
    _require_hermite(state, "evaluate")
    pts = np.asarray(points, dtype=float)
    if state.d == 1:
        x = np.atleast_1d(pts)
        table = hermite_values(state.N, x.ravel())
        vals = state.coeffs @ table
        return vals.reshape(x.shape) if pts.ndim else float(vals[0])
    if pts.shape[-1] != state.d:
        raise ValueError(f"points must have trailing dimension {state.d}")
    flat_pts = pts.reshape(-1, state.d)
    vals = np.empty(flat_pts.shape[0])
    for k, p in enumerate(flat_pts):
        acc = state.coeffs
        for axis in range(state.d):
            acc = np.tensordot(hermite_values(state.N, p[axis]), acc, axes=(0, 0))
        vals[k] = acc
    return vals.reshape(pts.shape[:-1])


# -- path integration -------------------------------------------------------


@dataclass(frozen=True)
class PathIntegral:
    value: SpectralState
    refinement_residual_mid: float | None
    refinement_residual_weak: float | None


def integrate_path(samples, dt: float, scale: NormScale = DEFAULT_SCALE) -> PathIntegral:
    """Left Riemann integral of a sampled path of states.

    ``samples[k]`` is the value at t = k*dt; the integral covers
    [0, len(samples)*dt).  When the sample count is even, the residual
    against the stride-2 coarsening is reported in the mid and weak
    norms so the refinement behaviour along the scale is observable.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("integrate_path needs at least one sample")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    _require_hermite(samples[0], "integrate_path")
    d = samples[0].d
    for s in samples:
        _require_hermite(s, "integrate_path")
        if s.d != d:
            raise ValueError("samples must share the same dimension")
    n = max(s.N for s in samples)
    acc = np.zeros((n + 1,) * d)
    for s in samples:
        acc += _pad_tensor(s.coeffs, d, s.N, n)
    fine = acc * dt
    value = SpectralState(d, n, fine)
    res_mid = res_weak = None
    if len(samples) % 2 == 0:
        coarse = np.zeros_like(acc)
        for s in samples[::2]:
            coarse += _pad_tensor(s.coeffs, d, s.N, n)
        resid = SpectralState(d, n, fine - coarse * (2.0 * dt))
        res_mid = norm_at(resid, scale.q_mid)
        res_weak = norm_at(resid, scale.q_weak)
    return PathIntegral(value, res_mid, res_weak)


# -- serialization ----------------------------------------------------------


def state_to_json_dict(obj) -> dict:
    """Canonical JSON form: lexicographic multi-index entries including zeros."""
    idx = simplex_indices(obj.d, obj.N)
    entries = [[list(map(int, row)), float(obj.coeffs[tuple(row)])] for row in idx]
    tag = getattr(obj, "basis_tag", HERMITE_TAG)
    return {"d": obj.d, "N": obj.N, "basis_tag": tag, "entries": entries}


def state_from_json_dict(data: dict):
    tag = data.get("basis_tag", HERMITE_TAG)
    if tag != HERMITE_TAG:
        raise ValueError(f"expected a hermite state, got basis_tag={tag!r}")
    d, n = int(data["d"]), int(data["N"])
    c = np.zeros((n + 1,) * d)
    for row, val in data["entries"]:
        c[tuple(int(r) for r in row)] = float(val)
    return SpectralState(d, n, c)
