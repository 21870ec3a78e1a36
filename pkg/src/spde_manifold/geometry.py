"""Flat coefficient views and inner products shared by charts and checkers.

A geometry binds a state family to one concrete Hilbert inner product
(the mid norm of the scale for spectral states, discrete L2 for grid
states) and to a declared working order.  Differential operators push
spectral states above the working order; that out-of-band mass cannot
be matched by any tangent frame held at the working order, so it is
tracked explicitly as "spill" rather than silently dropped.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import GridState
from .hermite import (
    DEFAULT_SCALE,
    NormScale,
    SpectralState,
    hermite_weights,
    order_grid,
)

__all__ = ["HermiteGeometry", "GridGeometry"]


class HermiteGeometry:
    """Spectral states of dimension d at working order N under the mid norm."""

    kind = "hermite"

    def __init__(self, d: int, work_order: int, scale: NormScale = DEFAULT_SCALE):
        self.d = int(d)
        self.work_order = int(work_order)
        self.scale = scale

    def embed_order(self, states) -> int:
        return max([self.work_order] + [s.N for s in states])

    def flat(self, state: SpectralState, order: int | None = None) -> np.ndarray:
        order = state.N if order is None else order
        return state.padded(order).coeffs.ravel()

    def weight_vector(self, order: int, q: float | None = None) -> np.ndarray:
        q = self.scale.q_mid if q is None else q
        return hermite_weights(self.d, order, q).ravel()

    def inband_mask(self, order: int) -> np.ndarray:
        return (order_grid(self.d, order) <= self.work_order).ravel()

    def norm_mid(self, state: SpectralState) -> float:
        f = state.coeffs.ravel()
        w = self.weight_vector(state.N)
        return math.sqrt(max(float(np.sum(w * f * f)), 0.0))

    def inner(self, u: SpectralState, v: SpectralState) -> float:
        order = max(u.N, v.N)
        w = self.weight_vector(order)
        return float(np.sum(w * self.flat(u, order) * self.flat(v, order)))

    def norm_diff(self, u: SpectralState, v: SpectralState) -> float:
        """norm_mid(u - v) without building the intermediate state."""
        if u.N == v.N:
            f = (u.coeffs - v.coeffs).ravel()
            w = self.weight_vector(u.N)
            return math.sqrt(max(float(np.sum(w * f * f)), 0.0))
        return self.norm_mid(u - v)

    def spill_ratio(self, state: SpectralState) -> float:
        """Relative mid-norm mass beyond the working order."""
        if state.N <= self.work_order:
            return 0.0
        f = state.coeffs.ravel()
        w = self.weight_vector(state.N)
        total = float(np.sum(w * f * f))
        if total == 0.0:
            return 0.0
        out = ~self.inband_mask(state.N)
        return math.sqrt(float(np.sum((w * f * f)[out])) / total)

    def truncate_to_work(self, state: SpectralState) -> SpectralState:
        return state.truncated(self.work_order)

    def state_from_flat(self, vec: np.ndarray, order: int) -> SpectralState:
        return SpectralState(self.d, order, vec.reshape((order + 1,) * self.d))

    def zero_state(self, order: int | None = None) -> SpectralState:
        return SpectralState.zero(self.d, self.work_order if order is None else order)


class GridGeometry:
    """Grid states of M interior points under the discrete L2 inner product."""

    kind = "grid"

    def __init__(self, m: int):
        self.M = int(m)
        self.h = 1.0 / (self.M + 1)
        self.work_order = None

    def embed_order(self, states) -> None:
        for s in states:
            if s.M != self.M:
                raise ValueError("grid size mismatch")
        return None

    def flat(self, state: GridState, order=None) -> np.ndarray:
        return state.values

    def weight_vector(self, order=None, q=None) -> np.ndarray:
        return np.full(self.M, self.h)

    def inband_mask(self, order=None) -> np.ndarray:
        return np.ones(self.M, dtype=bool)

    def norm_mid(self, state: GridState) -> float:
        return math.sqrt(self.h * float(np.dot(state.values, state.values)))

    def inner(self, u: GridState, v: GridState) -> float:
        return self.h * float(np.dot(u.values, v.values))

    def norm_diff(self, u: GridState, v: GridState) -> float:
        diff = u.values - v.values
        return math.sqrt(self.h * float(np.dot(diff, diff)))

    def spill_ratio(self, state: GridState) -> float:
        return 0.0

    def truncate_to_work(self, state: GridState) -> GridState:
        return state

    def state_from_flat(self, vec: np.ndarray, order=None) -> GridState:
        return GridState(vec)

    def zero_state(self, order=None) -> GridState:
        return GridState.zero(self.M)
