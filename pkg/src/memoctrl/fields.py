"""Spatial grids, space-time fields, and pointwise-in-space lifts.

The spatial grid is a tensor grid over an axis-aligned box with homogeneous
Dirichlet boundary handled by elimination (solvers see interior nodes only).
The controlled region is a node-indicator staircase: a node belongs to omega
iff its coordinates lie in the omega box.  Space-time fields store the full
history, values indexed (node, time level) -- the H-type operators look at
the whole trajectory, so nothing can be streamed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .params import Box
from .timeops import (TimeGrid, apply_h_values, apply_hstar_values,
                      bvp_gstar_h_values, bvp_h_gstar_values,
                      relax_backward_values, relax_forward_values,
                      time_derivative_values, trapezoid_weights)


@dataclass(frozen=True)
class SpatialGrid:
    """Tensor grid over box with (at least 3) nodes per axis, boundary included."""

    box: Box
    shape: tuple

    def __post_init__(self):
        shape = tuple(int(m) for m in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != self.box.dim:
            raise ValueError("node counts must match the box dimension")
        if any(m < 3 for m in shape):
            raise ValueError(f"need at least 3 nodes per axis, got {shape}")

    @property
    def dim(self):
        return self.box.dim

    @property
    def nnodes(self):
        return int(np.prod(self.shape))

    @cached_property
    def h(self):
        return tuple((b - a) / (m - 1)
                     for a, b, m in zip(self.box.lo, self.box.hi, self.shape))

    @cached_property
    def axes(self):
        return tuple(np.linspace(a, b, m)
                     for a, b, m in zip(self.box.lo, self.box.hi, self.shape))

    @cached_property
    def coords(self):
        """Node coordinates, shape (nnodes, dim), C-order over the tensor grid."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx_lo = [slice(None)] * self.dim
            idx_lo[ax] = 0
            mask[tuple(idx_lo)] = True
            idx_hi = [slice(None)] * self.dim
            idx_hi[ax] = -1
            mask[tuple(idx_hi)] = True
        return mask.ravel()

    @cached_property
    def interior_idx(self):
        return np.flatnonzero(~self.boundary_mask)

    def mask_from_box(self, box):
        """Node-indicator staircase of an axis-aligned box (closed)."""
        if box.dim != self.dim:
            raise ValueError(f"box dimension {box.dim} does not match "
                             f"grid dimension {self.dim}")
        inside = np.ones(self.nnodes, dtype=bool)
        for ax in range(self.dim):
            x = self.coords[:, ax]
            inside &= (x >= box.lo[ax]) & (x <= box.hi[ax])
        return inside


def omega_mask(grid, params):
    """Indicator of the controlled region; never touches the Dirichlet boundary."""
    mask = grid.mask_from_box(params.omega_box)
    if np.any(mask & grid.boundary_mask):
        raise ValueError("controlled region touches the domain boundary")
    return mask


def _dirichlet_1d(m, h):
    """(m-2) x (m-2) second-difference matrix of -d2/dx2 with zero boundary."""
    n = m - 2
    main = np.full(n, 2.0 / h ** 2)
    off = np.full(n - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def laplacian_matrix(grid):
    """Sparse matrix of -Laplacian on interior nodes (SPD), Dirichlet eliminated.

    Interior nodes are ordered in C-order of the full grid, which matches
    grid.interior_idx.
    """
    mats = [_dirichlet_1d(m, h) for m, h in zip(grid.shape, grid.h)]
    sizes = [mat.shape[0] for mat in mats]
    L = None
    for ax, mat in enumerate(mats):
        before = int(np.prod(sizes[:ax], dtype=int))
        after = int(np.prod(sizes[ax + 1:], dtype=int))
        term = sp.kron(sp.identity(before, format="csr"),
                       sp.kron(mat, sp.identity(after, format="csr")))
        L = term if L is None else L + term
    return L.tocsr()


def laplacian_slice(grid, slab):
    """Central-difference Laplacian of one time slice; zero at boundary nodes."""
    cube = np.asarray(slab, dtype=float).reshape(grid.shape)
    out = np.zeros_like(cube)
    core = tuple(slice(1, -1) for _ in range(grid.dim))
    acc = np.zeros_like(cube[core])
    for ax, h in enumerate(grid.h):
        lo = [slice(1, -1)] * grid.dim
        hi = [slice(1, -1)] * grid.dim
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        acc += (cube[tuple(lo)] - 2.0 * cube[core] + cube[tuple(hi)]) / h ** 2
    out[core] = acc
    return out.ravel()


def gradient_slices(grid, slab):
    """Per-axis first derivatives of one time slice (centered, one-sided ends)."""
    cube = np.asarray(slab, dtype=float).reshape(grid.shape)
    outs = []
    for ax, h in enumerate(grid.h):
        d = np.empty_like(cube)
        sl = lambda s: tuple(s if a == ax else slice(None) for a in range(grid.dim))
        d[sl(slice(1, -1))] = (cube[sl(slice(2, None))] - cube[sl(slice(0, -2))]) / (2 * h)
        d[sl(slice(0, 1))] = (-3.0 * cube[sl(slice(0, 1))] + 4.0 * cube[sl(slice(1, 2))]
                              - cube[sl(slice(2, 3))]) / (2 * h)
        d[sl(slice(-1, None))] = (3.0 * cube[sl(slice(-1, None))]
                                  - 4.0 * cube[sl(slice(-2, -1))]
                                  + cube[sl(slice(-3, -2))]) / (2 * h)
        outs.append(d.ravel())
    return outs


@dataclass
class SpaceTimeField:
    """Scalar field on (spatial grid) x (time grid), values (node, time level)."""

    grid: SpatialGrid
    tgrid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.nnodes, self.tgrid.nt + 1)
        if self.values.shape != expected:
            raise ValueError(f"expected values of shape {expected}, "
                             f"got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid, tgrid):
        return cls(grid, tgrid, np.zeros((grid.nnodes, tgrid.nt + 1)))

    @classmethod
    def from_function(cls, grid, tgrid, fn):
        """Sample fn(x0, ..., xd-1, t) on the grid."""
        xs = [grid.coords[:, ax][:, None] for ax in range(grid.dim)]
        t = tgrid.times[None, :]
        return cls(grid, tgrid, np.asarray(fn(*xs, t), dtype=float)
                   * np.ones((grid.nnodes, tgrid.nt + 1)))

    def copy(self):
        return SpaceTimeField(self.grid, self.tgrid, self.values.copy())


def check_compatible(a, b):
    if a.grid != b.grid or a.tgrid != b.tgrid:
        raise ValueError("fields live on different grids")


_TIME_OPS = {
    "M": lambda v, p, dt: relax_forward_values(v, p.Bn, dt),
    "M*": lambda v, p, dt: relax_backward_values(v, p.Bn, dt),
    "G": lambda v, p, dt: relax_forward_values(v, p.mu, dt),
    "G*": lambda v, p, dt: relax_backward_values(v, p.mu, dt),
    "H": lambda v, p, dt: apply_h_values(v, p.Bn, p.mu, dt),
    "H*": lambda v, p, dt: apply_hstar_values(v, p.Bn, p.mu, dt),
    "G*H": lambda v, p, dt: bvp_gstar_h_values(v, p.Bn, p.mu, dt),
    "HG*": lambda v, p, dt: bvp_h_gstar_values(v, p.Bn, p.mu, dt),
}


def lift_timeop(field, op, params):
    """Apply a named time operator to every node's series independently.

    The lift is mask-agnostic; callers restrict with masks where needed.
    Tags: M, M*, G, G*, H, H*, G*H (the map G*(H(.))), HG* (the map H(G*(.))).
    """
    try:
        kernel = _TIME_OPS[op]
    except KeyError:
        raise ValueError(f"unknown time operator tag {op!r}; "
                         f"expected one of {sorted(_TIME_OPS)}") from None
    return SpaceTimeField(field.grid, field.tgrid,
                          kernel(field.values, params, field.tgrid.dt))


def time_derivative_field(field):
    return SpaceTimeField(field.grid, field.tgrid,
                          time_derivative_values(field.values, field.tgrid.dt))


def space_weights(grid):
    """Tensor-product trapezoid weights over the domain box, shape (nnodes,)."""
    w = np.ones(1)
    for m, h in zip(grid.shape, grid.h):
        w1 = np.full(m, h)
        w1[0] = w1[-1] = h / 2.0
        w = np.kron(w, w1)
    return w


def integrate_space_at(field, k, mask=None):
    """Spatial integral of one time slice (k is the time index; -1 for t = T)."""
    w = space_weights(field.grid)
    if mask is not None:
        w = w * mask
    return float(np.dot(w, field.values[:, k]))


def integrate_spacetime(field, mask=None):
    """Space-time trapezoid integral; optional node mask restricts the region."""
    ws = space_weights(field.grid)
    if mask is not None:
        ws = ws * mask
    wt = trapezoid_weights(field.tgrid.nt, field.tgrid.dt)
    return float(ws @ field.values @ wt)


def spacetime_inner(a, b, mask=None):
    check_compatible(a, b)
    ws = space_weights(a.grid)
    if mask is not None:
        ws = ws * mask
    wt = trapezoid_weights(a.tgrid.nt, a.tgrid.dt)
    return float(ws @ (a.values * b.values) @ wt)


def space_inner_at(a, b, k, mask=None):
    check_compatible(a, b)
    ws = space_weights(a.grid)
    if mask is not None:
        ws = ws * mask
    return float(np.dot(ws, a.values[:, k] * b.values[:, k]))


def dt_inner(a, b, mask=None):
    """<dt a, dt b> over the space-time cylinder, staggered form.

    Time derivatives are first differences at interval midpoints with
    cell-wise quadrature.  Like the gradient pairing below, this midpoint
    form is second order, positive on every non-constant trajectory (the
    node-centered stencil is blind to the alternating mode), and its
    variational derivative is exactly the tridiagonal second-difference
    operator of the two-point solvers.
    """
    check_compatible(a, b)
    ws = space_weights(a.grid)
    if mask is not None:
        ws = ws * mask
    dt = a.tgrid.dt
    da = np.diff(a.values, axis=1) / dt
    db = da if b is a else np.diff(b.values, axis=1) / dt
    return float(dt * (ws @ (da * db)).sum())


def grad_inner(a, b):
    """<grad a, grad b> over the space-time cylinder.

    Gradient components are central differences at cell midpoints (the
    staggered form), integrated cell-wise along their own axis and by
    trapezoid transversally and in time.  This is the discrete Dirichlet
    energy of the interior Laplacian stencil, which keeps the energy
    pairings consistent with the marching schemes; the node-centered
    variant carries a much larger constant near the boundary for
    incompatible data.
    """
    check_compatible(a, b)
    grid, tgrid = a.grid, a.tgrid
    wt = trapezoid_weights(tgrid.nt, tgrid.dt)
    A = a.values.reshape(grid.shape + (tgrid.nt + 1,))
    B = b.values.reshape(grid.shape + (tgrid.nt + 1,))
    total = 0.0
    for ax, h in enumerate(grid.h):
        da = np.diff(A, axis=ax) / h
        db = np.diff(B, axis=ax) / h
        wgt = np.array(1.0)
        for j, (m, hj) in enumerate(zip(grid.shape, grid.h)):
            if j == ax:
                w1 = np.full(m - 1, hj)
            else:
                w1 = np.full(m, hj)
                w1[0] = w1[-1] = hj / 2.0
            wgt = np.multiply.outer(wgt, w1)
        wgt = wgt.reshape(da.shape[:-1])
        total += float(((da * db) @ wt * wgt).sum())
    return total
