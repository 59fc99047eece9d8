"""Solver for the limit state problem and its linearization.

The equation

    du/dt - Lap u + An*(u - Bn*H(u))*chi_omega
                  + An*(u - Bn*M(u))*chi_complement = f + An*Bn*v*chi_omega

is anticausal (H looks at the future), so no pure time-marching scheme
exists.  We iterate: freeze the memory field m = An*Bn*(H(u)*chi_omega +
M(u)*chi_complement) from the previous iterate, march the remaining local
parabolic problem with Crank-Nicolson (conjugate-gradient solves per step),
recompute m, under-relax on stalls, and stop when the half-step space-time
residual -- the Crank-Nicolson equations evaluated with memory recomputed
from the current iterate -- drops below tolerance.  The memory map is damped
by the parabolic solve, and the iteration contracts for the desk-scale
parameter ranges exercised here; the adaptive relaxation covers the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .fields import (SpaceTimeField, check_compatible, laplacian_matrix,
                     omega_mask, space_weights)
from .timeops import (apply_h_values, relax_forward_values)


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    relaxation: float
    residual_history: list = field(default_factory=list)


@dataclass
class StateProblem:
    """Data and tolerances for one state solve.

    v lives on the controlled-region nodes (zero elsewhere) and must vanish
    at t = 0; pass v=None for the uncontrolled equation.
    """

    params: object
    f: SpaceTimeField
    v: SpaceTimeField = None
    tol: float = 1e-8
    max_picard: int = 200
    cg_tol: float = 1e-12
    relax: float = 1.0

    def __post_init__(self):
        if self.v is None:
            self.v = SpaceTimeField.zeros(self.f.grid, self.f.tgrid)
        check_compatible(self.f, self.v)
        mask = omega_mask(self.f.grid, self.params)
        if np.any(self.v.values[~mask, :] != 0.0):
            raise ValueError("control must vanish outside the controlled region")
        if np.any(self.v.values[:, 0] != 0.0):
            raise ValueError("control must vanish at t = 0 (admissibility)")


def _memory_values(u_int, params, w_int, c_int, dt):
    """An*Bn*(H(u)*chi_omega + M(u)*chi_complement) on interior rows."""
    out = np.zeros_like(u_int)
    if np.any(w_int):
        out[w_int] = apply_h_values(u_int[w_int], params.Bn, params.mu, dt)
    if np.any(c_int):
        out[c_int] = relax_forward_values(u_int[c_int], params.Bn, dt)
    return params.An * params.Bn * out


def _march_cn(L, An, dt, rhs, ic, cg_tol):
    """Crank-Nicolson for du/dt + (An - Lap) u = rhs, u(0) = ic, per step CG."""
    nint, ncols = rhs.shape
    eye = sp.identity(nint, format="csr")
    A_op = eye / dt + 0.5 * (An * eye + L)
    B_op = eye / dt - 0.5 * (An * eye + L)
    precond = sp.diags(1.0 / A_op.diagonal())
    u = np.empty_like(rhs)
    u[:, 0] = ic
    for k in range(ncols - 1):
        b = B_op @ u[:, k] + 0.5 * (rhs[:, k] + rhs[:, k + 1])
        x, info = cg(A_op, b, x0=u[:, k], rtol=cg_tol, atol=0.0, M=precond)
        if info != 0:
            raise RuntimeError(f"conjugate gradients failed at step {k} (info={info})")
        u[:, k + 1] = x
    return u


def _cn_residual(u_int, m_int, F_int, L, An, dt, ws_int):
    """Space-time L2 norm of the half-step Crank-Nicolson residual."""
    total = F_int + m_int
    lap = L @ u_int
    r = ((u_int[:, 1:] - u_int[:, :-1]) / dt
         + 0.5 * (An * u_int + lap - total)[:, 1:]
         + 0.5 * (An * u_int + lap - total)[:, :-1])
    return float(np.sqrt(dt * np.sum(ws_int[:, None] * r ** 2)))


def _solve_parabolic_memory(params, grid, tgrid, F_int, ic_int, *, tol,
                            max_picard, cg_tol, relax):
    """Shared fixed-point core: returns interior trajectory and a report.

    F_int holds every memory-free source term on interior nodes.
    """
    dt = tgrid.dt
    L = laplacian_matrix(grid)
    interior = grid.interior_idx
    w_int = omega_mask(grid, params)[interior]
    c_int = ~w_int
    ws_int = space_weights(grid)[interior]

    m = np.zeros_like(F_int)
    u = np.zeros_like(F_int)
    rho = relax
    best_u, best_res = None, np.inf
    history = []
    converged = False
    iterations = 0
    for iterations in range(1, max_picard + 1):
        u = _march_cn(L, params.An, dt, F_int + m, ic_int, cg_tol)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError("state iterate became non-finite")
        m_new = _memory_values(u, params, w_int, c_int, dt)
        res = _cn_residual(u, m_new, F_int, L, params.An, dt, ws_int)
        history.append(res)
        if res < best_res:
            best_res, best_u = res, u
        elif res > best_res and rho > 0.25:
            rho = max(0.25, rho / 2.0)
        if res <= tol:
            converged = True
            break
        m = rho * m_new + (1.0 - rho) * m
    report = SolveReport(iterations=iterations, final_residual=best_res,
                         converged=converged, relaxation=rho,
                         residual_history=history)
    return best_u, report


def _embed(grid, tgrid, interior_values, boundary_fill=0.0):
    full = np.full((grid.nnodes, tgrid.nt + 1), boundary_fill)
    full[grid.interior_idx] = interior_values
    return SpaceTimeField(grid, tgrid, full)


def solve_state(prob):
    """Solve the limit state problem for (f, v); returns (u0, report)."""
    params, f, v = prob.params, prob.f, prob.v
    grid, tgrid = f.grid, f.tgrid
    interior = grid.interior_idx
    w_int = omega_mask(grid, params)[interior]
    F_int = f.values[interior].copy()
    F_int[w_int] += params.An * params.Bn * v.values[interior][w_int]
    ic = np.zeros(len(interior))
    u_int, report = _solve_parabolic_memory(
        params, grid, tgrid, F_int, ic, tol=prob.tol,
        max_picard=prob.max_picard, cg_tol=prob.cg_tol, relax=prob.relax)
    return _embed(grid, tgrid, u_int), report


def residual_state(u0, prob):
    """Half-step space-time residual of the state equation at a given field."""
    params, f, v = prob.params, prob.f, prob.v
    grid, tgrid = f.grid, f.tgrid
    interior = grid.interior_idx
    w_int = omega_mask(grid, params)[interior]
    F_int = f.values[interior].copy()
    F_int[w_int] += params.An * params.Bn * v.values[interior][w_int]
    u_int = u0.values[interior]
    m = _memory_values(u_int, params, w_int, ~w_int, tgrid.dt)
    L = laplacian_matrix(grid)
    ws_int = space_weights(grid)[interior]
    return _cn_residual(u_int, m, F_int, L, params.An, tgrid.dt, ws_int)


def solve_linearized(v, params, tol=1e-8, max_picard=200, cg_tol=1e-12):
    """State response to a control direction: the f = 0 solve (affine map)."""
    f0 = SpaceTimeField.zeros(v.grid, v.tgrid)
    prob = StateProblem(params=params, f=f0, v=v, tol=tol,
                        max_picard=max_picard, cg_tol=cg_tol)
    theta, _ = solve_state(prob)
    return theta
