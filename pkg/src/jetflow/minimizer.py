"""Nodal minimization of the discrete truncated energy.

The energy is a cell sum of G_eps(|grad psi|^2, psi_cell) dA plus the jump
term lambda^2 dA over cells with all four corners strictly below the flux
plateau.  Gradients are cell-centered bilinear, which makes the energy
convex in each nodal value, and the minimizer is exact nodal coordinate
descent: symmetric lexicographic Gauss-Seidel where every node solves its
scalar problem on [0, Q] (bounded line search plus the plateau candidate).

An over-relaxation factor accelerates the sweeps; the relaxed value is only
accepted when it does not raise the local energy, so the energy history
stays non-increasing either way.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError

__all__ = ["SolverOptions", "DiscreteField", "EnergyReport",
           "initial_field", "discrete_energy", "relax_sweep", "solve",
           "euler_residual", "horizontal_monotonicity"]

THETA_FRAC = 1e-12  # plateau classification threshold, times Q


@dataclass
class SolverOptions:
    tol: float = 1e-8            # max-update stop, times Q
    max_sweeps: int = 30000
    over_relax: float = 1.85
    use_numba: bool = kernels.NUMBA_ENABLED
    init: str = "blend"


@dataclass
class EnergyReport:
    total: float
    bulk: float
    jump: float
    jump_area: float


@dataclass
class DiscreteField:
    psi: np.ndarray
    dom: object
    sweeps: int = 0
    converged: bool = False
    max_update: float = np.inf
    energy_history: list = field(default_factory=list)
    residual_norm: float = np.nan


def _transfinite_blend(dom, bd):
    """Bilinear transfinite interpolation of the rectangle-edge data, with
    Dirichlet nodes overridden afterwards; admissible by clamping."""
    Q = bd.Q
    vals = bd.values
    x1, x2 = dom.x1, dom.x2
    left = np.where(np.isnan(vals[0, :]), Q, vals[0, :])
    right = np.where(np.isnan(vals[-1, :]), Q, vals[-1, :])
    bottom = np.where(np.isnan(vals[:, 0]), 0.0, vals[:, 0])
    top = np.full(x1.size, Q)
    xi = (x1 - x1[0]) / (x1[-1] - x1[0])
    eta = (x2 - x2[0]) / (x2[-1] - x2[0])
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    F = ((1 - XI) * left[None, :] + XI * right[None, :]
         + (1 - ETA) * bottom[:, None] + ETA * top[:, None]
         - ((1 - XI) * (1 - ETA) * left[0] + (1 - XI) * ETA * left[-1]
            + XI * (1 - ETA) * right[0] + XI * ETA * right[-1]))
    return np.clip(F, 0.0, Q)


def initial_field(dom, bd, kind="blend"):
    """Admissible starting field with the Dirichlet data imposed exactly."""
    Q = bd.Q
    if kind == "blend":
        psi = _transfinite_blend(dom, bd)
    elif kind == "outlet_extend":
        right = np.where(np.isnan(bd.values[-1, :]), Q, bd.values[-1, :])
        psi = np.tile(right, (dom.x1.size, 1))
    else:
        raise ValueError(f"unknown initialization '{kind}'")
    psi = np.ascontiguousarray(psi, dtype=float)
    psi[dom.mask == -1] = Q  # outside nodes: inert finite filler
    d = dom.dirichlet
    psi[d] = bd.values[d]
    return DiscreteField(psi=psi, dom=dom)


def discrete_energy(field, energy, dom, lam2):
    """Cell-quadrature energy report for a nodal field."""
    tab = energy.kernel_tables()
    theta_q = THETA_FRAC * tab.Q
    dA = dom.h1 * dom.h2
    if kernels.NUMBA_ENABLED:
        bulk, jump = kernels.energy_numba(
            field.psi, dom.cell_active, theta_q, lam2, dA, dom.h1, dom.h2,
            *tab.flat())
    else:
        bulk, jump = kernels.energy_numpy(
            field.psi, dom.cell_active, theta_q, lam2, dA, dom.h1, dom.h2, tab)
    jump_area = jump / lam2 if lam2 > 0 else 0.0
    return EnergyReport(total=bulk + jump, bulk=float(bulk), jump=float(jump),
                        jump_area=float(jump_area))


def relax_sweep(field, energy, dom, lam2, forward=True, omega=1.0,
                skip_tol=0.0, use_numba=None):
    """One lexicographic nodal-minimization pass; returns the max update."""
    tab = energy.kernel_tables()
    theta_q = THETA_FRAC * tab.Q
    dA = dom.h1 * dom.h2
    if use_numba is None:
        use_numba = kernels.NUMBA_ENABLED
    if use_numba:
        upd = getattr(field, "_last_upd", None)
        if upd is None or upd.shape != field.psi.shape:
            upd = np.full(field.psi.shape, np.inf)
            field._last_upd = upd
        return float(kernels.sweep_numba(
            field.psi, dom.free, dom.cell_active, upd, skip_tol,
            theta_q, lam2, dA, dom.h1, dom.h2, omega, forward, *tab.flat()))
    plan = _numpy_plan(field, dom)
    return float(kernels.sweep_numpy(field.psi, plan, theta_q, lam2,
                                     omega, tab))


def _numpy_plan(field, dom):
    plan = getattr(field, "_plan", None)
    if plan is None:
        plan = kernels.ColorPlan(dom.free, dom.cell_active, dom.h1, dom.h2,
                                 dom.h1 * dom.h2)
        field._plan = plan
    return plan


def solve(energy, dom, bd, lam2, opts=None, start=None):
    """Minimize the discrete energy to the max-update tolerance.

    Interior sweeps skip nodes in quiescent neighbourhoods; convergence is
    only declared after a full (unskipped) symmetric sweep confirms the
    tolerance.  A field that exhausts max_sweeps is returned with
    converged=False.
    """
    opts = opts or SolverOptions()
    field = start if start is not None else initial_field(dom, bd, opts.init)
    tol = opts.tol * bd.Q
    hist = field.energy_history
    use_numba = opts.use_numba and kernels.NUMBA_ENABLED
    skip = 0.02 * tol if use_numba else 0.0
    for sweep in range(opts.max_sweeps):
        up_f = relax_sweep(field, energy, dom, lam2, forward=True,
                           omega=opts.over_relax, skip_tol=skip,
                           use_numba=use_numba)
        up_b = relax_sweep(field, energy, dom, lam2, forward=False,
                           omega=opts.over_relax, skip_tol=skip,
                           use_numba=use_numba)
        field.sweeps += 1
        field.max_update = max(up_f, up_b)
        hist.append(discrete_energy(field, energy, dom, lam2).total)
        if field.max_update < tol:
            if skip > 0.0:  # confirm on a full pass
                up_f = relax_sweep(field, energy, dom, lam2, forward=True,
                                   omega=opts.over_relax, use_numba=use_numba)
                up_b = relax_sweep(field, energy, dom, lam2, forward=False,
                                   omega=opts.over_relax, use_numba=use_numba)
                field.sweeps += 1
                field.max_update = max(up_f, up_b)
                hist.append(discrete_energy(field, energy, dom, lam2).total)
                if field.max_update >= tol:
                    continue
            field.converged = True
            break
    return field


def euler_residual(field, energy, dom=None):
    """Discrete residual of the untruncated interior equation

        div(g(|grad psi|^2, psi) grad psi) - B'(psi)/g(|grad psi|^2, psi)

    at interior nodes of the fluid region where the truncation is inactive;
    nan elsewhere.  Second-order on smooth profiles.
    """
    dom = dom or field.dom
    psi = field.psi
    h1, h2 = dom.h1, dom.h2
    gas, bern = energy.gas, energy.bern
    Q = energy.Q

    # edge momenta from one-sided normal plus averaged tangential differences
    dx = (psi[1:, :] - psi[:-1, :]) / h1           # vertical edges (nx, ny+1)
    dy = (psi[:, 1:] - psi[:, :-1]) / h2           # horizontal edges (nx+1, ny)
    dy_node = np.zeros_like(psi)
    dy_node[:, 1:-1] = (psi[:, 2:] - psi[:, :-2]) / (2 * h2)
    dx_node = np.zeros_like(psi)
    dx_node[1:-1, :] = (psi[2:, :] - psi[:-2, :]) / (2 * h1)
    tx = dx ** 2 + (0.5 * (dy_node[1:, :] + dy_node[:-1, :])) ** 2
    ty = (0.5 * (dx_node[:, 1:] + dx_node[:, :-1])) ** 2 + dy ** 2
    zx = 0.5 * (psi[1:, :] + psi[:-1, :])
    zy = 0.5 * (psi[:, 1:] + psi[:, :-1])

    tc_x = np.asarray(gas.critical_momentum_sq(
        np.asarray(bern.value(np.clip(zx, 0.0, Q)), dtype=float)))
    tc_y = np.asarray(gas.critical_momentum_sq(
        np.asarray(bern.value(np.clip(zy, 0.0, Q)), dtype=float)))
    ok_x = tx < tc_x - energy.epsilon
    ok_y = ty < tc_y - energy.epsilon
    gx = np.full(tx.shape, np.nan)
    gy = np.full(ty.shape, np.nan)
    bx = np.asarray(bern.value(np.clip(zx, 0.0, Q)), dtype=float)
    by = np.asarray(bern.value(np.clip(zy, 0.0, Q)), dtype=float)
    gx[ok_x] = gas.invert_density_g(tx[ok_x], bx[ok_x])
    gy[ok_y] = gas.invert_density_g(ty[ok_y], by[ok_y])

    flux_x = gx * dx
    flux_y = gy * dy
    res = np.full(psi.shape, np.nan)
    div = (flux_x[1:, 1:-1] - flux_x[:-1, 1:-1]) / h1 \
        + (flux_y[1:-1, 1:] - flux_y[1:-1, :-1]) / h2
    res[1:-1, 1:-1] = div

    t_node = dx_node ** 2 + dy_node ** 2
    z_node = np.clip(psi, 0.0, Q)
    b_node = np.asarray(bern.value(z_node), dtype=float)
    tc_node = np.asarray(gas.critical_momentum_sq(b_node))
    fluid = dom.free & (psi < Q - THETA_FRAC * Q) \
        & (t_node < tc_node - energy.epsilon)
    gn = np.full(psi.shape, np.nan)
    gn[fluid] = gas.invert_density_g(t_node[fluid], b_node[fluid])
    rhs = np.asarray(bern.dz(z_node), dtype=float) / gn
    res = res - rhs
    res[~fluid] = np.nan
    return res


def horizontal_monotonicity(field, dom=None, exclude_wall_layer=True):
    """Min forward difference of psi in x1 over fluid node pairs.

    The staircase rendering of the solid wall perturbs the field by O(h) in
    a two-node layer along it, so by default pairs within that layer are
    excluded; pass exclude_wall_layer=False for the raw minimum (a soft
    diagnostic expected to shrink under refinement).
    """
    dom = dom or field.dom
    psi = field.psi
    ok = (dom.mask >= 0)[:-1, :] & (dom.mask >= 0)[1:, :]
    if exclude_wall_layer:
        wall = dom.mask == 4
        near = wall.copy()
        for _ in range(2):
            grown = near.copy()
            grown[1:, :] |= near[:-1, :]
            grown[:-1, :] |= near[1:, :]
            grown[:, 1:] |= near[:, :-1]
            grown[:, :-1] |= near[:, 1:]
            near = grown
        ok = ok & ~near[:-1, :] & ~near[1:, :]
    diff = psi[1:, :] - psi[:-1, :]
    return float(np.min(diff[ok])) if np.any(ok) else 0.0
