"""Nozzle geometry, truncated computational domain and boundary data.

The flow region is bounded below by the symmetry axis x2 = 0 and above by
the nozzle wall x1 = theta(x2) (for heights above the mouth) together with
the artificial segment [0, inf) x {1}.  The truncated domain keeps
-mu < x1 < R and is covered by a uniform Cartesian grid with the wall
resolved by staircase snapping: outside nodes adjacent to the fluid carry
the wall Dirichlet value.

The boundary datum has five pieces: zero on the axis, zero then a steep
power ramp across the inlet column, the jet-like outlet profile saturating
at the flux, and the wall value Q on the solid wall and top segment.
"""

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, GeometryError, ParameterError

__all__ = ["Nozzle", "TruncatedDomain", "BoundaryData",
           "build_domain", "strip_domain", "boundary_data"]

# node mask codes
OUTSIDE = -1
INTERIOR = 0
AXIS = 1
INLET = 2
OUTLET = 3
WALL = 4
TOP = 5

MASK_NAMES = {OUTSIDE: "outside", INTERIOR: "interior", AXIS: "axis",
              INLET: "inlet", OUTLET: "outlet", WALL: "wall", TOP: "top"}


class Nozzle:
    """Upper solid wall x1 = theta(x2) for x2 in (1, barH), with the mouth
    at A = (0, 1) and theta -> -inf as x2 -> barH."""

    def __init__(self, theta, dtheta, barH, name="custom"):
        self.theta = theta
        self.dtheta = dtheta
        self.barH = float(barH)
        self.name = name
        self.mouth = (0.0, 1.0)
        if abs(float(theta(1.0))) > 1e-9:
            raise GeometryError("nozzle wall must pass through the mouth (0, 1)")

    def wall_height(self, depth):
        """Wall height at x1 = -depth: the first crossing theta(x2) = -depth
        above the mouth; raises GeometryError when the wall never gets there."""
        xs = np.linspace(1.0, self.barH * (1.0 - 1e-12), 4097)
        th = np.asarray(self.theta(xs), dtype=float)
        above = th >= -depth
        if not above[0]:
            raise GeometryError(f"wall is already below x1 = {-depth} at the mouth")
        if above[-1]:
            raise GeometryError(
                f"wall never reaches x1 = {-depth}; nozzle too shallow for this mu")
        k = int(np.argmin(above))  # first index below
        return float(brentq(lambda y: float(self.theta(y)) + depth,
                            xs[k - 1], xs[k], xtol=1e-13))

    def wall_height_sup(self, depth):
        """Largest height at which any wall point has x1 >= -depth; bounds
        the grid for walls that are not monotone in x2."""
        xs = np.linspace(1.0, self.barH * (1.0 - 1e-12), 4097)
        th = np.asarray(self.theta(xs), dtype=float)
        above = th >= -depth
        if above[-1]:
            raise GeometryError(
                f"wall never reaches x1 = {-depth}; nozzle too shallow for this mu")
        return float(xs[above].max())

    @classmethod
    def log_family(cls, barH):
        """theta(x2) = ln((barH - x2)/(barH - 1)): mouth at (0,1), wall slope
        theta'(1) = -1/(barH-1)."""
        barH = float(barH)

        def theta(y):
            y = np.asarray(y, dtype=float)
            out = np.log((barH - y) / (barH - 1.0))
            return float(out) if out.ndim == 0 else out

        def dtheta(y):
            y = np.asarray(y, dtype=float)
            out = -1.0 / (barH - y)
            return float(out) if out.ndim == 0 else out

        return cls(theta, dtheta, barH, name="log")

    @classmethod
    def flat_mouth_family(cls, barH):
        """Log wall plus a linear term cancelling the mouth slope, so
        theta'(1) = 0 (used by the smooth-fit checks)."""
        barH = float(barH)

        def theta(y):
            y = np.asarray(y, dtype=float)
            out = np.log((barH - y) / (barH - 1.0)) + (y - 1.0) / (barH - 1.0)
            return float(out) if out.ndim == 0 else out

        def dtheta(y):
            y = np.asarray(y, dtype=float)
            out = -1.0 / (barH - y) + 1.0 / (barH - 1.0)
            return float(out) if out.ndim == 0 else out

        return cls(theta, dtheta, barH, name="flat_mouth")

    @classmethod
    def from_table(cls, path):
        """Two-column text table (x2, theta) with one header line; the wall
        is interpolated monotone-cubically between the samples."""
        data = np.loadtxt(path, skiprows=1)
        if data.ndim != 2 or data.shape[1] != 2:
            raise GeometryError(f"{path}: expected two columns (x2, theta)")
        y, th = data[:, 0], data[:, 1]
        if y[0] != 1.0 or np.any(np.diff(y) <= 0):
            raise GeometryError("wall heights must increase from exactly 1")
        interp = PchipInterpolator(y, th)
        barH = float(y[-1]) + (float(y[-1]) - float(y[0])) * 1e-6
        return cls(interp, interp.derivative(), barH, name="table")


class TruncatedDomain:
    """Uniform grid over the truncated flow region with per-node masks."""

    def __init__(self, nozzle, mu, R, h1, h2, x1, x2, mask):
        self.nozzle = nozzle
        self.mu = mu
        self.R = R
        self.h1 = h1
        self.h2 = h2
        self.x1 = x1
        self.x2 = x2
        self.mask = mask
        self.nx = x1.size - 1
        self.ny = x2.size - 1
        self.free = mask == INTERIOR
        self.dirichlet = mask > INTERIOR
        inside = mask >= INTERIOR
        self.cell_active = (inside[:-1, :-1] & inside[1:, :-1]
                            & inside[:-1, 1:] & inside[1:, 1:])
        self.j_top = int(np.argmin(np.abs(x2 - 1.0)))
        self.i_mouth = int(np.argmin(np.abs(x1)))
        self.b_mu = None  # set by build_domain for nozzle-backed grids
        # every interior node must see four in-closure neighbours
        ii, jj = np.nonzero(self.free)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            ok = (ni >= 0) & (nj >= 0) & (ni <= self.nx) & (nj <= self.ny)
            if not (np.all(ok) and np.all(mask[ni[ok], nj[ok]] >= INTERIOR)):
                raise GeometryError("interior node with a neighbour outside the closure")

    def counts(self):
        vals, cnt = np.unique(self.mask, return_counts=True)
        return {MASK_NAMES[int(v)]: int(c) for v, c in zip(vals, cnt)}

    def node_xy(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")


def build_domain(nozzle, mu, R, h, h2=None):
    """Grid the truncated region; mu and R are snapped to multiples of the
    horizontal spacing so that x1 = 0 (the mouth column) lies on the grid,
    and the vertical spacing divides the mouth height exactly."""
    h = float(h)
    if (h2 or h) > 1.0 / 8.0:
        raise DomainError("grid spacing must put >= 8 cells across the mouth height")
    n_mu = max(1, round(mu / h))
    n_R = max(1, round(R / h))
    mu = n_mu * h
    R = n_R * h
    h1 = h
    n_up = round(1.0 / (h2 or h))
    h2 = 1.0 / n_up  # keeps x2 = 1 exactly on the grid
    b_mu = nozzle.wall_height(mu)
    y_sup = nozzle.wall_height_sup(mu)
    ny = int(np.ceil(y_sup / h2 + 1e-12)) + 1
    x1 = -mu + h1 * np.arange(n_mu + n_R + 1)
    x2 = h2 * np.arange(ny + 1)

    nx1, ny1 = x1.size, x2.size
    X, Y = np.meshgrid(x1, x2, indexing="ij")
    j_top = n_up
    theta_y = np.full(ny1, -np.inf)
    hi = x2 >= 1.0
    theta_y[hi] = np.where(x2[hi] < nozzle.barH,
                           np.asarray(nozzle.theta(np.minimum(
                               x2[hi], nozzle.barH * (1 - 1e-12))), dtype=float),
                           -np.inf)
    inside = np.zeros((nx1, ny1), dtype=bool)
    inside |= (Y > 0.0) & (Y < 1.0) & (X > -mu) & (X < R)
    inside |= (Y >= 1.0) & (X > -mu) & (X < theta_y[None, :])

    mask = np.full((nx1, ny1), OUTSIDE, dtype=np.int8)
    mask[inside] = INTERIOR
    # rectangle edges, in increasing precedence
    mask[:, 0] = AXIS
    inlet_rows = (x2 > 0.0) & (x2 < b_mu)
    mask[0, inlet_rows] = INLET
    outlet_rows = (x2 > 0.0) & (x2 < 1.0)
    mask[-1, outlet_rows] = OUTLET
    mask[x1 >= 0.0, j_top] = TOP
    # staircase wall: outside nodes adjacent to the closure get the wall value
    closure = mask >= INTERIOR
    near = np.zeros_like(closure)
    near[1:, :] |= closure[:-1, :]
    near[:-1, :] |= closure[1:, :]
    near[:, 1:] |= closure[:, :-1]
    near[:, :-1] |= closure[:, 1:]
    wall_nodes = (mask == OUTSIDE) & near
    mask[wall_nodes] = WALL

    dom = TruncatedDomain(nozzle, mu, R, h1, h2, x1, x2, mask)
    dom.b_mu = b_mu
    return dom


def strip_domain(x_left, x_right, height, h, ny=None):
    """Degenerate rectangular domain (no nozzle wall): Dirichlet top at the
    given height, full-height inlet/outlet columns.  Used by the one
    dimensional oracle problems."""
    h = float(h)
    nx = max(2, round((x_right - x_left) / h))
    h1 = (x_right - x_left) / nx
    ny = ny or max(2, round(height / h))
    h2 = height / ny
    x1 = x_left + h1 * np.arange(nx + 1)
    x2 = h2 * np.arange(ny + 1)
    mask = np.full((nx + 1, ny + 1), INTERIOR, dtype=np.int8)
    mask[:, 0] = AXIS
    mask[0, :] = INLET
    mask[-1, :] = OUTLET
    mask[:, -1] = TOP
    dom = TruncatedDomain(None, -x_left, x_right, h1, h2, x1, x2, mask)
    return dom


class BoundaryData:
    """Dirichlet values on every non-interior node of the truncated grid."""

    def __init__(self, dom, Q, Lambda, s, values, b_mu=None, bp_mu=None,
                 k_mu=None, H_tilde=None):
        self.dom = dom
        self.Q = float(Q)
        self.Lambda = None if Lambda is None else float(Lambda)
        self.s = s
        self.values = values
        self.b_mu = b_mu
        self.bp_mu = bp_mu
        self.k_mu = k_mu
        self.H_tilde = H_tilde

    def inlet_profile(self, y):
        """Inlet datum as a function of height (zero below the ramp foot,
        the power ramp across [bp_mu, b_mu], Q above)."""
        y = np.asarray(y, dtype=float)
        r = np.clip((y - self.bp_mu) / self.k_mu, 0.0, 1.0)
        out = self.Q * r ** (1.0 + self.s)
        return float(out) if out.ndim == 0 else out

    def outlet_profile(self, y):
        """Outlet datum psi_dagger(y), saturating at Q."""
        y = np.asarray(y, dtype=float)
        if self.H_tilde < 1.0:
            out = np.minimum(self.Lambda / (1.0 - self.s)
                             * np.maximum(y, 0.0) ** (1.0 - self.s), self.Q)
        else:
            out = self.Q * np.maximum(y, 0.0) ** (1.0 - self.s)
        return float(out) if out.ndim == 0 else out


def boundary_data(dom, Q, Lambda, s=0.75):
    """Assemble the five-piece boundary datum for a nozzle-backed domain."""
    if not 0.5 < s < 1.0:
        raise ParameterError(f"ramp exponent s must lie in (1/2, 1), got {s}")
    if Lambda <= 0.0 or Q <= 0.0:
        raise ParameterError("Q and Lambda must be positive")
    b_mu = dom.b_mu
    if b_mu is None:
        raise GeometryError("boundary_data requires a nozzle-backed domain")
    k_mu = min(0.1, np.sqrt(Q) / 2.0)
    if b_mu - k_mu <= 1.0:
        k_mu = 0.5 * (b_mu - 1.0)
    if k_mu <= 0.0 or k_mu * k_mu >= Q:
        raise ParameterError(
            f"k_mu={k_mu:.4g} must satisfy k_mu^2 < Q={Q:.4g}; "
            "increase mu or lower the ramp width")
    bp_mu = b_mu - k_mu
    H_tilde = ((1.0 - s) * Q / Lambda) ** (1.0 / (1.0 - s))

    bd = BoundaryData(dom, Q, Lambda, s, None, b_mu=b_mu, bp_mu=bp_mu,
                      k_mu=k_mu, H_tilde=H_tilde)
    vals = np.full(dom.mask.shape, np.nan)
    m = dom.mask
    vals[m == AXIS] = 0.0
    vals[(m == WALL) | (m == TOP)] = Q
    ii, jj = np.nonzero(m == INLET)
    vals[ii, jj] = bd.inlet_profile(dom.x2[jj])
    ii, jj = np.nonzero(m == OUTLET)
    vals[ii, jj] = bd.outlet_profile(dom.x2[jj])
    bd.values = vals
    return bd


def dirichlet_from_profiles(dom, left, right, Q, bottom=0.0):
    """Boundary values for a strip domain from 1D side profiles; used by the
    oracle problems (top row = Q, bottom = the axis value)."""
    vals = np.full(dom.mask.shape, np.nan)
    m = dom.mask
    vals[m == AXIS] = bottom
    vals[m == TOP] = Q
    ii, jj = np.nonzero(m == INLET)
    vals[ii, jj] = left(dom.x2[jj])
    ii, jj = np.nonzero(m == OUTLET)
    vals[ii, jj] = right(dom.x2[jj])
    # corners follow the side profiles except the fixed top/bottom rows
    return BoundaryData(dom, Q, None, None, vals)
