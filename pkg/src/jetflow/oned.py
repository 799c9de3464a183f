"""One-dimensional profiles of the stream-function equation.

The planar reduction of the interior equation,

    (g_eps(|psi'|^2, psi) psi')' = dG/dz(|psi'|^2, psi),

is the Euler-Lagrange equation of integral G_eps(psi'^2, psi) dy with no
explicit dependence on the height, so every profile conserves the quantity
Phi_eps(psi'^2, psi).  That turns the two-point and free-boundary Cauchy
problems into scalar shooting on the conserved level E plus a quadrature:

    psi'(w) = s_E(w)  with  Phi_eps(s_E^2, w) = E,
    y(psi)  = integral_0^psi dw / s_E(w).

The slope relation is inverted by warm-started Newton (Phi is strictly
increasing in its first argument) and the height integral by composite
Simpson on a uniform psi grid, which keeps the oracle path fully independent
of the 2D minimizer's cached tables.
"""

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import ConvergenceError, DomainError

__all__ = ["OneDProfile", "slope_of_level", "conserved_level",
           "dirichlet_profile", "downstream_profile", "height_of_level"]

_PSI_GRID = 4097


class OneDProfile:
    """Vertical profile psi(y) on [0, height], monotone increasing, together
    with its slope field and conserved level."""

    def __init__(self, y, psi, slopes, level):
        self.y = y
        self.psi = psi
        self.slopes = slopes
        self.level = float(level)
        self.height = float(y[-1])
        self.top_slope = float(slopes[-1])
        self.bottom_slope = float(slopes[0])

    def __call__(self, yq):
        return np.interp(np.asarray(yq, dtype=float), self.y, self.psi)

    def slope(self, yq):
        return np.interp(np.asarray(yq, dtype=float), self.y, self.slopes)


def conserved_level(energy, Q, Lambda):
    """Level E carried by a profile meeting the free boundary at slope
    Lambda: E = Phi_eps(Lambda^2, Q)."""
    return float(energy.Phi(Lambda * Lambda, Q))


def slope_of_level(energy, E, w, guess=None):
    """Solve Phi_eps(s^2, w) = E for the slope s >= 0 at stream values w."""
    w = np.asarray(w, dtype=float)
    phi0 = np.asarray(energy.Phi(np.zeros_like(w), w), dtype=float)
    if np.any(E < phi0):
        raise DomainError("conserved level below the rest energy; "
                          "the 1D profile would have a turning point")
    t = np.maximum(np.asarray(guess, dtype=float) ** 2
                   if guess is not None else np.full_like(w, E), 1e-14)
    ok = np.zeros(w.shape, dtype=bool)
    for _ in range(60):
        f = np.asarray(energy.Phi(t, w), dtype=float) - E
        df = np.asarray(energy.dg_dt_trunc(t, w), dtype=float) * t \
            + 0.5 * np.asarray(energy.g_trunc(t, w), dtype=float)
        step = f / df
        t_new = t - step
        bad = ~np.isfinite(t_new) | (t_new < 0.0)
        t = np.where(bad, 0.5 * t, t_new)
        ok = np.abs(step) <= 1e-14 * np.maximum(1.0, t)
        if np.all(ok):
            break
    if not np.all(ok):
        # bisection rescue for any stragglers
        idx = np.nonzero(~ok)[0]
        for i in idx:
            lo, hi = 0.0, max(4.0 * E / 0.1, 1.0)
            while float(energy.Phi(hi, w[i])) < E:
                hi *= 2.0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if float(energy.Phi(mid, w[i])) < E:
                    lo = mid
                else:
                    hi = mid
            t[i] = 0.5 * (lo + hi)
    return np.sqrt(t)


def _profile_of_level(energy, Q, E, n):
    w = np.linspace(0.0, Q, n)
    s = slope_of_level(energy, E, w)
    y = cumulative_simpson(1.0 / s, x=w, initial=0.0)
    return w, s, y


def height_of_level(energy, Q, E, n=_PSI_GRID):
    """Height of the profile carrying level E: integral_0^Q dw / s_E(w)."""
    return float(_profile_of_level(energy, Q, E, n)[2][-1])


def downstream_profile(energy, Q, Lambda, n=_PSI_GRID):
    """Far-downstream jet profile hitting the free boundary at slope Lambda:
    psi(0) = 0, psi(height) = Q, psi'(height) = Lambda, with the jet height
    fixed by the quadrature."""
    if Lambda <= 0.0:
        raise DomainError("free-boundary slope must be positive")
    E = conserved_level(energy, Q, Lambda)
    w, s, y = _profile_of_level(energy, Q, E, n)
    return OneDProfile(y, w, s, E)


def dirichlet_profile(energy, height, Q, n=_PSI_GRID, tol=1e-13):
    """Two-point profile psi(0) = 0, psi(height) = Q: shooting on the
    conserved level, whose height map is strictly decreasing."""
    E_lo = float(np.max(np.asarray(
        energy.Phi(np.zeros(64), np.linspace(0.0, Q, 64)), dtype=float)))
    E = max(4.0 * E_lo, conserved_level(energy, Q, Q / height))
    lo = hi = E
    if height_of_level(energy, Q, E, n) > height:
        while height_of_level(energy, Q, hi, n) > height:
            hi *= 2.0
            if hi > 1e14:
                raise ConvergenceError("dirichlet level search: no upper bracket")
    else:
        while height_of_level(energy, Q, lo, n) < height:
            mid = 0.5 * (lo + E_lo)
            if lo - E_lo < 1e-15 * max(1.0, abs(E_lo)):
                raise ConvergenceError("dirichlet level search: no lower bracket")
            lo = mid if mid > E_lo else 0.5 * (lo + E_lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, mid):
            break
        if height_of_level(energy, Q, mid, n) > height:
            lo = mid
        else:
            hi = mid
    E = 0.5 * (lo + hi)
    w, s, y = _profile_of_level(energy, Q, E, n)
    y = y * (height / y[-1])  # pin the endpoint exactly
    return OneDProfile(y, w, s, E)
