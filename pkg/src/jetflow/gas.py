"""Thermodynamic state functions of a polytropic gas.

All quantities are nondimensional with the pressure law p = rho^gamma / gamma.
The momentum relation t = F(rho, b) = 2 rho^2 (b - h(rho)) at Bernoulli value
b has two density roots for 0 < t < t_c(b); the subsonic branch is the one
with rho in (rho_c(b), rho_max(b)].  Scaling rho by the critical density and
t by the critical momentum squared collapses the relation onto a single
gamma-dependent curve, which is what the branch inversion solves.
"""

import numpy as np

from .errors import DomainError, SonicBranchError

__all__ = ["GasModel"]

# lower edge of the inversion bracket, relative offset above rho_c
_BRACKET_EPS = 1e-14
# absolute distance to t_c below which the inversion clamps and flags
_NEAR_SONIC_TOL = 1e-10


def _scaled_momentum(r, gamma):
    """U(r) = ((gamma+1) r^2 - 2 r^(gamma+1)) / (gamma-1), the momentum ratio
    t/t_c as a function of r = rho/rho_c; U(1) = 1, U(r_max) = 0 and U is
    strictly decreasing on [1, r_max]."""
    return ((gamma + 1.0) * r * r - 2.0 * r ** (gamma + 1.0)) / (gamma - 1.0)


def _scaled_momentum_deriv(r, gamma):
    """U'(r) = 2 (gamma+1) r (1 - r^(gamma-1)) / (gamma-1)."""
    return 2.0 * (gamma + 1.0) * r * (1.0 - r ** (gamma - 1.0)) / (gamma - 1.0)


def _invert_scaled(u, gamma):
    """Solve U(r) = u for r on the subsonic branch [1, r_max].

    Vectorized safeguarded bisection (to bracket width ~1e-15) followed by
    two Newton polish steps away from the sonic endpoint, where U' vanishes.
    """
    u = np.asarray(u, dtype=float)
    r_max = ((gamma + 1.0) / 2.0) ** (1.0 / (gamma - 1.0))
    lo = np.full(u.shape, 1.0 + _BRACKET_EPS)
    hi = np.full(u.shape, r_max)
    # U is decreasing: U(lo) ~ 1 >= u >= 0 = U(hi)
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        umid = _scaled_momentum(mid, gamma)
        take_hi = umid > u
        lo = np.where(take_hi, mid, lo)
        hi = np.where(take_hi, hi, mid)
    r = 0.5 * (lo + hi)
    safe = u < 0.999  # keep Newton away from the U'(1)=0 endpoint
    for _ in range(2):
        du = _scaled_momentum_deriv(r, gamma)
        step = np.where(safe & (du != 0.0), (_scaled_momentum(r, gamma) - u)
                        / np.where(du != 0.0, du, 1.0), 0.0)
        r_new = r - step
        r = np.clip(r_new, 1.0, r_max)
    return r


class GasModel:
    """Polytropic gas with adiabatic exponent gamma > 1."""

    def __init__(self, gamma):
        gamma = float(gamma)
        if not np.isfinite(gamma) or gamma <= 1.0:
            raise DomainError(f"adiabatic exponent must be finite and > 1, got {gamma}")
        self.gamma = gamma

    def __repr__(self):
        return f"GasModel(gamma={self.gamma})"

    # -- pointwise state functions ------------------------------------

    def enthalpy(self, rho):
        """h(rho) = rho^(gamma-1) / (gamma-1)."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise DomainError("enthalpy requires rho > 0")
        out = rho ** (self.gamma - 1.0) / (self.gamma - 1.0)
        return float(out) if out.ndim == 0 else out

    def sound_speed(self, rho):
        """c(rho) = rho^((gamma-1)/2)."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise DomainError("sound_speed requires rho > 0")
        out = rho ** ((self.gamma - 1.0) / 2.0)
        return float(out) if out.ndim == 0 else out

    def speed_of_bernoulli(self, s, rho):
        """q(s, rho) = sqrt(2 (s - h(rho))), the flow speed at Bernoulli
        value s and density rho."""
        arg = 2.0 * (np.asarray(s, dtype=float) - self.enthalpy(rho))
        if np.any(arg < 0.0):
            raise DomainError("speed_of_bernoulli: s < h(rho)")
        out = np.sqrt(arg)
        return float(out) if out.ndim == 0 else out

    def mach(self, rho, speed):
        """M = |u| / c(rho)."""
        return speed / self.sound_speed(rho)

    # -- critical quantities at Bernoulli value s ----------------------

    def _check_bernoulli(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0.0):
            raise DomainError("Bernoulli constant must be positive")
        return s

    def critical_density(self, s):
        """rho_c(s) = (2 (gamma-1) s / (gamma+1))^(1/(gamma-1))."""
        s = self._check_bernoulli(s)
        out = (2.0 * (self.gamma - 1.0) * s / (self.gamma + 1.0)) ** (1.0 / (self.gamma - 1.0))
        return float(out) if out.ndim == 0 else out

    def max_density(self, s):
        """rho_max(s) = ((gamma-1) s)^(1/(gamma-1)), the stagnation density."""
        s = self._check_bernoulli(s)
        out = ((self.gamma - 1.0) * s) ** (1.0 / (self.gamma - 1.0))
        return float(out) if out.ndim == 0 else out

    def critical_speed(self, s):
        """Sound speed at the critical density, c(rho_c(s))."""
        return self.sound_speed(self.critical_density(s))

    def critical_momentum_sq(self, s):
        """t_c(s) = (2 (gamma-1) s / (gamma+1))^((gamma+1)/(gamma-1)); equals
        rho_c(s)^(gamma+1)."""
        s = self._check_bernoulli(s)
        base = 2.0 * (self.gamma - 1.0) * s / (self.gamma + 1.0)
        out = base ** ((self.gamma + 1.0) / (self.gamma - 1.0))
        return float(out) if out.ndim == 0 else out

    # -- momentum relation and its inversion ---------------------------

    def momentum_density_F(self, rho, bernoulli):
        """F(rho, b) = 2 rho^2 (b - h(rho)); negative once rho exceeds the
        stagnation density rho_max(b)."""
        rho = np.asarray(rho, dtype=float)
        b = np.asarray(bernoulli, dtype=float)
        out = 2.0 * rho * rho * (b - self.enthalpy(rho))
        return float(out) if out.ndim == 0 else out

    def dF_drho(self, rho, bernoulli):
        """d F / d rho = 4 rho (b - (gamma+1)/(2(gamma-1)) rho^(gamma-1));
        strictly negative on the subsonic branch."""
        rho = np.asarray(rho, dtype=float)
        b = np.asarray(bernoulli, dtype=float)
        out = 4.0 * rho * (b - (self.gamma + 1.0) / (2.0 * (self.gamma - 1.0))
                           * rho ** (self.gamma - 1.0))
        return float(out) if out.ndim == 0 else out

    def invert_density_g(self, t, bernoulli, return_flag=False):
        """Specific volume g = 1/rho on the subsonic branch, solving
        F(1/g, b) = t with 1/g in (rho_c(b), rho_max(b)].

        For t within 1e-10 of t_c(b) the result is clamped to the bracket
        edge and flagged near-sonic (pass return_flag=True to receive the
        flag);  t >= t_c(b) raises SonicBranchError and the truncated
        density must be used instead.
        """
        t = np.asarray(t, dtype=float)
        b = self._check_bernoulli(bernoulli)
        if np.any(t < 0.0):
            raise DomainError("momentum squared must be nonnegative")
        tc = self.critical_momentum_sq(b)
        if np.any(t >= tc):
            raise SonicBranchError(
                "momentum t >= t_c(b): no subsonic root; use the truncated g")
        near = t > tc - _NEAR_SONIC_TOL
        u = np.minimum(np.asarray(t / tc), 1.0)
        u = np.where(near, _scaled_momentum(1.0 + _BRACKET_EPS, self.gamma), u)
        r = _invert_scaled(u, self.gamma)
        g = 1.0 / (self.critical_density(b) * r)
        if g.ndim == 0:
            g = float(g)
            near = bool(near)
        if return_flag:
            return g, near
        return g

    def dg_dt(self, t, bernoulli):
        """d g / d t = -g^2 / (dF/drho)(1/g, b) on the subsonic branch;
        nonnegative, blowing up at the sonic point."""
        g = self.invert_density_g(t, bernoulli)
        out = -np.asarray(g, dtype=float) ** 2 / self.dF_drho(1.0 / np.asarray(g), bernoulli)
        return float(out) if out.ndim == 0 else out
