"""Upstream asymptotic state and the Bernoulli-of-stream-function map.

Given the incoming Bernoulli profile B(x2) on [0, barH] and the mass flux Q,
the upstream density rho_bar is the unique root of

    Q = integral_0^barH  rho_bar sqrt(2 (B(x2) - h(rho_bar))) dx2

on (rho_c(B_max), rho_max(B_min)), where the flux is strictly decreasing.
The horizontal velocity is u_bar = sqrt(2 (B - h(rho_bar))), the upstream
stream function psi_bar = rho_bar * integral u_bar, and composing B with the
height-of-stream inverse of psi_bar yields the map z -> bernoulli value used
throughout the energy functional, extended constantly outside [0, Q].
"""

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, FluxWindowError

__all__ = [
    "BernoulliProfile",
    "UpstreamState",
    "BernoulliOfStream",
    "flux_of_density",
    "solve_upstream",
    "bernoulli_of_stream",
]


class BernoulliProfile:
    """Incoming Bernoulli data B(x2) sampled on a uniform height grid.

    The interpolant is monotone cubic (C^1), and B' is its derivative.  The
    discrete stand-in for the C^{0,1} norm of B' (called kappa) is the grid
    max of |B'| plus the largest difference quotient of B'.
    """

    def __init__(self, heights, values):
        heights = np.asarray(heights, dtype=float)
        values = np.asarray(values, dtype=float)
        if heights.ndim != 1 or heights.shape != values.shape or heights.size < 4:
            raise DomainError("profile needs >= 4 samples of matching shape")
        dh = np.diff(heights)
        if heights[0] != 0.0 or np.any(dh <= 0):
            raise DomainError("heights must increase from 0")
        if not np.allclose(dh, dh[0], rtol=1e-8):
            raise DomainError("profile requires a uniform height grid")
        if np.any(values <= 0.0):
            raise DomainError("Bernoulli profile must be positive")
        self.heights = heights
        self.values = values
        self.barH = float(heights[-1])
        if self.barH <= 1.0:
            raise DomainError("upstream nozzle height barH must exceed 1")
        self._interp = PchipInterpolator(heights, values)
        self._dinterp = self._interp.derivative()
        self.B_star = float(values.min())
        self.B_sup = float(values.max())
        dB = self._dinterp(heights)
        self.kappa = float(np.max(np.abs(dB))
                           + np.max(np.abs(np.diff(dB))) / dh[0])
        # endpoint slope condition B'(0) = B'(barH) = 0, at grid tolerance
        tol = max(10.0 * self.kappa * dh[0], 1e-12)
        self.end_slope_defect = float(max(abs(dB[0]), abs(dB[-1])))
        if self.end_slope_defect > tol:
            raise DomainError(
                f"profile end slopes must vanish: |B'| at ends = "
                f"{self.end_slope_defect:.3g} > {tol:.3g}")

    def B(self, x2):
        return self._interp(x2)

    def dB(self, x2):
        return self._dinterp(x2)

    @classmethod
    def constant(cls, level, barH, n=257):
        x = np.linspace(0.0, barH, n)
        return cls(x, np.full(n, float(level)))

    @classmethod
    def cosine(cls, base, amplitude, barH, n=2049):
        """B = base + amplitude * cos(pi x2 / barH); end slopes vanish.

        The dense default keeps the interpolation wiggle of the sampled
        profile below the 1e-8 validation floor of the energy cache.
        """
        x = np.linspace(0.0, barH, n)
        return cls(x, base + amplitude * np.cos(np.pi * x / barH))

    @classmethod
    def from_table(cls, path):
        """Two-column text table (height, B) with one header line."""
        data = np.loadtxt(path, skiprows=1)
        if data.ndim != 2 or data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns (height, B)")
        return cls(data[:, 0], data[:, 1])


def flux_of_density(rho_bar, profile, gas):
    """Mass flux Q(rho_bar) = simpson of rho_bar u_bar over the sample grid."""
    arg = 2.0 * (profile.values - gas.enthalpy(rho_bar))
    if np.any(arg < 0.0):
        raise DomainError(
            f"rho_bar={rho_bar:.6g} exceeds stagnation density somewhere on the profile")
    return float(simpson(rho_bar * np.sqrt(arg), x=profile.heights))


def _flux_derivative(rho_bar, profile, gas):
    # d/drho [rho sqrt(2(B-h))] = sqrt(2(B-h)) - rho^(gamma-1)/sqrt(2(B-h))
    arg = 2.0 * (profile.values - gas.enthalpy(rho_bar))
    arg = np.maximum(arg, 1e-300)
    sq = np.sqrt(arg)
    return float(simpson(sq - rho_bar ** (gas.gamma - 1.0) / sq, x=profile.heights))


class UpstreamState:
    """Solved upstream state: density rho_bar, velocity u_bar(x2), stream
    function psi_bar(x2) with its height inverse, and the admissible flux
    window (Q_star, Q_upper)."""

    def __init__(self, gas, profile, Q, rho_bar, Q_star, Q_upper):
        self.gas = gas
        self.profile = profile
        self.Q = float(Q)
        self.rho_bar = float(rho_bar)
        self.Q_star = float(Q_star)
        self.Q_upper = float(Q_upper)
        self.barH = profile.barH

        # dense u_bar interpolant; its exact antiderivative gives psi_bar
        xf = np.linspace(0.0, self.barH, 8 * (profile.heights.size - 1) + 1)
        ub = np.sqrt(2.0 * (profile.B(xf) - gas.enthalpy(self.rho_bar)))
        self._u_interp = PchipInterpolator(xf, ub)
        self._du_interp = self._u_interp.derivative()
        raw_psi = self._u_interp.antiderivative()
        scale = self.Q / (self.rho_bar * float(raw_psi(self.barH)))
        self._psi_scale = self.rho_bar * scale
        self._raw_psi = raw_psi
        self.u_min = float(ub.min())
        self.u_max = float(ub.max())
        # dense table for fast inversion of psi_bar
        self._xd = xf
        self._psid = self._psi_scale * raw_psi(xf)

    def u_bar(self, x2):
        return self._u_interp(x2)

    def du_bar(self, x2):
        return self._du_interp(x2)

    def ddu_bar(self, x2):
        return self._du_interp.derivative()(x2)

    def psi_bar(self, x2):
        """psi_bar(x2) = rho_bar * integral_0^x2 u_bar, normalized so that
        psi_bar(barH) = Q exactly."""
        return self._psi_scale * self._raw_psi(x2)

    def dpsi_bar(self, x2):
        return self._psi_scale * self._u_interp(x2)

    def height_of_stream(self, z, return_flag=False):
        """Height x2 with psi_bar(x2) = z; z outside [0, Q] is clamped and
        flagged, matching the constant extension of the Bernoulli map."""
        z = np.asarray(z, dtype=float)
        clamped = (z < 0.0) | (z > self.Q)
        zc = np.clip(z, 0.0, self.Q)
        x = np.interp(zc, self._psid, self._xd)
        for _ in range(3):  # Newton polish on the monotone interpolant
            f = self.psi_bar(x) - zc
            x = np.clip(x - f / np.maximum(self.dpsi_bar(x), 1e-300), 0.0, self.barH)
        if x.ndim == 0:
            x = float(x)
            clamped = bool(clamped)
        if return_flag:
            return x, clamped
        return x


def solve_upstream(gas, profile, Q):
    """Solve the flux relation for rho_bar by bisection (bracket width 1e-13)
    plus Newton polish; raises FluxWindowError outside (Q_star, Q_upper)."""
    rho_lo = gas.critical_density(profile.B_sup)
    rho_hi = gas.max_density(profile.B_star)
    Q_star = profile.kappa ** 0.25 if profile.kappa > 0 else 0.0
    Q_upper = flux_of_density(rho_lo, profile, gas)
    if not (Q_star < Q < Q_upper):
        raise FluxWindowError(Q, Q_star, Q_upper)

    lo, hi = rho_lo, rho_hi
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if flux_of_density(mid, profile, gas) > Q:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    for _ in range(3):
        f = flux_of_density(rho, profile, gas) - Q
        df = _flux_derivative(rho, profile, gas)
        rho_new = rho - f / df
        if rho_lo < rho_new < rho_hi:
            rho = rho_new
    return UpstreamState(gas, profile, Q, rho, Q_star, Q_upper)


class BernoulliOfStream:
    """Bernoulli value as a function of the stream value z, with derivatives.

    value(z) = B(height_of_stream(z)) on [0, Q], constant outside; the
    derivatives follow the chain rule through the upstream state:
    d/dz = u_bar'(h)/rho_bar and d2/dz2 = u_bar''(h)/(u_bar(h) rho_bar^2).
    """

    def __init__(self, state):
        self.state = state
        self.Q = state.Q
        self.B_star = state.profile.B_star
        self.B_sup = state.profile.B_sup
        zs = np.linspace(0.0, self.Q, 2049)
        self.kappa0 = float(np.max(np.abs(self.dz(zs)))
                            + np.max(np.abs(self.dzz(zs))))

    def value(self, z):
        if self.state is None:
            out = np.full_like(np.asarray(z, dtype=float), self.B_star)
            return float(out) if out.ndim == 0 else out
        x = self.state.height_of_stream(z)
        out = np.asarray(self.state.profile.B(x), dtype=float)
        return float(out) if out.ndim == 0 else out

    def dz(self, z):
        z_arr = np.asarray(z, dtype=float)
        if self.state is None:
            out = np.zeros_like(z_arr)
            return float(out) if out.ndim == 0 else out
        inside = (z_arr > 0.0) & (z_arr < self.Q)
        x = self.state.height_of_stream(z_arr)
        out = np.where(inside, self.state.du_bar(x) / self.state.rho_bar, 0.0)
        return float(out) if out.ndim == 0 else out

    def dzz(self, z):
        z_arr = np.asarray(z, dtype=float)
        if self.state is None:
            out = np.zeros_like(z_arr)
            return float(out) if out.ndim == 0 else out
        inside = (z_arr > 0.0) & (z_arr < self.Q)
        x = self.state.height_of_stream(z_arr)
        ub = np.asarray(self.state.u_bar(x), dtype=float)
        out = np.where(inside,
                       self.state.ddu_bar(x) / (ub * self.state.rho_bar ** 2), 0.0)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def constant(cls, level, Q):
        """Degenerate map for a constant Bernoulli value (zero vorticity)."""
        obj = cls.__new__(cls)
        obj.state = None
        obj.Q = float(Q)
        obj.B_star = obj.B_sup = float(level)
        obj.kappa0 = 0.0
        return obj


def bernoulli_of_stream(state):
    """Compose the upstream state into the stream-to-Bernoulli map."""
    return BernoulliOfStream(state)
