"""Subsonic truncation of the density inversion and the energy integrand.

Beyond momentum t_c(b) - eps the inverted specific volume g(t, z) is blended
into the constant upper bound g_up = 1/rho_c(B_min) by a smooth nonincreasing
cutoff, keeping the operator uniformly elliptic.  The energy density is

    G(t, z) = 1/2 integral_0^t g_trunc(tau, z) dtau
              + (1/gamma) (g_trunc(0,z)^-gamma - g_trunc(0,Q)^-gamma),

and the free-boundary integrand is Phi = -G + g_trunc * t, whose value at
(Lambda^2, Q) defines the squared jump coefficient.

On the untruncated branch the tau-integral has the closed form
P(rho) = 4 b rho - 2(gamma+1)/(gamma(gamma-1)) rho^gamma evaluated between
the stagnation density and rho(t), so quadrature is only ever needed across
the blend window of width eps/2, where a fixed Gauss-Legendre rule is exact
to machine precision for the smooth integrand.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["Cutoff", "TruncatedEnergy", "KernelTables"]

_WINDOW_GL_NODES = 24


class Cutoff:
    """Smooth nonincreasing cutoff: 1 on (-inf, -1], 0 on [-1/2, inf).

    Realized as the quintic smoothstep reparametrized to [-1, -1/2], which is
    C^2 with max slope 3.75 (within the required bound of 4).  The scaled
    profile is w_eps(s) = w(s/eps).
    """

    def __init__(self, epsilon):
        epsilon = float(epsilon)
        if not 0.0 < epsilon < 0.25:
            raise DomainError(f"truncation width must lie in (0, 1/4), got {epsilon}")
        self.epsilon = epsilon

    @staticmethod
    def w(s):
        s = np.asarray(s, dtype=float)
        x = np.clip(-2.0 * s - 1.0, 0.0, 1.0)
        out = x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def dw(s):
        s = np.asarray(s, dtype=float)
        x = np.clip(-2.0 * s - 1.0, 0.0, 1.0)
        out = -2.0 * 30.0 * x * x * (1.0 - x) ** 2
        return float(out) if out.ndim == 0 else out

    def w_eps(self, s):
        return self.w(np.asarray(s, dtype=float) / self.epsilon)

    def dw_eps(self, s):
        return self.dw(np.asarray(s, dtype=float) / self.epsilon) / self.epsilon


@dataclass
class KernelTables:
    """Cached integrand tables consumed by the sweep kernels.

    Band A covers t in [0, t_c(z)-eps] and band B the blend window
    [t_c(z)-eps, t_c(z)-eps/2], each on a uniform unit coordinate aligned
    with the band edges so the cutoff kinks never cross an interpolation
    stencil.  Beyond band B the energy density G is exactly linear in t,
    the truncated volume g is the constant g_up and dG/dz is constant in t.
    All arrays carry one ghost layer per side for the cubic stencils.
    """

    Q: float
    eps: float
    g_up: float
    n_a: int
    n_b: int
    n_z: int
    tc_z: np.ndarray   # (n_z + 2,)
    GA: np.ndarray     # (n_a + 2, n_z + 2) energy density, band A
    GB: np.ndarray     # (n_b + 2, n_z + 2) energy density, band B
    G_end: np.ndarray  # (n_z + 2,) energy density at the window end
    HA: np.ndarray     # truncated specific volume, band A
    HB: np.ndarray     # truncated specific volume, band B
    DA: np.ndarray     # dG/dz, band A
    DB: np.ndarray     # dG/dz, band B
    D_end: np.ndarray  # dG/dz beyond the window (constant in t)

    def flat(self):
        """Positional tuple handed to the jitted kernels."""
        return (self.Q, self.eps, self.g_up, self.n_a, self.n_b, self.n_z,
                self.tc_z, self.GA, self.GB, self.G_end,
                self.HA, self.HB, self.DA, self.DB, self.D_end)


def _pad_cubic(arr, axis):
    """Append one cubically-extrapolated ghost entry on each side."""
    a = np.moveaxis(np.asarray(arr, dtype=float), axis, 0)
    lo = 4.0 * a[0] - 6.0 * a[1] + 4.0 * a[2] - a[3]
    hi = 4.0 * a[-1] - 6.0 * a[-2] + 4.0 * a[-3] - a[-4]
    out = np.concatenate([lo[None], a, hi[None]], axis=0)
    return np.moveaxis(out, 0, axis)


class TruncatedEnergy:
    """Truncated specific volume, energy density and jump coefficient for a
    given gas model and Bernoulli-of-stream map.

    Immutable after construction; the kernel tables are built eagerly so all
    evaluation is read-only.
    """

    def __init__(self, gas, bern, epsilon=None, n_a=2049, n_b=513, n_z=513):
        self.gas = gas
        self.bern = bern
        self._table_shape = (int(n_a), int(n_b), int(n_z))
        self.Q = bern.Q
        self.B_star = bern.B_star
        self.B_sup = bern.B_sup
        tc_min = gas.critical_momentum_sq(self.B_star)
        if epsilon is None:
            epsilon = min(0.05 * tc_min, 0.2499)
        epsilon = float(epsilon)
        if epsilon >= 0.5 * tc_min:
            raise DomainError(
                f"epsilon={epsilon:.4g} too large for t_c(B_min)={tc_min:.4g}")
        self.cutoff = Cutoff(epsilon)
        self.epsilon = epsilon
        # bounds of g on the subsonic range (both evaluated at profile extremes)
        self.g_up = 1.0 / gas.critical_density(self.B_star)
        self.g_low = 1.0 / gas.max_density(self.B_sup)
        # largest critical momentum over stream values
        self.T_star = gas.critical_momentum_sq(self.B_sup)
        self._ci = 2.0 * (gas.gamma + 1.0) / (gas.gamma * (gas.gamma - 1.0))
        gl_x, gl_w = np.polynomial.legendre.leggauss(_WINDOW_GL_NODES)
        self._gl01 = (0.5 * (gl_x + 1.0), 0.5 * gl_w)  # nodes/weights on [0,1]
        self._tables = None

    # -- scalar helpers -------------------------------------------------

    def _b_of(self, z):
        return self.bern.value(np.clip(np.asarray(z, dtype=float), 0.0, self.Q))

    def _branch_g(self, t, b):
        """Untruncated 1/rho(t, b); callers guarantee t < t_c(b)."""
        return self.gas.invert_density_g(t, b)

    def _P(self, rho, b):
        """Antiderivative of g dF/drho: P(rho) = 4 b rho - c_g rho^gamma."""
        return 4.0 * b * rho - self._ci * rho ** self.gas.gamma

    def _int_g_branch(self, t, b):
        """integral_0^t g(tau, b) dtau = P(rho(t)) - P(rho_max) (closed form)."""
        rho = 1.0 / np.asarray(self.gas.invert_density_g(t, b), dtype=float)
        return self._P(rho, b) - self._P(self.gas.max_density(b), b)

    # -- public evaluators (scalar or array t, z) -----------------------

    def g_trunc(self, t, z):
        """Truncated specific volume g_eps(t, z); equals the branch inversion
        for t <= t_c - eps and the constant g_up beyond t_c - eps/2."""
        t_in = np.asarray(t, dtype=float)
        if np.any(t_in < 0.0):
            raise DomainError("momentum squared must be nonnegative")
        scalar = t_in.ndim == 0 and np.asarray(z).ndim == 0
        b = np.asarray(self._b_of(z), dtype=float)
        t, b = np.broadcast_arrays(np.atleast_1d(t_in), np.atleast_1d(b))
        tc = np.asarray(self.gas.critical_momentum_sq(b), dtype=float)
        w = np.asarray(self.cutoff.w_eps(t - tc), dtype=float)
        out = np.full(t.shape, self.g_up)
        m = w > 0.0
        if np.any(m):
            g = self.gas.invert_density_g(t[m], b[m])
            out[m] = g * w[m] + (1.0 - w[m]) * self.g_up
        return float(out[0]) if scalar else out

    def dg_dt_trunc(self, t, z):
        """d g_eps / d t = dg/dt * w + (g - g_up) * w'."""
        t_in = np.asarray(t, dtype=float)
        scalar = t_in.ndim == 0 and np.asarray(z).ndim == 0
        b = np.asarray(self._b_of(z), dtype=float)
        t, b = np.broadcast_arrays(np.atleast_1d(t_in), np.atleast_1d(b))
        tc = np.asarray(self.gas.critical_momentum_sq(b), dtype=float)
        w = np.asarray(self.cutoff.w_eps(t - tc), dtype=float)
        dw = np.asarray(self.cutoff.dw_eps(t - tc), dtype=float)
        out = np.zeros(t.shape)
        m = w > 0.0
        if np.any(m):
            g = np.asarray(self.gas.invert_density_g(t[m], b[m]), dtype=float)
            dgt = -g * g / self.gas.dF_drho(1.0 / g, b[m])
            out[m] = dgt * w[m] + (g - self.g_up) * dw[m]
        return float(out[0]) if scalar else out

    def dg_dz_trunc(self, t, z):
        """d g_eps / d z = dg/dz * w + (g_up - g) w' t_c'(B) B'(z), zero
        beyond the blend window and wherever B' vanishes."""
        t_in = np.asarray(t, dtype=float)
        scalar = t_in.ndim == 0 and np.asarray(z).ndim == 0
        t, z = np.broadcast_arrays(np.atleast_1d(t_in),
                                   np.atleast_1d(np.asarray(z, dtype=float)))
        b = np.atleast_1d(np.asarray(self._b_of(z), dtype=float))
        dbz = np.atleast_1d(np.asarray(self.bern.dz(z), dtype=float))
        tc = np.asarray(self.gas.critical_momentum_sq(b), dtype=float)
        w = np.asarray(self.cutoff.w_eps(t - tc), dtype=float)
        dw = np.asarray(self.cutoff.dw_eps(t - tc), dtype=float)
        gamma = self.gas.gamma
        dtc_db = (gamma + 1.0) / (gamma - 1.0) * tc / b
        out = np.zeros(t.shape)
        m = w > 0.0
        if np.any(m):
            g = np.asarray(self.gas.invert_density_g(t[m], b[m]), dtype=float)
            dgt = -g * g / self.gas.dF_drho(1.0 / g, b[m])
            dgz = -2.0 * dbz[m] * dgt / (g * g)
            out[m] = dgz * w[m] + (self.g_up - g) * dw[m] * dtc_db[m] * dbz[m]
        return float(out[0]) if scalar else out

    def _offset(self, z):
        """(1/gamma)(g(0,z)^-gamma - g(0,Q)^-gamma) with g(0,.) = 1/rho_max."""
        gamma = self.gas.gamma
        rs = self.gas.max_density(self._b_of(z))
        rq = self.gas.max_density(self._b_of(self.Q))
        return (np.asarray(rs, dtype=float) ** gamma - rq ** gamma) / gamma

    def _window_int(self, t, b, tc):
        """integral of g_eps over [t_c - eps, min(t, t_c - eps/2)] by fixed
        Gauss-Legendre; t, b, tc are broadcast arrays with t > t_c - eps."""
        lo = tc - self.epsilon
        hi = np.minimum(t, tc - 0.5 * self.epsilon)
        xs, ws = self._gl01
        total = np.zeros(np.shape(t))
        span = hi - lo
        for x, wgt in zip(xs, ws):
            tau = lo + x * span
            w = self.cutoff.w_eps(tau - tc)
            g = np.asarray(self.gas.invert_density_g(tau, b), dtype=float)
            total += wgt * (w * g + (1.0 - w) * self.g_up) * span
        return total

    def G_energy(self, t, z):
        """Energy density G_eps(t, z); G_eps(0, Q) = 0."""
        t_in = np.asarray(t, dtype=float)
        if np.any(t_in < 0.0):
            raise DomainError("momentum squared must be nonnegative")
        scalar = t_in.ndim == 0 and np.asarray(z).ndim == 0
        t, z = np.broadcast_arrays(np.atleast_1d(t_in),
                                   np.atleast_1d(np.asarray(z, dtype=float)))
        b = np.atleast_1d(np.asarray(self._b_of(z), dtype=float))
        tc = np.asarray(self.gas.critical_momentum_sq(b), dtype=float)
        t_cut = tc - self.epsilon
        t_end = tc - 0.5 * self.epsilon
        integral = np.asarray(
            self._int_g_branch(np.minimum(t, t_cut), b), dtype=float).copy()
        beyond = t > t_cut
        if np.any(beyond):
            integral[beyond] += self._window_int(t[beyond], b[beyond], tc[beyond])
        tail = t > t_end
        if np.any(tail):
            integral[tail] += self.g_up * (t[tail] - t_end[tail])
        out = 0.5 * integral + self._offset(z)
        return float(out[0]) if scalar else out

    def dG_dt(self, t, z):
        """d G_eps / d t = g_eps / 2."""
        return 0.5 * self.g_trunc(t, z)

    def dG_dz(self, t, z):
        """d G_eps / d z; equals B'(z) rho(t, z) on the untruncated branch."""
        t_in = np.asarray(t, dtype=float)
        scalar = t_in.ndim == 0 and np.asarray(z).ndim == 0
        t, z = np.broadcast_arrays(np.atleast_1d(t_in),
                                   np.atleast_1d(np.asarray(z, dtype=float)))
        b = np.atleast_1d(np.asarray(self._b_of(z), dtype=float))
        dbz = np.atleast_1d(np.asarray(self.bern.dz(z), dtype=float))
        tc = np.asarray(self.gas.critical_momentum_sq(b), dtype=float)
        t_cut = tc - self.epsilon
        # branch part: B' * (rho(t) - rho_max) plus the offset derivative
        # B' * rho_max collapses to B' * rho(min(t, t_cut))
        rho = 1.0 / np.asarray(
            self.gas.invert_density_g(np.minimum(t, t_cut), b), dtype=float)
        out = np.asarray(dbz * rho, dtype=float).copy()
        beyond = t > t_cut
        if np.any(beyond):
            xs, ws = self._gl01
            lo = t_cut[beyond]
            hi = np.minimum(t[beyond], tc[beyond] - 0.5 * self.epsilon)
            span = hi - lo
            acc = np.zeros(span.shape)
            for x, wgt in zip(xs, ws):
                tau = lo + x * span
                acc += wgt * np.asarray(
                    self.dg_dz_trunc(tau, z[beyond]), dtype=float) * span
            out[beyond] += 0.5 * acc
        return float(out[0]) if scalar else out

    def Phi(self, t, z):
        """Phi_eps(t, z) = -G_eps + g_eps * t; strictly increasing in t."""
        out = -np.asarray(self.G_energy(t, z), dtype=float) \
            + np.asarray(self.g_trunc(t, z), dtype=float) * np.asarray(t, dtype=float)
        return float(out) if out.ndim == 0 else out

    def lambda_of_Lambda(self, Lambda):
        """Jump coefficient lambda = sqrt(Phi_eps(Lambda^2, Q))."""
        Lambda = float(Lambda)
        if Lambda <= 0.0:
            raise DomainError("free-boundary momentum must be positive")
        return float(np.sqrt(self.Phi(Lambda * Lambda, self.Q)))

    # -- kernel tables ---------------------------------------------------

    def kernel_tables(self):
        """Band-aligned cubic-interpolation tables for the sweep kernels."""
        if self._tables is not None:
            return self._tables
        n_a, n_b, n_z = self._table_shape
        zs = np.linspace(0.0, self.Q, n_z)
        b = np.asarray(self._b_of(zs), dtype=float)
        tc = np.asarray(self.gas.critical_momentum_sq(b), dtype=float)
        xi_a = np.linspace(0.0, 1.0, n_a)[:, None]
        t_a = xi_a * (tc - self.epsilon)[None, :]
        z_a = np.broadcast_to(zs[None, :], t_a.shape)
        xi_b = np.linspace(0.0, 1.0, n_b)[:, None]
        t_b = (tc - self.epsilon)[None, :] + xi_b * (0.5 * self.epsilon)
        z_b = np.broadcast_to(zs[None, :], t_b.shape)
        GA = self.G_energy(t_a, z_a)
        GB = self.G_energy(t_b, z_b)
        DA = self.dG_dz(t_a, z_a)
        DB = self.dG_dz(t_b, z_b)

        def pad2(a):
            return _pad_cubic(_pad_cubic(a, 0), 1)

        tables = KernelTables(
            Q=self.Q, eps=self.epsilon, g_up=self.g_up,
            n_a=n_a, n_b=n_b, n_z=n_z,
            tc_z=_pad_cubic(tc, 0),
            GA=pad2(GA), GB=pad2(GB), G_end=_pad_cubic(GB[-1, :].copy(), 0),
            HA=pad2(self.g_trunc(t_a, z_a)),
            HB=pad2(self.g_trunc(t_b, z_b)),
            DA=pad2(DA), DB=pad2(DB),
            D_end=_pad_cubic(DB[-1, :].copy(), 0),
        )
        self._tables = tables
        return tables

    def validate_tables(self, n=64, seed=0):
        """Max |table - direct| error of the cached evaluator on random
        (t, z) samples spanning all three bands; must sit below 1e-8."""
        from .kernels import eval_G_reference
        rng = np.random.default_rng(seed)
        tab = self.kernel_tables()
        zs = rng.uniform(0.0, self.Q, n)
        tc = np.asarray(self.gas.critical_momentum_sq(self._b_of(zs)), dtype=float)
        ts = np.concatenate([
            rng.uniform(0.0, 1.0, n) * (tc - self.epsilon),
            tc - self.epsilon + rng.uniform(0.0, 0.5, n) * self.epsilon,
            tc + rng.uniform(0.0, 3.0, n),
        ])
        zz = np.concatenate([zs, zs, zs])
        direct = np.asarray(self.G_energy(ts, zz), dtype=float)
        cached = np.array([eval_G_reference(tab, t, z) for t, z in zip(ts, zz)])
        return float(np.max(np.abs(cached - direct)))

    # -- measured structure constants ------------------------------------

    def structure_report(self, n=10000, seed=0):
        """Empirical ellipticity and z-coupling constants on random samples:
        the extremes of g_eps, of the directional eigenvalue g_eps + 2 t dg/dt,
        of t dg/dt + g_eps, and the measured slope of |dG/dz| against (Q-z)+.
        """
        rng = np.random.default_rng(seed)
        z = rng.uniform(0.0, self.Q, n)
        t = rng.uniform(0.0, 1.5 * self.T_star, n)
        g = np.asarray(self.g_trunc(t, z), dtype=float)
        dgt = np.asarray(self.dg_dt_trunc(t, z), dtype=float)
        dGz = np.asarray(self.dG_dz(t, z), dtype=float)
        qz = self.Q - z
        return {
            "g_min": float(g.min()),
            "g_max": float(g.max()),
            "dgt_min": float(dgt.min()),
            "dgt_max": float(dgt.max()),
            "beta1_min": float((g + 2.0 * dgt * t).min()),
            "beta1_max": float((g + 2.0 * dgt * t).max()),
            "g_plus_tdg_min": float((g + dgt * t).min()),
            "delta_measured": float(np.max(np.abs(dGz) / np.maximum(qz, 1e-12))),
            "bounds": {"g_low": self.g_low, "g_up": self.g_up,
                       "dgt_bound": self.g_up / self.epsilon},
        }
