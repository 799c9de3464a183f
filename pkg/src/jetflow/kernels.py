"""Hot numeric kernels for the nodal energy minimization.

Two implementations of the same sweep/energy math:

* numba ``@njit`` kernels doing lexicographic nonlinear Gauss-Seidel (the
  default), and
* a pure-numpy fallback running vectorized four-color half-sweeps.

The fallback is selected by setting the environment variable
``JETFLOW_NUMBA=0`` (or when numba is not importable).

Each free node minimizes its local four-cell energy over [0, Q].  The local
energy is convex in the nodal value, so its derivative is monotone and the
smooth-branch minimizer is found by a bracketed secant/bisection root solve
on the derivative; the plateau candidate v = Q (which switches the jump
indicator off) and the previous value are then compared by value, keeping
the per-node energy non-increasing.  All integrand evaluations come from the
band-aligned cubic tables built by ``TruncatedEnergy.kernel_tables``; beyond
the truncation window G is linear in t, g is constant and dG/dz is frozen.
"""

import os

import numpy as np

_flag = os.environ.get("JETFLOW_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off", "no")
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        def wrap(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return wrap

_GOLD = 0.5 * (3.0 - np.sqrt(5.0))
_NODE_TOL = 1e-14  # relative nodal root tolerance


# ---------------------------------------------------------------------------
# table evaluation, scalar (jitted) form
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _cr_weights(f):
    f2 = f * f
    f3 = f2 * f
    return (0.5 * (-f3 + 2.0 * f2 - f),
            0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
            0.5 * (-3.0 * f3 + 4.0 * f2 + f),
            0.5 * (f3 - f2))


@njit(cache=True, inline="always")
def _cubic1(tab, u, n):
    # tab has n+2 entries with one ghost per side; u in [0, 1]
    x = u * (n - 1)
    if x < 0.0:
        x = 0.0
    i = int(x)
    if i > n - 2:
        i = n - 2
    f = x - i
    w0, w1, w2, w3 = _cr_weights(f)
    return w0 * tab[i] + w1 * tab[i + 1] + w2 * tab[i + 2] + w3 * tab[i + 3]


@njit(cache=True, inline="always")
def _bicubic(tab, u, v, nu, nv):
    x = u * (nu - 1)
    if x < 0.0:
        x = 0.0
    i = int(x)
    if i > nu - 2:
        i = nu - 2
    fx = x - i
    y = v * (nv - 1)
    if y < 0.0:
        y = 0.0
    j = int(y)
    if j > nv - 2:
        j = nv - 2
    fy = y - j
    a0, a1, a2, a3 = _cr_weights(fx)
    b0, b1, b2, b3 = _cr_weights(fy)
    s = b0 * (a0 * tab[i, j] + a1 * tab[i + 1, j]
              + a2 * tab[i + 2, j] + a3 * tab[i + 3, j])
    s += b1 * (a0 * tab[i, j + 1] + a1 * tab[i + 1, j + 1]
               + a2 * tab[i + 2, j + 1] + a3 * tab[i + 3, j + 1])
    s += b2 * (a0 * tab[i, j + 2] + a1 * tab[i + 1, j + 2]
               + a2 * tab[i + 2, j + 2] + a3 * tab[i + 3, j + 2])
    s += b3 * (a0 * tab[i, j + 3] + a1 * tab[i + 1, j + 3]
               + a2 * tab[i + 2, j + 3] + a3 * tab[i + 3, j + 3])
    return s


@njit(cache=True, inline="always")
def _eval_G(t, z, Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
            HA, HB, DA, DB, D_end):
    zc = min(max(z, 0.0), Q)
    uz = zc / Q
    tc = _cubic1(tc_z, uz, n_z)
    tA = tc - eps
    tB = tc - 0.5 * eps
    if t <= tA:
        return _bicubic(GA, t / tA, uz, n_a, n_z)
    if t <= tB:
        return _bicubic(GB, (t - tA) / (0.5 * eps), uz, n_b, n_z)
    return _cubic1(G_end, uz, n_z) + 0.5 * g_up * (t - tB)


@njit(cache=True, inline="always")
def _eval_g_dGdz(t, z, Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                 HA, HB, DA, DB, D_end):
    zc = min(max(z, 0.0), Q)
    uz = zc / Q
    tc = _cubic1(tc_z, uz, n_z)
    tA = tc - eps
    tB = tc - 0.5 * eps
    if t <= tA:
        u = t / tA
        return _bicubic(HA, u, uz, n_a, n_z), _bicubic(DA, u, uz, n_a, n_z)
    if t <= tB:
        u = (t - tA) / (0.5 * eps)
        return _bicubic(HB, u, uz, n_b, n_z), _bicubic(DB, u, uz, n_b, n_z)
    return g_up, _cubic1(D_end, uz, n_z)


def eval_G_reference(tables, t, z):
    """Scalar python-side evaluation of the cached energy density (used for
    validating the cache against direct quadrature)."""
    return float(_eval_G(float(t), float(z), *tables.flat()))


def eval_g_reference(tables, t, z):
    """Scalar python-side evaluation of the cached (g, dG/dz) pair."""
    g, d = _eval_g_dGdz(float(t), float(z), *tables.flat())
    return float(g), float(d)


# ---------------------------------------------------------------------------
# numba sweep kernel
# ---------------------------------------------------------------------------

# The squared-gradient of a cell is the four-corner quadrature of the
# bilinear interpolant's gradient, i.e. the mean of squared edge
# differences:
#
#   t = ((b-a)^2 + (d-c)^2) / (2 h1^2) + ((c-a)^2 + (d-b)^2) / (2 h2^2).
#
# Seen from one node v this is ((v-px)^2 + q1^2)/(2 h1^2)
# + ((v-py)^2 + q2^2)/(2 h2^2), where px/py are the node's edge partners
# and q1/q2 the opposite edge differences.  Unlike the single midpoint
# gradient, this quadrature penalizes the checkerboard mode (which is
# otherwise gradient-free and gets actively excited by the jump term).

@njit(cache=True)
def _node_value(v, ncell, px, py, q1, q2, zsum, dA, ih1sq, ih2sq,
                Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                HA, HB, DA, DB, D_end):
    s = 0.0
    for c in range(ncell):
        ex = v - px[c]
        ey = v - py[c]
        t = 0.5 * ((ex * ex + q1[c] * q1[c]) * ih1sq
                   + (ey * ey + q2[c] * q2[c]) * ih2sq)
        zc = 0.25 * (zsum[c] + v)
        s += _eval_G(t, zc, Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                     HA, HB, DA, DB, D_end)
    return s * dA


@njit(cache=True)
def _node_slope(v, ncell, px, py, q1, q2, zsum, dA, ih1sq, ih2sq,
                Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                HA, HB, DA, DB, D_end):
    s = 0.0
    for c in range(ncell):
        ex = v - px[c]
        ey = v - py[c]
        t = 0.5 * ((ex * ex + q1[c] * q1[c]) * ih1sq
                   + (ey * ey + q2[c] * q2[c]) * ih2sq)
        zc = 0.25 * (zsum[c] + v)
        g, dz = _eval_g_dGdz(t, zc, Q, eps, g_up, n_a, n_b, n_z,
                             tc_z, GA, GB, G_end, HA, HB, DA, DB, D_end)
        s += g * (ex * ih1sq + ey * ih2sq) + 0.25 * dz
    return s * dA


@njit(cache=True)
def _node_minimum(v_old, ncell, px, py, q1, q2, zsum, dA, ih1sq, ih2sq, Q,
                  eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                  HA, HB, DA, DB, D_end):
    """Minimize the smooth nodal energy on [0, Q]: the derivative is
    monotone, so Illinois regula falsi on its sign change."""
    f_lo = _node_slope(0.0, ncell, px, py, q1, q2, zsum, dA, ih1sq, ih2sq,
                       Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                       HA, HB, DA, DB, D_end)
    if f_lo >= 0.0:
        return 0.0
    f_hi = _node_slope(Q, ncell, px, py, q1, q2, zsum, dA, ih1sq, ih2sq,
                       Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                       HA, HB, DA, DB, D_end)
    if f_hi <= 0.0:
        return Q
    a, fa = 0.0, f_lo
    b, fb = Q, f_hi
    side = 0
    tol = _NODE_TOL * Q
    for _ in range(100):
        if b - a <= tol:
            break
        x = b - fb * (b - a) / (fb - fa)
        if not a < x < b:
            x = 0.5 * (a + b)
        fx = _node_slope(x, ncell, px, py, q1, q2, zsum, dA, ih1sq, ih2sq,
                         Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                         HA, HB, DA, DB, D_end)
        if fx == 0.0:
            return x
        if fx < 0.0:
            a, fa = x, fx
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = x, fx
            if side == 1:
                fa *= 0.5
            side = 1
    return 0.5 * (a + b)


@njit(cache=True)
def sweep_numba(psi, free, cell_act, last_upd, skip_tol,
                theta_q, lam2, dA, h1, h2, omega, forward,
                Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                HA, HB, DA, DB, D_end):
    """One lexicographic Gauss-Seidel pass; returns the max nodal update.

    omega > 1 over-relaxes the accepted move but only when the relaxed value
    does not raise the local energy, preserving the descent property.
    skip_tol > 0 skips nodes whose 3x3 neighbourhood stayed below it in the
    previous pass (convergence is always confirmed by a full pass).
    """
    nx1, ny1 = psi.shape
    nx = nx1 - 1
    ny = ny1 - 1
    ih1sq = 1.0 / (h1 * h1)
    ih2sq = 1.0 / (h2 * h2)
    Qtheta = Q - theta_q
    px = np.empty(4)
    py = np.empty(4)
    q1 = np.empty(4)
    q2 = np.empty(4)
    zsum = np.empty(4)
    max_upd = 0.0
    for ia in range(nx1):
        i = ia if forward else nx1 - 1 - ia
        for ja in range(ny1):
            j = ja if forward else ny1 - 1 - ja
            if not free[i, j]:
                continue
            if skip_tol > 0.0:
                quiet = True
                for di in range(-1, 2):
                    ii = i + di
                    if ii < 0 or ii >= nx1:
                        continue
                    for dj in range(-1, 2):
                        jj = j + dj
                        if jj < 0 or jj >= ny1:
                            continue
                        if last_upd[ii, jj] >= skip_tol:
                            quiet = False
                            break
                    if not quiet:
                        break
                if quiet:
                    continue
            v_old = psi[i, j]
            ncell = 0
            s3 = 0.0
            for dc in range(4):
                ci = i - 1 + (dc & 1)
                cj = j - 1 + (dc >> 1)
                if ci < 0 or cj < 0 or ci >= nx or cj >= ny \
                        or not cell_act[ci, cj]:
                    continue
                a = psi[ci, cj]
                bb = psi[ci + 1, cj]
                c = psi[ci, cj + 1]
                d = psi[ci + 1, cj + 1]
                right = i == ci + 1
                top = j == cj + 1
                # edge partners of the node and the opposite edge diffs
                if right and top:      # node is d
                    px[ncell] = c
                    py[ncell] = bb
                    q1[ncell] = bb - a
                    q2[ncell] = c - a
                    others_up = a >= Qtheta and bb >= Qtheta and c >= Qtheta
                elif right:            # node is bb
                    px[ncell] = a
                    py[ncell] = d
                    q1[ncell] = d - c
                    q2[ncell] = c - a
                    others_up = a >= Qtheta and c >= Qtheta and d >= Qtheta
                elif top:              # node is c
                    px[ncell] = d
                    py[ncell] = a
                    q1[ncell] = bb - a
                    q2[ncell] = d - bb
                    others_up = a >= Qtheta and bb >= Qtheta and d >= Qtheta
                else:                  # node is a
                    px[ncell] = bb
                    py[ncell] = c
                    q1[ncell] = d - c
                    q2[ncell] = d - bb
                    others_up = bb >= Qtheta and c >= Qtheta and d >= Qtheta
                zsum[ncell] = a + bb + c + d - v_old
                # the cell is charged iff any corner is below the plateau,
                # so only cells whose other corners all sit at the plateau
                # have a v-dependent charge
                if others_up:
                    s3 += lam2 * dA
                ncell += 1
            if ncell == 0:
                continue
            v_star = _node_minimum(v_old, ncell, px, py, q1, q2, zsum, dA,
                                   ih1sq, ih2sq, Q, eps, g_up, n_a, n_b, n_z,
                                   tc_z, GA, GB, G_end, HA, HB, DA, DB, D_end)
            f_star = _node_value(v_star, ncell, px, py, q1, q2, zsum, dA,
                                 ih1sq, ih2sq, Q, eps, g_up, n_a, n_b, n_z,
                                 tc_z, GA, GB, G_end, HA, HB, DA, DB, D_end) \
                + (s3 if v_star < Qtheta else 0.0)
            fQ = _node_value(Q, ncell, px, py, q1, q2, zsum, dA,
                             ih1sq, ih2sq, Q, eps, g_up, n_a, n_b, n_z,
                             tc_z, GA, GB, G_end, HA, HB, DA, DB, D_end)
            if fQ < f_star:
                v_sel = Q
            else:
                v_sel = v_star
            v_new = v_sel
            if omega != 1.0 and v_sel != v_old:
                v_sor = v_old + omega * (v_sel - v_old)
                if v_sor < 0.0:
                    v_sor = 0.0
                elif v_sor > Q:
                    v_sor = Q
                f_old = _node_value(v_old, ncell, px, py, q1, q2, zsum, dA,
                                    ih1sq, ih2sq, Q, eps, g_up, n_a, n_b, n_z,
                                    tc_z, GA, GB, G_end,
                                    HA, HB, DA, DB, D_end) \
                    + (s3 if v_old < Qtheta else 0.0)
                f_sor = _node_value(v_sor, ncell, px, py, q1, q2, zsum, dA,
                                    ih1sq, ih2sq, Q, eps, g_up, n_a, n_b, n_z,
                                    tc_z, GA, GB, G_end,
                                    HA, HB, DA, DB, D_end) \
                    + (s3 if v_sor < Qtheta else 0.0)
                # accept the relaxed move up to summation noise; descent is
                # preserved to rounding accuracy
                if f_sor <= f_old + 1e-13 * (abs(f_old) + abs(f_sor)):
                    v_new = v_sor
            psi[i, j] = v_new
            upd = abs(v_new - v_old)
            last_upd[i, j] = upd
            if upd > max_upd:
                max_upd = upd
    return max_upd


@njit(cache=True)
def energy_numba(psi, cell_act, theta_q, lam2, dA, h1, h2,
                 Q, eps, g_up, n_a, n_b, n_z, tc_z, GA, GB, G_end,
                 HA, HB, DA, DB, D_end):
    """Total discrete energy: (bulk, jump) terms over active cells."""
    nx = psi.shape[0] - 1
    ny = psi.shape[1] - 1
    ih1sq = 1.0 / (h1 * h1)
    ih2sq = 1.0 / (h2 * h2)
    Qtheta = Q - theta_q
    bulk = 0.0
    jump = 0.0
    for ci in range(nx):
        for cj in range(ny):
            if not cell_act[ci, cj]:
                continue
            a = psi[ci, cj]
            b = psi[ci + 1, cj]
            c = psi[ci, cj + 1]
            d = psi[ci + 1, cj + 1]
            t = 0.5 * (((b - a) ** 2 + (d - c) ** 2) * ih1sq
                       + ((c - a) ** 2 + (d - b) ** 2) * ih2sq)
            zc = 0.25 * (a + b + c + d)
            bulk += _eval_G(t, zc, Q, eps, g_up, n_a, n_b, n_z,
                            tc_z, GA, GB, G_end, HA, HB, DA, DB, D_end) * dA
            if a < Qtheta or b < Qtheta or c < Qtheta or d < Qtheta:
                jump += lam2 * dA
    return bulk, jump


# ---------------------------------------------------------------------------
# pure-numpy fallback path
# ---------------------------------------------------------------------------

def _cubic1_vec(tab, u, n):
    x = np.clip(u * (n - 1), 0.0, None)
    i = np.minimum(x.astype(np.int64), n - 2)
    f = x - i
    f2 = f * f
    f3 = f2 * f
    w0 = 0.5 * (-f3 + 2.0 * f2 - f)
    w1 = 0.5 * (3.0 * f3 - 5.0 * f2 + 2.0)
    w2 = 0.5 * (-3.0 * f3 + 4.0 * f2 + f)
    w3 = 0.5 * (f3 - f2)
    return w0 * tab[i] + w1 * tab[i + 1] + w2 * tab[i + 2] + w3 * tab[i + 3]


def _bicubic_vec(tab, u, v, nu, nv):
    x = np.clip(u * (nu - 1), 0.0, None)
    i = np.minimum(x.astype(np.int64), nu - 2)
    fx = x - i
    y = np.clip(v * (nv - 1), 0.0, None)
    j = np.minimum(y.astype(np.int64), nv - 2)
    fy = y - j
    fx2 = fx * fx
    fx3 = fx2 * fx
    ax = (0.5 * (-fx3 + 2.0 * fx2 - fx), 0.5 * (3.0 * fx3 - 5.0 * fx2 + 2.0),
          0.5 * (-3.0 * fx3 + 4.0 * fx2 + fx), 0.5 * (fx3 - fx2))
    fy2 = fy * fy
    fy3 = fy2 * fy
    by = (0.5 * (-fy3 + 2.0 * fy2 - fy), 0.5 * (3.0 * fy3 - 5.0 * fy2 + 2.0),
          0.5 * (-3.0 * fy3 + 4.0 * fy2 + fy), 0.5 * (fy3 - fy2))
    s = np.zeros(np.shape(u))
    for bb in range(4):
        row = np.zeros(np.shape(u))
        for aa in range(4):
            row = row + ax[aa] * tab[i + aa, j + bb]
        s = s + by[bb] * row
    return s


def _bands(tables, t, z):
    Q, eps = tables.Q, tables.eps
    uz = np.clip(np.asarray(z, dtype=float), 0.0, Q) / Q
    tc = _cubic1_vec(tables.tc_z, uz, tables.n_z)
    t, uz, tc = np.broadcast_arrays(np.asarray(t, dtype=float), uz, tc)
    tA = tc - eps
    tB = tc - 0.5 * eps
    m_a = t <= tA
    m_b = (~m_a) & (t <= tB)
    m_t = ~(m_a | m_b)
    return uz, tA, tB, m_a, m_b, m_t


def eval_G_numpy(tables, t, z):
    """Vectorized table evaluation of the energy density."""
    uz, tA, tB, m_a, m_b, m_t = _bands(tables, t, z)
    t = np.broadcast_to(np.asarray(t, dtype=float), uz.shape)
    out = np.empty(uz.shape)
    if np.any(m_a):
        out[m_a] = _bicubic_vec(tables.GA, t[m_a] / tA[m_a], uz[m_a],
                                tables.n_a, tables.n_z)
    if np.any(m_b):
        out[m_b] = _bicubic_vec(tables.GB, (t[m_b] - tA[m_b]) / (0.5 * tables.eps),
                                uz[m_b], tables.n_b, tables.n_z)
    if np.any(m_t):
        out[m_t] = _cubic1_vec(tables.G_end, uz[m_t], tables.n_z) \
            + 0.5 * tables.g_up * (t[m_t] - tB[m_t])
    return out


def eval_g_dGdz_numpy(tables, t, z):
    """Vectorized table evaluation of (g, dG/dz)."""
    uz, tA, tB, m_a, m_b, m_t = _bands(tables, t, z)
    t = np.broadcast_to(np.asarray(t, dtype=float), uz.shape)
    g = np.empty(uz.shape)
    dz = np.empty(uz.shape)
    if np.any(m_a):
        u = t[m_a] / tA[m_a]
        g[m_a] = _bicubic_vec(tables.HA, u, uz[m_a], tables.n_a, tables.n_z)
        dz[m_a] = _bicubic_vec(tables.DA, u, uz[m_a], tables.n_a, tables.n_z)
    if np.any(m_b):
        u = (t[m_b] - tA[m_b]) / (0.5 * tables.eps)
        g[m_b] = _bicubic_vec(tables.HB, u, uz[m_b], tables.n_b, tables.n_z)
        dz[m_b] = _bicubic_vec(tables.DB, u, uz[m_b], tables.n_b, tables.n_z)
    if np.any(m_t):
        g[m_t] = tables.g_up
        dz[m_t] = _cubic1_vec(tables.D_end, uz[m_t], tables.n_z)
    return g, dz


def cell_gradient_sq(psi, h1, h2):
    """Cell squared gradient by the four-corner quadrature of the bilinear
    interpolant (the mean of squared edge differences)."""
    a = psi[:-1, :-1]
    b = psi[1:, :-1]
    c = psi[:-1, 1:]
    d = psi[1:, 1:]
    return 0.5 * (((b - a) ** 2 + (d - c) ** 2) / (h1 * h1)
                  + ((c - a) ** 2 + (d - b) ** 2) / (h2 * h2))


def energy_numpy(psi, cell_act, theta_q, lam2, dA, h1, h2, tables):
    """Vectorized total discrete energy: (bulk, jump)."""
    Q = tables.Q
    a = psi[:-1, :-1]
    b = psi[1:, :-1]
    c = psi[:-1, 1:]
    d = psi[1:, 1:]
    t = cell_gradient_sq(psi, h1, h2)
    zc = 0.25 * (a + b + c + d)
    G = eval_G_numpy(tables, t, zc)
    bulk = float(np.sum(G[cell_act]) * dA)
    Qtheta = Q - theta_q
    below = (a < Qtheta) | (b < Qtheta) | (c < Qtheta) | (d < Qtheta)
    jump = float(lam2 * dA * np.count_nonzero(below & cell_act))
    return bulk, jump


class ColorPlan:
    """Per-color node lists with their incident-cell geometry, precomputed
    once per mask for the vectorized fallback sweep.  Nodes of one color
    never share a cell, so a color can be updated simultaneously."""

    def __init__(self, free, cell_act, h1, h2, dA):
        nx1, ny1 = free.shape
        nx, ny = nx1 - 1, ny1 - 1
        self.h1, self.h2, self.dA = h1, h2, dA
        self.colors = []
        ii_all, jj_all = np.nonzero(free)
        for a in (0, 1):
            for b in (0, 1):
                sel = ((ii_all % 2) == a) & ((jj_all % 2) == b)
                ii = ii_all[sel].astype(np.int64)
                jj = jj_all[sel].astype(np.int64)
                if ii.size == 0:
                    continue
                ci = np.stack([ii - 1, ii, ii - 1, ii], axis=1)
                cj = np.stack([jj - 1, jj - 1, jj, jj], axis=1)
                valid = (ci >= 0) & (cj >= 0) & (ci < nx) & (cj < ny)
                civ = np.clip(ci, 0, nx - 1)
                cjv = np.clip(cj, 0, ny - 1)
                act = valid & cell_act[civ, cjv]
                sx = np.where(ii[:, None] == civ + 1, 1.0, -1.0) / (2.0 * h1)
                sy = np.where(jj[:, None] == cjv + 1, 1.0, -1.0) / (2.0 * h2)
                self.colors.append(dict(ii=ii, jj=jj, ci=civ, cj=cjv,
                                        act=act, sx=sx, sy=sy))


def sweep_numpy(psi, plan, theta_q, lam2, omega, tables):
    """Four-color vectorized sweep: per color, bisection on the monotone
    nodal energy derivative, then the same candidate comparison as the
    jitted path."""
    Q = tables.Q
    dA = plan.dA
    Qtheta = Q - theta_q
    max_upd = 0.0

    ih1sq = 1.0 / (plan.h1 * plan.h1)
    ih2sq = 1.0 / (plan.h2 * plan.h2)
    for col in plan.colors:
        ii, jj = col["ii"], col["jj"]
        act = col["act"]
        ci, cj = col["ci"], col["cj"]
        a = psi[ci, cj]
        b = psi[ci + 1, cj]
        c = psi[ci, cj + 1]
        d = psi[ci + 1, cj + 1]
        v_old = psi[ii, jj]
        right = ii[:, None] == ci + 1
        top = jj[:, None] == cj + 1
        # edge partners and opposite-edge differences per corner role
        px = np.where(right, np.where(top, c, a), np.where(top, d, b))
        py = np.where(top, np.where(right, b, a), np.where(right, d, c))
        q1 = np.where(top, b - a, d - c)
        q2 = np.where(right, c - a, d - b)
        zsum = a + b + c + d - v_old[:, None]
        corners = np.stack([a, b, c, d], axis=2)
        own = np.stack([
            (ii[:, None] == ci) & (jj[:, None] == cj),
            right & (jj[:, None] == cj),
            (ii[:, None] == ci) & top,
            right & top,
        ], axis=2)
        others_up = np.all(np.where(own, np.inf, corners) >= Qtheta, axis=2)
        s3 = lam2 * dA * np.sum(others_up & act, axis=1)

        def f_value(vv):
            ex = vv[:, None] - px
            ey = vv[:, None] - py
            t = 0.5 * ((ex * ex + q1 * q1) * ih1sq + (ey * ey + q2 * q2) * ih2sq)
            zc = 0.25 * (zsum + vv[:, None])
            G = eval_G_numpy(tables, t, zc)
            return np.sum(np.where(act, G, 0.0), axis=1) * dA

        def f_slope(vv):
            ex = vv[:, None] - px
            ey = vv[:, None] - py
            t = 0.5 * ((ex * ex + q1 * q1) * ih1sq + (ey * ey + q2 * q2) * ih2sq)
            zc = 0.25 * (zsum + vv[:, None])
            g, dz = eval_g_dGdz_numpy(tables, t, zc)
            term = g * (ex * ih1sq + ey * ih2sq) + 0.25 * dz
            return np.sum(np.where(act, term, 0.0), axis=1) * dA

        lo = np.zeros(ii.size)
        hi = np.full(ii.size, Q)
        at_lo = f_slope(lo) >= 0.0
        at_hi = f_slope(hi) <= 0.0
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            pos = f_slope(mid) >= 0.0
            hi = np.where(pos, mid, hi)
            lo = np.where(pos, lo, mid)
        v_star = 0.5 * (lo + hi)
        v_star = np.where(at_lo, 0.0, np.where(at_hi, Q, v_star))
        f_star = f_value(v_star) + np.where(v_star < Qtheta, s3, 0.0)
        fQ = f_value(np.full(ii.size, Q))
        v_sel = np.where(fQ < f_star, Q, v_star)
        if omega != 1.0:
            v_sor = np.clip(v_old + omega * (v_sel - v_old), 0.0, Q)
            f_old = f_value(v_old) + np.where(v_old < Qtheta, s3, 0.0)
            f_sor = f_value(v_sor) + np.where(v_sor < Qtheta, s3, 0.0)
            use = f_sor <= f_old + 1e-13 * (np.abs(f_old) + np.abs(f_sor))
            v_sel = np.where(use, v_sor, v_sel)
        psi[ii, jj] = v_sel
        if ii.size:
            max_upd = max(max_upd, float(np.max(np.abs(v_sel - v_old))))
    return max_upd
