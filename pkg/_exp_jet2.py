import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import Nozzle, build_domain, boundary_data
from jetflow.minimizer import (solve, SolverOptions, initial_field,
                               relax_sweep, horizontal_monotonicity)

gas = GasModel(2.0)
prof = BernoulliProfile.constant(1.5, 2.0)
Q = 1.0
st = solve_upstream(gas, prof, Q)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
noz = Nozzle.log_family(2.0)
dom = build_domain(noz, 2.0, 4.0, 1.0 / 16)
bd = boundary_data(dom, Q, 1.0)
lam2 = en.lambda_of_Lambda(1.0) ** 2
f = initial_field(dom, bd)
thr = Q * (1 - 1e-12)
t0 = time.time()
for k in range(3000):
    uf = relax_sweep(f, en, dom, lam2, forward=True, omega=1.85)
    ub = relax_sweep(f, en, dom, lam2, forward=False, omega=1.85)
    u = max(uf, ub)
    if k % 100 == 0:
        nplat = int(np.count_nonzero((f.psi >= thr) & dom.free))
        mono = horizontal_monotonicity(f, dom)
        print(f"sweep {k}: upd={u:.3e} plateau={nplat} mono={mono:.2e} "
              f"t={time.time()-t0:.0f}s", flush=True)
    if u < 1e-8 * Q:
        print("converged at sweep", k, flush=True)
        break
nplat = int(np.count_nonzero((f.psi >= thr) & dom.free))
mono = horizontal_monotonicity(f, dom)
print("final: plateau", nplat, "mono", mono)
# where are the worst monotonicity violations?
d = np.diff(f.psi, axis=0)
ok = (dom.mask >= 0)[:-1, :] & (dom.mask >= 0)[1:, :]
d = np.where(ok, d, np.inf)
idx = np.unravel_index(np.argsort(d, axis=None)[:8], d.shape)
for i, j in zip(*idx):
    print(f"  drop {d[i,j]:.3e} at i={i} j={j} x1={dom.x1[i]:.3f} "
          f"x2={dom.x2[j]:.3f} psi={f.psi[i,j]:.4f}->{f.psi[i+1,j]:.4f} "
          f"mask {dom.mask[i,j]} {dom.mask[i+1,j]}")
