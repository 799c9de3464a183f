import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import strip_domain, dirichlet_from_profiles
from jetflow.minimizer import relax_sweep, initial_field
from jetflow.oned import dirichlet_profile

gas = GasModel(2.0)
prof = BernoulliProfile.cosine(1.5, 0.01, 2.0)
st = solve_upstream(gas, prof, 1.0)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
Q, H = st.Q, 2.0
oracle = dirichlet_profile(en, H, Q)
n = 64
dom = strip_domain(-1.0, 1.0, H, h=2.0 / n, ny=n)
bd = dirichlet_from_profiles(dom, oracle, oracle, Q)
f = initial_field(dom, bd)
t0 = time.time()
u = relax_sweep(f, en, dom, 0.0)
print("compile+first sweep:", round(time.time() - t0, 1), "s; upd", u, flush=True)
t0 = time.time()
for k in range(600):
    uf = relax_sweep(f, en, dom, 0.0, forward=True, omega=1.85)
    ub = relax_sweep(f, en, dom, 0.0, forward=False, omega=1.85)
    if k % 50 == 0 or max(uf, ub) < 1e-11 * Q:
        dev = np.max(np.abs(f.psi - oracle(dom.x2)[None, :]))
        print(f"sweep {k}: upd={max(uf,ub):.3e} dev={dev:.3e} "
              f"t={time.time()-t0:.1f}", flush=True)
    if max(uf, ub) < 1e-11 * Q:
        print("converged at", k, flush=True)
        break
