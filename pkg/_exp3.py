import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import strip_domain, dirichlet_from_profiles
from jetflow.minimizer import solve, SolverOptions
from jetflow.oned import dirichlet_profile, downstream_profile

gas = GasModel(2.0)
prof = BernoulliProfile.cosine(1.5, 0.01, 2.0)
st = solve_upstream(gas, prof, 1.0)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
Q, H = st.Q, 2.0
oracle = dirichlet_profile(en, H, Q)

devs = {}
for n in (64, 128):
    dom = strip_domain(-1.0, 1.0, H, h=2.0 / n, ny=n)
    bd = dirichlet_from_profiles(dom, oracle, oracle, Q)
    t0 = time.time()
    f = solve(en, dom, bd, lam2=0.0, opts=SolverOptions(tol=1e-11, max_sweeps=3000))
    dev = np.max(np.abs(f.psi - oracle(dom.x2)[None, :]))
    devs[n] = dev
    hist = np.array(f.energy_history)
    mono = np.all(np.diff(hist) <= 1e-11 * np.abs(hist[0]) + 1e-15)
    print(f"n={n}: sweeps={f.sweeps} conv={f.converged} dev={dev:.3e} "
          f"mono={mono} t={time.time()-t0:.1f}s", flush=True)
print("ratio:", devs[64] / devs[128])

# downstream half-strip: Dirichlet sides from the downstream profile
Lam = 0.55
dn = downstream_profile(en, Q, Lam)
print("downstream height", dn.height, flush=True)
n = 64
dom = strip_domain(0.0, 2.0, dn.height, h=2.0 / n, ny=n)
bd = dirichlet_from_profiles(dom, dn, dn, Q)
f = solve(en, dom, bd, lam2=0.0, opts=SolverOptions(tol=1e-11, max_sweeps=3000))
dev = np.max(np.abs(f.psi - dn(dom.x2)[None, :]))
print(f"half-strip: sweeps={f.sweeps} conv={f.converged} dev={dev:.3e}")
