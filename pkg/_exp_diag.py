import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import Nozzle, build_domain, boundary_data
from jetflow.minimizer import solve, SolverOptions, horizontal_monotonicity
from jetflow.freeboundary import extract

gas = GasModel(2.0)
prof = BernoulliProfile.constant(1.5, 2.0)
Q = 0.5
st = solve_upstream(gas, prof, Q)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
noz = Nozzle.log_family(2.0)
dom = build_domain(noz, 2.0, 4.0, 6.0 / 128, h2=1.0 / 52)

for L in (1.0, 0.62):
    t0 = time.time()
    f = solve(en, dom, boundary_data(dom, Q, L), en.lambda_of_Lambda(L) ** 2,
              opts=SolverOptions(max_sweeps=8000))
    fb = extract(f, dom)
    mono = horizontal_monotonicity(f, dom)
    print(f"cold L={L}: gap={fb.fitgap:+.5f} l={fb.l:.4f} mono={mono:.2e} "
          f"sweeps={f.sweeps} conv={f.converged} t={time.time()-t0:.0f}s",
          flush=True)
    if mono < -1e-8 * Q:
        d = np.diff(f.psi, axis=0)
        ok = (dom.mask >= 0)[:-1, :] & (dom.mask >= 0)[1:, :]
        d = np.where(ok, d, np.inf)
        idx = np.unravel_index(np.argsort(d, axis=None)[:6], d.shape)
        for i, j in zip(*idx):
            print(f"   drop {d[i,j]:.2e} at x1={dom.x1[i]:.3f} "
                  f"x2={dom.x2[j]:.3f} psi={f.psi[i,j]:.5f}->"
                  f"{f.psi[i+1,j]:.5f} masks {dom.mask[i,j]},{dom.mask[i+1,j]}",
                  flush=True)
    # top rows of the boundary
    x2f, upf = fb.finite()
    print("   top rows:", [(round(a, 3), round(b, 4))
                           for a, b in zip(x2f[-5:], upf[-5:])], flush=True)
