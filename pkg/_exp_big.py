import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import Nozzle, build_domain
from jetflow.minimizer import SolverOptions, horizontal_monotonicity
from jetflow.freeboundary import continuous_fit, FitOptions, jump_check, plateau_height
from jetflow.asymptotics import downstream_state, subsonic_margin, mass_flux_sections

gas = GasModel(2.0)
prof = BernoulliProfile.constant(1.5, 2.0)
Q = 0.5
st = solve_upstream(gas, prof, Q)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
noz = Nozzle.log_family(2.0)
dom = build_domain(noz, 2.0, 4.0, 6.0 / 128, h2=1.0 / 52)
print("grid", dom.nx, dom.ny, flush=True)

t0 = time.time()
shot = continuous_fit(en, dom, Q, opts=FitOptions(warm_start=True),
                      solver_opts=SolverOptions(max_sweeps=8000))
print(f"fit Lambda={shot.Lambda_fit:.5f} conv={shot.converged} "
      f"trials={len(shot.history)} t={time.time()-t0:.0f}s", flush=True)
for L, g, e in shot.history:
    print(f"  L={L:.5f} gap={g:+.4f}")
f = shot.field
print("mono:", horizontal_monotonicity(f, dom))
js = jump_check(f, shot.boundary, en, shot.Lambda_fit, dom)
print("jump:", js)
mr = subsonic_margin(f, en, dom)
print("margin:", mr.margin, mr.subsonic)
dn = downstream_state(st, shot.Lambda_fit)
pl = plateau_height(f, dom)
print("H_down:", dn.H_down, "plateau:", pl, "2h2:", 2 * dom.h2)
print("mass sections:", mass_flux_sections(f, en, dom), "Q =", Q)
