import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import Nozzle, build_domain, boundary_data
from jetflow.minimizer import solve, SolverOptions, horizontal_monotonicity
from jetflow.freeboundary import continuous_fit, FitOptions, extract, jump_check, plateau_height
from jetflow.oned import downstream_profile
from jetflow.asymptotics import downstream_state, subsonic_margin

gas = GasModel(2.0)
prof = BernoulliProfile.constant(1.5, 2.0)
Q = 0.5
st = solve_upstream(gas, prof, Q)
print("rho_bar", st.rho_bar, "window", st.Q_star, st.Q_upper, flush=True)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
noz = Nozzle.log_family(2.0)
h = 1.0 / 16
dom = build_domain(noz, 2.0, 4.0, h)
print("grid", dom.nx, dom.ny, "b_mu", dom.b_mu, dom.counts(), flush=True)

t0 = time.time()
sol = solve(en, dom, boundary_data(dom, Q, 1.0), en.lambda_of_Lambda(1.0) ** 2,
            opts=SolverOptions(max_sweeps=4000))
print("single solve:", sol.sweeps, "sweeps", sol.converged,
      round(time.time() - t0, 1), "s", flush=True)
fb = extract(sol, dom)
print("fitgap at Lambda=Q:", fb.fitgap, "l:", fb.l, "nfin", fb.n_finite, flush=True)

t0 = time.time()
shot = continuous_fit(en, dom, Q, opts=FitOptions(),
                      solver_opts=SolverOptions(max_sweeps=4000))
print("fit:", shot.Lambda_fit, "gap", min(abs(g) for _, g, _ in shot.history),
      "trials", len(shot.history), "conv", shot.converged,
      round(time.time() - t0, 1), "s", flush=True)
for L, g, e in shot.history:
    print(f"  L={L:.4f} gap={g:+.4f} E={e:.6f}")

f = shot.field
print("monotone min dpsi:", horizontal_monotonicity(f, dom))
print("bounds:", float(f.psi.min()), float(f.psi.max()), Q)
js = jump_check(f, shot.boundary, en, shot.Lambda_fit, dom)
print("jump:", js)
mr = subsonic_margin(f, en, dom)
print("margin:", mr.margin, "subsonic:", mr.subsonic)
dn = downstream_state(st, shot.Lambda_fit)
pl = plateau_height(f, dom)
dn1d = downstream_profile(en, Q, shot.Lambda_fit)
print("H_down ODE:", dn.H_down, " 1d-profile:", dn1d.height, " plateau 2D:", pl)
