import numpy as np, time
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import Nozzle, build_domain, boundary_data
from jetflow.minimizer import solve, SolverOptions
from jetflow.freeboundary import extract
from jetflow.asymptotics import subsonic_margin

gas = GasModel(2.0)
prof = BernoulliProfile.constant(1.5, 2.0)
Q = 0.5
st = solve_upstream(gas, prof, Q)
bern = bernoulli_of_stream(st)
en = TruncatedEnergy(gas, bern)
noz = Nozzle.log_family(2.0)
dom = build_domain(noz, 2.0, 4.0, 1.0 / 16)
for L in (0.55, 0.60, 0.65, 0.70, 0.80, 0.90):
    f = solve(en, dom, boundary_data(dom, Q, L), en.lambda_of_Lambda(L) ** 2,
              opts=SolverOptions(max_sweeps=4000))
    fb = extract(f, dom)
    mr = subsonic_margin(f, en, dom)
    print(f"L={L:.2f} gap={fb.fitgap:+.4f} l={fb.l:.3f} nfin={fb.n_finite} "
          f"margin={mr.margin:+.4f} sweeps={f.sweeps}", flush=True)
