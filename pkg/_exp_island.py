import numpy as np
from jetflow.gas import GasModel
from jetflow.upstream import BernoulliProfile, solve_upstream, bernoulli_of_stream
from jetflow.truncation import TruncatedEnergy
from jetflow.domain import Nozzle, build_domain, boundary_data
from jetflow.minimizer import SolverOptions, initial_field, relax_sweep

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
for k in range(300):
    relax_sweep(f, en, dom, lam2, forward=True, omega=1.85)
    relax_sweep(f, en, dom, lam2, forward=False, omega=1.85)

i, j = 85, 9
print("psi around node:")
print(np.round(f.psi[i-2:i+3, j-2:j+3].T[::-1], 4))
print("mask:")
print(dom.mask[i-2:i+3, j-2:j+3].T[::-1])

# local energy of node (i,j) as a function of v, by direct evaluation
def local_energy(v):
    psi = f.psi.copy()
    psi[i, j] = v
    tot = 0.0
    for ci in (i-1, i):
        for cj in (j-1, j):
            if not dom.cell_active[ci, cj]:
                continue
            a, b2 = psi[ci, cj], psi[ci+1, cj]
            c, d = psi[ci, cj+1], psi[ci+1, cj+1]
            gx = (b2 + d - a - c) / (2*dom.h1)
            gy = (c + d - a - b2) / (2*dom.h2)
            t = gx*gx + gy*gy
            zc = 0.25*(a+b2+c+d)
            G = float(en.G_energy(t, zc))
            ind = lam2 if max(a, b2, c, d) < Q*(1-1e-12) else 0.0
            tot += (G + ind) * dom.h1 * dom.h2
    return tot

vs = np.linspace(0, Q, 9)
for v in vs:
    print(f"v={v:.3f} E={local_energy(v):.8f}")
print("E(Q)", local_energy(Q), " E(0.6)", local_energy(0.6))
