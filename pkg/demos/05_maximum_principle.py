"""The sup-bound on random subsolutions, and the solver behind it.

An instance is built backwards: pick ``u``, a flux ``Phi`` and a
nonnegative slack, then set ``f = Lap u - div Phi - slack``.  The checks
compare ``sup u`` with the right-hand sides built from the constants.
"""

import numpy as np

from nmplab import build_from_spec, check_moser_bound, check_solution_bound, check_theorem_A
from nmplab import estimate_cstar, minimize_energy, solve_poisson
from nmplab.harness import random_field, random_instance, random_vector_field
from nmplab.norms import norm_star

m = build_from_spec("torus:3:8:1")
cstar = estimate_cstar(m).value

f = random_field(m, 20, 1, zero_mean=False)
Phi = random_vector_field(m, 20, 2)
v = solve_poisson(m, f, Phi)
cg = minimize_energy(m, f, Phi)
print(f"spectral vs CG solve: {norm_star(v - cg.v, 2.0):.1e} after {cg.iterations} CG steps")

for p in (2.0, 5.0):
    inst = random_instance(m, 20, 3, p=p)
    for name, rec in (
        ("moser", check_moser_bound(inst, cstar)),
        ("solution", check_solution_bound(m, f, Phi, cstar, p)),
        ("A", check_theorem_A(inst, cstar)),
    ):
        print(f"p = {p:g} {name:>8}: lhs {rec.lhs:9.4f}  rhs {rec.rhs:12.4g}  slack {rec.slack_ratio:9.1f}")
