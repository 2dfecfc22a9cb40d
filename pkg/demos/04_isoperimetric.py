"""Lower estimates of the normalized isoperimetric constant C*.

Three estimators: the half-slab on a torus (a closed-form candidate),
sweep cuts over low eigenvector level sets, and a projected ascent on the
Sobolev quotient.  On small graphs the sweep is compared with brute force.
"""

import itertools

import numpy as np

from nmplab import build_from_spec, cheeger_sweep, slab_candidate, sobolev_ratio_ascent

t3 = build_from_spec("torus:3:8:1")
print(f"T3 slab   {slab_candidate(t3).value:.6f}")
print(f"T3 sweep  {cheeger_sweep(t3).value:.6f}")
print(f"T3 ascent {sobolev_ratio_ascent(t3, restarts=5).value:.6f}  (a different, weaker quotient)")

s3 = build_from_spec("sphere3:128")
print(f"\nS3 sweep  {cheeger_sweep(s3).value:.6f}  (hemisphere cut)")

for spec in ("cycle:10", "complete:6"):
    g = build_from_spec(spec)
    n, N, vol = g.n_intrinsic, g.size, g.volume
    best = 0.0
    for k in range(1, N):
        for S in itertools.combinations(range(N), k):
            inside = np.zeros(N, bool)
            inside[list(S)] = True
            v = g.weights[inside].sum()
            cut = sum(c for i, j, c in g.edges if inside[int(i)] != inside[int(j)])
            if v <= vol / 2 and cut > 0:
                best = max(best, v ** ((n - 1) / n) / cut)
    print(f"{spec:>10}: sweep ratio {cheeger_sweep(g).diagnostics['ratio']:.6f}, brute force {best:.6f}")
