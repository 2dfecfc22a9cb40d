"""The explicit constants of the sup-bound and how they grow with C*.

``A`` is an infinite product over the Moser exponent ladder; it is
truncated once a closed-form bound on the tail of ``log A`` drops below
the requested tolerance.
"""

from nmplab import c0, constant_set, product_A

print(f"C0(3) = {c0(3):.9f}   (288 * 2^(-4/3) = {288 * 2 ** (-4 / 3):.9f})")
print(f"C0(4) = {c0(4)}")

A0, _ = product_A(3, 2.0, 0.0)
print(f"A at C* = 0, (n, p) = (3, 2): {A0:.12f}  vs 2^(2/3) = {2 ** (2 / 3):.12f}\n")

print(f"{'C*':>6} {'C1':>8} {'A':>12} {'C2':>14} {'coef_f':>14} {'k*':>4}")
for cstar in (0.1, 0.25, 0.5, 1.0, 1.5):
    cs = constant_set(3, 2.0, cstar)
    print(f"{cstar:6.2f} {cs.C1:8.3f} {cs.A:12.5g} {cs.C2:14.6g} {cs.coef_f:14.6g} {cs.k_star:4d}")

print("\nLarger p shortens the ladder: k* for C* = 1 at p = 2, 3, 5, 10:",
      [constant_set(3, p, 1.0).k_star for p in (2.0, 3.0, 5.0, 10.0)])
