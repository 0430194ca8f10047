"""Arithmetic gadgets: how error, width and depth trade off.

Builds the square, product and power networks at a few target errors and
measures the uniform error on a fine grid.
"""
import numpy as np

from robustmem.gadgets import build_mult, build_power, build_square, build_step

t = np.linspace(0.0, 1.0, 5001)[:, None]
print(f"{'gadget':<18}{'eps':>8}{'width':>7}{'depth':>7}{'max err':>12}")
for eps in (1e-1, 1e-2, 1e-3):
    sq = build_square(eps)
    err = np.abs(sq(t) - t[:, 0] ** 2).max()
    print(f"{'square':<18}{eps:>8g}{sq.width:>7}{sq.depth:>7}{err:>12.2e}")
    for p in (3, 2.5):
        g = build_power(eps, p)
        err = np.abs(g(t) - t[:, 0] ** p).max()
        print(f"{'power p=' + str(p):<18}{eps:>8g}{g.width:>7}{g.depth:>7}{err:>12.2e}")

# the product rides on three squares: ab = 2 s((a+b)/2) - s(a)/2 - s(b)/2
g = np.linspace(0, 1, 201)
AB = np.array(np.meshgrid(g, g)).reshape(2, -1).T
m = build_mult(1e-3)
print(f"\nmult: width {m.width}, depth {m.depth}, "
      f"max err {np.abs(m(AB) - AB[:, 0] * AB[:, 1]).max():.2e}")

# the step network is exact on its plateaus
psi = build_step(4)
print("step(4) at 0.8, 2.1, 3.25, 4.0:", psi(np.array([[0.8], [2.1], [3.25], [4.0]])))
