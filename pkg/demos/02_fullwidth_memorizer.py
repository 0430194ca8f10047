"""Robust memorization with one ball indicator per point.

Generates a separated dataset, builds the memorizer for l_1, l_2 and l_inf
balls at 90% of the largest meaningful radius, and checks it by sampling.
"""
import math
import time

from robustmem.datasets import RobustnessSpec, gen_random_separated, norm_constant, separation
from robustmem.memorizer import build_fullwidth, width_depth_account
from robustmem.verifier import verify_robust

ds = gen_random_separated(N=30, d=6, C=4, delta=1.0, seed=0)
delta = separation(ds)
print(f"N={ds.n} d={ds.d} classes={ds.n_classes} separation={delta:.4f}")

for p in (1.0, 2.0, math.inf):
    sigma = 0.9 * delta / (2 * norm_constant("+", p, 2, ds.d))
    spec = RobustnessSpec(p, sigma)
    t0 = time.perf_counter()
    net = build_fullwidth(ds, spec)
    rep = verify_robust(net, ds, spec, n_interior=1000, n_boundary=100, seed=1)
    acc = width_depth_account(net)
    print(f"p={p:<4} sigma={sigma:.4f}  width={net.width} (formula {acc.width_formula})  "
          f"depth={net.depth} (<= {acc.depth_bound:.0f})  "
          f"sampled check: {'pass' if rep.passed else 'FAIL'}  "
          f"[{time.perf_counter() - t0:.1f} s]")
