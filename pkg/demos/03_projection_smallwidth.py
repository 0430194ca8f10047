"""Narrow memorizers through a certified random projection.

A random rank-k' projection, scaled by 1/epsilon, keeps the neighbourhoods
of differently labeled points apart; the memorizer then works in R^k'.
"""
import numpy as np

from robustmem.datasets import RobustnessSpec, gen_random_separated, separation
from robustmem.memorizer import bound_constants, build_smallwidth
from robustmem.projector import find_preserving_projection, required_epsilon
from robustmem.verifier import verify_robust

d, k, N = 12, 10, 4
ds = gen_random_separated(N, d, 2, 1.0, seed=5)
delta = separation(ds)
a = bound_constants(2, 2, d)[0]
sigma = 0.9 * a * N ** (-2 / (k - 6)) * delta
print(f"d={d} k={k} N={N} delta={delta:.3f} sigma={sigma:.5f}")
print(f"projection rank {k - 6}, scale epsilon = {required_epsilon(N, d, k - 6):.4f}")

cert = find_preserving_projection(ds, sigma, k - 6, seed=0)
print(f"certified after {cert.draws_used} draw(s); smallest margin {cert.margins.min():.4f}")

net = build_smallwidth(ds, RobustnessSpec(2, sigma), k, seed=0)
rep = verify_robust(net, ds, RobustnessSpec(2, sigma), 1000, 100, seed=2)
print(f"network width {net.width}, depth {net.depth}, sampled check "
      f"{'pass' if rep.passed else 'FAIL'}")

# with sigma = 0 the width no longer depends on d at all
ds0 = gen_random_separated(40, 20, 5, 1.0, seed=1)
net0 = build_smallwidth(ds0, RobustnessSpec(2, 0.0), 7, seed=0)
ok = np.array_equal(net0(ds0.points), ds0.labels.astype(float))
print(f"sigma=0: 40 points in R^20 memorized at width {net0.width}: {ok}")

# per-draw success rate of the certificate at and beyond the guaranteed radius
from robustmem.projector import certify, sample_projection
print("\n d   k  radius x guarantee  success rate (200 draws)")
rng = np.random.default_rng(7)
for d_, k_ in ((20, 8), (80, 8)):
    ds_ = gen_random_separated(6, d_, 2, 1.0, seed=3)
    eps = required_epsilon(6, d_, k_)
    for factor in (1, 4, 8, 12):
        sig = factor * 0.25 * separation(ds_) * eps / 2
        hits = sum(certify(sample_projection(d_, k_, rng), ds_, sig, eps).certified
                   for _ in range(200))
        print(f"{d_:2d} {k_:3d}  {factor:18d}  {hits / 200:.3f}")
