"""Why narrow first layers fail: two concentric sphere covers.

The inner sphere is covered by sigma-balls (label 1) and the outer sphere by
r-balls (label 2). Every rank-1 map collapses some inner neighbourhood onto
an outer point; the script finds such witnesses and shows the contrast with
a map that preserves distances between the data points themselves.
"""
import numpy as np

from robustmem.datasets import LabeledDataset, RobustnessSpec, separation
from robustmem.errors import SearchFailure
from robustmem.hardness import build_hard_instance, find_collision, witness_nonpreservation
from robustmem.netcore import AffineLayer, ReluNetwork
from robustmem.projector import certify, find_preserving_projection, sample_projection
from robustmem.verifier import verify_first_layer_obstruction

inst = build_hard_instance(60, 3, 1, 1.0, 0.45, seed=0)
print(f"{inst.dataset.n} points, inner radius {inst.r:.3f}, outer radius {inst.r + 1:.3f}, "
      f"separation {separation(inst.dataset):.4f}")
print(f"cover gaps: inner {inst.inner_report.max_gap:.3f} <= {inst.sigma}, "
      f"outer {inst.outer_report.max_gap:.3f} <= {inst.r:.3f}")

rng = np.random.default_rng(1)
for _ in range(3):
    M = sample_projection(3, 1, rng)
    w = witness_nonpreservation(M, inst)
    print(f"M={np.round(M[0], 3)}: point {w.i} vs {w.j}, residual {w.residual:.1e}")

try:
    find_preserving_projection(inst.dataset, inst.sigma, 1, max_draws=500, seed=0)
except SearchFailure as exc:
    print(f"projection search: {exc}")

M = sample_projection(3, 1, rng)
net = ReluNetwork((AffineLayer(M, [0.0]), AffineLayer([[1.0]], [1.0])))
obs = verify_first_layer_obstruction(net, inst.dataset, RobustnessSpec(2, inst.sigma))
print(f"width-1 network: outputs {obs.outputs} on two differently labeled points -> "
      f"{'refuted' if obs.refuted else 'no claim'}")

# distance preserving on the data, yet neighbourhoods collide
sigma, d = 0.1, 5
T = np.zeros((3, d))
T[0, 0], T[0, 1], T[1, 2], T[2, 3] = 1.0, -1 / sigma, 1.0, 1.0
ds = LabeledDataset([np.zeros(d), np.eye(d)[0]], [1, 2])
print(f"\n|T(x'-x)| = {np.linalg.norm(T @ ds.points[1]):.3f} = |x'-x|, "
      f"certified: {certify(T, ds, sigma, 1.0).certified}, "
      f"collision found: {find_collision(T, ds.points[:1], ds.points[1:], sigma).found}")

# smallest sigma/delta at which every one of 20 random rank-1 maps has a witness
print("\nsigma/delta  witnesses (of 20)")
smallest = None
for ratio in (0.45, 0.3, 0.2, 0.1, 0.05, 0.02):
    try:
        hi = build_hard_instance(60, 3, 1, 1.0, ratio, seed=0, n_check=4000)
    except Exception as exc:          # the cover may not fit in 60 points
        print(f"{ratio:10.3f}  no instance ({type(exc).__name__})")
        continue
    found = sum(witness_nonpreservation(sample_projection(3, 1, np.random.default_rng(t)), hi).found
                for t in range(20))
    print(f"{ratio:10.3f}  {found}")
    if found == 20:
        smallest = ratio
print(f"smallest tested ratio with 20/20 witnesses: {smallest}")
