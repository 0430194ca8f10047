"""Sampling checks of robust memorization and first-layer obstructions.

Sampling cannot prove that a network is constant on a ball; reports are
labeled as sampled evidence. The guarantee itself comes from the gadget
error budgets recorded in each network's meta.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset, RobustnessSpec, ball_sample, norm_constant
from .errors import ShapeError
from .hardness import find_collision, numerical_rank
from .netcore import ReluNetwork, evaluate, jsonable

__all__ = ["RobustnessReport", "ObstructionReport", "verify_robust",
           "verify_first_layer_obstruction", "default_threads"]

TOLERANCE = 1e-9


def default_threads() -> int:
    """Worker count from ROBUSTMEM_THREADS, default 1."""
    try:
        return max(1, int(os.environ.get("ROBUSTMEM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RobustnessReport:
    passed: bool
    worst_deviation: float
    worst_point: int
    failures: list            # per data point: number of samples off by more than the tolerance
    samples_per_point: list
    failing_indices: list
    n_interior: int
    n_boundary: int
    seed: int
    sigma: float
    p: float
    evidence: str = "sampled"
    tolerance: float = TOLERANCE

    def to_json(self):
        return jsonable(self.__dict__)


def _point_samples(x, sigma, p, n_interior, n_boundary, seed, i):
    ss = np.random.SeedSequence([int(seed), int(i)]).spawn(2)
    parts = [x[None, :]]
    if sigma > 0:
        parts.append(ball_sample(x, sigma, p, n_interior, seed=ss[0], mode="interior"))
        parts.append(ball_sample(x, sigma, p, n_boundary, seed=ss[1], mode="boundary"))
    return np.vstack(parts)


def verify_robust(net: ReluNetwork, ds: LabeledDataset, spec: RobustnessSpec,
                  n_interior: int = 1000, n_boundary: int = 100, seed: int = 0,
                  extra_points: dict | None = None, threads: int | None = None) -> RobustnessReport:
    """Evaluate ``net`` on the data points and on random points of each l_p ball.

    Each point is checked together with ``n_interior`` uniform interior
    samples and ``n_boundary`` samples on the sphere of radius sigma;
    ``extra_points`` maps a data index to additional points to test against
    that index's label. Passes iff every deviation is at most 1e-9.
    """
    if net.in_dim != ds.d:
        raise ShapeError(f"network takes {net.in_dim} inputs, dataset has dimension {ds.d}")
    threads = default_threads() if threads is None else max(1, int(threads))
    extra_points = extra_points or {}

    def run(i):
        S = _point_samples(ds.points[i], spec.sigma, spec.p, n_interior, n_boundary, seed, i)
        if i in extra_points:
            S = np.vstack([S, np.atleast_2d(extra_points[i])])
        out = evaluate(net, S)
        dev = np.abs(np.asarray(out).reshape(S.shape[0], -1)[:, 0] - ds.labels[i])
        return S.shape[0], int((dev > TOLERANCE).sum()), float(dev.max())

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(ds.n)))
    else:
        results = [run(i) for i in range(ds.n)]
    counts = [r[0] for r in results]
    fails = [r[1] for r in results]
    worst = [r[2] for r in results]
    w_idx = int(np.argmax(worst))
    failing = [i for i, f in enumerate(fails) if f]
    return RobustnessReport(not failing, worst[w_idx], w_idx, fails, counts, failing,
                            int(n_interior), int(n_boundary), int(seed), spec.sigma, spec.p)


@dataclass(frozen=True)
class ObstructionReport:
    attempted: bool
    rank: int
    found: bool
    residual: float = math.nan
    i: int = -1
    j: int = -1
    a_point: list = field(default_factory=list)
    b_point: list = field(default_factory=list)
    outputs: tuple = ()
    outputs_equal: bool = False
    radius_l2: float = 0.0
    note: str = ""

    @property
    def refuted(self) -> bool:
        return self.found and self.outputs_equal

    def to_json(self):
        out = jsonable(self.__dict__)
        out["refuted"] = self.refuted
        return out


def verify_first_layer_obstruction(net: ReluNetwork, ds: LabeledDataset, spec: RobustnessSpec,
                                   tol: float = 1e-6) -> ObstructionReport:
    """Look for two differently labeled ball points the first layer cannot tell apart.

    If the first weight matrix W has rank k < d, search a in the l_2 ball of
    radius c_minus(p, 2, d) sigma around x_i (which lies inside the l_p ball)
    and a data point x_j of another label with W(x_j - a) ~ 0. Then the whole
    network maps a and x_j to the same value, so it cannot output both labels.
    """
    W = net.layers[0].weights
    d = ds.d
    rank = numerical_rank(W)
    if rank >= d:
        return ObstructionReport(False, rank, False, note="first layer has full rank; no claim")
    rad = norm_constant("-", spec.p, 2, d) * spec.sigma
    best = None
    labels = np.unique(ds.labels)
    for c in labels:
        A_idx = np.flatnonzero(ds.labels == c)
        B_idx = np.flatnonzero(ds.labels != c)
        w = find_collision(W, ds.points[A_idx], ds.points[B_idx], rad, tol)
        w = (w, int(A_idx[w.i]), int(B_idx[w.j]))
        if best is None or w[0].residual < best[0].residual:
            best = w
        if best[0].found:
            break
    wit, i, j = best
    if not wit.found:
        return ObstructionReport(True, rank, False, wit.residual, i, j, radius_l2=rad,
                                 note="no witness; not a proof of robustness")
    fa = float(np.ravel(evaluate(net, wit.a_point))[0])
    fb = float(np.ravel(evaluate(net, wit.b_point))[0])
    return ObstructionReport(True, rank, True, wit.residual, i, j, wit.a_point.tolist(),
                             wit.b_point.tolist(), (fa, fb), abs(fa - fb) <= TOLERANCE, rad)
