import math

import numpy as np
import pytest

from robustmem.datasets import LabeledDataset, RobustnessSpec, gen_random_separated
from robustmem.errors import ShapeError
from robustmem.memorizer import build_fullwidth
from robustmem.netcore import AffineLayer, ReluNetwork, affine_net
from robustmem.verifier import (default_threads, verify_first_layer_obstruction,
                                verify_robust)


def step_net():
    # 1 + [x]_+ - [x - 1]_+ : equals 1 for x <= 0 and 2 for x >= 1
    return ReluNetwork((AffineLayer([[1.0], [1.0]], [0.0, -1.0]), AffineLayer([[1.0, -1.0]], [1.0])))


def line_data():
    return LabeledDataset([[-1.0], [2.0]], [1, 2])


def test_passes_when_robust():
    rep = verify_robust(step_net(), line_data(), RobustnessSpec(2, 0.9), 200, 20, seed=0)
    assert rep.passed and rep.worst_deviation <= 1e-12 and rep.failing_indices == []
    assert rep.samples_per_point == [221, 221] and rep.evidence == "sampled"


def test_fails_when_radius_too_large():
    rep = verify_robust(step_net(), line_data(), RobustnessSpec(2, 1.5), 200, 20, seed=0)
    assert not rep.passed and rep.failing_indices == [0, 1]
    assert rep.worst_deviation > 0.1


def test_constant_net_fails_on_other_class():
    ds = gen_random_separated(6, 2, 2, 1.0, seed=0)
    rep = verify_robust(affine_net([[0.0, 0.0]], [1.0]), ds, RobustnessSpec(2, 0.1), 10, 5)
    assert rep.failing_indices == [i for i in range(6) if ds.labels[i] != 1]


def test_extra_points_are_checked():
    ds = line_data()
    rep = verify_robust(step_net(), ds, RobustnessSpec(2, 0.0), 10, 10, extra_points={0: [[0.5]]})
    assert not rep.passed and rep.failing_indices == [0]


def test_deterministic_and_thread_independent():
    ds = gen_random_separated(6, 3, 2, 1.0, seed=1)
    spec = RobustnessSpec(math.inf, 0.1)
    net = build_fullwidth(ds, spec)
    a = verify_robust(net, ds, spec, 100, 10, seed=3, threads=1)
    b = verify_robust(net, ds, spec, 100, 10, seed=3, threads=4)
    assert a.to_json() == b.to_json() and a.passed


def test_shape_mismatch_and_threads(monkeypatch):
    with pytest.raises(ShapeError):
        verify_robust(step_net(), LabeledDataset([[0.0, 1.0], [3.0, 3.0]], [1, 2]),
                      RobustnessSpec(2, 0.1))
    monkeypatch.setenv("ROBUSTMEM_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("ROBUSTMEM_THREADS", "x")
    assert default_threads() == 1


def test_obstruction_refutes_narrow_first_layer():
    # first layer sees only x_1; points differ only in x_2
    ds = LabeledDataset([[0.0, 0.0], [0.0, 1.0]], [1, 2])
    net = ReluNetwork((AffineLayer([[1.0, 0.0]], [0.0]), AffineLayer([[1.0]], [1.0])))
    rep = verify_first_layer_obstruction(net, ds, RobustnessSpec(2, 0.3))
    assert rep.attempted and rep.found and rep.refuted and rep.rank == 1
    assert rep.outputs[0] == rep.outputs[1]


def test_obstruction_needs_small_rank():
    ds = LabeledDataset([[0.0, 0.0], [0.0, 1.0]], [1, 2])
    net = ReluNetwork((AffineLayer(np.eye(2), [0.0, 0.0]), AffineLayer([[1.0, 1.0]], [0.0])))
    rep = verify_first_layer_obstruction(net, ds, RobustnessSpec(2, 0.3))
    assert not rep.attempted and not rep.refuted


def test_obstruction_not_found_when_direction_separates():
    ds = LabeledDataset([[0.0, 0.0], [1.0, 0.0]], [1, 2])
    net = ReluNetwork((AffineLayer([[1.0, 0.0]], [0.0]), AffineLayer([[1.0]], [1.0])))
    rep = verify_first_layer_obstruction(net, ds, RobustnessSpec(2, 0.3))
    assert rep.attempted and not rep.found and rep.residual > 0.5


def test_zero_radius_is_exact_fit():
    ds = gen_random_separated(5, 2, 3, 1.0, seed=2)
    net = build_fullwidth(ds, RobustnessSpec(2, 0.1))
    rep = verify_robust(net, ds, RobustnessSpec(2, 0.0), 0, 0)
    assert rep.passed and rep.samples_per_point == [1] * 5


def test_pass_at_sigma_implies_pass_at_half():
    ds = gen_random_separated(6, 3, 2, 1.0, seed=3)
    spec = RobustnessSpec(2, 0.2)
    net = build_fullwidth(ds, spec)
    assert verify_robust(net, ds, spec, 300, 50, seed=0).passed
    assert verify_robust(net, ds, RobustnessSpec(2, 0.1), 300, 50, seed=0).passed


def test_obstruction_witness_breaks_sampled_check():
    ds = LabeledDataset([[0.0, 0.0], [0.0, 1.0]], [1, 2])
    net = ReluNetwork((AffineLayer([[1.0, 0.0]], [0.0]), AffineLayer([[1.0]], [1.0])))
    spec = RobustnessSpec(2, 0.3)
    obs = verify_first_layer_obstruction(net, ds, spec)
    assert obs.refuted
    rep = verify_robust(net, ds, spec, 0, 0, extra_points={obs.i: [obs.a_point]})
    assert not rep.passed
