import math

import pytest

from robustmem.datasets import (LabeledDataset, RobustnessSpec, gen_random_separated,
                                norm_constant, separation)
from robustmem.errors import AccountingError, InfeasibleRadiusError, InvalidWidthError
from robustmem.memorizer import (bound_constants, bounds_report, build_fullwidth,
                                 build_smallwidth, width_depth_account, working_norm)
from robustmem.netcore import ReluNetwork
from robustmem.verifier import verify_robust


def test_working_norm():
    assert working_norm(1, 2) == 1 and working_norm(math.inf, 3) == math.inf
    assert working_norm(2.5, 2) == 2 and working_norm(3, math.inf) == math.inf


def test_fullwidth_hand_example():
    # three points on a line, labels 1, 2, 3
    ds = LabeledDataset([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], [1, 2, 3])
    spec = RobustnessSpec(2, 0.3)
    net = build_fullwidth(ds, spec)
    assert [net(x) for x in ds.points] == [1.0, 2.0, 3.0]
    assert net([0.3, 0.0]) == 1.0 and net([1.0, -0.3]) == 2.0
    # far away from every ball the output is 0
    assert net([5.0, 5.0]) == 0.0
    rec = width_depth_account(net)
    assert rec.width == net.meta["width_formula"]


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf, 3.0])
def test_fullwidth_is_robust(p):
    ds = gen_random_separated(8, 3, 3, 1.0, seed=11)
    sigma = 0.9 * separation(ds) / (2 * norm_constant("+", p, 2, 3))
    spec = RobustnessSpec(p, sigma)
    net = build_fullwidth(ds, spec)
    rep = verify_robust(net, ds, spec, n_interior=300, n_boundary=100, seed=1)
    assert rep.passed, rep.failing_indices
    width_depth_account(net)


def test_fullwidth_lq_separation():
    ds = gen_random_separated(6, 3, 2, 1.0, q=1.0, seed=3)
    spec = RobustnessSpec(2, 0.2, q=1)
    net = build_fullwidth(ds, spec)
    assert net.meta["rho"] == 1.0
    assert verify_robust(net, ds, spec, 300, 100, seed=2).passed


def test_fullwidth_single_class_and_infeasible():
    ds = LabeledDataset([[0.0], [3.0]], [2, 2])
    net = build_fullwidth(ds, RobustnessSpec(2, 100.0))
    assert net.depth == 1 and net([7.0]) == 2.0
    ds = LabeledDataset([[0.0], [1.0]], [1, 2])
    with pytest.raises(InfeasibleRadiusError):
        build_fullwidth(ds, RobustnessSpec(2, 0.5))


def test_smallwidth_width_and_robustness():
    ds = gen_random_separated(4, 12, 2, 1.0, seed=0)
    delta = separation(ds)
    a = bound_constants(2, 2, 12)[0]
    sigma = 0.9 * a * 4 ** (-2 / 4) * delta
    spec = RobustnessSpec(2, sigma)
    net = build_smallwidth(ds, spec, 10, seed=0)
    assert net.width == 10
    assert net.meta["within_guaranteed_radius"] and net.meta["sigma_below_half_tau"]
    assert verify_robust(net, ds, spec, 300, 100, seed=3).passed
    width_depth_account(net)


def test_smallwidth_width_range():
    ds = gen_random_separated(4, 5, 2, 1.0, seed=0)
    for k in (6, 11):
        with pytest.raises(InvalidWidthError):
            build_smallwidth(ds, RobustnessSpec(2, 0.01), k)


def test_smallwidth_sigma_zero_width_seven():
    ds = gen_random_separated(10, 6, 3, 1.0, seed=4)
    net = build_smallwidth(ds, RobustnessSpec(2, 0.0), 7, seed=1)
    assert net.width == 7
    assert [net(x) for x in ds.points] == [float(v) for v in ds.labels]


def test_bound_constants_oracles():
    # a_{2,d} = d**(-1/2) / (8 sqrt(e)), frozen from an independent evaluation
    assert bound_constants(2, 2, 100)[0] == pytest.approx(0.00758163, abs=1e-8)
    assert bound_constants(2, 2, 12)[0] == pytest.approx(0.02188629, abs=1e-8)
    assert bound_constants(2, 2, 7)[1] == 2416.0
    # l_1 balls cost a factor sqrt(d) in b, l_inf balls a factor 1/sqrt(d) in a
    assert bound_constants(1, 2, 16)[1] == pytest.approx(2416 * 4)
    assert bound_constants(math.inf, 2, 16)[0] == pytest.approx(bound_constants(2, 2, 16)[0] / 4)


def test_bounds_report_regimes():
    rep = bounds_report(100, 50, 20, 2, 2, 1.0, 0.001)
    assert rep.regime == "possible" and rep.possible and not rep.impossible
    # b N**(-2/k) = 2416 / 100**2 = 0.2416 < 0.4
    rep = bounds_report(100, 50, 1, 2, 2, 1.0, 0.4)
    assert rep.regime == "impossible"
    rep = bounds_report(100, 50, 30, 2, 2, 1.0, 0.6)
    assert rep.regime == "invalid-radius"
    rep = bounds_report(100, 50, 60, 2, 2, 1.0, 0.4)
    assert rep.regime == "possible"
    assert rep.a < rep.b


def test_account_detects_tampering():
    ds = gen_random_separated(4, 2, 2, 1.0, seed=0)
    net = build_fullwidth(ds, RobustnessSpec(1, 0.1))
    meta = dict(net.meta, width_formula=net.width + 1)
    with pytest.raises(AccountingError):
        width_depth_account(ReluNetwork(net.layers, net.input_shift, meta))
    meta = dict(net.meta, depth_formula_value=0.01)
    with pytest.raises(AccountingError):
        width_depth_account(ReluNetwork(net.layers, net.input_shift, meta))
    with pytest.raises(AccountingError):
        width_depth_account(ReluNetwork(net.layers))


def test_two_point_example_width_and_robustness():
    ds = LabeledDataset([[0.0, 0.0], [1.0, 0.0]], [1, 2])
    spec = RobustnessSpec(2, 0.2)
    net = build_fullwidth(ds, spec)
    assert net.width == ds.d + 6
    assert verify_robust(net, ds, spec, 1000, 200, seed=0).passed


def test_linf_radius_just_under_cap_with_corners():
    import itertools
    import numpy as np
    ds = gen_random_separated(5, 3, 2, 1.0, seed=4)
    delta = separation(ds, 2)
    spec = RobustnessSpec(math.inf, 0.999 * delta / (2 * math.sqrt(3)), q=2)
    net = build_fullwidth(ds, spec)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
    corners = {i: ds.points[i] + spec.sigma * signs for i in range(ds.n)}
    assert verify_robust(net, ds, spec, 500, 100, seed=1, extra_points=corners).passed


def test_quasi_norm_radius_goes_through_l2_balls():
    ds = gen_random_separated(4, 2, 2, 1.0, seed=6)
    spec = RobustnessSpec(0.5, 0.05, q=2)
    net = build_fullwidth(ds, spec)
    assert net.meta["rho"] == 2
    assert verify_robust(net, ds, spec, 1000, 200, seed=2).passed


def test_depth_is_affine_in_n():
    depths = []
    for N in (2, 4, 8):
        ds = LabeledDataset([[float(i), 0.0] for i in range(N)], [1 + i % 2 for i in range(N)])
        depths.append(build_fullwidth(ds, RobustnessSpec(2, 0.2)).depth)
    assert depths[2] - depths[1] == 2 * (depths[1] - depths[0])


def test_smaller_radius_never_costs_depth():
    ds = gen_random_separated(6, 3, 3, 1.0, seed=8)
    for p in (2, 3):
        big = build_fullwidth(ds, RobustnessSpec(p, 0.2))
        small = build_fullwidth(ds, RobustnessSpec(p, 0.1))
        assert small.depth <= big.depth and small.width == big.width


def test_bounds_large_width_and_cap():
    assert bounds_report(100, 10, 22, 2, 2, 1.0, 0.49).regime == "possible"
    assert bounds_report(100, 10, 22, 2, 2, 1.0, 0.5).regime == "invalid-radius"
