"""Acceptance criteria, one test per criterion.

Each test gathers its checks into a dict, records a single PASS/FAIL line
(shown in the terminal summary) and then asserts every check.
"""
import json
import math
import time

import numpy as np
import pytest

from robustmem.cli import dispatch
from robustmem.datasets import (LabeledDataset, RobustnessSpec, ball_sample, gen_random_separated,
                                lp_norm, norm_constant, separation)
from robustmem.errors import SearchFailure
from robustmem.gadgets import (build_ball_indicator, build_mult, build_poly, build_power_frac,
                               build_power_nat, build_square, build_step)
from robustmem.hardness import build_hard_instance, find_collision, witness_nonpreservation
from robustmem.memorizer import (bound_constants, bounds_report, build_fullwidth,
                                 build_smallwidth, width_depth_account)
from robustmem.netcore import AffineLayer, ReluNetwork
from robustmem.projector import (cap_min_bruteforce, certify, find_preserving_projection,
                                 pair_directions, required_epsilon, sample_projection)
from robustmem.verifier import verify_first_layer_obstruction, verify_robust

EPSILONS = (1e-1, 1e-2, 1e-3)


def finish(record, number, checks, extra=""):
    failed = [name for name, ok in checks.items() if not ok]
    detail = f"{len(checks) - len(failed)}/{len(checks)} checks"
    if failed:
        detail += "; failed: " + ", ".join(failed[:6])
    record(number, not failed, f"{detail} {extra}".strip())
    assert not failed, failed


def max_err(net, X, ref):
    return float(np.max(np.abs(np.asarray(net(X)) - ref)))


def test_criterion_01_gadget_errors(record):
    checks = {}
    t = np.linspace(0.0, 1.0, 10_000)[:, None]
    g = np.linspace(0.0, 1.0, 100)
    AB = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    x = np.linspace(-1.0, 1.0, 10_000)
    rng = np.random.default_rng(7)
    polys = [rng.uniform(-1, 1, size=deg + 1) for deg in (2, 5, 9)]
    depths = {}
    for eps in EPSILONS:
        sq = build_square(eps)
        depths[eps] = (sq.depth, sq.meta["depth_constant"])
        checks[f"square eps={eps}"] = max_err(sq, t, t[:, 0] ** 2) <= eps
        checks[f"mult eps={eps}"] = max_err(build_mult(eps), AB, AB[:, 0] * AB[:, 1]) <= eps
        for p in (2, 3, 4, 5):
            checks[f"power_nat p={p} eps={eps}"] = \
                max_err(build_power_nat(eps, p), t, t[:, 0] ** p) <= eps
        for p in (1.5, 2.5):
            checks[f"power_frac p={p} eps={eps}"] = \
                max_err(build_power_frac(eps, p), t, t[:, 0] ** p) <= eps
        for c in polys:
            ref = np.polynomial.polynomial.polyval(x, c)
            checks[f"poly deg={len(c) - 1} eps={eps}"] = \
                max_err(build_poly(eps, c), x[:, None], ref) <= eps
    for a, b in zip(EPSILONS[:-1], EPSILONS[1:]):
        growth = depths[b][0] - depths[a][0]
        checks[f"square depth growth {a}->{b}"] = growth <= depths[b][1] * math.log2(10) + 1
    finish(record, 1, checks)


def test_criterion_02_step_function(record):
    checks = {}
    for C in (2, 3, 5, 10):
        net = build_step(C)
        for m in range(1, C + 1):
            tt = np.linspace(m - 0.25, m + 0.25, 100)[:, None]
            checks[f"C={C} m={m}"] = float(np.max(np.abs(net(tt) - m))) <= 1e-9
    finish(record, 2, checks)


def test_criterion_03_ball_indicator(record):
    checks = {}
    rng = np.random.default_rng(3)
    r, w, y0 = 0.5, 0.3, 2.0
    for p in (1.0, 2.0, math.inf, 3.0, 2.5):
        for d in (2, 3, 5):
            x0 = rng.uniform(-2, 2, size=d)
            net = build_ball_indicator(x0, y0, r, w, p)
            inside = np.vstack([ball_sample(x0, r, p, 1000, seed=1),
                                ball_sample(x0, r, p, 200, seed=2, mode="boundary")])
            outside = np.vstack([
                ball_sample(x0, r + w, p, 500, seed=3, mode="boundary"),
                x0 + (ball_sample(np.zeros(d), 1.0, p, 500, seed=4, mode="boundary")
                      * rng.uniform(r + w, 4 * (r + w), size=(500, 1)))])
            anywhere = x0 + rng.uniform(-3 * (r + w), 3 * (r + w), size=(2000, d))
            vin, vout = net(inside)[:, 0], net(outside)[:, 0]
            vall = net(np.vstack([inside, outside, anywhere]))[:, 0]
            key = f"p={p} d={d}"
            checks[f"{key} inside"] = float(np.max(np.abs(vin - y0))) <= 1e-9
            checks[f"{key} outside"] = float(np.max(np.abs(vout))) <= 1e-9
            checks[f"{key} bounded"] = float(vall.max()) <= y0 + 1e-9
    finish(record, 3, checks)


def test_criterion_04_fullwidth_memorizer(record):
    checks = {}
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for t in range(20):
        p = (1.0, 2.0, math.inf)[t % 3]
        if t < 3:
            N, d, C = 50, 10, 5            # largest admissible size once per norm
        else:
            N, d, C = int(rng.integers(5, 51)), int(rng.integers(2, 11)), int(rng.integers(2, 6))
        ds = gen_random_separated(N, d, C, 1.0, seed=100 + t)
        delta = separation(ds)
        spec = RobustnessSpec(p, 0.9 * delta / (2 * norm_constant("+", p, 2, d)))
        net = build_fullwidth(ds, spec)
        rep = verify_robust(net, ds, spec, n_interior=1000, n_boundary=100, seed=t)
        key = f"#{t} N={N} d={d} C={C} p={p}"
        checks[f"{key} robust"] = rep.passed
        checks[f"{key} width"] = net.width == net.meta["width_formula"]
        bound = net.meta["depth_constant"] * net.meta["depth_formula_value"]
        checks[f"{key} depth"] = net.depth <= bound
        width_depth_account(net)
    elapsed = time.perf_counter() - t0
    checks["runtime <= 10 min"] = elapsed <= 600
    finish(record, 4, checks, f"({elapsed:.0f} s)")


def test_criterion_05_smallwidth_memorizer(record):
    checks = {}
    d, k, N = 12, 10, 4
    ds = gen_random_separated(N, d, 2, 1.0, seed=5)
    delta = separation(ds)
    a = bound_constants(2, 2, d)[0]
    spec = RobustnessSpec(2, 0.9 * a * N ** (-2 / (k - 6)) * delta)
    net = build_smallwidth(ds, spec, k, seed=0)
    checks["width == k"] = net.width == k
    checks["within bound"] = net.meta["within_guaranteed_radius"]
    checks["robust"] = verify_robust(net, ds, spec, 1000, 100, seed=1).passed
    ds0 = gen_random_separated(20, 8, 4, 1.0, seed=6)
    net0 = build_smallwidth(ds0, RobustnessSpec(2, 0.0), 7, seed=0)
    checks["sigma=0 width 7"] = net0.width == 7
    checks["sigma=0 memorizes"] = verify_robust(net0, ds0, RobustnessSpec(2, 0.0), 0, 0).passed
    finish(record, 5, checks)


def test_criterion_06_projection_search(record):
    checks = {}
    d, k, N = 20, 8, 6
    eps = required_epsilon(N, d, k)
    successes, sound = 0, True
    for trial in range(50):
        ds = gen_random_separated(N, d, 2, 1.0, seed=1000 + trial)
        delta = separation(ds)
        sigma = 0.25 * delta * eps / 2
        try:
            cert = find_preserving_projection(ds, sigma, k, max_draws=200, seed=trial)
        except SearchFailure:
            continue
        successes += 1
        _, vhat, dist = pair_directions(ds)
        for t in range(len(vhat)):
            phi = math.asin(2 * sigma / dist[t])
            if cap_min_bruteforce(cert.P, vhat[t], phi, 10_000, seed=t) < cert.epsilon - 1e-6:
                sound = False
    checks["success rate >= 95%"] = successes >= 48
    checks["certificates sound"] = sound
    finish(record, 6, checks, f"({successes}/50 found)")


def test_criterion_07_jl_contrast(record):
    checks = {}
    d, k = 5, 3
    ds = LabeledDataset([np.zeros(d), np.eye(d)[0]], [1, 2])
    for sigma in (0.1, 0.01):
        # T(a) = (a_1 - a_2/sigma) e_1 + sum_{i=2..k} a_{i+1} e_i
        T = np.zeros((k, d))
        T[0, 0], T[0, 1] = 1.0, -1.0 / sigma
        for i in range(1, k):
            T[i, i + 1] = 1.0
        x, xp = ds.points
        jl_dev = abs(np.linalg.norm(T @ (xp - x)) - np.linalg.norm(xp - x))
        checks[f"sigma={sigma} JL isometry"] = jl_dev <= 1e-12
        checks[f"sigma={sigma} certify fails"] = not certify(T, ds, sigma, 1.0).certified
        # a = -sigma e_2 near x and a' = x' collide under T
        a = -sigma * np.eye(d)[1]
        checks[f"sigma={sigma} explicit collision"] = np.linalg.norm(T @ (xp - a)) <= 1e-12
        w = find_collision(T, [x], [xp], sigma)
        checks[f"sigma={sigma} witness search"] = w.found
    finish(record, 7, checks)


def test_criterion_08_hard_instance(record):
    checks = {}
    inst = build_hard_instance(60, 3, 1, 1.0, 0.45, seed=0, n_check=10_000)
    checks["inner cover"] = inst.inner_report.max_gap <= inst.sigma + 1e-6
    checks["outer cover"] = inst.outer_report.max_gap <= inst.r + 1e-6
    checks["separation"] = separation(inst.dataset) >= 1.0 - 1e-9
    rng = np.random.default_rng(8)
    found = 0
    for _ in range(20):
        M = sample_projection(3, 1, rng)
        w = witness_nonpreservation(M, inst)
        found += w.found and w.residual <= 1e-6
    checks["20/20 witnesses"] = found == 20
    try:
        find_preserving_projection(inst.dataset, inst.sigma, 1, max_draws=500, seed=0)
        checks["projection search fails"] = False
    except SearchFailure as exc:
        checks["projection search fails"] = exc.draws == 500
    M = sample_projection(3, 1, rng)
    net = ReluNetwork((AffineLayer(M, [0.0]), AffineLayer([[1.0]], [1.0])))
    obs = verify_first_layer_obstruction(net, inst.dataset, RobustnessSpec(2, inst.sigma))
    checks["width-1 net refuted"] = obs.refuted
    finish(record, 8, checks)


def test_criterion_09_bounds_calculator(record):
    checks = {}
    checks["a_{2,100}"] = abs(bound_constants(2, 2, 100)[0] - 7.58e-3) <= 1e-5
    for p in (1.0, 2.0, 3.0, math.inf):
        for d in (2, 10, 100):
            a, b = bound_constants(p, 2, d)
            checks[f"2416 p={p} d={d}"] = b / d ** max(1 / p - 0.5, 0.0) == 2416.0
            checks[f"a<b p={p} d={d}"] = a < b
    order = {"possible": 0, "unknown": 1, "impossible": 2}
    N, d = 1000, 40
    ks = np.unique(np.linspace(1, 60, 20).astype(int))
    ratios = np.logspace(-7, math.log10(0.49), 20)
    overlap = monotone = True
    seen = set()
    for k in ks:
        seq = []
        for s in ratios:
            rep = bounds_report(N, d, int(k), 2, 2, 1.0, float(s))
            overlap &= not (rep.possible and rep.impossible)
            checks.setdefault("a<b on grid", True)
            checks["a<b on grid"] &= rep.a < rep.b
            seq.append(order[rep.regime])
            seen.add(rep.regime)
        monotone &= all(u <= v for u, v in zip(seq, seq[1:]))
    checks["grid is 20x20"] = len(ks) == 20 and len(ratios) == 20
    checks["no overlap"] = overlap
    checks["possible -> unknown -> impossible in sigma"] = monotone
    checks["all three regimes present"] = seen == {"possible", "unknown", "impossible"}
    finish(record, 9, checks)


def test_criterion_10_norm_constants(record):
    checks = {}
    values = (1.0, 1.5, 2.0, 3.0, math.inf)
    rng = np.random.default_rng(10)
    for d in (2, 5, 10):
        V = rng.standard_normal((1000, d))
        V[::3] *= rng.random((len(V[::3]), d)) < 0.3   # some sparse vectors
        V = V[np.any(V != 0, axis=1)]
        for p in values:
            for q in values:
                lo, hi = norm_constant("-", p, q, d), norm_constant("+", p, q, d)
                ratio = lp_norm(V, q) / lp_norm(V, p)
                key = f"p={p} q={q} d={d}"
                checks[f"{key} sandwich"] = bool(np.all(ratio >= lo * (1 - 1e-12))
                                                 and np.all(ratio <= hi * (1 + 1e-12)))
                W = np.vstack([np.eye(d)[0], np.full(d, d ** (-1 / p) if p != math.inf else 1.0)])
                r = lp_norm(W, q) / lp_norm(W, p)
                checks[f"{key} tight"] = (abs(r.max() - hi) <= 1e-9 and abs(r.min() - lo) <= 1e-9)
    finish(record, 10, checks)


def _pipelines(root):
    """Run every CLI pipeline inside ``root`` (relative paths) and return exit codes."""
    codes = []
    steps = [
        ["dataset", "gen", "--n", "12", "--d", "4", "--c", "3", "--delta", "1", "--seed", "3",
         "-o", "ds.csv"],
        ["dataset", "check", "--dataset", "ds.csv", "--sigma", "0.1", "-o", "check.json"],
        ["bounds", "--n", "100", "--d", "50", "--k", "20", "--p", "2", "--q", "2", "--delta", "1",
         "--sigma", "0.001", "-o", "bounds.json"],
        ["gadget", "square", "--epsilon", "0.001", "-o", "sq.json"],
        ["gadget", "power-frac", "--epsilon", "0.01", "--p", "1.5", "-o", "pf.json"],
        ["build", "fullwidth", "--dataset", "ds.csv", "--sigma", "0.2", "--p", "2", "-o", "fw.json"],
        ["verify", "--net", "fw.json", "--dataset", "ds.csv", "--sigma", "0.2", "--p", "2",
         "--samples", "200", "--seed", "9", "-o", "verify.json"],
        ["dataset", "gen", "--n", "4", "--d", "12", "--c", "2", "--delta", "1", "--seed", "5",
         "-o", "ds12.csv"],
        ["build", "smallwidth", "--dataset", "ds12.csv", "--sigma", "0.005", "--k", "10",
         "--seed", "2", "-o", "sw.json"],
        ["project", "find", "--dataset", "ds12.csv", "--sigma", "0.005", "--k", "4",
         "--max-draws", "100", "--seed", "2", "-o", "cert.json"],
        ["hard", "build", "--n", "30", "--d", "3", "--k", "1", "--delta", "1", "--sigma", "0.45",
         "--seed", "4", "-o", "inst"],
        ["hard", "witness", "--matrix", "cert_m.json", "--instance", "inst.json", "-o",
         "witness.json"],
    ]
    (root / "cert_m.json").write_text(json.dumps({"M": [[0.3, -0.2, 0.9]]}))
    for argv in steps:
        codes.append(dispatch(argv))
    return codes


def _snapshot(root):
    out = {}
    for path in sorted(root.iterdir()):
        data = path.read_bytes()
        if path.name.endswith(".manifest.json"):
            doc = json.loads(data)
            doc.pop("duration_s")
            data = json.dumps(doc, sort_keys=True).encode()
        out[path.name] = data
    return out


def test_criterion_11_determinism(record, tmp_path, monkeypatch, capsys):
    checks = {}
    snaps = []
    for name in ("run1", "run2"):
        root = tmp_path / name
        root.mkdir()
        monkeypatch.chdir(root)
        codes = _pipelines(root)
        checks[f"{name} exit codes"] = codes == [0] * len(codes)
        snaps.append(_snapshot(root))
    capsys.readouterr()
    a, b = snaps
    checks["same artifact set"] = sorted(a) == sorted(b)
    for name in sorted(a):
        checks[f"identical {name}"] = a[name] == b.get(name)
    checks["every artifact has a manifest"] = all(
        f"{n}.manifest.json" in a for n in ("ds.csv", "fw.json", "sw.json", "cert.json",
                                             "inst.json", "verify.json", "sq.json"))
    finish(record, 11, checks, f"({len(a)} files compared)")
