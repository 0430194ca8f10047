"""Robust memorizers and the width/radius bound calculator.

``build_fullwidth`` places one ball indicator per data point and keeps a
running maximum of their outputs. Around every point the indicator equals
the point's label, and indicators of other classes vanish there, so the
maximum is exactly the label on every robustness ball.

``build_smallwidth`` first applies a certified projection T = P/epsilon to
R^(k-6) and then runs the full-width construction on the projected data;
the result has width k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import (LabeledDataset, RobustnessSpec, norm_constant, separation,
                       validate_radius)
from .errors import AccountingError, InfeasibleRadiusError, InvalidWidthError
from .gadgets import build_power, indicator_core, indicator_width
from .netcore import (ReluNetwork, affine_net, annotate, chain, identity_net, pad_width,
                      parallel)
from .projector import find_preserving_projection, required_epsilon

__all__ = [
    "BoundsReport",
    "AccountRecord",
    "working_norm",
    "build_fullwidth",
    "build_smallwidth",
    "bounds_report",
    "bound_constants",
    "width_depth_account",
]

_A0 = 1.0 / (8.0 * math.sqrt(math.e))
_B0 = 2416.0


def working_norm(p: float, q: float) -> float:
    """Norm the indicators are built in: p itself when p is 1 or inf, else q."""
    return p if (p == 1 or math.isinf(p)) else q


def _inv(p):
    return 0.0 if math.isinf(p) else 1.0 / p


def _constant_net(d, y, width=0):
    if width == 0:
        return affine_net(np.zeros((1, d)), [float(y)])
    return chain(affine_net(np.zeros((width, d))), identity_net(width, 2),
                 affine_net(np.zeros((1, width)), [float(y)]))


def build_fullwidth(ds: LabeledDataset, spec: RobustnessSpec) -> ReluNetwork:
    """Network of width about d + 6 that equals y_i on every l_p ball B(x_i, sigma).

    Ball indicators are built in the working norm rho (see
    :func:`working_norm`) with radius r = c_plus(p, rho, d) sigma, which
    contains the l_p ball, and transition width w = tau - 2r where tau is the
    measured l_rho separation. A single-class dataset gives a constant network.
    """
    X, y = ds.points, ds.labels
    N, d = ds.n, ds.d
    classes = np.unique(y)
    if classes.size == 1:
        net = _constant_net(d, y[0])
        return annotate(net, name="fullwidth", special_case="single class",
                        width_formula=0, depth_exact=1, depth_formula="1",
                        depth_formula_value=1.0, depth_constant=1.0)
    delta = separation(ds, spec.q)
    verdict = validate_radius(spec, delta, d)
    if not verdict:
        raise InfeasibleRadiusError(
            f"sigma/delta = {verdict.ratio:.6g} is not below {verdict.threshold:.6g}")
    rho = working_norm(spec.p, spec.q)
    r = norm_constant("+", spec.p, rho, d) * spec.sigma
    tau = separation(ds, rho)
    w = tau - 2 * r
    if not w > 0:
        raise InfeasibleRadiusError(f"no room between balls: tau={tau}, r={r}")
    lam = tau / w
    exact = rho == 1 or math.isinf(rho)
    gadget = None if exact else build_power(w ** rho / (4 * d * tau ** rho), rho)

    # shift so that every coordinate of every ball point is at least `margin`
    margin = max(spec.sigma, tau)
    shift = X.min(axis=0) - spec.sigma - margin
    U = X - shift

    parts = [affine_net(np.vstack([np.zeros((1, d)), np.eye(d)]))]   # u -> (m=0, u)
    acc = np.eye(d + 2)
    acc[1, 0] = -1.0                                                 # (m, z - m, u)
    out = np.zeros((d + 1, d + 2))
    out[0, 0] = out[0, 1] = 1.0                                      # m + [z - m]_+
    out[1:, 2:] = np.eye(d)
    ind_meta = None
    for i in range(N):
        core = indicator_core(U[i], float(y[i]), r, w, rho, gadget=gadget)
        ind_meta = core.meta
        parts += [parallel(identity_net(1, core.depth), core),
                  affine_net(acc), identity_net(d + 2, 2), affine_net(out)]
    parts.append(affine_net(np.eye(1, d + 1)))
    net = ReluNetwork(chain(*parts).layers, shift)

    gw = 0 if exact else gadget.width
    L_ind = ind_meta["depth_exact"]
    if exact:
        F, C, fname = float(N * d), 6.0, "N*d"
    elif rho == 2:
        F, C, fname = N * d * (1 + math.log2(d * lam)), 8.0, "N*d*(1+log2(d*lambda))"
    else:
        F, C, fname = float(N * d * gadget.depth), 7.0, "N*d*L(power gadget)"
    return annotate(net, name="fullwidth", p=spec.p, q=spec.q, sigma=spec.sigma,
                    rho=rho, r=r, tau=tau, w=w, delta=delta, lambda_=lam,
                    radius_ratio=verdict.ratio, radius_cap=verdict.threshold,
                    gadget=None if exact else gadget.meta["name"],
                    gadget_epsilon=None if exact else gadget.meta["epsilon"],
                    gadget_width=gw, gadget_depth=None if exact else gadget.depth,
                    width_formula=indicator_width(d, rho, gw) + 1,
                    depth_exact=N * L_ind + 1,
                    depth_formula=fname, depth_formula_value=F, depth_constant=C,
                    input_shift_margin=margin)


def build_smallwidth(ds: LabeledDataset, spec: RobustnessSpec, k: int, max_draws: int = 1000,
                     seed=0) -> ReluNetwork:
    """Width-k robust memorizer for 7 <= k <= d + 5.

    The l_p ball B(x_i, sigma) sits inside the l_2 ball of radius
    sigma' = c_plus(p, 2, d) sigma. A projection P of rank k - 6 certified at
    radius sigma' (scale epsilon = required_epsilon) is searched; then
    f = fullwidth(T x_i, radius sigma'/epsilon) o T with T = P/epsilon.
    Outside the guaranteed radius range the search is best effort and the
    result is flagged in meta.
    """
    N, d = ds.n, ds.d
    if not (7 <= k <= d + 5):
        raise InvalidWidthError(f"small-width construction needs 7 <= k <= d+5 = {d + 5}, got k={k}")
    kp = k - 6
    if np.unique(ds.labels).size == 1:
        net = _constant_net(d, ds.labels[0], width=k)
        return annotate(net, name="smallwidth", special_case="single class", k=k,
                        width_formula=k, depth_exact=2, depth_formula="1",
                        depth_formula_value=1.0, depth_constant=2.0)
    delta = separation(ds, spec.q)
    verdict = validate_radius(spec, delta, d)
    if not verdict:
        raise InfeasibleRadiusError(
            f"sigma/delta = {verdict.ratio:.6g} is not below {verdict.threshold:.6g}")
    sigma2 = norm_constant("+", spec.p, 2, d) * spec.sigma
    a = bound_constants(spec.p, spec.q, d)[0]
    within = spec.sigma / delta <= a * N ** (-2.0 / kp)
    cert = find_preserving_projection(ds, sigma2, kp, max_draws=max_draws, seed=seed)
    eps = cert.epsilon
    T = cert.P / eps
    Y = ds.points @ T.T
    proj = LabeledDataset(Y, ds.labels)
    inner_sigma = sigma2 / eps
    inner = build_fullwidth(proj, RobustnessSpec(2, inner_sigma, 2))
    tau = inner.meta["tau"]
    net = chain(affine_net(T), inner)
    if net.width < k:
        net = pad_width(net, k)
    m = inner.meta
    return annotate(net, name="smallwidth", p=spec.p, q=spec.q, sigma=spec.sigma, k=k,
                    projection_rank=kp, epsilon=eps, first_map=T, draws_used=cert.draws_used,
                    sigma_l2=sigma2, inner_sigma=inner_sigma, projected_separation=tau,
                    sigma_below_half_tau=bool(inner_sigma < tau / 2),
                    within_guaranteed_radius=bool(within),
                    outside_guarantee=bool(cert.outside_guarantee or not within),
                    inner_width=inner.width, lambda_=m["lambda_"],
                    width_formula=k, depth_exact=m["depth_exact"],
                    depth_formula="N*k'*(1+log2(k'*lambda))",
                    depth_formula_value=m["depth_formula_value"],
                    depth_constant=m["depth_constant"])


# ----------------------------------------------------------------------------
# bounds

@dataclass(frozen=True)
class BoundsReport:
    a: float
    b: float
    a_improved: float
    radius_cap: float
    width_sufficient: float
    width_necessary: float
    regime: str
    possible: bool
    impossible: bool
    ratio: float

    def to_json(self):
        from .netcore import jsonable
        return jsonable(self.__dict__)


def bound_constants(p, q, d):
    """(a, b): lower-bound radius constant of the small-width construction and
    the constant of the matching impossibility result, for l_p balls and l_q
    separation (q = 2 gives the usual pair)."""
    s1 = 0.5 - _inv(q)       # [1/2 - 1/q]
    s2 = _inv(p) - 0.5       # [1/p - 1/2]
    a = _A0 * d ** (-0.5 + min(s1, 0.0) + min(s2, 0.0))
    b = _B0 * d ** (max(s1, 0.0) + max(s2, 0.0))
    return a, b


def _large_width_offset(p, q):
    # extra neurons over d used by the large-width constructions
    if q == 1 or math.isinf(q) or (q == 2 and (p == 1 or math.isinf(p))):
        return 4
    if q == 2:
        return 6
    if float(q).is_integer():
        return 9
    return 12


def bounds_report(N, d, k, p, q, delta, sigma) -> BoundsReport:
    """Width thresholds and regime for memorizing N points in R^d at width k.

    ``regime`` is 'invalid-radius' when sigma/delta is at or above the cap,
    'impossible' when the impossibility bound applies (k <= d - 1 and
    sigma/delta > b N**(-2/k)), 'possible' when a construction applies
    (k large enough and sigma/delta below the cap, or 7 <= k <= d + 5 and
    sigma/delta <= a N**(-2/(k-6))), and 'unknown' otherwise.
    """
    from .datasets import parse_p
    p, q = parse_p(p), parse_p(q)
    a, b = bound_constants(p, q, d)
    cap = 1.0 / (2.0 * norm_constant("+", p, q, d))
    ratio = sigma / delta
    logN = math.log(N) if N > 1 else 0.0
    if sigma == 0:
        w_suff, w_nec = 6.0, 0.0
    else:
        ga, gb = math.log(a / ratio), math.log(b / ratio)
        w_suff = 6.0 + 2.0 * logN / ga if ga > 0 else math.inf
        w_nec = 2.0 * logN / gb if gb > 0 else math.inf
    impossible = ratio >= cap or (k <= d - 1 and ratio > b * N ** (-2.0 / k))
    possible = ratio < cap and (
        k >= d + _large_width_offset(p, q)
        or (7 <= k <= d + 5 and ratio <= a * N ** (-2.0 / (k - 6))))
    if ratio >= cap:
        regime = "invalid-radius"
    elif impossible:
        regime = "impossible"
    elif possible:
        regime = "possible"
    else:
        regime = "unknown"
    a_imp = a * math.sqrt(k - 6) if k > 6 else math.nan
    return BoundsReport(a, b, a_imp, cap, w_suff, w_nec, regime, bool(possible),
                        bool(impossible), ratio)


# ----------------------------------------------------------------------------
# accounting

@dataclass(frozen=True)
class AccountRecord:
    arch: tuple
    width: int
    depth: int
    width_formula: int
    depth_bound: float
    depth_exact: int | None


def width_depth_account(net: ReluNetwork) -> AccountRecord:
    """Recompute width/depth and compare with the formulas recorded in meta."""
    m = net.meta
    for key in ("width_formula", "depth_formula_value", "depth_constant"):
        if key not in m:
            raise AccountingError(f"meta lacks {key!r}; not built by this package?")
    W, L = net.width, net.depth
    if W != m["width_formula"]:
        raise AccountingError(f"width {W} differs from formula {m['width_formula']}")
    bound = float(m["depth_constant"]) * float(m["depth_formula_value"])
    if L > bound:
        raise AccountingError(f"depth {L} exceeds {m['depth_constant']} * {m['depth_formula']} = {bound}")
    exact = m.get("depth_exact")
    if exact is not None and exact != L:
        raise AccountingError(f"depth {L} differs from exact count {exact}")
    return AccountRecord(tuple(net.architecture), W, L, int(m["width_formula"]), bound, exact)
