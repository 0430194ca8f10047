"""Elementary ReLU networks with certified uniform error.

Every builder returns a :class:`~robustmem.netcore.ReluNetwork` whose meta
records the target error, the achieved width and depth, and the explicit
constants of its depth bound (``depth <= depth_constant * depth_formula +
depth_offset``). :func:`gadget_spec` reads that record back.

Domains: ``build_square``/``build_power_*`` on [0, 1], ``build_mult`` on
[0, 1]^2, ``build_poly`` on [-1, 1]. Outside these domains the networks still
evaluate but carry no guarantee.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import GadgetRangeError
from .netcore import (AffineLayer, ReluNetwork, affine_net, annotate, chain,
                      extend_depth, identity_net, parallel)

__all__ = [
    "GadgetSpec",
    "gadget_spec",
    "build_square",
    "build_mult",
    "build_power_nat",
    "build_power_frac",
    "build_poly",
    "build_power",
    "build_ball_indicator",
    "indicator_core",
    "indicator_width",
    "build_step",
    "build_max_accumulator",
    "binomial_series",
    "frac_degree",
]


@dataclass(frozen=True)
class GadgetSpec:
    name: str
    epsilon: float
    p: float | None
    achieved_width: int
    achieved_depth: int


def gadget_spec(net: ReluNetwork) -> GadgetSpec:
    m = net.meta
    return GadgetSpec(m["name"], m.get("epsilon", 0.0), m.get("p"),
                      int(m["achieved_width"]), int(m["achieved_depth"]))


def _finish(net, name, **fields):
    return annotate(net, name=name, achieved_width=net.width,
                    achieved_depth=net.depth, **fields)


def _relu(n):
    return identity_net(n, 2)


def _check_eps(eps, hi=0.5):
    if not (0 < eps < hi):
        raise GadgetRangeError(f"epsilon must lie in (0, {hi}), got {eps}")


# ----------------------------------------------------------------------------
# square

def _square_levels(eps):
    # smallest m with 2**(-2m-2) <= eps
    m = 0
    while 2.0 ** (-2 * m - 2) > eps:
        m += 1
    return m


def _square_net(m):
    """Piecewise-linear interpolant of a**2 on the dyadic grid of step 2**-m.

    Uses x**2 = x - sum_s g_s(x) / 4**s with g_s the s-fold hat function. Each
    hidden layer holds three neurons: the two ReLU pieces of the current hat
    iterate and the running interpolant, which is nonnegative on [0, 1].
    """
    if m == 0:
        return affine_net([[1.0]])
    layers = [AffineLayer([[1.0], [1.0], [1.0]], [0.0, -0.5, 0.0])]
    for s in range(1, m):
        f = 4.0 ** -s
        layers.append(AffineLayer([[2.0, -4.0, 0.0],
                                   [2.0, -4.0, 0.0],
                                   [-2.0 * f, 4.0 * f, 1.0]], [0.0, -0.5, 0.0]))
    f = 4.0 ** -m
    layers.append(AffineLayer([[-2.0 * f, 4.0 * f, 1.0]], [0.0]))
    return ReluNetwork(tuple(layers))


def build_square(epsilon: float) -> ReluNetwork:
    """Network g with |g(a) - a**2| <= epsilon on [0, 1]; width 3.

    The error of the level-m interpolant is 2**(-2m-2), so the depth is
    m + 1 <= log2(1/epsilon)/2 + 1. The output stays in [0, 1] on [0, 1].
    """
    _check_eps(epsilon)
    m = _square_levels(epsilon)
    return _finish(_square_net(m), "square", epsilon=float(epsilon), p=2,
                   levels=m, certified_error=2.0 ** (-2 * m - 2),
                   depth_formula="log2(1/epsilon)", depth_constant=0.5, depth_offset=1.0,
                   depth_bound=0.5 * math.log2(1 / epsilon) + 1.0)


# ----------------------------------------------------------------------------
# product and powers

def _clamp01():
    # o -> [o]_+ - [o - 1]_+, i.e. o clipped to [0, 1]
    return chain(affine_net([[1.0], [1.0]], [0.0, -1.0]), _relu(2), affine_net([[1.0, -1.0]]))


def build_mult(epsilon: float) -> ReluNetwork:
    """Network h with |h(a, b) - a*b| <= epsilon on [0, 1]^2.

    a*b = 2 s((a+b)/2) - s(a)/2 - s(b)/2 with s the square gadget. The three
    weighted terms get budget epsilon/3 each, so the first square is built
    at epsilon/6 and the other two at 2*epsilon/3. The result is clipped to
    [0, 1], which can only reduce the error on the domain and keeps chained
    products inside [0, 1].
    """
    _check_eps(epsilon)
    s_mid = _square_net(_square_levels(epsilon / 6))
    s_side = _square_net(_square_levels(2 * epsilon / 3))
    net = chain(
        affine_net([[0.5, 0.5], [1.0, 0.0], [0.0, 1.0]]),
        parallel(s_mid, s_side, s_side),
        affine_net([[2.0, -0.5, -0.5]]),
        _clamp01(),
    )
    return _finish(net, "mult", epsilon=float(epsilon), p=None,
                   square_budgets=[epsilon / 6, 2 * epsilon / 3, 2 * epsilon / 3],
                   depth_formula="log2(1/epsilon)", depth_constant=0.5,
                   depth_offset=0.5 * math.log2(6) + 2.0,
                   depth_bound=0.5 * math.log2(6 / epsilon) + 2.0)


def _mult_net(eps):
    # same as build_mult without the meta record, used inside larger gadgets
    return build_mult(eps)


def build_power_nat(epsilon: float, p: int) -> ReluNetwork:
    """Network g with |g(a) - a**p| <= epsilon on [0, 1], for integer p >= 2.

    p - 1 chained products v <- h(v, a), each at epsilon/(p-1), with a carried
    alongside. Errors add up to at most (p - 1) * epsilon/(p-1).
    """
    _check_eps(epsilon)
    if int(p) != p or p < 2:
        raise GadgetRangeError(f"p must be an integer >= 2, got {p}")
    p = int(p)
    if p == 2:
        net = chain(affine_net([[1.0], [1.0]]), _mult_net(epsilon))
    else:
        h = _mult_net(epsilon / (p - 1))
        stage = parallel(h, identity_net(1, h.depth))          # (v, a, a) -> (v*a, a)
        dup = affine_net([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])   # (v, a) -> (v, a, a)
        parts = [affine_net([[1.0], [1.0], [1.0]]), stage]
        for _ in range(p - 2):
            parts += [dup, stage]
        parts.append(affine_net([[1.0, 0.0]]))
        net = chain(*parts)
    F = p * math.log2(p / epsilon)
    return _finish(net, "power_nat", epsilon=float(epsilon), p=p,
                   mult_budget=epsilon / (p - 1),
                   depth_formula="p*log2(p/epsilon)", depth_constant=4.0, depth_offset=0.0,
                   depth_bound=4.0 * F)


def binomial_series(p: float, D: int) -> list:
    """Coefficients C(p, i), i = 0..D, of (1 + x)**p via the ratio recurrence.

    Computed exactly in rationals from the binary value of ``p`` and rounded
    once at the end.
    """
    pf = Fraction(p)
    c = [Fraction(1)]
    for i in range(1, D + 1):
        c.append(c[-1] * (pf - i + 1) / i)
    return [float(v) for v in c]


def frac_degree(p: float, epsilon: float) -> int:
    """Truncation degree ceil(p * (pi*epsilon/2) ** (-1/floor(p))) + 2."""
    return math.ceil(p * (math.pi * epsilon / 2) ** (-1.0 / math.floor(p))) + 2


def build_power_frac(epsilon: float, p: float) -> ReluNetwork:
    """Network g with |g(a) - a**p| <= epsilon on [0, 1] for non-integer p > 1.

    a**p = (1 + (a - 1))**p is replaced by its binomial series truncated at
    degree :func:`frac_degree`, which is within epsilon/2 on [0, 1]; the
    polynomial is realized by :func:`build_poly` at budget epsilon/2.
    """
    if not (0 < epsilon < 1):
        raise GadgetRangeError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not p > 1:
        raise GadgetRangeError(f"p must exceed 1, got {p}")
    if float(p).is_integer():
        raise GadgetRangeError(f"p={p} is an integer; use build_power_nat")
    D = frac_degree(p, epsilon)
    coeffs = binomial_series(p, D)
    poly = build_poly(epsilon / 2, coeffs)
    net = chain(affine_net([[1.0]], [-1.0]), poly)
    B = max(abs(c) for c in coeffs)
    F = poly.meta["depth_formula_value"]
    return _finish(net, "power_frac", epsilon=float(epsilon), p=float(p), degree=D,
                   coeff_bound=B, poly_budget=epsilon / 2,
                   depth_formula="D*(1+log2(1/eps_poly)+log2(D+1)+log2(B+1))",
                   depth_formula_value=F, depth_constant=4.0, depth_offset=0.0,
                   depth_bound=4.0 * F)


def build_poly(epsilon: float, coeffs) -> ReluNetwork:
    """Network with |net(a) - sum_i c_i a**i| <= epsilon on [-1, 1].

    Horner's scheme v_j = c_j + a v_{j+1}. Degrees 0 and 1 are exact affine
    maps. Each remaining product a*v is computed by a mult gadget on the
    rescaled pair a' = (a+1)/2, v' = (v/V + 1)/2 in [0, 1], where V bounds
    |v| (sum of the remaining |c_i| plus a unit margin), using
    a*v = V (4a'v' - 2a' - 2v' + 1). A product error e becomes 4Ve, so the
    mult budget is epsilon / (8 * sum of the V's), giving total error at
    most epsilon/2.
    """
    c = np.asarray(coeffs, dtype=np.float64).ravel()
    if c.size == 0:
        raise GadgetRangeError("coefficient list is empty")
    _check_eps(epsilon)
    D = c.size - 1
    B = float(np.max(np.abs(c)))
    F = D * (1 + math.log2(1 / epsilon) + math.log2(D + 1) + math.log2(B + 1)) if D else 1.0
    common = dict(epsilon=float(epsilon), p=None, degree=D, coeff_bound=B,
                  depth_formula="D*(1+log2(1/epsilon)+log2(D+1)+log2(B+1))",
                  depth_formula_value=F, depth_constant=4.0, depth_offset=1.0,
                  depth_bound=4.0 * F + 1.0)
    if D == 0:
        return _finish(affine_net([[0.0]], [c[0]]), "poly", mult_budget=None, **common)
    if D == 1:
        return _finish(affine_net([[c[1]]], [c[0]]), "poly", mult_budget=None, **common)

    tail = np.cumsum(np.abs(c[::-1]))[::-1]      # tail[j] = sum_{i >= j} |c_i|
    V = tail + 1.0
    eps_m = epsilon / (8.0 * V[1:D].sum())
    h = _mult_net(eps_m)
    stage = parallel(h, identity_net(2, h.depth))  # (a', v', a', v') -> (o, a', v')

    # a -> (a', v'_{D-1}) twice
    top = np.array([[0.5], [0.5 * c[D] / V[D - 1]]])
    top_b = np.array([0.5, 0.5 * c[D - 1] / V[D - 1] + 0.5])
    parts = [affine_net(np.vstack([top, top]), np.concatenate([top_b, top_b]))]
    for j in range(D - 2, -1, -1):
        Vn = V[j + 1]
        # v_j = c_j + Vn*(4o - 2a' - 2v' + 1)
        row_v = np.array([4.0 * Vn, -2.0 * Vn, -2.0 * Vn])
        bias_v = c[j] + Vn
        parts.append(stage)
        if j == 0:
            parts.append(affine_net(row_v[None, :], [bias_v]))
        else:
            row_vp = 0.5 * row_v / V[j]
            bias_vp = 0.5 * bias_v / V[j] + 0.5
            Wt = np.array([[0.0, 1.0, 0.0], row_vp, [0.0, 1.0, 0.0], row_vp])
            parts.append(affine_net(Wt, [0.0, bias_vp, 0.0, bias_vp]))
    return _finish(chain(*parts), "poly", mult_budget=eps_m, **common)


def build_power(epsilon: float, p: float) -> ReluNetwork:
    """Approximate a**p on [0, 1]: exact identity for p = 1, otherwise the
    square, natural-power or fractional-power gadget."""
    if p == 1:
        return _finish(affine_net([[1.0]]), "identity", epsilon=float(epsilon), p=1,
                       depth_formula="1", depth_constant=1.0, depth_offset=0.0, depth_bound=1.0)
    if p == 2:
        return build_square(epsilon)
    if float(p).is_integer():
        return build_power_nat(epsilon, int(p))
    return build_power_frac(epsilon, p)


# ----------------------------------------------------------------------------
# ball indicator

def indicator_width(k: int, p: float, gadget_width: int = 0) -> int:
    """Hidden width of :func:`indicator_core` on R^k."""
    if p == 1 or math.isinf(p):
        return k + 3
    return k + 1 + max(2, 1 + gadget_width)


def indicator_core(centre, y0, r, w, p, gadget=None) -> ReluNetwork:
    """Ball indicator on already shifted coordinates u >= 0.

    Maps u in R^k to (z, u) with z = y0 when |u - centre|_p <= r, z = 0 when
    |u - centre|_p >= r + w, and 0 <= z <= y0 everywhere. ``r = 0`` is
    allowed here (point indicator). For p in {1, inf} the norm is computed
    exactly, coordinate by coordinate. Otherwise each |a_j|**p comes from a
    power gadget with error w**p / (4k(w+2r)**p) applied to
    b_j = |a_j|/(w+2r), plus a penalty term for b_j > 1/2 that pushes the sum
    past the cutoff whenever some coordinate alone leaves the ball.
    """
    x0 = np.asarray(centre, dtype=np.float64).ravel()
    k = x0.size
    exact = p == 1 or math.isinf(p)
    Dn = w + 2 * r
    if not exact:
        if gadget is None:
            gadget = build_power(w ** p / (4 * k * Dn ** p), p)
        Lb = max(2, gadget.depth)
        K = r ** p + 0.75 * w ** p
    eye = np.eye(k)
    zk = np.zeros((k, 1))

    def spread(j):
        # (u, s) -> (u, s, a_j, -a_j)
        W = np.zeros((k + 3, k + 1))
        W[:k, :k] = eye
        W[k, k] = 1.0
        W[k + 1, j] = 1.0
        W[k + 2, j] = -1.0
        b = np.zeros(k + 3)
        b[k + 1], b[k + 2] = -x0[j], x0[j]
        return affine_net(W, b)

    def keep(extra_rows):
        # rows carrying (u, s) unchanged followed by extra rows
        return np.vstack([np.hstack([eye, zk, np.zeros((k, extra_rows.shape[1] - k - 1))]),
                          np.eye(1, extra_rows.shape[1], k), extra_rows])

    parts = [affine_net(np.vstack([eye, np.zeros((1, k))]))]   # u -> (u, 0)
    for j in range(k):
        if p == 1:
            W = keep(np.zeros((0, k + 3)))
            W[k, k + 1:] = 1.0                                  # s += a+ + a-
            parts += [spread(j), _relu(k + 3), affine_net(W)]
        elif math.isinf(p):
            B = keep(np.array([[0.0] * k + [-1.0, 1.0, 1.0]]))  # (u, m, |a| - m)
            Wf = keep(np.zeros((0, k + 2)))
            Wf[k, k + 1] = 1.0                                  # m += [|a| - m]_+
            parts += [spread(j), _relu(k + 3), affine_net(B), _relu(k + 2), affine_net(Wf)]
        else:
            bj = np.array([0.0] * (k + 1) + [1.0 / Dn, 1.0 / Dn])
            Bm = keep(np.vstack([2 * bj, bj]))                  # (u, s, 2b - 1, b)
            Bb = np.zeros(k + 3)
            Bb[k + 1] = -1.0
            G = parallel(identity_net(k + 2, Lb), extend_depth(gadget, Lb))
            E = np.eye(k + 3)
            E[k + 2, k + 2] = Dn ** p                           # eta = [(w+2r)**p gamma]_+
            Wf = keep(np.zeros((0, k + 3)))
            Wf[k, k + 1], Wf[k, k + 2] = K, 1.0                 # s += eta + K c
            parts += [spread(j), _relu(k + 3), affine_net(Bm, Bb), G,
                      affine_net(E), _relu(k + 3), affine_net(Wf)]
    if exact:
        cut, slope = r, y0 / w
    else:
        cut, slope = r ** p + w ** p / 4, 2 * y0 / w ** p
    T1 = np.eye(k + 1)
    parts += [affine_net(T1, np.r_[np.zeros(k), -cut]), _relu(k + 1)]
    T2 = np.eye(k + 1)
    T2[k, k] = -slope
    parts += [affine_net(T2, np.r_[np.zeros(k), y0]), _relu(k + 1)]
    out = np.zeros((k + 1, k + 1))
    out[0, k] = 1.0
    out[1:, :k] = eye
    parts.append(affine_net(out))
    net = chain(*parts)
    gw = 0 if exact else gadget.width
    per = (1 if p == 1 else 2) if exact else Lb + 1
    return annotate(net, name="ball_indicator_core", p=p, r=float(r), w=float(w), y0=float(y0),
                    gadget=None if exact else gadget.meta.get("name"),
                    gadget_width=gw, gadget_depth=None if exact else gadget.depth,
                    gadget_epsilon=None if exact else gadget.meta.get("epsilon"),
                    width_formula=indicator_width(k, p, gw),
                    depth_exact=k * per + 3)


def build_ball_indicator(x0, y0, r, w, p, domain_radius=None) -> ReluNetwork:
    """Network equal to y0 on the closed l_p ball B(x0, r) and 0 outside B(x0, r + w).

    The output is a vector: first the indicator value, then the input
    coordinates shifted by ``input_shift`` (so ``net(x)[1:] == x - shift``).
    Carrying coordinates through ReLU layers needs x - shift >= 0, which holds
    on the l_inf box of half-width ``domain_radius`` around x0 (default
    10 (r + w)); outside that box the output is not guaranteed.
    Supported p: any real p >= 1 and inf.
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if not w > 0:
        raise GadgetRangeError(f"w must be positive, got {w}")
    if not r > 0:
        raise GadgetRangeError(f"r must be positive, got {r}")
    if not y0 > 0:
        raise GadgetRangeError(f"y0 must be positive, got {y0}")
    if not p >= 1:
        raise GadgetRangeError(f"ball indicators need p >= 1, got {p}")
    R = 10.0 * (r + w) if domain_radius is None else float(domain_radius)
    shift = x0 - R
    core = indicator_core(x0 - shift, y0, r, w, p)
    net = ReluNetwork(core.layers, shift, core.meta)
    return annotate(net, name="ball_indicator", x0=x0, domain_radius=R,
                    achieved_width=net.width, achieved_depth=net.depth,
                    epsilon=core.meta["gadget_epsilon"])


# ----------------------------------------------------------------------------
# step and max

def build_step(C: int) -> ReluNetwork:
    """Width-2 network psi with psi(t) = m on [m - 1/4, m + 1/4] for m = 1..C.

    For l = 0..C-1 it computes
        psi_{3l}   = [2t - (2(C-l) - 1)/2 - psi_{3l-1}]_+   (psi_{-1} = 0)
        psi_{3l+1} = [l + 1 - psi_{3l}]_+
        psi_{3l+2} = [l + 1 - psi_{3l+1}]_+
    one neuron per layer, with t carried in the second neuron (t >= 0 on the
    plateaus). The output is psi_{3C-1}.
    """
    if int(C) != C or C < 2:
        raise GadgetRangeError(f"C must be an integer >= 2, got {C}")
    C = int(C)
    carry = [1.0, 0.0]                     # row keeping t in slot 0
    layers = [AffineLayer([[1.0], [2.0]], [0.0, -(2 * C - 1) / 2])]
    for l in range(C):
        layers.append(AffineLayer([carry, [0.0, -1.0]], [0.0, l + 1.0]))
        layers.append(AffineLayer([carry, [0.0, -1.0]], [0.0, l + 1.0]))
        if l + 1 < C:
            layers.append(AffineLayer([carry, [2.0, -1.0]], [0.0, -(2 * (C - l - 1) - 1) / 2]))
    layers.append(AffineLayer([[0.0, 1.0]], [0.0]))
    net = ReluNetwork(tuple(layers))
    return _finish(net, "step", epsilon=0.0, p=None, C=C,
                   depth_formula="C", depth_constant=3.0, depth_offset=1.0, depth_bound=3.0 * C + 1)


def build_max_accumulator() -> ReluNetwork:
    """(m, z) -> m + [z - m]_+ = max(m, z) for nonnegative m, z."""
    net = ReluNetwork((AffineLayer([[1.0, 0.0], [-1.0, 1.0]], [0.0, 0.0]),
                       AffineLayer([[1.0, 1.0]], [0.0])))
    return _finish(net, "max_accumulator", epsilon=0.0, p=None)
