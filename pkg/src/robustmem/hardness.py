"""Two-sphere datasets that no rank-k linear map can keep apart.

Inner class: a sigma-cover of the sphere of radius r = sqrt(2 sigma delta) in
the first k+1 coordinates. Outer class: an r-cover of the concentric sphere
of radius r + delta. For any matrix M of rank <= k, ker M meets that
(k+1)-dimensional subspace, and the covers then yield an outer point b_j and
a point a_i within sigma of an inner point with M(b_j - a_i) = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset, separation
from .errors import CoverFailure

__all__ = [
    "delta_k",
    "CoverReport",
    "HardInstance",
    "Witness",
    "sphere_points",
    "verify_cover",
    "greedy_sphere_cover",
    "build_hard_instance",
    "find_collision",
    "witness_nonpreservation",
    "numerical_rank",
]

COVER_SLACK = 1e-6


def delta_k(k: int) -> float:
    """Covering constant sqrt(2) * (5k ln(k+1) sqrt(2 pi (k+1)))**(1/k)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return math.sqrt(2) * (5 * k * math.log(k + 1) * math.sqrt(2 * math.pi * (k + 1))) ** (1.0 / k)


def sphere_points(k: int, R: float, n: int, rng) -> np.ndarray:
    """n uniform points on the radius-R sphere in R^(k+1)."""
    G = rng.standard_normal((n, k + 1))
    return R * G / np.linalg.norm(G, axis=1, keepdims=True)


@dataclass(frozen=True)
class CoverReport:
    max_gap: float
    n_samples: int
    target_radius: float

    @property
    def covered(self) -> bool:
        return self.max_gap <= self.target_radius + COVER_SLACK


def _nearest(points, centers, chunk=4096):
    out = np.empty(points.shape[0])
    c2 = (centers ** 2).sum(1)
    for s in range(0, points.shape[0], chunk):
        P = points[s:s + chunk]
        d2 = (P ** 2).sum(1)[:, None] - 2 * P @ centers.T + c2[None, :]
        out[s:s + chunk] = np.sqrt(np.maximum(d2.min(1), 0.0))
    return out


def verify_cover(centers, R, rho, n_samples=10_000, seed=0, dim=None) -> CoverReport:
    """Largest distance from random sphere points to the nearest center.

    The sphere lives in the first ``dim`` coordinates. ``centers`` may have
    more columns (zero padded). Without ``dim`` it is inferred as the index
    of the last column that is not identically zero, plus one, which
    underestimates it when all centers share a zero trailing coordinate.
    """
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if dim is None:
        used = np.flatnonzero(np.any(C != 0, axis=0))
        dim = int(used.max()) + 1 if used.size else 1
    rng = np.random.default_rng(seed)
    S = sphere_points(dim - 1, R, n_samples, rng)
    gap = float(_nearest(S, C[:, :dim]).max()) if C.size else math.inf
    if np.any(C[:, dim:] != 0):
        gap = math.inf
    return CoverReport(gap, int(n_samples), float(rho))


def greedy_sphere_cover(k: int, R: float, rho: float, max_centers: int, seed=0,
                        min_centers: int = 0, n_candidates: int = 20_000,
                        n_check: int = 10_000) -> np.ndarray:
    """Farthest-point cover of the radius-R sphere in R^(k+1) by rho-balls.

    Centers are picked among ``n_candidates`` random sphere points, each time
    the one farthest from the current centers. The loop stops once the
    candidate gap is at most rho minus the candidates' own coverage radius
    (so the true gap is at most rho), a fresh ``n_check``-point check agrees,
    and at least ``min_centers`` centers are placed. Raises CoverFailure if
    ``max_centers`` is reached first.
    """
    if rho > R or rho < 0 or (k > 0 and rho == 0):
        raise ValueError(f"need 0 < rho <= R, got rho={rho}, R={R}")
    if max_centers < 1:
        raise ValueError("max_centers must be at least 1")
    rng = np.random.default_rng(seed)
    if k == 0:
        cand = np.array([[R], [-R]])
        h = 0.0
    else:
        cand = sphere_points(k, R, n_candidates, rng)
        probe = sphere_points(k, R, 2000, rng)
        h = float(_nearest(probe, cand).max())
    target = rho - h if rho - h > 0 else 0.5 * rho
    idx = [int(rng.integers(cand.shape[0]))]
    dist = np.linalg.norm(cand - cand[idx[0]], axis=1)
    check_seed = int(rng.integers(2 ** 32))
    while True:
        gap = float(dist.max())
        if gap <= target and len(idx) >= min_centers:
            rep = verify_cover(cand[idx], R, rho, n_check, check_seed, dim=k + 1)
            if rep.covered or k == 0:
                return cand[idx].copy()
        if len(idx) >= max_centers:
            raise CoverFailure(f"{len(idx)} centers leave a gap of {gap:.4g} > rho={rho:.4g}",
                               max_gap=gap, n_centers=len(idx))
        nxt = int(dist.argmax())
        if dist[nxt] == 0.0:          # every candidate is a center already
            rep = verify_cover(cand[idx], R, rho, n_check, check_seed, dim=k + 1)
            if rep.covered:
                return cand[idx].copy()
            raise CoverFailure("ran out of candidates", max_gap=rep.max_gap, n_centers=len(idx))
        idx.append(nxt)
        np.minimum(dist, np.linalg.norm(cand - cand[nxt], axis=1), out=dist)


@dataclass(frozen=True, eq=False)
class HardInstance:
    dataset: LabeledDataset
    r: float
    inner_centers: np.ndarray
    outer_centers: np.ndarray
    k: int
    sigma: float
    delta: float
    cover_radii: tuple
    inner_report: CoverReport | None = None
    outer_report: CoverReport | None = None
    within_hypothesis: bool = False

    def to_json(self):
        return {
            "n": self.dataset.n, "d": self.dataset.d, "k": self.k,
            "sigma": self.sigma, "delta": self.delta, "r": self.r,
            "cover_radii": list(self.cover_radii),
            "inner_centers": self.inner_centers.tolist(),
            "outer_centers": self.outer_centers.tolist(),
            "inner_max_gap": None if self.inner_report is None else self.inner_report.max_gap,
            "outer_max_gap": None if self.outer_report is None else self.outer_report.max_gap,
            "within_hypothesis": self.within_hypothesis,
        }

    @classmethod
    def from_json(cls, doc):
        inner = np.asarray(doc["inner_centers"], dtype=float)
        outer = np.asarray(doc["outer_centers"], dtype=float)
        ds = LabeledDataset(np.vstack([inner, outer]),
                            np.r_[np.ones(len(inner), int), 2 * np.ones(len(outer), int)])
        return cls(ds, float(doc["r"]), inner, outer, int(doc["k"]), float(doc["sigma"]),
                   float(doc["delta"]), tuple(doc["cover_radii"]),
                   within_hypothesis=bool(doc.get("within_hypothesis", False)))


def build_hard_instance(N, d, k, delta, sigma, seed=0, n_check=10_000) -> HardInstance:
    """Inner sigma-cover (label 1) and outer r-cover (label 2), r = sqrt(2 sigma delta).

    The inner class gets ceil(N/2) points. Both covers are filled up to
    their point budget with further farthest points. The instance is flagged
    ``within_hypothesis`` when 2 sigma/delta > 4832 N**(-2/k), the regime in
    which the construction is known to defeat every rank-k map.
    """
    if not (1 <= k <= d - 1):
        raise ValueError(f"need 1 <= k <= d - 1, got k={k}, d={d}")
    if not (0 < sigma <= delta / 2):
        raise ValueError(f"need 0 < sigma <= delta/2, got sigma={sigma}, delta={delta}")
    n_in = (N + 1) // 2
    n_out = N - n_in
    r = math.sqrt(2 * sigma * delta)
    ss = np.random.SeedSequence(seed).spawn(4)
    inner = greedy_sphere_cover(k, r, sigma, n_in, seed=ss[0], min_centers=n_in, n_check=n_check)
    outer = greedy_sphere_cover(k, r + delta, r, n_out, seed=ss[1], min_centers=n_out,
                                n_check=n_check)
    pad = lambda C: np.hstack([C, np.zeros((C.shape[0], d - k - 1))])
    inner, outer = pad(inner), pad(outer)
    ds = LabeledDataset(np.vstack([inner, outer]),
                        np.r_[np.ones(n_in, dtype=int), 2 * np.ones(n_out, dtype=int)])
    rep_in = verify_cover(inner, r, sigma, n_check, seed=ss[2], dim=k + 1)
    rep_out = verify_cover(outer, r + delta, r, n_check, seed=ss[3], dim=k + 1)
    if not rep_in.covered or not rep_out.covered:
        raise CoverFailure("cover check failed after construction",
                           max_gap=max(rep_in.max_gap, rep_out.max_gap))
    hyp = 2 * sigma / delta > 4832 * N ** (-2.0 / k)
    return HardInstance(ds, r, inner, outer, k, float(sigma), float(delta), (float(sigma), r),
                        rep_in, rep_out, bool(hyp))


# ----------------------------------------------------------------------------
# witnesses

@dataclass(frozen=True, eq=False)
class Witness:
    """a_point lies within sigma of point i; b_point is point j; M maps their
    difference to (nearly) zero when ``found``."""

    found: bool
    i: int
    j: int
    a_point: np.ndarray
    b_point: np.ndarray
    residual: float
    pairs_examined: int = 0
    note: str = field(default="")

    def to_json(self):
        return {"found": self.found, "i": self.i, "j": self.j,
                "a_point": self.a_point.tolist(), "b_point": self.b_point.tolist(),
                "residual": self.residual, "pairs_examined": self.pairs_examined,
                "note": self.note}


def numerical_rank(M, tol=1e-9) -> int:
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    return int((s > tol).sum())


def _ball_lsq(s, yt, sigma):
    """argmin_y sum s_l^2 (yt_l - y_l)^2 subject to |y| <= sigma (s > 0)."""
    if np.linalg.norm(yt) <= sigma:
        return yt
    lo, hi = 0.0, float(s.max() ** 2) * (np.linalg.norm(yt) / max(sigma, 1e-300) + 1.0)
    for _ in range(200):
        lam = 0.5 * (lo + hi)
        y = s ** 2 * yt / (s ** 2 + lam)
        if np.linalg.norm(y) > sigma:
            lo = lam
        else:
            hi = lam
    return s ** 2 * yt / (s ** 2 + hi)


def find_collision(M, points_a, points_b, sigma, tol=1e-6, n_refine=50) -> Witness:
    """Search a in B(points_a[i], sigma) and j with M(points_b[j] - a) ~ 0.

    With V spanning the row space of M, the best a for a pair is
    x_i + V y where y minimizes |S (V^T (b_j - x_i) - y)| over |y| <= sigma;
    when |V^T (b_j - x_i)| <= sigma the minimum is exactly zero. Every pair is
    screened in closed form; the ``n_refine`` most promising pairs get the
    constrained solve. The residual is |M(b - a)| / |b - a|.
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    A = np.atleast_2d(np.asarray(points_a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(points_b, dtype=np.float64))
    _, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > 1e-12 * max(s.max(initial=0.0), 1.0)
    s, Vt = s[keep], Vt[keep]
    diff = B[None, :, :] - A[:, None, :]                       # (nA, nB, d)
    coef = diff @ Vt.T                                          # row-space coordinates
    excess = np.linalg.norm(coef, axis=2).ravel()
    order = np.argsort(excess, kind="stable")[:max(1, n_refine)]
    best = None
    for flat in order:
        i, j = (int(v) for v in np.unravel_index(flat, (A.shape[0], B.shape[0])))
        y = _ball_lsq(s, coef[i, j], sigma) if s.size else np.zeros(0)
        a = A[i] + Vt.T @ y
        gap = B[j] - a
        res = float(np.linalg.norm(M @ gap) / np.linalg.norm(gap))
        if best is None or res < best[0]:
            best = (res, i, j, a)
        if res <= tol:
            break
    res, i, j, a = best
    return Witness(bool(res <= tol), i, j, a, B[j].copy(), res, int(excess.size))


def witness_nonpreservation(M, inst: HardInstance, tol=1e-6) -> Witness:
    """Outer point b_j and a_i within sigma of an inner point with M(b_j - a_i) ~ 0.

    ``i`` and ``j`` index the dataset rows. A witness shows that no rescaling
    of M keeps the two classes' neighbourhoods apart.
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rank = numerical_rank(M)
    if rank > inst.k:
        note = f"rank {rank} exceeds k={inst.k}; outside the construction's scope"
    else:
        note = ""
    n_in = inst.inner_centers.shape[0]
    w = find_collision(M, inst.inner_centers, inst.outer_centers, inst.sigma, tol)
    return Witness(w.found, w.i, n_in + w.j, w.a_point, w.b_point, w.residual,
                   w.pairs_examined, note)
