"""Labeled point sets, separation in l_q, norm constants and samplers."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import GenerationError, UndefinedSeparationError

__all__ = [
    "LabeledDataset",
    "RobustnessSpec",
    "RadiusVerdict",
    "lp_norm",
    "separation",
    "norm_constant",
    "validate_radius",
    "gen_random_separated",
    "ball_sample",
    "load_csv",
    "save_csv",
    "to_csv",
]


def _inv(p):
    return 0.0 if math.isinf(p) else 1.0 / p


def parse_p(value) -> float:
    """Accept numbers and the strings 'inf'/'infinity'."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    return float(value)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """N points in R^d with positive integer labels 1..C."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.points, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"points must be a non-empty (N, d) array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"need one label per point, got {y.shape} for {X.shape[0]} points")
        if not np.all(np.isfinite(X)):
            raise ValueError("points must be finite")
        if y.dtype.kind == "f":
            if not np.all(y == np.round(y)):
                raise ValueError("labels must be integers")
        y = y.astype(np.int64)
        if np.any(y < 1):
            raise ValueError("labels must be positive integers starting at 1")
        # equal points must carry equal labels
        _, inv = np.unique(X, axis=0, return_inverse=True)
        inv = np.ravel(inv)
        for g in np.unique(inv):
            if len(np.unique(y[inv == g])) > 1:
                raise ValueError("two identical points carry different labels")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())

    def cross_pairs(self):
        """Index pairs (i, j), i < j, with different labels."""
        i, j = np.triu_indices(self.n, k=1)
        keep = self.labels[i] != self.labels[j]
        return np.stack([i[keep], j[keep]], axis=1)


@dataclass(frozen=True)
class RobustnessSpec:
    """Robustness radius ``sigma`` in the l_p (quasi-)norm, separation measured in l_q."""

    p: float
    sigma: float
    q: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "p", parse_p(self.p))
        object.__setattr__(self, "q", parse_p(self.q))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not self.q >= 1:
            raise ValueError(f"q must be at least 1, got {self.q}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


def lp_norm(v, p, axis=-1):
    """l_p norm along ``axis``; a quasi-norm for p < 1."""
    v = np.abs(np.asarray(v, dtype=np.float64))
    if math.isinf(p):
        return v.max(axis=axis)
    if p == 1:
        return v.sum(axis=axis)
    if p == 2:
        return np.sqrt((v * v).sum(axis=axis))
    # scale by the max entry to avoid under/overflow for large or tiny p
    m = v.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    out = (((v / safe) ** p).sum(axis=axis, keepdims=True)) ** (1.0 / p) * m
    return np.squeeze(out, axis=axis)


def _cdist(A, B, q):
    if math.isinf(q):
        return cdist(A, B, "chebyshev")
    if q == 2:
        return cdist(A, B, "euclidean")
    if q == 1:
        return cdist(A, B, "cityblock")
    return cdist(A, B, "minkowski", p=q)


def separation(ds: LabeledDataset, q: float = 2.0) -> float:
    """Smallest l_q distance between two points with different labels."""
    q = parse_p(q)
    labels = np.unique(ds.labels)
    if labels.size < 2:
        raise UndefinedSeparationError("separation needs at least two classes")
    best = math.inf
    for c in labels[:-1]:
        A = ds.points[ds.labels == c]
        B = ds.points[ds.labels > c]
        best = min(best, float(_cdist(A, B, q).min()))
    return best


def norm_constant(sign: str, p: float, q: float, d: int) -> float:
    """``d ** [1/q - 1/p]_+`` for sign '+', ``d ** [1/q - 1/p]_-`` for sign '-'.

    With these, ``c_minus * |v|_p <= |v|_q <= c_plus * |v|_p`` for v in R^d.
    Here ``[t]_- = min(t, 0)``.
    """
    p, q = parse_p(p), parse_p(q)
    t = _inv(q) - _inv(p)
    if sign in ("+", "plus", 1):
        return float(d) ** max(t, 0.0)
    if sign in ("-", "minus", -1):
        return float(d) ** min(t, 0.0)
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


@dataclass(frozen=True)
class RadiusVerdict:
    feasible: bool
    ratio: float
    threshold: float

    def __bool__(self):
        return self.feasible


def validate_radius(spec: RobustnessSpec, delta: float, d: int) -> RadiusVerdict:
    """Robust memorization is only meaningful for sigma/delta < 1/(2 c_plus(p, q, d))."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    threshold = 1.0 / (2.0 * norm_constant("+", spec.p, spec.q, d))
    ratio = spec.sigma / delta
    return RadiusVerdict(bool(ratio < threshold), float(ratio), float(threshold))


def gen_random_separated(N, d, C, delta, q=2.0, seed=0, max_retries=10_000) -> LabeledDataset:
    """Random dataset whose cross-class l_q distances are all at least ``delta``.

    Points are proposed uniformly in a cube of side ``2 delta N**(1/d)`` and
    rejected if they come closer than ``delta`` to a point of another class.
    Every class 1..C gets at least one point.
    """
    if not (N >= C >= 2):
        raise ValueError(f"need N >= C >= 2, got N={N}, C={C}")
    q = parse_p(q)
    rng = np.random.default_rng(seed)
    side = 2.0 * delta * N ** (1.0 / d)
    labels = np.concatenate([np.arange(1, C + 1), rng.integers(1, C + 1, size=N - C)])
    rng.shuffle(labels)
    pts = np.empty((N, d))
    retries = 0
    for i in range(N):
        while True:
            x = rng.uniform(0.0, side, size=d)
            other = labels[:i] != labels[i]
            if not other.any() or _cdist(x[None], pts[:i][other], q).min() >= delta:
                break
            retries += 1
            if retries > max_retries:
                raise GenerationError(
                    f"could not place {N} points with separation {delta} after {max_retries} retries")
        pts[i] = x
    return LabeledDataset(pts, labels)


def ball_sample(center, r, p, n, seed=0, mode="interior"):
    """Sample ``n`` points of the l_p ball (or sphere) of radius ``r``.

    Directions come from the generalized normal distribution with density
    proportional to exp(-|t|^p), normalized to unit l_p norm; for interior
    samples the radius is ``r * U**(1/d)``, which is uniform in volume. The
    recipe also works for quasi-norms with p < 1. For p = inf the interior is
    a uniform box and boundary points have one coordinate pinned at +-r.
    """
    c = np.asarray(center, dtype=np.float64).ravel()
    d = c.size
    p = parse_p(p)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if mode not in ("interior", "boundary"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if r == 0 or n == 0:
        return np.tile(c, (n, 1))
    if math.isinf(p):
        U = rng.uniform(-1.0, 1.0, size=(n, d))
        if mode == "boundary":
            face = rng.integers(0, d, size=n)
            U[np.arange(n), face] = rng.choice([-1.0, 1.0], size=n)
        return c + r * U
    G = rng.gamma(1.0 / p, 1.0, size=(n, d)) ** (1.0 / p)
    G *= rng.choice([-1.0, 1.0], size=(n, d))
    norms = lp_norm(G, p)
    # all-zero rows have probability zero but guard anyway
    norms = np.where(norms > 0, norms, 1.0)
    S = G / norms[:, None]
    if mode == "interior":
        S *= rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return c + r * S


# ----------------------------------------------------------------------------
# CSV

def to_csv(ds: LabeledDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(ds.d)] + ["label"])
    for x, y in zip(ds.points, ds.labels):
        w.writerow([repr(float(v)) for v in x] + [int(y)])
    return buf.getvalue()


def save_csv(ds: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(ds))


def load_csv(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[-1].strip() != "label":
        raise ValueError(f"{path}: last header column must be 'label'")
    d = len(header) - 1
    pts = np.empty((len(body), d))
    labels = np.empty(len(body), dtype=np.int64)
    for i, row in enumerate(body):
        if len(row) != d + 1:
            raise ValueError(f"{path}: row {i + 2} has {len(row)} fields, expected {d + 1}")
        pts[i] = [float(v) for v in row[:d]]
        labels[i] = int(row[d])
    return LabeledDataset(pts, labels)
