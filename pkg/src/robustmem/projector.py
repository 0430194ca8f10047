"""Random orthogonal projections that keep differently labeled neighbourhoods apart.

A linear map T *preserves* a dataset at radius sigma when
``|a - a'| <= |T(a - a')|`` for all a, a' within l_2 distance sigma of two
differently labeled points. For T = P / epsilon with P an orthogonal
projection of rank k this reduces to ``|P s| >= epsilon`` for every unit
direction s in the cap of angular radius ``arcsin(2 sigma / |x_i - x_j|)``
around each normalized difference v_ij. :func:`certify` checks the
sufficient condition ``|P v_ij| > epsilon + 2 sigma/|x_i - x_j|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset, separation
from .errors import InfeasibleRadiusError, SearchFailure
from .netcore import AffineLayer

__all__ = [
    "ProjectionCertificate",
    "CertificationFailure",
    "sample_projection",
    "required_epsilon",
    "certify",
    "find_preserving_projection",
    "scale_to_preserving",
    "cap_min_bruteforce",
    "pair_directions",
]


@dataclass(frozen=True, eq=False)
class ProjectionCertificate:
    """Certified preserving projection.

    ``margins[t]`` belongs to the pair ``pairs[t]`` and is positive.
    """

    P: np.ndarray
    epsilon: float
    pairs: np.ndarray
    margins: np.ndarray
    sigma: float
    draws_used: int = 0
    outside_guarantee: bool = False
    certified: bool = field(default=True, init=False)

    def to_json(self):
        return {
            "P": self.P.tolist(),
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "pairs": self.pairs.tolist(),
            "margins": self.margins.tolist(),
            "draws_used": self.draws_used,
            "outside_guarantee": self.outside_guarantee,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["P"], dtype=float), float(doc["epsilon"]),
                   np.asarray(doc["pairs"], dtype=np.int64).reshape(-1, 2),
                   np.asarray(doc["margins"], dtype=float), float(doc["sigma"]),
                   int(doc.get("draws_used", 0)), bool(doc.get("outside_guarantee", False)))


@dataclass(frozen=True, eq=False)
class CertificationFailure:
    """Pairs whose margin is not positive (``violations`` indexes ``pairs``)."""

    pairs: np.ndarray
    margins: np.ndarray
    violations: np.ndarray
    certified: bool = field(default=False, init=False)

    @property
    def violating_pairs(self):
        return self.pairs[self.violations]

    def __bool__(self):
        return False


def _gram_schmidt_rows(G):
    # classical Gram-Schmidt, each row orthogonalized twice
    Q = np.zeros_like(G)
    for i, g in enumerate(G):
        v = g.copy()
        for _ in range(2):
            v -= Q[:i].T @ (Q[:i] @ v)
        Q[i] = v / np.linalg.norm(v)
    return Q


def sample_projection(d: int, k: int, seed=0) -> np.ndarray:
    """Haar-random k x d matrix with orthonormal rows.

    Gram-Schmidt on the rows of a standard Gaussian matrix; the row space is
    uniformly distributed because the Gaussian law is rotation invariant.
    """
    if not (1 <= k <= d):
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _gram_schmidt_rows(rng.standard_normal((k, d)))


def required_epsilon(N: int, d: int, k: int) -> float:
    """Scale at which a random rank-k projection preserves N points in R^d:
    (1/2) sqrt(k/(d e)) N**(-2/k). Guaranteed for 2 sigma/delta <= this value."""
    return 0.5 * math.sqrt(k / (d * math.e)) * N ** (-2.0 / k)


def pair_directions(ds: LabeledDataset):
    """Cross-class pairs, their unit difference vectors and l_2 lengths."""
    pairs = ds.cross_pairs()
    diff = ds.points[pairs[:, 1]] - ds.points[pairs[:, 0]]
    dist = np.linalg.norm(diff, axis=1)
    return pairs, diff / dist[:, None], dist


def _is_orthonormal_rows(M, tol=1e-9):
    return np.allclose(M @ M.T, np.eye(M.shape[0]), atol=tol)


def certify(P, ds: LabeledDataset, sigma: float, epsilon: float):
    """Check the cap-margin condition for every cross-class pair.

    For P with orthonormal rows the margin of pair (i, j) is
    ``|P v_ij| - epsilon - 2 sigma/|x_i - x_j|``. Any other matrix M is
    treated as a candidate map with scale epsilon (use epsilon = 1 for a map
    that should preserve as is) and gets the weaker bound
    ``cos(phi)|M v_ij| - sin(phi)|M|_2 - epsilon``, valid for every s in the
    cap since ``|M s| >= cos(theta)|M v| - sin(theta)|M|_2``.

    Returns a :class:`ProjectionCertificate` when all margins are positive,
    otherwise a :class:`CertificationFailure` listing the violating pairs.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if P.shape[1] != ds.d:
        raise ValueError(f"map acts on R^{P.shape[1]}, dataset lives in R^{ds.d}")
    if not (0 < epsilon <= 1):
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    delta = separation(ds, 2)
    if sigma >= delta / 2:
        raise InfeasibleRadiusError(f"sigma={sigma} >= delta/2={delta / 2}")
    pairs, vhat, dist = pair_directions(ds)
    sin_phi = 2.0 * sigma / dist
    proj = np.linalg.norm(vhat @ P.T, axis=1)
    if _is_orthonormal_rows(P):
        margins = proj - (epsilon + sin_phi)
    else:
        cos_phi = np.sqrt(1.0 - sin_phi ** 2)
        margins = cos_phi * proj - sin_phi * np.linalg.norm(P, 2) - epsilon
    bad = np.flatnonzero(margins <= 0)
    if bad.size:
        return CertificationFailure(pairs, margins, bad)
    return ProjectionCertificate(P, float(epsilon), pairs, margins, float(sigma))


def find_preserving_projection(ds: LabeledDataset, sigma: float, k: int, max_draws: int = 1000,
                               seed=0) -> ProjectionCertificate:
    """Draw Haar projections until one certifies at scale required_epsilon(N, d, k).

    When 2 sigma/delta exceeds that scale the search still runs but the
    result is flagged ``outside_guarantee``. Raises SearchFailure when all
    draws fail.
    """
    N, d = ds.n, ds.d
    if not (1 <= k <= d - 1):
        raise ValueError(f"need 1 <= k <= d - 1, got k={k}, d={d}")
    eps = required_epsilon(max(N, 2), d, k)
    delta = separation(ds, 2)
    if sigma >= delta / 2:
        raise InfeasibleRadiusError(f"sigma={sigma} >= delta/2={delta / 2}")
    outside = 2 * sigma / delta > eps
    rng = np.random.default_rng(seed)
    best = -math.inf
    for draw in range(1, max_draws + 1):
        P = sample_projection(d, k, rng)
        res = certify(P, ds, sigma, eps)
        if res.certified:
            return ProjectionCertificate(res.P, res.epsilon, res.pairs, res.margins, res.sigma,
                                         draws_used=draw, outside_guarantee=bool(outside))
        best = max(best, float(res.margins.min()))
    raise SearchFailure(f"no certified rank-{k} projection in {max_draws} draws "
                        f"(best margin {best:.3g})", draws=max_draws, best_margin=best)


def scale_to_preserving(cert: ProjectionCertificate) -> AffineLayer:
    """The map T = P/epsilon as an affine layer with zero bias."""
    P = np.asarray(cert.P)
    return AffineLayer(P / cert.epsilon, np.zeros(P.shape[0]))


def cap_min_bruteforce(P, v_hat, phi, n_samples=10_000, seed=0) -> float:
    """Smallest |P s| over random unit s within angle phi of v_hat.

    Half the samples sit on the cap boundary, where the minimum is attained
    for the linear map s -> P s restricted to a cap; v_hat itself is always
    included.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    v = np.asarray(v_hat, dtype=np.float64).ravel()
    v = v / np.linalg.norm(v)
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((n_samples, v.size))
    T -= np.outer(T @ v, v)
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    theta = rng.uniform(0.0, phi, size=n_samples)
    theta[: n_samples // 2] = phi
    S = np.cos(theta)[:, None] * v + np.sin(theta)[:, None] * T
    vals = np.linalg.norm(S @ P.T, axis=1)
    return float(min(vals.min(initial=math.inf), np.linalg.norm(P @ v)))
