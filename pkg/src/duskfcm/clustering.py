"""Fuzzy and crisp clustering of per-pixel feature rows.

All solvers share greedy k-means++ seeding from ``ClusterConfig.seed`` and
return a :class:`ClusterResult` whose memberships are stored cluster-major,
``(c, n)``. The kernel family settles its seeds with Lloyd iterations first.

The kernel family (KFCM, SKFCM, DuS-KFCM) runs on one engine:

* kernel distance ``D_ik = 1 - exp(-||x_k - v_i||^2 / sigma^2)``;
* SKFCM adds ``(alpha / N_R) * sum_{r in N_k} D_ir`` to every pixel's
  distance, ``N_R = window^2 - 1`` replicate-padded neighbours;
* DuS-KFCM additionally smooths the memberships after every update with
  ``u'_ik ∝ u_ik^p * h_ik^q`` where ``h_ik`` sums ``u_ir`` over ``N_k``.

Centroids are refreshed with a weighted Gaussian mean-shift step, which
never increases the kernel objective for fixed memberships.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import logsumexp

from .errors import BadConfig, EmptyClusters, NotAnImageGrid, TooFewPoints

DEGENERATE_TOL = 1e-9
GMM_VAR_FLOOR = 1e-6
SIGMA_SUBSAMPLE = 1000

METHODS = ("duskfcm", "skfcm", "kfcm", "fcm", "fkm", "gmm")


@dataclass(frozen=True)
class ClusterConfig:
    c: int = 2
    m: float = 2.0
    max_iter: int = 200
    epsilon: float = 1e-5
    alpha: float = 1.0
    p: float = 1.0
    q: float = 1.0
    window: int = 3
    sigma: Optional[float] = None  # None: median pairwise feature distance
    seed: int = 0

    def __post_init__(self):
        if self.c < 2:
            raise BadConfig(f"c must be >= 2, got {self.c}")
        if not self.m > 1:
            raise BadConfig(f"fuzzifier m must exceed 1, got {self.m}")
        if self.max_iter < 1:
            raise BadConfig("max_iter must be >= 1")
        if not self.epsilon > 0:
            raise BadConfig("epsilon must be > 0")
        if self.alpha < 0:
            raise BadConfig("alpha must be >= 0")
        if self.window < 3 or self.window % 2 == 0:
            raise BadConfig(f"window must be odd and >= 3, got {self.window}")
        if self.sigma is not None and not self.sigma > 0:
            raise BadConfig("sigma must be > 0")


@dataclass(frozen=True)
class ClusterResult:
    memberships: np.ndarray  # (c, n), columns sum to 1
    centroids: np.ndarray  # (c, d)
    objective: tuple  # per-iteration objective (log-likelihood for gmm)
    iterations: int
    converged: bool
    degenerate: bool
    method: str = ""
    trace_kind: str = "objective"
    sigma: Optional[float] = None

    @property
    def c(self):
        return self.memberships.shape[0]


@dataclass(frozen=True)
class LesionChoice:
    index: int
    scores: tuple  # mean redness per cluster
    ambiguous: bool


# ---------------------------------------------------------------- helpers

def _as_matrix(fm) -> np.ndarray:
    x = fm.values if hasattr(fm, "values") else fm
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def sq_distances(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape ``(c, n)``; never negative."""
    return np.stack([np.sum((x - vi) ** 2, axis=1) for vi in v])


def kmeanspp_indices(x: np.ndarray, c: int, rng: np.random.Generator,
                     n_trials: Optional[int] = None) -> list:
    """Greedy k-means++ seed rows.

    The first seed is drawn uniformly; every later one is the best of
    ``n_trials`` D^2-sampled rows (default ``2 + floor(ln c)``), judged by the
    resulting total squared distance to the nearest seed. When every remaining
    distance is zero the lowest unused row is taken.
    """
    n = x.shape[0]
    if n_trials is None:
        n_trials = 2 + int(np.log(c))
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, c):
        draws = rng.random(n_trials)
        if d2.sum() > 0:
            cdf = np.cumsum(d2)
            cands = np.minimum(np.searchsorted(cdf, draws * cdf[-1], side="right"), n - 1)
            best_idx, best_d2, best_pot = None, None, np.inf
            for idx in cands:
                idx = int(idx)
                while d2[idx] == 0:  # float edge case: landed on a zero-mass row
                    idx -= 1
                cand_d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
                pot = cand_d2.sum()
                if pot < best_pot:
                    best_idx, best_d2, best_pot = idx, cand_d2, pot
            chosen.append(best_idx)
            d2 = best_d2
        else:
            unused = np.setdiff1d(np.arange(n), chosen)
            chosen.append(int(unused[0]) if unused.size else chosen[-1])
    return chosen


def memberships_from_distances(dist: np.ndarray, m: float) -> np.ndarray:
    """FCM membership update ``u_ik = 1 / sum_j (D_ik / D_jk)^(1/(m-1))``.

    ``dist`` holds the (generalized) squared distances. Columns with exact
    zero distances share their membership equally among the zero entries.
    """
    expo = 1.0 / (m - 1.0)
    zero = dist <= 0.0
    has_zero = zero.any(axis=0)
    safe = np.where(zero, 1.0, dist)
    dmin = np.where(has_zero, 1.0, safe.min(axis=0))
    ratio = (dmin / safe) ** expo
    u = ratio / ratio.sum(axis=0)
    if has_zero.any():
        z = zero[:, has_zero].astype(float)
        u[:, has_zero] = z / z.sum(axis=0)
    return u


def _degenerate(v: np.ndarray) -> bool:
    if v.shape[0] < 2:
        return False
    return bool(np.min(pdist(v)) < DEGENERATE_TOL)


def _check_points(x, c):
    if x.shape[0] < c:
        raise TooFewPoints(f"{x.shape[0]} points cannot form {c} clusters")


def default_sigma(x: np.ndarray, seed: int) -> float:
    """Median pairwise distance of a seeded subsample of at most 1000 rows."""
    x = _as_matrix(x)
    rng = np.random.default_rng([seed, 7919])
    if x.shape[0] > SIGMA_SUBSAMPLE:
        rows = np.sort(rng.choice(x.shape[0], SIGMA_SUBSAMPLE, replace=False))
        x = x[rows]
    if x.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(x)))
    return med if med > 0 else 1.0


def data_diameter(x) -> float:
    x = _as_matrix(x)
    return float(np.max(pdist(x))) if x.shape[0] > 1 else 0.0


# ---------------------------------------------------------------- spatial sums

def _offsets(window):
    r = window // 2
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if (dy, dx) != (0, 0)]


def neighbor_sum(field: np.ndarray, dims, window: int) -> np.ndarray:
    """Sum of ``field`` over the ``window``-square neighbourhood minus the centre.

    ``field`` is ``(c, n)`` with ``n = H*W`` row-major; edges are replicated.
    Shifts are accumulated in a fixed order so results are reproducible.
    """
    h, w = dims
    r = window // 2
    grid = field.reshape(field.shape[0], h, w)
    padded = np.pad(grid, ((0, 0), (r, r), (r, r)), mode="edge")
    out = np.zeros_like(grid)
    for dy, dx in _offsets(window):
        out += padded[:, r + dy:r + dy + h, r + dx:r + dx + w]
    return out.reshape(field.shape)


def neighbor_sum_adjoint(field: np.ndarray, dims, window: int) -> np.ndarray:
    """Adjoint of :func:`neighbor_sum`: ``<a, NS(b)> == <NS^T(a), b>``."""
    h, w = dims
    r = window // 2
    grid = field.reshape(field.shape[0], h, w)
    acc = np.zeros((field.shape[0], h + 2 * r, w + 2 * r))
    for dy, dx in _offsets(window):
        acc[:, r + dy:r + dy + h, r + dx:r + dx + w] += grid
    # fold replicate padding back onto the border pixels
    acc[:, r, :] += acc[:, :r, :].sum(axis=1)
    acc[:, r + h - 1, :] += acc[:, r + h:, :].sum(axis=1)
    acc = acc[:, r:r + h, :]
    acc[:, :, r] += acc[:, :, :r].sum(axis=2)
    acc[:, :, r + w - 1] += acc[:, :, r + w:].sum(axis=2)
    acc = acc[:, :, r:r + w]
    return np.ascontiguousarray(acc).reshape(field.shape)


def _check_grid(x, dims):
    if dims is None:
        raise NotAnImageGrid("image dimensions are required for spatial clustering")
    h, w = dims
    if h * w != x.shape[0]:
        raise NotAnImageGrid(f"{x.shape[0]} rows do not tile a {h}x{w} image")


# ---------------------------------------------------------------- FCM

def fcm_objective(x, u, v, m) -> float:
    return float(np.sum(u**m * sq_distances(x, v)))


def fcm_centroids(x, u, m) -> np.ndarray:
    w = u**m
    return (w @ x) / w.sum(axis=1)[:, None]


def fcm_fit(fm, cfg: ClusterConfig) -> ClusterResult:
    """Standard fuzzy c-means by alternating membership/centroid updates."""
    x = _as_matrix(fm)
    _check_points(x, cfg.c)
    rng = np.random.default_rng(cfg.seed)
    v = x[kmeanspp_indices(x, cfg.c, rng)].copy()
    u = memberships_from_distances(sq_distances(x, v), cfg.m)
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        v = fcm_centroids(x, u, cfg.m)
        trace.append(fcm_objective(x, u, v, cfg.m))
        u_new = memberships_from_distances(sq_distances(x, v), cfg.m)
        delta = np.max(np.abs(u_new - u))
        u = u_new
        if delta < cfg.epsilon:
            converged = True
            break
    return ClusterResult(u, v, tuple(trace), it, converged, _degenerate(v), "fcm")


# ---------------------------------------------------------------- kernel family

def kernel_distance(x, v, sigma) -> np.ndarray:
    """``1 - K(x_k, v_i)`` for the Gaussian kernel ``exp(-||x-v||^2 / sigma^2)``."""
    return -np.expm1(-sq_distances(x, v) / sigma**2)


def _kernel_fit(x, cfg, dims, alpha, regularize, method) -> ClusterResult:
    _check_points(x, cfg.c)
    sigma = cfg.sigma if cfg.sigma is not None else default_sigma(x, cfg.seed)
    spatial = alpha > 0
    if spatial or regularize:
        _check_grid(x, dims)
    a = alpha / (cfg.window**2 - 1)
    m = cfg.m

    def effective(dk):
        return dk + a * neighbor_sum(dk, dims, cfg.window) if spatial else dk

    def update_u(v):
        u = memberships_from_distances(effective(kernel_distance(x, v, sigma)), m)
        if regularize:
            h = neighbor_sum(u, dims, cfg.window)
            num = u**cfg.p * h**cfg.q
            tot = num.sum(axis=0)
            # a column whose weights all vanish keeps its unsmoothed memberships
            bad = tot <= 0
            num[:, bad] = u[:, bad]
            tot[bad] = 1.0
            return u, num / tot
        return u, u

    def update_v(u, v):
        w = u**m
        if spatial:
            w = w + a * neighbor_sum_adjoint(w, dims, cfg.window)
        k = np.exp(-sq_distances(x, v) / sigma**2)
        wk = w * k
        den = wk.sum(axis=1)
        v_new = v.copy()
        ok = den > 0
        v_new[ok] = (wk[ok] @ x) / den[ok, None]
        return v_new

    def objective(u, v):
        return float(np.sum(u**m * effective(kernel_distance(x, v, sigma))))

    # A saturating kernel cannot pull a centroid across to a far cluster, so
    # the k-means++ seeds are first settled by Lloyd iterations.
    v = _lloyd(x, x[kmeanspp_indices(x, cfg.c, np.random.default_rng(cfg.seed))], cfg.max_iter)[0]
    u_raw, u = update_u(v)
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        v = update_v(u, v)
        trace.append(objective(u_raw, v))
        u_raw, u_new = update_u(v)
        delta = np.max(np.abs(u_new - u))
        u = u_new
        if delta < cfg.epsilon:
            converged = True
            break
    return ClusterResult(
        u, v, tuple(trace), it, converged, _degenerate(v), method, sigma=sigma
    )


def kfcm_fit(fm, cfg: ClusterConfig) -> ClusterResult:
    """Kernelized FCM with a Gaussian RBF kernel of bandwidth ``cfg.sigma``."""
    return _kernel_fit(_as_matrix(fm), cfg, None, 0.0, False, "kfcm")


def skfcm_fit(fm, cfg: ClusterConfig, dims) -> ClusterResult:
    """Kernel FCM with the neighbourhood penalty weighted by ``cfg.alpha``."""
    x = _as_matrix(fm)
    _check_grid(x, dims)
    return _kernel_fit(x, cfg, dims, cfg.alpha, False, "skfcm")


def duskfcm_fit(fm, cfg: ClusterConfig, dims) -> ClusterResult:
    """SKFCM plus per-iteration membership smoothing with exponents ``(p, q)``."""
    x = _as_matrix(fm)
    _check_grid(x, dims)
    return _kernel_fit(x, cfg, dims, cfg.alpha, True, "duskfcm")


# ---------------------------------------------------------------- baselines

def _lloyd(x, v, max_iter):
    """Lloyd iterations from centroids ``v``; returns (v, labels, trace, iterations, converged)."""
    v = v.copy()
    c = v.shape[0]
    labels = np.argmin(sq_distances(x, v), axis=0)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(c):
            members = labels == i
            if members.any():
                v[i] = x[members].mean(axis=0)
        d2 = sq_distances(x, v)
        trace.append(float(np.sum(d2[labels, np.arange(x.shape[0])])))
        new_labels = np.argmin(d2, axis=0)
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    return v, labels, trace, it, converged


def kmeans_fit(fm, cfg: ClusterConfig) -> ClusterResult:
    """Lloyd iterations from k-means++ seeds; memberships are one-hot."""
    x = _as_matrix(fm)
    _check_points(x, cfg.c)
    rng = np.random.default_rng(cfg.seed)
    v, labels, trace, it, converged = _lloyd(x, x[kmeanspp_indices(x, cfg.c, rng)], cfg.max_iter)
    u = np.zeros((cfg.c, x.shape[0]))
    u[labels, np.arange(x.shape[0])] = 1.0
    return ClusterResult(u, v, tuple(trace), it, converged, _degenerate(v), "fkm")


def _gmm_log_prob(x, means, var, weights):
    log_det = np.sum(np.log(2 * np.pi * var), axis=1)
    maha = np.stack([np.sum((x - means[i]) ** 2 / var[i], axis=1) for i in range(len(means))])
    return np.log(weights)[:, None] - 0.5 * (log_det[:, None] + maha)


def gmm_fit(fm, cfg: ClusterConfig) -> ClusterResult:
    """Diagonal-covariance Gaussian mixture by EM; memberships are responsibilities.

    ``objective`` holds the log-likelihood, which EM never decreases.
    """
    x = _as_matrix(fm)
    n, d = x.shape
    if n < cfg.c * (d + 1):
        raise TooFewPoints(f"{n} points are too few for a {cfg.c}-component GMM in {d} dims")
    rng = np.random.default_rng(cfg.seed)
    means = x[kmeanspp_indices(x, cfg.c, rng)].copy()
    var = np.tile(np.maximum(x.var(axis=0), GMM_VAR_FLOOR), (cfg.c, 1))
    weights = np.full(cfg.c, 1.0 / cfg.c)
    trace = []
    resp_prev = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        log_p = _gmm_log_prob(x, means, var, weights)
        lse = logsumexp(log_p, axis=0)
        resp = np.exp(log_p - lse)
        resp /= resp.sum(axis=0)
        trace.append(float(lse.sum()))
        if resp_prev is not None and np.max(np.abs(resp - resp_prev)) < cfg.epsilon:
            converged = True
            break
        resp_prev = resp
        nk = resp.sum(axis=1)
        ok = nk > 1e-12
        weights = np.where(ok, nk / n, weights)
        weights = weights / weights.sum()
        new_means = (resp @ x) / np.where(ok, nk, 1.0)[:, None]
        means = np.where(ok[:, None], new_means, means)
        new_var = np.stack(
            [resp[i] @ (x - means[i]) ** 2 for i in range(cfg.c)]
        ) / np.where(ok, nk, 1.0)[:, None]
        var = np.where(ok[:, None], np.maximum(new_var, GMM_VAR_FLOOR), var)
    return ClusterResult(
        resp, means, tuple(trace), it, converged, _degenerate(means), "gmm",
        trace_kind="log_likelihood",
    )


def fit(method: str, fm, cfg: ClusterConfig, dims=None) -> ClusterResult:
    """Dispatch by method name."""
    if method == "duskfcm":
        return duskfcm_fit(fm, cfg, dims)
    if method == "skfcm":
        return skfcm_fit(fm, cfg, dims)
    if method == "kfcm":
        return kfcm_fit(fm, cfg)
    if method == "fcm":
        return fcm_fit(fm, cfg)
    if method == "fkm":
        return kmeans_fit(fm, cfg)
    if method == "gmm":
        return gmm_fit(fm, cfg)
    raise BadConfig(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------- post-processing

def defuzzify(result: ClusterResult, dims) -> np.ndarray:
    """Per-pixel argmax label image; ties go to the lowest cluster index."""
    h, w = dims
    return np.argmax(result.memberships, axis=0).reshape(h, w)


def redness(img: np.ndarray) -> np.ndarray:
    rgb = np.asarray(img, dtype=float)
    return rgb[..., 0] - 0.5 * (rgb[..., 1] + rgb[..., 2])


def select_lesion_cluster(result: ClusterResult, img: np.ndarray, labels: np.ndarray) -> LesionChoice:
    """Pick the cluster with the highest mean redness ``R - (G+B)/2``."""
    score_map = redness(img)
    labels = np.asarray(labels)
    if score_map.shape != labels.shape:
        raise NotAnImageGrid(f"image {score_map.shape} vs labels {labels.shape}")
    scores = []
    for i in range(result.c):
        members = labels == i
        if not members.any():
            raise EmptyClusters(f"cluster {i} has no pixels")
        scores.append(float(score_map[members].mean()))
    best = int(np.argmax(scores))
    ambiguous = sum(s == scores[best] for s in scores) > 1
    return LesionChoice(best, tuple(scores), bool(ambiguous))


def with_seed(cfg: ClusterConfig, seed: int) -> ClusterConfig:
    return replace(cfg, seed=seed)


def write_objective_csv(result: ClusterResult, path) -> None:
    """Objective (or log-likelihood) trace as ``iteration, <trace_kind>`` rows."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", result.trace_kind])
        for i, value in enumerate(result.objective, start=1):
            writer.writerow([i, repr(value)])
