"""Pareto dominance utilities and front-quality indicators.

All functions use the maximization convention: a point dominates another if it
is no worse in every objective and strictly better in at least one. Quality
indicators (hypervolume, IGD, IGD+, fill distance) are pure functions of their
array arguments and are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class ParetoArchive:
    """Observed objective vectors plus per-point feasibility.

    Args:
        points (2D-array, shape=(n, m)): Observed objective values.
        feasible_mask (1D bool array or None): Feasibility of each point.
            None means every point is feasible (unconstrained problem).
    """

    points: np.ndarray
    feasible_mask: Optional[np.ndarray] = None

    def feasible_points(self) -> np.ndarray:
        if self.feasible_mask is None:
            return self.points
        return self.points[np.asarray(self.feasible_mask, dtype=bool)]


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """True if `a` strictly dominates `b` (maximization)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a >= b) and np.any(a > b))


def non_dominated_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of points not strictly dominated by any other point.

    Duplicate rows are all marked non-dominated here; deduplication is the
    caller's concern (see :func:`pareto_filter`).

    Args:
        points (2D-array, shape=(n, m)): Objective vectors.

    Returns:
        1D bool array of length n.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    ge = np.all(pts[:, None, :] >= pts[None, :, :], axis=2)
    gt = np.any(pts[:, None, :] > pts[None, :, :], axis=2)
    dominated = np.any(ge & gt, axis=0)
    return ~dominated


def pareto_filter(points: np.ndarray) -> np.ndarray:
    """Non-dominated subset of a point set, duplicates kept once.

    Args:
        points (2D-array, shape=(n, m)): Objective vectors.

    Returns:
        2D-array with the mutually non-dominated points, in first-occurrence
        order of the input.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return pts
    _, first = np.unique(pts, axis=0, return_index=True)
    pts = pts[np.sort(first)]
    return pts[non_dominated_mask(pts)]


def hypervolume(front: np.ndarray, ref: np.ndarray) -> float:
    """Exact hypervolume dominated by `front` above the reference point.

    Computed by the recursive dimension-sweep (WFG-style exclusive
    contributions with limit sets). Points that do not strictly exceed the
    reference point in every coordinate contribute nothing and are dropped.

    Args:
        front (2D-array, shape=(n, m)): Objective vectors (maximization).
        ref (1D-array, shape=(m,)): Reference point.

    Returns:
        float: Lebesgue measure of the union of boxes [ref, y].
    """
    pts = np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(ref, dtype=float).ravel()
    if pts.shape[0] == 0:
        return 0.0
    if pts.shape[1] != ref.shape[0]:
        raise ValueError("front and ref dimensions differ")
    pts = pts[np.all(pts > ref, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    pts = pareto_filter(pts)
    # Sorting by a coordinate keeps limit sets small in the recursion.
    pts = pts[np.argsort(-pts[:, -1], kind="stable")]
    return float(_wfg(pts, ref))


def _wfg(pts: np.ndarray, ref: np.ndarray) -> float:
    n, m = pts.shape
    if n == 0:
        return 0.0
    if m == 1:
        return float(np.max(pts[:, 0]) - ref[0])
    if m == 2:
        return _hv2d(pts, ref)
    total = 0.0
    for i in range(n):
        p = pts[i]
        vol = float(np.prod(p - ref))
        if i + 1 < n:
            limited = np.minimum(pts[i + 1 :], p)
            limited = limited[np.all(limited > ref, axis=1)]
            if limited.shape[0]:
                limited = limited[non_dominated_mask(limited)]
                vol -= _wfg(limited, ref)
        total += vol
    return total


def _hv2d(pts: np.ndarray, ref: np.ndarray) -> float:
    order = np.argsort(-pts[:, 0], kind="stable")
    hv = 0.0
    best_f2 = ref[1]
    for a, b in pts[order]:
        if b > best_f2:
            hv += (a - ref[0]) * (b - best_f2)
            best_f2 = b
    return hv


def igd(observations: np.ndarray, ref_front: np.ndarray) -> float:
    """Inverted generational distance.

    Mean over the reference front of the Euclidean distance to the nearest
    observation. Lower is better; zero when every reference point is matched.

    Args:
        observations (2D-array, shape=(n, m)): Observed objective vectors.
        ref_front (2D-array, shape=(k, m)): Reference front.

    Returns:
        float: Average nearest-observation distance.
    """
    obs, ref = _check_two_sets(observations, ref_front)
    d = cdist(ref, obs)
    return float(np.mean(np.min(d, axis=1)))


def igd_plus(observations: np.ndarray, ref_front: np.ndarray) -> float:
    """Dominance-aware (one-sided) variant of IGD, weakly Pareto-compliant.

    For a reference point z and observation y the distance counts only the
    shortfall of y below z: d+(z, y) = sqrt(sum_i max(z_i - y_i, 0)^2) under
    the maximization convention.

    Args:
        observations (2D-array, shape=(n, m)): Observed objective vectors.
        ref_front (2D-array, shape=(k, m)): Reference front.

    Returns:
        float: Average nearest one-sided distance.
    """
    obs, ref = _check_two_sets(observations, ref_front)
    shortfall = np.clip(ref[:, None, :] - obs[None, :, :], 0.0, None)
    d = np.sqrt(np.sum(shortfall**2, axis=2))
    return float(np.mean(np.min(d, axis=1)))


def fill_distance(observations: np.ndarray, ref_front: np.ndarray) -> float:
    """Max over the reference front of the distance to the nearest observation.

    The maxmin counterpart of IGD: it measures the radius of the largest gap
    left uncovered by the observations, so fill_distance >= igd on identical
    inputs.

    Args:
        observations (2D-array, shape=(n, m)): Observed objective vectors.
        ref_front (2D-array, shape=(k, m)): Reference front.

    Returns:
        float: Worst-case nearest-observation distance.
    """
    obs, ref = _check_two_sets(observations, ref_front)
    d = cdist(ref, obs)
    return float(np.max(np.min(d, axis=1)))


def feasible_ratio(archive: ParetoArchive) -> float:
    """Fraction of archive points satisfying all external constraints."""
    pts = np.atleast_2d(np.asarray(archive.points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("archive is empty")
    if archive.feasible_mask is None:
        return 1.0
    mask = np.asarray(archive.feasible_mask, dtype=bool)
    return float(np.count_nonzero(mask)) / float(pts.shape[0])


def _check_two_sets(observations, ref_front):
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    ref = np.atleast_2d(np.asarray(ref_front, dtype=float))
    if obs.shape[0] == 0 or ref.shape[0] == 0:
        raise ValueError("both point sets must be non-empty")
    if obs.shape[1] != ref.shape[1]:
        raise ValueError("point sets have different dimensions")
    return obs, ref
