"""Particle clouds and the metrology used on them.

Clouds are equal-weight by construction: every integral against a cloud is a
plain average over its points.  The exact L2 transport distance is computed by
solving the assignment problem on the squared-cost matrix; Gaussian laws serve
as analytic oracles for distances, relative entropy, and moment flows in the
linear models where laws stay Gaussian.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .streams import Stream, substream

EXACT_CAP = 512


class SizeMismatchError(ValueError):
    pass


class CloudTooLargeError(ValueError):
    pass


class EmpiricalMeasure:
    """Equal-weight particle cloud; ``points`` has shape (N, d) and is read-only.

    A 1-D array of length N is interpreted as N points on the line.
    """

    __slots__ = ("points",)

    def __init__(self, points, copy: bool = True):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"cloud must be (N, d) with N >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cloud contains non-finite entries")
        if copy:
            arr = arr.copy()
        arr.flags.writeable = False
        self.points = arr

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def second_moment(self) -> float:
        """Cloud average of |x|^2."""
        return float(np.mean(np.sum(self.points**2, axis=1)))

    def __repr__(self) -> str:  # pragma: no cover
        return f"EmpiricalMeasure(size={self.size}, dim={self.dim})"


def _as_snapshot(arr: np.ndarray) -> EmpiricalMeasure:
    """Wrap a live array as a read-only cloud without copying.

    The view is only valid while the caller does not mutate ``arr``; the
    simulators use this for the per-step measure argument.
    """
    view = arr[:]
    return EmpiricalMeasure(view, copy=False)


def standard_normal_cloud(n: int, dim: int, seed: int) -> EmpiricalMeasure:
    pts = substream(seed, Stream.INIT, 0).standard_normal((n, dim))
    return EmpiricalMeasure(pts, copy=False)


def point_cloud(x, n: int) -> EmpiricalMeasure:
    """Dirac-at-x cloud of n identical particles."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return EmpiricalMeasure(np.tile(x, (n, 1)))


def subsample(mu: EmpiricalMeasure, cap: int, seed: int) -> EmpiricalMeasure:
    """Seeded subsample without replacement down to ``cap`` points."""
    if mu.size <= cap:
        return mu
    idx = substream(seed, Stream.SUBSAMPLE, 0).choice(mu.size, size=cap, replace=False)
    return EmpiricalMeasure(mu.points[idx])


@dataclass(frozen=True)
class GaussianLaw:
    """Mean/covariance pair; the analytic carrier for linear-model laws."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=np.float64)).copy()
        c = np.atleast_2d(np.asarray(self.cov, dtype=np.float64)).copy()
        if m.ndim != 1 or c.shape != (m.shape[0], m.shape[0]):
            raise ValueError(f"incompatible shapes mean {m.shape}, cov {c.shape}")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(c))):
            raise ValueError("non-finite Gaussian parameters")
        if np.max(np.abs(c - c.T)) > 1e-12:
            raise ValueError("covariance not symmetric to 1e-12")
        if np.linalg.eigvalsh(c).min() < -1e-10:
            raise ValueError("covariance not positive semidefinite")
        m.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, n: int, seed: int) -> EmpiricalMeasure:
        w, v = np.linalg.eigh(self.cov)
        factor = v * np.sqrt(np.clip(w, 0.0, None))
        z = substream(seed, Stream.GAUSS_SAMPLE, 0).standard_normal((n, self.dim))
        return EmpiricalMeasure(z @ factor.T + self.mean, copy=False)


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(c)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def w2_exact(mu: EmpiricalMeasure, nu: EmpiricalMeasure, exact_cap: int = EXACT_CAP) -> float:
    """Exact L2-Wasserstein distance between two equal-size clouds.

    Solves the assignment problem on the squared Euclidean cost matrix
    (shortest augmenting path, O(N^3) worst case), so sizes are capped;
    subsample or use w2_sliced for larger clouds.
    """
    if mu.dim != nu.dim:
        raise SizeMismatchError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.size != nu.size:
        raise SizeMismatchError(f"size mismatch: {mu.size} vs {nu.size}")
    if mu.size > exact_cap:
        raise CloudTooLargeError(
            f"cloud size {mu.size} over exact cap {exact_cap}; "
            "subsample() the clouds or use w2_sliced()"
        )
    cost = cdist(mu.points, nu.points, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    mean_cost = math.fsum(cost[rows, cols].tolist()) / mu.size
    if mean_cost < 0.0:  # clamp assignment round-off
        mean_cost = 0.0
    return math.sqrt(mean_cost)


def w2_sliced(mu: EmpiricalMeasure, nu: EmpiricalMeasure, n_dirs: int, seed: int) -> float:
    """RMS over random unit directions of the 1-D transport distance of the
    projected clouds.  A lower-bound-flavored proxy for w2_exact, not the
    distance itself (each projection contracts costs)."""
    if n_dirs < 1:
        raise ValueError("n_dirs must be >= 1")
    if mu.dim != nu.dim:
        raise SizeMismatchError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.size != nu.size:
        raise SizeMismatchError(f"size mismatch: {mu.size} vs {nu.size}")
    rng = substream(seed, Stream.DIRECTIONS, 0)
    dirs = rng.standard_normal((n_dirs, mu.dim))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    dirs /= norms
    pm = np.sort(mu.points @ dirs.T, axis=0)
    pn = np.sort(nu.points @ dirs.T, axis=0)
    per_dir_sq = np.mean((pm - pn) ** 2, axis=0)
    return float(np.sqrt(np.mean(per_dir_sq)))


def gaussian_w2(a: GaussianLaw, b: GaussianLaw) -> float:
    """Closed-form L2 transport distance between Gaussian laws (Bures metric)."""
    if a.dim != b.dim:
        raise SizeMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    rb = _psd_sqrt(b.cov)
    cross = _psd_sqrt(rb @ a.cov @ rb)
    trace_term = float(np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    total = float(np.sum((a.mean - b.mean) ** 2)) + max(trace_term, 0.0)
    return math.sqrt(max(total, 0.0))


def gaussian_kl(a: GaussianLaw, b: GaussianLaw) -> float:
    """Relative entropy Ent(a|b) of Gaussian laws in closed form.

    Returns +inf when either covariance is singular (the laws are then not
    mutually absolutely continuous in the relevant direction).
    """
    if a.dim != b.dim:
        raise SizeMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if np.linalg.eigvalsh(b.cov).min() <= 0.0 or np.linalg.eigvalsh(a.cov).min() <= 0.0:
        return math.inf
    d = a.dim
    sb_inv_sa = np.linalg.solve(b.cov, a.cov)
    delta = b.mean - a.mean
    quad = float(delta @ np.linalg.solve(b.cov, delta))
    _, logdet_a = np.linalg.slogdet(a.cov)
    _, logdet_b = np.linalg.slogdet(b.cov)
    val = 0.5 * (float(np.trace(sb_inv_sa)) - d + quad + logdet_b - logdet_a)
    return max(val, 0.0) if val > -1e-12 else val


def moment_match(mu: EmpiricalMeasure) -> GaussianLaw:
    """Gaussian law with the cloud's sample mean and covariance (denominator N)."""
    if mu.size < 2:
        raise ValueError("moment_match needs at least 2 points")
    mean = mu.mean()
    cov = np.atleast_2d(np.cov(mu.points.T, bias=True))
    cov = 0.5 * (cov + cov.T)
    return GaussianLaw(mean, cov)


@dataclass(frozen=True)
class ExpMomentReport:
    """Cloud average of exp(eps |x|^2) with a running-average trace."""

    epsilon: float
    estimate: float
    trace: np.ndarray
    n_overflow: int

    @property
    def overflowed(self) -> bool:
        return self.n_overflow > 0


def exp_quadratic_moment(mu: EmpiricalMeasure, epsilon: float) -> ExpMomentReport:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    sq = np.sum(mu.points**2, axis=1)
    with np.errstate(over="ignore"):
        vals = np.exp(epsilon * sq)
    n_overflow = int(np.sum(np.isinf(vals)))
    trace = np.cumsum(vals) / np.arange(1, mu.size + 1)
    estimate = float(trace[-1])
    return ExpMomentReport(float(epsilon), estimate, trace, n_overflow)


def fmt17(x: float) -> str:
    """17-significant-digit decimal formatting; round-trips float64 exactly."""
    return format(float(x), ".17g")


def save_cloud(mu: EmpiricalMeasure, path) -> None:
    """Write one row per particle with header x1..xd (RFC-4180, decimal17)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(mu.dim)])
        for row in mu.points:
            writer.writerow([fmt17(v) for v in row])


def load_cloud(path) -> EmpiricalMeasure:
    path = Path(path)
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not all(re.fullmatch(r"x\d+", h) for h in header):
            raise ValueError(f"{path}: missing or malformed cloud header")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty cloud")
    return EmpiricalMeasure(np.array(rows))
