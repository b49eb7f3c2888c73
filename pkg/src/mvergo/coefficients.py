"""Drift/diffusion models with measure dependence, plus sampling-based
checkers for the structural conditions the theory needs.

The checkers are falsifiers, not verifiers: "satisfied" means no violation
was found among the sampled tuples.  Measure arguments are always finite
equal-weight clouds and integrals against them are cloud averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .measures import EmpiricalMeasure, w2_exact
from .streams import Stream, substream


class EvaluationError(RuntimeError):
    """A coefficient returned a non-finite value on a sampled input."""


@dataclass(frozen=True)
class CoefficientModel:
    """State equation coefficients.

    drift(t, x, mu) accepts x of shape (d,) or (B, d) and returns the same
    shape; diffusion(t, mu) returns the (d, n) noise matrix (no spatial
    dependence).  For kind="kinetic" the state is (position, velocity) on
    R^{2m} and the first half of the drift equals the velocity block exactly.
    """

    dim: int
    noise_dim: int
    drift: Callable
    diffusion: Callable
    kind: str = "generic"
    name: str = ""
    superlinear: bool = False

    def __post_init__(self):
        if self.dim < 1 or self.noise_dim < 1:
            raise ValueError("dim and noise_dim must be positive")
        if self.kind not in ("generic", "kinetic"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "kinetic" and self.dim % 2 != 0:
            raise ValueError("kinetic models need even state dimension")


@dataclass(frozen=True)
class DissipativityConstants:
    """Constants (K1, K2, K_I, r0, delta1, delta2) of the drift/noise bounds."""

    k1: float
    k2: float
    ki: float = 0.0
    r0: float = 0.0
    delta1: float = 1.0
    delta2: float = 1.0

    def __post_init__(self):
        vals = (self.k1, self.k2, self.ki, self.r0, self.delta1, self.delta2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("constants must be finite")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be > 0")
        if self.ki < 0 or self.r0 < 0:
            raise ValueError("ki and r0 must be >= 0")
        if not (self.delta1 >= self.delta2 > 0):
            raise ValueError("need delta1 >= delta2 > 0")


@dataclass(frozen=True)
class KineticConstants:
    """Constants (r, r0, theta, R, K_M) of the kinetic drift conditions.

    ``radius`` is the separation below which no dissipativity is enforced.
    """

    r: float
    r0: float
    theta: float
    radius: float
    km: float

    def __post_init__(self):
        vals = (self.r, self.r0, self.theta, self.radius, self.km)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("constants must be finite")
        if abs(self.r0) >= 1:
            raise ValueError("need |r0| < 1")
        if self.r < 0 or self.theta < 0 or self.radius < 0 or self.km < 0:
            raise ValueError("r, theta, radius, km must be >= 0")


@dataclass(frozen=True)
class ConditionReport:
    satisfied: bool
    worst_violation: float
    n_samples: int
    tolerance: float
    witness: Optional[tuple] = None

    def as_dict(self) -> dict:
        wit = None
        if self.witness is not None:
            wit = [np.asarray(w).tolist() for w in self.witness]
        return {
            "satisfied": self.satisfied,
            "worst_violation": self.worst_violation,
            "n_samples": self.n_samples,
            "tolerance": self.tolerance,
            "witness": wit,
        }


def _drift_at(model: CoefficientModel, t: float, x: np.ndarray, mu: EmpiricalMeasure,
              context: str) -> np.ndarray:
    val = np.asarray(model.drift(t, x, mu), dtype=np.float64)
    if val.shape != x.shape:
        raise EvaluationError(f"{context}: drift shape {val.shape} != state shape {x.shape}")
    if not np.all(np.isfinite(val)):
        raise EvaluationError(f"{context}: non-finite drift at x={np.asarray(x).tolist()}")
    return val


def _diffusion_at(model: CoefficientModel, t: float, mu: EmpiricalMeasure,
                  context: str) -> np.ndarray:
    val = np.asarray(model.diffusion(t, mu), dtype=np.float64)
    if val.shape != (model.dim, model.noise_dim):
        raise EvaluationError(
            f"{context}: diffusion shape {val.shape} != ({model.dim}, {model.noise_dim})"
        )
    if not np.all(np.isfinite(val)):
        raise EvaluationError(f"{context}: non-finite diffusion")
    return val


def monotonicity_defect(model, c: DissipativityConstants, x, y,
                        gamma: EmpiricalMeasure, gamma_tilde: EmpiricalMeasure,
                        t: float = 0.0) -> float:
    """LHS - RHS of the one-sided monotonicity bound at a single tuple:
    2<b(x,g) - b(y,g'), x-y> + |s(g) - s(g')|_HS^2 - k1|x-y|^2 - ki W2(g,g')^2.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    bx = _drift_at(model, t, x, gamma, "monotonicity check")
    by = _drift_at(model, t, y, gamma_tilde, "monotonicity check")
    sx = _diffusion_at(model, t, gamma, "monotonicity check")
    sy = _diffusion_at(model, t, gamma_tilde, "monotonicity check")
    diff = x - y
    lhs = 2.0 * float(np.dot(bx - by, diff)) + float(np.sum((sx - sy) ** 2))
    w2sq = 0.0 if c.ki == 0.0 else w2_exact(gamma, gamma_tilde) ** 2
    return lhs - c.k1 * float(np.dot(diff, diff)) - c.ki * w2sq


def partial_dissipativity_defect(model, c: DissipativityConstants, x, y,
                                 gamma: EmpiricalMeasure, gamma_tilde: EmpiricalMeasure,
                                 t: float = 0.0) -> float:
    """LHS - RHS of the split bound: contraction -k2 beyond separation r0,
    expansion at most k1 inside."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    bx = _drift_at(model, t, x, gamma, "dissipativity check")
    by = _drift_at(model, t, y, gamma_tilde, "dissipativity check")
    sx = _diffusion_at(model, t, gamma, "dissipativity check")
    sy = _diffusion_at(model, t, gamma_tilde, "dissipativity check")
    diff = x - y
    gap_sq = float(np.dot(diff, diff))
    lhs = 2.0 * float(np.dot(bx - by, diff)) + float(np.sum((sx - sy) ** 2))
    rhs = c.k1 * gap_sq if math.sqrt(gap_sq) <= c.r0 else -c.k2 * gap_sq
    w2sq = 0.0 if c.ki == 0.0 else w2_exact(gamma, gamma_tilde) ** 2
    return lhs - rhs - c.ki * w2sq


def diffusion_bounds_defect(model, c: DissipativityConstants,
                            gamma: EmpiricalMeasure, t: float = 0.0) -> float:
    """Worst eigenvalue excursion of s s* outside [delta2 I, delta1 I]."""
    s = _diffusion_at(model, t, gamma, "diffusion bounds check")
    eigs = np.linalg.eigvalsh(s @ s.T)
    return max(c.delta2 - float(eigs.min()), float(eigs.max()) - c.delta1)


def kinetic_lipschitz_defect(model, kc: KineticConstants, ki: float, z, zbar,
                             gamma: EmpiricalMeasure, gamma_tilde: EmpiricalMeasure,
                             t: float = 0.0) -> float:
    """LHS - RHS of |b(z,g)-b(zb,g')| + |s(g)-s(g')|_HS <= km|z-zb| + ki W2."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    zbar = np.atleast_1d(np.asarray(zbar, dtype=np.float64))
    half = model.dim // 2
    bz = _drift_at(model, t, z, gamma, "kinetic Lipschitz check")[half:]
    bzb = _drift_at(model, t, zbar, gamma_tilde, "kinetic Lipschitz check")[half:]
    sz = _diffusion_at(model, t, gamma, "kinetic Lipschitz check")
    szb = _diffusion_at(model, t, gamma_tilde, "kinetic Lipschitz check")
    lhs = float(np.linalg.norm(bz - bzb)) + float(np.sqrt(np.sum((sz - szb) ** 2)))
    w2v = 0.0 if ki == 0.0 else w2_exact(gamma, gamma_tilde)
    return lhs - kc.km * float(np.linalg.norm(z - zbar)) - ki * w2v


def kinetic_dissipativity_defect(model, kc: KineticConstants, z, zbar,
                                 mu: EmpiricalMeasure, t: float = 0.0) -> Optional[float]:
    """LHS + theta*q of the weighted drift-dissipativity bound, or None when
    the pair is inside the exempt ball q < radius^2."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    zbar = np.atleast_1d(np.asarray(zbar, dtype=np.float64))
    half = model.dim // 2
    dx = z[:half] - zbar[:half]
    dy = z[half:] - zbar[half:]
    q = float(np.dot(dx, dx) + np.dot(dy, dy))
    if q < kc.radius**2:
        return None
    bz = _drift_at(model, t, z, mu, "kinetic dissipativity check")[half:]
    bzb = _drift_at(model, t, zbar, mu, "kinetic dissipativity check")[half:]
    lhs = float(np.dot(kc.r**2 * dx + kc.r * kc.r0 * dy, dy))
    lhs += float(np.dot(dy + kc.r * kc.r0 * dx, bz - bzb))
    return lhs + kc.theta * q


def _sample_ball(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    """Uniform points in the ball of the given radius."""
    z = rng.standard_normal((n, dim))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random((n, 1)) ** (1.0 / dim)
    return z / norms * radii


def _sample_cloud(rng: np.random.Generator, size: int, dim: int, radius: float) -> EmpiricalMeasure:
    return EmpiricalMeasure(_sample_ball(rng, size, dim, radius), copy=False)


def _report(worst: float, witness, n_samples: int, tol: float) -> ConditionReport:
    return ConditionReport(
        satisfied=bool(worst <= tol),
        worst_violation=float(worst),
        n_samples=n_samples,
        tolerance=float(tol),
        witness=witness,
    )


def check_monotonicity(model: CoefficientModel, c: DissipativityConstants,
                       n_pairs: int, radius: float, seed: int,
                       tol: float = 1e-9, cloud_size: int = 8) -> ConditionReport:
    """Sample tuples (x, y, gamma, gamma') with |x|,|y| <= radius and report
    the worst defect of the one-sided monotonicity bound."""
    if n_pairs < 1 or radius <= 0:
        raise ValueError("need n_pairs >= 1 and radius > 0")
    rng = substream(seed, Stream.PAIRS, 0)
    xs = _sample_ball(rng, n_pairs, model.dim, radius)
    ys = _sample_ball(rng, n_pairs, model.dim, radius)
    worst = -math.inf
    witness = None
    for i in range(n_pairs):
        ga = _sample_cloud(rng, cloud_size, model.dim, radius)
        gb = _sample_cloud(rng, cloud_size, model.dim, radius)
        defect = monotonicity_defect(model, c, xs[i], ys[i], ga, gb)
        if defect > worst:
            worst, witness = defect, (xs[i].copy(), ys[i].copy())
    return _report(worst, witness, n_pairs, tol)


def check_partial_dissipativity(model: CoefficientModel, c: DissipativityConstants,
                                n_pairs: int, radius: float, seed: int,
                                tol: float = 1e-9, cloud_size: int = 8) -> ConditionReport:
    """Sampled test of the split drift bound plus the two-sided eigenvalue
    envelope delta2 I <= s s* <= delta1 I."""
    if n_pairs < 1 or radius <= 0:
        raise ValueError("need n_pairs >= 1 and radius > 0")
    rng = substream(seed, Stream.PAIRS, 0)
    xs = _sample_ball(rng, n_pairs, model.dim, radius)
    ys = _sample_ball(rng, n_pairs, model.dim, radius)
    worst = -math.inf
    witness = None
    for i in range(n_pairs):
        ga = _sample_cloud(rng, cloud_size, model.dim, radius)
        gb = _sample_cloud(rng, cloud_size, model.dim, radius)
        defect = partial_dissipativity_defect(model, c, xs[i], ys[i], ga, gb)
        defect = max(defect, diffusion_bounds_defect(model, c, ga))
        if defect > worst:
            worst, witness = defect, (xs[i].copy(), ys[i].copy())
    return _report(worst, witness, n_pairs, tol)


def check_kinetic(model: CoefficientModel, kc: KineticConstants, ki: float,
                  n_pairs: int, radius: float, seed: int,
                  tol: float = 1e-9, cloud_size: int = 8) -> ConditionReport:
    """Sampled test of the kinetic Lipschitz bound and the weighted drift
    dissipativity outside the exempt ball."""
    if model.kind != "kinetic":
        raise ValueError("check_kinetic requires a kinetic model")
    if n_pairs < 1 or radius <= 0:
        raise ValueError("need n_pairs >= 1 and radius > 0")
    rng = substream(seed, Stream.PAIRS, 0)
    zs = _sample_ball(rng, n_pairs, model.dim, radius)
    zbs = _sample_ball(rng, n_pairs, model.dim, radius)
    worst = -math.inf
    witness = None
    n_diss = 0
    for i in range(n_pairs):
        ga = _sample_cloud(rng, cloud_size, model.dim, radius)
        gb = _sample_cloud(rng, cloud_size, model.dim, radius)
        defect = kinetic_lipschitz_defect(model, kc, ki, zs[i], zbs[i], ga, gb)
        diss = kinetic_dissipativity_defect(model, kc, zs[i], zbs[i], ga)
        if diss is not None:
            n_diss += 1
            defect = max(defect, diss)
        if defect > worst:
            worst, witness = defect, (zs[i].copy(), zbs[i].copy())
    return _report(worst, witness, n_pairs, tol)


# ---------------------------------------------------------------------------
# builtin models


def _batched(fn):
    """Lift a (B, d) -> (B, d) drift to also accept single (d,) states."""

    def wrapped(t, x, mu):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return fn(t, x[None, :], mu)[0]
        return fn(t, x, mu)

    return wrapped


def _identity_diffusion(dim: int, scale: float):
    mat = scale * np.eye(dim)
    mat.flags.writeable = False
    return lambda t, mu: mat


def make_ou(theta: float = 1.0, sigma0: float = math.sqrt(2.0), dim: int = 1) -> CoefficientModel:
    """Linear mean-reverting model: b = -theta x, constant diffusion."""

    @_batched
    def drift(t, x, mu):
        return -theta * x

    return CoefficientModel(dim, dim, drift, _identity_diffusion(dim, sigma0), name="ou")


def make_mean_field_linear(a: float = 1.0, kappa: float = 0.2, sigma0: float = 1.0,
                           dim: int = 1) -> CoefficientModel:
    """Linear drift with attraction toward the cloud mean:
    b = -a x - kappa (x - mean(mu))."""

    @_batched
    def drift(t, x, mu):
        return -a * x - kappa * (x - mu.mean())

    return CoefficientModel(dim, dim, drift, _identity_diffusion(dim, sigma0),
                            name="mean_field_linear")


def pairwise_force(grad: Callable, chunk: int = 512) -> Callable:
    """Averaged convolution force from a pointwise gradient:
    (x, cloud_points) -> mean over z of grad(x - z), evaluated in chunks to
    bound the O(B*M) pairwise memory."""

    def force(x, cloud_points):
        total = np.zeros_like(x)
        m = cloud_points.shape[0]
        for lo in range(0, m, chunk):
            block = cloud_points[lo : lo + chunk]
            total += np.sum(grad(x[:, None, :] - block[None, :, :]), axis=1)
        return total / m

    return force


def make_exabc(interaction_force: Optional[Callable] = None,
               grad_u: Optional[Callable] = None, dim: int = 1) -> CoefficientModel:
    """Double-well drift -4|x|^2 x + 2x plus an optional interaction force and
    a measure-dependent diffusion sqrt(I + mean of gu gu*).

    interaction_force(x, cloud_points) returns the cloud-averaged interaction
    gradient at each row of x (build one from a pointwise gradient with
    pairwise_force); grad_u maps cloud points (M, d) to gradients (M, d).
    """

    @_batched
    def drift(t, x, mu):
        b = (-4.0 * np.sum(x**2, axis=-1, keepdims=True) + 2.0) * x
        if interaction_force is not None:
            b = b + interaction_force(x, mu.points)
        return b

    if grad_u is None:
        diffusion = _identity_diffusion(dim, 1.0)
    else:
        from .measures import _psd_sqrt

        def diffusion(t, mu):
            g = np.asarray(grad_u(mu.points), dtype=np.float64)
            outer = np.einsum("mi,mj->ij", g, g) / mu.size
            return _psd_sqrt(np.eye(dim) + outer)

    return CoefficientModel(dim, dim, drift, diffusion, name="exabc", superlinear=True)


def make_kinetic_gradient(grad_v: Optional[Callable] = None,
                          interaction_force: Optional[Callable] = None,
                          dim: int = 1) -> CoefficientModel:
    """Position-velocity system with friction, a potential force, and an
    optional mean interaction force on the velocity:

        dx = y dt,   dy = (-y - grad_v(x) - force(x, cloud)) dt + sqrt(2) dW.

    Noise acts on the velocity block only.  The sqrt(2) noise scale makes
    exp(-|y|^2/2 - V(x) - mean-field term) the stationary density, which the
    grid tabulation in the kinetic module relies on.

    grad_v maps positions (B, d) to gradients (B, d); interaction_force maps
    positions (B, d) and phase cloud points (M, 2d) to the cloud-averaged
    interaction gradient (B, d).
    """

    half = dim

    @_batched
    def drift(t, z, mu):
        x, y = z[:, :half], z[:, half:]
        b = -y
        if grad_v is not None:
            b = b - np.asarray(grad_v(x), dtype=np.float64)
        if interaction_force is not None:
            b = b - np.asarray(interaction_force(x, mu.points), dtype=np.float64)
        return np.concatenate([y, b], axis=-1)

    noise = np.zeros((2 * half, half))
    noise[half:, :] = math.sqrt(2.0) * np.eye(half)
    noise.flags.writeable = False
    return CoefficientModel(2 * half, half, drift, lambda t, mu: noise,
                            kind="kinetic", name="kinetic_gradient")


BUILTIN_MODELS = {
    "ou": (make_ou, "theta=1.0, sigma0=sqrt(2), dim=1", "linear mean-reverting drift -theta x"),
    "mean_field_linear": (
        make_mean_field_linear,
        "a=1.0, kappa=0.2, sigma0=1.0, dim=1",
        "linear drift with attraction to the cloud mean",
    ),
    "exabc": (
        make_exabc,
        "interaction_force=None, grad_u=None, dim=1",
        "double-well drift -4|x|^2 x + 2x with optional interaction",
    ),
    "kinetic_gradient": (
        make_kinetic_gradient,
        "grad_v=None, interaction_force=None, dim=1",
        "position-velocity system, velocity-only noise sqrt(2)",
    ),
}


def builtin_model(name: str, **params) -> CoefficientModel:
    try:
        factory = BUILTIN_MODELS[name][0]
    except KeyError:
        raise ValueError(
            f"unknown builtin model {name!r}; known: {sorted(BUILTIN_MODELS)}"
        ) from None
    return factory(**params)
