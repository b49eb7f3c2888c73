"""Position-velocity (degenerate-noise) systems: a dedicated stepper that
keeps the position update exact, the weighted gap norm used in their
contraction analysis, and the explicit stationary density of the gradient
case on a 2-D grid with entropy quadrature against it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .coefficients import CoefficientModel, KineticConstants
from .measures import EmpiricalMeasure, GaussianLaw, fmt17
from .simulator import SimConfig, SimulationError, TrajectoryEnsemble, _record_steps, noise_increments
from .measures import _as_snapshot


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class KineticState:
    """Position/velocity pair on R^d x R^d."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be vectors of the same dimension")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite state")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def simulate_kinetic(model: CoefficientModel, init: EmpiricalMeasure,
                     cfg: SimConfig, record_times=None) -> TrajectoryEnsemble:
    """Step the (x, y) system with noise injected into the velocity block
    only; the position update is exact given the velocity:
    x_{k+1} = x_k + y_k dt, bitwise."""
    if model.kind != "kinetic":
        raise ValueError("simulate_kinetic needs a kinetic model")
    if init.dim != model.dim or init.size != cfg.n_particles:
        raise ValueError("init incompatible with model/config")
    half = model.dim // 2
    probe = np.asarray(model.diffusion(0.0, init))
    if np.any(probe[:half, :] != 0.0):
        raise ValueError("kinetic diffusion must vanish on the position block")

    record = _record_steps(cfg, record_times)
    record_set = set(record)
    z = init.points.copy()
    dt, n = cfg.dt, cfg.n_steps
    tamed = cfg.scheme == "tamed_euler"
    snapshots = {0: EmpiricalMeasure(z)} if 0 in record_set else {}
    for k in range(n):
        mu_k = _as_snapshot(z)
        b = np.asarray(model.drift(k * dt, z, mu_k))[:, half:]
        if tamed:
            norms = np.linalg.norm(b, axis=1, keepdims=True)
            b = b / (1.0 + dt * norms)
        s = np.asarray(model.diffusion(k * dt, mu_k))[half:, :]
        dw = noise_increments(cfg.seed, k, (z.shape[0], model.noise_dim)) * math.sqrt(dt)
        x_new = z[:, :half] + z[:, half:] * dt
        y_new = z[:, half:] + dt * b + dw @ s.T
        z = np.concatenate([x_new, y_new], axis=1)
        if not np.all(np.isfinite(z)):
            raise SimulationError(f"non-finite state at step {k + 1}", step=k + 1)
        if (k + 1) in record_set:
            snapshots[k + 1] = EmpiricalMeasure(z)
    times = np.array([k * dt for k in record], dtype=np.float64)
    return TrajectoryEnsemble(times, [snapshots[k] for k in record])


def weighted_gap_norm(kc: KineticConstants, z: KineticState, zbar: KineticState) -> float:
    """Mixed position/velocity gap norm
    sqrt(r^2 |dx|^2 / 2 + |dy|^2 / 2 + r r0 <dx, dy>); zero at equal states."""
    if kc.r == 0.0 and kc.r0 != 0.0:
        raise ValueError("r=0 with r0 != 0 gives a degenerate weight; rejected")
    dx = z.x - zbar.x
    dy = z.y - zbar.y
    if not dx.shape == dy.shape:
        raise ValueError("state dimensions differ")
    val = (
        0.5 * kc.r**2 * float(np.dot(dx, dx))
        + 0.5 * float(np.dot(dy, dy))
        + kc.r * kc.r0 * float(np.dot(dx, dy))
    )
    if val < -1e-12:
        raise ValueError(f"gap form is negative ({val}); invalid constants")
    return math.sqrt(max(val, 0.0))


def norm_equivalence_constant(kc: KineticConstants) -> float:
    """Smallest C > 1 with C^{-1} q <= (gap norm)^2 <= C q for
    q = |dx|^2 + |dy|^2; from the eigenvalues of the 2x2 block form."""
    block = np.array(
        [[0.5 * kc.r**2, 0.5 * kc.r * kc.r0], [0.5 * kc.r * kc.r0, 0.5]]
    )
    eigs = np.linalg.eigvalsh(block)
    if eigs.min() <= 0.0:
        raise ValueError(f"weight form is degenerate (eigenvalues {eigs})")
    return float(max(eigs.max(), 1.0 / eigs.min()))


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid over the (x, y) plane (scalar position and velocity)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty grid box")
        if self.nx < 8 or self.ny < 8:
            raise ValueError("grid too coarse")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)


def _trapz2(values: np.ndarray, spec: GridSpec) -> float:
    return float(np.trapezoid(np.trapezoid(values, spec.ys, axis=1), spec.xs))


@dataclass(frozen=True)
class GridDensity:
    """Normalized density values on a GridSpec with the log partition sum."""

    spec: GridSpec
    values: np.ndarray
    log_partition: float

    def mass(self) -> float:
        return _trapz2(self.values, self.spec)

    def mean(self) -> np.ndarray:
        mx = _trapz2(self.values * self.spec.xs[:, None], self.spec)
        my = _trapz2(self.values * self.spec.ys[None, :], self.spec)
        return np.array([mx, my])

    def moments(self) -> tuple:
        """(mean, covariance) of the grid density by quadrature."""
        m = self.mean()
        xs, ys = self.spec.xs, self.spec.ys
        cxx = _trapz2(self.values * (xs[:, None] - m[0]) ** 2, self.spec)
        cyy = _trapz2(self.values * (ys[None, :] - m[1]) ** 2, self.spec)
        cxy = _trapz2(
            self.values * (xs[:, None] - m[0]) * (ys[None, :] - m[1]), self.spec
        )
        return m, np.array([[cxx, cxy], [cxy, cyy]])

    def export(self, path) -> None:
        """CSV of (x, y, value) rows plus a JSON header."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        with (path / "density.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "value"])
            for i, xv in enumerate(self.spec.xs):
                for j, yv in enumerate(self.spec.ys):
                    writer.writerow([fmt17(xv), fmt17(yv), fmt17(self.values[i, j])])
        header = {
            "bounds": [self.spec.x_min, self.spec.x_max, self.spec.y_min, self.spec.y_max],
            "resolution": [self.spec.nx, self.spec.ny],
            "log_partition": self.log_partition,
        }
        with (path / "density.json").open("w") as fh:
            json.dump(header, fh, indent=2, sort_keys=True)


def explicit_invariant_density(potential: Callable, interaction: Optional[Callable],
                               mu: Optional[EmpiricalMeasure],
                               spec: GridSpec) -> GridDensity:
    """Stationary density of the scalar gradient case on a grid:

        exp(-y^2/2 - V(x) - mean_z [W(x, z) - W(0, z)]) / Z0,

    normalized by the trapezoid-rule partition sum; log Z0 is stored.

    ``potential`` maps positions (K,) to V values (K,); ``interaction`` maps
    positions (K,) and phase points (M, 2) to values (K, M) and may be None.
    """
    xs, ys = spec.xs, spec.ys
    expo = -0.5 * ys[None, :] ** 2 - np.asarray(potential(xs), dtype=np.float64)[:, None]
    if interaction is not None:
        if mu is None or mu.dim != 2:
            raise ValueError("interaction term needs a phase-space cloud over R^2")
        w_x = np.asarray(interaction(xs, mu.points), dtype=np.float64)
        w_0 = np.asarray(interaction(np.zeros(1), mu.points), dtype=np.float64)
        expo = expo - np.mean(w_x - w_0, axis=1)[:, None]
    if not np.all(np.isfinite(expo)):
        raise GridError("non-finite exponent on the grid")
    peak = float(expo.max())
    unnorm = np.exp(expo - peak)
    z_reduced = _trapz2(unnorm, spec)
    log_z = peak + math.log(z_reduced)
    values = unnorm / z_reduced
    # normalized by construction; a relatively heavy boundary signals truncation
    boundary = max(
        values[0, :].max(), values[-1, :].max(), values[:, 0].max(), values[:, -1].max()
    )
    if boundary > 1e-4 * values.max():
        raise GridError("density mass reaches the grid boundary; enlarge the grid")
    density = GridDensity(spec, values, log_z)
    if abs(density.mass() - 1.0) > 1e-4:
        raise GridError("normalization failed; enlarge or refine the grid")
    return density


def grid_entropy(g_law: GaussianLaw, density: GridDensity) -> float:
    """Relative entropy of a 2-D Gaussian against a grid density by
    trapezoid quadrature; tiny negative round-off is clamped at zero."""
    if g_law.dim != 2:
        raise ValueError("grid entropy is defined for 2-D laws")
    cov = g_law.cov
    if np.linalg.eigvalsh(cov).min() <= 0.0:
        raise ValueError("Gaussian covariance must be nonsingular")
    spec = density.spec
    xs, ys = spec.xs, spec.ys
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([xx.ravel() - g_law.mean[0], yy.ravel() - g_law.mean[1]], axis=1)
    inv = np.linalg.inv(cov)
    quad = np.sum((pts @ inv) * pts, axis=1)
    _, logdet = np.linalg.slogdet(cov)
    log_phi = (-0.5 * quad - 0.5 * logdet - math.log(2.0 * math.pi)).reshape(xx.shape)
    phi = np.exp(log_phi)
    mass_in = _trapz2(phi, spec)
    if 1.0 - mass_in > 1e-6:
        raise GridError(
            f"Gaussian mass outside grid is {1.0 - mass_in:.2e} > 1e-6; enlarge the grid"
        )
    with np.errstate(divide="ignore"):
        log_rho = np.log(density.values)
    integrand = np.where(phi > 0.0, phi * (log_phi - log_rho), 0.0)
    if not np.all(np.isfinite(integrand)):
        raise GridError("density vanishes where the Gaussian has mass")
    val = _trapz2(integrand, spec)
    if val < -1e-8:
        raise GridError(f"entropy quadrature produced {val} < -1e-8")
    return max(val, 0.0)
