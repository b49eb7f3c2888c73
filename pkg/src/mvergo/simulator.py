"""Time-stepping engines for interacting, frozen-measure, and coupled particle
systems, plus drift regularizations (resolvent smoothing and mollification).

Noise is drawn from counter-based substreams keyed by (seed, step); within a
step all particle increments come from one fixed-layout block, so runs are
bit-reproducible regardless of chunking or worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .coefficients import CoefficientModel
from .measures import EmpiricalMeasure, _as_snapshot, fmt17, save_cloud
from .streams import Stream, substream

SCHEMES = ("euler", "tamed_euler")


class SimulationError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    n_particles: int
    seed: int
    scheme: str = "euler"
    record_every: int = 1
    interaction_batch: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.1):
            raise ValueError("need 0 < dt <= 0.1")
        if self.t_end <= self.dt:
            raise ValueError("need t_end > dt")
        if self.t_end / self.dt > 2**62:
            raise ValueError("step count does not fit a 64-bit counter")
        if self.n_particles < 1:
            raise ValueError("need n_particles >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("need record_every >= 1")
        if self.interaction_batch is not None and self.interaction_batch < 2:
            raise ValueError("interaction_batch must be >= 2 when set")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def auto_scheme(model: CoefficientModel) -> str:
    """Tamed stepping for superlinear drifts, plain Euler otherwise."""
    return "tamed_euler" if model.superlinear else "euler"


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Cloud snapshots along a run; times[0] is 0 (the initial cloud)."""

    times: np.ndarray
    clouds: list

    def __post_init__(self):
        if len(self.times) != len(self.clouds) or len(self.clouds) == 0:
            raise ValueError("times and clouds must align and be nonempty")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must strictly increase from 0")
        sizes = {c.size for c in self.clouds}
        if len(sizes) != 1:
            raise ValueError("all snapshots must have equal cloud size")

    @property
    def terminal(self) -> EmpiricalMeasure:
        return self.clouds[-1]

    def export(self, path, config_echo: Optional[dict] = None) -> None:
        """Write one cloud CSV per snapshot plus a JSON manifest."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        names = []
        for i, cloud in enumerate(self.clouds):
            name = f"cloud_{i:05d}.csv"
            save_cloud(cloud, path / name)
            names.append(name)
        manifest = {
            "times": [float(t) for t in self.times],
            "files": names,
            "config": config_echo or {},
        }
        with (path / "manifest.json").open("w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)


def noise_increments(seed: int, step: int, shape: tuple) -> np.ndarray:
    """Standard-normal block for one step; row i belongs to particle i."""
    return substream(seed, Stream.NOISE, step).standard_normal(shape)


def tame(drift_vals: np.ndarray, dt: float) -> np.ndarray:
    """Per-particle taming b / (1 + dt |b|); preserves the sign of <b, x>."""
    norms = np.linalg.norm(drift_vals, axis=-1, keepdims=True)
    return drift_vals / (1.0 + dt * norms)


def _record_steps(cfg: SimConfig, record_times: Optional[Sequence[float]]) -> list:
    n = cfg.n_steps
    if record_times is None:
        steps = sorted(set(range(0, n + 1, cfg.record_every)) | {0, n})
        return steps
    steps = {0}
    for t in record_times:
        k = int(round(t / cfg.dt))
        if abs(k * cfg.dt - t) > 1e-9 * max(1.0, abs(t)) or not (0 <= k <= n):
            raise ValueError(f"record time {t} does not sit on the step grid")
        steps.add(k)
    return sorted(steps)


def _run(model: CoefficientModel, init: EmpiricalMeasure, cfg: SimConfig,
         measure_at: Callable, record_times=None) -> TrajectoryEnsemble:
    if init.dim != model.dim:
        raise ValueError(f"init dim {init.dim} != model dim {model.dim}")
    if init.size != cfg.n_particles:
        raise ValueError(f"init size {init.size} != cfg.n_particles {cfg.n_particles}")
    record = _record_steps(cfg, record_times)
    record_set = set(record)

    x = init.points.copy()
    n, dt = cfg.n_steps, cfg.dt
    tamed = cfg.scheme == "tamed_euler"
    snapshots = {0: EmpiricalMeasure(x)} if 0 in record_set else {}
    for k in range(n):
        mu_k = measure_at(k, x)
        b = model.drift(k * dt, x, mu_k)
        if tamed:
            b = tame(b, dt)
        s = model.diffusion(k * dt, mu_k)
        dw = noise_increments(cfg.seed, k, (x.shape[0], model.noise_dim)) * math.sqrt(dt)
        x = x + dt * b + dw @ np.asarray(s).T
        if not np.all(np.isfinite(x)):
            raise SimulationError(
                f"non-finite state at step {k + 1} (t={ (k + 1) * dt:g}); "
                "consider scheme='tamed_euler'",
                step=k + 1,
            )
        if (k + 1) in record_set:
            snapshots[k + 1] = EmpiricalMeasure(x)
    times = np.array([k * dt for k in record], dtype=np.float64)
    return TrajectoryEnsemble(times, [snapshots[k] for k in record])


def simulate_mean_field(model: CoefficientModel, init: EmpiricalMeasure,
                        cfg: SimConfig, record_times=None) -> TrajectoryEnsemble:
    """N-particle system in which every particle's coefficients see the
    current empirical cloud of all N particles (synchronous update)."""

    batch = cfg.interaction_batch

    def measure_at(k, x):
        if batch is not None and x.shape[0] > batch:
            idx = substream(cfg.seed, Stream.SUBSAMPLE, k).choice(
                x.shape[0], size=batch, replace=False
            )
            return EmpiricalMeasure(x[idx], copy=False)
        return _as_snapshot(x)

    return _run(model, init, cfg, measure_at, record_times)


def simulate_frozen(model: CoefficientModel, frozen: EmpiricalMeasure,
                    init: EmpiricalMeasure, cfg: SimConfig,
                    record_times=None) -> TrajectoryEnsemble:
    """Same stepping with the measure argument held at ``frozen`` for all
    times; particles do not interact."""
    if frozen.dim != model.dim:
        raise ValueError(f"frozen dim {frozen.dim} != model dim {model.dim}")
    return _run(model, init, cfg, lambda k, x: frozen, record_times)


@dataclass(frozen=True)
class SyncGapSeries:
    """Gap |X_t - Y_t| along pairs driven by identical noise; gaps has shape
    (n_times, n_pairs)."""

    times: np.ndarray
    gaps: np.ndarray


def synchronous_pair(model: CoefficientModel, frozen: EmpiricalMeasure,
                     x, y, cfg: SimConfig, record_times=None) -> SyncGapSeries:
    """Two frozen-measure solutions driven by the same Brownian path.

    x and y may be single states (d,) or stacked starts (P, d); pair p gets
    its own noise stream, shared between its two legs.  Requires the model's
    diffusion to be state-free, which holds structurally here.
    """
    xs = np.atleast_2d(np.asarray(x, dtype=np.float64)).copy()
    ys = np.atleast_2d(np.asarray(y, dtype=np.float64)).copy()
    if xs.shape != ys.shape or xs.shape[1] != model.dim:
        raise ValueError("x and y must both be (P, d) with d = model.dim")
    cfg = replace(cfg, n_particles=xs.shape[0])
    record = _record_steps(cfg, record_times)
    record_set = set(record)
    dt, n = cfg.dt, cfg.n_steps
    tamed = cfg.scheme == "tamed_euler"
    gaps = {0: np.linalg.norm(xs - ys, axis=1)}
    for k in range(n):
        bx = model.drift(k * dt, xs, frozen)
        by = model.drift(k * dt, ys, frozen)
        if tamed:
            bx, by = tame(bx, dt), tame(by, dt)
        s = np.asarray(model.diffusion(k * dt, frozen))
        dw = noise_increments(cfg.seed, k, (xs.shape[0], model.noise_dim)) * math.sqrt(dt)
        common = dw @ s.T
        xs = xs + dt * bx + common
        ys = ys + dt * by + common
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise SimulationError(f"non-finite state at step {k + 1}", step=k + 1)
        if (k + 1) in record_set:
            gaps[k + 1] = np.linalg.norm(xs - ys, axis=1)
    times = np.array([k * dt for k in record], dtype=np.float64)
    return SyncGapSeries(times, np.stack([gaps[k] for k in record]))


# ---------------------------------------------------------------------------
# drift regularizations


class ResolventError(RuntimeError):
    pass


def yosida_drift(base: Callable, n: int, k=0.0) -> Callable:
    """Resolvent regularization of a one-sided-bounded drift.

    For bt = base - k/2 * id (which is monotone non-expansive when base obeys
    2<base(x)-base(y), x-y> <= k |x-y|^2), returns

        x -> n [ (id - bt/n)^{-1}(x) - x ] + k/2 * x,

    which is globally Lipschitz with constant 2n + k/2 and keeps the same
    one-sided bound k.  The resolvent is solved per evaluation by a damped
    fixed-point iteration (Newton fallback in one dimension) to residual
    1e-10.

    ``base`` maps (t, x) with x of shape (d,) or (B, d); ``k`` is a constant
    or a function of t.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    kfun = k if callable(k) else (lambda t, _k=float(k): _k)

    def shifted(t, y):
        return np.asarray(base(t, y), dtype=np.float64) - 0.5 * kfun(t) * y

    def regularized(t, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        y = _solve_resolvent(lambda v: shifted(t, v), n, xb)
        out = n * (y - xb) + 0.5 * kfun(t) * xb
        return out[0] if single else out

    return regularized


def _solve_resolvent(bt: Callable, n: int, x: np.ndarray,
                     tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Solve y - bt(y)/n = x row-wise."""

    def resid(y):
        return y - bt(y) / n - x

    y = x.copy()
    r = resid(y)
    rn = np.linalg.norm(r, axis=1)
    alpha = np.ones(x.shape[0])
    one_d = x.shape[1] == 1
    for it in range(max_iter):
        if float(rn.max(initial=0.0)) <= tol:
            return y
        if one_d and it >= 40:
            # scalar Newton with a finite-difference slope; resid is strictly
            # increasing in y for monotone bt
            h = 1e-6 * np.maximum(1.0, np.abs(y))
            slope = 1.0 + (bt(y - h) - bt(y + h)) / (2.0 * h * n)
            slope = np.maximum(slope, 0.5)
            cand = y - r / slope
        else:
            cand = y - alpha[:, None] * r
        rc = resid(cand)
        rcn = np.linalg.norm(rc, axis=1)
        improved = rcn <= rn
        y = np.where(improved[:, None], cand, y)
        r = np.where(improved[:, None], rc, r)
        rn = np.where(improved, rcn, rn)
        alpha = np.where(improved, np.minimum(1.0, alpha * 1.5), alpha * 0.5)
    bad = int(np.argmax(rn))
    raise ResolventError(
        f"resolvent iteration failed at x={x[bad].tolist()} with n={n} "
        f"(residual {rn[bad]:.3e}); the base drift may violate its one-sided bound"
    )


@dataclass(frozen=True)
class Mollifier:
    """Nonnegative bump with compact support and unit mass.

    ``density`` maps (K, dim) points to (K,) values, vanishing outside the
    centered box of half-width ``support_radius``.
    """

    density: Callable
    support_radius: float
    dim: int
    name: str = "custom"


def box_mollifier(dim: int = 1) -> Mollifier:
    vol = 2.0**dim

    def density(y):
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        inside = np.all(np.abs(y) <= 1.0, axis=1)
        return np.where(inside, 1.0 / vol, 0.0)

    return Mollifier(density, 1.0, dim, name="box")


def smooth_bump_mollifier(dim: int = 1) -> Mollifier:
    """exp(-1/(1-|y|^2)) bump, normalized numerically at build time."""

    def raw(y):
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        sq = np.sum(y**2, axis=1)
        out = np.zeros(len(sq))
        inside = sq < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - sq[inside]))
        return out

    nodes, weights = _tensor_gl_nodes(dim, 1.0, n_panels=16, n_nodes=24)
    mass = float(weights @ raw(nodes))
    return Mollifier(lambda y: raw(y) / mass, 1.0, dim, name="smooth_bump")


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature recipe for the mollification integral: tensor Gauss-Legendre
    (panels split at 0) for dim <= 2, seeded Monte Carlo otherwise."""

    n_panels: int = 8
    n_nodes: int = 16
    mc_samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.n_panels < 2 or self.n_panels % 2 != 0:
            raise ValueError("n_panels must be an even number >= 2")
        if self.n_nodes < 2 or self.mc_samples < 1:
            raise ValueError("n_nodes >= 2 and mc_samples >= 1 required")


def _tensor_gl_nodes(dim: int, radius: float, n_panels: int, n_nodes: int):
    base, wts = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(-radius, radius, n_panels + 1)
    nodes_1d, weights_1d = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes_1d.append(0.5 * (lo + hi) + half * base)
        weights_1d.append(half * wts)
    nodes_1d = np.concatenate(nodes_1d)
    weights_1d = np.concatenate(weights_1d)
    if dim == 1:
        return nodes_1d[:, None], weights_1d
    grids = np.meshgrid(*([nodes_1d] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = weights_1d
    for _ in range(dim - 1):
        weights = np.multiply.outer(weights, weights_1d)
    return nodes, weights.ravel()


def mollify_drift(base: Callable, m: int, rho: Mollifier,
                  quad: Optional[QuadratureSpec] = None) -> Callable:
    """Convolution smoothing at scale 1/m:  x -> integral of
    base(x - y) against the rescaled bump m^d rho(m y).

    After substituting z = m y the quadrature runs over the fixed support of
    rho, so node layout does not depend on m.  The bump's mass is validated
    at build time.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    quad = quad or QuadratureSpec()
    if rho.dim <= 2:
        nodes, weights = _tensor_gl_nodes(rho.dim, rho.support_radius,
                                          quad.n_panels, quad.n_nodes)
        dens = np.asarray(rho.density(nodes), dtype=np.float64)
        if np.any(dens < 0):
            raise ValueError("mollifier density must be nonnegative")
        wts = weights * dens
    else:
        rng = substream(quad.seed, Stream.MC_QUAD, 0)
        vol = (2.0 * rho.support_radius) ** rho.dim
        nodes = rng.uniform(-rho.support_radius, rho.support_radius,
                            size=(quad.mc_samples, rho.dim))
        dens = np.asarray(rho.density(nodes), dtype=np.float64)
        if np.any(dens < 0):
            raise ValueError("mollifier density must be nonnegative")
        wts = dens * (vol / quad.mc_samples)
    mass = float(np.sum(wts))
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"mollifier mass {mass} deviates from 1 beyond 1e-6")

    shifts = nodes / m  # (K, d)

    def mollified(t, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        acc = np.zeros_like(xb)
        for j in range(shifts.shape[0]):
            if wts[j] == 0.0:
                continue
            acc += wts[j] * np.asarray(base(t, xb - shifts[j]), dtype=np.float64)
        return acc[0] if single else acc

    return mollified


def _frozen_drift(model: CoefficientModel, frozen: EmpiricalMeasure) -> Callable:
    return lambda t, x: model.drift(t, x, frozen)


def regularization_convergence(model: CoefficientModel, mode: str,
                               levels: Sequence[Optional[int]],
                               init: EmpiricalMeasure, cfg: SimConfig,
                               frozen: Optional[EmpiricalMeasure] = None,
                               k=0.0, rho: Optional[Mollifier] = None,
                               quad: Optional[QuadratureSpec] = None) -> list:
    """Terminal mean-square gap between the regularized and base dynamics
    under shared noise, one row (level, gap) per regularization level.

    A level of None is the no-regularization sentinel (gap identically 0).
    """
    if mode not in ("yosida", "mollified"):
        raise ValueError("mode must be 'yosida' or 'mollified'")
    frozen = frozen if frozen is not None else init
    base = _frozen_drift(model, frozen)

    def run_with(drift_fn):
        wrapped = CoefficientModel(
            model.dim, model.noise_dim,
            lambda t, x, mu: drift_fn(t, x),
            model.diffusion, kind=model.kind,
            name=model.name, superlinear=model.superlinear,
        )
        traj = simulate_frozen(wrapped, frozen, init, cfg,
                               record_times=[cfg.n_steps * cfg.dt])
        return traj.terminal.points

    reference = run_with(base)
    rows = []
    for level in levels:
        if level is None:
            pts = run_with(base)
        elif mode == "yosida":
            pts = run_with(yosida_drift(base, int(level), k))
        else:
            moll = rho if rho is not None else box_mollifier(model.dim)
            pts = run_with(mollify_drift(base, int(level), moll, quad))
        gap = float(np.mean(np.sum((pts - reference) ** 2, axis=1)))
        rows.append((level, gap))
    return rows
