"""Invariant measure of the frozen dynamics as a map on clouds, and the
fixed-point iteration to the self-consistent invariant law.

The map is approximated by the terminal cloud of one long frozen run from a
standard-normal start (particles stay independent under frozen dynamics, so
the terminal cloud is an i.i.d. sample).  Fixed-point iterates reuse one seed
(common random numbers), which turns the iteration into a nearly
deterministic contraction sequence; the Monte Carlo floor is estimated
separately from two independent-seed runs and reported with every result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .coefficients import CoefficientModel, DissipativityConstants
from .measures import (
    EXACT_CAP,
    EmpiricalMeasure,
    exp_quadratic_moment,
    standard_normal_cloud,
    subsample,
    w2_exact,
)
from .simulator import SimConfig, simulate_frozen
from .streams import derive_seed

DEFAULT_BURN_IN = 20.0
STABLE_DRIFT_LIMIT = 0.05


def relative_drift(values: np.ndarray) -> float:
    """Relative change between the two halves of the tail of a trace.

    Compares the means of the third and fourth quarters; the trace counts as
    stabilized when this is small.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 4:
        return math.inf
    half = values[len(values) // 2 :]
    a = half[: len(half) // 2]
    b = half[len(half) // 2 :]
    denom = abs(float(np.mean(half)))
    if denom == 0.0:
        return 0.0
    return abs(float(np.mean(b)) - float(np.mean(a))) / denom


@dataclass(frozen=True)
class InvariantRunResult:
    """Terminal cloud of a long frozen run plus stabilization diagnostics."""

    cloud: EmpiricalMeasure
    burn_in_used: float
    trace_times: np.ndarray
    second_moment_trace: np.ndarray
    exp_moment_trace: Optional[np.ndarray]
    epsilon: Optional[float]
    stabilized: bool


def default_burn_in(constants: Optional[DissipativityConstants]) -> float:
    if constants is not None:
        return 10.0 / constants.k2
    return DEFAULT_BURN_IN


def frozen_invariant(model: CoefficientModel, mu: EmpiricalMeasure, cfg: SimConfig,
                     burn_in: Optional[float] = None,
                     constants: Optional[DissipativityConstants] = None) -> InvariantRunResult:
    """Approximate the invariant law of the dynamics frozen at ``mu``.

    Runs the frozen system from a standard-normal cloud, discards
    [0, burn_in] from the diagnostic traces, and returns the terminal cloud.
    A non-stabilized second-moment trace (relative drift over the last half
    above 5%) flags the result rather than aborting.
    """
    if burn_in is None:
        burn_in = default_burn_in(constants)
    if not (0.0 <= burn_in < cfg.t_end):
        raise ValueError("need 0 <= burn_in < cfg.t_end")
    init = standard_normal_cloud(cfg.n_particles, model.dim, cfg.seed)
    traj = simulate_frozen(model, mu, init, cfg)
    epsilon = None
    if constants is not None:
        epsilon = constants.k2 / (4.0 * constants.delta1)
    keep = traj.times >= burn_in
    times = traj.times[keep]
    clouds = [c for c, k in zip(traj.clouds, keep) if k]
    sm = np.array([c.second_moment() for c in clouds])
    em = None
    if epsilon is not None:
        em = np.array([exp_quadratic_moment(c, epsilon).estimate for c in clouds])
    stabilized = relative_drift(sm) <= STABLE_DRIFT_LIMIT
    return InvariantRunResult(
        cloud=traj.terminal,
        burn_in_used=float(burn_in),
        trace_times=times,
        second_moment_trace=sm,
        exp_moment_trace=em,
        epsilon=epsilon,
        stabilized=stabilized,
    )


def mc_floor(model: CoefficientModel, mu: EmpiricalMeasure, cfg: SimConfig,
             burn_in: Optional[float] = None,
             constants: Optional[DissipativityConstants] = None,
             cap: int = EXACT_CAP) -> float:
    """Transport distance between two independent-seed runs on the same input;
    the resolution limit of any cloud-level comparison."""
    seeds = (derive_seed(cfg.seed, 101), derive_seed(cfg.seed, 202))
    clouds = [
        frozen_invariant(model, mu, replace(cfg, seed=s), burn_in, constants).cloud
        for s in seeds
    ]
    return w2_exact(
        subsample(clouds[0], cap, seeds[0]), subsample(clouds[1], cap, seeds[1])
    )


@dataclass(frozen=True)
class FixedPointResult:
    cloud: EmpiricalMeasure
    gaps: np.ndarray
    converged: bool
    floor: float
    tol_used: float


def picard_fixed_point(model: CoefficientModel, mu0: EmpiricalMeasure, cfg: SimConfig,
                       burn_in: Optional[float] = None, tol: Optional[float] = None,
                       max_iter: int = 12,
                       constants: Optional[DissipativityConstants] = None,
                       cap: int = EXACT_CAP) -> FixedPointResult:
    """Iterate the invariant-measure map to its fixed point.

    Every iterate reuses cfg.seed (common random numbers).  Gaps are exact
    transport distances between consecutive iterates subsampled to the cap;
    tol defaults to twice the measured Monte Carlo floor.
    """
    floor = mc_floor(model, mu0, cfg, burn_in, constants, cap)
    if tol is None:
        tol = 2.0 * floor
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    gaps = []
    current = mu0
    converged = False
    for it in range(max_iter):
        result = frozen_invariant(model, current, cfg, burn_in, constants)
        nxt = result.cloud
        gap = w2_exact(
            subsample(nxt, cap, cfg.seed), subsample(current, cap, cfg.seed)
        )
        gaps.append(gap)
        current = nxt
        if gap <= tol:
            converged = True
            break
    return FixedPointResult(
        cloud=current,
        gaps=np.array(gaps),
        converged=converged,
        floor=floor,
        tol_used=float(tol),
    )


def contraction_estimate(model: CoefficientModel, mu1: EmpiricalMeasure,
                         mu2: EmpiricalMeasure, cfg: SimConfig,
                         burn_in: Optional[float] = None,
                         constants: Optional[DissipativityConstants] = None,
                         cap: int = EXACT_CAP) -> float:
    """Lipschitz ratio of the invariant-measure map between two inputs,
    computed with common random numbers across the two runs."""
    if mu1.size != mu2.size or mu1.dim != mu2.dim:
        raise ValueError("mu1 and mu2 must have matching shape")
    denom = w2_exact(subsample(mu1, cap, cfg.seed), subsample(mu2, cap, cfg.seed))
    floor = mc_floor(model, mu1, cfg, burn_in, constants, cap)
    if denom < 10.0 * floor:
        raise ValueError(
            f"inputs too close to resolve: w2={denom:.3e} < 10 x floor={floor:.3e}"
        )
    out1 = frozen_invariant(model, mu1, cfg, burn_in, constants).cloud
    out2 = frozen_invariant(model, mu2, cfg, burn_in, constants).cloud
    numer = w2_exact(subsample(out1, cap, cfg.seed), subsample(out2, cap, cfg.seed))
    return numer / denom
