"""Numerical verification of the functional inequalities and decay bounds:
semigroup entropy-energy (log-Sobolev) gaps, the singular-drift coupling with
its Girsanov moment bound, transport/entropy decay-rate fits, and the
transport-entropy (Talagrand) comparison for Gaussian laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .coefficients import CoefficientModel, DissipativityConstants
from .measures import (
    EXACT_CAP,
    EmpiricalMeasure,
    GaussianLaw,
    gaussian_kl,
    gaussian_w2,
    point_cloud,
    subsample,
    w2_exact,
)
from .simulator import SimConfig, noise_increments, simulate_frozen, simulate_mean_field
from .streams import derive_seed


class InequalityViolation(RuntimeError):
    """A checked inequality failed beyond its statistical tolerance."""


# ---------------------------------------------------------------------------
# decay-rate fits


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit v(t) ~ c * exp(-rate * t)."""

    rate: float
    c: float
    r2: float
    points_used: int
    points_excluded: int

    def as_dict(self) -> dict:
        return {
            "lambda": self.rate,
            "c": self.c,
            "r2": self.r2,
            "points_used": self.points_used,
            "points_excluded": self.points_excluded,
        }


def decay_fit(times, values, floor: float = 0.0) -> DecayFit:
    """Least squares on (t, log v); points at or below the floor are excluded
    and counted."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.shape != values.shape:
        raise ValueError("times and values must align")
    mask = values > floor
    excluded = int(np.sum(~mask))
    if int(np.sum(mask)) < 3:
        raise ValueError("need at least 3 points above the floor")
    t, logv = times[mask], np.log(values[mask])
    slope, intercept = np.polyfit(t, logv, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logv - fitted) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(
        rate=float(-slope),
        c=float(np.exp(intercept)),
        r2=float(r2),
        points_used=int(np.sum(mask)),
        points_excluded=excluded,
    )


# ---------------------------------------------------------------------------
# linear-model moment oracle


def linear_moment_oracle(a_mat, s_mat, m0, cov0, t: float,
                         n_steps: int = 2048) -> GaussianLaw:
    """Law at time t of the linear system dZ = A Z dt + S dW started from
    N(m0, cov0): integrates dm = A m, dC = A C + C A' + S S' with fixed-step
    classical RK4."""
    a_mat = np.atleast_2d(np.asarray(a_mat, dtype=np.float64))
    s_mat = np.atleast_2d(np.asarray(s_mat, dtype=np.float64))
    m = np.atleast_1d(np.asarray(m0, dtype=np.float64)).copy()
    c = np.atleast_2d(np.asarray(cov0, dtype=np.float64)).copy()
    if t < 0:
        raise ValueError("need t >= 0")
    if np.linalg.eigvalsh(c).min() < -1e-10:
        raise ValueError("cov0 must be positive semidefinite")
    if t == 0.0:
        return GaussianLaw(m, c)
    ssT = s_mat @ s_mat.T
    h = t / n_steps

    def f_mean(v):
        return a_mat @ v

    def f_cov(mat):
        return a_mat @ mat + mat @ a_mat.T + ssT

    for _ in range(n_steps):
        k1m, k1c = f_mean(m), f_cov(c)
        k2m, k2c = f_mean(m + 0.5 * h * k1m), f_cov(c + 0.5 * h * k1c)
        k3m, k3c = f_mean(m + 0.5 * h * k2m), f_cov(c + 0.5 * h * k2c)
        k4m, k4c = f_mean(m + h * k3m), f_cov(c + h * k3c)
        m = m + (h / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
        c = c + (h / 6.0) * (k1c + 2 * k2c + 2 * k3c + k4c)
    c = 0.5 * (c + c.T)
    return GaussianLaw(m, c)


# ---------------------------------------------------------------------------
# decay experiments


@dataclass(frozen=True)
class DecaySeries:
    times: np.ndarray
    values: np.ndarray
    fit: Optional[DecayFit]
    floor: float
    at_floor: bool  # series never rose above the floor; no fit attempted


def w2_decay_experiment(model: CoefficientModel, mu0: EmpiricalMeasure,
                        mu_inf: EmpiricalMeasure, cfg: SimConfig,
                        sample_times: Sequence[float],
                        floor: Optional[float] = None,
                        cap: int = EXACT_CAP) -> DecaySeries:
    """Transport distance to the invariant cloud along an interacting run,
    with a log-linear rate fit above the Monte Carlo floor."""
    if floor is None:
        half = mu_inf.size // 2
        a = EmpiricalMeasure(mu_inf.points[:half])
        b = EmpiricalMeasure(mu_inf.points[half:])
        floor = w2_exact(
            subsample(a, cap, derive_seed(cfg.seed, 7)),
            subsample(b, cap, derive_seed(cfg.seed, 8)),
        )
    traj = simulate_mean_field(model, mu0, cfg, record_times=list(sample_times))
    ref = subsample(mu_inf, cap, cfg.seed)
    times, values = [], []
    for t, cloud in zip(traj.times, traj.clouds):
        times.append(t)
        values.append(w2_exact(subsample(cloud, cap, cfg.seed), ref))
    times = np.array(times)
    values = np.array(values)
    usable = values > floor
    if int(np.sum(usable)) < 3:
        return DecaySeries(times, values, None, float(floor), at_floor=True)
    return DecaySeries(times, values, decay_fit(times, values, floor), float(floor), False)


@dataclass(frozen=True)
class EntropyDecayResult:
    times: np.ndarray
    entropies: np.ndarray
    fit: Optional[DecayFit]
    w2_fit: Optional[DecayFit]
    rate_ratio: Optional[float]  # entropy rate / transport rate
    consistent: Optional[bool]   # |ratio - 2| <= 0.2 * ratio-free tolerance


def entropy_decay_experiment(a_mat, s_mat, mu0: GaussianLaw, invariant: GaussianLaw,
                             sample_times: Sequence[float],
                             rate_tolerance: float = 0.2) -> EntropyDecayResult:
    """Relative entropy toward the invariant Gaussian along a linear flow.

    Laws stay Gaussian, so the series comes from the moment oracle plus the
    closed-form entropy.  Also fits the transport-distance series of the same
    flow and reports whether the entropy rate is twice the transport rate
    within the given relative tolerance.
    """
    if np.linalg.eigvalsh(invariant.cov).min() <= 0.0:
        raise ValueError("invariant covariance must be nonsingular")
    times = np.asarray(list(sample_times), dtype=np.float64)
    ents, dists = [], []
    for t in times:
        law = linear_moment_oracle(a_mat, s_mat, mu0.mean, mu0.cov, float(t))
        ents.append(gaussian_kl(law, invariant))
        dists.append(gaussian_w2(law, invariant))
    ents = np.array(ents)
    dists = np.array(dists)
    if np.all(ents <= 1e-300):
        return EntropyDecayResult(times, ents, None, None, None, None)
    fit = decay_fit(times, ents, floor=0.0)
    w2f = decay_fit(times, dists, floor=0.0)
    ratio = fit.rate / w2f.rate if w2f.rate != 0 else math.inf
    consistent = abs(fit.rate - 2.0 * w2f.rate) <= rate_tolerance * abs(fit.rate)
    return EntropyDecayResult(times, ents, fit, w2f, ratio, consistent)


# ---------------------------------------------------------------------------
# semigroup entropy-energy gap


@dataclass(frozen=True)
class LsiGapReport:
    """Monte Carlo estimate of both sides of the semigroup entropy bound
    Ent <= (2 delta1 / k1)(e^{k1 t} - 1) * P_t |grad sqrt(f)|^2."""

    lhs: float
    rhs: float
    mc_stderr_lhs: float
    mc_stderr_rhs: float
    t: float

    @property
    def holds_within(self) -> float:
        """Slack rhs - lhs in units of combined stderr (positive is good)."""
        return self.rhs - self.lhs

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "mc_stderr_lhs": self.mc_stderr_lhs,
            "mc_stderr_rhs": self.mc_stderr_rhs,
            "t": self.t,
        }


def semigroup_lsi_gap(model: CoefficientModel, frozen: EmpiricalMeasure,
                      f: Callable, grad_f: Callable, x, t: float, n_mc: int,
                      c: DissipativityConstants, seed: int,
                      dt: float = 1e-3) -> LsiGapReport:
    """Estimate Ent_{P_t}(f)(x) against its exponential-in-time energy bound
    from n_mc i.i.d. frozen-dynamics paths started at x.

    ``f`` must be positive with supplied gradient; |grad sqrt(f)|^2 is
    evaluated as |grad f|^2 / (4 f).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    cfg = SimConfig(dt=dt, t_end=max(t, 2 * dt), n_particles=n_mc, seed=seed,
                    scheme="euler", record_every=max(1, int(round(t / dt))))
    init = point_cloud(x, n_mc)
    traj = simulate_frozen(model, frozen, init, cfg, record_times=[t])
    pts = traj.clouds[-1].points
    fv = np.asarray(f(pts), dtype=np.float64)
    if np.any(fv <= 0.0):
        raise ValueError("test function must be strictly positive on sampled states")
    gv = np.asarray(grad_f(pts), dtype=np.float64)
    if gv.ndim == 1:
        gv = gv[:, None]
    energy = np.sum(gv**2, axis=1) / (4.0 * fv)

    flogf = fv * np.log(fv)
    mean_f = float(np.mean(fv))
    lhs = float(np.mean(flogf)) - mean_f * math.log(mean_f)
    # delta-method linearization of u_bar - v_bar log v_bar
    lin = flogf - (math.log(mean_f) + 1.0) * fv
    stderr_lhs = float(np.std(lin, ddof=1) / math.sqrt(n_mc))

    coef = (2.0 * c.delta1 / c.k1) * (math.exp(c.k1 * t) - 1.0)
    rhs = coef * float(np.mean(energy))
    stderr_rhs = coef * float(np.std(energy, ddof=1) / math.sqrt(n_mc))
    return LsiGapReport(lhs, rhs, stderr_lhs, stderr_rhs, float(t))


LSI_TEST_BANK = {
    "2+sin": (
        lambda x: 2.0 + np.sin(x[:, 0]),
        lambda x: np.concatenate(
            [np.cos(x[:, :1])] + [np.zeros_like(x[:, 1:])], axis=1
        ),
    ),
    "1+exp(-|x|^2)": (
        lambda x: 1.0 + np.exp(-np.sum(x**2, axis=1)),
        lambda x: -2.0 * x * np.exp(-np.sum(x**2, axis=1, keepdims=True)),
    ),
    "2+tanh(x1)": (
        lambda x: 2.0 + np.tanh(x[:, 0]),
        lambda x: np.concatenate(
            [1.0 / np.cosh(x[:, :1]) ** 2] + [np.zeros_like(x[:, 1:])], axis=1
        ),
    ),
}


# ---------------------------------------------------------------------------
# singular-drift coupling with Girsanov moment bound


@dataclass(frozen=True)
class CouplingResult:
    times: np.ndarray
    gaps: np.ndarray             # mean |X_t - Y_t| over paths
    terminal_gap: float
    r_moment_estimate: float
    r_moment_bound: float
    p_used: float
    n_paths: int
    n_clipped: int               # correction-drift clip events
    n_excluded: int              # paths dropped for overflowing exponents

    def as_dict(self) -> dict:
        return {
            "terminal_gap": self.terminal_gap,
            "r_moment_estimate": self.r_moment_estimate,
            "r_moment_bound": self.r_moment_bound,
            "margin": self.r_moment_bound - self.r_moment_estimate,
            "p_used": self.p_used,
            "n_paths": self.n_paths,
            "n_clipped": self.n_clipped,
            "n_excluded": self.n_excluded,
        }


def harnack_p0(c: DissipativityConstants) -> float:
    """Smallest admissible Hoelder power for the coupling moment bound:
    1/(p0 - 1) = min(1/2, delta2 / (256 delta1))."""
    inv = min(0.5, c.delta2 / (256.0 * c.delta1))
    return 1.0 + 1.0 / inv


def harnack_moment_bound(c: DissipativityConstants, x, y, t0: float) -> float:
    """Analytic upper bound for E R^{p/(p-1)} of the coupling density."""
    gap_sq = float(np.sum((np.atleast_1d(x) - np.atleast_1d(y)) ** 2))
    term1 = c.k2 * gap_sq / (64.0 * c.delta1 * (math.exp(c.k2 * t0) - 1.0))
    term2 = (c.k1 + c.k2) ** 2 * c.r0**2 * t0 / (128.0 * c.delta1)
    return math.exp(term1 + term2)


def harnack_coupling(model: CoefficientModel, c: DissipativityConstants,
                     x, y, t0: float, cfg: SimConfig, n_paths: int,
                     p: Optional[float] = None,
                     frozen: Optional[EmpiricalMeasure] = None,
                     delta_stop: float = 1e-3, drift_clip: float = 1e6,
                     antithetic: bool = True) -> CouplingResult:
    """Couple two copies with the singular correction drift that forces them
    together by time t0, and test the Girsanov-density moment bound.

    The pair is stepped under the reference measure (the correction appears
    in the first copy's equation with the clean -gap/xi form), while the
    change-of-measure exponent is accumulated path by path; the reported
    moment is the empirical mean of R^{1/(p-1)} under the reference measure,
    which equals E R^{p/(p-1)} under the original one.  The weight
    xi_t = (e^{k2 (t0 - t)} - 1)/k2 vanishes at t0, so steps shrink near the
    end (dt_local = min(dt, xi/10)) and the run stops at t0 - delta_stop.
    Correction drifts above ``drift_clip`` are clipped and counted; paths
    whose exponent overflows are excluded and counted.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape or x.shape[0] != model.dim:
        raise ValueError("x and y must be states of the model dimension")
    if not (0 < delta_stop < t0):
        raise ValueError("need 0 < delta_stop < t0")
    p0 = harnack_p0(c)
    p = p0 if p is None else float(p)
    if p < p0:
        raise ValueError(f"p={p} below the admissible minimum p0={p0}")
    if frozen is None:
        frozen = point_cloud(np.zeros(model.dim), 1)

    s = np.asarray(model.diffusion(0.0, frozen), dtype=np.float64)
    eigs = np.linalg.eigvalsh(s @ s.T)
    if eigs.min() < c.delta2 - 1e-9 or eigs.max() > c.delta1 + 1e-9:
        raise ValueError(
            f"diffusion eigenvalues {eigs} escape [{c.delta2}, {c.delta1}]"
        )
    # row-wise application of sigma* (sigma sigma*)^{-1}: v -> v @ s_hat_t
    s_hat_t = np.linalg.solve(s @ s.T, s)  # (d, n)

    def xi(t):
        return (math.exp(c.k2 * (t0 - t)) - 1.0) / c.k2

    if antithetic and n_paths % 2 != 0:
        raise ValueError("antithetic drawing needs an even n_paths")
    half = n_paths // 2 if antithetic else n_paths

    xs = np.tile(x, (n_paths, 1))
    ys = np.tile(y, (n_paths, 1))
    log_r = np.zeros(n_paths)
    n_clipped = 0

    t = 0.0
    t_stop = t0 - delta_stop
    step = 0
    times = [0.0]
    gaps = [float(np.mean(np.linalg.norm(xs - ys, axis=1)))]
    record_stride = max(1, int(round((t_stop / cfg.dt) / 50)))
    while t < t_stop - 1e-15:
        xi_t = xi(t)
        if xi_t <= 0.0:
            raise RuntimeError(f"coupling weight vanished early at t={t}")
        dt = min(cfg.dt, xi_t / 10.0, t_stop - t)
        diff = xs - ys
        corr = diff / xi_t
        norms = np.linalg.norm(corr, axis=1)
        over = norms > drift_clip
        if np.any(over):
            n_clipped += int(np.sum(over))
            corr[over] *= (drift_clip / norms[over])[:, None]
        h = corr @ s_hat_t  # (P, n) correction seen by the driving noise
        raw = noise_increments(cfg.seed, step, (half, model.noise_dim))
        dw = (np.concatenate([raw, -raw]) if antithetic else raw) * math.sqrt(dt)
        bx = model.drift(t, xs, frozen)
        by = model.drift(t, ys, frozen)
        noise = dw @ s.T
        xs = xs + dt * (bx - corr) + noise
        ys = ys + dt * by + noise
        log_r += -np.sum(h * dw, axis=1) + 0.5 * np.sum(h**2, axis=1) * dt
        t += dt
        step += 1
        if step % record_stride == 0 or t >= t_stop - 1e-15:
            times.append(t)
            gaps.append(float(np.mean(np.linalg.norm(xs - ys, axis=1))))
        if not np.all(np.isfinite(xs)):
            raise RuntimeError(f"coupled state exploded at t={t}")

    with np.errstate(over="ignore"):
        weights = np.exp(log_r / (p - 1.0))
    good = np.isfinite(weights)
    n_excluded = int(np.sum(~good))
    estimate = float(np.mean(weights[good])) if np.any(good) else math.inf
    bound = harnack_moment_bound(c, x, y, t0)
    return CouplingResult(
        times=np.array(times),
        gaps=np.array(gaps),
        terminal_gap=gaps[-1],
        r_moment_estimate=estimate,
        r_moment_bound=bound,
        p_used=p,
        n_paths=n_paths,
        n_clipped=n_clipped,
        n_excluded=n_excluded,
    )


# ---------------------------------------------------------------------------
# transport-entropy comparison


@dataclass(frozen=True)
class TalagrandReport:
    lhs: float    # squared transport distance
    rhs: float    # C * relative entropy
    ratio: float
    degenerate: bool  # both sides vanished (identical laws)

    def as_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "degenerate": self.degenerate,
        }


def talagrand_check(mu0: GaussianLaw, invariant: GaussianLaw, c_const: float) -> TalagrandReport:
    """Compare squared transport distance against c_const times relative
    entropy for a Gaussian pair."""
    if c_const <= 0.0:
        raise ValueError("need C > 0")
    if np.linalg.eigvalsh(invariant.cov).min() <= 0.0:
        raise ValueError("invariant covariance must be nonsingular")
    lhs = gaussian_w2(mu0, invariant) ** 2
    rhs = c_const * gaussian_kl(mu0, invariant)
    if rhs == 0.0:
        return TalagrandReport(lhs, rhs, 0.0, degenerate=lhs == 0.0)
    return TalagrandReport(lhs, rhs, lhs / rhs, degenerate=False)
