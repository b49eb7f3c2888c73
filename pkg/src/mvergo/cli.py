"""Batch experiment runner: JSON config in, CSV series and JSON summaries out.

Exit codes: 0 success, 2 a checked inequality/condition failed (a scientific
finding, not a bug), 1 runtime error, 64 config schema violation, 74 I/O
error.  Identical configs produce byte-identical CSV outputs; the --threads
flag is accepted for interface stability and must not change results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .coefficients import (
    BUILTIN_MODELS,
    DissipativityConstants,
    KineticConstants,
    builtin_model,
    check_kinetic,
    check_monotonicity,
    check_partial_dissipativity,
)
from .inequalities_lab import (
    LSI_TEST_BANK,
    decay_fit,
    entropy_decay_experiment,
    harnack_coupling,
    semigroup_lsi_gap,
    w2_decay_experiment,
)
from .invariant import frozen_invariant, picard_fixed_point
from .kinetic import GridSpec, explicit_invariant_density, grid_entropy, simulate_kinetic
from .measures import (
    EmpiricalMeasure,
    GaussianLaw,
    fmt17,
    moment_match,
    point_cloud,
    standard_normal_cloud,
)
from .simulator import (
    SimConfig,
    auto_scheme,
    box_mollifier,
    regularization_convergence,
    simulate_mean_field,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FINDING = 2
EXIT_SCHEMA = 64
EXIT_IO = 74

EXPERIMENTS = (
    "check",
    "simulate",
    "phi",
    "fixed-point",
    "w2-decay",
    "entropy-decay",
    "lsi-gap",
    "harnack",
    "kinetic",
    "regularization",
)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT_POS = {"type": "integer", "minimum": 1}

_SIM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dt", "t_end", "n_particles"],
    "properties": {
        "dt": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
        "t_end": _POS,
        "n_particles": _INT_POS,
        "scheme": {"enum": ["euler", "tamed_euler"]},
        "record_every": _INT_POS,
        "interaction_batch": {"type": "integer", "minimum": 2},
    },
}

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "name": {"enum": sorted(BUILTIN_MODELS)},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta": _NUM,
                "sigma0": _POS,
                "a": _NUM,
                "kappa": _NUM,
                "dim": _INT_POS,
                "spring": _NUM,
                "coupling": _NUM,
            },
        },
    },
}

_CONSTANTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "k1": _POS,
        "k2": _POS,
        "ki": {"type": "number", "minimum": 0},
        "r0": {"type": "number", "minimum": 0},
        "delta1": _POS,
        "delta2": _POS,
    },
}

_KINETIC_CONSTANTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "r": {"type": "number", "minimum": 0},
        "r0": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
        "theta": {"type": "number", "minimum": 0},
        "radius": {"type": "number", "minimum": 0},
        "km": {"type": "number", "minimum": 0},
    },
}

_LAW_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["point", "gaussian"]},
        "value": {"type": "array", "items": _NUM},
        "mean": {"type": "array", "items": _NUM},
        "cov_diag": {"type": "array", "items": _POS},
    },
}

_PARAMS_SCHEMAS = {
    "check": {
        "type": "object",
        "additionalProperties": False,
        "required": ["condition"],
        "properties": {
            "condition": {"enum": ["monotonicity", "partial_dissipativity", "kinetic"]},
            "n_pairs": _INT_POS,
            "radius": _POS,
            "tolerance": _POS,
            "ki": {"type": "number", "minimum": 0},
        },
    },
    "simulate": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"init": _LAW_SCHEMA},
    },
    "phi": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"burn_in": _POS, "frozen": _LAW_SCHEMA},
    },
    "fixed-point": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "burn_in": _POS,
            "tol": _POS,
            "max_iter": _INT_POS,
            "init": _LAW_SCHEMA,
        },
    },
    "w2-decay": {
        "type": "object",
        "additionalProperties": False,
        "required": ["sample_times"],
        "properties": {
            "sample_times": {"type": "array", "items": _NUM, "minItems": 3},
            "init": _LAW_SCHEMA,
            "invariant": _LAW_SCHEMA,
            "floor": _POS,
        },
    },
    "entropy-decay": {
        "type": "object",
        "additionalProperties": False,
        "required": ["sample_times"],
        "properties": {
            "sample_times": {"type": "array", "items": _NUM, "minItems": 3},
            "init": _LAW_SCHEMA,
        },
    },
    "lsi-gap": {
        "type": "object",
        "additionalProperties": False,
        "required": ["times"],
        "properties": {
            "times": {"type": "array", "items": _POS, "minItems": 1},
            "n_mc": _INT_POS,
            "x": {"type": "array", "items": _NUM},
            "functions": {
                "type": "array",
                "items": {"enum": sorted(LSI_TEST_BANK)},
                "minItems": 1,
            },
        },
    },
    "harnack": {
        "type": "object",
        "additionalProperties": False,
        "required": ["x", "y", "t0"],
        "properties": {
            "x": {"type": "array", "items": _NUM},
            "y": {"type": "array", "items": _NUM},
            "t0": _POS,
            "p": _POS,
            "n_paths": _INT_POS,
            "delta_stop": _POS,
        },
    },
    "kinetic": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "init": _LAW_SCHEMA,
            "grid_halfwidth": _POS,
            "grid_resolution": _INT_POS,
            "entropy_times": {"type": "array", "items": _POS},
        },
    },
    "regularization": {
        "type": "object",
        "additionalProperties": False,
        "required": ["mode", "levels"],
        "properties": {
            "mode": {"enum": ["yosida", "mollified"]},
            "levels": {"type": "array", "items": _INT_POS, "minItems": 1},
            "one_sided_k": _NUM,
            "init": _LAW_SCHEMA,
        },
    },
}


def config_schema(experiment: str) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "required": ["experiment", "seed", "model", "sim"],
        "properties": {
            "experiment": {"const": experiment},
            "seed": {"type": "integer"},
            "model": _MODEL_SCHEMA,
            "sim": _SIM_SCHEMA,
            "constants": _CONSTANTS_SCHEMA,
            "kinetic_constants": _KINETIC_CONSTANTS_SCHEMA,
            "output_dir": {"type": "string"},
            "params": _PARAMS_SCHEMAS[experiment],
        },
    }


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict) or "experiment" not in cfg:
        raise ConfigError("config must be an object with an 'experiment' key")
    exp = cfg["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown tag {exp!r}; known: {EXPERIMENTS}")
    try:
        jsonschema.validate(cfg, config_schema(exp))
    except jsonschema.ValidationError as exc:
        path_str = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path_str}: {exc.message}") from exc
    return cfg


def _build_model(spec: dict):
    name = spec["name"]
    params = dict(spec.get("params", {}))
    if name == "kinetic_gradient":
        spring = params.pop("spring", 1.0)
        coupling = params.pop("coupling", 0.0)
        grad_v = (lambda x: spring * x) if spring != 0.0 else None
        force = None
        if coupling != 0.0:
            # W(x, z) = coupling * x * (z1 - 1): averaged force is O(B + M)
            def force(x, z, _c=coupling):
                return np.full_like(x, _c * (np.mean(z[:, 0]) - 1.0))
        return builtin_model(name, grad_v=grad_v, interaction_force=force, **params)
    return builtin_model(name, **params)


def _build_sim(cfg: dict, model) -> SimConfig:
    sim = dict(cfg["sim"])
    sim.setdefault("scheme", auto_scheme(model))
    return SimConfig(seed=cfg["seed"], **sim)


def _build_constants(cfg: dict):
    if "constants" not in cfg:
        return None
    return DissipativityConstants(**cfg["constants"])


def _build_law(spec, dim: int, n: int, seed: int) -> EmpiricalMeasure:
    if spec is None:
        return standard_normal_cloud(n, dim, seed)
    if spec["kind"] == "point":
        return point_cloud(np.asarray(spec["value"], dtype=float), n)
    mean = np.asarray(spec.get("mean", [0.0] * dim), dtype=float)
    cov = np.diag(np.asarray(spec.get("cov_diag", [1.0] * dim), dtype=float))
    return GaussianLaw(mean, cov).sample(n, seed)


def write_series_csv(path, header, rows) -> None:
    """CSV with a header row, RFC-4180 quoting, decimal17 floats."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt17(v) if isinstance(v, float) else v for v in row])


def write_json(path, payload) -> None:
    with Path(path).open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def build_hash() -> str:
    """Stable hash of the package sources."""
    digest = hashlib.sha256()
    pkg = Path(__file__).parent
    for src in sorted(pkg.glob("*.py")):
        digest.update(src.name.encode())
        digest.update(src.read_bytes())
    return digest.hexdigest()[:12]


def _write_manifest(outdir: Path, cfg: dict) -> None:
    write_json(
        outdir / "manifest.json",
        {
            "config": cfg,
            "seed": cfg["seed"],
            "version": __version__,
            "build": build_hash(),
        },
    )


# ---------------------------------------------------------------------------
# experiment bodies; each returns EXIT_OK or EXIT_FINDING


def _run_check(cfg, model, sim, outdir) -> int:
    params = cfg.get("params", {})
    condition = params["condition"]
    n_pairs = params.get("n_pairs", 10000)
    radius = params.get("radius", 5.0)
    tol = params.get("tolerance", 1e-9)
    if condition == "kinetic":
        kc = KineticConstants(**cfg.get("kinetic_constants", {}))
        report = check_kinetic(model, kc, params.get("ki", 0.0), n_pairs, radius,
                               cfg["seed"], tol)
    else:
        constants = _build_constants(cfg)
        if constants is None:
            raise ConfigError("constants: required for drift condition checks")
        fn = check_monotonicity if condition == "monotonicity" else check_partial_dissipativity
        report = fn(model, constants, n_pairs, radius, cfg["seed"], tol)
    write_json(outdir / "report.json", {"condition": condition, **report.as_dict()})
    write_series_csv(
        outdir / "report.csv",
        ["condition", "satisfied", "worst_violation", "n_samples", "tolerance"],
        [[condition, int(report.satisfied), report.worst_violation,
          report.n_samples, report.tolerance]],
    )
    return EXIT_OK if report.satisfied else EXIT_FINDING


def _run_simulate(cfg, model, sim, outdir) -> int:
    init = _build_law(cfg.get("params", {}).get("init"), model.dim,
                      sim.n_particles, cfg["seed"])
    runner = simulate_kinetic if model.kind == "kinetic" else simulate_mean_field
    traj = runner(model, init, sim)
    traj.export(outdir / "trajectory", config_echo=cfg)
    rows = [[float(t), c.second_moment()] for t, c in zip(traj.times, traj.clouds)]
    write_series_csv(outdir / "second_moment.csv", ["t", "second_moment"], rows)
    return EXIT_OK


def _run_phi(cfg, model, sim, outdir) -> int:
    params = cfg.get("params", {})
    frozen = _build_law(params.get("frozen"), model.dim, sim.n_particles, cfg["seed"])
    result = frozen_invariant(model, frozen, sim, params.get("burn_in"),
                              _build_constants(cfg))
    from .measures import save_cloud

    save_cloud(result.cloud, outdir / "invariant_cloud.csv")
    rows = []
    for i, t in enumerate(result.trace_times):
        em = "" if result.exp_moment_trace is None else result.exp_moment_trace[i]
        rows.append([float(t), float(result.second_moment_trace[i]), em])
    write_series_csv(outdir / "diagnostics.csv", ["t", "second_moment", "exp_moment"], rows)
    write_json(outdir / "phi.json", {
        "burn_in_used": result.burn_in_used,
        "stabilized": result.stabilized,
        "epsilon": result.epsilon,
    })
    return EXIT_OK


def _run_fixed_point(cfg, model, sim, outdir) -> int:
    params = cfg.get("params", {})
    mu0 = _build_law(params.get("init"), model.dim, sim.n_particles, cfg["seed"])
    result = picard_fixed_point(model, mu0, sim, params.get("burn_in"),
                                params.get("tol"), params.get("max_iter", 12),
                                _build_constants(cfg))
    from .measures import save_cloud

    save_cloud(result.cloud, outdir / "fixed_point_cloud.csv")
    rows = [[i, float(g), result.floor] for i, g in enumerate(result.gaps, start=1)]
    write_series_csv(outdir / "gaps.csv", ["iter", "gap", "floor"], rows)
    write_json(outdir / "fixed_point.json", {
        "converged": result.converged,
        "floor": result.floor,
        "tol_used": result.tol_used,
        "iterations": len(result.gaps),
    })
    return EXIT_OK if result.converged else EXIT_FINDING


def _run_w2_decay(cfg, model, sim, outdir) -> int:
    params = cfg["params"]
    mu0 = _build_law(params.get("init"), model.dim, sim.n_particles, cfg["seed"])
    mu_inf = _build_law(params.get("invariant"), model.dim, sim.n_particles,
                        cfg["seed"] + 1)
    res = w2_decay_experiment(model, mu0, mu_inf, sim, params["sample_times"],
                              params.get("floor"))
    write_series_csv(outdir / "series.csv", ["t", "value"],
                     [[float(t), float(v)] for t, v in zip(res.times, res.values)])
    payload = {"floor": res.floor, "at_floor": res.at_floor}
    if res.fit is not None:
        payload.update(res.fit.as_dict())
    write_json(outdir / "fit.json", payload)
    return EXIT_OK


def _run_entropy_decay(cfg, model, sim, outdir) -> int:
    params = cfg["params"]
    name = cfg["model"]["name"]
    mp = cfg["model"].get("params", {})
    dim = mp.get("dim", 1)
    if name == "ou":
        a_mat = -mp.get("theta", 1.0) * np.eye(dim)
        s_mat = mp.get("sigma0", math.sqrt(2.0)) * np.eye(dim)
    elif name == "kinetic_gradient":
        spring = mp.get("spring", 1.0)
        a_mat = np.block([[np.zeros((dim, dim)), np.eye(dim)],
                          [-spring * np.eye(dim), -np.eye(dim)]])
        s_mat = np.vstack([np.zeros((dim, dim)), math.sqrt(2.0) * np.eye(dim)])
    else:
        raise ConfigError("model.name: entropy-decay needs a linear model (ou or "
                          "kinetic_gradient with zero coupling)")
    import scipy.linalg

    invariant = GaussianLaw(np.zeros(a_mat.shape[0]),
                            scipy.linalg.solve_lyapunov(a_mat, -(s_mat @ s_mat.T)))
    init = params.get("init", {})
    mean = np.asarray(init.get("mean", [3.0] * a_mat.shape[0]), dtype=float)
    cov = np.diag(np.asarray(init.get("cov_diag", [1.0] * a_mat.shape[0]), dtype=float))
    res = entropy_decay_experiment(a_mat, s_mat, GaussianLaw(mean, cov), invariant,
                                   params["sample_times"])
    write_series_csv(outdir / "series.csv", ["t", "entropy"],
                     [[float(t), float(v)] for t, v in zip(res.times, res.entropies)])
    payload = {"rate_ratio": res.rate_ratio, "consistent": res.consistent}
    if res.fit is not None:
        payload.update(res.fit.as_dict())
        payload["w2_lambda"] = res.w2_fit.rate
    write_json(outdir / "fit.json", payload)
    if res.consistent is False:
        return EXIT_FINDING
    return EXIT_OK


def _run_lsi_gap(cfg, model, sim, outdir) -> int:
    params = cfg["params"]
    constants = _build_constants(cfg)
    if constants is None:
        raise ConfigError("constants: required for lsi-gap")
    frozen = standard_normal_cloud(max(sim.n_particles, 2), model.dim, cfg["seed"] + 17)
    x = np.asarray(params.get("x", [0.0] * model.dim), dtype=float)
    names = params.get("functions", sorted(LSI_TEST_BANK))
    n_mc = params.get("n_mc", 20000)
    rows = []
    violated = False
    for fname in names:
        f, grad_f = LSI_TEST_BANK[fname]
        for t in params["times"]:
            rep = semigroup_lsi_gap(model, frozen, f, grad_f, x, float(t), n_mc,
                                    constants, cfg["seed"], dt=sim.dt)
            slack = rep.rhs + 3.0 * (rep.mc_stderr_lhs + rep.mc_stderr_rhs) - rep.lhs
            violated = violated or slack < 0.0
            rows.append([fname, float(t), rep.lhs, rep.rhs,
                         rep.mc_stderr_lhs, rep.mc_stderr_rhs, slack])
    write_series_csv(outdir / "series.csv",
                     ["f", "t", "lhs", "rhs", "stderr_lhs", "stderr_rhs", "slack"],
                     rows)
    write_json(outdir / "report.json", {"violated": violated, "n_mc": n_mc})
    return EXIT_FINDING if violated else EXIT_OK


def _run_harnack(cfg, model, sim, outdir) -> int:
    params = cfg["params"]
    constants = _build_constants(cfg)
    if constants is None:
        raise ConfigError("constants: required for harnack")
    res = harnack_coupling(
        model, constants,
        np.asarray(params["x"], dtype=float), np.asarray(params["y"], dtype=float),
        params["t0"], sim, params.get("n_paths", 10000), params.get("p"),
        delta_stop=params.get("delta_stop", 1e-3),
    )
    write_series_csv(outdir / "gap.csv", ["t", "gap"],
                     [[float(t), float(g)] for t, g in zip(res.times, res.gaps)])
    write_json(outdir / "report.json", res.as_dict())
    return EXIT_FINDING if res.r_moment_estimate > res.r_moment_bound else EXIT_OK


def _run_kinetic(cfg, model, sim, outdir) -> int:
    if model.kind != "kinetic":
        raise ConfigError("model.name: kinetic experiment needs a kinetic model")
    params = cfg.get("params", {})
    init = _build_law(params.get("init"), model.dim, sim.n_particles, cfg["seed"])
    traj = simulate_kinetic(model, init, sim)
    rows = [[float(t), c.second_moment()] for t, c in zip(traj.times, traj.clouds)]
    write_series_csv(outdir / "second_moment.csv", ["t", "second_moment"], rows)
    terminal = moment_match(traj.terminal)
    payload = {
        "terminal_mean": terminal.mean.tolist(),
        "terminal_cov": terminal.cov.tolist(),
    }
    if model.dim == 2 and "grid_halfwidth" in params:
        hw = params["grid_halfwidth"]
        n = params.get("grid_resolution", 201)
        spec = GridSpec(-hw, hw, -hw, hw, n, n)
        spring = cfg["model"].get("params", {}).get("spring", 1.0)
        density = explicit_invariant_density(
            lambda xs: 0.5 * spring * xs**2, None, None, spec
        )
        payload["log_partition"] = density.log_partition
        ent_rows = []
        for t in params.get("entropy_times", []):
            idx = int(np.argmin(np.abs(traj.times - t)))
            law = moment_match(traj.clouds[idx])
            ent_rows.append([float(traj.times[idx]), grid_entropy(law, density)])
        if ent_rows:
            write_series_csv(outdir / "entropy.csv", ["t", "entropy"], ent_rows)
    write_json(outdir / "report.json", payload)
    return EXIT_OK


def _run_regularization(cfg, model, sim, outdir) -> int:
    params = cfg["params"]
    init = _build_law(params.get("init"), model.dim, sim.n_particles, cfg["seed"])
    levels = [None] + sorted(params["levels"])
    rows = regularization_convergence(
        model, params["mode"], levels, init, sim,
        k=params.get("one_sided_k", 0.0),
        rho=box_mollifier(model.dim) if params["mode"] == "mollified" else None,
    )
    out = [["none" if lvl is None else lvl, float(gap)] for lvl, gap in rows]
    write_series_csv(outdir / "gaps.csv", ["level", "terminal_gap"], out)
    finite = [gap for lvl, gap in rows if lvl is not None]
    monotone = all(b <= a * (1.0 + 1e-9) + 1e-12 for a, b in zip(finite, finite[1:]))
    write_json(outdir / "report.json", {"monotone": monotone})
    return EXIT_OK if monotone else EXIT_FINDING


_RUNNERS = {
    "check": _run_check,
    "simulate": _run_simulate,
    "phi": _run_phi,
    "fixed-point": _run_fixed_point,
    "w2-decay": _run_w2_decay,
    "entropy-decay": _run_entropy_decay,
    "lsi-gap": _run_lsi_gap,
    "harnack": _run_harnack,
    "kinetic": _run_kinetic,
    "regularization": _run_regularization,
}


def run(config_path, output_dir=None, threads: int = 1) -> int:
    """Execute the experiment named in the config; returns the exit code."""
    if threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    outdir = Path(output_dir or cfg.get("output_dir") or ".")
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        model = _build_model(cfg["model"])
        sim = _build_sim(cfg, model)
        _write_manifest(outdir, cfg)
        status = _RUNNERS[cfg["experiment"]](cfg, model, sim, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - runner boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return status


def list_models() -> str:
    """Stable text table of builtin models."""
    lines = [f"{'name':<20} {'parameters':<40} description"]
    for name in sorted(BUILTIN_MODELS):
        _, sig, desc = BUILTIN_MODELS[name]
        lines.append(f"{name:<20} {sig:<40} {desc}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mv-ergo", description="particle-system ergodicity experiments"
    )
    parser.add_argument("--version", action="store_true", help="print version and exit")
    sub = parser.add_subparsers(dest="command")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--output-dir", default=None)
    sub.add_parser("list-models", help="list builtin models")

    args = parser.parse_args(argv)
    if args.version:
        print(f"mv-ergo {__version__} (build {build_hash()})")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_SCHEMA
    if args.command == "list-models":
        print(list_models())
        return EXIT_OK
    return run(args.config, args.output_dir, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
