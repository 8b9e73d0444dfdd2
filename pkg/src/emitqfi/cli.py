"""Command-line driver.

    emitqfi --config run.json [--task NAME] [--out DIR] [--seed N] [--threads N]

The config is a JSON object with a ``task`` and task-specific fields.  Each
run writes ``results.csv``, a ``metadata.json`` sidecar (resolved config,
version, wall time) and a PNG figure into the output directory.  Exit codes:
0 success, 2 invalid input, 3 numerical failure (including failed checks).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from emitqfi import __version__
from emitqfi._linalg import purify
from emitqfi.channel import KrausChannel, discretize, fixed_point, random_channel, spectral_decompose
from emitqfi.degenerate import gamma_matrix, long_range_variables, mode_weights, optimize_initial_state
from emitqfi.errors import EmitQfiError, NumericalError, ValidationError
from emitqfi.haar import haar_average_exact, haar_monte_carlo
from emitqfi.hks import build_w, hks_bound, hks_qfi_decomposition, hks_test, hls_test, w_condition_residual
from emitqfi.lindblad import LindbladModel, liouvillian_gap, molmer_rate, steady_state
from emitqfi.models import (
    boundary_time_crystal,
    dephasing_sensor,
    ghz_emitter,
    monitor_ghz_state,
    random_lindblad,
    spin_monitor,
)
from emitqfi.oracle import pure_qfi_brute
from emitqfi.qfi import asymptotic_rate, exact_qfi_curve, qfi_curve, qfi_variables
from emitqfi.report import bar_figure, line_figure, write_csv, write_json

TASKS = ("qfi-curve", "rate", "degenerate", "haar", "oracle-check", "hks-check", "btc-collapse")

_COMMON = {"task", "seed"}
_CHANNEL = {"model", "dt", "mode"}
# task -> (required keys, optional keys); physical parameters are never defaulted
SCHEMA: dict[str, tuple[set[str], set[str]]] = {
    "qfi-curve": ({"model"}, _CHANNEL | {"T_max", "t_max", "initial_state", "method"}),
    "rate": ({"model"}, _CHANNEL),
    "degenerate": ({"model"}, _CHANNEL | {"initial_state", "restarts", "peripheral_tol"}),
    "haar": ({"model", "T_max"}, _CHANNEL | {"n_samples"}),
    "oracle-check": ({"T_max"}, {"n_instances", "tolerance", "dims", "outcomes"}),
    "hks-check": ({"model", "T_max"}, _CHANNEL | {"initial_state", "tolerance"}),
    "btc-collapse": ({"N", "omega", "kappa", "x_max", "dt_scale"}, {"stride", "lindblad_steady_state"}),
}


def validate_config(cfg: dict[str, Any]) -> None:
    """Reject unknown or missing keys before any computation."""
    task = cfg.get("task")
    if task not in SCHEMA:
        raise ValidationError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
    required, optional = SCHEMA[task]
    missing = sorted(required - set(cfg))
    if missing:
        raise ValidationError(f"task {task} needs {', '.join(missing)}")
    unknown = sorted(set(cfg) - required - optional - _COMMON)
    if unknown:
        raise ValidationError(f"unknown config keys for task {task}: {', '.join(unknown)}")
    model = cfg.get("model")
    if model is not None:
        if not isinstance(model, dict) or not ({"name", "file"} & set(model)):
            raise ValidationError("model must be an object with 'name' (+ 'params') or 'file'")
        extra = sorted(set(model) - {"name", "params", "file"})
        if extra:
            raise ValidationError(f"unknown model keys: {', '.join(extra)}")
    if task == "qfi-curve" and not ({"T_max", "t_max"} & set(cfg)):
        raise ValidationError("task qfi-curve needs T_max (steps) or t_max (time)")

LINDBLAD_MODELS: dict[str, Callable[..., LindbladModel]] = {
    "btc": boundary_time_crystal,
    "spin_monitor": spin_monitor,
    "dephasing_sensor": dephasing_sensor,
    "random_lindblad": random_lindblad,
}
CHANNEL_MODELS: dict[str, Callable[..., KrausChannel]] = {
    "ghz_emitter": ghz_emitter,
    "random_channel": random_channel,
}


def _complex_array(obj) -> np.ndarray:
    if isinstance(obj, dict):
        return np.asarray(obj.get("re", 0.0), dtype=float) + 1j * np.asarray(obj.get("im", 0.0), dtype=float)
    return np.asarray(obj, dtype=complex)


def _model_from_file(path: Path) -> LindbladModel | KrausChannel:
    data = json.loads(path.read_text(encoding="utf-8"))
    if "kraus" in data:
        return KrausChannel(_complex_array(data["kraus"]), _complex_array(data["d_kraus"]), label=path.stem)
    return LindbladModel(
        _complex_array(data["hamiltonian"]),
        _complex_array(data.get("jumps", [])),
        _complex_array(data["d_hamiltonian"]),
        _complex_array(data.get("d_jumps", [])),
        label=path.stem,
    )


def build_model(spec: dict[str, Any], base: Path) -> LindbladModel | KrausChannel:
    if "file" in spec:
        return _model_from_file((base / spec["file"]).resolve())
    name = spec.get("name")
    params = dict(spec.get("params", {}))
    if name in LINDBLAD_MODELS:
        return LINDBLAD_MODELS[name](**params)
    if name in CHANNEL_MODELS:
        return CHANNEL_MODELS[name](**params)
    raise ValidationError(f"unknown model {name!r}; choose from {sorted(LINDBLAD_MODELS) + sorted(CHANNEL_MODELS)}")


def to_channel(model, cfg: dict[str, Any]) -> KrausChannel:
    if isinstance(model, KrausChannel):
        return model
    if "dt" not in cfg:
        raise ValidationError("a Lindblad model needs 'dt'")
    return discretize(model, float(cfg["dt"]), cfg.get("mode", "exact_isometry"))


def initial_state(cfg: dict[str, Any], model, channel: KrausChannel) -> np.ndarray | None:
    """Density matrix for the configured start, or None for the fixed point."""
    spec = cfg.get("initial_state", "steady")
    if spec == "steady":
        return None
    if spec == "ghz":
        if not isinstance(model, LindbladModel):
            psi = np.ones(channel.dim) / np.sqrt(channel.dim)
        else:
            psi, _ = monitor_ghz_state(model)
        return np.outer(psi, psi.conj())
    psi = _complex_array(spec)
    if psi.ndim == 1:
        psi = psi / np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    return psi


def _steps(cfg: dict[str, Any], channel: KrausChannel) -> int:
    if "T_max" in cfg:
        return int(cfg["T_max"])
    if "t_max" in cfg and channel.dt:
        return int(round(float(cfg["t_max"]) / channel.dt))
    raise ValidationError("set 'T_max' (steps) or 't_max' (time, Lindblad models)")


def task_qfi_curve(cfg, out: Path, pool) -> dict[str, Any]:
    model = build_model(cfg["model"], cfg["_base"])
    ch = to_channel(model, cfg)
    t_max = _steps(cfg, ch)
    rho_in = initial_state(cfg, model, ch)
    method = cfg.get("method", "exact")
    if rho_in is None:
        variables = qfi_variables(ch, t_max - 1)
    elif method == "variables":
        variables = long_range_variables(ch, spectral_decompose(ch), rho_in, t_max - 1)
    elif method == "exact":
        variables = None
    else:
        raise ValidationError(f"unknown method {method!r}")
    if variables is None:
        curve = exact_qfi_curve(ch, rho_in, t_max)
        terms = {k: np.full(t_max, np.nan) for k in ("alpha", "beta", "gamma")}
    else:
        curve, terms = variables.curve(t_max), variables.terms(t_max)
    steps = np.arange(1, t_max + 1)
    times = steps * (ch.dt or 1.0)
    write_csv(
        out / "results.csv",
        ["T", "t", "F", "term_alpha", "term_beta", "term_gamma"],
        zip(steps, times, curve, terms["alpha"], terms["beta"], terms["gamma"]),
    )
    line_figure(out / "qfi_curve.png", {"F": (times, curve)}, "t" if ch.dt else "T", "joint QFI F")
    return {"F_final": float(curve[-1]), "T_max": t_max}


def task_rate(cfg, out: Path, pool) -> dict[str, Any]:
    model = build_model(cfg["model"], cfg["_base"])
    ch = to_channel(model, cfg)
    rep = asymptotic_rate(ch)
    row = {"f0": rep.f0, "fc": rep.fc, "rate": rep.rate, "per_step": rep.per_step, "tau_star": rep.correlation_time}
    if isinstance(model, LindbladModel):
        row["molmer_rate"] = molmer_rate(model).value
        row["liouvillian_gap"] = liouvillian_gap(model)
    write_json(out / "results.json", row)
    bar_figure(out / "rate.png", ["f0", "fc", "total"], [rep.f0, rep.fc, rep.rate], "QFI rate")
    return row


def task_degenerate(cfg, out: Path, pool) -> dict[str, Any]:
    model = build_model(cfg["model"], cfg["_base"])
    ch = to_channel(model, cfg)
    sp = spectral_decompose(ch, peripheral_tol=float(cfg.get("peripheral_tol", 1e-9)))
    g = gamma_matrix(ch, sp)
    opt = optimize_initial_state(g, sp.fixed_left, restarts=int(cfg.get("restarts", 8)), seed=cfg["seed"])
    rho_in = initial_state(cfg, model, ch)
    c_in = mode_weights(sp, rho_in, peripheral=False).real if rho_in is not None else np.full(sp.n_fixed, np.nan)
    rows = [
        (mu, float(opt.weights[mu]), float(c_in[mu]), complex(g[mu, mu]).real, complex(g[mu, mu]).imag)
        for mu in range(sp.n_fixed)
    ]
    report = {
        "n_fixed": sp.n_fixed,
        "n_peripheral": sp.n_peripheral,
        "optimal_value": opt.value,
        "box_bound": opt.box_bound,
        "optimal_psi": opt.psi,
        "modes": [dict(zip(["mode", "c_optimal", "c_initial", "gamma"], (r[0], r[1], r[2], complex(r[3], r[4])))) for r in rows],
    }
    write_json(out / "results.json", report)
    bar_figure(out / "weights.png", [str(r[0]) for r in rows], [r[1] for r in rows], "optimal weight c")
    return {k: report[k] for k in ("n_fixed", "n_peripheral", "optimal_value", "box_bound")}


def task_haar(cfg, out: Path, pool) -> dict[str, Any]:
    model = build_model(cfg["model"], cfg["_base"])
    ch = to_channel(model, cfg)
    t_max = _steps(cfg, ch)
    n_samples = int(cfg.get("n_samples", 0))
    rows = []
    for t in range(1, t_max + 1):
        rep = haar_average_exact(ch, t)
        mc = haar_monte_carlo(ch, t, n_samples, cfg["seed"]) if n_samples and t == t_max else None
        rows.append(
            (
                t,
                rep.exact,
                np.nan if rep.bulk is None else rep.bulk,
                np.nan if rep.boundary is None else rep.boundary,
                rep.alpha_tilde,
                mc.mean if mc else np.nan,
                mc.stderr if mc else np.nan,
            )
        )
    write_csv(out / "results.csv", ["T", "exact", "bulk", "boundary", "alpha_tilde", "mc_mean", "mc_stderr"], rows)
    arr = np.array(rows, dtype=float)
    series = {"Haar average": (arr[:, 0], arr[:, 1])}
    if np.all(np.isfinite(arr[:, 2])):
        series["stationary start"] = (arr[:, 0], arr[:, 2])
    line_figure(out / "haar.png", series, "T", "QFI")
    return {"exact_final": float(arr[-1, 1]), "mc_mean": float(arr[-1, 5]), "mc_stderr": float(arr[-1, 6])}


def task_oracle_check(cfg, out: Path, pool) -> dict[str, Any]:
    n = int(cfg.get("n_instances", 10))
    tol = float(cfg.get("tolerance", 1e-7))
    seeds = np.random.SeedSequence(cfg["seed"]).generate_state(n)
    dims = cfg.get("dims", [2, 3])
    outcomes = cfg.get("outcomes", [2, 3])
    t_max = int(cfg["T_max"])

    def one(i):
        rng = np.random.default_rng(int(seeds[i]))
        d_sys, d_out = int(rng.choice(dims)), int(rng.choice(outcomes))
        ch = random_channel(d_sys, d_out, rng)
        curve = qfi_curve(ch, t_max)
        psi = purify(fixed_point(ch))
        brute = pure_qfi_brute(ch, psi, t_max)
        return (i, d_sys, d_out, t_max, float(curve[-1]), brute, abs(curve[-1] - brute) / abs(brute))

    rows = list(pool.map(one, range(n)))
    errs = [r[-1] for r in rows]
    worst = float(max(errs))
    keys = ["instance", "D", "d", "T", "formula", "brute", "rel_err"]
    report = {"max_rel_err": worst, "instances": n, "tolerance": tol, "passed": worst <= tol}
    write_json(out / "results.json", {**report, "per_instance": [dict(zip(keys, r)) for r in rows]})
    bar_figure(out / "oracle.png", [str(r[0]) for r in rows], np.log10(np.maximum(errs, 1e-17)), "log10 relative error")
    if worst > tol:
        raise NumericalError(f"oracle check failed: worst relative error {worst:.3g} > {tol}")
    return report


def task_hks_check(cfg, out: Path, pool) -> dict[str, Any]:
    model = build_model(cfg["model"], cfg["_base"])
    ch = to_channel(model, cfg)
    steps = int(cfg["T_max"])
    rep = hks_test(ch, float(cfg.get("tolerance", 1e-10)))
    w = build_w(ch, rep.h)
    rho_in = initial_state(cfg, model, ch)
    dec = hks_qfi_decomposition(ch, rep.h, steps, rho_in)
    rho_for_brute = fixed_point(ch) if rho_in is None else rho_in
    direct = pure_qfi_brute(ch, purify(rho_for_brute), steps) if ch.n_outcomes**steps <= 2**14 else np.nan
    row = {
        "in_span": rep.in_span,
        "relative_residual": rep.relative_residual,
        "w_condition": w_condition_residual(w),
        "variance_term": dec.variance_term,
        "derivative_term": dec.derivative_term,
        "cross_term": dec.cross_term,
        "overlap_term": dec.overlap_term,
        "total": dec.total,
        "direct": direct,
        "bound": hks_bound(ch, steps),
    }
    if isinstance(model, LindbladModel) and not np.any(model.d_jumps):
        row["lindblad_span_residual"] = hls_test(model).relative_residual
    write_json(out / "results.json", row)
    bar_figure(
        out / "hks_terms.png",
        ["variance", "derivative", "cross", "overlap"],
        [dec.variance_term, dec.derivative_term, dec.cross_term, dec.overlap_term],
        "QFI contribution",
    )
    return row


def task_btc_collapse(cfg, out: Path, pool) -> dict[str, Any]:
    ns = [int(n) for n in cfg["N"]]
    omega = float(cfg["omega"])
    kappa = float(cfg["kappa"])
    x_max = float(cfg["x_max"])
    step_budget = float(cfg["dt_scale"])

    def one(n):
        model = boundary_time_crystal(n, omega, kappa)
        # keep dt * ||H|| fixed so the discretization error is comparable across N
        dt = step_budget / (omega * n / 2)
        ch = discretize(model, dt)
        t_steps = int(np.ceil(x_max * n / kappa / dt))
        curve = qfi_curve(ch, t_steps, steady_state(model) if cfg.get("lindblad_steady_state") else None)
        t = np.arange(1, t_steps + 1) * dt
        return n, kappa * t / n, curve / (n**2 * t**2), liouvillian_gap(model)

    results = list(pool.map(one, ns))
    rows = []
    stride = int(cfg.get("stride", 50))
    for n, x, y, _ in results:
        rows.extend((n, xv, yv) for xv, yv in zip(x[::stride], y[::stride]))
    write_csv(out / "results.csv", ["N", "kappa_t_over_N", "F_over_N2t2"], rows)
    line_figure(
        out / "btc_collapse.png",
        {f"N={n}": (x, y) for n, x, y, _ in results},
        r"$\kappa t/N$",
        r"$F/(N^2 t^2)$",
    )
    return {"gaps": {str(n): g for n, _, _, g in results}}


HANDLERS = {
    "qfi-curve": task_qfi_curve,
    "rate": task_rate,
    "degenerate": task_degenerate,
    "haar": task_haar,
    "oracle-check": task_oracle_check,
    "hks-check": task_hks_check,
    "btc-collapse": task_btc_collapse,
}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="emitqfi", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, required=True, help="JSON run configuration")
    parser.add_argument("--task", choices=TASKS, help="override the task in the config")
    parser.add_argument("--out", type=Path, default=Path("emitqfi-out"), help="output directory")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument("--version", action="version", version=__version__)
    return parser.parse_args(argv)


def run(args: argparse.Namespace) -> int:
    try:
        cfg = json.loads(args.config.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if not isinstance(cfg, dict):
        print("error: config must be a JSON object", file=sys.stderr)
        return 2
    if args.task:
        cfg["task"] = args.task
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    try:
        validate_config(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    task = cfg["task"]
    args.out.mkdir(parents=True, exist_ok=True)
    echo = dict(cfg)
    cfg["_base"] = args.config.resolve().parent
    start = time.perf_counter()
    try:
        with ThreadPoolExecutor(max_workers=max(args.threads, 1)) as pool:
            summary = HANDLERS[task](cfg, args.out, pool)
        status = 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        summary, status = {"error": str(exc)}, 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        summary, status = {"error": str(exc), "error_type": type(exc).__name__}, 3
    except (TypeError, KeyError, EmitQfiError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        summary, status = {"error": str(exc)}, 2
    write_json(
        args.out / "metadata.json",
        {
            "config": echo,
            "version": __version__,
            "wall_time_s": round(time.perf_counter() - start, 3),
            "exit_code": status,
            "summary": summary,
        },
    )
    return status


def main(argv: list[str] | None = None) -> int:
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
