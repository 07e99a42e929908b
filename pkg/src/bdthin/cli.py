"""Command-line interface: compute, sweep, simulate, verify.

Models come either from the named-model registry (`--model NAME
--param k=v ...`) or from a JSON file (`--file model.json`) holding the
documented object: integer "J" plus arrays "lambda", "mu", "q_plus",
"q_minus" of length J+1. Exit codes: 0 success, 1 verification
failures, 2 invalid input. Set BDT_THREADS to cap sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .core import BDModel, model_from_json, model_to_dict, rates_and_cdfs
from .dispersion import (
    InfiniteBDModel,
    dispersion_closed_form,
    dispersion_complete_counting,
    dispersion_infinite,
    finite_truncation,
)
from .errors import (
    BDThinError,
    InvalidConfig,
    ModelValidationError,
    ParamOutOfRange,
    StabilityCheckFailed,
    TruncationNotConverged,
)
from .models import MODEL_REGISTRY, build_named_model
from .oracle import dispersion_renewal_reward, explicit_inverse, build_w, solve_tridiagonal
from .simulate import SimConfig, simulate_batches, simulate_cycles
from .testing import random_model, random_rates

_CSV_COLUMNS = ("sweep_value", "D_closed", "D_oracle", "D_sim", "D_sim_stderr",
                "lambda_bar", "varpi")
_INPUT_ERRORS = (ModelValidationError, ParamOutOfRange, InvalidConfig,
                 StabilityCheckFailed, TruncationNotConverged, ValueError,
                 json.JSONDecodeError, OSError)


def _fmt(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def _parse_params(pairs) -> dict:
    params = {}
    for item in pairs or []:
        if "=" not in item:
            raise ParamOutOfRange(f"--param expects k=v, got {item!r}")
        key, _, value = item.partition("=")
        params[key.strip()] = value.strip()
    return params


def _resolve_model(args):
    """Returns (model, descriptor) where descriptor documents the source."""
    if getattr(args, "file", None):
        with open(args.file) as fh:
            model = model_from_json(fh.read())
        return model, {"file": args.file, "model": model_to_dict(model)}
    if not getattr(args, "model", None):
        raise ParamOutOfRange("one of --model or --file is required")
    params = _parse_params(args.params)
    model = build_named_model(args.model, params)
    return model, {"name": args.model, "params": params}


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        _atomic_write(out_path, text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _point_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(int(seed) % (1 << 64), spawn_key=(2, index))
    return int(ss.generate_state(1)[0])


def _threads() -> int:
    env = os.environ.get("BDT_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def cmd_compute(args) -> int:
    model, descriptor = _resolve_model(args)
    if isinstance(model, InfiniteBDModel):
        result = dispersion_infinite(model, args.tail_tol, args.max_states)
        payload = {
            "model": descriptor,
            "D_infinite": result.D,
            "states_used": result.states_used,
            "tail_bound": result.tail_bound,
            "states_evaluated": result.states_evaluated,
            "lambda_bar": result.thinned_rate,
            "counted_fraction": result.counted_fraction,
        }
        lines = [
            f"D_infinite       = {_fmt(result.D)}",
            f"states_used      = {result.states_used}",
            f"tail_bound       = {_fmt(result.tail_bound)}",
            f"lambda_bar       = {_fmt(result.thinned_rate)}",
            f"counted_fraction = {_fmt(result.counted_fraction)}",
        ]
    else:
        summary = rates_and_cdfs(model)
        breakdown = dispersion_closed_form(model)
        d_oracle = dispersion_renewal_reward(model)
        payload = {
            "model": descriptor.get("model", descriptor),
            "D_closed": breakdown.D,
            "D_oracle": d_oracle,
            "difference": breakdown.D - d_oracle,
            "lambda_bar": summary.thinned_rate,
            "counted_fraction": summary.counted_fraction,
        }
        lines = [
            f"D_closed         = {_fmt(breakdown.D)}",
            f"D_oracle         = {_fmt(d_oracle)}",
            f"difference       = {_fmt(breakdown.D - d_oracle)}",
            f"lambda_bar       = {_fmt(summary.thinned_rate)}",
            f"counted_fraction = {_fmt(summary.counted_fraction)}",
        ]
        if args.breakdown:
            payload["R"] = breakdown.R.tolist()
            lines.append("R_k:")
            lines.extend(
                f"  R[{k}] = {_fmt(r)}" for k, r in enumerate(breakdown.R)
            )
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        _emit("\n".join(lines), args.out)
    return 0


def _sweep_grid(args) -> np.ndarray:
    if args.points < 2:
        raise ParamOutOfRange(f"--points must be at least 2, got {args.points}")
    if args.log:
        if args.min <= 0 or args.max <= 0:
            raise ParamOutOfRange("--log grids need positive endpoints")
        return np.geomspace(args.min, args.max, args.points)
    return np.linspace(args.min, args.max, args.points)


def _sweep_point(args, outputs, value, index):
    params = _parse_params(args.params)
    params[args.var] = value
    model = build_named_model(args.model, params)
    row = {"sweep_value": value}
    if isinstance(model, InfiniteBDModel):
        if "oracle" in outputs:
            raise ParamOutOfRange(
                "the moment oracle needs a finite model; drop 'oracle' from --outputs"
            )
        result = dispersion_infinite(model, args.tail_tol, args.max_states)
        row["D_closed"] = result.D if "closed" in outputs else None
        row["lambda_bar"] = result.thinned_rate
        row["varpi"] = result.counted_fraction
        sim_model = finite_truncation(model, result.states_used) if "sim" in outputs else None
    else:
        summary = rates_and_cdfs(model)
        row["D_closed"] = dispersion_closed_form(model).D if "closed" in outputs else None
        row["D_oracle"] = dispersion_renewal_reward(model) if "oracle" in outputs else None
        row["lambda_bar"] = summary.thinned_rate
        row["varpi"] = summary.counted_fraction
        sim_model = model if "sim" in outputs else None
    if sim_model is not None:
        seed = _point_seed(args.seed, index)
        if args.method == "batch":
            config = SimConfig(seed=seed, method="batch_means", horizon=args.horizon,
                               batch_count=args.batches)
            estimate = simulate_batches(sim_model, config)
        else:
            config = SimConfig(seed=seed, method="regenerative", cycles=args.cycles)
            estimate = simulate_cycles(sim_model, config)
        row["D_sim"] = estimate.D_hat
        row["D_sim_stderr"] = estimate.std_err
    return row


def cmd_sweep(args) -> int:
    if not args.model:
        raise ParamOutOfRange("sweep requires a named --model")
    outputs = [token.strip() for token in args.outputs.split(",") if token.strip()]
    unknown = set(outputs) - {"closed", "oracle", "sim"}
    if unknown:
        raise ParamOutOfRange(f"unknown outputs {sorted(unknown)}; "
                              "choose from closed, oracle, sim")
    fixed = _parse_params(args.params)
    if args.var in fixed:
        raise ParamOutOfRange(f"sweep variable {args.var!r} also given via --param")
    grid = _sweep_grid(args)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        futures = [
            pool.submit(_sweep_point, args, outputs, float(v), i)
            for i, v in enumerate(grid)
        ]
        rows = [f.result() for f in futures]

    lines = [",".join(_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in _CSV_COLUMNS))
    _atomic_write(args.out, "\n".join(lines) + "\n")

    meta = {
        "command": "sweep",
        "model": args.model,
        "fixed_params": fixed,
        "var": args.var,
        "grid": {
            "min": args.min,
            "max": args.max,
            "points": args.points,
            "scale": "log" if args.log else "linear",
        },
        "outputs": outputs,
        "seed": args.seed,
        "method": args.method,
        "cycles": args.cycles,
        "horizon": args.horizon,
        "batches": args.batches,
        "version": __version__,
    }
    _atomic_write(args.out + ".meta.json", json.dumps(meta, indent=2) + "\n")

    if args.plot:
        from .plotting import save_sweep_figure

        series = {
            col: [row.get(col) for row in rows]
            for col in ("D_closed", "D_oracle", "D_sim", "D_sim_stderr")
        }
        save_sweep_figure(
            args.plot,
            [row["sweep_value"] for row in rows],
            series,
            args.var,
            title=args.model,
            logx=args.log,
        )
    return 0


def cmd_simulate(args) -> int:
    model, descriptor = _resolve_model(args)
    truncated_at = None
    if isinstance(model, InfiniteBDModel):
        result = dispersion_infinite(model, args.tail_tol, args.max_states)
        truncated_at = result.states_used
        model = finite_truncation(model, truncated_at)
    if args.initial_state in ("zero", "stationary"):
        initial = args.initial_state
    else:
        initial = int(args.initial_state)
    if args.method == "batch":
        config = SimConfig(seed=args.seed, method="batch_means", horizon=args.horizon,
                           batch_count=args.batches, initial_state=initial)
        estimate = simulate_batches(model, config)
    else:
        config = SimConfig(seed=args.seed, method="regenerative", cycles=args.cycles)
        estimate = simulate_cycles(model, config)

    payload = {
        "model": descriptor,
        "method": estimate.method,
        "seed": estimate.seed,
        "D_hat": estimate.D_hat,
        "std_err": estimate.std_err,
        "mean_rate_hat": estimate.mean_rate_hat,
        "cycles_or_batches": estimate.cycles_or_batches,
        "identity_violations": estimate.identity_violations,
        "total_jumps": estimate.total_jumps,
    }
    if truncated_at is not None:
        payload["truncated_at"] = truncated_at
    if estimate.raw_moments is not None:
        payload["raw_moments"] = {
            "mean_x": estimate.raw_moments.mean_x,
            "mean_y": estimate.raw_moments.mean_y,
            "mean_x2": estimate.raw_moments.mean_x2,
            "mean_xy": estimate.raw_moments.mean_xy,
            "mean_y2": estimate.raw_moments.mean_y2,
        }
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        lines = [f"{key} = {value}" for key, value in payload.items()
                 if key not in ("model", "raw_moments")]
        _emit("\n".join(lines), args.out)
    return 0


def _check_inverse_identity(rng):
    worst = 0.0
    for _ in range(40):
        model = random_model(rng, max_J=60)
        inv = explicit_inverse(model)
        dense = build_w(model).dense()
        eye = np.eye(model.J)
        worst = max(
            worst,
            float(np.max(np.abs(inv @ dense - eye))),
            float(np.max(np.abs(dense @ inv - eye))),
        )
    return worst < 1e-9, f"max identity deviation {worst:.2e}"


def _check_dual_path(rng):
    worst = 0.0
    for _ in range(120):
        model = random_model(rng, max_J=40)
        d_closed = dispersion_closed_form(model).D
        d_oracle = dispersion_renewal_reward(model)
        worst = max(worst, abs(d_closed - d_oracle) / abs(d_oracle))
    return worst < 1e-9, f"max relative gap {worst:.2e}"


def _check_tridiagonal(rng):
    worst = 0.0
    for _ in range(40):
        model = random_model(rng, max_J=60)
        w = build_w(model)
        rhs = rng.uniform(0.5, 2.0, model.J)
        x = solve_tridiagonal(w, rhs)
        x_ref = explicit_inverse(model) @ rhs
        scale = float(np.max(np.abs(x_ref)))
        worst = max(worst, float(np.max(np.abs(x - x_ref))) / scale)
    return worst < 1e-10, f"max solve deviation {worst:.2e}"


def _check_complete_counting(rng):
    worst = 0.0
    for _ in range(25):
        J = int(rng.integers(1, 40))
        lam, mu = random_rates(rng, J)
        base = BDModel(J=J, lam=lam, mu=mu,
                       q_plus=np.concatenate((np.ones(J), [0.0])),
                       q_minus=np.zeros(J + 1))
        d_births = dispersion_complete_counting(base, "births")
        d_deaths = dispersion_complete_counting(base, "deaths")
        worst = max(worst, abs(d_births - d_deaths) / abs(d_births))
    return worst < 1e-12, f"max direction gap {worst:.2e}"


def _check_erlang():
    model = BDModel(J=1, lam=[1.0, 0.0], mu=[0.0, 1.0],
                    q_plus=[0.0, 0.0], q_minus=[0.0, 1.0])
    gap = max(abs(dispersion_closed_form(model).D - 0.5),
              abs(dispersion_renewal_reward(model) - 0.5))
    return gap < 1e-12, f"|D - 1/2| = {gap:.2e}"


def _check_balanced_buffer():
    from .models import mm1k

    d = dispersion_closed_form(mm1k(500, 1.0, 1.0)).D
    return abs(d - 2.0 / 3.0) < 0.01, f"D(K=500) = {d:.6f}"


def _check_busy_cycle():
    from .models import mm1_busy_cycle

    worst = 0.0
    for rho in np.linspace(0.1, 0.9, 9):
        expected = 1.0 - 2.0 * rho * (1.0 - 2.0 * rho) / (1.0 - rho)
        got = dispersion_infinite(mm1_busy_cycle(float(rho)), tail_tol=1e-12).D
        worst = max(worst, abs(got - expected))
    return worst < 1e-8, f"max formula gap {worst:.2e}"


def _check_poisson_output():
    from .models import mms_output

    worst = 0.0
    for q in (1.0, 0.37):
        got = dispersion_infinite(mms_output(4, 0.6, q)).D
        worst = max(worst, abs(got - 1.0))
    return worst < 1e-10, f"max |D - 1| = {worst:.2e}"


def _check_two_sided():
    from .models import mm1_two_sided

    worst = 0.0
    for qp in (0.25, 0.6, 1.0):
        for qm in (0.25, 0.6, 1.0):
            expected = 1.0 + 2.0 * qp * qm / (qp + qm)
            got = dispersion_infinite(mm1_two_sided(0.55, qp, qm)).D
            worst = max(worst, abs(got - expected))
    return worst < 1e-8, f"max harmonic-mean gap {worst:.2e}"


def _check_simulation(seed):
    model = BDModel(J=1, lam=[1.0, 0.0], mu=[0.0, 1.0],
                    q_plus=[0.0, 0.0], q_minus=[0.0, 1.0])
    est = simulate_cycles(model, SimConfig(seed=seed, cycles=30_000))
    gap = abs(est.D_hat - 0.5)
    ok = gap < 4.0 * est.std_err and est.identity_violations == 0
    return ok, f"|D_hat - 1/2| = {gap:.4f} vs std_err {est.std_err:.4f}"


def cmd_verify(args) -> int:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    checks = [
        ("explicit-inverse identity", lambda: _check_inverse_identity(rng)),
        ("tridiagonal solve vs explicit inverse", lambda: _check_tridiagonal(rng)),
        ("closed form vs moment oracle", lambda: _check_dual_path(rng)),
        ("complete counting direction symmetry", lambda: _check_complete_counting(rng)),
        ("two-phase renewal value", _check_erlang),
        ("balanced buffer-500 limit", _check_balanced_buffer),
        ("busy-cycle renewal curve", _check_busy_cycle),
        ("many-server Poisson output", _check_poisson_output),
        ("two-sided harmonic mean", _check_two_sided),
        ("regenerative simulation cross-check", lambda: _check_simulation(args.seed)),
    ]
    failures = 0
    for name, run in checks:
        ok, detail = run()
        status = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"{status}  {name:40s} {detail}")
    total = len(checks)
    if failures:
        print(f"{failures} of {total} checks FAILED")
        return 1
    print(f"all {total} checks passed")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdt",
        description="Dispersion of thinned birth-death counting processes.",
    )
    parser.add_argument("--version", action="version", version=f"bdt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_source(p):
        p.add_argument("--model", help="named model from the registry")
        p.add_argument("--file", help="path to a JSON model file")
        p.add_argument("--param", dest="params", action="extend", nargs="+",
                       metavar="K=V", help="model parameter(s), repeatable")

    def add_truncation(p):
        p.add_argument("--tail-tol", type=float, default=None,
                       help="truncation tail tolerance for countable-state models")
        p.add_argument("--max-states", type=int, default=None,
                       help="truncation state cap for countable-state models")

    def add_sim_flags(p):
        p.add_argument("--method", choices=("regen", "batch"), default="regen")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cycles", type=int, default=1_000_000)
        p.add_argument("--horizon", type=float, default=1e6)
        p.add_argument("--batches", type=int, default=100)

    p = sub.add_parser("compute", help="closed form and oracle dispersion of one model")
    add_model_source(p)
    add_truncation(p)
    p.add_argument("--breakdown", action="store_true", help="include the R_k terms")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the report to a file instead of stdout")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sweep", help="evaluate a model over a parameter grid, write CSV")
    add_model_source(p)
    add_truncation(p)
    add_sim_flags(p)
    p.add_argument("--var", required=True, help="parameter to sweep")
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--log", action="store_true", help="geometric grid spacing")
    p.add_argument("--outputs", default="closed,oracle",
                   help="comma list from closed, oracle, sim")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--plot", help="also render the sweep to this image file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo estimate for one model")
    add_model_source(p)
    add_truncation(p)
    add_sim_flags(p)
    p.add_argument("--initial-state", default="zero",
                   help="zero, stationary, or a state index (batch means only)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the report to a file instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the cross-validation suite")
    p.add_argument("--seed", type=int, default=20240801)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        if getattr(args, "format", "text") == "json":
            print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        else:
            print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except BDThinError as exc:
        print(f"internal error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
