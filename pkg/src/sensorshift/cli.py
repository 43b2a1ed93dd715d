"""Command-line runner.

Exit codes: 0 success, 1 infeasible or numerical failure, 2 input error.
All commands are deterministic given (config, seed); results are written as
JSON (and CSV rows with --format csv) under --out.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import experiments
from .action_effect import average_proxy, discrete_effect_solution_set, effect_bounds, proxy_gap_bound
from .errors import InputError, SensorShiftError
from .identify import IdentificationSystem, enumerate_solution_vertices
from .imitation import bound_case2, proxy_case1, proxy_case2, proxy_case3
from .sim import CarFollowConfig, DrivingSceneConfig
from .spaces import ConditionalTable, JointTable


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: malformed JSON ({err})") from None


def _config_from_dict(cls, data: dict):
    known = {f.name for f in dataclass_fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InputError(f"unknown {cls.__name__} fields {sorted(unknown)}")
    cleaned = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**cleaned)


def _resolve_seed(args, cfg: dict | None = None) -> int:
    if args.seed is not None:
        return args.seed
    if cfg is not None and "seed" in cfg:
        return int(cfg["seed"])
    return 0


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _write_report(report, out_dir: Path, fmt: str, csv_fields: list[str] | None = None) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report.command.replace(":", "_").replace("-", "_")
    json_path = out_dir / f"{stem}_report.json"
    json_path.write_text(json.dumps(report.to_jsonable(), indent=2))
    if fmt == "csv" and csv_fields:
        _write_csv(out_dir / f"{stem}_rows.csv", csv_fields, report.metrics["rows"])
    return json_path


def _cmd_identify(args) -> int:
    data = _load_json(args.system)
    if "matrix" not in data or "rhs" not in data:
        raise InputError("system file needs 'matrix' and 'rhs'")
    system = IdentificationSystem(np.asarray(data["matrix"], float), np.asarray(data["rhs"], float))
    polytope = enumerate_solution_vertices(system)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "polytope.json"
    path.write_text(polytope.to_json())
    print(f"{len(polytope)} vertices (max residual {polytope.residual_max:.2e}) -> {path}")
    return 0


def _cmd_action_effect(args) -> int:
    cfg = _load_json(args.config)
    out_dir = Path(args.out)

    if args.mode == "linear":
        config = _config_from_dict(CarFollowConfig, cfg.get("carfollow", {}))
        report = experiments.carfollow_curves(config, base_seed=_resolve_seed(args, cfg))
        path = _write_report(
            report, out_dir, args.format,
            ["seed", "n", "mse_exact", "mse_proxy", "mse_full_obs"],
        )
        largest = str(max(config.train_sizes))
        s = report.metrics["summary"][largest]
        print(
            f"n={largest}: exact MSE {s['mse_exact_mean']:.4f} vs proxy {s['mse_proxy_mean']:.4f}"
            f" -> {path}"
        )
        return 0

    if args.mode == "proxy":
        cond = ConditionalTable.from_jsonable(cfg["conditional"])
        sensor = ConditionalTable.from_jsonable(cfg["sensor"])
        proxy = average_proxy(cond, sensor)
        result = {"proxy": proxy.to_jsonable()}
        if "joint" in cfg:
            gap, mi, ent = proxy_gap_bound(JointTable.from_jsonable(cfg["joint"]))
            result["gap"] = gap
            result["mi_bound"] = mi
            result["entropy_bound"] = ent
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "action_effect_proxy.json"
        path.write_text(json.dumps(result, indent=2))
        gap_note = f", gap {result['gap']:.3e} <= mi {result['mi_bound']:.3e}" if "gap" in result else ""
        print(f"proxy table written{gap_note} -> {path}")
        return 0

    # discrete: per-cell interval bounds
    joint = JointTable.from_jsonable(cfg["joint"])
    sensor = ConditionalTable.from_jsonable(cfg["sensor"])
    start = time.perf_counter()
    sets = discrete_effect_solution_set(joint, sensor)
    z_var, a_var = (n for n in joint.space.names if n != sensor.space_out.names[0])
    x_var = sensor.space_in.names[0]
    rows = []
    for z in joint.space.range_of(z_var):
        for a in joint.space.range_of(a_var):
            for x in sensor.space_in.range_of(x_var):
                lo, hi = effect_bounds(sets, z, x, a)
                rows.append({"z": z, "x": x, "a": a, "lower": lo, "upper": hi})
    report = experiments.ExperimentReport(
        command="action-effect:discrete",
        config=cfg,
        seed=_resolve_seed(args, cfg),
        metrics={"rows": rows},
        wall_clock=time.perf_counter() - start,
    )
    path = _write_report(report, out_dir, args.format, ["z", "x", "a", "lower", "upper"])
    print(f"{len(rows)} conditional cells bounded -> {path}")
    return 0


def _cmd_imitate(args) -> int:
    cfg = _load_json(args.config)
    out_dir = Path(args.out)

    if args.case == "exact":
        config = _config_from_dict(DrivingSceneConfig, cfg.get("driving_scene", {}))
        report = experiments.driving_scene_curves(config, seed=_resolve_seed(args, cfg))
        path = _write_report(
            report, out_dir, args.format,
            ["n", "probe", "pi_d", "pi_hat", "pi_proxy", "err_hat", "err_proxy"],
        )
        last = [r for r in report.metrics["rows"] if r["n"] == max(config.sample_sizes)]
        worst = max(r["err_hat"] for r in last)
        print(f"largest-n probe error {worst:.4f} -> {path}")
        return 0

    p_a_given_ys = ConditionalTable.from_jsonable(cfg["p_a_given_ys"])
    result: dict = {}
    if args.case == "1":
        policy = proxy_case1(p_a_given_ys, ConditionalTable.from_jsonable(cfg["channel"]))
    elif args.case == "2":
        back = ConditionalTable.from_jsonable(cfg["back_channel"])
        policy = proxy_case2(p_a_given_ys, back)
        if "p_yt" in cfg:
            result["case2_bound"] = bound_case2(
                p_a_given_ys, back, JointTable.from_jsonable(cfg["p_yt"])
            )
    else:
        policy = proxy_case3(
            p_a_given_ys,
            ConditionalTable.from_jsonable(cfg["sensor_s"]),
            ConditionalTable.from_jsonable(cfg["posterior"]),
        )
    result["policy"] = policy.to_jsonable()
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"imitate_case{args.case}.json"
    path.write_text(json.dumps(result, indent=2))
    note = f", bound {result['case2_bound']:.3e}" if "case2_bound" in result else ""
    print(f"case-{args.case} proxy policy written{note} -> {path}")
    return 0


def _cmd_audit_bounds(args) -> int:
    report = experiments.audit_bounds(args.n_models, seed=_resolve_seed(args))
    path = _write_report(
        report, Path(args.out), args.format, ["model_id", "check", "lhs", "rhs", "ok"]
    )
    if args.format == "csv" and report.metrics["policy_bound_triples"]:
        _write_csv(
            Path(args.out) / "audit_bounds_triples.csv",
            ["model_id", "kl", "mi", "entropy"],
            report.metrics["policy_bound_triples"],
        )
    v = report.metrics["violations"]
    print(f"{report.metrics['n_checks']} checks on {args.n_models} models, {v} violations -> {path}")
    return 0 if v == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensorshift",
        description="Identification, transfer and imitation under sensor-shift.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="base random seed (default: config 'seed' field, else 0)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--format", choices=("json", "csv"), default="json",
                       help="also emit CSV rows with 'csv' (default json)")

    p_id = sub.add_parser("identify", help="enumerate the solution polytope of a system file")
    p_id.add_argument("--system", required=True, help="JSON file with 'matrix' and 'rhs'")
    common(p_id)
    p_id.set_defaults(func=_cmd_identify)

    p_ae = sub.add_parser("action-effect", help="discrete bounds, linear transfer, or proxy")
    p_ae.add_argument("--mode", choices=("discrete", "linear", "proxy"), required=True)
    p_ae.add_argument("--config", required=True)
    common(p_ae)
    p_ae.set_defaults(func=_cmd_action_effect)

    p_im = sub.add_parser("imitate", help="exact pipeline or proxy cases 1-3")
    p_im.add_argument("--case", choices=("exact", "1", "2", "3"), required=True)
    p_im.add_argument("--config", required=True)
    common(p_im)
    p_im.set_defaults(func=_cmd_imitate)

    p_audit = sub.add_parser("audit-bounds", help="randomized audit of the stated inequalities")
    p_audit.add_argument("--n-models", type=int, default=200)
    common(p_audit)
    p_audit.set_defaults(func=_cmd_audit_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError, OSError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return 2
    except SensorShiftError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
