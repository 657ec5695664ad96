"""Command-line front end: certify, bound, thresholds, reproduce-example.

Loads model pairs (JSON files or the builtin ``paper-example`` two-state
pair), builds schedules and inputs, runs certification -> constants ->
envelope -> simulation, and writes CSV/JSON artifacts plus gnuplot scripts.
Outputs are deterministic: identical configuration gives byte-identical
files.

Exit codes: 0 success, 2 I/O or configuration trouble, 3 equivalence or
minimality failure, 4 stability failure, 5 envelope violation detected.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bound import (
    InfeasibleEpsilonError,
    alpha_max_for_epsilon,
    check_bound,
    compute_constants,
    delta_min_for_epsilon,
    delta_step_for_epsilon,
    g_function,
    g_sup_beyond,
    step_bound_function,
    write_plot_script,
)
from .core import (
    AffineFamily,
    InputSignal,
    LpvModel,
    SchedulingBox,
    SchedulingSignal,
    constant_family,
    io_map,
    signal_piecewise_constant,
    signal_sinusoid,
)
from .frozen import (
    EquivalenceError,
    MinimalityError,
    are_frozen_equivalent,
    is_frozen_minimal,
)
from .ident import PipelineResult, run_local_pipeline
from .modelio import load_input_csv, load_model, load_scheduling_csv
from .stability import StabilityError, contraction_for_pair, find_common_lyapunov

EXIT_OK = 0
EXIT_IO = 2
EXIT_EQUIVALENCE = 3
EXIT_STABILITY = 4
EXIT_VIOLATION = 5

BUILTIN_PAIR = "paper-example"


def builtin_example_model(grid_points: int | None = None) -> LpvModel:
    """The builtin two-state example: A(p) = [[0, 0.2p], [0.2, p]] on [0.1, 0.4]."""
    box = SchedulingBox([0.1], [0.4], grid_points)
    A = AffineFamily([
        np.array([[0.0, 0.0], [0.2, 0.0]]),
        np.array([[0.0, 0.2], [0.0, 1.0]]),
    ])
    B = constant_family(np.array([[1.0], [1.0]]), 1)
    C = constant_family(np.array([[1.0, 1.0]]), 1)
    return LpvModel(A, B, C, box)


def builtin_example_pair(node_spacing: float = 0.05, order: int = 2,
                         grid_points: int | None = None,
                         ) -> tuple[LpvModel, LpvModel, PipelineResult]:
    """Source model plus its locally identified, interpolated partner."""
    sigma = builtin_example_model(grid_points)
    result = run_local_pipeline(sigma, node_spacing, order)
    return sigma, result.model, result


def builtin_fig1_schedule(box: SchedulingBox, horizon: int = 79,
                          delta: int = 10) -> SchedulingSignal:
    """Blocks of length delta cycling through 0.1, 0.2, 0.3, 0.4."""
    n_blocks = (horizon + delta) // delta
    cycle = [0.1, 0.2, 0.3, 0.4]
    values = [[cycle[k % 4]] for k in range(n_blocks)]
    return signal_piecewise_constant(box, delta, values, horizon)


@dataclasses.dataclass
class ExperimentConfig:
    model: str = BUILTIN_PAIR
    model_hat: str | None = None
    schedule: dict = dataclasses.field(
        default_factory=lambda: {"kind": "piecewise-constant"}
    )
    input: dict = dataclasses.field(
        default_factory=lambda: {"kind": "constant", "value": [1.0]}
    )
    horizon: int = 79
    delta: int = 10
    epsilon: float = 1e-3
    node_spacing: float = 0.05
    order: int = 2
    rank_tol: float = 1e-8
    markov_tol: float = 1e-8
    out_dir: str = "out"

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        cfg = cls()
        tolerances = doc.pop("tolerances", {})
        for key, value in doc.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown configuration key {key!r}")
            setattr(cfg, key, value)
        for key, value in tolerances.items():
            if key not in ("rank_tol", "markov_tol"):
                raise ValueError(f"unknown tolerance {key!r}")
            setattr(cfg, key, value)
        if cfg.horizon < 1:
            raise ValueError("horizon must be >= 1")
        return cfg


def load_pair(config: ExperimentConfig) -> tuple[LpvModel, LpvModel]:
    if config.model == BUILTIN_PAIR:
        sigma = builtin_example_model()
        if config.model_hat is None:
            sigma_hat = run_local_pipeline(
                sigma, config.node_spacing, config.order
            ).model
        else:
            sigma_hat = load_model(config.model_hat)
    else:
        sigma = load_model(config.model)
        if config.model_hat is None:
            raise ValueError("model_hat is required when model is a file path")
        sigma_hat = load_model(config.model_hat)
    return sigma, sigma_hat


def build_schedule(config: ExperimentConfig, box: SchedulingBox) -> SchedulingSignal:
    spec = config.schedule
    kind = spec.get("kind", "piecewise-constant")
    if kind == "piecewise-constant":
        if "values" in spec:
            return signal_piecewise_constant(
                box, int(spec.get("delta", config.delta)), spec["values"], config.horizon
            )
        return builtin_fig1_schedule(box, config.horizon, config.delta)
    if kind == "sinusoid":
        return signal_sinusoid(
            box,
            spec.get("center", 0.3),
            spec.get("amplitude", 0.1),
            float(spec.get("time_scale", 5.0)),
            config.horizon,
        )
    if kind == "file":
        return load_scheduling_csv(spec["path"], box)
    raise ValueError(f"unknown schedule kind {kind!r}")


def build_input(config: ExperimentConfig, n_u: int) -> InputSignal:
    spec = config.input
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return InputSignal.constant(spec.get("value", [1.0]), config.horizon, n_u)
    if kind == "file":
        return load_input_csv(spec["path"])
    raise ValueError(f"unknown input kind {kind!r}")


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_certify(config: ExperimentConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigma, sigma_hat = load_pair(config)
    report: dict = {"grid_resolution": sigma.box.grid_points_per_axis}
    code = EXIT_OK
    min_a = is_frozen_minimal(sigma, config.rank_tol)
    min_b = is_frozen_minimal(sigma_hat, config.rank_tol)
    report["minimality"] = {"model": min_a.as_dict(), "model_hat": min_b.as_dict()}
    if not (min_a.minimal and min_b.minimal):
        code = EXIT_EQUIVALENCE
    equiv = are_frozen_equivalent(sigma, sigma_hat, config.markov_tol)
    report["equivalence"] = equiv.as_dict()
    if code == EXIT_OK and not equiv.equivalent:
        code = EXIT_EQUIVALENCE
    stability = {}
    all_stable = True
    for name, model in (("model", sigma), ("model_hat", sigma_hat)):
        P = find_common_lyapunov(model)
        stability[name] = {"stable": P is not None}
        if P is not None:
            stability[name]["P"] = P.tolist()
        else:
            all_stable = False
            if code == EXIT_OK:
                code = EXIT_STABILITY
    report["stability"] = stability
    if all_stable:
        report["contraction"] = contraction_for_pair(sigma, sigma_hat).as_dict()
    report["ok"] = code == EXIT_OK
    _write_json(out / "certify.json", report)
    print(f"certify: {'ok' if code == EXIT_OK else 'FAILED'} -> {out / 'certify.json'}")
    return code


def _bound_run(config: ExperimentConfig, sigma: LpvModel, sigma_hat: LpvModel,
               schedule: SchedulingSignal, u: InputSignal, delta: int):
    contraction = contraction_for_pair(sigma, sigma_hat)
    constants = compute_constants(
        sigma, sigma_hat, schedule, contraction, rank_tol=config.rank_tol
    )
    report = check_bound(sigma, sigma_hat, u, schedule, delta, constants)
    return constants, report


def cmd_bound(config: ExperimentConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigma, sigma_hat = load_pair(config)
    schedule = build_schedule(config, sigma.box)
    u = build_input(config, sigma.n_u)
    _, report = _bound_run(config, sigma, sigma_hat, schedule, u, config.delta)
    report.write_csv(out / "bound.csv")
    _write_json(out / "summary.json", report.summary_dict())
    write_plot_script(out / "plot.gp", "bound.csv", "output difference vs. envelope")
    print(
        f"bound: max measured {report.max_measured:.6g}, "
        f"max envelope {report.max_envelope:.6g}, violations {report.violations}"
    )
    return EXIT_VIOLATION if report.violations else EXIT_OK


def cmd_thresholds(config: ExperimentConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigma, sigma_hat = load_pair(config)
    contraction = contraction_for_pair(sigma, sigma_hat)
    constants = compute_constants(
        sigma, sigma_hat, None, contraction, rank_tol=config.rank_tol
    )
    eps = config.epsilon
    payload: dict = {"epsilon": eps, "constants": constants.as_dict()}

    d_m = delta_min_for_epsilon(constants, eps)
    payload["delta_min"] = {
        "value": d_m,
        "bound_at_value": g_sup_beyond(constants, d_m),
        "bound_at_adjacent": g_sup_beyond(constants, d_m - 1) if d_m > 1 else None,
    }

    bound_at = step_bound_function(sigma, sigma_hat, contraction,
                                   rank_tol=config.rank_tol)
    try:
        step = delta_step_for_epsilon(sigma, sigma_hat, eps, contraction,
                                      rank_tol=config.rank_tol)
        payload["delta_step"] = {
            "value": step,
            "bound_at_value": bound_at(step),
            "bound_at_adjacent": bound_at(step + 1e-6),
            "box_diameter": sigma.box.diameter(),
        }
    except InfeasibleEpsilonError as err:
        payload["delta_step"] = {"infeasible": True, "achieved_bound": err.achieved}

    try:
        a_m = alpha_max_for_epsilon(constants, eps, config.delta)
        K = constants.K_M_global
        payload["alpha_max"] = {
            "value": a_m,
            "delta": config.delta,
            "bound_at_value": g_function(
                config.delta, K, 0, dataclasses.replace(constants, alpha=a_m)
            ),
            "bound_at_adjacent": g_function(
                config.delta, K, 0,
                dataclasses.replace(constants, alpha=min(a_m + 1e-6, 1 - 1e-12)),
            ),
        }
    except InfeasibleEpsilonError as err:
        payload["alpha_max"] = {"infeasible": True, "limit": err.limit}

    _write_json(out / "thresholds.json", payload)
    print(f"thresholds -> {out / 'thresholds.json'}")
    return EXIT_OK


def _write_fig(out: Path, stem: str, title: str, schedule: SchedulingSignal,
               y: np.ndarray, y_hat: np.ndarray, report) -> None:
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        p_cols = ",".join(f"p_{k+1}" for k in range(schedule.samples.shape[1]))
        y_cols = ",".join(f"y_{k+1}" for k in range(y.shape[1]))
        yh_cols = ",".join(f"yhat_{k+1}" for k in range(y.shape[1]))
        fh.write(f"t,{p_cols},{y_cols},{yh_cols},difference,"
                 "envelope_signal,envelope_global\n")
        for t in range(y.shape[0]):
            row = [str(t)]
            row += [f"{v:.17g}" for v in schedule.samples[t]]
            row += [f"{v:.17g}" for v in y[t]]
            row += [f"{v:.17g}" for v in y_hat[t]]
            row += [
                f"{report.measured[t]:.17g}",
                f"{report.envelope_signal[t]:.17g}",
                f"{report.envelope_global[t]:.17g}",
            ]
            fh.write(",".join(row) + "\n")
    gp_path = out / f"{stem}.gp"
    n_p = schedule.samples.shape[1]
    diff_col = 1 + n_p + 2 * y.shape[1] + 1
    lines = [
        f"# gnuplot script; run:  gnuplot -persist {gp_path}",
        "set datafile separator ','",
        f"set title '{title}'",
        "set xlabel 't'",
        "set key top right",
        f"plot '{stem}.csv' using 1:{diff_col} with lines lw 2 title 'difference', \\",
        f"     '{stem}.csv' using 1:2 with lines dt 2 title 'schedule'",
        "",
    ]
    with open(gp_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def cmd_reproduce_example(out_dir, node_spacing: float = 0.05, order: int = 2,
                          horizon_fig1: int = 79, delta_fig1: int = 10,
                          horizon_sin: int = 100) -> int:
    """Build the builtin pair and rerun its three comparison experiments.

    Writes fig1.csv (piecewise-constant schedule, dwell 10), fig2.csv
    (sinusoid with time scale 5) and fig3.csv (time scale 2), each with a
    plot script, plus the identification provenance and a summary.  CSV
    time is 0-based; a switch at t = 10 here appears at t = 11 on 1-based
    plots.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigma, sigma_hat, pipeline = builtin_example_pair(node_spacing, order)
    _write_json(out / "pipeline.json", pipeline.provenance_dict())
    contraction = contraction_for_pair(sigma, sigma_hat)

    runs = [
        ("fig1", "piecewise-constant schedule",
         builtin_fig1_schedule(sigma.box, horizon_fig1, delta_fig1),
         delta_fig1, horizon_fig1),
        ("fig2", "sinusoid, time scale 5",
         signal_sinusoid(sigma.box, 0.3, 0.1, 5.0, horizon_sin), 1, horizon_sin),
        ("fig3", "sinusoid, time scale 2",
         signal_sinusoid(sigma.box, 0.3, 0.1, 2.0, horizon_sin), 1, horizon_sin),
    ]
    summary: dict = {
        "node_spacing": node_spacing,
        "order": order,
        "time_axis": "0-based; 1-based plots shift switches from t=10,20,... to 11,21,...",
    }
    total_violations = 0
    for stem, title, schedule, delta, horizon in runs:
        u = InputSignal.constant([1.0], horizon)
        constants = compute_constants(sigma, sigma_hat, schedule, contraction)
        report = check_bound(sigma, sigma_hat, u, schedule, delta, constants)
        y = io_map(sigma, u, schedule)
        y_hat = io_map(sigma_hat, u, schedule)
        _write_fig(out, stem, title, schedule, y, y_hat, report)
        summary[stem] = {
            "title": title,
            "delta": delta,
            "max_difference": report.max_measured,
            "max_envelope": report.max_envelope,
            "violations": report.violations,
        }
        total_violations += report.violations
        print(f"{stem}: max difference {report.max_measured:.6g} "
              f"(violations {report.violations}) -> {out / (stem + '.csv')}")
    _write_json(out / "summary.json", summary)
    return EXIT_VIOLATION if total_violations else EXIT_OK


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if getattr(args, "delta", None) is not None:
        cfg.delta = args.delta
    if getattr(args, "horizon", None) is not None:
        cfg.horizon = args.horizon
    if getattr(args, "epsilon", None) is not None:
        cfg.epsilon = args.epsilon
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lpvbound",
        description="Output-error envelopes for frozen-equivalent LPV model pairs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--delta", type=int, help="dwell length override")
        p.add_argument("--horizon", type=int, help="horizon override")
        p.add_argument("--epsilon", type=float, help="target error level override")
        p.add_argument("--out", help="output directory override")

    add_common(sub.add_parser("certify", help="minimality/equivalence/stability checks"))
    add_common(sub.add_parser("bound", help="simulate and compare against the envelope"))
    add_common(sub.add_parser("thresholds", help="verified dwell/step/contraction thresholds"))
    rep = sub.add_parser("reproduce-example", help="rebuild the builtin example artifacts")
    add_common(rep)
    rep.add_argument("--node-spacing", type=float, default=None)
    rep.add_argument("--order", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "certify":
            return cmd_certify(_load_config(args))
        if args.command == "bound":
            return cmd_bound(_load_config(args))
        if args.command == "thresholds":
            return cmd_thresholds(_load_config(args))
        if args.command == "reproduce-example":
            cfg = _load_config(args)
            return cmd_reproduce_example(
                cfg.out_dir,
                args.node_spacing if args.node_spacing is not None else cfg.node_spacing,
                args.order if args.order is not None else cfg.order,
                horizon_fig1=cfg.horizon,
                delta_fig1=cfg.delta,
            )
        parser.error(f"unknown command {args.command!r}")
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except (MinimalityError, EquivalenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_EQUIVALENCE
    except StabilityError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_STABILITY
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
