"""Command-line entry point: catqec <command> [options]."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .errors import CatQecError, ConfigError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, "arguments")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", "values") from None


def _write_csv(rows: list[dict], out) -> None:
    if not rows:
        return
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _params_from(args):
    from .config import ExperimentConfig, config_from_mapping, load_config

    base = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}", item)
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return config_from_mapping(overrides, base) if overrides else base


# ------------------------------------------------------------------ commands

def cmd_run_qec(args) -> int:
    from .config import config_from_mapping
    from .experiments import run_lifetime_sweep

    config = _params_from(args)
    if args.seed is None and config.seed is None:
        raise ConfigError("--seed is required when writing a run archive", "seed")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.shots is not None:
        changes["shots"] = args.shots
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    if args.plant is not None:
        changes["plant"] = args.plant
    if changes:
        config = config_from_mapping({k: str(v) for k, v in changes.items()}, config)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1", "threads")
    archive = run_lifetime_sweep(config, threads=args.threads)
    out = archive.write()
    summary = {"output_dir": str(out), "fits": archive.fits}
    post = archive.curves.get("postselected")
    if post:
        summary["acceptance"] = {str(p.T): p.acceptance for p in post}
    print(json.dumps(summary, indent=1))
    return 0


def cmd_optimize(args) -> int:
    from .analytics import optimize_cadence

    config = _params_from(args)
    if args.times:
        times = _floats(args.times)
    else:
        if args.t_step <= 0:
            raise ConfigError("--t-step must be positive", "t_step")
        times = list(np.arange(args.t_min, args.t_max + 0.5 * args.t_step, args.t_step))
    times = [t for t in times if t > 0]
    if not times:
        raise ConfigError("empty storage-time range", "times")
    nbar0 = args.nbar0 if args.nbar0 is not None else config.nbar0
    rows = [optimize_cadence(float(T), nbar0, config.params, dephasing=args.dephasing,
                             kerr_aware=args.kerr_aware).to_row() for T in times]
    _write_csv(rows, args.out)
    return 0


def cmd_bayes(args) -> int:
    from .analytics import acceptance_probability, bayes_records

    if args.S < 1:
        raise ConfigError("S must be at least 1", "S")
    table = bayes_records(args.nbar0, args.t_w, args.S, args.p_g, args.p_e, tau_s=args.tau_s,
                          flip_model=args.flip_model)
    _write_csv(table.to_rows(), args.out)
    if args.summary:
        info = {"first_step": table.first_step,
                "by_error_count": {str(k): v for k, v in table.probability_by_count().items()},
                "acceptance": acceptance_probability(table)}
        sys.stderr.write(json.dumps(info) + "\n")
    return 0


def cmd_budget(args) -> int:
    from .analytics import loss_budget

    config = _params_from(args)
    t_values = _floats(args.t_M)
    if not t_values:
        raise ConfigError("no t_M values given", "t_M")
    rows = []
    for t in t_values:
        if t <= 0:
            raise ConfigError(f"t_M must be positive, got {t}", "t_M")
        rows.extend(loss_budget(config.params, t, nbar=args.nbar, strategy=args.strategy).to_rows())
    _write_csv(rows, args.out)
    return 0


def _state_from_args(args):
    from .fock import cat_state, coherent_state, fock_state

    alpha = complex(args.alpha_re, args.alpha_im)
    if args.state == "vacuum":
        return fock_state(0, args.dim)
    if args.state == "fock":
        if not 0 <= args.n < args.dim:
            raise ConfigError("Fock level must lie inside the space", "n")
        return fock_state(args.n, args.dim)
    if args.state == "coherent":
        return coherent_state(alpha, args.dim)
    if args.state in ("cat-even", "cat-odd"):
        return cat_state(alpha, 1 if args.state == "cat-even" else -1, args.dim)
    raise ConfigError(f"unknown state {args.state!r}", "state")


def cmd_wigner(args) -> int:
    from .fock import safe_disk_radius, wigner, wigner_csv_rows

    if args.points < 2:
        raise ConfigError("need at least 2 points per axis", "points")
    limit = safe_disk_radius(args.dim)
    # the grid corners must stay inside the disk where truncation is accurate
    if args.extent * np.sqrt(2.0) > limit:
        raise ConfigError(f"grid corner |beta|={args.extent * np.sqrt(2):.2f} exceeds the "
                          f"safe radius {limit:.2f} for dim={args.dim}", "extent")
    psi = _state_from_args(args)
    axis = np.linspace(-args.extent, args.extent, args.points)
    grid = axis[None, :] + 1j * axis[:, None]
    values = wigner(psi, grid)
    rows = [{"re": r, "im": i, "W": w} for r, i, w in wigner_csv_rows(grid, values)]
    _write_csv(rows, args.out)
    return 0


def cmd_tomo(args) -> int:
    from .tomography import bloch_from_outcomes, chi_from_cardinals, frame_optimize, process_fidelity

    data = json.loads(Path(args.input).read_text())
    bloch = {}
    for key, value in data.items():
        if isinstance(value, dict):
            bloch[key] = bloch_from_outcomes(value)
        else:
            bloch[key] = np.asarray(value, dtype=float)
    chi = chi_from_cardinals(bloch, on_unphysical="raise" if args.strict else "report")
    out = {"X00": process_fidelity(chi), "chi": chi.to_json(), "min_eigenvalue": chi.min_eigenvalue}
    if args.frame_optimize:
        rot, chi_rot = frame_optimize(bloch)
        # a rotation vector has no gimbal-lock ambiguity near the identity
        out["frame"] = {"rotvec_deg": list(rot.as_rotvec(degrees=True)),
                        "angle_deg": float(np.degrees(rot.magnitude())),
                        "X00": process_fidelity(chi_rot), "chi": chi_rot.to_json()}
    print(json.dumps(out, indent=1))
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="catqec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run-qec", help="lifetime sweep of all storage schemes")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output-dir")
    p.add_argument("--plant", choices=("phenomenological", "full"))
    p.set_defaults(func=cmd_run_qec)

    p = sub.add_parser("optimize", help="optimal cadence versus storage time (CSV)")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--t-min", type=float, default=10.0)
    p.add_argument("--t-max", type=float, default=200.0)
    p.add_argument("--t-step", type=float, default=10.0)
    p.add_argument("--times")
    p.add_argument("--nbar0", type=float)
    p.add_argument("--dephasing", choices=("T2", "Tphi"), default="T2")
    p.add_argument("--kerr-aware", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bayes", help="record probabilities and confidences (CSV)")
    p.add_argument("--S", type=int, default=2)
    p.add_argument("--nbar0", type=float, default=3.0)
    p.add_argument("--t-w", type=float, default=13.8)
    p.add_argument("--p-g", type=float, default=0.983)
    p.add_argument("--p-e", type=float, default=0.971)
    p.add_argument("--tau-s", type=float, default=250.0)
    p.add_argument("--flip-model", choices=("poisson", "parity"), default="poisson")
    p.add_argument("--summary", action="store_true", help="also print a JSON summary to stderr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("budget", help="per-channel lifetime gains (CSV)")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--t-M", default="1,21")
    p.add_argument("--nbar", type=float, default=2.0)
    p.add_argument("--strategy", choices=("fast", "optimal"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("wigner", help="Wigner function on a square grid (CSV)")
    p.add_argument("--state", default="vacuum",
                   choices=("vacuum", "fock", "coherent", "cat-even", "cat-odd"))
    p.add_argument("--alpha-re", type=float, default=0.0)
    p.add_argument("--alpha-im", type=float, default=0.0)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--extent", type=float, default=2.5)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--out")
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("tomo", help="process matrix from cardinal Bloch vectors or counts (JSON)")
    p.add_argument("--input", required=True)
    p.add_argument("--frame-optimize", action="store_true")
    p.add_argument("--strict", action="store_true", help="fail on a non-PSD process matrix")
    p.set_defaults(func=cmd_tomo)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CatQecError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "key", None) is not None:
            err["key"] = exc.key
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
