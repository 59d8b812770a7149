"""Command-line front end: design -> pattern -> verify -> simulate.

Exit codes:
    0  success
    1  usage or I/O error
    2  infeasible target channel
    3  solver did not converge
    4  pattern reconstruction failed
    5  verification failed
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channels import ChannelError, ChannelSpec, apply_channel, gram_matrix, load_channel_spec
from .experiment import (
    InputState,
    MonteCarloConfig,
    monte_carlo,
    sampled_channel,
    trajectory,
    write_trajectory_csv,
)
from .metasurface import (
    DEFAULT_PERIOD_MM,
    ReconstructionError,
    UnresolvableJump,
    export_pattern,
    import_pattern,
    reconstruction_errors,
)
from .pauli import fidelity, pure_density
from .pipeline import Design, DesignFileError, design_channel, design_pattern
from .solver import InfeasibleTarget, NonConvergence, SolverConfig, field_moments

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGENCE = 3
EXIT_RECONSTRUCTION = 4
EXIT_VERIFY = 5

CONFIG_ENV = "LATTICENOISE_CONFIG"
DEFAULT_P_LIST = (0.0, 0.125, 0.25, 0.5)
CHI_TOL = 1e-4
PROCESS_FIDELITY_MIN = 0.9999
RECON_TOL = 1e-8

log = logging.getLogger("latticenoise")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for infeasibility
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _defaults():
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {CONFIG_ENV}={path}: {exc}") from exc


def _solver_config(args, defaults):
    cfg = SolverConfig.from_json(defaults.get("solver", {}))
    overrides = {
        "n_max": args.n_max,
        "grid_q": args.grid_q,
        "max_outer_iters": args.max_iters,
        "convergence_tol": args.tol,
        "seed": args.seed,
        "restarts": args.restarts,
        "inner_method": args.inner,
    }
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def _mc_config(args, defaults):
    base = defaults.get("monte_carlo", {})
    return MonteCarloConfig(
        realizations=args.trials if args.trials is not None else base.get("realizations", 100),
        sigma_rel=args.sigma if args.sigma is not None else base.get("sigma_rel", 0.05),
        seed=args.seed if args.seed is not None else base.get("seed", 0),
    )


def _channel_spec(args, required=True):
    if args.spec:
        spec = load_channel_spec(args.spec)
        if args.channel and args.channel.replace("-", "_") not in ("custom", spec.kind):
            raise UsageError(f"--channel {args.channel} conflicts with spec file kind {spec.kind}")
        return spec
    if not args.channel:
        if required:
            raise UsageError("give --channel (with --p) or --spec")
        return None
    if args.channel.replace("-", "_") == "custom":
        raise UsageError("--channel custom needs --spec FILE")
    if args.p is None:
        raise UsageError(f"--channel {args.channel} needs --p")
    return ChannelSpec(args.channel, p=args.p)


def _write_manifest(command, output, channel=None, config=None, seed=None, started=None, extra=None):
    manifest = {
        "command": command,
        "channel": channel,
        "config": config,
        "outputs": [str(output)],
        "version": __version__,
        "seed": seed,
        "started": started,
        "finished": _now(),
    }
    if extra:
        manifest.update(extra)
    path = Path(str(output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _read_manifest(output):
    path = Path(str(output) + ".manifest.json")
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _csv_list(text, cast=str):
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    return [cast(t) for t in items]


def cmd_design(args):
    started = _now()
    defaults = _defaults()
    spec = _channel_spec(args)
    cfg = _solver_config(args, defaults)
    try:
        design = design_channel(spec, cfg)
    except InfeasibleTarget as exc:
        print(f"infeasible channel {spec.label}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NonConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    out = Path(args.output or f"design_{spec.label}.json")
    design.save(out)
    _write_manifest("design", out, spec.to_json(), cfg.to_json(), cfg.seed, started)
    r = design.report
    print(
        f"{out}: f1={r.f1_final:.3e} f2={r.f2_final:.3e} "
        f"iters={r.outer_iters} restarts={r.restarts_used}"
    )
    return EXIT_OK


def cmd_pattern(args):
    started = _now()
    design = Design.load(args.design)
    period = args.period_mm if args.period_mm is not None else _defaults().get(
        "period_mm", DEFAULT_PERIOD_MM
    )
    try:
        profile = design_pattern(design, period, args.grid)
    except (UnresolvableJump, ReconstructionError) as exc:
        print(f"pattern extraction failed: {exc}", file=sys.stderr)
        return EXIT_RECONSTRUCTION
    field = design.field(args.grid)
    recon = float(reconstruction_errors(profile, field.values).max())
    out = Path(args.output or Path(args.design).with_suffix(".pattern.csv"))
    export_pattern(profile, out)
    _write_manifest(
        "pattern",
        out,
        design.spec.to_json(),
        {"period_mm": period, "grid": len(profile)},
        design.config.seed,
        started,
        {"design": str(args.design), "reconstruction_max": recon},
    )
    print(f"{out}: {len(profile)} samples, period {period} mm, reconstruction max {recon:.2e}")
    return EXIT_OK


def verify_design(design, spec, trials=20, seed=0):
    """Check a design against a channel; returns a JSON-ready report."""
    field = design.field()
    target = gram_matrix(spec.kraus())
    chi_err = float(np.abs(field_moments(field) - target).max())
    rng = np.random.default_rng(seed)
    fids = []
    for _ in range(trials):
        ket = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        rho = pure_density(ket)
        fids.append(fidelity(apply_channel(spec.kraus(), rho), sampled_channel(field.values, rho)))
    try:
        profile = design_pattern(design)
        recon = float(reconstruction_errors(profile, field.values).max())
    except (UnresolvableJump, ReconstructionError):
        recon = math.inf
    report = {
        "channel": spec.to_json(),
        "chi_max_error": chi_err,
        "process_fidelity_min": float(min(fids)),
        "reconstruction_max": recon,
        "thresholds": {
            "chi_max_error": CHI_TOL,
            "process_fidelity_min": PROCESS_FIDELITY_MIN,
            "reconstruction_max": RECON_TOL,
        },
    }
    report["passed"] = (
        chi_err <= CHI_TOL and min(fids) >= PROCESS_FIDELITY_MIN and recon <= RECON_TOL
    )
    return report


def cmd_verify(args):
    started = _now()
    design = Design.load(args.design)
    spec = _channel_spec(args, required=False) or design.spec
    report = verify_design(design, spec, args.trials, args.seed or 0)
    print(f"chi max error        {report['chi_max_error']:.3e}  (<= {CHI_TOL:g})")
    print(
        f"process fidelity min {report['process_fidelity_min']:.10f}  "
        f"(>= {PROCESS_FIDELITY_MIN:g})"
    )
    print(f"reconstruction max   {report['reconstruction_max']:.3e}  (<= {RECON_TOL:g})")
    print("PASS" if report["passed"] else "FAIL")
    out = Path(args.output or Path(args.design).with_suffix(".verify.json"))
    out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _write_manifest("verify", out, spec.to_json(), None, args.seed, started,
                    {"design": str(args.design)})
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_simulate(args):
    started = _now()
    defaults = _defaults()
    mc = _mc_config(args, defaults)
    inputs = _csv_list(args.input)
    if not inputs:
        raise UsageError("--input needs at least one state")
    override = _channel_spec(args, required=False)
    entries = []
    for path in args.patterns:
        profile = import_pattern(path)
        spec = override
        if spec is None:
            manifest = _read_manifest(path)
            if manifest and manifest.get("channel"):
                spec = ChannelSpec.from_json(manifest["channel"])
        kraus = spec.kraus() if spec else None
        label = spec.label if spec else Path(path).stem
        p = spec.p if spec and spec.p is not None else float("nan")
        for inp in inputs:
            entries.append(monte_carlo(profile, InputState(inp), mc, kraus, label, p))
    out = Path(args.output or "simulation.csv")
    write_trajectory_csv(entries, out)
    _write_manifest(
        "simulate", out, override.to_json() if override else None,
        {"realizations": mc.realizations, "sigma_rel": mc.sigma_rel},
        mc.seed, started, {"patterns": [str(p) for p in args.patterns]},
    )
    print(f"{out}: {len(entries)} rows")
    return EXIT_OK


def cmd_trajectory(args):
    started = _now()
    defaults = _defaults()
    kinds = _csv_list(args.channel)
    if kinds == ["all"]:
        kinds = ["phase_flip", "bit_flip", "bit_phase_flip", "depolarizing"]
    p_values = _csv_list(args.p_list, float)
    inputs = _csv_list(args.inputs)
    if not kinds or not p_values or not inputs:
        raise UsageError("--channel, --p-list and --inputs must be non-empty")
    mc = _mc_config(args, defaults)
    solver_cfg = _solver_config(args, defaults)
    period = args.period_mm or defaults.get("period_mm", DEFAULT_PERIOD_MM)
    entries, failures = [], {}
    for kind in kinds:
        res = trajectory(kind, p_values, [InputState(i) for i in inputs], mc, solver_cfg, period)
        entries.extend(res.entries)
        failures.update({f"{kind}:p={p:g}": msg for p, msg in res.failures.items()})
    out = Path(args.output or "trajectory.csv")
    write_trajectory_csv(entries, out)
    plot = Path(args.plot_data or out.with_suffix(".plot.json"))
    plot.write_text(json.dumps(_plot_data(entries), indent=2) + "\n", encoding="utf-8")
    config = {
        "solver": solver_cfg.to_json(),
        "monte_carlo": {"realizations": mc.realizations, "sigma_rel": mc.sigma_rel},
        "p_list": p_values,
        "inputs": inputs,
    }
    _write_manifest("trajectory", out, {"kinds": kinds}, config, mc.seed, started,
                    {"failures": failures})
    _write_manifest("trajectory", plot, {"kinds": kinds}, config, mc.seed, started,
                    {"source": str(out)})
    print(f"{out}: {len(entries)} rows; plot data in {plot}")
    for key, msg in failures.items():
        print(f"failed {key}: {msg}", file=sys.stderr)
    return EXIT_NONCONVERGENCE if failures else EXIT_OK


def _plot_data(entries):
    """Bloch trajectories grouped by (channel, input), ordered by p."""
    groups = {}
    for e in entries:
        g = groups.setdefault(f"{e.channel}/{e.input}", {
            "channel": e.channel, "input": e.input,
            "p": [], "theory": [], "simulated": [], "std": [], "fidelity": [],
        })
        g["p"].append(e.p)
        g["theory"].append(e.theory.tolist())
        g["simulated"].append(e.mean.tolist())
        g["std"].append(e.std.tolist())
        g["fidelity"].append(e.fidelity)
    return list(groups.values())


def _add_channel_flags(p, channel_help="target channel kind"):
    p.add_argument("--channel", help=channel_help)
    p.add_argument("--p", type=float, help="coupling strength in [0, 1]")
    p.add_argument("--spec", help="channel spec JSON file")


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--n-max", type=int, help="number of harmonics N (default 20)")
    g.add_argument("--grid-q", type=int, help="quasi-momentum samples Q (default 125)")
    g.add_argument("--max-iters", type=int, help="outer iterations T (default 200)")
    g.add_argument("--tol", type=float, help="coefficient-change tolerance (default 1e-12)")
    g.add_argument("--restarts", type=int, help="reseedings on failure (default 4)")
    g.add_argument("--inner", choices=("lm", "bfgs"), help="inner minimizer")


def _add_mc_flags(p):
    p.add_argument("--trials", type=int, help="Monte Carlo realizations (default 100)")
    p.add_argument("--sigma", type=float, help="relative perturbation std (default 0.05)")


def build_parser():
    parser = _Parser(prog="latticenoise", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="solve for the Fourier field of a channel")
    _add_channel_flags(p)
    _add_solver_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("pattern", help="extract the three optic-axis patterns")
    p.add_argument("design")
    p.add_argument("--period-mm", type=float)
    p.add_argument("--grid", type=int, help="samples per period (default: design grid)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("verify", help="check a design against a channel")
    p.add_argument("design")
    _add_channel_flags(p, "channel to check against (default: the design's own)")
    p.add_argument("--trials", type=int, default=20, help="random pure inputs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="virtual experiment on pattern files")
    p.add_argument("patterns", nargs="+")
    p.add_argument("--input", default="H,D,L", help="comma list of H, D, L")
    _add_channel_flags(p, "override the channel recorded with the pattern")
    _add_mc_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trajectory", help="end-to-end sweep over p")
    p.add_argument("--channel", required=True, help="comma list of kinds, or 'all'")
    p.add_argument("--p-list", default=",".join(str(v) for v in DEFAULT_P_LIST))
    p.add_argument("--inputs", default="H,D,L")
    p.add_argument("--period-mm", type=float)
    _add_mc_flags(p)
    _add_solver_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ChannelError, DesignFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
