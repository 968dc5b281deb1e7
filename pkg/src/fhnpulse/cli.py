"""Command-line surface tying the workflows together.

Subcommands: ``minimize`` (one speed), ``scan`` (the J(c) curve),
``find-speed`` (scan plus root refinement), ``stability`` (co-moving
parabolic test from a checkpoint), ``eta`` (fast-pulse ratio report),
``verify`` (oracle suite).  Flags override config keys.  Exit codes:
0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import io as fio
from .descent import TraceRecord, cold_start_guess, minimize
from .errors import (
    BlowUpError,
    BracketLossError,
    CheckpointError,
    ConfigError,
    DomainTruncationError,
    GridMismatchError,
    NewtonDivergenceError,
    SolverFailureError,
)
from .model import ModelParams
from .parabolic import run_stability_test
from .speeds import eta_ratio, recheck_root_cold, refine_root, scan_energy_curve
from .verify import run_default_suite

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (
    SolverFailureError,
    BlowUpError,
    NewtonDivergenceError,
    BracketLossError,
    DomainTruncationError,
    GridMismatchError,
)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="INI config file")
    p.add_argument("--d", type=float, help="activator diffusivity ratio")
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--c", type=float, help="wave-speed parameter")
    p.add_argument("--dim", type=int, choices=(1, 2))
    p.add_argument("--L", type=float, help="strip half-width (dim=2)")
    p.add_argument("--h", type=float, help="grid spacing")
    p.add_argument("--domain-length", dest="domain_length", type=float)
    p.add_argument("--n-y", dest="n_y", type=int)
    p.add_argument("--alpha-init", dest="alpha_init", type=float)
    p.add_argument("--delta1", type=float)
    p.add_argument("--delta2", type=float)
    p.add_argument("--delta3", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--out", type=Path, help="output directory")


def _config_from_args(args) -> fio.RunConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "d",
            "gamma",
            "beta",
            "c",
            "dim",
            "L",
            "h",
            "domain_length",
            "n_y",
            "alpha_init",
            "delta1",
            "delta2",
            "delta3",
            "max_iters",
            "c_start",
            "c_end",
            "dc",
        )
    }
    if args.config is not None:
        cfg = fio.load_config(args.config, overrides)
    else:
        import tempfile

        # build a config purely from flags by validating against an empty file
        with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as fh:
            fh.write("[model]\n")
            empty = fh.name
        cfg = fio.load_config(empty, overrides)
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
        cfg.checkpoint_dir = args.out / "checkpoints"
    return cfg


def _cmd_minimize(args) -> int:
    cfg = _config_from_args(args)
    if args.c is None and cfg.model.c is None:
        raise ConfigError("minimize needs a wave speed (--c or model.c)", key="c")
    params = cfg.model
    if args.from_checkpoint:
        w0, _meta = fio.load_checkpoint(args.from_checkpoint)
        grid = w0.grid
    else:
        grid = cfg.grid.build(params)
        w0 = cold_start_guess(grid)
    trace_rows = []

    def on_step(rec: TraceRecord):
        trace_rows.append(rec)

    result = minimize(w0, params, cfg.descent, callback=on_step if args.trace else None)
    print(
        f"c={params.c:g} J={result.energy.total:.10e} "
        f"(gradient={result.energy.gradient_term:.6e} nonlocal={result.energy.nonlocal_term:.6e} "
        f"potential={result.energy.potential_term:.6e}) iters={result.iters} "
        f"converged={result.converged} reason={result.reason}"
    )
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    ck = fio.save_checkpoint(
        result.w,
        {
            "c": params.c,
            "d": params.d,
            "gamma": params.gamma,
            "beta": params.beta,
            "J": result.energy.total,
        },
        cfg.checkpoint_dir / f"minimizer_c{params.c:g}.ckpt",
    )
    fio.export_profile(result.w, out / f"profile_c{params.c:g}.csv")
    print(f"checkpoint: {ck}")
    if args.trace:
        with open(out / "trace.csv", "w") as fh:
            fh.write("iter,J,gradient,nonlocal,potential,alpha1,backtracks,step_sup\n")
            for r in trace_rows:
                fh.write(
                    f"{r.iter},{r.total!r},{r.gradient_term!r},{r.nonlocal_term!r},"
                    f"{r.potential_term!r},{r.alpha1!r},{r.backtracks},{r.step_sup!r}\n"
                )
        print(f"trace: {out / 'trace.csv'}")
    if not result.converged:
        return EXIT_NUMERICAL
    return EXIT_OK


def _scan_from_config(cfg: fio.RunConfig):
    if cfg.c_start is None or cfg.c_end is None:
        raise ConfigError("scan needs c_start and c_end", key="c_start")
    return scan_energy_curve(cfg.model, cfg.c_start, cfg.c_end, cfg.dc, cfg.scan)


def _cmd_scan(args) -> int:
    cfg = _config_from_args(args)
    scan = _scan_from_config(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.save_profiles:
        for s in scan.samples:
            if s.profile is not None:
                s.checkpoint = str(
                    fio.save_checkpoint(
                        s.profile,
                        {
                            "c": s.c,
                            "d": cfg.model.d,
                            "gamma": cfg.model.gamma,
                            "beta": cfg.model.beta,
                            "J": s.J,
                        },
                        cfg.checkpoint_dir / f"scan_c{s.c:.6g}.ckpt",
                    )
                )
    path = fio.export_scan(scan, out / "scan.csv")
    n_brackets = len(scan.brackets())
    print(
        f"scan: {len(scan.samples)} samples, {n_brackets} sign-change bracket(s), "
        f"aborted={scan.aborted} -> {path}"
    )
    for lo, hi in scan.brackets():
        print(f"bracket: [{lo.c:.6g}, {hi.c:.6g}]  J=({lo.J:.3e}, {hi.J:.3e})")
    return EXIT_NUMERICAL if scan.aborted else EXIT_OK


def _cmd_find_speed(args) -> int:
    cfg = _config_from_args(args)
    scan = _scan_from_config(cfg)
    brackets = scan.brackets()
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    fio.export_scan(scan, out / "scan.csv")
    if not brackets:
        print("no sign change found in the scanned window")
        return EXIT_NUMERICAL
    roots = []
    for lo, hi in brackets:
        root = refine_root((lo, hi), cfg.model, cfg.scan)
        if args.recheck:
            root = recheck_root_cold(root, cfg.model, cfg.scan)
        roots.append(root)
        print(
            f"root: c={root.c_root:.6g} J={root.J_at_root:.3e} evals={root.iterations}"
            + (" (continuation-only)" if root.continuation_only else "")
        )
        if root.profile is not None:
            fio.save_checkpoint(
                root.profile,
                {
                    "c": root.c_root,
                    "d": cfg.model.d,
                    "gamma": cfg.model.gamma,
                    "beta": cfg.model.beta,
                    "J": root.J_at_root,
                },
                cfg.checkpoint_dir / f"root_c{root.c_root:.6g}.ckpt",
            )
    fio.export_report(
        [
            {
                "c_root": r.c_root,
                "J_at_root": r.J_at_root,
                "iterations": r.iterations,
                "continuation_only": r.continuation_only,
            }
            for r in roots
        ],
        out / "roots.json",
    )
    return EXIT_OK


def _cmd_stability(args) -> int:
    cfg = _config_from_args(args)
    profile, meta = fio.load_checkpoint(args.checkpoint)
    params = cfg.model
    for key in ("c", "d", "gamma", "beta"):
        header = meta.get(key)
        cli_val = getattr(params, key)
        if header is not None and abs(header - cli_val) > 1e-12 * max(1.0, abs(header)):
            if getattr(args, key if key != "c" else "c", None) is None and args.config is None:
                # no explicit CLI value: adopt the checkpoint's provenance
                params = dataclasses.replace(params, **{key: header})
            else:
                print(
                    f"warning: checkpoint {key}={header:g} differs from configured "
                    f"{cli_val:g}; header kept for provenance, configured value used"
                )
    report, initial, final = run_stability_test(
        profile, params, distance=args.distance, threshold=args.threshold
    )
    print(
        f"verdict={report.verdict} sup_deviation={report.sup_deviation:.4e} "
        f"threshold={report.threshold:.4e} distance={report.distance_propagated:.6g}"
    )
    out = cfg.output_dir
    fio.export_report(report, out / "stability.json")
    fio.export_profile(initial.u, out / "stability_initial.csv")
    fio.export_profile(final.u, out / "stability_final.csv")
    return EXIT_OK


def _cmd_eta(args) -> int:
    cfg = _config_from_args(args)
    value = eta_ratio(args.c0, cfg.model)
    print(f"eta = 2*d*c0^2/(1-2*beta)^2 = {value:.6g} (c0={args.c0:g}, d={cfg.model.d:g})")
    fio.export_report(
        {"c0": args.c0, "d": cfg.model.d, "beta": cfg.model.beta, "eta": value},
        cfg.output_dir / "eta.json",
    )
    return EXIT_OK


def _cmd_verify(args) -> int:
    reports = run_default_suite()
    failed = 0
    for rep in reports:
        print(rep.line())
        if not rep.passed:
            failed += 1
    if failed:
        print(f"{failed} verification check(s) failed")
        return EXIT_NUMERICAL
    print(f"all {len(reports)} verification checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhnpulse",
        description="Traveling pulses of the FitzHugh-Nagumo system by energy descent",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minimize", help="minimize the energy at one wave speed")
    _add_common(p)
    p.add_argument("--from-checkpoint", type=Path, help="warm start from a checkpoint")
    p.add_argument("--trace", action="store_true", help="write a per-iteration trace")
    p.set_defaults(fn=_cmd_minimize)

    p = sub.add_parser("scan", help="sample the minimal energy across speeds")
    _add_common(p)
    p.add_argument("--c-start", dest="c_start", type=float)
    p.add_argument("--c-end", dest="c_end", type=float)
    p.add_argument("--dc", type=float)
    p.add_argument("--save-profiles", action="store_true")
    p.set_defaults(fn=_cmd_scan)

    p = sub.add_parser("find-speed", help="scan, then refine every sign change")
    _add_common(p)
    p.add_argument("--c-start", dest="c_start", type=float)
    p.add_argument("--c-end", dest="c_end", type=float)
    p.add_argument("--dc", type=float)
    p.add_argument("--recheck", action="store_true", help="cold-start recheck of each root")
    p.set_defaults(fn=_cmd_find_speed)

    p = sub.add_parser("stability", help="co-moving parabolic test of a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--distance", type=float, help="propagation distance (default: one domain)")
    p.add_argument("--threshold", type=float, help="absolute deviation threshold")
    p.set_defaults(fn=_cmd_stability)

    p = sub.add_parser("eta", help="fast-pulse asymptotic ratio")
    _add_common(p)
    p.add_argument("--c0", type=float, required=True)
    p.set_defaults(fn=_cmd_eta)

    p = sub.add_parser("verify", help="run the oracle suite")
    p.set_defaults(fn=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
