"""Command line front end: ``python -m gamurn <command> ...``.

Exit status is 0 on success, 2 when ``equivalence`` rejects a simulator and
1 on any error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import GamUrnError
from .gam import GamConfig, Schedule, simulate
from .weights import WeightScheme, classify_phase

_FAMILIES = "power:GAMMA, linear, constant[:C], exponential[:BASE], group_exponential"


def parse_scheme(text: str) -> WeightScheme:
    """``power:2``-style shorthand, an inline JSON object, or a path to a JSON file."""
    text = text.strip()
    if text.startswith("{"):
        return WeightScheme.from_json(text)
    if Path(text).is_file():
        return WeightScheme.from_json(Path(text).read_text())
    name, _, arg = text.partition(":")
    name = name.lower().replace("-", "_")
    if name == "power":
        return WeightScheme.power(float(arg))
    if name == "linear":
        return WeightScheme.linear()
    if name == "constant":
        return WeightScheme.constant(float(arg) if arg else 1.0)
    if name == "exponential":
        return WeightScheme.exponential(float(arg)) if arg else WeightScheme.exponential()
    if name in ("group_exponential", "groupexponential"):
        return WeightScheme.group_exponential()
    raise argparse.ArgumentTypeError(f"unknown scheme {text!r}; expected one of {_FAMILIES}")


def _emit(obj: dict, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, default=float)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _config(args) -> GamConfig:
    if args.config:
        d = json.loads(Path(args.config).read_text())
        d.setdefault("seed", args.seed)
        return GamConfig.from_dict(d)
    return GamConfig(args.scheme, Schedule.constant(args.p), args.seed)


def cmd_simulate(args) -> int:
    if args.model == "rum":
        from .urn import run_rum
        run = run_rum(args.scheme, args.k, range(args.horizon + 1), args.seed)
        if args.out:
            run.to_csv(args.out)
        _emit({"white": int(run.white[-1]), "red": int(run.red[-1]), "draws": args.horizon}, None)
        return 0
    cfg = _config(args)
    if args.model == "rubin":
        from .rubin import simulate_rubin
        tr = simulate_rubin(cfg, args.horizon)
        if args.out:
            tr.to_csv(args.out)
        _emit({"points": tr.n_points, "groups": tr.L, "sizes": tr.sizes.tolist()[:50]}, None)
        return 0
    snaps = args.snapshots or []
    traj = simulate(cfg, args.horizon, snapshot_at=snaps, sampler=args.sampler)
    if args.out:
        traj.to_csv(args.out)
    st = traj.final
    _emit({"n": st.n, "groups": st.L, "leader": st.leader,
           "largest": sorted(st.sizes.tolist(), reverse=True)[:10]}, None)
    return 0


def cmd_phase(args) -> int:
    _emit(classify_phase(args.scheme, args.p).to_dict(), args.out)
    return 0


def cmd_bound(args) -> int:
    from . import bounds, urn
    if args.which == "estur":
        _emit(urn.estur_bound(args.scheme, args.k, args.tol).to_dict(), args.out)
        return 0
    inputs = bounds.BoundInputs(args.scheme, args.p, args.tol)
    rs = args.r or [2.0]
    Ms = args.M or [10.0]
    if args.which == "lead-tail":
        res = bounds.lead_tail_grid(inputs, args.n, rs, Ms, args.samples, args.seed)
        _emit(res.to_dict(), args.out)
    else:
        val = bounds.lead_lower_bound(inputs, rs, Ms, args.samples, args.seed)
        _emit({"lead_lower_bound": val, "inputs": inputs.to_dict(), "r": rs, "M": Ms}, args.out)
    return 0


def cmd_experiment(args) -> int:
    from .harness import ExperimentSpec, run
    spec = ExperimentSpec.from_json(args.spec)
    if args.out:
        spec.output_path = args.out
    report = run(spec, workers=args.workers)
    print(json.dumps(report.aggregates, indent=2, default=float))
    return 0


def cmd_equivalence(args) -> int:
    from .harness import ExperimentSpec, Kind, run
    cfg = _config(args)
    ok = True
    result = {}
    for sim in ("sequential", "rubin"):
        out = f"{args.out}_{sim}" if args.out else None
        spec = ExperimentSpec(Kind.LABEL_LAW_EQUIVALENCE, cfg.to_dict(), [args.prefix],
                              args.replicates, args.seed, out,
                              {"simulator": sim, "alpha": args.alpha}, args.workers)
        agg = run(spec).aggregates
        result[sim] = agg["chi_square"] | {"passed": agg["passed"]}
        ok &= bool(agg["passed"])
    print(json.dumps(result, indent=2))
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--workers", type=int, default=1, help="replicate worker processes")
    common.add_argument("--out", default=None, help="output file (or report path prefix)")

    ap = argparse.ArgumentParser(prog="gamurn", parents=[common],
                                 description="Attachment models, reinforced urns and their bounds.")
    sub = ap.add_subparsers(dest="command", required=True)

    def scheme_args(p, default="power:2"):
        p.add_argument("--scheme", type=parse_scheme, default=parse_scheme(default),
                       help=f"weight scheme ({_FAMILIES}, or JSON)")
        p.add_argument("--p", type=float, default=0.5, help="new-group probability")

    s = sub.add_parser("simulate", parents=[common], help="one GAM, embedded or urn trajectory")
    scheme_args(s)
    s.add_argument("--model", choices=["gam", "rubin", "rum"], default="gam")
    s.add_argument("--config", help="GamConfig JSON file (overrides --scheme/--p)")
    s.add_argument("--horizon", type=int, default=10_000)
    s.add_argument("--snapshots", type=int, nargs="*")
    s.add_argument("--sampler", choices=["tree", "gumbel", "linear"], default="tree")
    s.add_argument("--k", type=int, default=1, help="initial white balls for rum")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("phase", parents=[common], help="classify the phase of a scheme")
    scheme_args(s)
    s.set_defaults(func=cmd_phase)

    s = sub.add_parser("bound", parents=[common], help="evaluate a bound as JSON")
    s.add_argument("which", choices=["estur", "lead-tail", "lead-lower"])
    scheme_args(s)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--r", type=float, nargs="*")
    s.add_argument("--M", type=float, nargs="*")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("experiment", parents=[common], help="run an ExperimentSpec JSON file")
    s.add_argument("spec")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("equivalence", parents=[common],
                       help="label-law test of both simulators against exact enumeration")
    scheme_args(s)
    s.add_argument("--config", help="GamConfig JSON file (overrides --scheme/--p)")
    s.add_argument("--prefix", type=int, default=4)
    s.add_argument("--replicates", type=int, default=100_000)
    s.add_argument("--alpha", type=float, default=0.01)
    s.set_defaults(func=cmd_equivalence)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return int(args.func(args))
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    except (GamUrnError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
