"""``htdp`` command line: profile | calibrate | srs | moments | audit.

Results go to stdout as JSON (CSV for ``profile --format csv``). Validation
failures exit with status 2 and a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Sequence

from htdp import errors
from htdp.audit import mc_delta
from htdp.calibrate import calibrate_b
from htdp.design import design_from_json
from htdp.estimator import dataset_from_json, pairs_from_json
from htdp.gaussian_moments import conditional_moments
from htdp.laplace_profile import (
    delta_mixtures,
    extremal_pair_heuristic,
    extremal_pairs_all_units,
    json_number,
    pair_mixtures,
    profile,
    profile_to_csv,
    profile_to_json,
)
from htdp.srs_binary import (
    SrsBinaryConfig,
    delta_srs_b0_witness,
    delta_srs_laplace,
    epsilon_srs_b0,
    epsilon_srs_b0_delta0,
)

SCHEMA = "htdp/1"


class UsageError(errors.HTDPError):
    code = "UsageError"


class UnknownSubcommand(errors.HTDPError):
    code = "UnknownSubcommand"


class FileNotFound(errors.HTDPError):
    code = "FileNotFound"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "invalid choice" in message and "command" in message:
            raise UnknownSubcommand(message)
        raise UsageError(message)


def parse_eps_grid(text: str) -> list[float]:
    """``a:b:step`` (a, a+step, ... up to b) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise UsageError(f"grid step must be positive: {text!r}")
            values = []
            k = 0
            while start + k * step < stop + step / 2:
                values.append(start + k * step)
                k += 1
            return values
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad eps grid {text!r}: {exc}") from exc


def _load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise FileNotFound(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise errors.SchemaViolation(f"{path} is not valid JSON: {exc}") from exc


def _pairs(args, d):
    if args.pairs:
        return pairs_from_json(_load_json(args.pairs))
    if args.bounds:
        bounds = _load_json(args.bounds)
        try:
            bounds = {k: float(bounds[k]) for k in ("mx", "Mx", "mt", "Mt")}
        except (KeyError, TypeError, ValueError) as exc:
            raise errors.SchemaViolation(f"bounds file needs mx, Mx, mt, Mt: {exc!r}") from exc
        if args.unit is not None:
            return extremal_pair_heuristic(d, bounds, args.unit, args.staircase)
        return extremal_pairs_all_units(d, bounds, args.staircase)
    raise UsageError("give --pairs, or --bounds for extremal candidate pairs")


def _cmd_profile(args) -> str:
    d = design_from_json(_load_json(args.design))
    prof = profile(d, _pairs(args, d), args.b, parse_eps_grid(args.eps_grid), jobs=args.jobs)
    if args.format == "csv":
        return profile_to_csv(prof)
    return _dump(profile_to_json(prof))


def _cmd_calibrate(args) -> str:
    d = design_from_json(_load_json(args.design))
    result = calibrate_b(d, _pairs(args, d), args.eps, args.delta, jobs=args.jobs)
    return _dump(result.to_json())


def _cmd_srs(args) -> str:
    cfg = SrsBinaryConfig(args.N, args.n, args.mt, args.Mt)
    out: dict[str, Any] = {"schema": SCHEMA}
    if args.query == "eps0":
        out["epsilon_at_delta0"] = json_number(epsilon_srs_b0_delta0(cfg))
    elif args.query == "delta":
        if args.eps is None:
            raise UsageError("--query delta needs --eps")
        if args.b:
            out["delta"] = delta_srs_laplace(cfg, args.eps, args.b)
        else:
            delta, t_from, t_to = delta_srs_b0_witness(cfg, args.eps)
            out.update(delta=delta, witness={"t_x": t_from, "t_xp": t_to})
        out.update(eps=args.eps, b=args.b)
    else:
        if args.delta is None:
            raise UsageError("--query eps needs --delta")
        out.update(epsilon=json_number(epsilon_srs_b0(cfg, args.delta)), delta=args.delta)
    return _dump(out)


def _cmd_moments(args) -> str:
    d = design_from_json(_load_json(args.design))
    x = dataset_from_json(_load_json(args.data))
    return _dump(conditional_moments(d, x, args.unit, allow_census=args.allow_census).to_json())


def _cmd_audit(args) -> str:
    d = design_from_json(_load_json(args.design))
    pairs = pairs_from_json(_load_json(args.pairs))
    if not 0 <= args.index < len(pairs):
        raise UsageError(f"--index {args.index} out of range for {len(pairs)} pairs")
    pair = pairs[args.index]
    if args.reverse:
        pair = pair.reversed()
    delta_hat, se = mc_delta(d, pair, args.b, args.eps, args.trials, args.seed, jobs=args.jobs)
    exact = delta_mixtures(*pair_mixtures(d, pair, args.b), args.eps)
    return _dump({"schema": SCHEMA, "delta_hat": delta_hat, "se": se, "delta_exact": exact,
                  "trials": args.trials, "seed": args.seed})


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="htdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, pairs_required=False):
        p.add_argument("--design", required=True, help="design JSON file")
        p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads")
        if pairs_required:
            p.add_argument("--pairs", required=True, help="adjacent pair(s) JSON file")
            return
        p.add_argument("--pairs", help="adjacent pair(s) JSON file")
        p.add_argument("--bounds", help="bounds JSON {mx, Mx, mt, Mt} for extremal pairs")
        p.add_argument("--unit", type=int, help="restrict extremal pairs to this unit")
        p.add_argument("--staircase", action="store_true",
                       help="also try mixed fills of the other units")

    p = sub.add_parser("profile", help="delta(eps) curve over adjacent pairs")
    common(p)
    p.add_argument("--b", type=float, default=0.0, help="Laplace scale (0 = no noise)")
    p.add_argument("--eps-grid", required=True, help="a:b:step or comma list")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("calibrate", help="smallest Laplace scale for a target (eps, delta)")
    common(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("srs", help="closed forms for SRS on binary data")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mt", type=int, required=True)
    p.add_argument("--Mt", type=int, required=True)
    p.add_argument("--query", choices=("eps0", "delta", "eps"), default="eps0")
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--b", type=float, default=0.0)
    p.set_defaults(func=_cmd_srs)

    p = sub.add_parser("moments", help="conditional-on-selection moments of the HT total")
    p.add_argument("--design", required=True)
    p.add_argument("--data", required=True, help="dataset JSON file")
    p.add_argument("--unit", type=int, required=True)
    p.add_argument("--allow-census", action="store_true", help="accept pi_i = 1")
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("audit", help="Monte-Carlo delta(eps, x, x') estimate")
    common(p, pairs_required=True)
    p.add_argument("--index", type=int, default=0, help="which pair in the file")
    p.add_argument("--reverse", action="store_true", help="audit (x', x) instead")
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_audit)
    return parser


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        stdout.write(args.func(args))
    except ValueError as exc:
        code = getattr(exc, "code", "ValueError")
        stderr.write(json.dumps({"schema": SCHEMA, "error": code, "message": str(exc)}) + "\n")
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
