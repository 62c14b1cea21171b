"""Command-line front end.

    lkcurv list
    lkcurv describe --space node
    lkcurv curvature --space cusp --k 2 --eps-ladder 0.4:8
    lkcurv verify all --space all --seed 7

Reports go to stdout, diagnostics to stderr.  Exit codes: 0 pass, 1 an
identity failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import boundary, constructible, curvature, limits, polar
from .errors import (
    DataError,
    DomainError,
    LKCurvError,
    ParseError,
    PreconditionError,
    RangeError,
    SchemaError,
    StratumLookupError,
    UnsupportedSliceError,
    ValidationFailure,
)
from .mathkit import EpsilonLadder
from .parallel import ENV_THREADS, make_runner, thread_count
from .report import IdentityReport, emit_csv, emit_report
from .variety import GERM, GLOBAL, StratifiedSpace, builtin, load, names

SUITES = ("bdk", "local-gb", "main", "euler", "global", "polar", "fu", "morse")
MORSE_EPS = (0.1, 0.03)
MORSE_DIRECTIONS = 20
MORSE_COLUMNS = ("eps", "stratum", "kind", "multiplier_sign", "morse_index", "normal_index", "inward", "position")
POLAR_COLUMNS = ("k", "draw", "chi")

# errors caused by the request rather than the mathematics
USAGE_ERRORS = (StratumLookupError, ParseError, SchemaError, DomainError, RangeError, PreconditionError, ValidationFailure)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    space: str = "all"
    eps_ladder: Optional[EpsilonLadder] = None
    r_ladder: Optional[EpsilonLadder] = None
    samples: int = curvature.DEFAULT_SAMPLES
    draws: int = polar.DEFAULT_DRAWS
    directions: int = MORSE_DIRECTIONS
    seed: int = 0
    tol: Optional[float] = None
    fmt: str = "json"
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def ladder_for(self, space: StratifiedSpace) -> Optional[EpsilonLadder]:
        return self.r_ladder if space.kind == GLOBAL else self.eps_ladder

    def meta(self) -> dict:
        # thread count is left out so reports do not depend on it
        return {
            "space": self.space,
            "eps_ladder": list(self.eps_ladder.values) if self.eps_ladder else "default",
            "R_ladder": list(self.r_ladder.values) if self.r_ladder else "default",
            "samples": self.samples,
            "draws": self.draws,
            "directions": self.directions,
            "seed": self.seed,
            "tol": self.tol,
            **self.extra,
        }


# --------------------------------------------------------------------------
# argument parsing


def _ladder(kind: str):
    def parse(text: str) -> EpsilonLadder:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError(f"expected start:count[:ratio], got {text!r}")
        try:
            start, count = float(parts[0]), int(parts[1])
            ratio = float(parts[2]) if len(parts) == 3 else (0.5 if kind == "shrink" else 2.0)
            return getattr(EpsilonLadder, kind)(start, count, ratio)
        except (ValueError, DomainError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _common(p: argparse.ArgumentParser, space_default: Optional[str] = "all"):
    p.add_argument("--space", default=space_default, required=space_default is None, help="builtin name, 'all', or a space file")
    p.add_argument("--eps-ladder", type=_ladder("shrink"), help="germ radii start:count[:ratio], e.g. 0.4:8")
    p.add_argument("--R-ladder", dest="r_ladder", type=_ladder("grow"), help="global radii start:count[:ratio], e.g. 4:6")
    p.add_argument("--samples", type=_positive, default=curvature.DEFAULT_SAMPLES, help="points per shell and chart")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, help=f"worker threads (default ${ENV_THREADS} or 1)")
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    p.add_argument("--tol", type=float, help="absolute tolerance override")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lkcurv", description="Curvature measures of stratified sets and their index formulas.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list builtin spaces")

    p = sub.add_parser("describe", help="strata, eta table and Euler obstructions of a space")
    p.add_argument("--space", required=True)

    p = sub.add_parser("curvature", help="Lambda_k series over the ladder")
    _common(p, None)
    p.add_argument("--k", type=int, action="append", help="degree (repeatable; default all)")

    p = sub.add_parser("limits", help="scaled limits of Lambda_k")
    _common(p, None)
    p.add_argument("--k", type=int, action="append")

    p = sub.add_parser("polar", help="polar invariants sigma_k")
    _common(p, None)
    p.add_argument("--k", type=int, action="append")
    p.add_argument("--draws", type=_positive, default=polar.DEFAULT_DRAWS)

    p = sub.add_parser("morse", help="critical points of linear forms on X cap S_eps")
    _common(p, None)
    p.add_argument("--eps", type=float, default=MORSE_EPS[0])
    p.add_argument("--directions", type=_positive, default=MORSE_DIRECTIONS)
    p.add_argument("--v", type=str, help="comma-separated direction (default: random)")

    p = sub.add_parser("fu", help="boundary curvature limit against Eu_X(0)")
    _common(p, None)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suite", choices=SUITES + ("all",))
    _common(p, "all")
    p.add_argument("--draws", type=_positive, default=polar.DEFAULT_DRAWS)
    p.add_argument("--directions", type=_positive, default=MORSE_DIRECTIONS)
    return ap


def resolve_spaces(spec: str) -> list[StratifiedSpace]:
    if spec == "all":
        return [builtin(n) for n in names()]
    if os.path.exists(spec):
        return [load(spec)]
    return [builtin(spec)]


def _config(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        space=getattr(args, "space", "all"),
        eps_ladder=getattr(args, "eps_ladder", None),
        r_ladder=getattr(args, "r_ladder", None),
        samples=getattr(args, "samples", curvature.DEFAULT_SAMPLES),
        draws=getattr(args, "draws", polar.DEFAULT_DRAWS),
        directions=getattr(args, "directions", MORSE_DIRECTIONS),
        seed=getattr(args, "seed", 0),
        tol=getattr(args, "tol", None),
        fmt=getattr(args, "fmt", "json"),
        threads=thread_count(getattr(args, "threads", None)),
    )


# --------------------------------------------------------------------------
# verification suites


def _is_germ(s):
    return s.kind == GERM


def _complex_germ(s):
    return s.kind == GERM and s.is_complex


def _sullivan(space, cfg, runner) -> list[IdentityReport]:
    lims = limits.scaled_limits(space, range(1, space.ambient_real_dim + 1, 2), cfg.ladder_for(space), cfg.samples, cfg.seed, runner)
    tol = 0.02 if cfg.tol is None else cfg.tol
    return [IdentityReport("odd_vanishing", space.name, l.value, 0.0, l.stderr, 0.0, tol, {}, [f"k={k}"]) for k, l in lims.items()]


def suite_bdk(space, cfg, runner):
    out = [constructible.verify_eta_duality(space)]
    check = constructible.bdk_local if space.kind == GERM else constructible.bdk_global
    out += [check(space, phi, label=label) for label, phi in constructible.corpus_functions(space)]
    return out


def suite_local_gb(space, cfg, runner):
    out = [limits.verify_local_gb(space, cfg.ladder_for(space), cfg.samples, cfg.seed, runner, cfg.tol)]
    if space.is_complex:
        out += _sullivan(space, cfg, runner)
    return out


def suite_main(space, cfg, runner):
    return [
        limits.verify_main_theorem(space, phi, label, cfg.ladder_for(space), cfg.samples, cfg.seed, runner, cfg.tol)
        for label, phi in constructible.corpus_functions(space)
    ]


def suite_euler(space, cfg, runner):
    return [limits.euler_obstruction_via_curvature(space, cfg.ladder_for(space), cfg.samples, cfg.seed, runner, cfg.tol)[1]]


def suite_global(space, cfg, runner):
    kw = dict(ladder=cfg.ladder_for(space), samples=cfg.samples, seed=cfg.seed, runner=runner, tol=cfg.tol)
    out = [limits.verify_global(space, "gb", **kw)]
    if space.is_complex:
        out += [limits.verify_global(space, "main", phi, label=label, **kw) for label, phi in constructible.corpus_functions(space)]
        out.append(limits.verify_global(space, "euler", **kw))
    return out


def _polar_supported(space, k) -> bool:
    if k == 0 or k > space.ambient_real_dim:
        return True
    try:
        polar.slice_method(space, k)
    except UnsupportedSliceError:
        return False
    return True


def suite_polar(space, cfg, runner):
    out = []
    for k in range(space.ambient_real_dim):
        need = {k, k + 1}
        if space.is_complex and k >= 1:
            need |= {k - 1} if k % 2 == 0 else set()
        if not all(_polar_supported(space, j) for j in need):
            continue  # no slice method for this codimension; reported by `polar`
        out.append(polar.verify_curv_polar(space, k, cfg.ladder_for(space), cfg.samples, cfg.draws, cfg.seed, runner, cfg.tol))
    return out


def suite_fu(space, cfg, runner):
    out = [boundary.verify_fu(space, cfg.ladder_for(space), cfg.samples, cfg.seed, cfg.tol)]
    for s in space.strata:
        if not s.is_point:
            out.append(boundary.verify_boundary_limits(space, s.id, cfg.ladder_for(space), cfg.samples, cfg.seed, cfg.tol))
    return out


def _morse_reports(space, cfg, eps, runner):
    fn = lambda i: boundary.morse_identity(space, None, eps, cfg.seed, i)
    jobs = list(range(cfg.directions))
    return runner(fn, jobs) if runner is not None else [fn(i) for i in jobs]


def suite_morse(space, cfg, runner):
    out = []
    for eps in MORSE_EPS:
        reps = _morse_reports(space, cfg, eps, runner)
        good = sum(r.passed for r in reps)
        terms = {"directions": [{"v": list(r.v), "lhs": r.identity_lhs, "rhs": r.identity_rhs, "incomplete": r.incomplete} for r in reps]}
        out.append(IdentityReport("morse", space.name, len(reps), good, terms=terms, notes=[f"eps={eps}"]))
        out.append(boundary.mean_boundary_from_reports(space, reps, cfg.samples, cfg.seed, cfg.tol))
    return out


# suite -> (applies to space, runner)
SUITE_TABLE: dict[str, tuple[Callable, Callable]] = {
    "bdk": (lambda s: s.is_complex, suite_bdk),
    "local-gb": (_is_germ, suite_local_gb),
    "main": (_complex_germ, suite_main),
    "euler": (_complex_germ, suite_euler),
    "global": (lambda s: s.kind == GLOBAL, suite_global),
    "polar": (_is_germ, suite_polar),
    "fu": (lambda s: _complex_germ(s) and s.equidimensional, suite_fu),
    "morse": (_is_germ, suite_morse),
}


def _failure(suite, space, exc) -> dict:
    return {"identity": suite, "space": space.name, "pass": False, "error": f"{type(exc).__name__}: {exc}"}


def run_verify(cfg: RunConfig, suite: str, spaces: list[StratifiedSpace], runner) -> list:
    suites = SUITES if suite == "all" else (suite,)
    explicit = cfg.space != "all"
    results = []
    for name in suites:
        applies, fn = SUITE_TABLE[name]
        for space in spaces:
            if not applies(space):
                if explicit and suite != "all":
                    raise UsageError(f"suite {name!r} does not apply to space {space.name!r}")
                continue
            try:
                results.extend(fn(space, cfg, runner))
            except USAGE_ERRORS:
                raise
            except LKCurvError as exc:
                results.append(_failure(name, space, exc))
    return results


def _summary(results) -> str:
    lines = [f"{'identity':<16} {'space':<26} {'lhs':>12} {'rhs':>12}  result  note"]
    for r in results:
        d = r.to_dict() if hasattr(r, "to_dict") else r
        lhs, rhs = d.get("lhs", ""), d.get("rhs", "")
        fmt = lambda x: f"{x:12.5g}" if isinstance(x, (int, float)) else f"{str(x):>12}"
        note = " ".join(d.get("notes", [])) or d.get("error", "")
        lines.append(f"{d['identity']:<16} {d['space']:<26} {fmt(lhs)} {fmt(rhs)}  {'pass' if d['pass'] else 'FAIL':<6}  {note}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# other commands


def _one_space(cfg) -> StratifiedSpace:
    spaces = resolve_spaces(cfg.space)
    if len(spaces) != 1:
        raise UsageError("this command needs a single --space")
    return spaces[0]


def cmd_list(cfg, args, runner) -> tuple[str, bool]:
    rows = []
    for n in names():
        s = builtin(n)
        rows.append({"name": n, "kind": s.kind, "complex": s.is_complex, "ambient_real_dim": s.ambient_real_dim, "dim": s.dim, "strata": len(s.strata)})
    return emit_report(rows, "json", "list"), True


def cmd_describe(cfg, args, runner):
    space = _one_space(cfg)
    strata = [
        {"id": s.id, "real_dim": s.real_dim, "complex": s.is_complex, "charts": [c.name for c in s.charts], "closure_of": space.below(s.id)}
        for s in space.strata
    ]
    desc = {"name": space.name, "kind": space.kind, "ambient_real_dim": space.ambient_real_dim, "dim": space.dim, "strata": strata}
    if space.is_complex:
        try:
            tab = constructible.eta_table(space)
            desc["eta"] = {f"{i},{j}": tab(i, j) for i in space.ids for j in space.ids}
            basis = constructible.euler_obstruction_basis(space)
            desc["euler_obstruction_basis"] = {j: f.to_dict() for j, f in basis.items()}
            if space.kind == GERM:
                desc["Eu(0)"] = constructible.local_euler_obstruction(space)
        except DataError as exc:
            desc["eta_error"] = str(exc)
    desc["annotations"] = {k: a.value for k, a in sorted(space.oracle_annotations.items())}
    return emit_report([desc], "json", "describe"), True


def _ks(args, space, lo=0):
    ks = args.k if args.k else list(range(lo, space.ambient_real_dim + 1))
    for k in ks:
        if not 0 <= k <= space.ambient_real_dim:
            raise UsageError(f"--k {k} outside [0, {space.ambient_real_dim}]")
    return ks


def cmd_curvature(cfg, args, runner):
    space = _one_space(cfg)
    ladder = cfg.ladder_for(space)
    series = [curvature.measure(space, k, ladder, cfg.samples, cfg.seed, runner) for k in _ks(args, space)]
    if cfg.fmt == "csv":
        return emit_csv([r for s in series for r in s.rows()]), True
    return emit_report(series, "json", "curvature", cfg.meta()), True


def cmd_limits(cfg, args, runner):
    space = _one_space(cfg)
    lims = limits.scaled_limits(space, _ks(args, space), cfg.ladder_for(space), cfg.samples, cfg.seed, runner)
    if cfg.fmt == "csv":
        return emit_csv({"k": k, "eps": 0, "stratum": "total", "value": l.value, "stderr": l.stderr} for k, l in lims.items()), True
    return emit_report([dict(l.to_dict(), k=k) for k, l in lims.items()], "json", "limits", cfg.meta()), True


def cmd_polar(cfg, args, runner):
    space = _one_space(cfg)
    ests = [polar.sigma(space, k, cfg.draws, seed=cfg.seed, runner=runner) for k in _ks(args, space)]
    if cfg.fmt == "csv":
        rows = [{"k": e.k, "draw": i, "chi": c} for e in ests for i, c in enumerate(e.counts or [])]
        return emit_csv(rows, POLAR_COLUMNS), True
    return emit_report(ests, "json", "polar", cfg.meta()), True


def cmd_morse(cfg, args, runner):
    space = _one_space(cfg)
    if args.v:
        try:
            v = [float(t) for t in args.v.split(",")]
        except ValueError:
            raise UsageError(f"--v must be comma-separated numbers, got {args.v!r}") from None
        if len(v) != space.ambient_real_dim:
            raise UsageError(f"--v needs {space.ambient_real_dim} components")
        reps = [boundary.morse_identity(space, v, args.eps, cfg.seed)]
    else:
        fn = lambda i: boundary.morse_identity(space, None, args.eps, cfg.seed, i)
        jobs = list(range(cfg.directions))
        reps = runner(fn, jobs) if runner is not None else [fn(i) for i in jobs]
    ok = all(r.passed for r in reps)
    if cfg.fmt == "csv":
        rows = [dict(row, position=" ".join(repr(round(x, 12)) for x in row["position"])) for r in reps for row in r.rows()]
        return emit_csv(rows, MORSE_COLUMNS), ok
    cfg.extra["eps"] = args.eps
    return emit_report(reps, "json", "morse", cfg.meta()), ok


def cmd_fu(cfg, args, runner):
    space = _one_space(cfg)
    rep = boundary.verify_fu(space, cfg.ladder_for(space), cfg.samples, cfg.seed, cfg.tol)
    return emit_report([rep], cfg.fmt, "fu", cfg.meta()), bool(rep.passed)


def cmd_verify(cfg, args, runner):
    spaces = resolve_spaces(cfg.space)
    results = run_verify(cfg, args.suite, spaces, runner)
    sys.stderr.write(_summary(results))
    ok = all((r.passed if hasattr(r, "passed") else r.get("pass", True)) for r in results)
    return emit_report(results, cfg.fmt, f"verify {args.suite}", cfg.meta()), ok


COMMANDS = {
    "list": cmd_list,
    "describe": cmd_describe,
    "curvature": cmd_curvature,
    "limits": cmd_limits,
    "polar": cmd_polar,
    "morse": cmd_morse,
    "fu": cmd_fu,
    "verify": cmd_verify,
}


def run(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = _config(args)
    runner = make_runner(cfg.threads)
    try:
        text, ok = COMMANDS[args.command](cfg, args, runner)
    except (UsageError, *USAGE_ERRORS) as exc:
        sys.stderr.write(f"lkcurv: error: {exc}\n")
        return 2
    except LKCurvError as exc:
        sys.stderr.write(f"lkcurv: {type(exc).__name__}: {exc}\n")
        return 1
    sys.stdout.write(text)
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
