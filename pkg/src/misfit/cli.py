"""Command-line front end for the toolkit.

Subcommands cover the whole pipeline: ``exact`` (branch-and-bound solving),
``fit`` (Step A), ``verify`` (independent re-checking of a parameter file),
``solve`` (Step B on one instance), ``sweep`` (Step B across a floor range),
and ``search`` (largest confirmable target size).

Every run produces a report carrying the echoed command, a sha256 digest of
each input file, wall-clock seconds, and the outcome payload — enough to
reproduce the run.  ``--format json`` emits the same report as JSON.

Exit codes (total, per command):
    0  confirmed outcome: integer answer recognized and re-verified, clean
       fit, clean verification, or exact solve completed
    1  unexpected crash
    2  finished without confirmation: fractional answer, unconfirmed size,
       or named margin violations
    3  infeasible: no point satisfies the constraints (fit or polytope)
    4  usage, file, or config errors
    5  budget exhausted before an answer was established

A claimed witness is always re-checked against the graph before exit 0;
a claim that fails that check is reported as a crash, never as success.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .costfn import desired_cost, params_from_text, params_to_text
from .driver import SweepConfig, emit_trace, run_two_step, search_k, sweep_w
from .figures import (render_assignment_figure, render_cost_figure,
                      render_sweep_figure)
from .graph import exact_mis, is_independent, parse_graph
from .minimizer import (MinimizeOptions, PolytopeSpec, emit_assignment,
                        solve_step_b)
from .paramfit import (fit_config_from_text, fit_parameters, report_to_text,
                       verify_parameters)

__all__ = [
    "RunReport", "main",
    "cmd_exact", "cmd_fit", "cmd_verify", "cmd_solve", "cmd_sweep",
    "cmd_search",
]

EXIT_OK = 0
EXIT_CRASH = 1
EXIT_UNCONFIRMED = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 4
EXIT_BUDGET = 5

_STATUS_EXIT = {
    "integer-found": EXIT_OK,
    "confirmed": EXIT_OK,
    "optimal": EXIT_OK,
    "ok": EXIT_OK,
    "fractional": EXIT_UNCONFIRMED,
    "not-converged": EXIT_UNCONFIRMED,
    "unconfirmed": EXIT_UNCONFIRMED,
    "violations": EXIT_UNCONFIRMED,
    "infeasible": EXIT_INFEASIBLE,
    "infeasible-fit": EXIT_INFEASIBLE,
    "unbounded": EXIT_INFEASIBLE,
    "unknown": EXIT_BUDGET,
    "iteration-limit": EXIT_BUDGET,
}


class CliError(ValueError):
    """Usage, file, or config problem; maps to exit code 4."""


@dataclass(frozen=True)
class RunReport:
    """Machine-readable record of one command run."""

    command: str
    digests: tuple[tuple[str, str], ...]
    payload: dict
    blocks: tuple[tuple[str, str], ...] = ()
    seconds: float = 0.0

    @property
    def status(self) -> str:
        return str(self.payload.get("status", "ok"))

    @property
    def exit_code(self) -> int:
        return _STATUS_EXIT.get(self.status, EXIT_UNCONFIRMED)

    def to_text(self) -> str:
        lines = [f"command = {self.command}"]
        for label, digest in self.digests:
            lines.append(f"digest.{label} = {digest}")
        lines.append(f"seconds = {self.seconds:.3f}")
        for key, value in self.payload.items():
            lines.append(f"{key} = {_fmt(value)}")
        for title, body in self.blocks:
            lines.append("")
            lines.append(f"[{title}]")
            lines.append(body.rstrip("\n"))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "digests": dict(self.digests),
            "seconds": round(self.seconds, 3),
            "payload": self.payload,
            "blocks": {title: body for title, body in self.blocks},
            "exit_code": self.exit_code,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _digest_file(path: str | Path) -> tuple[str, bytes]:
    try:
        data = Path(path).read_bytes()
    except OSError as err:
        raise CliError(f"cannot read {path}: {err.strerror or err}") from None
    return hashlib.sha256(data).hexdigest(), data


def _echo(name: str, **flags) -> str:
    parts = [name]
    for key, value in flags.items():
        if value is None or value is False or value == ():
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            parts.append(flag)
        else:
            parts.append(f"{flag} {value}")
    return " ".join(parts)


def _load_graph(path):
    digest, data = _digest_file(path)
    return parse_graph(data.decode()), ("graph", digest)


def _load_config(path):
    digest, data = _digest_file(path)
    return fit_config_from_text(data.decode()), ("config", digest)


def _load_params(path):
    digest, data = _digest_file(path)
    return params_from_text(data.decode()), ("params", digest)


def _figdir(figures_dir) -> Path | None:
    if figures_dir is None:
        return None
    path = Path(figures_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _check_witness(g, witness, k) -> None:
    if witness is None or len(witness) != k or not is_independent(g, witness):
        raise RuntimeError(
            "internal error: claimed witness failed independent re-check")


# ---------------------------------------------------------------------------
# commands


def cmd_exact(graph_file, *, budget=None, seed=0, figures_dir=None) -> RunReport:
    """Parse a graph, solve it exactly, report alpha and a witness."""
    start = time.perf_counter()
    g, digest = _load_graph(graph_file)
    result = exact_mis(g, budget=budget)
    if result.status == "optimal":
        _check_witness(g, result.witness, result.alpha)
    payload = {
        "status": result.status,
        "n": g.n,
        "m": g.m,
        "alpha": result.alpha,
        "witness": sorted(result.witness),
        "nodes": result.nodes,
        "seed": seed,
    }
    return RunReport(
        command=_echo("exact", graph=graph_file, budget=budget, seed=seed),
        digests=(digest,), payload=payload,
        seconds=time.perf_counter() - start)


def cmd_fit(config_file, *, max_iters=20000, params_out=None, seed=0,
            figures_dir=None) -> RunReport:
    """Run Step A on a config file; optionally save the coefficients."""
    start = time.perf_counter()
    cfg, digest = _load_config(config_file)
    report = fit_parameters(cfg, max_iters=max_iters)
    if report.params is None:
        status = report.lp_status
    elif report.ok:
        status = "ok"
    else:
        status = "violations"
    payload = {
        "status": status,
        "lp_status": report.lp_status,
        "family": cfg.family,
        "N": cfg.N,
        "k": cfg.k,
        "w": cfg.w,
        "iterations": report.iterations,
        "seed": seed,
    }
    if report.params is not None:
        payload["desired_cost"] = desired_cost(report.params, cfg.N, cfg.k)
        if report.convexity is not None:
            payload["convex_subintervals"] = list(report.convexity)
    if report.violations:
        payload["violations"] = [str(v) for v in report.violations]
    blocks = [("fit-report", report_to_text(report))]
    if report.params is not None and params_out is not None:
        Path(params_out).write_text(params_to_text(report.params))
        payload["params_out"] = str(params_out)
    figdir = _figdir(figures_dir)
    if figdir is not None and report.params is not None:
        path = render_cost_figure(report.params, cfg.w, figdir / "cost.png")
        payload["figures"] = [str(path)]
    return RunReport(
        command=_echo("fit", config=config_file, max_iters=max_iters,
                      params_out=params_out, seed=seed),
        digests=(digest,), payload=payload, blocks=tuple(blocks),
        seconds=time.perf_counter() - start)


def cmd_verify(params_file, config_file, *, tol=1e-6, seed=0,
               figures_dir=None) -> RunReport:
    """Re-check a parameter file against a config by direct evaluation."""
    start = time.perf_counter()
    params, pdigest = _load_params(params_file)
    cfg, cdigest = _load_config(config_file)
    try:
        violations = verify_parameters(params, cfg, tol=tol)
    except TypeError as err:
        raise CliError(str(err)) from None
    payload = {
        "status": "ok" if not violations else "violations",
        "family": params.family,
        "N": cfg.N,
        "k": cfg.k,
        "w": cfg.w,
        "checked": len(cfg.scenarios()),
        "violation_count": len(violations),
        "seed": seed,
    }
    if violations:
        payload["violations"] = [str(v) for v in violations]
    figdir = _figdir(figures_dir)
    if figdir is not None:
        path = render_cost_figure(params, cfg.w, figdir / "cost.png")
        payload["figures"] = [str(path)]
    return RunReport(
        command=_echo("verify", params=params_file, config=config_file,
                      tol=tol, seed=seed),
        digests=(pdigest, cdigest), payload=payload,
        seconds=time.perf_counter() - start)


def cmd_solve(graph_file, params_file=None, config_file=None, *, k=None,
              w=None, partial=(), band=0.0, cuts=False, max_iters=200,
              seed=0, figures_dir=None) -> RunReport:
    """Run Step B once: minimize the fitted cost, try to recognize an
    integer answer, and re-verify any claimed witness."""
    start = time.perf_counter()
    g, gdigest = _load_graph(graph_file)
    digests = [gdigest]
    params = cfg = None
    if params_file is not None:
        params, pdigest = _load_params(params_file)
        digests.append(pdigest)
    if config_file is not None:
        cfg, cdigest = _load_config(config_file)
        digests.append(cdigest)
    if params is None and cfg is None:
        raise CliError("solve needs --params or --config")
    if k is None:
        if cfg is None:
            raise CliError("solve needs --k when no config is given")
        k = cfg.k
    if w is None:
        w = cfg.w if cfg is not None else params.w
    opts = MinimizeOptions(max_iters=max_iters, nonlinear_cuts=cuts)
    payload = {"n": g.n, "m": g.m, "k": k, "w": w, "band": band,
               "cuts": cuts, "seed": seed}
    if params is None:
        report = fit_parameters(replace(cfg, k=k) if cfg.k != k else cfg)
        if report.params is None:
            payload = {"status": "infeasible-fit", **payload}
            return RunReport(
                command=_echo("solve", graph=graph_file, config=config_file,
                              k=k, w=w, partial=_fmt_partial(partial),
                              band=band or None, cuts=cuts,
                              max_iters=max_iters, seed=seed),
                digests=tuple(digests), payload=payload,
                seconds=time.perf_counter() - start)
        params = report.params
    spec = PolytopeSpec(graph=g, k=k, w=w, fixed_ones=tuple(partial),
                        band=band)
    outcome = solve_step_b(spec, params, opts)
    if outcome.status == "integer-found":
        _check_witness(g, outcome.recognized, k)
    payload = {"status": outcome.status, **payload,
               "desired_cost": desired_cost(params, g.n, k)}
    blocks = []
    if outcome.assignment is not None:
        payload["objective"] = outcome.assignment.objective
        payload["fw_gap"] = outcome.assignment.fw_gap
        payload["iterations"] = outcome.assignment.iterations
        blocks.append(("assignment", emit_assignment(outcome.assignment)))
    payload["witness"] = (sorted(outcome.recognized)
                          if outcome.recognized is not None else None)
    figdir = _figdir(figures_dir)
    if figdir is not None:
        paths = [render_cost_figure(params, w, figdir / "cost.png")]
        if outcome.assignment is not None:
            paths.append(render_assignment_figure(
                outcome.assignment, w, figdir / "assignment.png"))
        payload["figures"] = [str(p) for p in paths]
    return RunReport(
        command=_echo("solve", graph=graph_file, params=params_file,
                      config=config_file, k=k, w=w,
                      partial=_fmt_partial(partial), band=band or None,
                      cuts=cuts, max_iters=max_iters, seed=seed),
        digests=tuple(digests), payload=payload, blocks=tuple(blocks),
        seconds=time.perf_counter() - start)


def cmd_sweep(graph_file, config_file, w_range, *, k=None, params_file=None,
              refit=False, first_hit=False, band=0.0, cuts=False, jobs=1,
              max_iters=200, seed=0, figures_dir=None) -> RunReport:
    """Run Step B across a floor range; report every outcome and the hits."""
    start = time.perf_counter()
    g, gdigest = _load_graph(graph_file)
    cfg, cdigest = _load_config(config_file)
    digests = [gdigest, cdigest]
    params = None
    if params_file is not None:
        params, pdigest = _load_params(params_file)
        digests.append(pdigest)
    if k is None:
        k = cfg.k
    w_lo, w_hi, w_step = w_range
    sweep = SweepConfig(
        w_lo=w_lo, w_hi=w_hi, w_step=w_step,
        opts=MinimizeOptions(max_iters=max_iters, nonlinear_cuts=cuts),
        stop_mode="first-hit" if first_hit else "collect-all", band=band)
    trace = []
    results = sweep_w(g, k, cfg, sweep, refit=refit, params=params,
                      jobs=jobs, trace=trace)
    hits = [w for w, out in results if out.status == "integer-found"]
    statuses = {out.status for _, out in results}
    if hits:
        status = "integer-found"
        first = min(hits)
        _check_witness(g, dict(results)[first].recognized, k)
    elif statuses <= {"infeasible", "infeasible-fit"} and statuses:
        status = "infeasible"
    else:
        status = "unconfirmed"
    payload = {
        "status": status,
        "n": g.n, "m": g.m, "k": k,
        "w_range": f"{w_lo:g}:{w_hi:g}:{w_step:g}",
        "refit": refit, "band": band, "cuts": cuts,
        "points": len(results),
        "hits": hits,
        "seed": seed,
    }
    if hits:
        payload["first_hit_w"] = min(hits)
        payload["witness"] = sorted(dict(results)[min(hits)].recognized)
    blocks = [("trace", emit_trace(trace))] if trace else []
    figdir = _figdir(figures_dir)
    if figdir is not None:
        path = render_sweep_figure(results, figdir / "sweep.png")
        payload["figures"] = [str(path)]
    return RunReport(
        command=_echo("sweep", graph=graph_file, config=config_file,
                      w_range=f"{w_lo:g}:{w_hi:g}:{w_step:g}", k=k,
                      params=params_file, refit=refit, first_hit=first_hit,
                      band=band or None, cuts=cuts, jobs=jobs,
                      max_iters=max_iters, seed=seed),
        digests=tuple(digests), payload=payload, blocks=tuple(blocks),
        seconds=time.perf_counter() - start)


def cmd_search(graph_file, config_file, *, mode="upward", k_hi=None,
               band=0.0, cuts=False, max_iters=200, seed=0,
               figures_dir=None) -> RunReport:
    """Find the largest confirmable target size for a graph."""
    start = time.perf_counter()
    g, gdigest = _load_graph(graph_file)
    cfg, cdigest = _load_config(config_file)
    opts = MinimizeOptions(max_iters=max_iters, nonlinear_cuts=cuts)
    outcome = search_k(g, cfg, mode=mode, k_hi=k_hi, band=band, opts=opts)
    confirmed = (outcome.best_k >= 1
                 and len(outcome.witness) == outcome.best_k
                 and is_independent(g, outcome.witness))
    payload = {
        "status": "confirmed" if confirmed else "unconfirmed",
        "n": g.n, "m": g.m, "mode": mode,
        "best_k": outcome.best_k,
        "witness": sorted(outcome.witness),
        "attempts": len(outcome.trace),
        "seed": seed,
    }
    blocks = ([("trace", emit_trace(list(outcome.trace)))]
              if outcome.trace else [])
    return RunReport(
        command=_echo("search", graph=graph_file, config=config_file,
                      mode=mode, k_hi=k_hi, band=band or None, cuts=cuts,
                      max_iters=max_iters, seed=seed),
        digests=(gdigest, cdigest), payload=payload, blocks=tuple(blocks),
        seconds=time.perf_counter() - start)


def _fmt_partial(partial) -> str | None:
    return ",".join(str(v) for v in partial) if partial else None


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _parse_partial(text: str):
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}") from None


def _parse_range(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected lo:hi:step, got {text!r}")
    try:
        return tuple(float(part) for part in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected lo:hi:step, got {text!r}") from None


def _build_parser() -> _Parser:
    parser = _Parser(prog="misfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser,
                                required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0,
                       help="seed for any randomized step (default 0; "
                            "current commands are deterministic)")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--figures", metavar="DIR", default=None,
                       help="also render figures into DIR")

    p = sub.add_parser("exact", help="solve a graph exactly")
    p.add_argument("--graph", required=True)
    p.add_argument("--budget", type=int, default=None,
                   help="search-node cap; exhaustion exits 5")
    common(p)

    p = sub.add_parser("fit", help="fit separating cost coefficients")
    p.add_argument("--config", required=True)
    p.add_argument("--max-iters", type=int, default=20000)
    p.add_argument("--params-out", metavar="FILE", default=None,
                   help="save fitted coefficients for later --params use")
    common(p)

    p = sub.add_parser("verify", help="re-check a parameter file")
    p.add_argument("--params", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)

    p = sub.add_parser("solve", help="minimize the cost on one instance")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--w", type=float, default=None)
    p.add_argument("--partial", type=_parse_partial, default=(),
                   metavar="i,j,k", help="vertices pinned to one")
    p.add_argument("--band", type=float, default=0.0)
    p.add_argument("--cuts", action="store_true")
    p.add_argument("--max-iters", type=int, default=200)
    common(p)

    p = sub.add_parser("sweep", help="minimize across a floor range")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--w-range", type=_parse_range, required=True,
                   metavar="lo:hi:step")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--refit", action="store_true")
    p.add_argument("--first-hit", action="store_true")
    p.add_argument("--band", type=float, default=0.0)
    p.add_argument("--cuts", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=200)
    common(p)

    p = sub.add_parser("search", help="find the largest confirmable size")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("upward", "binary"), default="upward")
    p.add_argument("--k-hi", type=int, default=None)
    p.add_argument("--band", type=float, default=0.0)
    p.add_argument("--cuts", action="store_true")
    p.add_argument("--max-iters", type=int, default=200)
    common(p)

    return parser


def _dispatch(args) -> RunReport:
    if args.cmd == "exact":
        return cmd_exact(args.graph, budget=args.budget, seed=args.seed,
                         figures_dir=args.figures)
    if args.cmd == "fit":
        return cmd_fit(args.config, max_iters=args.max_iters,
                       params_out=args.params_out, seed=args.seed,
                       figures_dir=args.figures)
    if args.cmd == "verify":
        return cmd_verify(args.params, args.config, tol=args.tol,
                          seed=args.seed, figures_dir=args.figures)
    if args.cmd == "solve":
        return cmd_solve(args.graph, args.params, args.config, k=args.k,
                         w=args.w, partial=args.partial, band=args.band,
                         cuts=args.cuts, max_iters=args.max_iters,
                         seed=args.seed, figures_dir=args.figures)
    if args.cmd == "sweep":
        return cmd_sweep(args.graph, args.config, args.w_range, k=args.k,
                         params_file=args.params, refit=args.refit,
                         first_hit=args.first_hit, band=args.band,
                         cuts=args.cuts, jobs=args.jobs,
                         max_iters=args.max_iters, seed=args.seed,
                         figures_dir=args.figures)
    if args.cmd == "search":
        return cmd_search(args.graph, args.config, mode=args.mode,
                          k_hi=args.k_hi, band=args.band, cuts=args.cuts,
                          max_iters=args.max_iters, seed=args.seed,
                          figures_dir=args.figures)
    raise CliError(f"unknown command {args.cmd!r}")


def main(argv=None) -> int:
    """Entry point; returns the exit code instead of raising SystemExit."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:        # --help and friends
        return int(err.code or 0)
    try:
        report = _dispatch(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:        # pragma: no cover - defensive
        print(f"crash: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CRASH
    print(report.to_json() if args.format == "json" else report.to_text(),
          end="")
    return report.exit_code


if __name__ == "__main__":          # pragma: no cover
    sys.exit(main())
