"""Command-line front end: simulate | boundaries | diagram | kappa4 | classify.

Exit codes: 0 success, 1 numerical/runtime failure, 2 usage or validation
error. Option values resolve as command-line flag > ``--config`` JSON file
> built-in default. Output files land in ``--outdir``, else in
``$OPINION_TRIAD_OUTDIR``, else the working directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import BoundaryKind, boundary_curves
from .export import diagram_svg, dumps_json, trajectory_svg, write_csv, write_json
from .integrate import Equilibrium, IntegrationError, SolverConfig, eigenvalues_3x3, find_equilibrium
from .model import DerivConvention, ModelParams, jacobian_chain3, rhs_chain3
from .regimes import (
    GridSpec,
    IcPolicy,
    NoMajorityRuleError,
    Thresholds,
    UnresolvedError,
    classify,
    get_preset,
    kappa4_bracket,
    scenario_presets,
    stability_diagram,
)

log = logging.getLogger("opinion_triad")

OUTDIR_ENV = "OPINION_TRIAD_OUTDIR"

DEFAULTS = {
    "kappa": 1.0, "nu": 0.0, "c": 0.0, "x0": 0.0, "dmu": 5.0, "lam": 1.0,
    "method": "rk45", "dt": 0.01, "t_max": 500.0, "eq_tol": 1e-9,
    "abs_tol": 1e-10, "rel_tol": 1e-8, "settle_tol": 1e-6, "stride": 1,
    "format": "csv", "sigma_frac": 0.3, "r_frac": 0.6,
    "convention": "composite", "tol": 0.005, "workers": 1,
    "dmu_range": "3.5:7:50", "kappa_range": "0.2:16:20",
}


class UsageError(Exception):
    """Invalid user input; maps to exit status 2."""


# --- argument helpers --------------------------------------------------------

def parse_range(text: str) -> tuple[float, float, int]:
    """``lo:hi:n`` -> (lo, hi, n)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"range must look like lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"range must look like lo:hi:n, got {text!r}") from None
    if n < 1 or (n > 1 and not lo < hi) or not (math.isfinite(lo) and math.isfinite(hi)):
        raise UsageError(f"invalid range {text!r}")
    return lo, hi, n


def parse_floats(text: str, count: int | None = None) -> list[float]:
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise UsageError(f"expected {count} comma-separated numbers, got {text!r}")
    return values


def parse_dmu_list(text: str) -> list[float]:
    """Comma list; ``a,b,...,z`` expands to an arithmetic progression."""
    items = [v.strip() for v in str(text).split(",") if v.strip()]
    if "..." in items:
        i = items.index("...")
        if i < 2 or i != len(items) - 2:
            raise UsageError("ellipsis form must be a,b,...,z")
        head = parse_floats(",".join(items[:i]))
        last = float(items[-1])
        step = head[-1] - head[-2]
        if step <= 0:
            raise UsageError("ellipsis progression must increase")
        n = int(round((last - head[0]) / step))
        if not math.isclose(head[0] + n * step, last, rel_tol=0, abs_tol=1e-9 * max(1, abs(last))):
            raise UsageError(f"{last} is not on the progression {head[0]}, {head[1]}, ...")
        return [round(head[0] + k * step, 12) for k in range(n + 1)]
    return parse_floats(",".join(items))


class Options:
    """Flag > config file > default lookup."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def get(self, name: str, default=None):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        if name in self._config:
            return self._config[name]
        if default is not None:
            return default
        return DEFAULTS.get(name)

    def given(self, name: str) -> bool:
        return getattr(self._args, name, None) is not None or name in self._config


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def output_dir(opts: Options) -> Path:
    out = opts.get("outdir") or os.environ.get(OUTDIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def solver_config(opts: Options) -> SolverConfig:
    return SolverConfig(
        method=opts.get("method"), dt=float(opts.get("dt")), t_max=float(opts.get("t_max")),
        eq_tol=float(opts.get("eq_tol")), abs_tol=float(opts.get("abs_tol")),
        rel_tol=float(opts.get("rel_tol")), sample_stride=int(opts.get("stride")),
        settle_tol=float(opts.get("settle_tol")),
    )


def thresholds(opts: Options) -> Thresholds:
    return Thresholds(float(opts.get("sigma_frac")), float(opts.get("r_frac")))


def model_params(
    opts: Options,
    base: ModelParams | None = None,
    dmu: float | None = None,
    kappa: float | None = None,
) -> ModelParams:
    """Build parameters from flags, on top of a preset when one is given.

    ``dmu``/``kappa`` override the flags for subcommands where those flags
    hold ranges.
    """
    if base is None:
        c = float(opts.get("c"))
        base = ModelParams.canonical(
            float(opts.get("dmu")) if dmu is None else dmu,
            float(opts.get("kappa")) if kappa is None else kappa,
            c=c, x0=float(opts.get("x0")),
            nu=float(opts.get("nu")), lam=float(opts.get("lam")))
    else:
        changes = {}
        for name in ("kappa", "nu", "x0", "lam"):
            if opts.given(name):
                changes[name] = float(opts.get(name))
        if opts.given("c"):
            c = float(opts.get("c"))
            changes.update(c1=c, c2=0.0, c3=-c)
        base = replace(base, **changes)
        if opts.given("dmu"):
            base = base.with_delta_mu(float(opts.get("dmu")))
    changes = {n: float(opts.get(n)) for n in ("c1", "c2", "c3") if opts.given(n)}
    return replace(base, **changes) if changes else base


def _print_json(obj) -> None:
    sys.stdout.write(dumps_json(obj))


def _add_model_flags(p: argparse.ArgumentParser, dmu_scalar: bool = True) -> None:
    g = p.add_argument_group("model")
    if dmu_scalar:
        g.add_argument("--kappa", type=float, help="uniform coupling strength (>= 0)")
        g.add_argument("--dmu", type=float, help="bias gap mu3 - mu1 (default 5)")
    g.add_argument("--nu", type=float, help="coupling asymmetry (default 0)")
    g.add_argument("--c", type=float, help="leader strength C for the (C, 0, -C) pattern")
    g.add_argument("--c1", type=float)
    g.add_argument("--c2", type=float)
    g.add_argument("--c3", type=float)
    g.add_argument("--x0", type=float, help="leader opinion")
    g.add_argument("--lam", type=float, help="coupling width (default 1)")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=["rk45", "rk4"])
    g.add_argument("--dt", type=float)
    g.add_argument("--t-max", dest="t_max", type=float)
    g.add_argument("--eq-tol", dest="eq_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--settle-tol", dest="settle_tol", type=float)
    g.add_argument("--stride", type=int, help="keep every n-th accepted step")


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma-frac", dest="sigma_frac", type=float)
    p.add_argument("--r-frac", dest="r_frac", type=float)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")


def _convention(opts: Options) -> DerivConvention:
    try:
        return DerivConvention.parse(opts.get("convention"))
    except ValueError:
        raise UsageError(f"unknown convention {opts.get('convention')!r}") from None


# --- subcommands ---------------------------------------------------------------

def cmd_simulate(opts: Options) -> int:
    scenario = None
    if opts.get("preset"):
        try:
            scenario = get_preset(opts.get("preset"))
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    p = model_params(opts, scenario.params if scenario else None)
    cfg = solver_config(opts)
    if opts.given("x_init"):
        x_init = parse_floats(opts.get("x_init"), 3)
    elif scenario is not None and not opts.given("dmu"):
        x_init = list(scenario.x_init)
    else:
        x_init = list(p.biases)
    eq = find_equilibrium(p, x_init, cfg)
    label = classify(eq, p.delta_mu(), thresholds(opts))
    traj = eq.trajectory
    fmt_ = opts.get("format")
    name = opts.get("preset") or "simulation"
    out = Path(opts.get("out")) if opts.get("out") else output_dir(opts) / f"{name}.{fmt_}"
    meta = {
        "command": "simulate", "preset": opts.get("preset"), "params": p.as_dict(),
        "solver": cfg.as_dict(), "x_init": x_init, "thresholds": thresholds(opts).as_dict(),
        "convention": None,
    }
    rsx = traj.rsx()
    rows = [(t, *x, *q) for t, x, q in zip(traj.t, traj.x, rsx)]
    header = ["t", "x1", "x2", "x3", "r", "s", "xbar"]
    if fmt_ == "json":
        doc = dict(meta, columns=header, samples=[list(r) for r in rows],
                   label=label.as_dict(), equilibrium=eq.as_dict(),
                   stop_reason=traj.stop_reason)
        write_json(out, doc)
    else:
        write_csv(out, header, rows, meta)
    summary = {"output": str(out), "label": label.as_dict(), "equilibrium": eq.as_dict()}
    if opts.get("plot"):
        svg_path = out.with_suffix(".svg")
        svg_path.write_text(trajectory_svg(traj.t, traj.x, title=name, meta=meta),
                            encoding="utf-8", newline="\n")
        summary["plot"] = str(svg_path)
    _print_json(summary)
    if not eq.converged:
        sys.stderr.write(f"error: {eq.diagnostic}\n")
        return 1
    return 0


def _kappa4_row(args):
    dmu, p, cfg, tol, policy, th = args
    try:
        b = kappa4_bracket(dmu, p, cfg, tol, ic_policy=policy, thresholds=th)
    except (NoMajorityRuleError, UnresolvedError, IntegrationError) as exc:
        return {"dmu": dmu, "kappa4": None, "status": "NA", "diagnostic": str(exc)}
    return {"dmu": dmu, "kappa4": b.kappa4, "bracket": [b.lo, b.hi],
            "probes": len(b.probes), "status": "ok"}


def _kappa4_rows(dmus, p, cfg, tol, policy, th, workers):
    tasks = [(d, p, cfg, tol, policy, th) for d in dmus]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_kappa4_row, tasks))
    return [_kappa4_row(t) for t in tasks]


def _ic_policy(opts: Options):
    value = opts.get("ic_policy")
    return IcPolicy(value) if value else None


def cmd_boundaries(opts: Options) -> int:
    rng = parse_range(opts.get("dmu", DEFAULTS["dmu_range"]))
    if rng[2] < 2:
        raise UsageError("boundaries need at least two delta_mu samples")
    conv = _convention(opts)
    p = model_params(opts, dmu=rng[0], kappa=DEFAULTS["kappa"])
    outdir = output_dir(opts)
    meta = {"command": "boundaries", "params": p.as_dict(), "convention": conv.value,
            "dmu_range": list(rng)}
    try:
        curves = boundary_curves(rng, p, conv)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    doc = {**meta, "curves": {}}
    files = []
    for cv in curves:
        stem = cv.kind.value + (f"_{conv.value}" if cv.kind is BoundaryKind.K1 else "")
        path = outdir / f"{stem}.csv"
        write_csv(path, ["dmu", "kappa"], cv.points, dict(meta, boundary=cv.kind.value))
        files.append(str(path))
        doc["curves"][cv.kind.value] = [list(pt) for pt in cv.points]
        if not cv.points:
            sys.stderr.write(f"warning: {cv.kind.value} undefined on the whole grid\n")
    if opts.get("with_kappa4"):
        dmus = [float(d) for d in np.linspace(*rng[:2], rng[2])]
        cfg = solver_config(opts)
        rows = _kappa4_rows(dmus, p, cfg, float(opts.get("tol")), _ic_policy(opts),
                            thresholds(opts), int(opts.get("workers")))
        pts = [(r["dmu"], r["kappa4"]) for r in rows if r["kappa4"] is not None]
        path = outdir / "kappa4.csv"
        write_csv(path, ["dmu", "kappa"], pts,
                  dict(meta, boundary="kappa4", solver=cfg.as_dict(), tol=float(opts.get("tol"))))
        files.append(str(path))
        doc["curves"]["kappa4"] = [list(pt) for pt in pts]
        doc["kappa4_rows"] = rows
    json_path = outdir / f"boundaries_{conv.value}.json"
    write_json(json_path, doc)
    _print_json({"files": files + [str(json_path)]})
    return 0


def cmd_diagram(opts: Options) -> int:
    dmu_rng = parse_range(opts.get("dmu", "4:7:20"))
    k_rng = parse_range(opts.get("kappa", DEFAULTS["kappa_range"]))
    conv = _convention(opts)
    p = model_params(opts, dmu=dmu_rng[0], kappa=k_rng[0])
    cfg = solver_config(opts)
    th = thresholds(opts)
    grid = GridSpec.from_ranges(dmu_rng, k_rng)
    diag = stability_diagram(grid, p, cfg, _ic_policy(opts), th, int(opts.get("workers")))
    outdir = output_dir(opts)
    meta = {"command": "diagram", "params": p.as_dict(), "solver": cfg.as_dict(),
            "thresholds": th.as_dict(), "convention": conv.value,
            "ic_policy": _ic_policy(opts).value if _ic_policy(opts) else "auto",
            "dmu_range": list(dmu_rng), "kappa_range": list(k_rng)}
    labels = diag.label_strings()
    rows = [(d, k, labels[i][j]) for i, d in enumerate(diag.dmu_axis)
            for j, k in enumerate(diag.kappa_axis)]
    csv_path = outdir / "diagram.csv"
    write_csv(csv_path, ["dmu", "kappa", "label"], rows, meta)
    overlays = {}
    if len(diag.dmu_axis) > 1 and p.is_antisymmetric_leader():
        try:
            for cv in boundary_curves((diag.dmu_axis[0], diag.dmu_axis[-1], 60), p, conv):
                overlays[cv.kind.value] = (cv.dmu, cv.kappa)
        except ValueError as exc:
            log.info("no boundary overlay: %s", exc)
    svg_path = outdir / "diagram.svg"
    svg_path.write_text(diagram_svg(diag.dmu_axis, diag.kappa_axis, labels, overlays,
                                    title="regimes", meta=meta), encoding="utf-8", newline="\n")
    counts = {}
    for row in labels:
        for lb in row:
            counts[lb] = counts.get(lb, 0) + 1
    _print_json({"files": [str(csv_path), str(svg_path)], "counts": counts})
    return 0


def cmd_kappa4(opts: Options) -> int:
    text = opts.get("dmu_list")
    dmus = parse_dmu_list(text) if text else []
    if not dmus:
        raise UsageError("--dmu-list must name at least one delta_mu")
    p = model_params(opts, dmu=dmus[0], kappa=DEFAULTS["kappa"])
    cfg = solver_config(opts)
    tol = float(opts.get("tol"))
    rows = _kappa4_rows(dmus, p, cfg, tol, _ic_policy(opts), thresholds(opts),
                        int(opts.get("workers")))
    outdir = output_dir(opts)
    meta = {"command": "kappa4", "params": p.as_dict(), "solver": cfg.as_dict(), "tol": tol,
            "thresholds": thresholds(opts).as_dict(), "convention": None}
    csv_path = outdir / "kappa4.csv"
    write_csv(csv_path, ["dmu", "kappa4"],
              [(r["dmu"], r["kappa4"] if r["kappa4"] is not None else math.nan) for r in rows],
              meta)
    json_path = outdir / "kappa4.json"
    write_json(json_path, dict(meta, rows=rows))
    sys.stdout.write(f"{'dmu':>8}  {'kappa4':>10}\n")
    for r in rows:
        val = f"{r['kappa4']:.2f}" if r["kappa4"] is not None else "NA"
        sys.stdout.write(f"{r['dmu']:>8.3g}  {val:>10}\n")
    for r in rows:
        if r["status"] != "ok":
            sys.stderr.write(f"dmu={r['dmu']:g}: {r['diagnostic']}\n")
    return 0 if any(r["status"] == "ok" for r in rows) else 1


def cmd_classify(opts: Options) -> int:
    scenario = None
    if opts.get("preset"):
        try:
            scenario = get_preset(opts.get("preset"))
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    p = model_params(opts, scenario.params if scenario else None)
    th = thresholds(opts)
    if opts.given("state"):
        x = np.array(parse_floats(opts.get("state"), 3))
        residual = float(np.max(np.abs(rhs_chain3(x, p))))
        eig = eigenvalues_3x3(jacobian_chain3(x, p))
        eq = Equilibrium(x, residual, eig, all(z.real < 0 for z in eig), converged=True,
                         diagnostic="state given on the command line")
    else:
        x_init = list(scenario.x_init) if scenario and not opts.given("dmu") else list(p.biases)
        eq = find_equilibrium(p, x_init, solver_config(opts))
    label = classify(eq, p.delta_mu(), th)
    _print_json({"label": label.as_dict(), "equilibrium": eq.as_dict(),
                 "params": p.as_dict(), "thresholds": th.as_dict()})
    return 0 if label.kind.value != "UNRESOLVED" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opinion-triad",
        description="Opinion dynamics of a chain triad under a leader: simulation and regime boundaries.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    names = ", ".join(s.name for s in scenario_presets())
    sp = sub.add_parser("simulate", help="integrate one scenario and write its trajectory")
    sp.add_argument("--preset", help=f"figure preset ({names})")
    sp.add_argument("--x-init", dest="x_init", help="initial opinions x1,x2,x3")
    sp.add_argument("--out", help="trajectory file (default <outdir>/<preset>.<format>)")
    sp.add_argument("--format", choices=["csv", "json"])
    sp.add_argument("--plot", action="store_true", default=None, help="also write an SVG plot")
    _add_model_flags(sp)
    _add_solver_flags(sp)
    _add_threshold_flags(sp)
    _add_common(sp)

    bp = sub.add_parser("boundaries", help="sample the kappa1..kappa3 (and kappa4) curves")
    bp.add_argument("--dmu", help="delta_mu range lo:hi:n (default 3.5:7:50)")
    bp.add_argument("--convention", help="true-derivative | composite (default)")
    bp.add_argument("--with-kappa4", dest="with_kappa4", action="store_true", default=None)
    bp.add_argument("--tol", type=float, help="kappa4 bisection width (default 0.005)")
    bp.add_argument("--workers", type=int)
    bp.add_argument("--ic-policy", dest="ic_policy", choices=[p.value for p in IcPolicy])
    _add_model_flags(bp, dmu_scalar=False)
    _add_solver_flags(bp)
    _add_threshold_flags(bp)
    _add_common(bp)

    dp = sub.add_parser("diagram", help="classify a (delta_mu, kappa) grid")
    dp.add_argument("--dmu", help="delta_mu range lo:hi:n (default 4:7:20)")
    dp.add_argument("--kappa", help="kappa range lo:hi:n (default 0.2:16:20)")
    dp.add_argument("--convention", help="convention for the kappa1 overlay")
    dp.add_argument("--workers", type=int)
    dp.add_argument("--ic-policy", dest="ic_policy", choices=[p.value for p in IcPolicy])
    _add_model_flags(dp, dmu_scalar=False)
    _add_solver_flags(dp)
    _add_threshold_flags(dp)
    _add_common(dp)

    kp = sub.add_parser("kappa4", help="simulated majority-rule threshold per delta_mu")
    kp.add_argument("--dmu-list", dest="dmu_list", help="e.g. 5,5.1,...,5.9")
    kp.add_argument("--tol", type=float)
    kp.add_argument("--workers", type=int)
    kp.add_argument("--ic-policy", dest="ic_policy", choices=[p.value for p in IcPolicy])
    _add_model_flags(kp, dmu_scalar=False)
    _add_solver_flags(kp)
    _add_threshold_flags(kp)
    _add_common(kp)

    cp = sub.add_parser("classify", help="label the equilibrium of one parameter set")
    cp.add_argument("--preset")
    cp.add_argument("--state", help="classify x1,x2,x3 directly instead of integrating")
    _add_model_flags(cp)
    _add_solver_flags(cp)
    _add_threshold_flags(cp)
    _add_common(cp)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "boundaries": cmd_boundaries,
    "diagram": cmd_diagram,
    "kappa4": cmd_kappa4,
    "classify": cmd_classify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = Options(args, load_config(args.config))
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog} {args.command}: error: {exc}\n")
        return 2
    except (ValueError, TypeError) as exc:
        sys.stderr.write(f"{parser.prog} {args.command}: invalid input: {exc}\n")
        return 2
    except (IntegrationError, ArithmeticError, UnresolvedError) as exc:
        sys.stderr.write(f"{parser.prog} {args.command}: error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"{parser.prog} {args.command}: cannot write output: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
