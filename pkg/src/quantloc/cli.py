"""Command line: ``quantloc design | certify | simulate | bounds | render``.

Exit status is 0 on success, 1 when a design or certificate is infeasible
(or a requested verification fails) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import fileio
from .centers import SeparationError, WeightScheme
from .control import (
    CertificationError,
    CertParams,
    certify,
    destabilization_measure,
    lyapunov_solve,
)
from .geometry import DomainSpec, GeometryError
from .lloyd import init_points, lloyd_run, sukharev_bounds
from .quantizer import SphericalQuantizer, build_product, log_radial
from .render import render_svg
from .sim import ZoomSchedule, simulate_dynamic, simulate_static, verify_certificate

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2
PROBLEMS = {"multicenter": "uniform", "spherical": "uniform", "radial-weighted": "radial_inverse"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings of one invocation; unset options take these defaults."""

    seed: int = 0
    tol: float = 1e-6
    max_iters: int = 100
    patience: int = 3
    init: str = "halton"
    restarts: int = 1
    arc_resolution: int = 64


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not -(2 ** 63) <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v % (2 ** 64)


def _emit(doc: dict) -> None:
    sys.stdout.write(fileio.dumps(doc))


def _domain(args) -> DomainSpec:
    kind = args.domain or ("circle" if args.problem == "spherical" else
                           "annulus" if args.problem == "radial-weighted" else "disk")
    if args.problem == "spherical" and kind != "circle":
        raise UsageError("the spherical problem lives on the circle domain")
    if args.problem == "radial-weighted" and kind != "annulus":
        raise UsageError("the radial-weighted problem needs an annulus domain")
    if args.problem == "multicenter" and kind == "circle":
        raise UsageError("use --problem spherical on the circle domain")
    M = 1.0 if args.M is None else args.M
    if kind == "annulus":
        m = 0.5 * M if args.m is None else args.m
        if not 0 < m < M:
            raise UsageError("annulus requires 0 < m < M")
        return DomainSpec.annulus(m, M, arc_resolution=args.arc_resolution)
    if kind == "square":
        return DomainSpec.square(M)
    if kind == "circle":
        return DomainSpec.circle(M, arc_resolution=args.arc_resolution)
    return DomainSpec.disk(M, arc_resolution=args.arc_resolution)


def cmd_design(args) -> int:
    cfg = RunConfig(args.seed, args.tol, args.max_iters, args.patience, args.init, args.restarts,
                    args.arc_resolution)
    domain = _domain(args)
    scheme = WeightScheme(PROBLEMS[args.problem])
    best = None
    for r in range(cfg.restarts):
        try:
            pts = init_points(domain, args.N, seed=(cfg.seed + r) % (2 ** 64), scheme=scheme,
                              method=cfg.init)
            design, report = lloyd_run(pts, domain, scheme, tol=cfg.tol,
                                       max_iters=cfg.max_iters, patience=cfg.patience)
        except SeparationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if best is None or design.cost < best[0].cost:
            best = (design, report, cfg.seed + r)
    design, report, seed = best
    if args.out:
        fileio.save(fileio.design_to_dict(design), args.out)
    summary = {
        "version": fileio.VERSION,
        "kind": "lloyd_report",
        "problem": args.problem,
        "N": args.N,
        "seed": seed,
        "cost": design.cost,
        "iterations": report.iterations,
        "converged": report.converged,
        "cost_trace": report.cost_trace,
        "config": asdict(cfg),
    }
    if report.sukharev_lower is not None:
        summary["sukharev"] = [report.sukharev_lower, report.sukharev_upper]
    _emit(summary)
    return EXIT_OK


def _load_plant(path):
    plant, params = fileio.plant_from_dict(fileio.load(path))
    return plant, params


def _merge_params(args, params: CertParams | None, design) -> CertParams:
    base = asdict(params) if params is not None else {}
    for key in ("M", "epsilon", "m", "lam", "N1", "N2"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    dom = design.domain
    if "M" not in base or base["M"] is None:
        base["M"] = dom.M if dom.kind != "circle" else 1.0
    if (base.get("m") in (None, 0.0)) and dom.kind == "annulus":
        base["m"] = dom.m
    if base.get("epsilon") is None:
        base["epsilon"] = 0.1
    if base.get("m") is None:
        base["m"] = 0.0
    try:
        return CertParams(**base)
    except CertificationError as exc:
        raise UsageError(str(exc)) from exc


def _certificate(args, plant, params, design):
    cert = lyapunov_solve(plant)
    lemma = args.lemma or {"circle": "L3", "annulus": "L4"}.get(design.domain.kind, "L2")
    if lemma == "L2":
        kind = args.measure
        measure = destabilization_measure(design, cert, kind)
        rep = certify("L2", cert, params, measure, measure_kind=kind)
    elif lemma == "L3":
        measure = destabilization_measure(design, cert, "delta_s")
        rep = certify("L3", cert, params, measure, r2_exponent=args.r2_exponent)
    else:
        measure = destabilization_measure(design, cert, "delta_rw")
        rep = certify("L4", cert, params, measure)
    return cert, lemma, rep


def cmd_certify(args) -> int:
    plant, params = _load_plant(args.plant)
    design = fileio.design_from_dict(fileio.load(args.design))
    params = _merge_params(args, params, design)
    cert, lemma, rep = _certificate(args, plant, params, design)
    doc = fileio.report_to_dict(rep)
    if args.out:
        fileio.save(doc, args.out)
    _emit(doc)
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    plant, params = _load_plant(args.plant)
    design = fileio.design_from_dict(fileio.load(args.design))
    x0 = np.array(args.x0, dtype=float)
    summary = {"version": fileio.VERSION, "kind": "simulation", "mode": args.mode}
    if args.mode == "dynamic":
        params = _merge_params(args, params, design)
        cert = lyapunov_solve(plant)
        sched = ZoomSchedule(args.mu0, args.review_dt, args.growth_rate)
        res = simulate_dynamic(plant, cert, design, x0, sched, args.t_final, params.epsilon,
                               dt=args.dt, record_every=args.record_every)
        traj = res.trajectory
        summary.update(contraction=res.contraction, t0=res.t0, stage_M=res.stage_M,
                       stage_T=res.stage_T)
        verdict = None
    else:
        params = _merge_params(args, params, design)
        cert, lemma, rep = _certificate(args, plant, params, design)
        quantizer = design
        if lemma == "L3":
            if params.lam is None or params.N1 is None:
                raise UsageError("L3 simulation needs --lam and --N1")
            quantizer = build_product(log_radial(params.M, params.N1, params.lam, cert.pbk_norm),
                                      SphericalQuantizer.from_design(design))
        traj = simulate_static(plant, cert, quantizer, x0, args.t_final, dt=args.dt,
                               report=rep, record_every=args.record_every)
        summary["report"] = fileio.report_to_dict(rep)
        verdict = None
        if rep.feasible and cert.V(x0) <= rep.R1_level:
            v = verify_certificate(traj, rep)
            verdict = {"passed": v.passed, "violation": v.violation, "t": v.t}
            summary["verification"] = verdict
    summary["events"] = [{"t": e.t, "kind": e.kind, "data": list(e.data)} for e in traj.events]
    summary["final_state"] = traj.final_state.tolist()
    text = fileio.trajectory_csv(traj)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.events:
        fileio.save(summary, args.events)
    _emit(summary)
    if args.verify and verdict is not None and not verdict["passed"]:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_bounds(args) -> int:
    lo, hi = sukharev_bounds(args.N, args.n)
    print(f"{lo!r} {hi!r}")
    return EXIT_OK


def cmd_render(args) -> int:
    design = fileio.design_from_dict(fileio.load(args.design))
    cert = levels = None
    if args.plant:
        plant, params = _load_plant(args.plant)
        params = _merge_params(args, params, design)
        cert, _, rep = _certificate(args, plant, params, design)
        levels = {"R1": rep.R1_level, "R2": rep.R2_level}
    svg = render_svg(design, cert, levels, title=f"{design.domain.kind} N={design.N}")
    with open(args.out, "w") as fh:
        fh.write(svg)
    return EXIT_OK


def _cert_options(p, lemma_default=None):
    p.add_argument("--lemma", choices=("L2", "L3", "L4"), default=lemma_default)
    p.add_argument("--epsilon", type=_positive_float)
    p.add_argument("-M", "--M", dest="M", type=_positive_float)
    p.add_argument("-m", "--m", dest="m", type=_positive_float)
    p.add_argument("--lam", type=_positive_float)
    p.add_argument("--N1", type=_positive_int)
    p.add_argument("--N2", type=_positive_int)
    p.add_argument("--measure", choices=("delta", "delta_pbk"), default="delta")
    p.add_argument("--r2-exponent", dest="r2_exponent", choices=("N1", "2N1"), default="N1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="optimize quantization points with the Lloyd descent")
    d.add_argument("--domain", choices=("disk", "annulus", "square", "circle"))
    d.add_argument("--problem", choices=tuple(PROBLEMS), default="multicenter")
    d.add_argument("-N", type=_positive_int, required=True)
    d.add_argument("-M", "--M", dest="M", type=_positive_float)
    d.add_argument("-m", "--m", dest="m", type=_positive_float)
    d.add_argument("--seed", type=_seed, default=0)
    d.add_argument("--tol", type=_positive_float, default=RunConfig.tol)
    d.add_argument("--max-iters", dest="max_iters", type=_positive_int, default=RunConfig.max_iters)
    d.add_argument("--patience", type=_positive_int, default=RunConfig.patience)
    d.add_argument("--init", choices=("halton", "lattice"), default=RunConfig.init)
    d.add_argument("--restarts", type=_positive_int, default=RunConfig.restarts)
    d.add_argument("--arc-resolution", dest="arc_resolution", type=_positive_int,
                   default=RunConfig.arc_resolution)
    d.add_argument("--out", help="write the design JSON here")
    d.set_defaults(func=cmd_design)

    c = sub.add_parser("certify", help="certificate report for a plant and a design")
    c.add_argument("--plant", required=True)
    c.add_argument("--design", required=True)
    _cert_options(c)
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("simulate", help="simulate the quantized closed loop")
    s.add_argument("--plant", required=True)
    s.add_argument("--design", required=True)
    s.add_argument("--x0", type=float, nargs=2, required=True, metavar=("X1", "X2"))
    s.add_argument("--t-final", dest="t_final", type=_positive_float, default=10.0)
    s.add_argument("--dt", type=_positive_float)
    s.add_argument("--mode", choices=("static", "dynamic"), default="static")
    s.add_argument("--mu0", type=_positive_float, default=1.0)
    s.add_argument("--review-dt", dest="review_dt", type=_positive_float, default=0.1)
    s.add_argument("--growth-rate", dest="growth_rate", type=_positive_float)
    s.add_argument("--record-every", dest="record_every", type=_positive_int, default=1)
    s.add_argument("--verify", action="store_true",
                   help="exit 1 if the trajectory violates the certificate")
    s.add_argument("--out", help="trajectory CSV")
    s.add_argument("--events", help="write the event log JSON here")
    _cert_options(s)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="Sukharev dispersion bounds for the unit cube")
    b.add_argument("N", type=_positive_int)
    b.add_argument("n", type=_positive_int)
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("render", help="draw a design as SVG")
    r.add_argument("design")
    r.add_argument("out")
    r.add_argument("--plant", help="overlay the R1/R2 ellipses of this plant's certificate")
    _cert_options(r)
    r.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (fileio.FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CertificationError, GeometryError, SeparationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
