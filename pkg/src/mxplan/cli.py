"""Command-line entry point.

Subcommands: parse, ground, plan, baseline, validate, gen, compare, plot.
Exit status: 0 on success, 2 when a planner returns Cutoff/Deadend or a
plan fails validation, 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import benchgen, engine, grounder, pddlx, planner

_CFG_KEYS = ("N", "omega", "w1", "w2", "w3", "max_iterations",
             "cutoff_seconds", "seed", "detour_eps", "map_side")


def _load_config(args) -> planner.PlannerConfig:
    """Built-in defaults, overridden by --config file, then by CLI flags."""
    values: dict = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for k in _CFG_KEYS:
            if k in file_cfg:
                values[k] = file_cfg[k]
    for k in _CFG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    if "seed" not in values and os.environ.get("MXPLAN_SEED"):
        values["seed"] = int(os.environ["MXPLAN_SEED"])
    cfg = planner.PlannerConfig(**values)
    cfg.check()
    return cfg


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with planner settings")
    p.add_argument("--n-steps", dest="N", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)
    p.add_argument("--w3", type=float)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--cutoff", dest="cutoff_seconds", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", dest="detour_eps", type=float)
    p.add_argument("--map-side", dest="map_side", type=float)


def _load_model(args):
    dom = pddlx.parse_domain(Path(args.domain).read_text())
    prob = pddlx.parse_problem(Path(args.problem).read_text(), dom)
    return dom, prob, grounder.ground(dom, prob)


def _write_loss_csv(path: str, history) -> None:
    with open(path, "w") as fh:
        fh.write("iter,Lb,Lo,cost,Lall,Lstop\n")
        for it, lb, lo, cost, l_all, l_stop in history:
            stop = "inf" if math.isinf(l_stop) else f"{l_stop:.9g}"
            fh.write(f"{it},{lb:.9g},{lo:.9g},{cost:.9g},{l_all:.9g},{stop}\n")


def _cmd_parse(args) -> int:
    dom = pddlx.parse_domain(Path(args.domain).read_text())
    if args.problem:
        pddlx.parse_problem(Path(args.problem).read_text(), dom)
    print(f"ok: {len(dom.actions)} action schemas, "
          f"{len(dom.predicates)} predicates")
    return 0


def _cmd_ground(args) -> int:
    _, _, model = _load_model(args)
    print(f"ok: M={model.M} K={model.K} X={model.X} T={model.T}")
    if args.json:
        Path(args.json).write_text(model.to_json())
    return 0


def _cmd_plan(args) -> int:
    _, _, model = _load_model(args)
    cfg = _load_config(args)
    res = planner.solve(model, cfg)
    if args.loss_csv:
        _write_loss_csv(args.loss_csv, res.history)
    if not res.solved:
        print(f"{res.status} after {res.iterations} iterations",
              file=sys.stderr)
        return 2
    text = engine.format_plan(model, res.plan)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    print(f"Solved in {res.iterations} iterations, "
          f"cost {res.plan.total_cost:.4f}", file=sys.stderr)
    return 0


def _cmd_baseline(args) -> int:
    _, _, model = _load_model(args)
    cfg = _load_config(args)
    res = planner.solve_baseline(model, args.delta, cfg)
    if not res.solved:
        print(f"{res.status} after {res.iterations} expansions",
              file=sys.stderr)
        return 2
    text = engine.format_plan(model, res.plan)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return 0


def _cmd_validate(args) -> int:
    _, _, model = _load_model(args)
    plan = engine.parse_plan(model, Path(args.plan).read_text())
    verdict = engine.validate(model, plan)
    if verdict.valid:
        print(f"valid: {len(plan)} steps, cost {plan.total_cost:.4f}")
        return 0
    print(f"invalid at step {verdict.step}: {verdict.reason}")
    return 2


def _gen_spec(args) -> benchgen.GenSpec:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("MXPLAN_SEED", "0"))
    return benchgen.GenSpec(
        family=args.family, seed=seed,
        map_side=args.map_side, objectives=args.objectives,
        obstacles=args.obstacles, passengers=args.passengers,
        screen=not args.no_screen, obstacle_seed=args.obstacle_seed)


def _cmd_gen(args) -> int:
    spec = _gen_spec(args)
    dom_path, prob_path = benchgen.write_instance(spec, Path(args.out))
    print(dom_path)
    print(prob_path)
    return 0


def _compare_one(payload) -> tuple[str, float | None, float | None]:
    spec_kwargs, cfg_kwargs, delta = payload
    spec = benchgen.GenSpec(**spec_kwargs)
    dom, prob = benchgen.generate(spec)
    model = grounder.ground(dom, prob)
    cfg = planner.PlannerConfig(**cfg_kwargs)

    def score(res):
        if res.solved and res.plan is not None \
                and engine.validate(model, res.plan).valid:
            return res.plan.total_cost
        return None

    mx = score(planner.solve(model, cfg))
    base = score(planner.solve_baseline(model, delta, cfg))
    return f"{spec.family}-{spec.seed}", mx, base


def _cmd_compare(args) -> int:
    side = int(args.map_side) if args.map_side else 50
    cfg = _load_config(args)
    cfg_kwargs = {k: getattr(cfg, k) for k in _CFG_KEYS}
    cfg_kwargs["map_side"] = float(side)
    seeds = [int(s) for s in args.seeds.split(",")]
    payloads = []
    for seed in seeds:
        spec = benchgen.GenSpec(
            family=args.family, seed=seed, map_side=side,
            objectives=args.objectives, obstacles=args.obstacles)
        payloads.append((dataclasses.asdict(spec), cfg_kwargs, args.delta))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_compare_one, payloads))
    else:
        rows = [_compare_one(p) for p in payloads]
    costs = {}
    for name, mx, base in rows:
        costs[name, "mxplan"] = mx
        costs[name, f"baseline-d{args.delta:g}"] = base
    comp = benchgen.Comparison([r[0] for r in rows],
                               ["mxplan", f"baseline-d{args.delta:g}"], costs)
    print(comp.to_text(), end="")
    if args.out:
        Path(args.out).write_text(comp.to_csv())
    return 0


def _plan_positions(model, plan):
    """Agent position after each step (None when no movement fluents)."""
    pair = next((a.move_pair for a in model.actions
                 if a.move_pair is not None), None)
    if pair is None:
        return None
    kx, ky = pair
    s = engine.initial_state(model)
    points = [(s.V[kx], s.V[ky])]
    for st in plan.steps:
        s = engine.step(s, model.actions[st.index], st.theta, model)
        points.append((s.V[kx], s.V[ky]))
    return points


def _render_svg(model, plan, side: float) -> str:
    sc = 4.0  # px per map unit
    w = side * sc

    def pt(x, y):
        return (x * sc, (side - y) * sc)  # y grows upward

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{w:g}" height="{w:g}" viewBox="0 0 {w:g} {w:g}">',
             f'<rect width="{w:g}" height="{w:g}" fill="white" '
             f'stroke="black"/>']
    for r in model.regions.values():
        bb = r.bounding_box()
        x0, y0 = pt(bb[0], bb[3])
        bw = (bb[2] - bb[0]) * sc
        bh = (bb[3] - bb[1]) * sc
        if r.is_obstacle:
            style = 'fill="dimgray"'
        elif r.is_objective:
            style = 'fill="palegreen" stroke="green"'
        else:
            style = 'fill="none" stroke="gray" stroke-dasharray="4"'
        parts.append(f'<rect x="{x0:g}" y="{y0:g}" width="{bw:g}" '
                     f'height="{bh:g}" {style}/>')
    points = _plan_positions(model, plan)
    if points:
        poly = " ".join(f"{pt(x, y)[0]:g},{pt(x, y)[1]:g}"
                        for x, y in points)
        parts.append(f'<polyline points="{poly}" fill="none" '
                     f'stroke="blue" stroke-width="1.5"/>')
        sx, sy = pt(*points[0])
        parts.append(f'<circle cx="{sx:g}" cy="{sy:g}" r="5" '
                     f'fill="green"/>')
        for x, y in points[1:]:
            px, py = pt(x, y)
            parts.append(f'<circle cx="{px:g}" cy="{py:g}" r="3" '
                         f'fill="red"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _cmd_plot(args) -> int:
    _, _, model = _load_model(args)
    plan = engine.parse_plan(model, Path(args.plan).read_text())
    side = args.map_side
    if side is None:
        side = max([150.0] + [max(r.bounding_box()[2], r.bounding_box()[3])
                              for r in model.regions.values()])
    Path(args.output).write_text(_render_svg(model, plan, side))
    print(args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mxplan")
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("parse", help="syntax/semantic check of .pddlx files")
    p.add_argument("domain")
    p.add_argument("problem", nargs="?")
    p.set_defaults(fn=_cmd_parse)

    p = sub.add_parser("ground", help="ground and report model sizes")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--json", help="write the grounded model as JSON")
    p.set_defaults(fn=_cmd_ground)

    p = sub.add_parser("plan", help="gradient-based planner")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("-o", "--output", help="plan file (stdout otherwise)")
    p.add_argument("--loss-csv", help="write per-iteration losses")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_plan)

    p = sub.add_parser("baseline", help="discretized baseline planner")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--delta", type=float, default=10.0,
                   help="fixed movement step length")
    p.add_argument("-o", "--output")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("validate", help="replay a plan file")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("gen", help="generate a benchmark instance")
    p.add_argument("--family", choices=benchgen.FAMILIES, default="auv")
    p.add_argument("--seed", type=int)
    p.add_argument("--map-side", type=int, default=150)
    p.add_argument("--objectives", type=int, default=3)
    p.add_argument("--obstacles", type=int, default=2)
    p.add_argument("--passengers", type=int)
    p.add_argument("--obstacle-seed", type=int)
    p.add_argument("--no-screen", action="store_true")
    p.add_argument("--out", default="bench")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("compare", help="cost table: planner vs baseline")
    p.add_argument("--family", choices=benchgen.FAMILIES, default="auv")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--objectives", type=int, default=1)
    p.add_argument("--obstacles", type=int, default=1)
    p.add_argument("--delta", type=float, default=10.0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="CSV output path")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("plot", help="render a plan trajectory as SVG")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--map-side", type=float)
    p.set_defaults(fn=_cmd_plot)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        return args.fn(args)
    except (pddlx.PddlxError, engine.PlanFormatError,
            grounder.GroundingExplosion, benchgen.PlacementFailure,
            OSError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
