"""Command-line entry point: ``moranifs <subcommand> ...``.

Exit codes: 0 success, 1 fixture mismatch in ``repro``, 2 malformed
configuration, 3 a numeric guard or enumeration limit tripped.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from . import attractor, dimension, render, separation
from .config import SCHEMA_VERSION, dumps, load_system, parse_system, system_to_json
from .core import WeightSequence
from .errors import ConfigError, CutsetLimitError, GuardError, MoranError
from .families import family_system
from .words import DEFAULT_LIMIT, cutset


def _report(kind: str, body: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "report": kind, "version": __version__}
    out.update(body)
    return out


def _emit(doc: dict, path: str | None) -> None:
    text = dumps(doc)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_value(v: str):
    try:
        return json.loads(v)
    except json.JSONDecodeError:
        return v


def _system(args):
    if getattr(args, "system", None):
        return load_system(args.system)
    if getattr(args, "family", None):
        params = {}
        for item in args.param or []:
            if "=" not in item:
                raise ConfigError("/family/params", f"expected key=value, got {item!r}")
            k, v = item.split("=", 1)
            params[k] = _parse_value(v)
        return parse_system({"provider": "family", "family": {"name": args.family, "params": params}})
    raise ConfigError("", "give --system FILE or --family NAME")


def _floats(text: str, pointer: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(pointer, f"expected comma-separated numbers, got {text!r}") from None


def _bgrid(args, sys_):
    if args.bgrid in (None, "auto"):
        return None
    if os.path.exists(args.bgrid):
        with open(args.bgrid) as fh:
            return json.load(fh)
    return _floats(args.bgrid, "/bgrid")


def _anchor(args):
    return None if getattr(args, "anchor", None) is None else _floats(args.anchor, "/anchor")


def _write_cloud(cloud, path, fmt):
    if fmt == "bin":
        attractor.write_binary(cloud, path)
    else:
        attractor.write_csv(cloud, path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_info(args) -> int:
    s = _system(args)
    top = 8 if s.max_layer is None else min(8, s.max_layer)
    layers = []
    for n in range(1, top + 1):
        try:
            lay = s.layer(n)
            layers.append({"n": n, "maps": lay.size, "log_c1": lay.log_c1, "log_c2": lay.log_c2})
        except MoranError:
            tab = s.ratio_table(n)
            layers.append({"n": n, "log_maps": float(tab.layer_log_count()[-1]),
                           "log_c1": float(tab.layer_min()[-1]), "log_c2": float(tab.layer_max()[-1])})
    body = {"system": system_to_json(s), "layers": layers,
            "diagnostics": dimension.diagnostics(s)}
    _emit(_report("info", body), args.json)
    return 0


def cmd_cutset(args) -> int:
    s = _system(args)
    cs = cutset(s, args.b, args.limit)
    _emit(_report("cutset", cs.summary(include_words=args.words)), args.out)
    return 0


def cmd_cover(args) -> int:
    s = _system(args)
    cloud = attractor.cover(s, args.b, _anchor(args), args.limit)
    _write_cloud(cloud, args.out, args.format)
    _emit(_report("cover", {"points": len(cloud), "scale": cloud.scale, "b": args.b, "out": args.out}), args.json)
    return 0


def cmd_sample(args) -> int:
    s = _system(args)
    w = None
    if args.weights_s is not None:
        w = WeightSequence.ratio_power(args.weights_s)
    cloud = attractor.sample_measure(s, w, args.count, args.eps, args.seed, _anchor(args), args.threads)
    _write_cloud(cloud, args.out, args.format)
    _emit(_report("sample", {"points": len(cloud), "scale": cloud.scale, "seed": args.seed,
                             "depth": cloud.meta["depth"], "out": args.out}), args.json)
    return 0


def cmd_render(args) -> int:
    if args.input.endswith(".bin"):
        if args.dim is None:
            raise ConfigError("/dim", "--dim is required for binary clouds")
        pts = attractor.read_binary(args.input, args.dim)
    else:
        pts = attractor.read_csv(args.input)
    fmt = args.format or ("svg" if args.out.endswith(".svg") else "ppm")
    if fmt == "svg":
        render.write_svg(args.out, pts, args.width, args.height)
    else:
        render.write_ppm(args.out, pts, args.width, args.height, args.gamma)
    return 0


def cmd_dim(args) -> int:
    s = _system(args)
    grid = _bgrid(args, s)
    rep = dimension.dimension_report(s, kmax=args.kmax, b_grid=grid, s=args.s, nmax=args.nmax,
                                     limit=args.limit, box=not args.no_box)
    _emit(_report("dimension", rep.to_json()), args.json)
    return 0


def cmd_check_sep(args) -> int:
    s = _system(args)
    V = None
    if args.V:
        with open(args.V) as fh:
            V = separation.BoxSequence.from_json(json.load(fh))
    grid = _bgrid(args, s)
    if grid is None:
        grid = list(dimension.natural_grid(s, args.depth))
    out = {}
    cond = args.cond
    if cond == "mosc":
        out = separation.check_mosc(s, V, args.depth).to_json()
    elif cond == "mssc":
        out = separation.check_mssc(s, args.depth, limit=args.limit).to_json()
    elif cond == "mwhp":
        out = separation.gamma2_mwhp(s, grid, args.limit).to_json()
    elif cond == "mbdp":
        out = separation.gamma3_mbdp(s, args.depth).to_json()
    elif cond == "gamma4":
        out = separation.gamma4_neighbors(s, grid, args.limit, dedup=not args.words).to_json()
    elif cond == "mwsc":
        U = V if V is not None else separation.BoxSequence.from_system(s)
        out = separation.gamma4_neighbors(s, grid, args.limit, dedup=True, U=U).to_json()
    elif cond == "near-id":
        samples = separation.near_identity_gap(s, grid, args.limit, theta=args.theta)
        out = {"samples": [vars(x) for x in samples]}
    _emit(_report("separation", {"condition": cond, "result": out}), args.json)
    return 0


# ---------------------------------------------------------------------------
# repro


def load_fixtures() -> dict:
    return json.loads(resources.files("moranifs").joinpath("fixtures.json").read_text())


def _ex55(rule):
    s = family_system("ex55", a_rule=rule)
    s_val = math.log(2) / math.log(3)
    return {"dimH_est": dimension.hausdorff_dim(s, 200_000).estimate,
            "measure_class": dimension.measure_class(s, s_val).verdict}


def _ex57():
    s = family_system("ex57")
    ns = [2 ** m - 1 for m in range(1, 15)]
    box = dimension.box_dim_formula(s, log_b_grid=dimension.grid_at_layers(s, ns))
    return {"box_lower_est": box.lower, "box_upper_est": box.upper,
            "dimH_est": dimension.hausdorff_dim(s, 1 << 14).estimate}


def _ex58_grid(nmax):
    lb = []
    for n in range(1, nmax + 1):
        lb += [(-2.0 ** n + 1) * math.log(2), (-2.0 ** (n + 1) + 2) * math.log(2)]
    lb = np.array(lb)
    return lb[np.r_[True, np.diff(lb) < 0]]


def _ex58_full():
    s = family_system("ex58", digits="full")
    box = dimension.box_dim_formula(s, log_b_grid=_ex58_grid(20))
    cloud = attractor.cover(s, 2.0 ** -14, None)
    bc = dimension.box_count_empirical(cloud, [2.0 ** -k for k in range(1, 13)])
    grid = [math.exp(x) for x in _ex58_grid(3)]
    g4 = separation.gamma4_neighbors(s, grid)
    return {"box_upper_est": box.upper, "empirical_slope": bc.slope,
            "gamma4_max": max(v for _, v in g4.samples)}


def _ex58_endpoints():
    s = family_system("ex58", digits="endpoints")
    return {"dimH_est": dimension.hausdorff_dim(s, 1000).estimate}


def _ex53():
    out = {}
    for rho, key in ((1.0, "rho1"), (0.5, "rho1_2"), (0.25, "rho1_4")):
        s = family_system("ex53", rho=rho, form="psi")
        out[f"dimH_est_{key}"] = dimension.hausdorff_dim(s, 100_000).estimate
    phi = family_system("ex53", rho=0.5, form="phi")
    m = separation.check_mosc(phi, nmax=20)
    out["phi_mosc"] = m.verdict.status
    out["phi_measure_bounded_below"] = m.measure_bounded_below
    return out


def _ex54():
    s = family_system("ex54")
    m = separation.check_mosc(s, nmax=16)
    return {"moran_s": dimension.hausdorff_dim(s, 4096).estimate, "mosc": m.verdict.status,
            "measure_bounded_below": m.measure_bounded_below}


def _ex51():
    s = family_system("ex51")
    g2 = separation.gamma2_mwhp(s, [2.0 ** -n for n in range(1, 11)])
    g3 = separation.gamma3_mbdp(s, 10)
    return {"gamma2_b2^-10": g2.samples[-1][1], "gamma3_10": g3.samples[-1][1]}


def _ex56():
    s = family_system("ex56")
    return {"dimH_est": dimension.hausdorff_dim(s, 1024).estimate}


def _cantor():
    s = family_system("constant", r=1 / 3, N=2)
    box = dimension.box_dim_formula(s, [3.0 ** -k for k in range(1, 13)])
    return {"dimH_est": dimension.hausdorff_dim(s, 256).estimate, "box_lower_est": box.lower,
            "box_upper_est": box.upper, "mssc": separation.check_mssc(s).status}


def _ex59():
    grid = [19 / (2 ** n * 10) for n in range(4, 21, 2)]
    grown = separation.gamma4_neighbors(family_system("ex59", margin=0.5), grid).values
    flat = separation.gamma4_neighbors(family_system("ex59"), grid).values
    return {"gamma4_growth_margin": float(grown[-1] - grown[0]), "gamma4_max_unit": float(flat.max())}


REPRO = {
    "cantor": _cantor,
    "ex51": _ex51,
    "ex53": _ex53,
    "ex54": _ex54,
    "ex55-zero": lambda: _ex55("up"),
    "ex55-infinite": lambda: _ex55("down"),
    "ex55-finite": lambda: _ex55("geometric"),
    "ex56": _ex56,
    "ex57": _ex57,
    "ex58-full": _ex58_full,
    "ex58-endpoints": _ex58_endpoints,
    "ex59": _ex59,
}


def compare(observed, check) -> bool:
    op = check.get("op", "abs")
    want = check["value"]
    if op == "eq":
        return observed == want
    if observed is None:
        return False
    tol = check.get("tol", 0.0)
    if op == "abs":
        return abs(observed - want) <= tol
    if op == "ge":
        return observed >= want - tol
    if op == "le":
        return observed <= want + tol
    raise ValueError(f"unknown comparison {op!r}")


def run_repro(target: str) -> tuple:
    fixtures = load_fixtures()["targets"]
    if target not in REPRO or target not in fixtures:
        raise ConfigError("/target", f"unknown repro target {target!r}; known: {sorted(REPRO)}")
    observed = REPRO[target]()
    checks = {}
    ok = True
    for key, check in sorted(fixtures[target]["expected"].items()):
        got = observed.get(key)
        passed = compare(got, check)
        ok &= passed
        checks[key] = {"observed": got, "expected": check["value"], "op": check.get("op", "abs"),
                       "tol": check.get("tol"), "provenance": check["provenance"], "pass": passed}
    return ok, {"target": target, "description": fixtures[target]["description"], "checks": checks, "pass": ok}


def cmd_repro(args) -> int:
    ok, body = run_repro(args.target)
    _emit(_report("repro", body), args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moranifs", description="Moran-type IFS attractors, measures, dimensions and separation diagnostics.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def with_system(sp):
        g = sp.add_argument_group("system")
        g.add_argument("--system", help="system declaration (JSON)")
        g.add_argument("--family", help="built-in family name")
        g.add_argument("--param", action="append", help="family parameter key=value (repeatable)")
        return sp

    sp = with_system(sub.add_parser("info", help="summarize a system"))
    sp.add_argument("--json", metavar="PATH", help="write the JSON report here (default: stdout)")
    sp.set_defaults(fn=cmd_info)

    sp = with_system(sub.add_parser("cutset", help="enumerate I_b"))
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    sp.add_argument("--words", action="store_true", help="include the words themselves")
    sp.add_argument("--out", metavar="PATH", help="write the JSON summary here (default: stdout)")
    sp.set_defaults(fn=cmd_cutset)

    sp = with_system(sub.add_parser("cover", help="deterministic cover of K_1"))
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--anchor")
    sp.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "bin"), default="csv")
    sp.add_argument("--json", metavar="PATH", help="write the JSON report here (default: stdout)")
    sp.set_defaults(fn=cmd_cover)

    sp = with_system(sub.add_parser("sample", help="sample the invariant measure"))
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--anchor")
    sp.add_argument("--weights-s", type=float, default=None, help="use ratio-power weights with this s")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("csv", "bin"), default="csv")
    sp.add_argument("--json", metavar="PATH", help="write the JSON report here (default: stdout)")
    sp.set_defaults(fn=cmd_sample)

    sp = sub.add_parser("render", help="rasterize a 1D/2D cloud")
    sp.add_argument("--input", required=True)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("ppm", "svg"))
    sp.add_argument("--width", type=int, default=512)
    sp.add_argument("--height", type=int, default=512)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.set_defaults(fn=cmd_render)

    sp = with_system(sub.add_parser("dim", help="dimension report"))
    sp.add_argument("--kmax", type=int, default=dimension.DEFAULT_KMAX)
    sp.add_argument("--bgrid", default="auto", help="auto, comma list, or JSON file")
    sp.add_argument("--s", type=float, default=None, help="exponent for measure_class")
    sp.add_argument("--nmax", type=int, default=1 << 16)
    sp.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    sp.add_argument("--no-box", action="store_true")
    sp.add_argument("--json", metavar="PATH", help="write the JSON report here (default: stdout)")
    sp.set_defaults(fn=cmd_dim)

    sp = with_system(sub.add_parser("check-sep", help="separation diagnostics"))
    sp.add_argument("--cond", required=True,
                    choices=("mosc", "mwsc", "mssc", "mwhp", "mbdp", "gamma4", "near-id"))
    sp.add_argument("--V", help="box sequence JSON (V_n for mosc, U_n for mwsc)")
    sp.add_argument("--bgrid", default="auto")
    sp.add_argument("--depth", type=int, default=12)
    sp.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    sp.add_argument("--words", action="store_true", help="gamma4: count words instead of maps")
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--json", metavar="PATH", help="write the JSON report here (default: stdout)")
    sp.set_defaults(fn=cmd_check_sep)

    sp = sub.add_parser("repro", help="reproduce a built-in example against fixtures")
    sp.add_argument("target", choices=sorted(REPRO))
    sp.add_argument("--json", metavar="PATH", help="write the JSON report here (default: stdout)")
    sp.set_defaults(fn=cmd_repro)
    return p


def _fail(kind: str, code: int, **fields) -> int:
    sys.stderr.write(dumps({"error": kind, **fields}))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        return _fail("config", 2, pointer=exc.pointer or "/", message=exc.message)
    except CutsetLimitError as exc:
        return _fail("guard", 3, guard="cutset_limit", message=str(exc), count=exc.count)
    except GuardError as exc:
        return _fail("guard", 3, guard=exc.guard, message=str(exc))
    except MoranError as exc:
        return _fail(type(exc).__name__, 3, message=str(exc))


if __name__ == "__main__":
    sys.exit(main())
