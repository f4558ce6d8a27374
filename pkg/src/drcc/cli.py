"""Command line harness: ``drcc {gen,solve,compare,oracle,export}``.

Exit codes: 0 success (time, gap and node limits are report fields),
2 configuration or input error, 3 infeasible, 4 oracle cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .instances import (
    InstanceSchemaError,
    TransportationInstance,
    canonical_toy,
    dumps_instance,
    gen_building_load,
    gen_transportation,
    load_instance,
)
from .lpformat import export_lp, export_mps
from .reformulate import MODELS, FiniteOptions, build_model, default_generators
from .reformulate.cuts import ConeOASeparator
from .reformulate.instance import DrccInstance
from .samples import InfeasibleCurveError
from .solve import Limits, OracleCapError, OracleInfeasible, branch_and_cut, oracle_finite_enum, oracle_grid, oracle_jk_enum
from .solve.bnc import GOMORY_ROUNDS
from .solve.lp import BACKENDS, DEFAULT_BACKEND

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CAP = 0, 2, 3, 4
CUT_NAMES = ("ordering", "star", "gomory", "polymatroid", "oa")
REPORT_FIELDS = (
    "instance", "model", "period", "D", "N", "status", "t_bs", "t_solve", "t_total", "gap", "nodes",
    "objective", "bound", "cuts_ordering", "cuts_star", "cuts_gomory", "cuts_polymatroid", "cuts_oa", "alphas",
)
TIMING_FIELDS = ("instance", "model", "period", "t_bs", "t_solve", "t_total")
ALPHA_FIELDS = ("instance", "model", "period", "constraint", "alpha")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    instance: str
    model: str = "finite"
    cuts: tuple = CUT_NAMES
    gap: float = 1e-4
    time_limit: Optional[float] = None
    nodes: Optional[int] = None
    seed: int = 0
    deterministic: bool = False
    threads: int = 1
    out: str = "."
    backend: str = DEFAULT_BACKEND
    prune_pairs: bool = False

    def limits(self) -> Limits:
        return Limits(time=self.time_limit, gap=self.gap, nodes=self.nodes)


@dataclass
class ReportRow:
    instance: str
    model: str
    period: int
    D: int
    N: int
    status: str
    t_bs: float
    t_solve: float
    t_total: float
    gap: float
    nodes: int
    objective: float
    bound: float
    cuts: dict = field(default_factory=dict)
    alphas: list = field(default_factory=list)

    def record(self, scrub_times: bool) -> dict:
        t = (0.0, 0.0, 0.0) if scrub_times else (self.t_bs, self.t_solve, self.t_total)
        return {
            "instance": self.instance,
            "model": self.model,
            "period": self.period,
            "D": self.D,
            "N": self.N,
            "status": self.status,
            "t_bs": _fmt(t[0]),
            "t_solve": _fmt(t[1]),
            "t_total": _fmt(t[2]),
            "gap": _fmt(self.gap),
            "nodes": self.nodes,
            "objective": _fmt(self.objective),
            "bound": _fmt(self.bound),
            "cuts_ordering": self.cuts.get("ordering", 0),
            "cuts_star": self.cuts.get("star", 0),
            "cuts_gomory": self.cuts.get("gomory", 0),
            "cuts_polymatroid": self.cuts.get("polymatroid", 0),
            "cuts_oa": self.cuts.get("hyperbolic-oa", 0),
            "alphas": ";".join(_fmt(a) for a in self.alphas),
        }


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def _write_csv(path: Path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------


@dataclass
class Unit:
    """One optimization problem of an instance file (a building-load day has one per period)."""

    inst: DrccInstance
    instance_id: str
    period: int
    D: int
    N: int


def _solve_drcc(inst: DrccInstance, cfg: RunConfig):
    cuts = set(cfg.cuts)
    finite = FiniteOptions(ordering_cuts="ordering" in cuts, star_cut="star" in cuts)
    model = build_model(cfg.model, inst, finite=finite, prune_pairs=cfg.prune_pairs)
    gens = default_generators(model, "lazy" if "polymatroid" in cuts else "integer", "lazy" if "oa" in cuts else "integer")
    report = branch_and_cut(
        model,
        gens,
        cfg.limits(),
        backend=cfg.backend,
        deterministic=cfg.deterministic,
        threads=cfg.threads,
        gomory_rounds=GOMORY_ROUNDS if "gomory" in cuts else 0,
    )
    return model, report


def _row(unit: Unit, cfg: RunConfig, report) -> ReportRow:
    return ReportRow(
        unit.instance_id,
        cfg.model,
        unit.period,
        unit.D,
        unit.N,
        report.status,
        report.preprocess_seconds,
        report.solve_seconds,
        report.total_seconds,
        report.gap,
        report.nodes,
        report.objective,
        report.bound,
        dict(report.cut_counts),
        list(report.alphas) if report.has_incumbent else [],
    )


def _infeasible_row(unit: Unit, cfg: RunConfig) -> ReportRow:
    return ReportRow(unit.instance_id, cfg.model, unit.period, unit.D, unit.N, "infeasible", 0.0, 0.0, 0.0, math.inf, 0, math.nan, math.nan)


def _instance_id(obj, path: str) -> str:
    return getattr(obj, "name", None) or Path(path).stem


def solve_instance(obj, cfg: RunConfig, instance_id: str):
    """Yield ``(unit, report or None)``; building-load periods chain the temperature state."""
    if isinstance(obj, TransportationInstance):
        unit = Unit(obj.to_drcc(), instance_id, 1, obj.customers, obj.n_samples)
        try:
            yield unit, _solve_drcc(unit.inst, cfg)[1]
        except InfeasibleCurveError:
            yield unit, None
        return
    x_prev = obj.x0
    n = obj.n
    for t in range(obj.periods):
        unit = Unit(obj.period_instance(t, x_prev), instance_id, t + 1, 1, len(obj.pv[t]))
        try:
            report = _solve_drcc(unit.inst, cfg)[1]
        except InfeasibleCurveError:
            report = None
        yield unit, report
        if report is None or not report.has_incumbent:
            return
        x_prev = np.asarray(report.decision[n : 2 * n])


def _load(path: str):
    try:
        return load_instance(path)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except InstanceSchemaError as exc:
        raise ConfigError(str(exc)) from None


def _config(args) -> RunConfig:
    cuts = _parse_cuts(args.cuts)
    threads = args.threads if args.threads is not None else int(os.environ.get("DRCC_THREADS", "1") or 1)
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    if args.gap is not None and not args.gap >= 0:
        raise ConfigError("--gap must be nonnegative")
    return RunConfig(
        instance=getattr(args, "instance", ""),
        model=getattr(args, "model", "finite"),
        cuts=cuts,
        gap=args.gap,
        time_limit=args.time_limit,
        nodes=args.nodes,
        seed=args.seed,
        deterministic=args.deterministic,
        threads=threads,
        out=args.out,
        backend=args.backend,
        prune_pairs=args.prune_pairs,
    )


def _parse_cuts(text: str) -> tuple:
    if text in ("all", ""):
        return CUT_NAMES
    if text == "none":
        return ()
    names = tuple(dict.fromkeys(s.strip() for s in text.split(",") if s.strip()))
    bad = [s for s in names if s not in CUT_NAMES]
    if bad:
        raise ConfigError(f"--cuts: unknown cut family {bad[0]!r}; choose from {', '.join(CUT_NAMES)}, all, none")
    return names


def _check_compat(obj, model: str):
    if model == "milp-binary" and isinstance(obj, TransportationInstance):
        raise ConfigError("model milp-binary needs a technology row over binary variables only; transportation shipments are continuous")


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, args, extra: dict):
    doc = {"version": __version__, "command": args.command}
    for key, val in sorted(vars(args).items()):
        if key in ("func",):
            continue
        doc[key] = val
    doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n")


def cmd_solve(args) -> int:
    cfg = _config(args)
    obj = _load(args.instance)
    _check_compat(obj, cfg.model)
    out = _outdir(cfg.out)
    if args.manifest:
        _manifest(out, args, {"resolved": asdict(cfg)})
    iid = _instance_id(obj, args.instance)
    rows, alpha_rows, solutions = [], [], []
    infeasible = False
    for unit, report in solve_instance(obj, cfg, iid):
        if report is None:
            row = _infeasible_row(unit, cfg)
            infeasible = True
        else:
            row = _row(unit, cfg, report)
            infeasible |= report.status == "infeasible"
        rows.append(row)
        names = unit.inst.names
        sol = {"period": unit.period, "status": row.status, "objective": _json_num(row.objective)}
        if report is not None and report.has_incumbent:
            x = report.decision
            sol["x"] = {nm: _json_num(v) for nm, v in zip(names, x)}
            sol["alpha"] = {cc.name: _json_num(a) for cc, a in zip(unit.inst.constraints, report.alphas)}
            sol["binaries"] = {k: int(v) for k, v in report.binaries.items()}
        solutions.append(sol)
        for i, cc in enumerate(unit.inst.constraints):
            a = report.alphas[i] if (report is not None and report.has_incumbent) else math.nan
            alpha_rows.append({"instance": iid, "model": cfg.model, "period": unit.period, "constraint": cc.name or f"c{i}", "alpha": _fmt(a)})
    _write_csv(out / "report.csv", REPORT_FIELDS, [r.record(cfg.deterministic) for r in rows])
    _write_csv(out / "alphas.csv", ALPHA_FIELDS, alpha_rows)
    if cfg.deterministic:
        _write_csv(out / "timings.csv", TIMING_FIELDS, [{k: v for k, v in r.record(False).items() if k in TIMING_FIELDS} for r in rows])
    doc = {"instance": iid, "model": cfg.model, "periods": solutions}
    (out / "solution.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    for r in rows:
        print(f"{r.instance} period {r.period}: {r.status} objective {_fmt(r.objective)} nodes {r.nodes}")
    if infeasible:
        print("infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else None


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _relative_diff(base: float, other: float) -> float:
    if not (math.isfinite(base) and math.isfinite(other)):
        return math.nan
    return (base - other) / max(1.0, abs(base))


def trend_flag(rows: list[dict]) -> str:
    """``ok`` when the mean continuous Diff shrinks from the smallest to the largest N on matched seeds."""
    by_n: dict[int, dict] = {}
    for r in rows:
        d = r.get("diff_continuous")
        if d is None or not math.isfinite(d):
            continue
        by_n.setdefault(r["N"], {})[r["seed"]] = d
    if len(by_n) < 2:
        return "n/a"
    lo, hi = min(by_n), max(by_n)
    seeds = sorted(set(by_n[lo]) & set(by_n[hi]), key=str)
    if not seeds:
        return "n/a"
    small = float(np.mean([by_n[lo][s] for s in seeds]))
    large = float(np.mean([by_n[hi][s] for s in seeds]))
    return "ok" if large < small else "fail"


def cmd_compare(args) -> int:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    models = list(dict.fromkeys(models))
    if len(models) < 2:
        raise ConfigError("compare needs at least two models in --models")
    bad = [m for m in models if m not in MODELS]
    if bad:
        raise ConfigError(f"--models: unknown model {bad[0]!r}")
    if "finite" not in models:
        raise ConfigError("compare reports differences versus the finite model; include it in --models")
    args.instance = ""
    base_cfg = _config(args)
    out = _outdir(base_cfg.out)
    objs = [(p, _load(p)) for p in args.instances]
    for _, obj in objs:
        for m in models:
            _check_compat(obj, m)
    if args.manifest:
        _manifest(out, args, {"resolved": asdict(base_cfg)})
    rows = []
    infeasible = False
    for path, obj in objs:
        iid = _instance_id(obj, path)
        per_model = {}
        for m in models:
            cfg = RunConfig(**{**asdict(base_cfg), "model": m, "instance": path})
            per_model[m] = list(solve_instance(obj, cfg, iid))
        for k, (unit, _) in enumerate(per_model[models[0]]):
            rec = {"instance": iid, "seed": getattr(obj, "seed", None), "period": unit.period, "D": unit.D, "N": unit.N}
            z = {}
            for m in models:
                rep = per_model[m][k][1] if k < len(per_model[m]) else None
                if rep is None or not rep.has_incumbent:
                    infeasible = True
                    z[m] = math.nan
                    rec[f"status_{m}"] = "infeasible" if rep is None else rep.status
                else:
                    z[m] = rep.objective
                    rec[f"status_{m}"] = rep.status
                rec[f"z_{m}"] = z[m]
            for m in models:
                if m != "finite":
                    rec[f"diff_{m}"] = _relative_diff(z["finite"], z[m])
            if "continuous" in models and math.isfinite(z["finite"]) and math.isfinite(z["continuous"]):
                ok = z["finite"] >= z["continuous"] - 1e-6 * max(1.0, abs(z["finite"]))
                rec["dominance"] = "ok" if ok else "fail"
            else:
                rec["dominance"] = "n/a"
            rows.append(rec)
    trend = trend_flag(rows)
    fields = ["instance", "seed", "period", "D", "N"]
    fields += [f"z_{m}" for m in models] + [f"diff_{m}" for m in models if m != "finite"]
    fields += [f"status_{m}" for m in models] + ["dominance", "trend"]
    out_rows = []
    for r in rows:
        r["trend"] = trend
        out_rows.append({k: (_fmt(v) if isinstance(v, float) else ("" if v is None else v)) for k, v in r.items()})
    _write_csv(out / "compare.csv", fields, out_rows)
    fails = [r for r in rows if r["dominance"] == "fail"]
    for r in fails:
        print(f"dominance check failed on {r['instance']} period {r['period']}", file=sys.stderr)
    print(f"rows={len(rows)} dominance={'fail' if fails else 'ok'} trend={trend}")
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


# ---------------------------------------------------------------------------
# oracle and export
# ---------------------------------------------------------------------------


def _oracle_one(inst: DrccInstance, model: str, resolution: int) -> dict:
    if model == "finite":
        o = oracle_finite_enum(inst)
        return {"method": "level-enumeration", "objective": float(o.objective), "alphas": list(o.alphas), "x": o.x}
    if inst.n_constraints == 1:
        o = oracle_jk_enum(inst)
        return {"method": "pair-enumeration", "objective": float(o.objective), "alphas": [o.alpha], "x": o.x}
    o = oracle_grid(inst, resolution)
    return {"method": "tolerance-grid", "objective": float(o.upper), "lower": float(o.lower), "alphas": list(o.alphas), "x": o.x}


def cmd_oracle(args) -> int:
    if args.model not in ("finite", "continuous"):
        raise ConfigError("oracles exist for the finite and continuous models only")
    obj = _load(args.instance)
    out = _outdir(args.out)
    iid = _instance_id(obj, args.instance)
    periods = []
    if isinstance(obj, TransportationInstance):
        units = [(1, obj.to_drcc())]
    else:
        units = None
    try:
        if units is not None:
            for period, inst in units:
                res = _oracle_one(inst, args.model, args.resolution)
                periods.append((period, inst, res))
        else:
            x_prev = obj.x0
            for t in range(obj.periods):
                inst = obj.period_instance(t, x_prev)
                res = _oracle_one(inst, args.model, args.resolution)
                periods.append((t + 1, inst, res))
                x_prev = np.asarray(res["x"][obj.n : 2 * obj.n])
    except OracleCapError as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (OracleInfeasible, InfeasibleCurveError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    docs = []
    for period, inst, res in periods:
        d = {k: v for k, v in res.items() if k != "x"}
        d["period"] = period
        d["x"] = {nm: _json_num(v) for nm, v in zip(inst.names, res["x"])}
        docs.append(d)
        print(f"{iid} period {period}: oracle objective {_fmt(res['objective'])} ({res['method']})")
    doc = {"instance": iid, "model": args.model, "periods": docs}
    (out / "oracle.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def cmd_export(args) -> int:
    obj = _load(args.instance)
    _check_compat(obj, args.model)
    if isinstance(obj, TransportationInstance):
        inst = obj.to_drcc()
    else:
        if not 1 <= args.period <= obj.periods:
            raise ConfigError(f"--period must lie in 1..{obj.periods}")
        inst = obj.period_instance(args.period - 1)
    try:
        model = build_model(args.model, inst, prune_pairs=args.prune_pairs)
    except InfeasibleCurveError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.format == "lp":
        data = export_lp(model)
    else:
        if (model.cones or model.hooks) and not args.linearize_oa:
            raise ConfigError("MPS cannot hold cones; pass --linearize-oa to export a linear outer approximation")
        cuts = ConeOASeparator(model).seed() if args.linearize_oa else None
        data = export_mps(model, cuts)
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_bytes(data)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    vals = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            vals.extend(range(int(a), int(b) + 1))
        else:
            vals.append(int(part))
    if not vals:
        raise ConfigError(f"empty integer list {text!r}")
    return vals


def _gen_overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = json.loads(v)
    return out


def cmd_gen(args) -> int:
    out = Path(args.out)
    kw = _gen_overrides(args.set)
    made = []
    try:
        if args.family == "toy":
            made.append(("toy", canonical_toy()))
        else:
            for seed in _int_list(args.seeds):
                for n_s in _int_list(args.N):
                    if args.family == "transportation":
                        inst = gen_transportation(seed, args.I, args.D, n_s, **kw)
                    else:
                        inst = gen_building_load(seed, args.n, args.T, n_s, **kw)
                    made.append((inst.name, inst))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if len(made) == 1 and out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(dumps_instance(made[0][1]))
        print(out)
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    for name, inst in made:
        p = out / f"{name}.json"
        p.write_text(dumps_instance(inst))
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--cuts", default="all", help=f"comma list of {', '.join(CUT_NAMES)}; or all / none (default all)")
    p.add_argument("--gap", type=float, default=1e-4, help="relative optimality gap (default 1e-4)")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per optimization problem")
    p.add_argument("--nodes", type=int, default=None, help="node limit per optimization problem")
    p.add_argument("--seed", type=int, default=0, help="recorded in the manifest; solving is deterministic")
    p.add_argument("--deterministic", action="store_true", help="byte-stable reports; timings go to timings.csv")
    p.add_argument("--threads", type=int, default=None, help="node-evaluation threads (default $DRCC_THREADS or 1)")
    p.add_argument("--backend", choices=BACKENDS, default=DEFAULT_BACKEND, help="LP backend")
    p.add_argument("--prune-pairs", action="store_true", help="drop window pairs no admissible tolerance can select")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--manifest", action="store_true", help="write manifest.json with the resolved configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drcc", description="Risk-adjustable distributionally robust chance-constrained programs.")
    parser.add_argument("--version", action="version", version=f"drcc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance file")
    p.add_argument("instance")
    p.add_argument("--model", choices=MODELS, default="finite")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="solve instance files under several models and tabulate differences")
    p.add_argument("instances", nargs="+")
    p.add_argument("--models", default="finite,continuous", help="comma list of models (at least two, including finite)")
    _solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="brute-force ground truth")
    p.add_argument("instance")
    p.add_argument("--model", choices=("finite", "continuous"), default="finite")
    p.add_argument("--resolution", type=int, default=50, help="tolerance grid points per constraint (multi-constraint continuous)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export", help="write the model as LP or MPS text")
    p.add_argument("instance")
    p.add_argument("--model", choices=MODELS, default="finite")
    p.add_argument("--format", choices=("lp", "mps"), default="lp")
    p.add_argument("--period", type=int, default=1, help="building-load period to export")
    p.add_argument("--prune-pairs", action="store_true")
    p.add_argument("--linearize-oa", action="store_true", help="MPS only: replace cones by a fan of tangent cuts and drop hooks")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("gen", help="generate instance files")
    p.add_argument("family", choices=("transportation", "building", "toy"))
    p.add_argument("--seeds", default="0", help="seed list, e.g. 0-4 or 1,3")
    p.add_argument("--N", default="50", help="samples per chance constraint; list allowed")
    p.add_argument("--I", type=int, default=10, help="suppliers (transportation)")
    p.add_argument("--D", type=int, default=5, help="customers (transportation)")
    p.add_argument("--n", type=int, default=6, help="buildings (building)")
    p.add_argument("--T", type=int, default=4, help="periods (building)")
    p.add_argument("--set", action="append", metavar="KEY=JSON", help="override a generator default")
    p.add_argument("--out", required=True, help="a .json file for a single instance, otherwise a directory")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"drcc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
