"""Command-line experiment driver.

Each subcommand runs one recipe and writes ``report.json`` plus flat CSV
tables under ``tables/`` in the output directory.  Results depend only on the
flags (including ``--seed``); the worker count never changes them.  The exit
code is 0 iff every assertion of the recipe holds.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import inspect
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, decay
from .errors import BdcspError, UnknownRecipe
from .hypergraph import affine_plane_hypergraph, audit_expander, sample_config_model
from .instances import (brute_farness, chunk_rank_audit, planted_rhs_uniform, sample_hamming,
                        sample_planted, sample_uniform)
from .predicates import by_name, hamming_generator
from .processes import STRATEGIES, RandomQuerier, budget_from_expr, history_after, run_game
from .rng import derive_seed
from .testers import TesterConfig, kequ_eps, test_kequ

OUT_ENV = "BDCSP_OUT"


@dataclass
class RecipeResult:
    report: dict
    tables: dict[str, list[dict]] = field(default_factory=dict)
    ok: bool = True


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _pick(value, default):
    return default if value is None else value


# --- recipes -------------------------------------------------------------------------


def farness_audit(a) -> RecipeResult:
    """Exact max-sat fraction of uniform-literal instances on random regular hypergraphs."""
    P = by_name(_pick(a.predicate, "3-NAE"))
    n, d, trials = _pick(a.n, 16), _pick(a.d, 30), _pick(a.trials, 20)
    centre = P.n_accepting / P.size
    lo, hi = _floats(a.window) if a.window else (centre - 0.1, centre + 0.1)
    rows = []
    for t in range(trials):
        H = sample_config_model(n, d, P.k, derive_seed(a.seed, t))
        rep = brute_farness(sample_uniform(H, P, derive_seed(a.seed, t, 1), declared_d=d))
        rows.append({"trial": t, "min_removals": rep.min_removals, "farness": round(rep.farness, 12),
                     "maxsat_fraction": round(rep.maxsat_fraction, 12),
                     "in_window": int(lo <= rep.maxsat_fraction <= hi)})
    frac = sum(r["in_window"] for r in rows) / trials
    ok = frac >= a.min_pass
    report = {"predicate": P.name, "window": [lo, hi], "in_window_fraction": frac, "min_pass": a.min_pass,
              "mean_maxsat_fraction": float(np.mean([r["maxsat_fraction"] for r in rows])),
              "acceptance_density": centre}
    return RecipeResult(report, {"farness": rows}, ok)


def decay_certify(a) -> RecipeResult:
    """Batch certification of the exact tree and cycle inequalities."""
    names = a.check.split(",") if a.check else list(decay.CHECKS)
    rows = []
    for i, name in enumerate(names):
        if name not in decay.CHECKS:
            raise UnknownRecipe(f"unknown check {name!r}; choose from {sorted(decay.CHECKS)}")
        fn = decay.CHECKS[name]
        params = inspect.signature(fn).parameters
        kw = {"seed": derive_seed(a.seed, i)}
        if a.trials is not None and "trials" in params:
            kw["trials"] = a.trials
        rows.append(fn(**kw).to_json())
    table = [{k: r[k] for k in ("name", "cases", "violations", "min_margin", "ok")} for r in rows]
    return RecipeResult({"checks": rows}, {"checks": table}, all(r["ok"] for r in rows))


def game_sweep(a) -> RecipeResult:
    """Distinguishing advantage of one strategy over a grid of query budgets."""
    P = by_name(_pick(a.predicate, "3-NAE"))
    n, d, trials = _pick(a.n, 10_000), _pick(a.d, 3), _pick(a.trials, 100)
    strategy = STRATEGIES[a.strategy]()
    rows = []
    for j, expr in enumerate(a.budgets.split(";")):
        budget = budget_from_expr(expr, n)
        res = run_game(strategy, budget, n, d, P.k, P, ("sat", "far"), trials, derive_seed(a.seed, j),
                       workers=a.workers)
        lo, hi = res.advantage_ci
        sat, far = res.accept_rates
        rows.append({"budget_expr": expr, "budget": budget, "accept_sat": sat, "accept_far": far,
                     "advantage": round(res.advantage, 12), "ci_low": round(lo, 12), "ci_high": round(hi, 12)})
    return RecipeResult({"predicate": P.name, "strategy": a.strategy, "n": n, "d": d, "trials": trials,
                         "rows": rows}, {"advantage": rows}, True)


def kequ_bench(a) -> RecipeResult:
    """One-sided k-EQU tester: soundness on planted instances, rejection of uniform ones, query scaling."""
    P = by_name(_pick(a.predicate, "3-EQU"))
    d, trials, eps = _pick(a.d, 4), _pick(a.trials, 100), _pick(a.eps, 0.2)
    grid = _ints(a.n_grid)
    cfg = TesterConfig()
    rows, false_rejects, bad_witness = [], 0, 0
    for i, n in enumerate(grid):
        sat_q, far_rej, far_q = [], 0, []
        for t in range(trials):
            s = derive_seed(a.seed, i, t)
            H = sample_config_model(n, d, P.k, s)
            v = test_kequ(sample_planted(H, P, derive_seed(s, 1), declared_d=d), eps, derive_seed(s, 2), cfg)
            false_rejects += not v.accept
            sat_q.append(v.queries)
            H2 = sample_config_model(n, d, P.k, derive_seed(s, 3))
            w = test_kequ(sample_uniform(H2, P, derive_seed(s, 4), declared_d=d), eps, derive_seed(s, 5), cfg)
            if not w.accept:
                far_rej += 1
                bad_witness += not w.witness
            far_q.append(w.queries)
        rows.append({"n": n, "mean_queries_sat": float(np.mean(sat_q)), "far_reject_rate": far_rej / trials,
                     "mean_queries_far": float(np.mean(far_q)),
                     "walk_budget": math.prod(cfg.schedule(2 * n, kequ_eps(eps, P.k, d)))})
    slope = float(np.polyfit(np.log(grid), np.log([r["mean_queries_sat"] for r in rows]), 1)[0]) if len(grid) > 1 else float("nan")
    lo, hi = _floats(a.slope_window)
    ok = (false_rejects == 0 and bad_witness == 0 and all(r["far_reject_rate"] >= 2 / 3 for r in rows)
          and (len(grid) < 2 or lo <= slope <= hi))
    return RecipeResult({"predicate": P.name, "d": d, "eps": eps, "trials": trials, "false_rejects": false_rejects,
                         "empty_witnesses": bad_witness, "loglog_slope": slope, "slope_window": [lo, hi],
                         "rows": rows}, {"kequ": rows}, ok)


def hamming_rank(a) -> RecipeResult:
    """Chunk rank of Hamming-code instances on affine-plane hypergraphs and uniformity of their right-hand sides."""
    q = _pick(a.k, 7)
    d, trials = _pick(a.d, 3), _pick(a.trials, 10)
    A = hamming_generator(q)
    rows = []
    for t in range(trials):
        s = derive_seed(a.seed, t)
        H = affine_plane_hypergraph(q, d, s)
        inst = sample_hamming(H, A, "planted", derive_seed(s, 1))
        audit = chunk_rank_audit(inst, 2, 5, a.subsets, derive_seed(s, 2))
        exp = audit_expander(H, 4 / (q * q), 0.45)
        rng = np.random.default_rng(derive_seed(s, 3))
        uniform = 0
        for _ in range(a.uniform_checks):
            size = int(rng.integers(1, 6))
            sub = sorted(rng.choice(inst.m, size=size, replace=False).tolist())
            uniform += planted_rhs_uniform(inst, sub)[0]
        rows.append({"trial": t, "n": H.n, "m": H.m, "expander_s4_eta045": int(exp.ok),
                     "subsets_checked": sum(audit.checked.values()), "rank_violations": len(audit.violations),
                     "rhs_uniform": uniform, "rhs_checked": a.uniform_checks})
    ok = all(r["rank_violations"] == 0 and r["rhs_uniform"] == r["rhs_checked"] for r in rows)
    return RecipeResult({"k": q, "h": A.h, "d": d, "rows": rows}, {"rank": rows}, ok)


def expander_audit(a) -> RecipeResult:
    """Exhaustive expansion audit of random regular hypergraphs."""
    n, d, k, trials = _pick(a.n, 24), _pick(a.d, 5), _pick(a.k, 3), _pick(a.trials, 50)
    rows = []
    for t in range(trials):
        H = sample_config_model(n, d, k, derive_seed(a.seed, t), simple=a.simple)
        r = audit_expander(H, a.gamma, a.eta, max_size=a.max_size)
        rows.append({"trial": t, "ok": int(r.ok), "max_size": r.max_size, "checked": r.checked,
                     "witness": " ".join(map(str, r.witness)) if r.witness else "",
                     "witness_vertices": "" if r.witness_vertices is None else r.witness_vertices})
    rate = sum(r["ok"] for r in rows) / trials
    return RecipeResult({"n": n, "d": d, "k": k, "gamma": a.gamma, "eta": a.eta, "simple": a.simple,
                         "pass_rate": rate, "min_pass": a.min_pass}, {"audit": rows}, rate >= a.min_pass)


def history_stats(a) -> RecipeResult:
    """Cycle structure revealed by a uniform random querier against the lazy planted process."""
    P = by_name(_pick(a.predicate, "3-NAE"))
    n, d, trials = _pick(a.n, 1_000_000), _pick(a.d, 3), _pick(a.trials, 200)
    budget = budget_from_expr(a.budget_expr, n)
    rows = []
    for t in range(trials):
        rep = history_after(RandomQuerier(), n, d, P.k, P, budget, derive_seed(a.seed, t))
        rows.append({"trial": t, "m": rep.m, "components": rep.components, "cyclomatic": rep.cyclomatic,
                     "girth": "" if rep.girth == float("inf") else int(rep.girth)})
    mean_cy = float(np.mean([r["cyclomatic"] for r in rows]))
    girths = [r["girth"] for r in rows if r["girth"] != ""]
    min_girth = min(girths) if girths else None
    ok = mean_cy <= a.max_mean_cy and (min_girth is None or min_girth >= 3)
    return RecipeResult({"n": n, "d": d, "budget": budget, "mean_cyclomatic": mean_cy, "min_girth": min_girth},
                        {"history": rows}, ok)


def kequ_test(a) -> RecipeResult:
    """Run the k-EQU tester once on a generated instance, optionally emitting the witness."""
    P = by_name(_pick(a.predicate, "3-EQU"))
    n, d, eps = _pick(a.n, 2001), _pick(a.d, 4), _pick(a.eps, 0.2)
    H = sample_config_model(n, d, P.k, derive_seed(a.seed, 0))
    sampler = sample_planted if a.mode == "sat" else sample_uniform
    inst = sampler(H, P, derive_seed(a.seed, 1), declared_d=d)
    cfg = TesterConfig()
    if a.budget_expr:
        rounds, walks, length = cfg.schedule(2 * n, kequ_eps(eps, P.k, d))
        target = budget_from_expr(a.budget_expr, n)
        cfg = TesterConfig(walks_scale=max(target / (rounds * length), 1) / math.sqrt(2 * n))
    v = test_kequ(inst, eps, derive_seed(a.seed, 2), cfg)
    out = v.to_json() if a.emit_witness else {k: val for k, val in v.to_json().items() if k not in ("cycle", "witness")}
    return RecipeResult({"mode": a.mode, "n": n, "d": d, "eps": eps, "verdict": out},
                        {"verdict": [{"accept": int(v.accept), "queries": v.queries, "budget": v.budget,
                                      "witness_size": len(v.witness)}]}, True)


RECIPES: dict[str, tuple[Callable, Callable]] = {}


def _recipe(name: str, fn: Callable, extra: Callable[[argparse.ArgumentParser], None] = lambda p: None):
    RECIPES[name] = (fn, extra)


_recipe("farness-audit", farness_audit, lambda p: (
    p.add_argument("--window", help="accepted max-sat fraction range 'lo,hi'"),
    p.add_argument("--min-pass", type=float, default=0.9)))
_recipe("decay-certify", decay_certify, lambda p: (
    p.add_argument("--check", help=f"comma list from {','.join(decay.CHECKS)}"),))
_recipe("game-sweep", game_sweep, lambda p: (
    p.add_argument("--strategy", default="parity-prop", choices=sorted(STRATEGIES)),
    p.add_argument("--budgets", default="sqrt(n)/4;sqrt(n);4*sqrt(n);n/4",
                   help="semicolon-separated budget expressions in n")))
_recipe("kequ-bench", kequ_bench, lambda p: (
    p.add_argument("--n-grid", default="501,2001,8001"),
    p.add_argument("--slope-window", default="0.45,0.7")))
_recipe("hamming-rank", hamming_rank, lambda p: (
    p.add_argument("--subsets", type=int, default=1000),
    p.add_argument("--uniform-checks", type=int, default=50)))
_recipe("expander-audit", expander_audit, lambda p: (
    p.add_argument("--gamma", type=float, default=0.25),
    p.add_argument("--eta", type=float, default=0.45),
    p.add_argument("--max-size", type=int),
    p.add_argument("--simple", action="store_true"),
    p.add_argument("--min-pass", type=float, default=0.8)))
_recipe("history-stats", history_stats, lambda p: (
    p.add_argument("--budget-expr", default="n**0.4"),
    p.add_argument("--max-mean-cy", type=float, default=2.0)))
_recipe("kequ-test", kequ_test, lambda p: (
    p.add_argument("--mode", choices=("sat", "far"), default="far"),
    p.add_argument("--budget-expr"),
    p.add_argument("--emit-witness", action="store_true")))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdcsp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="recipe", required=True)
    for name, (fn, extra) in RECIPES.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--predicate")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")
        p.add_argument("--dump-spec", action="store_true", help="print the resolved experiment spec and exit")
        extra(p)
    return parser


def experiment_spec(args: argparse.Namespace) -> dict:
    spec = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "dump_spec", "workers")}
    return spec


def spec_hash(spec: dict) -> str:
    return hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()[:16]


def write_outputs(out: Path, spec: dict, result: RecipeResult, elapsed: float):
    (out / "tables").mkdir(parents=True, exist_ok=True)
    report = {"spec": spec, "spec_hash": spec_hash(spec), "version": __version__, "ok": result.ok,
              "elapsed_seconds": round(elapsed, 3), "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
              "result": result.report}
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    for name, rows in result.tables.items():
        with open(out / "tables" / f"{name}.csv", "w", newline="") as fh:
            if not rows:
                continue
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def run_recipe(args: argparse.Namespace) -> RecipeResult:
    if args.recipe not in RECIPES:
        raise UnknownRecipe(args.recipe)
    return RECIPES[args.recipe][0](args)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = experiment_spec(args)
    if args.dump_spec:
        print(json.dumps(spec, indent=2, sort_keys=True))
        return 0
    out = Path(args.out or os.environ.get(OUT_ENV) or Path("runs") / args.recipe)
    t0 = time.perf_counter()
    try:
        result = run_recipe(args)
    except BdcspError as exc:
        print(f"{args.recipe}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    write_outputs(out, spec, result, time.perf_counter() - t0)
    print(f"{args.recipe}: {'ok' if result.ok else 'FAILED'} -> {out}")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
