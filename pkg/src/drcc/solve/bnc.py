"""LP-based branch-and-cut for :class:`ModelIR` models.

Each node solves the LP relaxation under its bound changes and runs the cut
generators until none fires (at most ``cut_rounds`` rounds at fractional
points; lazy generators run without limit at integer candidates because
they carry constraints the rows do not). Integer candidates become
incumbents only when every cone and hook holds within ``accept_tol``.

Search is best-bound, with a depth-first plunge until the first incumbent.
Branching picks the most fractional binary (lowest index on ties). For
level-indicator models a rounding heuristic turns LP points into feasible
level choices. Before branching, a few rounds of Gomory mixed-integer cuts
are read off the root tableau.
"""

from __future__ import annotations

import heapq
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..model import CUT_TAGS, Cut, ModelIR
from ..reformulate.cuts import default_generators
from .gomory import gmi_cuts
from .lp import DEFAULT_BACKEND, LpRelaxation, extend_basis
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, simplex_solve

INT_TOL = 1e-6
ACCEPT_TOL = 1e-6
DEFAULT_GAP = 1e-4
LAZY_ROUND_CAP = 200
GOMORY_ROUNDS = 5
GOMORY_DENSE_CAP = 4_000_000  # rows x columns of the dense root tableau
GOMORY_WORK_CAP = 12e9  # tableau cell updates allowed per root GMI solve


@dataclass
class Limits:
    time: Optional[float] = None
    gap: float = DEFAULT_GAP
    nodes: Optional[int] = None
    cut_rounds: int = 20


@dataclass
class SolveReport:
    status: str
    objective: float
    bound: float
    gap: float
    nodes: int
    x: Optional[np.ndarray] = None
    cut_counts: dict = field(default_factory=dict)
    preprocess_seconds: float = 0.0
    solve_seconds: float = 0.0
    lp_solves: int = 0
    rejected: int = 0
    names: list = field(default_factory=list, repr=False)
    x_indices: list = field(default_factory=list, repr=False)
    alpha_indices: list = field(default_factory=list, repr=False)
    binary_indices: list = field(default_factory=list, repr=False)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    @property
    def decision(self) -> Optional[np.ndarray]:
        return None if self.x is None else self.x[self.x_indices]

    @property
    def alphas(self) -> list:
        return [] if self.x is None else [float(self.x[i]) for i in self.alpha_indices]

    @property
    def binaries(self) -> dict:
        if self.x is None:
            return {}
        return {self.names[i]: int(round(self.x[i])) for i in self.binary_indices}

    @property
    def total_seconds(self) -> float:
        return self.preprocess_seconds + self.solve_seconds


@dataclass(order=True)
class _Node:
    key: tuple
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)
    basis: object = field(compare=False, default=None)


@dataclass
class _Outcome:
    kind: str  # "infeasible", "pruned", "integer", "branch", "rejected", "error"
    z: float = math.inf
    x: Optional[np.ndarray] = None
    basis: object = None
    cuts: list = field(default_factory=list)
    lp_solves: int = 0


def _relative_gap(obj: float, bound: float) -> float:
    if not math.isfinite(obj):
        return math.inf
    if not math.isfinite(bound):
        return math.inf
    return max(obj - bound, 0.0) / max(1.0, abs(obj))


class _Engine:
    def __init__(self, model: ModelIR, gens, limits: Limits, backend: str, heuristics: bool):
        self.model = model
        self.gens = list(gens)
        self.limits = limits
        self.relax = LpRelaxation(model, backend)
        self.sign = self.relax.sign
        self.bin = np.array(model.binary_indices, dtype=np.int64)
        self.counts = {t: 0 for t in CUT_TAGS}
        for key, note in model.annotations.items():
            if key.startswith("row:") and note.startswith("cut "):
                tag = note[4:]
                if tag in self.counts:
                    self.counts[tag] += 1
        self.groups = model.meta.get("monotone_groups") if heuristics else None
        self.inc_z = math.inf
        self.inc_x = None
        self.lp_solves = 0
        self.rejected = 0

    # -- helpers -------------------------------------------------------------

    def zval(self, sol) -> float:
        """Objective in minimization sense."""
        return self.sign * sol.objective

    def cutoff(self, inc_z: float) -> float:
        if not math.isfinite(inc_z):
            return math.inf
        return inc_z - self.limits.gap * max(1.0, abs(inc_z))

    def fractional(self, x):
        if self.bin.size == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        v = x[self.bin]
        f = np.abs(v - np.round(v))
        return f, self.bin

    def accept_residual(self, x) -> float:
        worst = 0.0
        for c in self.model.cones:
            worst = max(worst, c.residual(x))
        for h in self.model.hooks:
            worst = max(worst, h.residual(x))
        return worst

    def add_cuts(self, cuts):
        self.relax.add_rows([c.row for c in cuts])

    # -- node evaluation -----------------------------------------------------

    def evaluate(self, lb, ub, basis, inc_z) -> _Outcome:
        cutoff = self.cutoff(inc_z)
        rounds = 0
        lazy_rounds = 0
        added = []
        solves = 0
        while True:
            sol = self.relax.solve(lb, ub, basis)
            solves += 1
            if sol.status == INFEASIBLE:
                return _Outcome("infeasible", cuts=added, lp_solves=solves)
            if sol.status == UNBOUNDED:
                return _Outcome("unbounded", -math.inf, cuts=added, lp_solves=solves)
            if sol.status != OPTIMAL:
                return _Outcome("error", cuts=added, lp_solves=solves)
            basis = sol.basis
            z = self.zval(sol)
            if z >= cutoff:
                return _Outcome("pruned", z, cuts=added, lp_solves=solves)
            x = sol.x
            f, _ = self.fractional(x)
            integer = not np.any(f > INT_TOL)
            cuts = []
            for g in self.gens:
                if integer or (g.at_fractional and rounds < self.limits.cut_rounds):
                    cuts.extend(g.separate(x, integer))
            if cuts:
                self.add_cuts(cuts)
                added.extend(cuts)
                rounds += 1
                if integer:
                    lazy_rounds += 1
                    if lazy_rounds > LAZY_ROUND_CAP:
                        return _Outcome("rejected", z, x, basis, added, solves)
                continue
            if integer:
                if self.accept_residual(x) <= ACCEPT_TOL:
                    return _Outcome("integer", z, x, basis, added, solves)
                return _Outcome("rejected", z, x, basis, added, solves)
            return _Outcome("branch", z, x, basis, added, solves)

    def gomory_root(self, rounds: int, deadline: Optional[float]):
        """Add GMI cuts from the root tableau until they stop moving the bound.

        Only models with level-indicator groups get them; each solve has a
        fixed pivot budget so the outcome does not depend on wall time.
        """
        if rounds <= 0 or self.bin.size == 0 or not self.groups:
            return
        basis = None
        last = -math.inf
        for _ in range(rounds):
            if deadline is not None and time.perf_counter() >= deadline:
                return
            if self.relax.n_rows * (self.relax.n + self.relax.n_rows) > GOMORY_DENSE_CAP:
                return
            lp = self.relax.dense_problem()
            warm = extend_basis(basis, self.relax.n, lp.A.shape[0]) if basis is not None else None
            m, n = lp.A.shape
            sol = simplex_solve(lp, warm=warm, max_iter=max(100, int(GOMORY_WORK_CAP / ((m + 1) * (n + 2 * m)))))
            self.lp_solves += 1
            if sol.status != OPTIMAL:
                return
            z = sol.objective
            if z <= last + 1e-9 * max(1.0, abs(last)):
                return
            rows = gmi_cuts(lp, sol, self.relax.binary_mask)
            if not rows:
                return
            self.add_cuts([Cut(r, "gomory") for r in rows])
            self.counts["gomory"] += len(rows)
            basis, last = sol.basis, z

    def round_levels(self, x, lb, ub):
        """Candidate bound sets fixing every level binary from an LP point."""
        if not self.groups:
            return []
        others = np.setdiff1d(self.bin, np.concatenate([np.asarray(g["y"], dtype=np.int64) for g in self.groups]))
        if others.size and np.any(np.abs(x[others] - np.round(x[others])) > INT_TOL):
            return []
        cands = []
        for rule in ("met", "half"):
            lb2, ub2 = lb.copy(), ub.copy()
            if others.size:
                lb2[others] = ub2[others] = np.round(x[others])
            for g in self.groups:
                y = np.asarray(g["y"], dtype=np.int64)
                if rule == "met":
                    tx = sum(a * x[j] for j, a in g["t"].items())
                    lv = np.asarray(g["levels"])
                    vals = (lv <= tx + 1e-9 * (1.0 + np.abs(lv))).astype(float)
                else:
                    vals = np.maximum.accumulate((x[y] >= 0.5).astype(float))
                vals = np.clip(vals, lb[y], ub[y])
                lb2[y] = ub2[y] = vals
            cands.append((lb2, ub2))
        return cands

    # -- bookkeeping ---------------------------------------------------------

    def record(self, out: _Outcome):
        self.lp_solves += out.lp_solves
        for c in out.cuts:
            self.counts[c.tag] = self.counts.get(c.tag, 0) + 1
        if out.kind == "rejected":
            self.rejected += 1

    def offer(self, z, x) -> bool:
        if z < self.inc_z - 1e-12 * max(1.0, abs(z)):
            self.inc_z = z
            self.inc_x = x.copy()
            return True
        return False


def branch_and_cut(
    model: ModelIR,
    cutgens: Optional[list] = None,
    limits: Limits = Limits(),
    backend: str = DEFAULT_BACKEND,
    heuristics: bool = True,
    deterministic: bool = True,
    threads: int = 1,
    gomory_rounds: int = GOMORY_ROUNDS,
) -> SolveReport:
    """Solve ``model`` to the relative gap ``limits.gap``.

    ``cutgens`` defaults to the generators that make the model's cones and
    hooks exact. With ``deterministic=False`` and ``threads > 1`` open nodes
    are evaluated in batches on a thread pool. ``gomory_rounds`` bounds the
    root GMI rounds (0 disables them).
    """
    if not model.finalized:
        raise ValueError("model must be finalized before solving")
    start = time.perf_counter()
    gens = default_generators(model) if cutgens is None else list(cutgens)
    eng = _Engine(model, gens, limits, backend, heuristics)
    seeds = [c for g in gens for c in g.seed()]
    if seeds:
        eng.add_cuts(seeds)
        for c in seeds:
            eng.counts[c.tag] += 1
    eng.gomory_root(gomory_rounds, None if limits.time is None else start + limits.time)

    seq = 0
    nodes = 0
    pruned_bound = math.inf
    status = None
    root_lb = eng.relax.lb.copy()
    root_ub = eng.relax.ub.copy()
    stack: list[_Node] = [_Node((-math.inf, 0), root_lb, root_ub, 0, None)]
    heap: list[_Node] = []
    pool = ThreadPoolExecutor(max_workers=threads) if (threads > 1 and not deterministic) else None

    def open_bound():
        vals = [n.key[0] for n in heap] + [n.key[0] for n in stack]
        return min(vals) if vals else math.inf

    def out_of_time():
        return limits.time is not None and time.perf_counter() - start >= limits.time

    try:
        while stack or heap:
            if out_of_time():
                status = "time-limit"
                break
            if limits.nodes is not None and nodes >= limits.nodes:
                status = "node-limit"
                break
            if eng.inc_x is not None and stack:
                for n in stack:
                    heapq.heappush(heap, n)
                stack = []
            if eng.inc_x is not None:
                bound_now = min(open_bound(), pruned_bound, eng.inc_z)
                if _relative_gap(eng.inc_z, bound_now) <= limits.gap:
                    break
            if stack:
                batch = [stack.pop()]
            else:
                width = threads if pool is not None else 1
                batch = [heapq.heappop(heap) for _ in range(min(width, len(heap)))]
            cutoff = eng.cutoff(eng.inc_z)
            todo = []
            for node in batch:
                if node.key[0] >= cutoff:
                    pruned_bound = min(pruned_bound, node.key[0])
                else:
                    todo.append(node)
            if not todo:
                continue
            inc_snapshot = eng.inc_z
            if pool is not None and len(todo) > 1:
                outs = list(pool.map(lambda n: eng.evaluate(n.lb, n.ub, n.basis, inc_snapshot), todo))
            else:
                outs = [eng.evaluate(n.lb, n.ub, n.basis, inc_snapshot) for n in todo]
            for node, out in zip(todo, outs):
                nodes += 1
                eng.record(out)
                if out.kind == "unbounded":
                    status = "unbounded"
                    break
                if out.kind == "pruned":
                    pruned_bound = min(pruned_bound, out.z)
                    continue
                if out.kind in ("infeasible", "error", "rejected"):
                    continue
                if out.kind == "integer":
                    eng.offer(out.z, out.x)
                    continue
                if out.z >= eng.cutoff(eng.inc_z):
                    pruned_bound = min(pruned_bound, out.z)
                    continue
                # rounding heuristic on the level binaries
                if eng.groups and (eng.inc_x is None or node.depth <= 3 or nodes % 10 == 0):
                    for lb2, ub2 in eng.round_levels(out.x, node.lb, node.ub):
                        h = eng.evaluate(lb2, ub2, out.basis, eng.inc_z)
                        eng.record(h)
                        if h.kind == "integer":
                            eng.offer(h.z, h.x)
                    if out.z >= eng.cutoff(eng.inc_z):
                        pruned_bound = min(pruned_bound, out.z)
                        continue
                f, idx = eng.fractional(out.x)
                score = np.minimum(f, 1.0 - f)
                pick = int(np.flatnonzero(score == score.max())[0])
                var = int(idx[pick])
                val = out.x[var]
                down_ub = node.ub.copy()
                down_ub[var] = 0.0
                up_lb = node.lb.copy()
                up_lb[var] = 1.0
                kids = [
                    _Node((out.z, 0), node.lb, down_ub, node.depth + 1, out.basis),
                    _Node((out.z, 0), up_lb, node.ub, node.depth + 1, out.basis),
                ]
                # in a plunge, visit the child nearer the LP value first
                if val >= 0.5:
                    kids.reverse()
                for kid in kids:
                    seq += 1
                    kid.key = (out.z, seq)
                if eng.inc_x is None:
                    stack.extend(reversed(kids))
                else:
                    for kid in kids:
                        heapq.heappush(heap, kid)
            if status == "unbounded":
                break
    finally:
        if pool is not None:
            pool.shutdown()

    elapsed = time.perf_counter() - start
    remaining = open_bound()
    if eng.inc_x is None:
        obj = math.inf
        bound = min(remaining, pruned_bound)
        if status is None:
            status = "infeasible"
        gap = math.inf
    else:
        obj = eng.inc_z
        bound = min(remaining, pruned_bound, obj)
        gap = _relative_gap(obj, bound)
        if status is None:
            status = "optimal" if gap <= DEFAULT_GAP else "gap-limit"
    sign = eng.sign
    report = SolveReport(
        status=status,
        objective=sign * obj if math.isfinite(obj) else math.nan,
        bound=sign * bound if math.isfinite(bound) else sign * bound,
        gap=gap,
        nodes=nodes,
        x=None if eng.inc_x is None else eng.inc_x.copy(),
        cut_counts=dict(eng.counts),
        preprocess_seconds=float(model.meta.get("preprocess_seconds", 0.0)),
        solve_seconds=elapsed,
        lp_solves=eng.lp_solves,
        rejected=eng.rejected,
        names=[v.name for v in model.variables],
        x_indices=list(model.meta.get("x_indices", range(model.n_vars))),
        alpha_indices=list(model.meta.get("alpha_indices", [])),
        binary_indices=list(model.binary_indices),
    )
    return report
