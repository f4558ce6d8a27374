import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from drcc.model import CONTINUOUS, ModelIR
from drcc.reformulate import DrccInstance, build_milp_finite, build_misocp_continuous
from drcc.reformulate.instance import ChanceConstraint, row
from drcc.samples import RiskBounds, SampleSet
from drcc.solve.bnc import Limits, branch_and_cut
from drcc.solve.gomory import gmi_cuts
from drcc.solve.lp import LpRelaxation, solve_lp
from drcc.solve.oracles import OracleCapError, OracleInfeasible, oracle_finite_enum, oracle_grid, oracle_jk_enum
from drcc.solve.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, simplex_solve

from conftest import TOY, toy_instance

# -- simplex -----------------------------------------------------------------


def test_simplex_trivial():
    s = simplex_solve(LpProblem([1.0], [[1.0]], [">="], [3.0], [0.0], [10.0]))
    assert s.status == OPTIMAL and s.x[0] == pytest.approx(3.0)
    s = simplex_solve(LpProblem([-1.0, -1.0], [[1.0, 1.0]], ["<="], [1.0], [0.0, 0.0], [1.0, 1.0]))
    assert s.objective == pytest.approx(-1.0)
    assert simplex_solve(LpProblem([-1.0], np.zeros((0, 1)), [], [], [0.0], [np.inf])).status == UNBOUNDED
    assert simplex_solve(LpProblem([1.0], [[1.0], [1.0]], [">=", "<="], [3.0, 2.0], [0.0], [10.0])).status == INFEASIBLE


def _vertex_enum(c, A, b, lb, ub):
    """Minimum of c.x over {A x <= b, lb <= x <= ub} by enumerating basic solutions."""
    n = len(c)
    G = np.vstack([A, np.eye(n), -np.eye(n)])
    h = np.concatenate([b, ub, -lb])
    best = math.inf
    for act in itertools.combinations(range(G.shape[0]), n):
        M = G[list(act)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[list(act)])
        if np.all(G @ x <= h + 1e-9):
            best = min(best, float(c @ x))
    return best


def test_simplex_vs_vertex_enumeration(rng):
    for _ in range(150):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        A = np.round(rng.normal(size=(m, n)), 3)
        b = np.round(rng.uniform(-1, 4, m), 3)
        lb = np.round(rng.uniform(-2, 0, n), 3)
        ub = lb + np.round(rng.uniform(0.5, 4, n), 3)
        c = np.round(rng.normal(size=n), 3)
        want = _vertex_enum(c, A, b, lb, ub)
        sol = simplex_solve(LpProblem(c, A, ["<="] * m, b, lb, ub))
        if math.isinf(want):
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert sol.objective == pytest.approx(want, abs=1e-7)


def test_simplex_vs_scipy_mixed_senses(rng):
    for _ in range(60):
        n, m = int(rng.integers(2, 21)), int(rng.integers(1, 21))
        A = rng.normal(size=(m, n))
        x0 = rng.uniform(0, 1, n)
        senses = rng.choice(["<=", ">=", "="], m, p=[0.45, 0.45, 0.1])
        act = A @ x0
        b = np.where(senses == "<=", act + rng.uniform(0, 1, m), np.where(senses == ">=", act - rng.uniform(0, 1, m), act))
        lb, ub = np.zeros(n), np.full(n, 3.0)
        c = rng.normal(size=n)
        sol = simplex_solve(LpProblem(c, A, senses, b, lb, ub))
        A_ub = np.vstack([A[senses == "<="], -A[senses == ">="]])
        b_ub = np.concatenate([b[senses == "<="], -b[senses == ">="]])
        ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A[senses == "="] if (senses == "=").any() else None, b_eq=b[senses == "="] if (senses == "=").any() else None, bounds=list(zip(lb, ub)), method="highs")
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(ref.fun, abs=1e-7 * max(1.0, abs(ref.fun)))
        viol = np.where(senses == "<=", A @ sol.x - b, np.where(senses == ">=", b - A @ sol.x, np.abs(A @ sol.x - b)))
        assert viol.max() <= 1e-7


def test_simplex_warm_start(rng):
    A = rng.normal(size=(6, 8))
    lp = LpProblem(rng.normal(size=8), A, ["<="] * 6, np.ones(6), np.zeros(8), np.ones(8))
    cold = simplex_solve(lp)
    lp2 = LpProblem(lp.c, lp.A, lp.senses, lp.b, lp.lb, np.full(8, 0.5))
    warm = simplex_solve(lp2, cold.basis)
    ref = simplex_solve(lp2)
    assert warm.objective == pytest.approx(ref.objective, abs=1e-9)


def test_backends_agree():
    m = build_milp_finite(toy_instance())
    assert solve_lp(m, "highs").objective == pytest.approx(solve_lp(m, "simplex").objective, abs=1e-9)


# -- branch and cut ----------------------------------------------------------


def _knapsack(values, weights, cap):
    m = ModelIR("knap")
    for i in range(len(values)):
        m.add_binary(f"z{i}")
    m.add_row({i: w for i, w in enumerate(weights)}, "<=", cap)
    m.set_objective({i: v for i, v in enumerate(values)}, sense="max")
    return m.finalize()


def test_knapsack_matches_enumeration(rng):
    for _ in range(20):
        k = int(rng.integers(3, 9))
        v, w = rng.integers(1, 20, k).astype(float), rng.integers(1, 10, k).astype(float)
        cap = float(w.sum() // 2)
        best = max(float(v @ z) for z in itertools.product((0, 1), repeat=k) if np.dot(w, z) <= cap)
        rep = branch_and_cut(_knapsack(v, w, cap))
        assert rep.status == "optimal"
        assert rep.objective == pytest.approx(best, abs=1e-6)
        assert rep.bound >= rep.objective - 1e-6


def test_three_binary_knapsack():
    rep = branch_and_cut(_knapsack([5.0, 4.0, 3.0], [2.0, 3.0, 1.0], 3.5), gomory_rounds=0)
    assert rep.objective == pytest.approx(8.0)


def test_pure_lp_single_node():
    m = ModelIR()
    x = m.add_variable("x", lb=0.0, ub=10.0)
    m.add_row({x: 1.0}, ">=", 3.0)
    m.set_objective({x: 1.0})
    rep = branch_and_cut(m.finalize())
    assert rep.nodes == 1 and rep.objective == pytest.approx(3.0)


def test_infeasible_and_limits():
    m = ModelIR()
    b = m.add_binary("b")
    m.add_row({b: 1.0}, ">=", 0.5)
    m.add_row({b: 1.0}, "<=", 0.7)
    m.set_objective({b: 1.0})
    assert branch_and_cut(m.finalize()).status == "infeasible"
    rng = np.random.default_rng(3)
    v, w = rng.integers(1, 100, 25).astype(float), rng.integers(1, 100, 25).astype(float)
    rep = branch_and_cut(_knapsack(v, w, float(w.sum() / 2)), limits=Limits(nodes=2), gomory_rounds=0, heuristics=False)
    assert rep.status in ("node-limit", "optimal")
    assert rep.nodes <= 2


def test_finite_root_and_reproducible():
    inst = toy_instance()
    reps = [branch_and_cut(build_milp_finite(inst)) for _ in range(2)]
    assert reps[0].nodes == 1
    assert reps[0].objective == pytest.approx(6.8, abs=1e-6)
    assert (reps[0].objective, reps[0].nodes, reps[0].cut_counts) == (reps[1].objective, reps[1].nodes, reps[1].cut_counts)


def test_continuous_toy_matches_oracle():
    inst = toy_instance()
    rep = branch_and_cut(build_misocp_continuous(inst))
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(oracle_jk_enum(inst).objective, rel=1e-5)
    assert rep.cut_counts["polymatroid"] > 0


def test_threaded_mode_matches():
    inst = toy_instance(eps=0.5)
    a = branch_and_cut(build_misocp_continuous(inst))
    b = branch_and_cut(build_misocp_continuous(inst), deterministic=False, threads=2)
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


# -- Gomory cuts -------------------------------------------------------------


def test_gomory_cuts_keep_integer_points(rng):
    fired = 0
    for _ in range(40):
        nb, nc, m_rows = int(rng.integers(2, 7)), int(rng.integers(0, 3)), int(rng.integers(1, 5))
        m = ModelIR()
        for i in range(nb):
            m.add_binary(f"b{i}")
        for i in range(nc):
            m.add_variable(f"c{i}", CONTINUOUS, 0.0, float(rng.uniform(1, 5)))
        n = nb + nc
        for r in range(m_rows):
            m.add_row({j: float(np.round(rng.uniform(1, 9), 2)) for j in range(n)}, "<=", float(rng.uniform(2, 3 * n)))
        m.set_objective({j: -float(rng.uniform(1, 10)) for j in range(n)})
        m.finalize()
        relax = LpRelaxation(m, "simplex")
        lp = relax.dense_problem()
        sol = simplex_solve(lp)
        if sol.status != OPTIMAL:
            continue
        cuts = gmi_cuts(lp, sol, relax.binary_mask)
        for cut in cuts:
            fired += 1
            assert cut.violation(sol.x) > 0.0
            pi = np.zeros(n)
            for j, a in cut.coefficients.items():
                pi[j] = a
            for z in itertools.product((0.0, 1.0), repeat=nb):
                A = np.array([[r.coefficients.get(j, 0.0) for j in range(n)] for r in m.rows])
                bvec = np.array([r.rhs for r in m.rows])
                bounds = [(zi, zi) for zi in z] + [(v.lb, v.ub) for v in m.variables[nb:]]
                res = linprog(pi, A_ub=A, b_ub=bvec, bounds=bounds, method="highs")
                if res.status == 0:
                    assert res.fun >= cut.rhs - 1e-7
    assert fired > 0


# -- oracles -----------------------------------------------------------------


def test_finite_oracle_examples():
    res = oracle_finite_enum(toy_instance())
    assert res.objective == pytest.approx(6.8, abs=1e-9)
    assert res.levels == (3,)
    assert oracle_finite_enum(toy_instance(alpha_bar=0.5)).objective == pytest.approx(10.4, abs=1e-9)
    inst = toy_instance(upper=5.0)
    with pytest.raises(OracleInfeasible):
        oracle_finite_enum(inst)


def test_jk_oracle_examples():
    res = oracle_jk_enum(toy_instance(p=0.0, alpha_bar=0.6, eps=0.5))
    assert res.objective == pytest.approx(8.25, abs=1e-9)
    assert res.alpha == pytest.approx(0.6)
    for ab in (0.3, 0.7, 0.9):
        assert oracle_jk_enum(toy_instance(p=0.0, alpha_bar=ab)).alpha == pytest.approx(ab)
    with pytest.raises(OracleInfeasible):
        oracle_jk_enum(toy_instance(upper=1.0))
    with pytest.raises(OracleCapError):
        oracle_jk_enum(toy_instance(values=np.arange(100.0)))


def _empty_x_instance():
    cc = ChanceConstraint({0: 1.0}, SampleSet(TOY, 0.4))
    return DrccInstance(["x"], [1.0], [0.0], [20.0], [False], [row({0: 1.0}, ">=", 5.0), row({0: 1.0}, "<=", 3.0)], [cc], RiskBounds(0.9))


def test_grid_oracle():
    inst = toy_instance()
    exact = oracle_jk_enum(inst).objective
    widths = []
    for res in (10, 40, 160):
        g = oracle_grid(inst, res)
        assert g.lower - 1e-9 <= exact <= g.upper + 1e-9
        widths.append(g.width)
    assert widths[0] >= widths[1] >= widths[2]
    with pytest.raises(OracleInfeasible):
        oracle_grid(_empty_x_instance())
    with pytest.raises(OracleInfeasible):
        oracle_finite_enum(_empty_x_instance())


def test_grid_refinement_on_seeds():
    from drcc.instances import gen_transportation

    for seed in range(3):
        inst = gen_transportation(seed, 2, 2, 6, demand_scale=1.0, alpha_bar=0.6).to_drcc()
        # resolutions 2^k + 1 give nested grids, so the bracket can only tighten
        gs = [oracle_grid(inst, r) for r in (8, 15, 29)]
        for a, b in zip(gs, gs[1:]):
            assert b.lower >= a.lower - 1e-9
            assert b.upper <= a.upper + 1e-9
