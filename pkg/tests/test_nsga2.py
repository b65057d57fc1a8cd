import importlib.resources

import numpy as np
import pytest

from emlasim import dnn, emla, nsga2, vdc


@pytest.fixture(scope="module")
def catalog():
    path = importlib.resources.files("emlasim") / "data" / "catalog.json"
    return emla.load_catalog(path)


@pytest.fixture(scope="module")
def chain():
    path = importlib.resources.files("emlasim") / "data" / "chain.json"
    return vdc.load_chain(path)


@pytest.fixture(scope="module")
def gear_model():
    return emla.GearboxModel(0.98, 4.0)


@pytest.fixture(scope="module")
def model(catalog, gear_model):
    ds = dnn.generate_dataset(
        catalog,
        f_grid=np.linspace(5e3, 65e3, 6), v_grid=np.linspace(0.005, 0.13, 7),
        ng_grid=np.linspace(5, 40, 5), rho_grid=np.linspace(0.005, 0.032, 5),
        gear_model=gear_model, labeler="analytic")
    return dnn.train_mlp(ds, seed=11, max_epochs=300, patience=40)


@pytest.fixture(scope="module")
def ctx(catalog, model, gear_model):
    return nsga2.make_sizing_context(catalog, 30e3, 0.05, model,
                                     gear_model=gear_model)


def _sol(objs, cons=(-1.0,)):
    return nsga2.EvaluatedSolution(
        x=nsga2.DecisionVector(i=1, G=10.0, l=0.02),
        objectives=np.asarray(objs, dtype=float),
        constraints=np.asarray(cons, dtype=float))


# ---------------------------------------------------------------------------
# Objective / constraint evaluation

def test_objectives_catalog_lookup(ctx):
    small = nsga2.DecisionVector(i=1, G=10.0, l=0.02)
    large = nsga2.DecisionVector(i=len(ctx.capable), G=10.0, l=0.02)
    o_small = nsga2.evaluate_objectives(small, ctx)
    o_large = nsga2.evaluate_objectives(large, ctx)
    assert o_large[1] > o_small[1]


def test_objectives_sign_convention(ctx):
    x = nsga2.DecisionVector(i=1, G=12.0, l=0.025)
    obj = nsga2.evaluate_objectives(x, ctx)
    eta = dnn.predict_efficiency(ctx.model, np.array(
        [ctx.F_Lr, ctx.xdot_Lr, ctx.motor(x).P_N, ctx.motor(x).tau_n,
         ctx.motor(x).n_n, ctx.motor(x).eta_N, x.G, x.l]))
    assert obj[0] == -eta


def test_objectives_track_analytic_map(ctx, rng):
    mae = ctx.model.metrics["test_mae"]
    for _ in range(5):
        x = nsga2.DecisionVector(i=int(rng.integers(1, len(ctx.capable) + 1)),
                                 G=float(rng.uniform(5, 40)),
                                 l=float(rng.uniform(0.005, 0.032)))
        cfg = emla.EmlaConfig(motor=ctx.motor(x), trans=ctx.trans(x), M_t=150.0)
        eta_true = dnn.analytic_total_efficiency(ctx.F_Lr, ctx.xdot_Lr, cfg)
        assert -nsga2.evaluate_objectives(x, ctx)[0] == pytest.approx(
            eta_true, abs=max(5 * mae, 0.01))


def test_objectives_bad_index(ctx):
    with pytest.raises(IndexError):
        nsga2.evaluate_objectives(
            nsga2.DecisionVector(i=len(ctx.capable) + 1, G=10.0, l=0.02), ctx)


def test_constraint_torque_formula_oracle(catalog, model):
    # eta_t forced to 0.8: frictionless screw, single 0.8-efficiency stage
    ctx = nsga2.make_sizing_context(
        catalog, 50e3, 0.05, model, mu=0.0,
        gear_model=emla.GearboxModel(eta_stage=0.8, r_cap=100.0))
    x = nsga2.DecisionVector(i=1, G=10.0, l=0.02)
    cons = nsga2.evaluate_constraints(x, ctx)
    m = ctx.motor(x)
    tau_req = 50e3 * 0.02 / (2 * np.pi * 10.0 * 0.8)
    assert tau_req == pytest.approx(19.89, abs=0.01)
    assert cons[2] == pytest.approx(tau_req - m.tau_n, rel=1e-9)


def test_constraint_speed_formula_oracle(ctx):
    x = nsga2.DecisionVector(i=1, G=10.0, l=0.02)
    cons = nsga2.evaluate_constraints(x, ctx)
    n_req = 60.0 * 10.0 * ctx.xdot_Lr / 0.02
    assert ctx.xdot_Lr == 0.05 and n_req == 1500.0
    assert cons[1] == pytest.approx(n_req - ctx.motor(x).n_n, rel=1e-12)


def test_constraint_power_oversized_motor(ctx):
    x = nsga2.DecisionVector(i=len(ctx.capable), G=10.0, l=0.025)  # 40 kW
    cons = nsga2.evaluate_constraints(x, ctx)
    assert cons[0] < 0.0


# ---------------------------------------------------------------------------
# Domination and sorting

def test_dominates_feasible_beats_infeasible():
    a = _sol([1.0, 1.0], [-1.0])
    b = _sol([-5.0, -5.0], [2.0])
    assert nsga2.constrained_dominates(a, b)
    assert not nsga2.constrained_dominates(b, a)


def test_dominates_better_in_both():
    a = _sol([-0.8, 5e3])
    b = _sol([-0.7, 6e3])
    assert nsga2.constrained_dominates(a, b)


def test_dominates_tradeoff_mutual_nondomination():
    a = _sol([-0.8, 6e3])
    b = _sol([-0.7, 5e3])
    assert not nsga2.constrained_dominates(a, b)
    assert not nsga2.constrained_dominates(b, a)


def test_dominates_violation_comparison():
    a = _sol([0.0, 0.0], [1.0, 0.5])
    b = _sol([0.0, 0.0], [3.0, 0.0])
    assert nsga2.constrained_dominates(a, b)


def _brute_force_ranks(pop):
    # independent O(N^2) oracle with its own dominance logic
    def dominates(p, q):
        pf, qf = np.all(p.constraints <= 0), np.all(q.constraints <= 0)
        if pf != qf:
            return pf
        if not pf:
            return (np.maximum(p.constraints, 0).sum()
                    < np.maximum(q.constraints, 0).sum())
        return (np.all(p.objectives <= q.objectives)
                and np.any(p.objectives < q.objectives))

    remaining = set(range(len(pop)))
    ranks = [None] * len(pop)
    r = 0
    while remaining:
        front = [i for i in remaining
                 if not any(dominates(pop[j], pop[i])
                            for j in remaining if j != i)]
        for i in front:
            ranks[i] = r
        remaining -= set(front)
        r += 1
    return ranks


def test_sort_identical_objectives_single_front():
    pop = [_sol([1.0, 2.0]) for _ in range(6)]
    fronts = nsga2.nondominated_sort(pop)
    assert len(fronts) == 1 and len(fronts[0]) == 6


def test_sort_matches_brute_force_hand_built():
    pop = [
        _sol([1.0, 5.0]), _sol([2.0, 4.0]), _sol([3.0, 3.0]),
        _sol([3.0, 5.0]), _sol([4.0, 4.0]), _sol([5.0, 5.0]),
    ]
    nsga2.nondominated_sort(pop)
    assert [s.rank for s in pop] == _brute_force_ranks(pop)


def test_sort_matches_brute_force_random(rng):
    for _ in range(20):
        pop = []
        for _ in range(30):
            cons = rng.normal(size=3)
            if rng.random() < 0.6:
                cons = -np.abs(cons)
            pop.append(_sol(rng.normal(size=2), cons))
        nsga2.nondominated_sort(pop)
        assert [s.rank for s in pop] == _brute_force_ranks(pop)


def test_crowding_infinite_at_extremes():
    pop = [_sol([1.0, 5.0]), _sol([2.0, 4.0]), _sol([3.0, 3.0]),
           _sol([4.0, 2.0]), _sol([5.0, 1.0])]
    nsga2.nondominated_sort(pop)
    assert pop[0].crowding == np.inf
    assert pop[-1].crowding == np.inf
    assert all(np.isfinite(p.crowding) for p in pop[1:-1])


# ---------------------------------------------------------------------------
# Full runs

class BnhProblem:
    """Constrained biobjective benchmark with a known convex front."""

    n_choices = 0
    real_bounds = [(0.0, 5.0), (0.0, 3.0)]

    def make_x(self, choice, reals):
        return (float(reals[0]), float(reals[1]))

    def evaluate(self, choice, reals):
        x, y = reals
        f1 = 4 * x ** 2 + 4 * y ** 2
        f2 = (x - 5) ** 2 + (y - 5) ** 2
        c1 = (x - 5) ** 2 + y ** 2 - 25.0
        c2 = 7.7 - (x - 8) ** 2 - (y + 3) ** 2
        return (f1, f2), (c1, c2)


def _bnh_reference_front():
    xs = np.linspace(0.0, 5.0, 401)
    ys = np.linspace(0.0, 3.0, 241)
    X, Y = np.meshgrid(xs, ys)
    f1 = 4 * X ** 2 + 4 * Y ** 2
    f2 = (X - 5) ** 2 + (Y - 5) ** 2
    feas = ((X - 5) ** 2 + Y ** 2 <= 25.0) & ((X - 8) ** 2 + (Y + 3) ** 2 >= 7.7)
    pts = np.column_stack([f1[feas], f2[feas]])
    order = np.argsort(pts[:, 0])
    front = []
    best_f2 = np.inf
    for f1v, f2v in pts[order]:
        if f2v < best_f2:
            front.append((f1v, f2v))
            best_f2 = f2v
    return np.array(front)


def test_nsga2_hypervolume_on_benchmark():
    ref_point = (140.0, 50.0)
    hv_ref = nsga2.hypervolume_2d(_bnh_reference_front(), ref_point)
    archive = nsga2.nsga2_run(BnhProblem(), pop_size=60, generations=100, seed=3)
    assert archive.feasible
    objs = np.array([s.objectives for s in archive.members])
    hv = nsga2.hypervolume_2d(objs, ref_point)
    assert abs(hv - hv_ref) / hv_ref < 0.05


def test_nsga2_seed_repeatability(ctx):
    a = nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), 60, 30, seed=21)
    b = nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), 60, 30, seed=21)
    assert len(a.members) == len(b.members)
    for s, t in zip(a.members, b.members):
        assert np.array_equal(s.objectives, t.objectives)
        assert np.array_equal(s.constraints, t.constraints)
        assert s.x == t.x
    assert a.best == b.best


def test_nsga2_single_motor_degenerate(catalog, model, gear_model):
    ctx = nsga2.make_sizing_context([catalog[0]], 25e3, 0.04, model,
                                    gear_model=gear_model)
    archive = nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), 24, 40, seed=2)
    assert archive.feasible
    assert all(s.x.i == 1 for s in archive.members)


def test_nsga2_archive_mutually_nondominated(ctx):
    archive = nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), 60, 60, seed=8)
    ms = archive.members
    for i, a in enumerate(ms):
        for j, b in enumerate(ms):
            if i != j:
                assert not nsga2.constrained_dominates(a, b)


def test_nsga2_feasible_members_hold_analytically(ctx):
    archive = nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), 60, 60, seed=8)
    mae = ctx.model.metrics["test_mae"]
    slack = max(3 * mae, 0.01)
    for s in archive.members:
        cfg = emla.EmlaConfig(motor=ctx.motor(s.x), trans=ctx.trans(s.x), M_t=150.0)
        eta_true = dnn.analytic_total_efficiency(ctx.F_Lr, ctx.xdot_Lr, cfg)
        # power constraint re-checked with the analytic efficiency
        assert ctx.F_Lr * ctx.xdot_Lr - eta_true * cfg.motor.P_N \
            <= slack * cfg.motor.P_N
        assert s.constraints[1] <= 1e-9 and s.constraints[2] <= 1e-9


def test_nsga2_reports_infeasible_outcome(catalog, model):
    # demand beyond every motor: capability screen refuses outright
    with pytest.raises(ValueError, match="no catalog motor"):
        nsga2.make_sizing_context(catalog, 500e3, 0.12, model)


def test_nsga2_infeasible_archive_flagged(model, catalog, gear_model):
    # passes the optimistic power screen, but the narrow gear/lead window
    # forces a rotation speed far beyond any rating (c2 > 0 everywhere)
    ctx = nsga2.make_sizing_context(
        [catalog[0]], 20e3, 0.05, model, G_bounds=(39.0, 40.0),
        l_bounds=(0.005, 0.006), gear_model=gear_model)
    archive = nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), 24, 30, seed=4)
    assert not archive.feasible
    assert archive.members  # least-violating front still reported


def test_nsga2_pop_size_validation(ctx):
    with pytest.raises(ValueError):
        nsga2.nsga2_run(nsga2.EmlaSizingProblem(ctx), pop_size=7, generations=5)


# ---------------------------------------------------------------------------
# Best-configuration selection

def _archive(objs):
    members = [_sol(o) for o in objs]
    return nsga2.ParetoArchive(members=members, best=None, feasible=True)


def test_select_best_single_member():
    arch = _archive([[-0.8, 5e3]])
    assert nsga2.select_best_config(arch) is arch.members[0]


def test_select_best_symmetric_knee():
    arch = _archive([[0.0, 1.0], [0.3, 0.3], [1.0, 0.0]])
    best = nsga2.select_best_config(arch)
    assert np.allclose(best.objectives, [0.3, 0.3])


def test_select_best_tie_prefers_higher_eta():
    # two extremes tie at zero distance; eta gap above tolerance decides
    arch = _archive([[-0.80, 6e3], [-0.70, 5e3]])
    best = nsga2.select_best_config(arch)
    assert best.objectives[0] == -0.80


def test_select_best_near_tie_prefers_lower_power():
    # eta difference below tolerance: the smaller motor wins
    arch = _archive([[-0.801, 12e3], [-0.800, 5e3]])
    best = nsga2.select_best_config(arch)
    assert best.objectives[1] == 5e3


# ---------------------------------------------------------------------------
# Study sweep

def test_sweep_trends_small_grid(chain, catalog, model, gear_model):
    res = nsga2.sweep_study([0.0, 150.0, 300.0], [8.0, 16.0, 24.0],
                            chain, catalog, model, pop_size=60,
                            generations=60, seed=0, gear_model=gear_model)
    assert not res.failures
    trends = nsga2.check_sweep_trends(res)
    assert all(trends.values()), trends


def test_sweep_reports_cell_failures(chain, catalog, model):
    # an impossible payload cell fails but the sweep continues
    with pytest.warns(UserWarning, match="failed"):
        res = nsga2.sweep_study([80000.0], [12.0], chain, catalog, model,
                                pop_size=24, generations=10, seed=0)
    assert len(res.failures) == 1
    assert np.isnan(res.P_N[0, 0])
