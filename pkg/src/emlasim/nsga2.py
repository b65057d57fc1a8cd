"""Constrained NSGA-II over the actuator decision vector.

The mixed decision vector is (motor choice, gear ratio, screw lead);
objectives are (-predicted efficiency, nominal motor power) under the
power/speed/torque rating constraints. The genetic machinery (constrained
domination, fast non-dominated sort, crowding, SBX crossover, polynomial
mutation) is generic over any problem exposing `n_choices`, `real_bounds`
and `evaluate`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import dnn, emla, trajectory, vdc


@dataclass(frozen=True)
class DecisionVector:
    """Motor index i (1-based position in the capable set), gear ratio G,
    screw lead l [m]."""

    i: int
    G: float
    l: float


@dataclass
class EvaluatedSolution:
    x: DecisionVector
    objectives: np.ndarray   # (-eta, P_N)
    constraints: np.ndarray  # (c1, c2, c3), feasible iff all <= 0
    rank: int = -1
    crowding: float = 0.0

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.constraints <= 0.0))

    @property
    def violation(self) -> float:
        return float(np.sum(np.maximum(self.constraints, 0.0)))


@dataclass
class ParetoArchive:
    members: list
    best: DecisionVector | None
    feasible: bool  # False when no feasible solution was ever found


# ---------------------------------------------------------------------------
# Sizing problem


@dataclass(frozen=True)
class SizingContext:
    """Demand point plus everything needed to score one decision vector."""

    F_Lr: float
    xdot_Lr: float
    model: dnn.MlpModel
    catalog: tuple
    capable: tuple            # catalog indices surviving the capability screen
    G_bounds: tuple = (5.0, 40.0)
    l_bounds: tuple = (0.005, 0.032)
    mu: float = 0.04
    r_m: float = 0.012
    gear_model: emla.GearboxModel = field(default_factory=emla.GearboxModel)

    def motor(self, x: DecisionVector) -> emla.MotorCatalogEntry:
        if not 1 <= x.i <= len(self.capable):
            raise IndexError(f"motor index {x.i} outside capable set "
                             f"1..{len(self.capable)}")
        return self.catalog[self.capable[x.i - 1]]

    def trans(self, x: DecisionVector) -> emla.TransmissionParams:
        return emla.TransmissionParams(N_g=x.G, rho=x.l, mu=self.mu,
                                       r_m=self.r_m, eta_g_model=self.gear_model)


def capable_set(catalog, F_Lr: float, xdot_Lr: float,
                G_bounds=(5.0, 40.0), l_bounds=(0.005, 0.032),
                mu: float = 0.04, r_m: float = 0.012,
                gear_model: emla.GearboxModel | None = None) -> tuple:
    """Catalog indices whose rated power can meet the demand.

    The screen uses the best transmission efficiency over the bounds (the
    fewest gear stages and the largest lead) so no viable motor is excluded;
    the optimizer's power constraint does the exact check.
    """
    gear_model = gear_model or emla.GearboxModel()
    best_trans = emla.TransmissionParams(N_g=G_bounds[0], rho=l_bounds[1],
                                         mu=mu, r_m=r_m, eta_g_model=gear_model)
    eta_best = emla.transmission_efficiency(best_trans, +1)
    p_req = F_Lr * xdot_Lr
    return tuple(k for k, m in enumerate(catalog)
                 if m.eta_N * eta_best * m.P_N >= p_req)


def make_sizing_context(catalog, F_Lr, xdot_Lr, model, **kwargs) -> SizingContext:
    capable = capable_set(catalog, F_Lr, xdot_Lr,
                          G_bounds=kwargs.get("G_bounds", (5.0, 40.0)),
                          l_bounds=kwargs.get("l_bounds", (0.005, 0.032)),
                          mu=kwargs.get("mu", 0.04),
                          r_m=kwargs.get("r_m", 0.012),
                          gear_model=kwargs.get("gear_model") or emla.GearboxModel())
    if not capable:
        raise ValueError(f"no catalog motor can deliver "
                         f"{F_Lr * xdot_Lr:.0f} W at the load")
    return SizingContext(F_Lr=F_Lr, xdot_Lr=xdot_Lr, model=model,
                         catalog=tuple(catalog), capable=capable, **kwargs)


def _features(ctx: SizingContext, x: DecisionVector) -> np.ndarray:
    m = ctx.motor(x)
    return np.array([ctx.F_Lr, ctx.xdot_Lr, m.P_N, m.tau_n, m.n_n, m.eta_N,
                     x.G, x.l])


def evaluate_objectives(x: DecisionVector, ctx: SizingContext) -> np.ndarray:
    """(-predicted efficiency, nominal power)."""
    eta = dnn.predict_efficiency(ctx.model, _features(ctx, x))
    return np.array([-eta, ctx.motor(x).P_N])


def evaluate_constraints(x: DecisionVector, ctx: SizingContext) -> np.ndarray:
    """(c1, c2, c3): power, speed and torque rating margins (<= 0 is ok)."""
    m = ctx.motor(x)
    eta_t = emla.transmission_efficiency(ctx.trans(x), +1)
    tau_req = ctx.F_Lr * x.l / (2.0 * math.pi * x.G * eta_t)
    n_req = 60.0 * x.G * ctx.xdot_Lr / x.l  # rpm
    eta = dnn.predict_efficiency(ctx.model, _features(ctx, x))
    p_req = ctx.F_Lr * ctx.xdot_Lr
    return np.array([p_req - eta * m.P_N, n_req - m.n_n, tau_req - m.tau_n])


class EmlaSizingProblem:
    """Adapter exposing the generic NSGA-II problem surface."""

    def __init__(self, ctx: SizingContext):
        self.ctx = ctx
        self.n_choices = len(ctx.capable)
        self.real_bounds = [ctx.G_bounds, ctx.l_bounds]
        motors = [ctx.catalog[k] for k in ctx.capable]
        self._ratings = np.array([[m.P_N, m.tau_n, m.n_n, m.eta_N]
                                  for m in motors])

    def make_x(self, choice: int, reals) -> DecisionVector:
        return DecisionVector(i=choice + 1, G=float(reals[0]), l=float(reals[1]))

    def evaluate(self, choice: int, reals):
        x = self.make_x(choice, reals)
        return evaluate_objectives(x, self.ctx), evaluate_constraints(x, self.ctx)

    def evaluate_batch(self, choices, reals):
        """Vectorized scoring of a whole generation at once."""
        ctx = self.ctx
        choices = np.asarray(choices, dtype=int)
        reals = np.asarray(reals, dtype=float)
        R = self._ratings[choices]  # columns P_N, tau_n, n_n, eta_N
        G, lead = reals[:, 0], reals[:, 1]
        X = np.column_stack([
            np.full(len(choices), ctx.F_Lr), np.full(len(choices), ctx.xdot_Lr),
            R[:, 0], R[:, 1], R[:, 2], R[:, 3], G, lead])
        eta = dnn.predict_efficiency(ctx.model, X)
        eta_t = emla.transmission_efficiency_batch(
            G, lead, ctx.mu, ctx.r_m, ctx.gear_model, +1.0)
        tau_req = ctx.F_Lr * lead / (2.0 * math.pi * G * eta_t)
        n_req = 60.0 * G * ctx.xdot_Lr / lead
        p_req = ctx.F_Lr * ctx.xdot_Lr
        objs = np.column_stack([-eta, R[:, 0]])
        cons = np.column_stack([p_req - eta * R[:, 0], n_req - R[:, 2],
                                tau_req - R[:, 1]])
        return objs, cons


# ---------------------------------------------------------------------------
# NSGA-II machinery


def constrained_dominates(a: EvaluatedSolution, b: EvaluatedSolution) -> bool:
    """Feasible beats infeasible; less violation wins among infeasible;
    Pareto dominance among feasible."""
    if a.feasible and not b.feasible:
        return True
    if not a.feasible and b.feasible:
        return False
    if not a.feasible:
        return a.violation < b.violation
    return bool(np.all(a.objectives <= b.objectives)
                and np.any(a.objectives < b.objectives))


def _dominance_matrix(population: list) -> np.ndarray:
    """dom[i, j] == True iff member i constrained-dominates member j."""
    F = np.array([s.objectives for s in population])
    feas = np.array([s.feasible for s in population])
    viol = np.array([s.violation for s in population])
    leq = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    pareto = leq & lt
    both_feas = feas[:, None] & feas[None, :]
    both_infeas = ~feas[:, None] & ~feas[None, :]
    dom = np.where(both_feas, pareto,
                   np.where(both_infeas, viol[:, None] < viol[None, :],
                            feas[:, None] & ~feas[None, :]))
    np.fill_diagonal(dom, False)
    return dom


def nondominated_sort(population: list) -> list:
    """Fronts of indices under constrained domination; assigns rank and
    crowding distance on the population in place."""
    n = len(population)
    dom = _dominance_matrix(population)
    dom_count = dom.sum(axis=0)
    fronts = []
    assigned = np.zeros(n, dtype=bool)
    rank = 0
    while not assigned.all():
        current = np.flatnonzero((dom_count == 0) & ~assigned)
        for idx in current:
            population[idx].rank = rank
        assigned[current] = True
        dom_count = dom_count - dom[current].sum(axis=0)
        fronts.append(list(current))
        rank += 1
    for front in fronts:
        _assign_crowding(population, front)
    return fronts


def _assign_crowding(population: list, front: list) -> None:
    if not front:
        return
    n_obj = len(population[front[0]].objectives)
    for idx in front:
        population[idx].crowding = 0.0
    if len(front) <= 2:
        for idx in front:
            population[idx].crowding = math.inf
        return
    for m in range(n_obj):
        order = sorted(front, key=lambda idx: population[idx].objectives[m])
        f_lo = population[order[0]].objectives[m]
        f_hi = population[order[-1]].objectives[m]
        population[order[0]].crowding = math.inf
        population[order[-1]].crowding = math.inf
        span = f_hi - f_lo
        if span <= 0:
            continue
        for j in range(1, len(order) - 1):
            gap = (population[order[j + 1]].objectives[m]
                   - population[order[j - 1]].objectives[m])
            population[order[j]].crowding += gap / span


def _tournament(pop, rng):
    a, b = rng.integers(0, len(pop), size=2)
    pa, pb = pop[a], pop[b]
    if constrained_dominates(pa, pb):
        return pa
    if constrained_dominates(pb, pa):
        return pb
    if pa.rank != pb.rank:
        return pa if pa.rank < pb.rank else pb
    return pa if pa.crowding >= pb.crowding else pb


def _sbx(r1, r2, bounds, rng, eta_c, p_c):
    c1, c2 = r1.copy(), r2.copy()
    if rng.random() > p_c:
        return c1, c2
    for k, (lo, hi) in enumerate(bounds):
        if rng.random() > 0.5:
            continue
        y1, y2 = c1[k], c2[k]
        if abs(y1 - y2) < 1e-14:
            continue
        u = rng.random()
        beta = (2.0 * u) ** (1.0 / (eta_c + 1.0)) if u <= 0.5 \
            else (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0))
        a = 0.5 * ((1 + beta) * y1 + (1 - beta) * y2)
        b = 0.5 * ((1 - beta) * y1 + (1 + beta) * y2)
        c1[k] = min(max(a, lo), hi)
        c2[k] = min(max(b, lo), hi)
    return c1, c2


def _poly_mutation(reals, bounds, rng, eta_m):
    out = reals.copy()
    p_m = 1.0 / len(bounds)
    for k, (lo, hi) in enumerate(bounds):
        if rng.random() > p_m:
            continue
        y = out[k]
        u = rng.random()
        span = hi - lo
        if u < 0.5:
            delta = (2 * u + (1 - 2 * u) * (1 - (y - lo) / span) ** (eta_m + 1)) \
                ** (1.0 / (eta_m + 1)) - 1.0
        else:
            delta = 1.0 - (2 * (1 - u) + 2 * (u - 0.5)
                           * (1 - (hi - y) / span) ** (eta_m + 1)) \
                ** (1.0 / (eta_m + 1))
        out[k] = min(max(y + delta * span, lo), hi)
    return out


def nsga2_run(problem, pop_size: int = 60, generations: int = 120,
              seed: int = 0, p_c: float = 0.9, eta_c: float = 15.0,
              eta_m: float = 20.0, p_choice_reset: float = 1.0 / 3.0) -> ParetoArchive:
    """Run the generational loop; deterministic for a given seed.

    The archive holds the final non-dominated set; when no feasible point
    was found the archive is flagged infeasible and carries the
    least-violating front instead.
    """
    if pop_size < 8 or pop_size % 2:
        raise ValueError("pop_size must be even and >= 8")
    rng = np.random.default_rng(seed)
    bounds = problem.real_bounds
    n_choices = max(1, problem.n_choices)

    def spawn_all(choices, reals):
        if hasattr(problem, "evaluate_batch"):
            objs, cons = problem.evaluate_batch(choices, reals)
        else:
            pairs = [problem.evaluate(c, r) for c, r in zip(choices, reals)]
            objs = np.array([p[0] for p in pairs], dtype=float)
            cons = np.array([p[1] for p in pairs], dtype=float)
        out = []
        for k, (c, r) in enumerate(zip(choices, reals)):
            sol = EvaluatedSolution(x=problem.make_x(c, r),
                                    objectives=objs[k], constraints=cons[k])
            sol._choice = c
            sol._reals = np.asarray(r, dtype=float)
            out.append(sol)
        return out

    choices = [int(rng.integers(0, n_choices)) for _ in range(pop_size)]
    reals = [np.array([rng.uniform(lo, hi) for lo, hi in bounds])
             for _ in range(pop_size)]
    pop = spawn_all(choices, reals)
    nondominated_sort(pop)

    for _ in range(generations):
        off_choices, off_reals = [], []
        while len(off_choices) < pop_size:
            p1, p2 = _tournament(pop, rng), _tournament(pop, rng)
            r1, r2 = _sbx(p1._reals, p2._reals, bounds, rng, eta_c, p_c)
            for reals_k, parent in ((r1, p1), (r2, p2)):
                choice = parent._choice
                reals_k = _poly_mutation(reals_k, bounds, rng, eta_m)
                if n_choices > 1 and rng.random() < p_choice_reset:
                    choice = int(rng.integers(0, n_choices))
                off_choices.append(choice)
                off_reals.append(reals_k)
        offspring = spawn_all(off_choices[:pop_size], off_reals[:pop_size])
        combined = pop + offspring
        fronts = nondominated_sort(combined)
        nxt = []
        for front in fronts:
            if len(nxt) + len(front) <= pop_size:
                nxt.extend(front)
            else:
                rest = sorted(front, key=lambda i: -combined[i].crowding)
                nxt.extend(rest[:pop_size - len(nxt)])
                break
        pop = [combined[i] for i in nxt]
        nondominated_sort(pop)

    front0 = [s for s in pop if s.rank == 0]
    feasible = any(s.feasible for s in front0)
    if feasible:
        front0 = [s for s in front0 if s.feasible]
    # deduplicate identical objective vectors to keep the archive tight
    seen = {}
    for s in front0:
        seen.setdefault(tuple(np.round(s.objectives, 12)), s)
    members = sorted(seen.values(), key=lambda s: tuple(s.objectives))
    archive = ParetoArchive(members=members, best=None, feasible=feasible)
    archive.best = select_best_config(archive).x if members else None
    return archive


def select_best_config(archive: ParetoArchive,
                       eta_tol: float = 0.005) -> EvaluatedSolution:
    """Knee of the archive front.

    Objectives are normalized to [0, 1]; the knee maximizes perpendicular
    distance, toward the ideal corner, from the chord joining the
    normalized front extremes. Ties fall back to higher efficiency (equal
    within eta_tol, roughly the surrogate's accuracy, so noise cannot
    flip the pick), then lower power, then lowest motor index.
    """
    if not archive.members:
        raise ValueError("empty archive")
    if len(archive.members) == 1:
        return archive.members[0]
    F = np.array([s.objectives for s in archive.members])
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    N = (F - lo) / span
    # chord between the normalized extremes runs from (0, 1) to (1, 0)
    dist = (1.0 - N[:, 0] - N[:, 1]) / math.sqrt(2.0)
    cand = np.flatnonzero(dist >= dist.max() - 1e-9)
    eta = -F[cand, 0]
    cand = cand[eta >= eta.max() - eta_tol]
    order = sorted(cand, key=lambda k: (F[k, 1],
                                        getattr(archive.members[k].x, "i", 0)))
    return archive.members[order[0]]


def hypervolume_2d(objectives, ref) -> float:
    """Dominated hypervolume of a 2-D minimization front w.r.t. ref."""
    pts = np.asarray(objectives, dtype=float)
    pts = pts[np.all(pts <= ref, axis=1)]
    if len(pts) == 0:
        return 0.0
    pts = pts[np.argsort(pts[:, 0])]
    hv = 0.0
    f2_prev = ref[1]
    best_f2 = math.inf
    for f1, f2 in pts:
        if f2 >= best_f2:
            continue
        hv += (ref[0] - f1) * (f2_prev - f2)
        f2_prev = f2
        best_f2 = f2
    return float(hv)


# ---------------------------------------------------------------------------
# Payload x duration study


@dataclass
class SweepResult:
    payloads: np.ndarray
    durations: np.ndarray
    motor_id: list          # [i_pay][j_dur]
    P_N: np.ndarray
    G: np.ndarray
    lead: np.ndarray
    eta: np.ndarray
    F_Lr: np.ndarray
    xdot_Lr: np.ndarray
    failures: list

    @property
    def ratio(self) -> np.ndarray:
        return self.G / self.lead


def lift_demand(chain: vdc.ChainModel, payload: float, duration: float,
                n_samples: int = 160) -> tuple[float, float]:
    """Peak lift-actuator force and speed over a full-range quintic stroke."""
    lift = chain.joint("lift")
    lo, hi = lift.limits
    q0, q1 = lo + lift.margin, hi - lift.margin
    spec = trajectory.quintic_coeffs([q0], [q1], duration)
    loaded = chain.with_payload(payload)
    f_peak = 0.0
    v_peak = 0.0
    for t in np.linspace(0.0, duration, n_samples):
        q, qd = trajectory.eval_trajectory(spec, t)
        zeta = np.array([0.0, q[0], -1.5, 0.0, 0.0, 0.0])
        f = vdc.chain_statics(loaded, zeta)["F_L"]["lift"]
        v = abs(chain.actuator_gain("lift", q[0]) * qd[0])
        f_peak = max(f_peak, f)
        v_peak = max(v_peak, v)
    return f_peak, v_peak


def sweep_study(payloads, durations, chain: vdc.ChainModel, catalog,
                model: dnn.MlpModel, pop_size: int = 60,
                generations: int = 120, seed: int = 0,
                **ctx_kwargs) -> SweepResult:
    """Optimize the actuator configuration on a payload x duration grid."""
    payloads = np.asarray(payloads, dtype=float)
    durations = np.asarray(durations, dtype=float)
    shape = (len(payloads), len(durations))
    res = SweepResult(
        payloads=payloads, durations=durations,
        motor_id=[["" for _ in durations] for _ in payloads],
        P_N=np.full(shape, np.nan), G=np.full(shape, np.nan),
        lead=np.full(shape, np.nan), eta=np.full(shape, np.nan),
        F_Lr=np.full(shape, np.nan), xdot_Lr=np.full(shape, np.nan),
        failures=[])
    for ip, payload in enumerate(payloads):
        for jd, duration in enumerate(durations):
            try:
                F_Lr, xdot_Lr = lift_demand(chain, payload, duration)
                ctx = make_sizing_context(catalog, F_Lr, xdot_Lr, model,
                                          **ctx_kwargs)
                archive = nsga2_run(EmlaSizingProblem(ctx),
                                    pop_size=pop_size, generations=generations,
                                    seed=seed + 31 * (ip * len(durations) + jd))
                if not archive.feasible or archive.best is None:
                    raise ValueError("no feasible configuration")
                best = archive.best
                motor = ctx.motor(best)
                res.motor_id[ip][jd] = motor.id
                res.P_N[ip, jd] = motor.P_N
                res.G[ip, jd] = best.G
                res.lead[ip, jd] = best.l
                res.eta[ip, jd] = dnn.predict_efficiency(
                    model, _features(ctx, best))
                res.F_Lr[ip, jd] = F_Lr
                res.xdot_Lr[ip, jd] = xdot_Lr
            except (ValueError, IndexError) as e:
                res.failures.append((float(payload), float(duration), str(e)))
                warnings.warn(f"sweep cell ({payload} kg, {duration} s) "
                              f"failed: {e}")
    return res


def check_sweep_trends(res: SweepResult, rel_tol: float = 1e-9) -> dict:
    """The three qualitative design trends over the study grid."""
    ratio = res.ratio
    ratio_up_with_duration = bool(
        np.all(np.diff(ratio, axis=1) >= -rel_tol * np.abs(ratio[:, :-1])))
    lowest_at_shortest = bool(
        np.all(ratio[:, 0] <= np.nanmin(ratio, axis=1)
               + rel_tol * np.abs(ratio[:, 0])))
    power_up_with_payload = bool(np.all(np.diff(res.P_N, axis=0) >= -1e-9))
    return {
        "ratio_nondecreasing_in_duration": ratio_up_with_duration,
        "lowest_ratio_at_shortest_duration": lowest_at_shortest,
        "power_nondecreasing_in_payload": power_up_with_payload,
    }
