"""Generalized Benders decomposition over the cluster assignment.

The continuous primal (fixed assignment) runs block-coordinate descent,
alternating the manifold phase step and the WMMSE precoder step with an
explicit common-rate allocation.  Feasible primals contribute optimality
cuts (frozen point plus multiplier estimates); infeasible ones contribute
feasibility cuts (violation-row indicator).  The relaxed master enumerates
every assignment satisfying the cluster constraints, filters by feasibility
cuts and maximizes the cut-wise Lagrangian bound.

The primal is nonconvex, so the scheme is a heuristic: cuts are evaluated at
frozen points rather than at the (unavailable) dual optimum.  To keep the
bound sandwich LB <= UB valid, the master evaluates each optimality cut at
every stored primal point and takes the best value - each such evaluation
lower-bounds the true dual function, and the incumbent's own point
guarantees the master never undercuts the incumbent.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import manifold as mf
from . import wmmse as wm
from .channel import ChannelRealization
from .rates import (
    Assignment,
    CommonRateAlloc,
    PhaseConfig,
    PrecoderSet,
    bandwidth_factors,
    constraint_residuals,
    group_effective_channels,
    identity_phases,
    overall_rate,
    residual_layout,
)
from .scenario import ScenarioConfig

FEAS_TOL = 1e-6
_ACTIVE_TOL = 1e-6
_SENS_DELTA = 1e-4


class GlobalInfeasibleError(RuntimeError):
    """Every assignment is excluded by feasibility cuts (or no primal is
    feasible within the iteration budget)."""


@dataclass(frozen=True)
class PrimalPoint:
    """Frozen continuous variables from one primal solve."""

    phases: PhaseConfig
    precoders: PrecoderSet
    alloc: CommonRateAlloc


@dataclass(frozen=True)
class Cut:
    kind: str  # 'optimality' | 'feasibility'
    point: PrimalPoint
    multipliers: np.ndarray  # mu (optimality) or lambda (feasibility), >= 0


@dataclass
class PrimalOutcome:
    feasible: bool
    point: PrimalPoint
    value: float  # overall rate in bit/s (nan if infeasible)
    multipliers: np.ndarray  # mu for feasible outcomes, lambda otherwise
    violation: float  # L1 residual violation (0 when feasible)


@dataclass
class GbdState:
    cuts: list = field(default_factory=list)
    points: list = field(default_factory=list)
    known_feasible: set = field(default_factory=set)  # u vectors with a feasible primal
    lower_bound: float = -math.inf
    upper_bound: float = math.inf
    iteration: int = 0


@dataclass
class TraceRow:
    iteration: int
    assignment: tuple
    lower_bound: float
    upper_bound: float
    primal_status: str
    wall_ms: float


@dataclass
class Solution:
    assignment: Assignment
    phases: PhaseConfig
    precoders: PrecoderSet
    alloc: CommonRateAlloc
    value_bps: float
    lower_bound: float
    upper_bound: float
    iterations: int
    converged: bool
    trace: list


# -- assignment enumeration ----------------------------------------------------


def enumerate_assignments(num_groups: int, num_clusters: int) -> list:
    """Every assignment with pairwise-distinct clusters and at most
    min(F, G) assisted groups, in lexicographic order of the u vector."""
    out = []
    groups = range(num_groups)
    clusters = range(1, num_clusters + 1)
    for m in range(0, min(num_clusters, num_groups) + 1):
        for chosen in itertools.combinations(groups, m):
            for perm in itertools.permutations(clusters, m):
                u = [0] * num_groups
                for g, f in zip(chosen, perm):
                    u[g] = f
                out.append(Assignment(tuple(u)))
    out.sort(key=lambda a: a.u)
    return out


def initial_assignment(ch: ChannelRealization, cfg: ScenarioConfig) -> Assignment:
    """Deterministic start: the groups with the strongest cascaded channels
    (||H_g||_F times ||stacked surface-to-user rows||_F) take clusters in
    order; ties break toward the lower group index."""
    scores = [
        (float(np.linalg.norm(ch.uav_to_ris[g]) * np.linalg.norm(ch.ris_to_user[g])), -g)
        for g in range(cfg.num_groups)
    ]
    order = sorted(range(cfg.num_groups), key=lambda g: scores[g], reverse=True)
    u = [0] * cfg.num_groups
    for f, g in enumerate(order[: min(cfg.num_clusters, cfg.num_groups)], start=1):
        u[g] = f
    return Assignment(tuple(u))


# -- primal problem --------------------------------------------------------------


def _allocate(access, rate_c, rate_p, min_rate_bps, bw, weak=-1) -> wm.AllocResult:
    if access == "noma":
        return wm.allocate_all_to_weakest(rate_c, rate_p, weak, min_rate_bps, bw)
    if access == "sdma":
        return wm.allocate_none(rate_p, min_rate_bps, bw)
    return wm.allocate_common(rate_c, rate_p, min_rate_bps, bw)


def _alloc_from_result(access, assignment, result: wm.WmmseResult, cfg) -> CommonRateAlloc:
    bw = bandwidth_factors(assignment, cfg)
    shares = tuple(
        _allocate(
            access,
            result.rate_c[g],
            result.rate_p[g],
            cfg.min_rate_bps,
            float(bw[g]),
            weak=int(result.weak_user[g]),
        ).shares
        for g in range(assignment.num_groups)
    )
    return CommonRateAlloc(shares)


@dataclass
class _Candidate:
    point: PrimalPoint
    value: float
    residuals: np.ndarray
    power_mu: np.ndarray

    @property
    def violation(self) -> float:
        return float(np.sum(np.maximum(0.0, -self.residuals)))

    @property
    def feasible(self) -> bool:
        return float(np.min(self.residuals)) >= -FEAS_TOL


def _evaluate(assignment, point: PrimalPoint, ch, cfg, power_mu=None) -> _Candidate:
    report = overall_rate(assignment, point.phases, point.precoders, point.alloc, ch, cfg)
    resid = constraint_residuals(assignment, point.phases, point.precoders, point.alloc, ch, cfg)
    mu = power_mu if power_mu is not None else np.zeros(cfg.num_groups)
    return _Candidate(point=point, value=report.overall_bps, residuals=resid, power_mu=mu)


def _bcd_run(assignment, ch, cfg, start: PrimalPoint | None, access: str, user_weights=None) -> list:
    """One BCD trajectory; returns every evaluated candidate point."""
    budgets = cfg.solver_budgets
    if start is None:
        phases = identity_phases(assignment, cfg)
        init = wm.wmmse_solve(assignment, phases, ch, cfg, access=access, max_iter=0)
        point = PrimalPoint(phases, init.precoders, _alloc_from_result(access, assignment, init, cfg))
        power_mu = init.power_multiplier
    else:
        point = start
        power_mu = None
    candidates = [_evaluate(assignment, point, ch, cfg, power_mu)]
    value = candidates[-1].value
    any_assisted = assignment.num_assisted > 0
    opts = mf.RcgOptions(max_iter=budgets.rcg_max_iter, grad_tol=budgets.rcg_grad_tol)
    for _ in range(budgets.bcd_max_iter):
        phases = point.phases
        if any_assisted:
            problems = mf.build_phase_problems(assignment, phases, point.precoders, point.alloc, ch, cfg)
            phases, _ = mf.rcg_maximize(problems, assignment, phases, opts)
        result = wm.wmmse_solve(
            assignment, phases, ch, cfg, t_init=point.precoders, access=access, user_weights=user_weights
        )
        point = PrimalPoint(phases, result.precoders, _alloc_from_result(access, assignment, result, cfg))
        candidates.append(_evaluate(assignment, point, ch, cfg, result.power_multiplier))
        new_value = candidates[-1].value
        if abs(new_value - value) <= budgets.bcd_rel_tol * max(1.0, abs(value)):
            break
        value = new_value
    return candidates


def _best_candidates(candidates):
    best_feasible = None
    best_any = None
    for c in candidates:
        if c.feasible and (best_feasible is None or c.value > best_feasible.value):
            best_feasible = c
        if best_any is None or (c.violation, -c.value) < (best_any.violation, -best_any.value):
            best_any = c
    return best_feasible, best_any


def solve_primal(
    assignment: Assignment,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
    warm: PrimalPoint | None = None,
    access: str = "rsma",
) -> PrimalOutcome:
    """BCD on the continuous variables with the assignment fixed.

    Runs from the deterministic default start and, when given, also from the
    warm-start point, keeping the best iterate seen across both
    trajectories.  If no iterate satisfies the residuals, the violation
    search takes over; a zero-violation rescue still counts as feasible.
    """
    assignment.validate(cfg.num_clusters)
    candidates = _bcd_run(assignment, ch, cfg, None, access)
    if warm is not None:
        candidates += _bcd_run(assignment, ch, cfg, warm, access)
    best_feasible, best_any = _best_candidates(candidates)
    if best_feasible is not None:
        mu = _estimate_multipliers(assignment, best_feasible, ch, cfg, access)
        return PrimalOutcome(True, best_feasible.point, best_feasible.value, mu, 0.0)
    best = _violation_search(assignment, ch, cfg, best_any, access)
    if best.violation <= FEAS_TOL:
        mu = _estimate_multipliers(assignment, best, ch, cfg, access)
        return PrimalOutcome(True, best.point, best.value, mu, 0.0)
    return PrimalOutcome(False, best.point, math.nan, _lambda_from(best.residuals), best.violation)


def _estimate_multipliers(assignment, cand: _Candidate, ch, cfg, access) -> np.ndarray:
    layout = residual_layout(cfg)
    mu = np.zeros(layout["size"])
    mu[layout["c6"]] = np.maximum(0.0, cand.power_mu)
    bw = bandwidth_factors(assignment, cfg)
    resid = cand.residuals
    report = overall_rate(assignment, cand.point.phases, cand.point.precoders, cand.point.alloc, ch, cfg)
    users = [(g, k) for g in range(cfg.num_groups) for k in range(cfg.users_per_group[g])]
    c4 = np.zeros(len(users))
    c5 = np.zeros(len(users))
    for i, (g, k) in enumerate(users):
        if resid[layout["c4"]][i] > _ACTIVE_TOL and resid[layout["c5"]][i] > _ACTIVE_TOL:
            continue  # inactive rows keep zero multipliers
        weak = -1
        if access == "noma":
            heff = group_effective_channels(g, assignment, cand.point.phases, ch, cfg)
            weak = int(np.argmin(np.linalg.norm(heff, axis=1)))
        rc = np.asarray(report.rate_c[g], dtype=float)
        rp = np.asarray(report.rate_p[g], dtype=float)
        base = float(np.sum(np.asarray(cand.point.alloc.shares[g])))
        if abs(resid[layout["c4"]][i]) <= _ACTIVE_TOL:
            bumped = rc.copy()
            bumped[k] += _SENS_DELTA
            res = _allocate(access, bumped, rp, cfg.min_rate_bps, float(bw[g]), weak)
            c4[i] = max(0.0, float(bw[g]) * (float(np.sum(res.shares)) - base) / _SENS_DELTA)
        if abs(resid[layout["c5"]][i]) <= _ACTIVE_TOL and cfg.min_rate_bps > 0.0:
            relaxed = rp.copy()
            relaxed[k] += _SENS_DELTA  # relaxing the user's floor == raising its private rate
            res = _allocate(access, rc, relaxed, cfg.min_rate_bps, float(bw[g]), weak)
            c5[i] = max(0.0, float(bw[g]) * (float(np.sum(res.shares)) - base) / _SENS_DELTA)
    mu[layout["c4"]] = c4
    mu[layout["c5"]] = c5
    return mu


def _violation_search(assignment, ch, cfg, seed_candidate, access) -> _Candidate:
    """Drive the L1 residual violation down with violation-weighted sweeps."""
    layout = residual_layout(cfg)
    best = seed_candidate
    weights = None
    start = seed_candidate.point if seed_candidate is not None else None
    for _ in range(3):
        candidates = _bcd_run(assignment, ch, cfg, start, access, user_weights=weights)
        _, round_best = _best_candidates(candidates)
        if best is None or round_best.violation < best.violation:
            best = round_best
        if best.violation <= FEAS_TOL:
            break
        c5 = np.maximum(0.0, -best.residuals[layout["c5"]])
        scale = float(np.max(c5)) if float(np.max(c5)) > 0 else 1.0
        weights = _per_group_weights(cfg, 1.0 + c5 / scale)
        start = best.point
    return best


def feasibility_problem(
    assignment: Assignment,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
    start: PrimalPoint | None = None,
    access: str = "rsma",
) -> tuple:
    """Minimize the L1 residual violation over the continuous variables.

    Returns (lam, violation): lam is the normalized indicator of violated
    residual rows, or the uniform vector when nothing is violated (the
    all-zero multiplier is never returned).
    """
    seed = _evaluate(assignment, start, ch, cfg) if start is not None else None
    best = _violation_search(assignment, ch, cfg, seed, access)
    return _lambda_from(best.residuals), best.violation


def _lambda_from(residuals: np.ndarray) -> np.ndarray:
    lam = np.where(residuals < -FEAS_TOL, 1.0, 0.0)
    if lam.sum() == 0.0:
        lam = np.ones(residuals.size)
    return lam / lam.sum()


def _per_group_weights(cfg: ScenarioConfig, flat: np.ndarray) -> tuple:
    out = []
    i = 0
    for kg in cfg.users_per_group:
        out.append(np.asarray(flat[i : i + kg], dtype=float))
        i += kg
    return tuple(out)


# -- cuts and the master problem ---------------------------------------------------


def lagrangian_value(assignment: Assignment, cut: Cut, ch: ChannelRealization, cfg: ScenarioConfig) -> float:
    """Cut Lagrangian at the cut's own frozen point under the given assignment.

    Optimality cuts add the multiplier-weighted residuals to the objective;
    feasibility cuts are the weighted residuals alone.  Phase blocks travel
    with their group and apply to whatever cluster the assignment selects.
    """
    point = cut.point
    resid = constraint_residuals(assignment, point.phases, point.precoders, point.alloc, ch, cfg)
    penalty = float(cut.multipliers @ resid)
    if cut.kind == "feasibility":
        return penalty
    value = overall_rate(assignment, point.phases, point.precoders, point.alloc, ch, cfg).overall_bps
    return value + penalty


def solve_master(
    state: GbdState,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
    candidates: list | None = None,
) -> tuple:
    """Enumerate assignments, filter by feasibility cuts, maximize the bound.

    Optimality cuts are evaluated at every stored primal point (best value
    per cut); assignments with a recorded feasible primal bypass the
    feasibility filter, which otherwise could exclude a proven-feasible
    incumbent.  Ties break to the lexicographically smallest u vector.
    """
    if not state.cuts:
        raise ValueError("solve_master requires at least one cut")
    if candidates is None:
        candidates = enumerate_assignments(cfg.num_groups, cfg.num_clusters)
    opt_cuts = [c for c in state.cuts if c.kind == "optimality"]
    feas_cuts = [c for c in state.cuts if c.kind == "feasibility"]
    best_u = None
    best_eta = -math.inf
    for assignment in candidates:
        if assignment.u not in state.known_feasible:
            excluded = False
            for cut in feas_cuts:
                resid = constraint_residuals(
                    assignment, cut.point.phases, cut.point.precoders, cut.point.alloc, ch, cfg
                )
                if float(cut.multipliers @ resid) < -1e-12:
                    excluded = True
                    break
            if excluded:
                continue
        evals = []
        for point in state.points:
            resid = constraint_residuals(assignment, point.phases, point.precoders, point.alloc, ch, cfg)
            value = overall_rate(assignment, point.phases, point.precoders, point.alloc, ch, cfg).overall_bps
            evals.append((value, resid))
        eta = math.inf
        for cut in opt_cuts:
            best_for_cut = max(value + float(cut.multipliers @ resid) for value, resid in evals)
            eta = min(eta, best_for_cut)
        if eta > best_eta:
            best_eta = eta
            best_u = assignment
    if best_u is None:
        raise GlobalInfeasibleError("all assignments excluded by feasibility cuts")
    return best_u, best_eta


# -- the outer loop ------------------------------------------------------------------


def gbd_solve(ch: ChannelRealization, cfg: ScenarioConfig, access: str = "rsma") -> Solution:
    """Alternate primal and master until the bound gap closes, the master
    revisits an assignment, or the iteration budget runs out."""
    if cfg.ris_mode == "none":
        return _solve_unassisted(ch, cfg, access)
    budgets = cfg.solver_budgets
    candidates = enumerate_assignments(cfg.num_groups, cfg.num_clusters)
    state = GbdState()
    assignment = initial_assignment(ch, cfg)
    incumbent = None
    trace = []
    visited = set()
    converged = False
    for it in range(1, budgets.gbd_max_iter + 1):
        t0 = time.perf_counter()
        warm = incumbent[1].point if incumbent is not None else None
        outcome = solve_primal(assignment, ch, cfg, warm=warm, access=access)
        visited.add(assignment.u)
        state.points.append(outcome.point)
        if outcome.feasible:
            state.known_feasible.add(assignment.u)
            state.cuts.append(Cut("optimality", outcome.point, outcome.multipliers))
            if incumbent is None or outcome.value > state.lower_bound:
                state.lower_bound = outcome.value
                incumbent = (assignment, outcome)
        else:
            state.cuts.append(Cut("feasibility", outcome.point, outcome.multipliers))
        next_assignment, eta = solve_master(state, ch, cfg, candidates)
        state.upper_bound = eta
        state.iteration = it
        trace.append(
            TraceRow(
                iteration=it,
                assignment=assignment.u,
                lower_bound=state.lower_bound,
                upper_bound=eta,
                primal_status="feasible" if outcome.feasible else "infeasible",
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        gap_closed = (
            math.isfinite(state.lower_bound)
            and math.isfinite(eta)
            and eta - state.lower_bound <= budgets.gbd_rel_tol * max(1.0, abs(eta))
        )
        if gap_closed:
            converged = True
            break
        if next_assignment.u in visited:
            break  # revisit policy: terminate with the incumbent
        assignment = next_assignment
    if incumbent is None:
        raise GlobalInfeasibleError("no feasible assignment found")
    best_u, outcome = incumbent
    return Solution(
        assignment=best_u,
        phases=outcome.point.phases,
        precoders=outcome.point.precoders,
        alloc=outcome.point.alloc,
        value_bps=outcome.value,
        lower_bound=state.lower_bound,
        upper_bound=state.upper_bound,
        iterations=state.iteration,
        converged=converged,
        trace=trace,
    )


def _solve_unassisted(ch, cfg, access) -> Solution:
    assignment = Assignment((0,) * cfg.num_groups)
    t0 = time.perf_counter()
    outcome = solve_primal(assignment, ch, cfg, access=access)
    if not outcome.feasible:
        raise GlobalInfeasibleError("direct-only transmission cannot meet the QoS floor")
    row = TraceRow(1, assignment.u, outcome.value, outcome.value, "feasible", (time.perf_counter() - t0) * 1e3)
    return Solution(
        assignment=assignment,
        phases=outcome.point.phases,
        precoders=outcome.point.precoders,
        alloc=outcome.point.alloc,
        value_bps=outcome.value,
        lower_bound=outcome.value,
        upper_bound=outcome.value,
        iterations=1,
        converged=True,
        trace=[row],
    )


def trace_csv_rows(trace: list, timing: bool = False) -> list:
    """Rows for the trace CSV; wall time is zeroed unless timing is on, so
    that identical runs produce byte-identical files."""
    rows = [("iteration", "assignment", "lb", "ub", "primal_status", "wall_time_ms")]
    for r in trace:
        rows.append(
            (
                str(r.iteration),
                ";".join(str(x) for x in r.assignment),
                repr(r.lower_bound),
                repr(r.upper_bound),
                r.primal_status,
                repr(r.wall_ms) if timing else "0",
            )
        )
    return rows
