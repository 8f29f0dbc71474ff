"""Precoder and common-rate subproblem: WMMSE ascent per group plus the
closed-form common-rate allocation.

The solver alternates MMSE equalizers, MSE weights and a precoder update
whose power constraint is handled by bisection on the KKT multiplier.  The
common stream is folded in by weighting the common MSE of the worst user
(the one bounding the group's decodable common rate).  Because the worst
user can change between sweeps, each sweep is accepted only if the group
objective (min common rate plus sum of private rates) does not decrease;
a non-improving sweep is rolled back and the group stops, which keeps the
recorded trace monotone.

Multiple-access variants: 'rsma' (default), 'noma' (the common stream
carries the weakest user's whole message and that user's private column is
pinned to zero), 'sdma' (no common stream at all).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rates import Assignment, PhaseConfig, PrecoderSet, group_effective_channels
from .scenario import ScenarioConfig

ACCESS_MODES = ("rsma", "noma", "sdma")


class IllConditionedError(RuntimeError):
    """Power bisection failed to bracket even after diagonal loading."""


@dataclass(frozen=True)
class AllocResult:
    """Common-rate shares plus the QoS infeasibility certificate.

    ``violation`` is the amount by which the per-user rate floors exceed the
    decodable common rate (0 when the allocation is feasible); ``shares``
    always carries a best-effort allocation so that iteration can continue.
    """

    shares: np.ndarray
    violation: float

    @property
    def feasible(self) -> bool:
        return self.violation <= 0.0


def allocate_common(
    rate_c: np.ndarray,
    rate_p: np.ndarray,
    min_rate_bps: float,
    bandwidth_factor: float,
) -> AllocResult:
    """Split the decodable common rate c = min_k rate_c across users.

    Each user first receives the floor needed to meet the QoS target given
    its private rate; any surplus is split equally.  If the floors exceed c
    the result is an infeasibility certificate carrying the excess, with the
    floors scaled back proportionally as the (violation-minimal) shares.
    """
    rate_c = np.asarray(rate_c, dtype=float)
    rate_p = np.asarray(rate_p, dtype=float)
    cap = float(np.min(rate_c))
    if min_rate_bps == 0.0:
        req = 0.0
    elif bandwidth_factor > 0.0:
        req = min_rate_bps / bandwidth_factor
    else:
        req = math.inf
    floors = np.maximum(0.0, req - rate_p)
    total = float(np.sum(floors))
    if not math.isfinite(total):
        return AllocResult(shares=np.zeros_like(rate_p), violation=math.inf)
    if total > cap:
        scale = cap / total if total > 0.0 else 0.0
        return AllocResult(shares=floors * scale, violation=total - cap)
    surplus = (cap - total) / rate_p.size
    return AllocResult(shares=floors + surplus, violation=0.0)


def allocate_all_to_weakest(
    rate_c: np.ndarray,
    rate_p: np.ndarray,
    weak: int,
    min_rate_bps: float,
    bandwidth_factor: float,
) -> AllocResult:
    """NOMA allocation: the whole common rate goes to the weakest user."""
    rate_c = np.asarray(rate_c, dtype=float)
    shares = np.zeros(rate_c.size)
    shares[weak] = float(np.min(rate_c))
    return AllocResult(shares=shares, violation=_qos_violation(shares, rate_p, min_rate_bps, bandwidth_factor))


def allocate_none(rate_p: np.ndarray, min_rate_bps: float, bandwidth_factor: float) -> AllocResult:
    """SDMA allocation: no common stream, all shares zero."""
    shares = np.zeros(np.asarray(rate_p).size)
    return AllocResult(shares=shares, violation=_qos_violation(shares, rate_p, min_rate_bps, bandwidth_factor))


def _qos_violation(shares, rate_p, min_rate_bps, bandwidth_factor) -> float:
    if min_rate_bps == 0.0:
        return 0.0
    if bandwidth_factor <= 0.0:
        return math.inf
    req = min_rate_bps / bandwidth_factor
    return float(np.sum(np.maximum(0.0, req - shares - np.asarray(rate_p, dtype=float))))


# -- initial precoders ----------------------------------------------------------


def matched_filter_precoders(
    assignment: Assignment,
    phases: PhaseConfig | None,
    ch,
    cfg: ScenarioConfig,
    access: str = "rsma",
) -> PrecoderSet:
    """Deterministic start: matched-filter columns scaled to the power budget.

    The common column is the normalized sum of the user channels (zero for
    sdma); the weakest user's private column is zeroed for noma.
    """
    mats = []
    for g in range(assignment.num_groups):
        heff = group_effective_channels(g, assignment, phases, ch, cfg)
        k_g = heff.shape[0]
        t = np.zeros((cfg.num_antennas, k_g + 1), dtype=complex)
        if access != "sdma":
            common = np.sum(heff.conj(), axis=0)
            norm = np.linalg.norm(common)
            if norm > 0:
                t[:, 0] = common / norm
        weak = _weakest_user(heff) if access == "noma" else -1
        for k in range(k_g):
            if k == weak:
                continue
            col = heff[k].conj()
            norm = np.linalg.norm(col)
            if norm > 0:
                t[:, k + 1] = col / norm
        total = np.linalg.norm(t)
        if total > 0:
            t *= math.sqrt(cfg.max_uav_power_w) / total
        mats.append(t)
    return PrecoderSet(matrices=tuple(mats))


def _weakest_user(heff: np.ndarray) -> int:
    return int(np.argmin(np.linalg.norm(heff, axis=1)))


# -- the per-group WMMSE loop ----------------------------------------------------


def _solve_columns(a_c, b_c, a_p, b_p, mu):
    n = a_c.shape[0]
    if mu == 0.0:
        t_c = np.linalg.lstsq(a_c, b_c, rcond=None)[0]
        t_p = np.linalg.lstsq(a_p, b_p, rcond=None)[0]
    else:
        eye = mu * np.eye(n)
        t_c = np.linalg.solve(a_c + eye, b_c)
        t_p = np.linalg.solve(a_p + eye, b_p)
    return t_c, t_p


def _power(t_c, t_p) -> float:
    return float(np.sum(t_c.real**2 + t_c.imag**2) + np.sum(t_p.real**2 + t_p.imag**2))


def _precoder_update(a_c, b_c, a_p, b_p, budget):
    """Minimize the weighted MSE subject to the power budget; returns the
    precoder columns and the bisection multiplier."""
    t_c, t_p = _solve_columns(a_c, b_c, a_p, b_p, 0.0)
    if _power(t_c, t_p) <= budget + 1e-12 * budget:
        return t_c, t_p, 0.0
    hi = 1e-9
    for _ in range(200):
        t_c, t_p = _solve_columns(a_c, b_c, a_p, b_p, hi)
        if _power(t_c, t_p) <= budget:
            break
        hi *= 4.0
    else:
        raise IllConditionedError("power bisection failed to bracket")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        t_c, t_p = _solve_columns(a_c, b_c, a_p, b_p, mid)
        if _power(t_c, t_p) <= budget:
            hi = mid
        else:
            lo = mid
    t_c, t_p = _solve_columns(a_c, b_c, a_p, b_p, hi)
    return t_c, t_p, hi


def _group_objective(heff, t, noise_w, common_enabled, alpha=None) -> float:
    """min-common + sum-private rate; violation weights tilt it when given."""
    _, _, rc, rp = kernels.stream_rates(heff, t, noise_w)
    cap = float(np.min(rc)) if common_enabled else 0.0
    if alpha is None:
        return cap + float(np.sum(rp))
    return float(np.max(alpha)) * cap + float(np.asarray(alpha) @ rp)


def _wmmse_group(heff, t_init, budget, noise_w, max_iter, tol, common_enabled, alpha=None):
    """Returns (t, trace, mu).  trace rows are (sweep, wsr, power_used)."""
    k_g = heff.shape[0]
    t = np.array(t_init, dtype=complex, copy=True)
    wsr = _group_objective(heff, t, noise_w, common_enabled, alpha)
    trace = [(0, wsr, float(np.sum(t.real**2 + t.imag**2)))]
    mu = 0.0
    hh = heff.conj()[:, :, None] * heff[:, None, :]  # (K, N, N) outer products
    a_k = np.ones(k_g) if alpha is None else np.asarray(alpha, dtype=float)
    for sweep in range(1, max_iter + 1):
        a = heff @ t
        p = a.real**2 + a.imag**2
        priv_total = p[:, 1:].sum(axis=1)
        total_c = p[:, 0] + priv_total + noise_w
        eps_c = 1.0 - p[:, 0] / total_c
        g_c = a[:, 0].conj() / total_c
        idx = np.arange(k_g)
        own = p[idx, idx + 1]
        total_p = priv_total + noise_w
        eps_p = 1.0 - own / total_p
        g_p = a[idx, idx + 1].conj() / total_p

        w_p = a_k / eps_p
        w_c = np.zeros(k_g)
        if common_enabled:
            worst = int(np.argmax(eps_c))
            w_c[worst] = float(np.max(a_k)) / eps_c[worst]

        a_common = np.einsum("k,kij->ij", w_c * (g_c.real**2 + g_c.imag**2), hh)
        a_priv = a_common + np.einsum("k,kij->ij", w_p * (g_p.real**2 + g_p.imag**2), hh)
        b_common = (w_c * g_c.conj()) @ heff.conj() if common_enabled else np.zeros(heff.shape[1], dtype=complex)
        b_priv = (heff.conj().T) * (w_p * g_p.conj())[None, :]

        try:
            t_c, t_p, mu_new = _precoder_update(a_common, b_common, a_priv, b_priv, budget)
        except IllConditionedError:
            load = 1e-12 * np.eye(heff.shape[1])
            t_c, t_p, mu_new = _precoder_update(a_common + load, b_common, a_priv + load, b_priv, budget)
        t_new = np.concatenate([t_c[:, None], t_p], axis=1)
        wsr_new = _group_objective(heff, t_new, noise_w, common_enabled, alpha)
        if wsr_new < wsr:
            break  # roll back: keep the previous sweep's precoders
        t, mu = t_new, mu_new
        trace.append((sweep, wsr_new, float(np.sum(t.real**2 + t.imag**2))))
        if wsr_new - wsr <= tol * max(1.0, abs(wsr)):
            wsr = wsr_new
            break
        wsr = wsr_new
    return t, trace, mu


@dataclass
class WmmseResult:
    precoders: PrecoderSet
    rate_c: tuple  # per group, bit/s/Hz
    rate_p: tuple
    traces: tuple  # per group, rows (sweep, wsr, power_used)
    power_multiplier: np.ndarray  # (G,) final bisection multiplier
    weak_user: np.ndarray  # (G,) weakest-user index under noma, else -1


def wmmse_solve(
    assignment: Assignment,
    phases: PhaseConfig | None,
    ch,
    cfg: ScenarioConfig,
    t_init: PrecoderSet | None = None,
    access: str = "rsma",
    max_iter: int | None = None,
    tol: float | None = None,
    user_weights: tuple | None = None,
) -> WmmseResult:
    """Solve the per-group precoder subproblem with phases fixed.

    Groups are independent (orthogonal subcarriers) and solved in turn.  The
    returned precoders satisfy the power budget within 1e-9 and the per-group
    WSR trace is non-decreasing.  ``user_weights`` (per-group positive
    arrays) tilt the objective toward selected users; the feasibility search
    uses this to push rate toward QoS-violating users.  ``max_iter=0``
    evaluates the initial precoders without updating them.
    """
    if access not in ACCESS_MODES:
        raise ValueError(f"access must be one of {ACCESS_MODES}")
    max_iter = max_iter if max_iter is not None else cfg.solver_budgets.wmmse_max_iter
    tol = tol if tol is not None else cfg.solver_budgets.wmmse_rel_tol
    if t_init is None:
        t_init = matched_filter_precoders(assignment, phases, ch, cfg, access=access)
    mats, rcs, rps, traces = [], [], [], []
    mus = np.zeros(assignment.num_groups)
    weak = np.full(assignment.num_groups, -1, dtype=int)
    for g in range(assignment.num_groups):
        heff = group_effective_channels(g, assignment, phases, ch, cfg)
        t0 = np.array(t_init.matrix(g), dtype=complex, copy=True)
        if access == "sdma":
            t0[:, 0] = 0.0
        elif access == "noma":
            weak[g] = _weakest_user(heff)
            t0[:, 1 + weak[g]] = 0.0
        t, trace, mu = _wmmse_group(
            heff,
            t0,
            cfg.max_uav_power_w,
            cfg.noise_power_w,
            max_iter,
            tol,
            common_enabled=access != "sdma",
            alpha=None if user_weights is None else user_weights[g],
        )
        _, _, rc, rp = kernels.stream_rates(heff, t, cfg.noise_power_w)
        mats.append(t)
        rcs.append(rc)
        rps.append(rp)
        traces.append(tuple(trace))
        mus[g] = mu
    return WmmseResult(
        precoders=PrecoderSet(matrices=tuple(mats)),
        rate_c=tuple(rcs),
        rate_p=tuple(rps),
        traces=tuple(traces),
        power_multiplier=mus,
        weak_user=weak,
    )
