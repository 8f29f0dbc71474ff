"""Riemannian conjugate-gradient ascent for the phase subproblem.

Two feasible sets are supported: the square unitary blocks of the
cell-wise fully connected surface ('block_unitary') and the diagonal
unit-modulus matrices of a conventional surface ('diagonal_circle').
Group subproblems are separable (each group's rate depends only on its own
block), so the solver runs one independent ascent per assisted group.

Gradient convention: :func:`euclidean_grad_phase` returns the Wirtinger
gradient d f / d conj(Phi).  For a real objective the ascent direction in
the real inner product Re tr(A^H B) is twice that; the factor is applied
internally and validated against central finite differences by
:func:`check_gradient`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelRealization, cluster_view
from .rates import Assignment, CommonRateAlloc, PhaseConfig, PrecoderSet, bandwidth_factors
from .scenario import ScenarioConfig

_LN2 = math.log(2.0)


class DegenerateStepError(ValueError):
    """A circle retraction hit an entry of zero magnitude."""


@dataclass(frozen=True)
class ManifoldPoint:
    """A feasible phase block: (n, n) matrix on the unitary manifold or a
    length-n vector of unit-modulus entries on the product of circles."""

    value: np.ndarray
    manifold: str  # 'block_unitary' | 'diagonal_circle'

    def as_matrix(self) -> np.ndarray:
        if self.manifold == "diagonal_circle":
            return np.diag(self.value)
        return self.value

    def feasibility_residual(self) -> float:
        """Frobenius unitarity residual, or max modulus deviation on circles."""
        if self.manifold == "diagonal_circle":
            return float(np.max(np.abs(np.abs(self.value) - 1.0)))
        n = self.value.shape[0]
        return float(np.linalg.norm(self.value.conj().T @ self.value - np.eye(n)))


@dataclass(frozen=True)
class RcgOptions:
    """Hyperparameters of the conjugate-gradient ascent.

    ``grad_tol`` is scaled by max(1, |objective|) so that stopping behaves
    uniformly across bandwidth normalizations.  Search directions are
    normalized, so ``initial_step`` is a length on the manifold.
    """

    max_iter: int = 100
    grad_tol: float = 1e-6
    initial_step: float = 1.0
    contraction: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 40
    beta_rule: str = "polak_ribiere_plus"  # or 'fletcher_reeves'

    def validate(self) -> None:
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise ValueError("iteration caps must be >= 1")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction factor must lie in (0, 1)")
        if self.initial_step <= 0 or self.grad_tol <= 0 or self.armijo_c <= 0:
            raise ValueError("step, tolerance and Armijo constant must be positive")
        if self.beta_rule not in ("polak_ribiere_plus", "fletcher_reeves"):
            raise ValueError(f"unknown beta rule {self.beta_rule!r}")


@dataclass
class RcgResult:
    point: ManifoldPoint
    objective: float
    iterations: int
    stalled: bool
    # rows (iteration, objective, riemannian grad norm, accepted step)
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class PhaseProblem:
    """Objective context for one group's phase block (precoders and common
    shares held fixed)."""

    group: int
    x0: ManifoldPoint
    objective: object  # callable ManifoldPoint -> float
    egrad: object  # callable ManifoldPoint -> ambient Wirtinger gradient


# -- manifold primitives -------------------------------------------------------


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def project_tangent(x: ManifoldPoint, ambient: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient gradient onto the tangent space."""
    if x.manifold == "diagonal_circle":
        return ambient - np.real(ambient * np.conj(x.value)) * x.value
    m = x.value.conj().T @ ambient
    return ambient - x.value @ ((m + m.conj().T) / 2.0)


def retract(x: ManifoldPoint, direction: np.ndarray, step: float) -> ManifoldPoint:
    """First-order retraction of x + step * direction back onto the manifold.

    Unitary blocks use the QR retraction with the R-diagonal sign correction
    (unique factor with positive-real diagonal R); circles renormalize
    entrywise and raise DegenerateStepError on a zero entry.
    """
    if step == 0.0:
        return x
    if x.manifold == "diagonal_circle":
        moved = x.value + step * direction
        mag = np.abs(moved)
        if np.any(mag < 1e-300):
            raise DegenerateStepError("zero-magnitude entry in circle retraction")
        return ManifoldPoint(moved / mag, x.manifold)
    q, r = np.linalg.qr(x.value + step * direction)
    d = np.diagonal(r)
    absd = np.abs(d)
    phase = np.where(absd > 0, d / np.where(absd > 0, absd, 1.0), 1.0)
    return ManifoldPoint(q * phase[None, :], x.manifold)


def random_point(n: int, manifold: str, rng: np.random.Generator) -> ManifoldPoint:
    """Haar-ish random feasible point (QR of a Ginibre draw / random phases)."""
    if manifold == "diagonal_circle":
        return ManifoldPoint(np.exp(2j * math.pi * rng.random(n)), manifold)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    return retract(ManifoldPoint(np.eye(n, dtype=complex), manifold), z, 1.0)


# -- the phase objective and its gradient --------------------------------------


def _grad_matrix(h_direct, h_ris, phi, h_uav, t_priv, noise_w, bw):
    """Wirtinger gradient of bw * sum_k log2(1 + SINR_p_k) w.r.t. conj(Phi)."""
    heff = kernels.effective_channels(h_direct, h_ris, phi, h_uav)
    a = heff @ t_priv  # (K, K): a[k, j] = heff_k . t_j
    p = a.real**2 + a.imag**2
    own = np.diagonal(p)
    denom = p.sum(axis=1) - own + noise_w  # D_k
    total = denom + own  # D_k + S_k
    k_g = p.shape[0]
    alpha = np.tile((1.0 / total - 1.0 / denom)[:, None], (1, k_g))  # off-diagonal weight
    idx = np.arange(k_g)
    alpha[idx, idx] = 1.0 / total
    v = h_uav @ t_priv  # (n, K)
    rows = (alpha * a) @ v.conj().T  # (K, n)
    return (bw / _LN2) * (h_ris.conj().T @ rows)


def euclidean_grad_phase(
    g: int,
    assignment: Assignment,
    phases: PhaseConfig,
    precoders: PrecoderSet,
    alloc: CommonRateAlloc,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> np.ndarray:
    """Wirtinger gradient of group g's objective terms w.r.t. conj(Phi_g).

    Common shares are fixed during the phase step, so only the private rates
    carry gradient; the returned matrix has the block shape (L/F, L/F).
    """
    if not assignment.assisted(g):
        raise ValueError(f"group {g} is unassisted; its phase block is not optimized")
    h_uav, h_ris = cluster_view(ch, g, assignment.u[g], cfg.cluster_size)
    bw = float(bandwidth_factors(assignment, cfg)[g])
    t_priv = precoders.matrix(g)[:, 1:]
    return _grad_matrix(
        ch.uav_to_user[g], h_ris, phases.block(g), h_uav, t_priv, cfg.noise_power_w, bw
    )


def phase_objective(
    g: int,
    assignment: Assignment,
    phases: PhaseConfig,
    precoders: PrecoderSet,
    alloc: CommonRateAlloc,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> float:
    """Group g's contribution to the overall objective with T, r fixed."""
    from .rates import group_stream_rates

    bw = float(bandwidth_factors(assignment, cfg)[g])
    _, _, _, rp = group_stream_rates(g, assignment, phases, precoders, ch, cfg)
    return bw * float(np.sum(np.asarray(alloc.shares[g])) + np.sum(rp))


def build_phase_problems(
    assignment: Assignment,
    phases: PhaseConfig,
    precoders: PrecoderSet,
    alloc: CommonRateAlloc,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> dict:
    """One PhaseProblem per assisted group, warm-started at ``phases``."""
    bw_all = bandwidth_factors(assignment, cfg)
    problems = {}
    for g in range(assignment.num_groups):
        if not assignment.assisted(g):
            continue
        h_uav, h_ris = cluster_view(ch, g, assignment.u[g], cfg.cluster_size)
        h_direct = ch.uav_to_user[g]
        t = precoders.matrix(g)
        t_priv = t[:, 1:]
        bw = float(bw_all[g])
        share_sum = float(np.sum(np.asarray(alloc.shares[g])))
        noise = cfg.noise_power_w
        diagonal = phases.mode == "diagonal_circle"

        def objective(x, *, _hd=h_direct, _hr=h_ris, _hu=h_uav, _t=t, _bw=bw, _s=share_sum):
            if x.manifold == "diagonal_circle":
                heff = _hd + (_hr * x.value[None, :]) @ _hu
            else:
                heff = kernels.effective_channels(_hd, _hr, x.value, _hu)
            _, _, _, rp = kernels.stream_rates(heff, _t, noise)
            return _bw * (_s + float(np.sum(rp)))

        def egrad(x, *, _hd=h_direct, _hr=h_ris, _hu=h_uav, _tp=t_priv, _bw=bw):
            full = _grad_matrix(_hd, _hr, x.as_matrix(), _hu, _tp, noise, _bw)
            if x.manifold == "diagonal_circle":
                return np.diagonal(full).copy()
            return full

        blk = phases.block(g)
        x0 = ManifoldPoint(
            np.diagonal(blk).copy() if diagonal else np.array(blk, dtype=complex, copy=True),
            "diagonal_circle" if diagonal else "block_unitary",
        )
        problems[g] = PhaseProblem(group=g, x0=x0, objective=objective, egrad=egrad)
    return problems


# -- the ascent loop -----------------------------------------------------------


def rcg_ascend(problem: PhaseProblem, opts: RcgOptions, on_iterate=None) -> RcgResult:
    """Conjugate-gradient ascent of one problem; monotone over accepted steps."""
    opts.validate()
    x = problem.x0
    f = float(problem.objective(x))
    trace = [(0, f, math.nan, 0.0)]
    if on_iterate is not None:
        on_iterate(x)
    g_prev = None
    d_prev = None
    step = opts.initial_step
    stalled = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        rg = project_tangent(x, 2.0 * np.asarray(problem.egrad(x)))
        gnorm = math.sqrt(_inner(rg, rg))
        if gnorm <= opts.grad_tol * max(1.0, abs(f)):
            break
        if d_prev is None:
            d = rg
        else:
            d_t = project_tangent(x, d_prev)
            g_old_t = project_tangent(x, g_prev)
            denom = _inner(g_old_t, g_old_t)
            if denom <= 0.0:
                beta = 0.0
            elif opts.beta_rule == "fletcher_reeves":
                beta = _inner(rg, rg) / denom
            else:
                beta = max(0.0, _inner(rg, rg - g_old_t) / denom)
            d = rg + beta * d_t
            if _inner(d, rg) <= 0.0:  # not an ascent direction: restart
                d = rg
        dnorm = math.sqrt(_inner(d, d))
        if dnorm == 0.0:
            break
        direction = d / dnorm
        slope = _inner(rg, direction)  # > 0 by construction

        trial = min(2.0 * step, opts.initial_step) if step > 0 else opts.initial_step
        accepted = False
        for _ in range(opts.max_backtracks):
            try:
                x_new = retract(x, direction, trial)
            except DegenerateStepError:
                trial *= opts.contraction
                continue
            f_new = float(problem.objective(x_new))
            if f_new >= f + opts.armijo_c * trial * slope:
                accepted = True
                break
            trial *= opts.contraction
        if not accepted:
            stalled = True
            break
        x, f, step = x_new, f_new, trial
        g_prev, d_prev = rg, d
        trace.append((it, f, gnorm, trial))
        if on_iterate is not None:
            on_iterate(x)
    return RcgResult(point=x, objective=f, iterations=it, stalled=stalled, trace=trace)


def rcg_maximize(
    problems: dict,
    assignment: Assignment,
    phases: PhaseConfig,
    opts: RcgOptions,
    on_iterate=None,
) -> tuple[PhaseConfig, dict]:
    """Ascend every assisted group's problem and assemble the new phases.

    Returns the updated PhaseConfig plus the per-group RcgResult map.  Groups
    without a problem keep their current block.
    """
    blocks = list(phases.blocks)
    results = {}
    for g, problem in sorted(problems.items()):
        res = rcg_ascend(problem, opts, on_iterate=on_iterate)
        results[g] = res
        blocks[g] = res.point.as_matrix()
    return PhaseConfig(blocks=tuple(blocks), mode=phases.mode), results


# -- finite-difference validation ----------------------------------------------


def check_gradient(problem: PhaseProblem, x: ManifoldPoint | None = None, step: float = 1e-6) -> float:
    """Max relative entry error of the Wirtinger gradient vs central
    finite differences of the ambient objective."""
    x = problem.x0 if x is None else x
    grad = np.asarray(problem.egrad(x))
    fd = np.zeros_like(grad)
    flat = x.value.ravel()
    for idx in range(flat.size):
        for part, scale in ((1.0, 1.0), (1j, 1j)):
            bump = np.zeros_like(flat)
            bump[idx] = step * part
            xp = ManifoldPoint((flat + bump).reshape(x.value.shape), x.manifold)
            xm = ManifoldPoint((flat - bump).reshape(x.value.shape), x.manifold)
            deriv = (problem.objective(xp) - problem.objective(xm)) / (2.0 * step)
            fd.ravel()[idx] += 0.5 * deriv * scale
    scale = np.max(np.abs(fd)) if np.max(np.abs(fd)) > 0 else 1.0
    denom = np.maximum(np.abs(fd), 1e-9 * scale)
    return float(np.max(np.abs(fd - grad) / denom))
