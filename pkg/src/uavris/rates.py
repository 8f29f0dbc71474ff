"""Rate model: effective channels, SINRs, rates, the overall objective and
the constraint-residual vector.

All operations are pure functions of their inputs.  Rates from
:func:`stream_rates` are spectral efficiencies in bit/s/Hz; the overall
objective applies the per-group bandwidth factors and is in bit/s.

Residual sign convention: an entry of the constraint vector E is >= 0 iff
the corresponding constraint is satisfied.  The ordering is frozen (all
common-decodability rows group-major/user-minor, then all QoS rows, then one
power row per group) so that cut multipliers index stably across iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import ChannelRealization, cluster_view
from .scenario import ScenarioConfig

UNITARY_TOL = 1e-8
UNIT_MODULUS_TOL = 1e-10
POWER_TOL = 1e-9


@dataclass(frozen=True)
class Assignment:
    """Map from groups to BD-RIS clusters; u[g] in 0..F with 0 = unassisted."""

    u: tuple

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(int(x) for x in self.u))

    @property
    def num_groups(self) -> int:
        return len(self.u)

    @property
    def num_assisted(self) -> int:
        return sum(1 for x in self.u if x > 0)

    def assisted(self, g: int) -> bool:
        return self.u[g] > 0

    def validate(self, num_clusters: int) -> None:
        nonzero = [x for x in self.u if x != 0]
        if any(not 0 <= x <= num_clusters for x in self.u):
            raise ValueError(f"assignment entries must lie in 0..{num_clusters}")
        if len(set(nonzero)) != len(nonzero):
            raise ValueError("assigned clusters must be pairwise distinct")
        if len(nonzero) > num_clusters:
            raise ValueError("more assisted groups than clusters")


@dataclass(frozen=True)
class PhaseConfig:
    """Per-group phase blocks; zero matrix for unassisted groups.

    mode 'block_unitary' requires each assisted block to be unitary; mode
    'diagonal_circle' requires a diagonal block with unit-modulus entries.
    """

    blocks: tuple
    mode: str

    def block(self, g: int) -> np.ndarray:
        return self.blocks[g]

    def validate(self, assignment: Assignment) -> None:
        for g, blk in enumerate(self.blocks):
            blk = np.asarray(blk)
            if blk.shape[0] != blk.shape[1]:
                raise ValueError(f"phase block {g} must be square")
            if not assignment.assisted(g):
                if np.any(blk != 0):
                    raise ValueError(f"unassisted group {g} must have a zero phase block")
                continue
            n = blk.shape[0]
            if self.mode == "block_unitary":
                resid = np.linalg.norm(blk.conj().T @ blk - np.eye(n))
                if resid > UNITARY_TOL:
                    raise ValueError(f"phase block {g} unitarity residual {resid:.2e}")
            elif self.mode == "diagonal_circle":
                if np.any(blk - np.diag(np.diagonal(blk)) != 0):
                    raise ValueError(f"phase block {g} must be diagonal")
                err = np.max(np.abs(np.abs(np.diagonal(blk)) - 1.0))
                if err > UNIT_MODULUS_TOL:
                    raise ValueError(f"phase block {g} modulus error {err:.2e}")
            else:
                raise ValueError(f"unknown phase mode {self.mode!r}")


def identity_phases(assignment: Assignment, cfg: ScenarioConfig, mode: str | None = None) -> PhaseConfig:
    """Identity blocks for assisted groups (the deterministic initial point)."""
    mode = mode or cfg.ris_mode
    n = cfg.cluster_size
    blocks = tuple(
        np.eye(n, dtype=complex) if assignment.assisted(g) else np.zeros((n, n), dtype=complex)
        for g in range(assignment.num_groups)
    )
    return PhaseConfig(blocks=blocks, mode="diagonal_circle" if mode == "diagonal_circle" else "block_unitary")


@dataclass(frozen=True)
class PrecoderSet:
    """Per-group precoder matrices, shape (N, K_g+1); column 0 is common."""

    matrices: tuple

    def matrix(self, g: int) -> np.ndarray:
        return self.matrices[g]

    def power(self, g: int) -> float:
        t = self.matrices[g]
        return float(np.sum(t.real**2 + t.imag**2))

    def validate(self, max_power_w: float) -> None:
        for g in range(len(self.matrices)):
            p = self.power(g)
            if p > max_power_w + POWER_TOL:
                raise ValueError(f"group {g} precoder power {p:.6g} exceeds budget {max_power_w:.6g}")


@dataclass(frozen=True)
class CommonRateAlloc:
    """Per-user shares of each group's common-stream rate, in bit/s/Hz."""

    shares: tuple

    def group(self, g: int) -> np.ndarray:
        return self.shares[g]

    def validate(self) -> None:
        for g, r in enumerate(self.shares):
            if np.any(np.asarray(r) < 0):
                raise ValueError(f"common rate shares for group {g} must be nonnegative")


@dataclass(frozen=True)
class RateReport:
    """Evaluated SINRs, per-stream rates and the overall objective."""

    gamma_c: tuple
    gamma_p: tuple
    rate_c: tuple
    rate_p: tuple
    common_capacity: np.ndarray  # (G,) min over users of rate_c, bit/s/Hz
    bandwidth_factor: np.ndarray  # (G,) Hz
    group_value: np.ndarray  # (G,) bit/s contribution
    overall_bps: float
    c4_violation: np.ndarray  # (G,) max(0, sum(shares) - common_capacity)

    def to_rows(self, alloc: CommonRateAlloc) -> list:
        """Flat rows (group, user, gamma_c, gamma_p, rate_c, rate_p, share,
        contribution_bps) for CSV export."""
        rows = []
        for g in range(len(self.rate_c)):
            for k in range(len(self.rate_c[g])):
                share = float(alloc.shares[g][k])
                contrib = self.bandwidth_factor[g] * (share + float(self.rate_p[g][k]))
                rows.append(
                    (
                        g,
                        k,
                        float(self.gamma_c[g][k]),
                        float(self.gamma_p[g][k]),
                        float(self.rate_c[g][k]),
                        float(self.rate_p[g][k]),
                        share,
                        contrib,
                    )
                )
        return rows


# -- effective channels -------------------------------------------------------


def group_effective_channels(
    g: int,
    assignment: Assignment,
    phases: PhaseConfig | None,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> np.ndarray:
    """(K_g, N) effective channel rows for group g under the assignment."""
    direct = ch.uav_to_user[g]
    if not assignment.assisted(g):
        return direct
    h_uav, h_ris = cluster_view(ch, g, assignment.u[g], cfg.cluster_size)
    return kernels.effective_channels(direct, h_ris, phases.block(g), h_uav)


def effective_channel(
    g: int,
    k: int,
    assignment: Assignment,
    phases: PhaseConfig | None,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> np.ndarray:
    """Effective row vector h + h_ris Phi H for user (g, k); h alone if
    the group is unassisted."""
    if not assignment.assisted(g):
        return ch.uav_to_user[g][k]
    return group_effective_channels(g, assignment, phases, ch, cfg)[k]


# -- SINRs and rates ----------------------------------------------------------


def sinr_common(heff: np.ndarray, precoders: np.ndarray, noise_w: float) -> float:
    """|heff t_c|^2 / (sum_j |heff t_j|^2 + noise); all private streams
    count as interference."""
    a = np.asarray(heff) @ np.asarray(precoders)
    p = a.real**2 + a.imag**2
    return float(p[0] / (np.sum(p[1:]) + noise_w))


def sinr_private(heff: np.ndarray, precoders: np.ndarray, k: int, noise_w: float) -> float:
    """|heff t_k|^2 / (sum_{j != k} |heff t_j|^2 + noise); the common stream
    was removed by SIC."""
    a = np.asarray(heff) @ np.asarray(precoders)
    p = a.real**2 + a.imag**2
    own = p[k + 1]
    interference = max(float(np.sum(p[1:]) - own), 0.0)
    return float(own / (interference + noise_w))


def stream_rates_user(heff: np.ndarray, precoders: np.ndarray, k: int, noise_w: float):
    """(rate_c, rate_p) in bit/s/Hz for user k of one group."""
    gc = sinr_common(heff, precoders, noise_w)
    gp = sinr_private(heff, precoders, k, noise_w)
    return math.log2(1.0 + gc), math.log2(1.0 + gp)


def common_capacity(rate_c: np.ndarray) -> float:
    """Decodable common rate of a group: the worst user's common rate."""
    return float(np.min(rate_c))


def group_stream_rates(
    g: int,
    assignment: Assignment,
    phases: PhaseConfig | None,
    precoders: PrecoderSet,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
):
    """Kernel-backed (gamma_c, gamma_p, rate_c, rate_p) for group g."""
    heff = group_effective_channels(g, assignment, phases, ch, cfg)
    return kernels.stream_rates(heff, precoders.matrix(g), cfg.noise_power_w)


# -- objective and residuals ----------------------------------------------------


def bandwidth_factors(assignment: Assignment, cfg: ScenarioConfig) -> np.ndarray:
    """Per-group bandwidth in Hz: w1 W / F for assisted groups, w2 W /
    (G - F') for unassisted ones.  Degenerate terms (no assisted or no
    unassisted group) are dropped rather than divided by zero."""
    w1, w2 = cfg.bandwidth_split
    g_total = assignment.num_groups
    f_active = assignment.num_assisted
    assisted_bw = w1 * cfg.bandwidth_hz / cfg.num_clusters
    unassisted_bw = 0.0 if f_active == g_total else w2 * cfg.bandwidth_hz / (g_total - f_active)
    return np.array([assisted_bw if assignment.assisted(g) else unassisted_bw for g in range(g_total)])


def min_rate_se(cfg: ScenarioConfig, bandwidth_factor: float) -> float:
    """QoS floor converted to bit/s/Hz for a group with the given bandwidth."""
    if cfg.min_rate_bps == 0.0:
        return 0.0
    if bandwidth_factor <= 0.0:
        return math.inf
    return cfg.min_rate_bps / bandwidth_factor


def overall_rate(
    assignment: Assignment,
    phases: PhaseConfig | None,
    precoders: PrecoderSet,
    alloc: CommonRateAlloc,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> RateReport:
    """Evaluate the overall objective in bit/s.

    Each user contributes its common share plus its private rate, scaled by
    the group's bandwidth factor.  A group's shares exceeding its common
    capacity is reported through ``c4_violation``, not raised.
    """
    num_groups = assignment.num_groups
    bw = bandwidth_factors(assignment, cfg)
    gamma_c, gamma_p, rate_c, rate_p = [], [], [], []
    cap = np.zeros(num_groups)
    group_value = np.zeros(num_groups)
    c4_violation = np.zeros(num_groups)
    for g in range(num_groups):
        gc, gp, rc, rp = group_stream_rates(g, assignment, phases, precoders, ch, cfg)
        gamma_c.append(gc)
        gamma_p.append(gp)
        rate_c.append(rc)
        rate_p.append(rp)
        cap[g] = common_capacity(rc)
        shares = np.asarray(alloc.shares[g], dtype=float)
        group_value[g] = bw[g] * float(np.sum(shares) + np.sum(rp))
        c4_violation[g] = max(0.0, float(np.sum(shares)) - cap[g])
    return RateReport(
        gamma_c=tuple(gamma_c),
        gamma_p=tuple(gamma_p),
        rate_c=tuple(rate_c),
        rate_p=tuple(rate_p),
        common_capacity=cap,
        bandwidth_factor=bw,
        group_value=group_value,
        overall_bps=float(np.sum(group_value)),
        c4_violation=c4_violation,
    )


def residual_layout(cfg: ScenarioConfig) -> dict:
    """Slices of the residual vector: common-decodability rows, QoS rows,
    power rows (in that frozen order)."""
    n_users = cfg.total_users
    return {
        "c4": slice(0, n_users),
        "c5": slice(n_users, 2 * n_users),
        "c6": slice(2 * n_users, 2 * n_users + cfg.num_groups),
        "size": 2 * n_users + cfg.num_groups,
    }


def constraint_residuals(
    assignment: Assignment,
    phases: PhaseConfig | None,
    precoders: PrecoderSet,
    alloc: CommonRateAlloc,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
) -> np.ndarray:
    """Stacked residual vector E; entry >= 0 means the constraint holds.

    Order: per (g, k) common-decodability margin rate_c[g,k] - sum_j r[g,j];
    per (g, k) QoS margin r[g,k] + rate_p[g,k] - Rmin/bandwidth; per group
    the power margin P_max - ||T_g||_F^2.
    """
    bw = bandwidth_factors(assignment, cfg)
    c4_rows, c5_rows, c6_rows = [], [], []
    for g in range(assignment.num_groups):
        _, _, rc, rp = group_stream_rates(g, assignment, phases, precoders, ch, cfg)
        shares = np.asarray(alloc.shares[g], dtype=float)
        total_share = float(np.sum(shares))
        req = min_rate_se(cfg, float(bw[g]))
        c4_rows.extend(rc - total_share)
        c5_rows.extend(shares + rp - req)
        c6_rows.append(cfg.max_uav_power_w - precoders.power(g))
    return np.array(c4_rows + c5_rows + c6_rows, dtype=float)
