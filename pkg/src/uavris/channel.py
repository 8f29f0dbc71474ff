"""Rician channel generation for the three link classes, plus cluster views.

Channels are drawn at full surface size L so that any cluster assignment can
be evaluated by row slicing.  One realization is produced per (config, seed)
pair and is bit-identical across calls: the NLOS stream is always consumed in
a fixed order (per group: UAV-to-RIS, then per user: RIS-to-user followed by
the direct link), with the LOS/NLOS mixing weights applied afterwards.

LOS components use exact per-element spherical-wave phases, so every LOS
entry has unit modulus.  RIS cells sit on a near-square row-major grid with
half-wavelength spacing in the y-z plane; UAV antennas form a ULA along x.
The scalar antenna gain applies to links with a UAV endpoint; the passive
surface and single-antenna users contribute no gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig

_FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all complex channel matrices.

    uav_to_ris[g]  : (L, N) UAV g to the full surface.
    ris_to_user[g] : (K_g, L) row k is the surface-to-user (g, k) vector.
    uav_to_user[g] : (K_g, N) row k is the direct vector (zero in a
                     coverage hole).
    """

    uav_to_ris: tuple
    ris_to_user: tuple
    uav_to_user: tuple
    seed: int

    def num_groups(self) -> int:
        return len(self.uav_to_ris)


def ris_element_positions(cfg: ScenarioConfig) -> np.ndarray:
    """(L, 3) cell positions, row-major grid centered on the surface center."""
    lam = cfg.wavelength_m
    num = cfg.num_ris_cells
    ncols = int(math.ceil(math.sqrt(num)))
    nrows = int(math.ceil(num / ncols))
    idx = np.arange(num)
    rows, cols = idx // ncols, idx % ncols
    pos = np.tile(np.asarray(cfg.ris_position, dtype=float), (num, 1))
    pos[:, 1] += (cols - (ncols - 1) / 2.0) * lam / 2.0
    pos[:, 2] -= (rows - (nrows - 1) / 2.0) * lam / 2.0
    return pos


def uav_antenna_positions(cfg: ScenarioConfig, g: int) -> np.ndarray:
    """(N, 3) ULA element positions for UAV g, spaced half a wavelength in x."""
    lam = cfg.wavelength_m
    n = cfg.num_antennas
    pos = np.tile(np.asarray(cfg.uav_positions[g], dtype=float), (n, 1))
    pos[:, 0] += (np.arange(n) - (n - 1) / 2.0) * lam / 2.0
    return pos


def _rician_weights(k_db: float) -> tuple[float, float]:
    if math.isinf(k_db):
        return (1.0, 0.0) if k_db > 0 else (0.0, 1.0)
    k = 10.0 ** (k_db / 10.0)
    return math.sqrt(k / (k + 1.0)), math.sqrt(1.0 / (k + 1.0))


def path_gain_amplitude(cfg: ScenarioConfig, link_class: str, distance_m: float) -> float:
    """sqrt of the linear path gain at the given distance.

    Free-space reference loss at 1 m from the carrier wavelength, distance
    exponent per link class, UAV antenna gain on uav_ris and uav_direct.
    """
    lam = cfg.wavelength_m
    gain = cfg.antenna_gain_linear if link_class in ("uav_ris", "uav_direct") else 1.0
    pl = gain * (lam / _FOUR_PI) ** 2 * distance_m ** (-float(cfg.pathloss_exponent[link_class]))
    return math.sqrt(pl)


def _los_phases(tx_points: np.ndarray, rx_points: np.ndarray, lam: float) -> np.ndarray:
    """Unit-modulus spherical-wave LOS matrix of shape (n_rx, n_tx)."""
    d = np.linalg.norm(rx_points[:, None, :] - tx_points[None, :, :], axis=2)
    return np.exp(-2j * math.pi * d / lam)


def _draw(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def generate_channels(cfg: ScenarioConfig, seed: int | None = None) -> ChannelRealization:
    """Draw one Rician realization of every channel in the scenario."""
    if seed is None:
        seed = cfg.rng_seed
    rng = np.random.default_rng(int(seed))
    lam = cfg.wavelength_m
    ris_pts = ris_element_positions(cfg)
    ris_center = np.asarray(cfg.ris_position, dtype=float)

    w_ur = _rician_weights(float(cfg.rician_k_db["uav_ris"]))
    w_ru = _rician_weights(float(cfg.rician_k_db["ris_user"]))
    w_ud = _rician_weights(float(cfg.rician_k_db["uav_direct"]))

    uav_to_ris = []
    ris_to_user = []
    uav_to_user = []
    for g in range(cfg.num_groups):
        uav_pts = uav_antenna_positions(cfg, g)
        uav_center = np.asarray(cfg.uav_positions[g], dtype=float)

        amp = path_gain_amplitude(cfg, "uav_ris", float(np.linalg.norm(ris_center - uav_center)))
        los = _los_phases(uav_pts, ris_pts, lam)
        h_gr = amp * (w_ur[0] * los + w_ur[1] * _draw(rng, los.shape))
        uav_to_ris.append(h_gr)

        hr_rows = []
        hd_rows = []
        for k in range(cfg.users_per_group[g]):
            user = np.asarray(cfg.user_positions[g][k], dtype=float)

            amp = path_gain_amplitude(cfg, "ris_user", float(np.linalg.norm(user - ris_center)))
            los = _los_phases(ris_pts, user[None, :], lam)[0]
            hr_rows.append(amp * (w_ru[0] * los + w_ru[1] * _draw(rng, los.shape)))

            amp = path_gain_amplitude(cfg, "uav_direct", float(np.linalg.norm(user - uav_center)))
            los = _los_phases(uav_pts, user[None, :], lam)[0]
            row = amp * (w_ud[0] * los + w_ud[1] * _draw(rng, los.shape))
            if (g, k) in cfg.coverage_holes:
                row = np.zeros_like(row)
            hd_rows.append(row)

        ris_to_user.append(np.vstack(hr_rows))
        uav_to_user.append(np.vstack(hd_rows))

    for arrs in (uav_to_ris, ris_to_user, uav_to_user):
        for a in arrs:
            a.setflags(write=False)
    return ChannelRealization(
        uav_to_ris=tuple(uav_to_ris),
        ris_to_user=tuple(ris_to_user),
        uav_to_user=tuple(uav_to_user),
        seed=int(seed),
    )


def cluster_view(ch: ChannelRealization, g: int, f: int, cluster_size: int):
    """Row block of cluster f (1-based) for group g.

    Returns views (no copies) of the UAV-to-RIS block, shape (L/F, N), and
    the RIS-to-user rows, shape (K_g, L/F).
    """
    num_clusters = ch.uav_to_ris[g].shape[0] // cluster_size
    if not 1 <= f <= num_clusters:
        raise IndexError(f"cluster index {f} out of range 1..{num_clusters}")
    lo = (f - 1) * cluster_size
    hi = f * cluster_size
    return ch.uav_to_ris[g][lo:hi, :], ch.ris_to_user[g][:, lo:hi]


def save_realization(ch: ChannelRealization, path) -> None:
    """Binary dump (npz, little-endian complex pairs) for regression fixtures."""
    arrays = {"seed": np.array(ch.seed, dtype=np.int64)}
    for g in range(ch.num_groups()):
        arrays[f"uav_to_ris_{g}"] = ch.uav_to_ris[g]
        arrays[f"ris_to_user_{g}"] = ch.ris_to_user[g]
        arrays[f"uav_to_user_{g}"] = ch.uav_to_user[g]
    np.savez(path, **arrays)


def load_realization(path) -> ChannelRealization:
    with np.load(path) as data:
        groups = sorted(
            int(k.split("_")[-1]) for k in data.files if k.startswith("uav_to_ris_")
        )
        return ChannelRealization(
            uav_to_ris=tuple(data[f"uav_to_ris_{g}"] for g in groups),
            ris_to_user=tuple(data[f"ris_to_user_{g}"] for g in groups),
            uav_to_user=tuple(data[f"uav_to_user_{g}"] for g in groups),
            seed=int(data["seed"]),
        )
