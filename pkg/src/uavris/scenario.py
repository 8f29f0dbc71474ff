"""Scenario definition: geometry, radio constants, group structure, solver budgets.

A :class:`ScenarioConfig` is immutable after construction and safe to share
across parallel workers.  Group and user indices are 0-based throughout the
package; cluster indices are 1-based with 0 meaning "no cluster assigned".

Configs are loaded from a JSON-compatible key/value tree whose keys match the
dataclass field names exactly.  Distances are in meters, powers in watts
(noise given in dBm through ``noise_power_dbm``), frequencies in hertz.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

#: Link classes used to key Rician K-factors and path-loss exponents.
LINK_CLASSES = ("uav_ris", "ris_user", "uav_direct")

RIS_MODES = ("block_unitary", "diagonal_circle", "none")


class ScenarioError(ValueError):
    """Raised when a scenario document is malformed or violates an invariant."""


@dataclass(frozen=True)
class SolverBudgets:
    """Iteration caps and tolerances for the nested solvers."""

    gbd_max_iter: int = 50
    bcd_max_iter: int = 80
    rcg_max_iter: int = 100
    wmmse_max_iter: int = 100
    gbd_rel_tol: float = 1e-3
    bcd_rel_tol: float = 1e-5
    wmmse_rel_tol: float = 1e-6
    rcg_grad_tol: float = 1e-6

    def validate(self) -> None:
        for name in ("gbd_max_iter", "bcd_max_iter", "rcg_max_iter", "wmmse_max_iter"):
            if int(getattr(self, name)) < 1:
                raise ScenarioError(f"solver_budgets.{name} must be >= 1")
        for name in ("gbd_rel_tol", "bcd_rel_tol", "wmmse_rel_tol", "rcg_grad_tol"):
            v = float(getattr(self, name))
            if not (v > 0.0 and math.isfinite(v)):
                raise ScenarioError(f"solver_budgets.{name} must be positive")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Full static description of one simulation scenario.

    Paper-style symbols map onto fields as: G ``num_groups``, K_g
    ``users_per_group``, N ``num_antennas``, L ``num_ris_cells``, F
    ``num_clusters``, (w1, w2) ``bandwidth_split``.
    """

    num_groups: int = 8
    users_per_group: tuple[int, ...] = ()
    num_antennas: int = 4
    num_ris_cells: int = 512
    num_clusters: int = 4
    bandwidth_hz: float = 10e6
    bandwidth_split: tuple[float, float] = (0.6, 0.4)
    carrier_freq_hz: float = 5e9
    noise_power_dbm: float = -94.0
    max_uav_power_w: float = 0.01
    min_rate_bps: float = 0.0
    antenna_gain_dbi: float = 5.0
    uav_positions: np.ndarray | None = None
    user_positions: tuple[np.ndarray, ...] | None = None
    ris_position: np.ndarray | None = None
    rician_k_db: dict = field(
        default_factory=lambda: {"uav_ris": 10.0, "ris_user": 3.0, "uav_direct": 10.0}
    )
    pathloss_exponent: dict = field(
        default_factory=lambda: {"uav_ris": 2.2, "ris_user": 2.8, "uav_direct": 3.0}
    )
    coverage_holes: frozenset = frozenset()
    ris_mode: str = "block_unitary"
    solver_budgets: SolverBudgets = field(default_factory=SolverBudgets)
    rng_seed: int = 0
    frame_length_s: float = 1e-3  # recorded for completeness; unused by the rate model
    num_subcarriers: int | None = None  # informational alias, bandwidth_hz is operative

    def __post_init__(self):
        if not self.users_per_group:
            object.__setattr__(self, "users_per_group", (2,) * int(self.num_groups))
        object.__setattr__(self, "users_per_group", tuple(int(k) for k in self.users_per_group))
        object.__setattr__(self, "bandwidth_split", tuple(float(w) for w in self.bandwidth_split))
        object.__setattr__(self, "coverage_holes", frozenset(map(tuple, self.coverage_holes)))
        if self.uav_positions is not None:
            object.__setattr__(self, "uav_positions", _readonly(self.uav_positions))
        if self.ris_position is not None:
            object.__setattr__(self, "ris_position", _readonly(self.ris_position))
        if self.user_positions is not None:
            object.__setattr__(
                self, "user_positions", tuple(_readonly(p) for p in self.user_positions)
            )

    # -- derived quantities -------------------------------------------------

    @property
    def cluster_size(self) -> int:
        return self.num_ris_cells // self.num_clusters

    @property
    def noise_power_w(self) -> float:
        return 10.0 ** ((self.noise_power_dbm - 30.0) / 10.0)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def antenna_gain_linear(self) -> float:
        return 10.0 ** (self.antenna_gain_dbi / 10.0)

    @property
    def total_users(self) -> int:
        return sum(self.users_per_group)

    def has_positions(self) -> bool:
        return (
            self.uav_positions is not None
            and self.user_positions is not None
            and self.ris_position is not None
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return to_dict(self) == to_dict(other)

    def replace(self, **changes) -> "ScenarioConfig":
        """Return a copy with the given fields replaced (re-validated)."""
        cfg = dataclasses.replace(self, **changes)
        validate(cfg)
        return cfg


# -- validation --------------------------------------------------------------


def validate(cfg: ScenarioConfig) -> None:
    """Check every scenario invariant; raise ScenarioError naming the field."""
    if int(cfg.num_groups) < 1:
        raise ScenarioError("num_groups must be >= 1")
    if len(cfg.users_per_group) != cfg.num_groups:
        raise ScenarioError("users_per_group must have one entry per group")
    if any(k < 1 for k in cfg.users_per_group):
        raise ScenarioError("users_per_group entries must be >= 1")
    if int(cfg.num_antennas) < 1:
        raise ScenarioError("num_antennas must be >= 1")
    if int(cfg.num_ris_cells) < 1:
        raise ScenarioError("num_ris_cells must be >= 1")
    if int(cfg.num_clusters) < 1:
        raise ScenarioError("num_clusters must be >= 1")
    if cfg.num_ris_cells % cfg.num_clusters != 0:
        raise ScenarioError("F must divide L (num_clusters must divide num_ris_cells)")
    for name in ("bandwidth_hz", "carrier_freq_hz", "max_uav_power_w"):
        v = float(getattr(cfg, name))
        if not (v > 0.0 and math.isfinite(v)):
            raise ScenarioError(f"{name} must be strictly positive")
    w1, w2 = cfg.bandwidth_split
    if abs(w1 + w2 - 1.0) > 1e-12 or w1 < 0.0 or w2 < 0.0:
        raise ScenarioError("bandwidth_split must sum to 1")
    if not math.isfinite(cfg.noise_power_dbm):
        raise ScenarioError("noise_power_dbm must be finite")
    if cfg.min_rate_bps < 0.0 or not math.isfinite(cfg.min_rate_bps):
        raise ScenarioError("min_rate_bps must be nonnegative")
    if cfg.ris_mode not in RIS_MODES:
        raise ScenarioError(f"ris_mode must be one of {RIS_MODES}")
    for table, name in ((cfg.rician_k_db, "rician_k_db"), (cfg.pathloss_exponent, "pathloss_exponent")):
        missing = [c for c in LINK_CLASSES if c not in table]
        if missing:
            raise ScenarioError(f"{name} missing link classes {missing}")
    for c in LINK_CLASSES:
        if math.isnan(float(cfg.rician_k_db[c])):
            raise ScenarioError("rician_k_db entries must not be NaN")
        e = float(cfg.pathloss_exponent[c])
        if not (math.isfinite(e) and e >= 0.0):
            raise ScenarioError("pathloss_exponent entries must be finite and >= 0")
    for g, k in cfg.coverage_holes:
        if not (0 <= g < cfg.num_groups and 0 <= k < cfg.users_per_group[g]):
            raise ScenarioError(f"coverage_holes entry ({g},{k}) out of range")
    cfg.solver_budgets.validate()
    if cfg.has_positions():
        _validate_positions(cfg)


def _validate_positions(cfg: ScenarioConfig) -> None:
    uav = np.asarray(cfg.uav_positions, dtype=float)
    if uav.shape != (cfg.num_groups, 3):
        raise ScenarioError("uav_positions must have shape (num_groups, 3)")
    if len(cfg.user_positions) != cfg.num_groups:
        raise ScenarioError("user_positions must have one array per group")
    ris = np.asarray(cfg.ris_position, dtype=float)
    if ris.shape != (3,):
        raise ScenarioError("ris_position must be a 3-vector")
    points = [tuple(ris)]
    points += [tuple(p) for p in uav]
    for g, arr in enumerate(cfg.user_positions):
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (cfg.users_per_group[g], 3):
            raise ScenarioError(f"user_positions[{g}] must have shape (K_g, 3)")
        points += [tuple(p) for p in arr]
    flat = np.array(points)
    if not np.all(np.isfinite(flat)):
        raise ScenarioError("positions must be finite")
    if len(set(points)) != len(points):
        raise ScenarioError("positions must be pairwise distinct")


# -- default geometry ---------------------------------------------------------


def default_layout(cfg: ScenarioConfig) -> ScenarioConfig:
    """Fill in any missing positions with the default deployment.

    UAV 1 sits at (20, 80, 250) m; the remaining UAVs share y=80, z=250 and
    take unique x coordinates from 10 m upward in 10 m steps (skipping 20 m,
    which UAV 1 occupies).  User 1 sits at (10, 30, 1) m and the remaining
    users are spread evenly over x in [15, 85] m at y=30, z=1.  The RIS
    center is (100, 75, 120) m.  Idempotent: present positions are kept.
    """
    changes = {}
    if cfg.uav_positions is None:
        xs = [20.0]
        x = 10.0
        while len(xs) < cfg.num_groups:
            if x != 20.0:
                xs.append(x)
            x += 10.0
        changes["uav_positions"] = np.array([[x, 80.0, 250.0] for x in xs])
    if cfg.user_positions is None:
        n_rest = cfg.total_users - 1
        if n_rest <= 0:
            rest_x = []
        elif n_rest == 1:
            rest_x = [50.0]
        else:
            rest_x = [15.0 + 70.0 * j / (n_rest - 1) for j in range(n_rest)]
        coords = [np.array([10.0, 30.0, 1.0])] + [np.array([x, 30.0, 1.0]) for x in rest_x]
        per_group = []
        i = 0
        for kg in cfg.users_per_group:
            per_group.append(np.vstack(coords[i : i + kg]))
            i += kg
        changes["user_positions"] = tuple(per_group)
    if cfg.ris_position is None:
        changes["ris_position"] = np.array([100.0, 75.0, 120.0])
    if not changes:
        return cfg
    return dataclasses.replace(cfg, **changes)


# -- serialization ------------------------------------------------------------

_POSITION_FIELDS = ("uav_positions", "user_positions", "ris_position")


def to_dict(cfg: ScenarioConfig) -> dict:
    """JSON-compatible dict; inverse of :func:`load_scenario` for valid configs."""
    d = {
        "num_groups": cfg.num_groups,
        "users_per_group": list(cfg.users_per_group),
        "num_antennas": cfg.num_antennas,
        "num_ris_cells": cfg.num_ris_cells,
        "num_clusters": cfg.num_clusters,
        "bandwidth_hz": cfg.bandwidth_hz,
        "bandwidth_split": list(cfg.bandwidth_split),
        "carrier_freq_hz": cfg.carrier_freq_hz,
        "noise_power_dbm": cfg.noise_power_dbm,
        "max_uav_power_w": cfg.max_uav_power_w,
        "min_rate_bps": cfg.min_rate_bps,
        "antenna_gain_dbi": cfg.antenna_gain_dbi,
        "rician_k_db": {c: float(cfg.rician_k_db[c]) for c in LINK_CLASSES},
        "pathloss_exponent": {c: float(cfg.pathloss_exponent[c]) for c in LINK_CLASSES},
        "coverage_holes": sorted([list(h) for h in cfg.coverage_holes]),
        "ris_mode": cfg.ris_mode,
        "solver_budgets": dataclasses.asdict(cfg.solver_budgets),
        "rng_seed": cfg.rng_seed,
        "frame_length_s": cfg.frame_length_s,
    }
    if cfg.num_subcarriers is not None:
        d["num_subcarriers"] = cfg.num_subcarriers
    if cfg.uav_positions is not None:
        d["uav_positions"] = np.asarray(cfg.uav_positions).tolist()
    if cfg.user_positions is not None:
        d["user_positions"] = [np.asarray(p).tolist() for p in cfg.user_positions]
    if cfg.ris_position is not None:
        d["ris_position"] = np.asarray(cfg.ris_position).tolist()
    return d


def to_json(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True)


def load_scenario(source) -> ScenarioConfig:
    """Parse and validate a scenario document.

    ``source`` may be a dict, a JSON string, or a path to a JSON file.
    Missing positions are filled by :func:`default_layout`.  Raises
    ScenarioError naming the offending field on validation failure, and on
    malformed JSON.
    """
    if isinstance(source, ScenarioConfig):
        doc = to_dict(source)
    elif isinstance(source, dict):
        doc = dict(source)
    else:
        text = source
        if isinstance(source, (str, Path)) and Path(str(source)).suffix == ".json":
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ScenarioError(f"cannot read config file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"malformed scenario document: {exc}") from exc
        if not isinstance(doc, dict):
            raise ScenarioError("scenario document must be a key/value tree")
    return _from_dict(doc)


def _from_dict(doc: dict) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ScenarioError(f"unknown config keys: {unknown}")
    kw = dict(doc)

    if "users_per_group" in kw and isinstance(kw["users_per_group"], (int, float)):
        kw["users_per_group"] = [int(kw["users_per_group"])] * int(
            kw.get("num_groups", ScenarioConfig.num_groups)
        )
    for name in ("rician_k_db", "pathloss_exponent"):
        v = kw.get(name)
        if isinstance(v, (int, float, str)):
            kw[name] = {c: _as_float(v, name) for c in LINK_CLASSES}
        elif isinstance(v, dict):
            kw[name] = {c: _as_float(x, name) for c, x in v.items()}
    if "solver_budgets" in kw and isinstance(kw["solver_budgets"], dict):
        extra = set(kw["solver_budgets"]) - {f.name for f in dataclasses.fields(SolverBudgets)}
        if extra:
            raise ScenarioError(f"unknown solver_budgets keys: {sorted(extra)}")
        kw["solver_budgets"] = SolverBudgets(**kw["solver_budgets"])
    if "coverage_holes" in kw:
        kw["coverage_holes"] = frozenset(tuple(int(i) for i in h) for h in kw["coverage_holes"])
    if kw.get("uav_positions") is not None:
        kw["uav_positions"] = np.asarray(kw["uav_positions"], dtype=float)
    if kw.get("user_positions") is not None:
        kw["user_positions"] = tuple(np.asarray(p, dtype=float) for p in kw["user_positions"])
    if kw.get("ris_position") is not None:
        kw["ris_position"] = np.asarray(kw["ris_position"], dtype=float)

    try:
        cfg = ScenarioConfig(**kw)
    except TypeError as exc:
        raise ScenarioError(f"bad scenario document: {exc}") from exc
    cfg = default_layout(cfg)
    validate(cfg)
    return cfg


def _as_float(v, name: str) -> float:
    # JSON has no inf literal; accept "inf"/"-inf" strings for K-factor limits.
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{name} entries must be numeric") from exc


def table_ii_scenario(**overrides) -> ScenarioConfig:
    """The paper-scale setting (G=8, N=4, L=512, F=4, 10 MHz, -94 dBm)."""
    cfg = ScenarioConfig(**overrides)
    cfg = default_layout(cfg)
    validate(cfg)
    return cfg


def desk_scenario(
    num_groups: int = 2,
    users_per_group: int = 2,
    num_antennas: int = 2,
    num_ris_cells: int = 16,
    num_clusters: int = 2,
    **overrides,
) -> ScenarioConfig:
    """A small scenario that solves in seconds; used by tests and presets."""
    budgets = overrides.pop(
        "solver_budgets",
        SolverBudgets(
            gbd_max_iter=12,
            bcd_max_iter=8,
            rcg_max_iter=40,
            wmmse_max_iter=40,
            gbd_rel_tol=1e-6,
            bcd_rel_tol=1e-6,
            wmmse_rel_tol=1e-8,
            rcg_grad_tol=1e-7,
        ),
    )
    cfg = ScenarioConfig(
        num_groups=num_groups,
        users_per_group=(users_per_group,) * num_groups,
        num_antennas=num_antennas,
        num_ris_cells=num_ris_cells,
        num_clusters=num_clusters,
        solver_budgets=budgets,
        **overrides,
    )
    cfg = default_layout(cfg)
    validate(cfg)
    return cfg
