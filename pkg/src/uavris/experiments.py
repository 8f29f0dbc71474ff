"""Sweep harness: Monte-Carlo averaging over seeds along a power or
surface-size axis, with a frozen CSV schema.

CSV columns: axis_value, scheme, trial, value_bps, lb, ub, iters, wall_ms.
Raw rows come first, sorted by (axis_value, scheme, trial); aggregate rows
follow with trial set to 'mean' and 'stderr' (numeric columns aggregated
over the non-failed trials of the cell).  Failed cells are recorded as rows
with NaN values rather than aborting the sweep.  Wall times are measured
but written as 0 unless timing output is requested, so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass

import numpy as np

from . import baselines
from .channel import generate_channels
from .gbd import GlobalInfeasibleError
from .scenario import ScenarioConfig, ScenarioError

AXES = ("uav_power", "ris_cells")

_NUMERIC_COLS = ("value_bps", "lb", "ub", "iters", "wall_ms")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple
    schemes: tuple
    trials: int = 1
    base_seed: int = 0

    def validate(self) -> None:
        if self.axis not in AXES:
            raise ScenarioError(f"axis must be one of {AXES}")
        if len(self.grid) == 0:
            raise ScenarioError("grid must be nonempty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ScenarioError("grid must be strictly increasing")
        if self.trials < 1:
            raise ScenarioError("trials must be >= 1")
        if not self.schemes:
            raise ScenarioError("schemes must be nonempty")
        for s in self.schemes:
            if s not in baselines.SCHEMES:
                raise ScenarioError(f"unknown scheme {s!r}")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "uav_power":
        return cfg.replace(max_uav_power_w=dbm_to_watt(float(value)))
    return cfg.replace(num_ris_cells=int(value))


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig) -> list:
    """Run the grid x scheme x trial cells; returns raw + aggregate row dicts."""
    spec.validate()
    if spec.axis == "ris_cells":
        for v in spec.grid:
            if int(v) % cfg.num_clusters != 0:
                raise ScenarioError(f"grid value {v} not divisible by num_clusters")
    raw = []
    for value in spec.grid:
        cell_cfg = apply_axis(cfg, spec.axis, value)
        for scheme in sorted(spec.schemes):
            for trial in range(spec.trials):
                seed = spec.base_seed + trial
                t0 = time.perf_counter()
                try:
                    ch = generate_channels(cell_cfg, seed)
                    sol = baselines.run_scheme(scheme, ch, cell_cfg)
                    row = {
                        "value_bps": sol.value_bps,
                        "lb": sol.lower_bound,
                        "ub": sol.upper_bound,
                        "iters": float(sol.iterations),
                    }
                except GlobalInfeasibleError:
                    row = {"value_bps": math.nan, "lb": math.nan, "ub": math.nan, "iters": math.nan}
                row.update(
                    axis_value=value,
                    scheme=scheme,
                    trial=trial,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                )
                raw.append(row)
    return raw + aggregate_rows(raw)


def aggregate_rows(raw: list) -> list:
    """Mean and standard-error rows per (axis_value, scheme) cell, computed
    over the trials whose value is not NaN."""
    cells = {}
    for row in raw:
        cells.setdefault((row["axis_value"], row["scheme"]), []).append(row)
    out = []
    for (axis_value, scheme), rows in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        kept = [r for r in rows if not math.isnan(r["value_bps"])]
        for kind in ("mean", "stderr"):
            agg = {"axis_value": axis_value, "scheme": scheme, "trial": kind}
            for col in _NUMERIC_COLS:
                vals = np.array([r[col] for r in kept], dtype=float)
                if vals.size == 0:
                    agg[col] = math.nan
                elif kind == "mean":
                    agg[col] = float(np.mean(vals))
                else:
                    agg[col] = 0.0 if vals.size == 1 else float(np.std(vals, ddof=1) / math.sqrt(vals.size))
            out.append(agg)
    return out


def sweep_csv(rows: list, timing: bool = False) -> str:
    """Serialize rows with round-trip float formatting (UTF-8, '.' decimal)."""
    buf = io.StringIO()
    buf.write("axis_value,scheme,trial,value_bps,lb,ub,iters,wall_ms\n")
    for r in rows:
        wall = r["wall_ms"] if timing else 0
        buf.write(
            f"{_fmt(r['axis_value'])},{r['scheme']},{r['trial']},{_fmt(r['value_bps'])},"
            f"{_fmt(r['lb'])},{_fmt(r['ub'])},{_fmt(r['iters'])},{_fmt(wall)}\n"
        )
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_sweep_csv(rows: list, path, timing: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(sweep_csv(rows, timing=timing))


# -- named presets -------------------------------------------------------------


def desk_power_sweep(trials: int = 10, base_seed: int = 0) -> SweepSpec:
    """Fig.-2-style desk sweep: sum rate vs UAV transmit power (dBm)."""
    return SweepSpec(
        axis="uav_power",
        grid=(0.0, 5.0, 10.0),
        schemes=("noma_ris", "rsma_bdris", "rsma_noris", "rsma_ris"),
        trials=trials,
        base_seed=base_seed,
    )


def desk_cells_sweep(trials: int = 10, base_seed: int = 0) -> SweepSpec:
    """Fig.-3-style desk sweep: sum rate vs number of surface cells."""
    return SweepSpec(
        axis="ris_cells",
        grid=(16, 32, 64),
        schemes=("rsma_bdris",),
        trials=trials,
        base_seed=base_seed,
    )
