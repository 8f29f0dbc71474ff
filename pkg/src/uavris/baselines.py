"""Reference schemes: BD-RIS / conventional RIS / no RIS, under RSMA, NOMA
or plain SDMA.

NOMA is encoded inside the RSMA structure as 1-layer superposition coding:
the common stream carries the weakest user's whole message (SIC order by
descending effective channel norm), that user's private precoder is pinned
to zero, and the whole common rate is allocated to it.  This makes the
"NOMA is a special case of RSMA" comparison a feasible-set inclusion that
warm-started runs can verify numerically.
"""

from __future__ import annotations

import dataclasses

from .channel import ChannelRealization
from .gbd import PrimalPoint, Solution, gbd_solve, solve_primal
from .rates import PhaseConfig
from .scenario import ScenarioConfig

#: scheme id -> (ris_mode override or None, multiple-access mode)
SCHEMES = {
    "rsma_bdris": ("block_unitary", "rsma"),
    "rsma_ris": ("diagonal_circle", "rsma"),
    "noma_ris": ("diagonal_circle", "noma"),
    "noma_bdris": ("block_unitary", "noma"),
    "rsma_noris": ("none", "rsma"),
    "sdma": (None, "sdma"),
}


def scheme_config(scheme: str, cfg: ScenarioConfig) -> tuple:
    """(config, access) for the scheme; raises on unknown ids."""
    try:
        mode, access = SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; known: {sorted(SCHEMES)}") from None
    if mode is not None and mode != cfg.ris_mode:
        cfg = dataclasses.replace(cfg, ris_mode=mode)
    return cfg, access


def run_scheme(scheme: str, ch: ChannelRealization, cfg: ScenarioConfig) -> Solution:
    """Solve the scenario under the given scheme (same budgets for all)."""
    cfg, access = scheme_config(scheme, cfg)
    return gbd_solve(ch, cfg, access=access)


def warm_started_value(
    base: Solution,
    ch: ChannelRealization,
    cfg: ScenarioConfig,
    ris_mode: str | None = None,
    access: str = "rsma",
) -> float:
    """Primal value at the base solution's assignment, warm-started from its
    continuous point, under a possibly different mode or access scheme.

    Used for the nesting comparisons: a diagonal phase solution is a valid
    unitary point, and a NOMA solution is a valid RSMA point, so the
    warm-started value can never fall below the base value.
    """
    if ris_mode is not None and ris_mode != cfg.ris_mode:
        cfg = dataclasses.replace(cfg, ris_mode=ris_mode)
    phases = base.phases
    if ris_mode == "block_unitary" and phases.mode == "diagonal_circle":
        phases = PhaseConfig(blocks=phases.blocks, mode="block_unitary")
    warm = PrimalPoint(phases=phases, precoders=base.precoders, alloc=base.alloc)
    outcome = solve_primal(base.assignment, ch, cfg, warm=warm, access=access)
    return outcome.value
