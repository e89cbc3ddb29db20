"""Closed-form resource model and calibration of cost constants.

For a scenario, every resource splits into a part paid once per engine
(``shared``) and a part paid per player (``per_player``). With ``n >= 1``
players the shared engine costs ``shared + n * per_player`` and the baseline
costs ``n * (shared + per_player)``. This closed form is the independent
route the simulation is checked against.

Calibration fits four constants, one per resource, so the baseline/capsule
ratio at the baseline's peak player count matches a target, then places the
capacities so both capacity targets hold with the requested resource binding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .costmodel import RESOURCES, CostModel
from .ecs import AVATAR_SIZE
from .errors import Unsatisfiable
from .scenario import Scenario

# constant tuned for each resource
KNOBS = {"cpu": "engine_fixed_cpu", "ram": "engine_fixed_ram", "gpu": "shared_gpu", "vram": "framebuffer"}
CAPACITY_FIELDS = {"cpu": "cpu_capacity", "gpu": "gpu_capacity", "vram": "vram_capacity"}
_HEADROOM = 1.25


@dataclass(frozen=True)
class CalibrationTargets:
    ratios: dict = field(default_factory=lambda: {"cpu": 3.70, "ram": 3.87, "gpu": 1.43, "vram": 3.11})
    baseline_players: int = 4
    capsule_players: int = 9
    baseline_binding: str = "vram"
    capsule_binding: str = "gpu"

    def __post_init__(self):
        if set(self.ratios) != set(RESOURCES):
            raise ValueError(f"ratios must cover {RESOURCES}")
        if self.baseline_players < 1 or self.capsule_players < 1:
            raise ValueError("player targets must be >= 1")
        for binding in (self.baseline_binding, self.capsule_binding):
            if binding not in CAPACITY_FIELDS:
                raise ValueError(f"binding resource must be one of {sorted(CAPACITY_FIELDS)}")
        for r, v in self.ratios.items():
            if not 1.0 <= v < max(self.baseline_players, 1.0000001):
                raise Unsatisfiable(
                    f"{r} ratio {v} is outside [1, {self.baseline_players}) at {self.baseline_players} players"
                )


# Ratios and capacities reported for the low-graphics application.
REFERENCE_TARGETS = CalibrationTargets()


# --------------------------------------------------------------------------
# closed form
# --------------------------------------------------------------------------


def split(scenario: Scenario) -> dict[str, tuple[int, int]]:
    """(shared, per_player) per resource for ``n >= 1`` players."""
    cm = scenario.full_cost_model()
    g = scenario.global_entities
    p = scenario.per_player_entities
    local_entities = p.count + 1  # + avatar
    shared_assets = sum(a.size for a in scenario.assets if a.shared)
    own_assets = sum(a.size for a in scenario.assets if not a.shared)
    return {
        "cpu": (cm.engine_fixed_cpu + cm.shared_cpu * g.count, cm.per_player_cpu * (g.count + local_entities)),
        "ram": (
            cm.engine_fixed_ram + g.count * g.bytes_per_entity,
            cm.local_storage_ram + p.count * p.bytes_per_entity + AVATAR_SIZE,
        ),
        "gpu": (scenario.shared_gpu, scenario.per_view_gpu),
        "vram": (shared_assets, cm.framebuffer + own_assets),
    }


def idle(scenario: Scenario) -> dict[str, int]:
    cm = scenario.cost_model
    return {"cpu": cm.engine_fixed_cpu, "ram": cm.engine_fixed_ram, "gpu": 0, "vram": 0}


def closed_form_total(scenario: Scenario, players: int, mode: str) -> dict[str, int]:
    parts = split(scenario)
    if players == 0:
        return idle(scenario) if mode == "capsule" else {r: 0 for r in RESOURCES}
    if mode == "capsule":
        return {r: a + players * b for r, (a, b) in parts.items()}
    return {r: players * (a + b) for r, (a, b) in parts.items()}


def model_row(scenario: Scenario) -> np.ndarray:
    parts = split(scenario)
    cm = scenario.cost_model
    row = np.zeros(_kernels.N_MODEL_COLUMNS)
    row[_kernels.CPU_SHARED], row[_kernels.CPU_PER] = parts["cpu"]
    row[_kernels.GPU_SHARED], row[_kernels.GPU_PER] = parts["gpu"]
    row[_kernels.VRAM_SHARED], row[_kernels.VRAM_PER] = parts["vram"]
    row[_kernels.CPU_CAP] = cm.cpu_capacity
    row[_kernels.CPU_CORES] = cm.cpu_cores
    row[_kernels.GPU_CAP] = cm.gpu_capacity
    row[_kernels.VRAM_CAP] = cm.vram_capacity
    row[_kernels.SPILL] = cm.vram_spill_penalty
    return row


def closed_form_capacities(scenario: Scenario, n_max: int = 256) -> tuple[int, int]:
    caps, base = _kernels.sweep_capacities(model_row(scenario)[None, :], n_max)
    return int(caps[0]), int(base[0])


def closed_form_ratios(scenario: Scenario, players: int) -> dict[str, float]:
    caps = closed_form_total(scenario, players, "capsule")
    base = closed_form_total(scenario, players, "baseline")
    return {r: base[r] / caps[r] for r in RESOURCES}


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------


def _with_knobs(template: Scenario, knobs: dict[str, int]) -> Scenario:
    changes = {KNOBS[r]: int(v) for r, v in knobs.items() if r != "gpu"}
    scenario = template.replace(cost_model=template.cost_model.replace(**changes))
    if "gpu" in knobs:
        scenario = scenario.replace(shared_gpu=int(knobs["gpu"]))
    return scenario


def _split_for_knob(template: Scenario, resource: str, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shared and per-player parts of ``resource`` as the knob sweeps ``values``."""
    a0, b0 = split(_with_knobs(template, {resource: 0}))[resource]
    if resource == "vram":
        return np.full_like(values, a0, dtype=np.float64), b0 + values
    return a0 + values, np.full_like(values, b0, dtype=np.float64)


def _fit_knobs(template: Scenario, targets: CalibrationTargets) -> dict[str, int]:
    peak = targets.baseline_players
    scale = {r: max(split(template)[r][1], 1) for r in RESOURCES}
    # coarse grid: pick the best start per resource
    grid = np.concatenate(([0.0], np.geomspace(1e-4, 1e4, 2048)))
    x0 = []
    for r in RESOURCES:
        shared, per = _split_for_knob(template, r, grid * scale[r])
        with np.errstate(divide="ignore", invalid="ignore"):
            err = np.log(_kernels.peak_ratios(shared, per, peak) / targets.ratios[r])
        err = np.where(np.isfinite(err), err, np.inf)
        x0.append(grid[int(np.argmin(np.abs(err)))])

    def residuals(x):
        out = []
        for r, xi in zip(RESOURCES, x):
            shared, per = _split_for_knob(template, r, np.array([xi * scale[r]]))
            ratio = _kernels.peak_ratios(shared, per, peak)[0]
            out.append(math.log(ratio / targets.ratios[r]) if ratio > 0 and math.isfinite(ratio) else 1e3)
        return out

    fit = least_squares(residuals, np.array(x0), bounds=(0.0, 1e4), x_scale=np.maximum(np.array(x0), 1e-3),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return {r: int(round(xi * scale[r])) for r, xi in zip(RESOURCES, fit.x)}


def _place_capacities(scenario: Scenario, targets: CalibrationTargets) -> dict[str, int]:
    parts = split(scenario)
    cores = scenario.cost_model.cpu_cores
    C, P = targets.capsule_players, targets.baseline_players

    def capsule_need(r, n):
        a, b = parts[r]
        return a + n * b

    def baseline_need(r, n):
        a, b = parts[r]
        if r == "cpu":
            return max(a + b, -(-n * (a + b) // cores))
        return n * (a + b)

    caps = {}
    for r in CAPACITY_FIELDS:
        lo, hi = 1, math.inf  # capacity in [lo, hi)
        if targets.capsule_binding == r:
            lo, hi = max(lo, capsule_need(r, C)), min(hi, capsule_need(r, C + 1))
        else:
            lo = max(lo, capsule_need(r, C + 1))
        if targets.baseline_binding == r:
            lo, hi = max(lo, baseline_need(r, P)), min(hi, baseline_need(r, P + 1))
        else:
            lo = max(lo, baseline_need(r, P + 1))
        if lo >= hi:
            raise Unsatisfiable(f"no {r} capacity satisfies both capacity targets (need [{lo}, {hi}))")
        caps[r] = (lo + hi - 1) // 2 if math.isfinite(hi) else math.ceil(lo * _HEADROOM)
    return caps


def calibrate_scenario(template: Scenario, targets: CalibrationTargets = REFERENCE_TARGETS) -> Scenario:
    """``template`` with fitted cost constants and capacities."""
    scenario = _with_knobs(template, _fit_knobs(template, targets))
    caps = _place_capacities(scenario, targets)
    cm = scenario.cost_model.replace(**{CAPACITY_FIELDS[r]: v for r, v in caps.items()})
    scenario = scenario.replace(cost_model=cm)

    got = closed_form_capacities(scenario, n_max=max(4 * targets.capsule_players, 64))
    if got != (targets.capsule_players, targets.baseline_players):
        raise Unsatisfiable(
            f"capacities {got} miss targets {(targets.capsule_players, targets.baseline_players)}; "
            "the overloaded resource does not push the frame over budget"
        )
    # the named baseline binding must be the only thing stopping one more instance
    relaxed = model_row(scenario)
    relaxed[{"cpu": _kernels.CPU_CAP, "gpu": _kernels.GPU_CAP, "vram": _kernels.VRAM_CAP}[targets.baseline_binding]] *= 1e6
    _, base = _kernels.sweep_capacities(relaxed[None, :], targets.baseline_players + 1)
    if base[0] <= targets.baseline_players:
        raise Unsatisfiable(f"baseline is not bound by {targets.baseline_binding}")
    return scenario


def calibrate(template: Scenario, targets: CalibrationTargets = REFERENCE_TARGETS) -> CostModel:
    return calibrate_scenario(template, targets).full_cost_model()


def calibration_summary(scenario: Scenario, peak: int) -> dict:
    caps, base = closed_form_capacities(scenario)
    return {
        "capsule_capacity": caps,
        "baseline_capacity": base,
        "peak_players": peak,
        "ratios_at_peak": {r: round(v, 6) for r, v in closed_form_ratios(scenario, peak).items()},
    }
