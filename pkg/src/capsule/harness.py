"""Scenario runners for the shared engine and the process-per-player baseline,
capacity search, run comparison and CSV I/O."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .costmodel import RESOURCES, CostModel, Load, ResourceSample
from .ecs import InputEvent, World
from .errors import CapacityExceeded, InvalidScenario, ModeMismatch
from .scenario import Scenario
from .session import Engine, PlayerProfile
from .storage import GLOBAL

CAPSULE = "capsule"
BASELINE = "baseline"
MODES = (CAPSULE, BASELINE)

CSV_COLUMNS = (
    "tick",
    "mode",
    "players",
    "cpu_work",
    "cpu_util",
    "ram_bytes",
    "gpu_work",
    "gpu_util",
    "vram_bytes",
    "tick_model_ms",
)


# --------------------------------------------------------------------------
# hosts
# --------------------------------------------------------------------------


class CapsuleHost:
    """All players in one engine."""

    mode = CAPSULE

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.cost_model = scenario.full_cost_model()
        world = World(scenario.seed, scenario.budget_ms, self.cost_model)
        self.engine = Engine(world, scenario.scene())
        self._players: dict[int, int] = {}

    @property
    def active(self) -> int:
        return len(self._players)

    def join(self, slot: int, profile: PlayerProfile) -> None:
        self._players[slot] = self.engine.join(profile).player

    def leave(self, slot: int) -> None:
        self.engine.leave(self._players.pop(slot))

    def emit_global(self, name: str, payload: bytes) -> None:
        world = self.engine.world
        world.events.emit(GLOBAL, name, payload, world.tick_counter)

    def step(self, inputs: dict[int, list[InputEvent]]):
        mapped = {self._players[s]: evs for s, evs in inputs.items() if s in self._players}
        report = self.engine.step(mapped)
        by_player = {p: s for s, p in self._players.items()}
        return report.sample, {by_player[p]: d.hash for p, d in report.digests.items()}


class BaselineCluster:
    """One independent engine per player on a shared machine.

    Every instance pays the fixed engine cost, loads its own copy of the
    scene and assets and renders the shared work itself. Instances have their
    own main thread; GPU time and VRAM are pooled across the machine.
    """

    mode = BASELINE

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.cost_model = scenario.full_cost_model()
        self.budget_ms = scenario.budget_ms
        self.tick = 0
        self.instances: dict[int, Engine] = {}
        self._scene = scenario.scene()

    @property
    def active(self) -> int:
        return len(self.instances)

    def _new_engine(self) -> Engine:
        world = World(self.scenario.seed, self.budget_ms, self.cost_model, start_tick=self.tick)
        return Engine(world, self._scene)

    def loads(self) -> list[Load]:
        return [e.world.current_load() for _, e in sorted(self.instances.items())]

    def join(self, slot: int, profile: PlayerProfile) -> None:
        engine = self._new_engine()
        predicted = self.loads() + [engine.predict_join(profile)]
        if not self.cost_model.baseline_fits(predicted):
            raise CapacityExceeded(self.budget_ms * self.cost_model.baseline_load(predicted), self.budget_ms)
        engine.join(profile)
        self.instances[slot] = engine

    def leave(self, slot: int) -> None:
        engine = self.instances.pop(slot)
        for player in engine.active_players:
            engine.leave(player)

    def emit_global(self, name: str, payload: bytes) -> None:
        for engine in self.instances.values():
            world = engine.world
            world.events.emit(GLOBAL, name, payload, world.tick_counter)

    def step(self, inputs: dict[int, list[InputEvent]]):
        samples = []
        digests = {}
        for slot, engine in sorted(self.instances.items()):
            (player,) = engine.active_players
            report = engine.step({player: inputs[slot]} if slot in inputs else None)
            samples.append(report.sample)
            digests[slot] = report.digests[player].hash
        loads = [Load(s.cpu_work, s.gpu_work, s.vram_bytes) for s in samples]
        sample = ResourceSample(
            tick=self.tick,
            players=len(samples),
            cpu_work=sum(s.cpu_work for s in samples),
            ram_bytes=sum(s.ram_bytes for s in samples),
            gpu_work=sum(s.gpu_work for s in samples),
            vram_bytes=sum(s.vram_bytes for s in samples),
            tick_model_ms=self.budget_ms * self.cost_model.baseline_load(loads),
        )
        self.tick += 1
        return sample, digests


def make_host(scenario: Scenario, mode: str):
    if mode == CAPSULE:
        return CapsuleHost(scenario)
    if mode == BASELINE:
        return BaselineCluster(scenario)
    raise ValueError(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    mode: str
    scenario: Scenario
    samples: list[ResourceSample]
    max_players_admitted: int
    digests: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    rejections: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def cost_model(self) -> CostModel:
        return self.scenario.full_cost_model()

    def steady(self) -> dict[int, ResourceSample]:
        """Last sample observed at each player count."""
        out: dict[int, ResourceSample] = {}
        for s in self.samples:
            out[s.players] = s
        return out

    def to_csv(self) -> str:
        return samples_to_csv(self.samples, self.mode, self.cost_model)


def run(scenario: Scenario, mode: str) -> RunResult:
    host = make_host(scenario, mode)
    schedule: dict[int, list] = {}
    for entry in scenario.join_schedule:
        schedule.setdefault(entry.tick, []).append(entry)
    events: dict[int, list] = {}
    for ev in scenario.global_events:
        events.setdefault(ev.tick, []).append(ev)
    inputs: dict[int, dict[int, list[InputEvent]]] = {}
    for inp in scenario.inputs:
        inputs.setdefault(inp.tick, {}).setdefault(inp.player, []).append(
            InputEvent(inp.name, inp.payload.encode())
        )

    result = RunResult(mode, scenario, [], 0)
    next_slot = 0
    admitted: set[int] = set()
    for t in range(scenario.duration_ticks):
        for entry in schedule.get(t, ()):
            if entry.action == "join":
                slot = next_slot
                next_slot += 1
                try:
                    host.join(slot, scenario.player_profile(slot))
                except CapacityExceeded as exc:
                    result.rejections.append((t, slot, exc.predicted_ms))
                else:
                    admitted.add(slot)
            elif entry.player in admitted:
                host.leave(entry.player)
                admitted.discard(entry.player)
        for ev in events.get(t, ()):
            host.emit_global(ev.name, scenario.global_event_payload(ev))
        step_inputs = {s: evs for s, evs in inputs.get(t, {}).items() if s in admitted}
        sample, digests = host.step(step_inputs)
        result.samples.append(sample)
        result.max_players_admitted = max(result.max_players_admitted, sample.players)
        for slot, h in digests.items():
            result.digests.setdefault(slot, []).append((t, h))
    return result


def run_capsule(scenario: Scenario) -> RunResult:
    return run(scenario, CAPSULE)


def run_baseline(scenario: Scenario) -> RunResult:
    return run(scenario, BASELINE)


def capacity_search(scenario: Scenario, mode: str, limit: int = 256) -> int:
    """Admit players one at a time until admission refuses or a tick overruns."""
    host = make_host(scenario, mode)
    budget = scenario.budget_ms
    admitted = 0
    for slot in range(limit):
        try:
            host.join(slot, scenario.player_profile(slot))
        except CapacityExceeded:
            break
        sample, _ = host.step({})
        if sample.tick_model_ms > budget * (1 + 1e-12):
            break
        admitted += 1
    return admitted


# --------------------------------------------------------------------------
# comparison
# --------------------------------------------------------------------------


def _ratio(baseline: float, capsule: float) -> float:
    if capsule == 0:
        return 1.0 if baseline == 0 else math.inf
    return baseline / capsule


@dataclass(frozen=True)
class ComparisonRow:
    players: int
    a: dict[str, float] | None
    b: dict[str, float] | None
    ratio: dict[str, float] | None
    a_marginal: dict[str, float] | None
    b_marginal: dict[str, float] | None


@dataclass
class ComparisonReport:
    a_mode: str
    b_mode: str
    rows: list[ComparisonRow]

    def row(self, players: int) -> ComparisonRow:
        for r in self.rows:
            if r.players == players:
                return r
        raise KeyError(players)

    def ratios_at(self, players: int) -> dict[str, float]:
        ratio = self.row(players).ratio
        if ratio is None:
            raise KeyError(players)
        return ratio

    def to_csv(self) -> str:
        cols = ["players"]
        for r in RESOURCES:
            cols += [f"{self.a_mode}_{r}", f"{self.b_mode}_{r}", f"ratio_{r}",
                     f"{self.a_mode}_marginal_{r}", f"{self.b_mode}_marginal_{r}"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            out = [row.players]
            for r in RESOURCES:
                for part in (row.a, row.b, row.ratio, row.a_marginal, row.b_marginal):
                    out.append("" if part is None else _fmt(part[r]))
            w.writerow(out)
        return buf.getvalue()

    def format_table(self) -> str:
        head = f"{'players':>7}  " + "  ".join(f"{r + ' x':>9}" for r in RESOURCES)
        lines = [f"resource ratio {self.b_mode}/{self.a_mode} per player count", head]
        for row in self.rows:
            if row.ratio is None:
                continue
            lines.append(f"{row.players:>7}  " + "  ".join(f"{row.ratio[r]:>9.3f}" for r in RESOURCES))
        return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, float) and not x.is_integer():
        return f"{x:.6f}"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return str(int(x))


def ratio_table(
    a: dict[int, dict[str, float]],
    b: dict[int, dict[str, float]],
    a_mode: str = CAPSULE,
    b_mode: str = BASELINE,
) -> ComparisonReport:
    """Per-resource ``b / a`` at every player count plus marginal costs of each side."""

    def marginal(side, n):
        if n in side and n - 1 in side:
            return {r: side[n][r] - side[n - 1][r] for r in RESOURCES}
        return None

    rows = []
    for n in sorted(set(a) | set(b)):
        ratio = {r: _ratio(b[n][r], a[n][r]) for r in RESOURCES} if n in a and n in b else None
        rows.append(ComparisonRow(n, a.get(n), b.get(n), ratio, marginal(a, n), marginal(b, n)))
    return ComparisonReport(a_mode, b_mode, rows)


def _steady_values(result: RunResult) -> dict[int, dict[str, float]]:
    return {n: {r: s.resource(r) for r in RESOURCES} for n, s in result.steady().items()}


def compare_runs(a: RunResult, b: RunResult) -> ComparisonReport:
    """Ratios are always baseline over capsule, whichever order the runs come in."""
    if a.mode == b.mode:
        raise ModeMismatch(f"both runs are {a.mode!r}")
    if a.scenario.to_dict() != b.scenario.to_dict():
        raise InvalidScenario("runs come from different scenarios")
    capsule, baseline = (a, b) if a.mode == CAPSULE else (b, a)
    return ratio_table(_steady_values(capsule), _steady_values(baseline), CAPSULE, BASELINE)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def samples_to_csv(samples: Iterable[ResourceSample], mode: str, cost_model: CostModel) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in samples:
        w.writerow(
            [
                s.tick,
                mode,
                s.players,
                s.cpu_work,
                f"{cost_model.cpu_util(s.cpu_work):.6f}",
                s.ram_bytes,
                s.gpu_work,
                f"{cost_model.gpu_util(s.gpu_work):.6f}",
                s.vram_bytes,
                f"{s.tick_model_ms:.6f}",
            ]
        )
    return buf.getvalue()


def read_samples_csv(path: str | Path) -> tuple[str, list[ResourceSample]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidScenario(f"{path}: columns {reader.fieldnames} do not match {list(CSV_COLUMNS)}")
        modes = set()
        samples = []
        for row in reader:
            modes.add(row["mode"])
            samples.append(
                ResourceSample(
                    tick=int(row["tick"]),
                    players=int(row["players"]),
                    cpu_work=int(row["cpu_work"]),
                    ram_bytes=int(row["ram_bytes"]),
                    gpu_work=int(row["gpu_work"]),
                    vram_bytes=int(row["vram_bytes"]),
                    tick_model_ms=float(row["tick_model_ms"]),
                )
            )
    if len(modes) > 1:
        raise InvalidScenario(f"{path}: mixed modes {sorted(modes)}")
    return (modes.pop() if modes else ""), samples


def steady_from_samples(samples: Iterable[ResourceSample]) -> dict[int, dict[str, float]]:
    out = {}
    for s in samples:
        out[s.players] = {r: s.resource(r) for r in RESOURCES}
    return out
