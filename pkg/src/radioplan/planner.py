"""Automatic cell planning over a simulation grid.

Two-phase search for a compliant deployment: a greedy construction pass
adds the station placement (site plus boresight azimuth) with the largest
count of newly compliant cells until the coverage target or station cap
is reached, then simulated annealing refines placement, azimuth, tilt,
power, and station count under the minimum-spacing constraint.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .geodata import LocalPoint
from .propagation import (AntennaPattern, BaseStation, FSPL_CONSTANT_DB,
                          MIN_DISTANCE_M, RX_HEIGHT_M, WALL_LOSS_DB,
                          _crossing_matrix, generate_radio_map, wrap_angle)
from .scene import EnvironmentModel, SimulationGrid
from .sinr import coverage_stats, compute_sinr_map, mw_from_dbm

log = logging.getLogger(__name__)


class NoFeasibleSitesError(RuntimeError):
    """No outdoor candidate site exists for station placement."""


class PlanInvariantError(ValueError):
    """A plan violates the spacing or station-count constraints."""


@dataclass(frozen=True)
class PlanningConfig:
    """Targets, constraints, and search parameters for the optimizer."""

    pl_threshold: float = 100.0          # dB
    coverage_target: float = 0.80        # fraction of outdoor cells
    min_spacing: float = 50.0            # m between any two stations
    max_stations: int = 20
    power_range: tuple[float, float] = (10.0, 36.0)   # dBm
    power_step: float = 2.0
    tilt_range: tuple[float, float] = (0.0, 15.0)     # degrees
    tilt_step: float = 1.0
    azimuth_step: float = 30.0
    seed: int = 0
    iteration_budget: int = 5000
    initial_temperature: float = 1.0
    cooling: float = 0.995
    station_count_weight: float = 0.01   # objective penalty per count fraction
    power_weight: float = 0.001          # objective penalty per power fraction
    max_candidate_sites: int = 512       # lattice coarsens beyond this

    def __post_init__(self) -> None:
        if not 0.0 < self.coverage_target <= 1.0:
            raise ValueError("coverage_target must be in (0, 1]")
        if self.min_spacing < 0:
            raise ValueError("min_spacing must be non-negative")
        if self.power_range[0] > self.power_range[1]:
            raise ValueError("power_range must be non-empty")
        if self.max_stations < 1:
            raise ValueError("max_stations must be at least 1")
        if self.iteration_budget < 0:
            raise ValueError("iteration_budget must be non-negative")

    @property
    def coverage_target_exact(self) -> Fraction:
        # Decimal-string route keeps 0.80 exactly 4/5 for threshold compares.
        return Fraction(str(self.coverage_target))

    def azimuths(self) -> list[float]:
        n = max(1, round(360.0 / self.azimuth_step))
        return [i * self.azimuth_step for i in range(n)]

    def to_dict(self) -> dict:
        return {
            "pl_threshold": self.pl_threshold,
            "coverage_target": self.coverage_target,
            "min_spacing": self.min_spacing,
            "max_stations": self.max_stations,
            "power_range": list(self.power_range),
            "power_step": self.power_step,
            "tilt_range": list(self.tilt_range),
            "tilt_step": self.tilt_step,
            "azimuth_step": self.azimuth_step,
            "seed": self.seed,
            "iteration_budget": self.iteration_budget,
            "initial_temperature": self.initial_temperature,
            "cooling": self.cooling,
            "station_count_weight": self.station_count_weight,
            "power_weight": self.power_weight,
            "max_candidate_sites": self.max_candidate_sites,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanningConfig":
        kwargs = dict(d)
        if "power_range" in kwargs:
            kwargs["power_range"] = tuple(kwargs["power_range"])
        if "tilt_range" in kwargs:
            kwargs["tilt_range"] = tuple(kwargs["tilt_range"])
        return cls(**kwargs)


@dataclass
class NetworkPlan:
    """Optimizer output: the deployment plus how well it performs."""

    stations: list[BaseStation]
    achieved_coverage: float
    compliant: bool
    objective_trace: list[float]
    seed: int

    def to_dict(self) -> dict:
        return {
            "stations": [s.to_dict() for s in self.stations],
            "achieved_coverage": self.achieved_coverage,
            "compliant": self.compliant,
            "objective_trace": [round(v, 9) for v in self.objective_trace],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkPlan":
        return cls(stations=[BaseStation.from_dict(s) for s in d["stations"]],
                   achieved_coverage=d["achieved_coverage"],
                   compliant=d["compliant"],
                   objective_trace=list(d["objective_trace"]),
                   seed=d["seed"])


def check_plan_invariants(stations: list[BaseStation], config: PlanningConfig) -> None:
    """Raise PlanInvariantError on spacing or count violations."""
    if len(stations) > config.max_stations:
        raise PlanInvariantError(
            f"plan has {len(stations)} stations, cap is {config.max_stations}")
    for i, a in enumerate(stations):
        for b in stations[i + 1:]:
            d = a.position.distance_to(b.position)
            if d < config.min_spacing:
                raise PlanInvariantError(
                    f"stations {a.id} and {b.id} are {d:.1f} m apart, "
                    f"minimum spacing is {config.min_spacing} m")


def candidate_sites(grid: SimulationGrid, env: EnvironmentModel,
                    config: PlanningConfig) -> list[LocalPoint]:
    """Outdoor cell centers subsampled to a lattice of pitch >= spacing/2.

    The lattice stride starts at ceil((min_spacing/2) / resolution) cells
    per axis and widens if needed to stay under max_candidate_sites.
    Ordering is deterministic (row-major, south to north).
    """
    if grid.outdoor_count() == 0:
        raise NoFeasibleSitesError("grid has no outdoor cells")
    stride = max(1, math.ceil((config.min_spacing / 2.0) / grid.resolution))
    while (math.ceil(grid.width / stride) * math.ceil(grid.height / stride)
           > config.max_candidate_sites):
        stride += 1
    centers = grid.cell_centers()
    sites: list[LocalPoint] = []
    for j in range(0, grid.height, stride):
        for i in range(0, grid.width, stride):
            if not grid.indoor_mask[j, i]:
                sites.append(LocalPoint(centers[j, i, 0], centers[j, i, 1]))
    if not sites:
        raise NoFeasibleSitesError(
            "no outdoor cell falls on the candidate lattice")
    return sites


def _objective(coverage: Fraction, stations: list[BaseStation],
               config: PlanningConfig) -> float:
    count_term = config.station_count_weight * (len(stations) / config.max_stations)
    power_norm = config.max_stations * mw_from_dbm(config.power_range[1])
    total_mw = sum(mw_from_dbm(s.tx_power) for s in sorted(stations, key=lambda s: s.id))
    power_term = config.power_weight * (total_mw / power_norm)
    return float(coverage) - count_term - power_term


def evaluate_plan(stations: list[BaseStation], grid: SimulationGrid,
                  env: EnvironmentModel, pattern: AntennaPattern,
                  config: PlanningConfig) -> tuple[Fraction, float]:
    """Coverage fraction (PL-compliant outdoor cells) and scalar objective.

    The objective is coverage minus small penalties for station count and
    total transmit power, so more coverage always dominates and, at equal
    coverage, fewer and quieter stations win.
    """
    if not stations:
        return Fraction(0), 0.0
    check_plan_invariants(stations, config)
    radio = generate_radio_map(grid, stations, env, pattern)
    sinr = compute_sinr_map(grid, stations, env, pattern)
    report = coverage_stats(radio, sinr, pl_threshold=config.pl_threshold)
    coverage = report.pl_compliant_fraction
    return coverage, _objective(coverage, stations, config)


class PlanEvaluator:
    """Incremental plan evaluation with per-site caching.

    Caches distance, bearing, and wall-crossing vectors per transmitter
    position so that coverage for a modified plan costs one fresh row at
    most.  All rows use the exact formulas of the propagation module;
    equality with :func:`evaluate_plan` is covered by tests.
    """

    def __init__(self, grid: SimulationGrid, env: EnvironmentModel,
                 pattern: AntennaPattern, config: PlanningConfig,
                 wall_loss_db: float = WALL_LOSS_DB,
                 rx_height: float = RX_HEIGHT_M):
        self.grid = grid
        self.env = env
        self.pattern = pattern
        self.config = config
        self.wall_loss_db = wall_loss_db
        self.rx_height = rx_height
        outdoor = ~grid.indoor_mask.reshape(-1)
        self.targets = grid.cell_centers().reshape(-1, 2)[outdoor]
        self.total_outdoor = len(self.targets)
        self.edges = env.building_edges()
        self.candidates = candidate_sites(grid, env, config)
        self._site_cache: dict[tuple[float, float], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _site_vectors(self, pos: LocalPoint) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = (pos.x, pos.y)
        cached = self._site_cache.get(key)
        if cached is None:
            dx = self.targets[:, 0] - pos.x
            dy = self.targets[:, 1] - pos.y
            d2d = np.sqrt(dx * dx + dy * dy)
            bearing = np.degrees(np.arctan2(dx, dy))
            walls = _crossing_matrix(self.targets, np.array([pos.x, pos.y]), self.edges)
            cached = (d2d, bearing, walls)
            self._site_cache[key] = cached
        return cached

    def path_loss_row(self, bs: BaseStation) -> np.ndarray:
        """Effective path loss (dB) from a station to every outdoor cell."""
        d2d, bearing, walls = self._site_vectors(bs.position)
        dz = bs.mast_height - self.rx_height
        d3d = np.maximum(np.sqrt(d2d * d2d + dz * dz), MIN_DISTANCE_M)
        loss = 20.0 * np.log10(d3d) + 20.0 * np.log10(bs.frequency) + FSPL_CONSTANT_DB
        az_off = wrap_angle(bearing - bs.azimuth)
        el_off = wrap_angle(np.degrees(np.arctan2(dz, d2d)) - bs.down_tilt)
        a_az = np.minimum(12.0 * (az_off / self.pattern.theta_3db_az) ** 2,
                          self.pattern.max_attenuation)
        a_el = np.minimum(12.0 * (el_off / self.pattern.theta_3db_el) ** 2,
                          self.pattern.max_attenuation)
        gain = self.pattern.boresight_gain - a_az - a_el
        return loss + self.wall_loss_db * walls - gain

    def coverage(self, stations: list[BaseStation]) -> Fraction:
        """Exact compliant fraction for a plan (serving-station path loss)."""
        if not stations:
            return Fraction(0)
        ordered = sorted(stations, key=lambda s: s.id)
        pl = np.vstack([self.path_loss_row(s) for s in ordered])
        rx = np.array([[s.tx_power] for s in ordered]) - pl
        serving = rx.argmax(axis=0)
        best_pl = pl[serving, np.arange(pl.shape[1])]
        compliant = int((best_pl <= self.config.pl_threshold).sum())
        return Fraction(compliant, self.total_outdoor)

    def objective(self, stations: list[BaseStation]) -> tuple[Fraction, float]:
        if not stations:
            return Fraction(0), 0.0
        cov = self.coverage(stations)
        return cov, _objective(cov, stations, self.config)


def _spacing_ok(pos: LocalPoint, others: list[BaseStation], min_spacing: float,
                skip_id: str | None = None) -> bool:
    return all(pos.distance_to(s.position) >= min_spacing
               for s in others if s.id != skip_id)


class _SearchState:
    """Mutable plan state for the annealing loop (rx rows kept in sync)."""

    def __init__(self, evaluator: PlanEvaluator, stations: list[BaseStation]):
        self.ev = evaluator
        self.stations: list[BaseStation] = list(stations)
        self.rows: dict[str, np.ndarray] = {
            s.id: evaluator.path_loss_row(s) for s in self.stations}

    def compliant_count(self, stations: list[BaseStation] | None = None,
                        extra_rows: dict[str, np.ndarray] | None = None) -> int:
        stations = self.stations if stations is None else stations
        if not stations:
            return 0
        ordered = sorted(stations, key=lambda s: s.id)
        rows = []
        for s in ordered:
            row = (extra_rows or {}).get(s.id)
            if row is None:
                row = self.rows[s.id]
            rows.append(row)
        pl = np.vstack(rows)
        rx = np.array([[s.tx_power] for s in ordered]) - pl
        serving = rx.argmax(axis=0)
        best_pl = pl[serving, np.arange(pl.shape[1])]
        return int((best_pl <= self.ev.config.pl_threshold).sum())

    def apply(self, stations: list[BaseStation],
              extra_rows: dict[str, np.ndarray] | None = None) -> None:
        keep = {s.id for s in stations}
        self.rows = {sid: row for sid, row in self.rows.items() if sid in keep}
        if extra_rows:
            self.rows.update(extra_rows)
        for s in stations:
            if s.id not in self.rows:
                self.rows[s.id] = self.ev.path_loss_row(s)
        self.stations = list(stations)


def _greedy_construction(ev: PlanEvaluator, state: _SearchState,
                         trace: list[float], id_counter: list[int]) -> None:
    """Add (site, azimuth) placements maximizing newly compliant cells."""
    cfg = ev.config
    azimuths = cfg.azimuths()
    target = cfg.coverage_target_exact

    while len(state.stations) < cfg.max_stations:
        current = state.compliant_count()
        if Fraction(current, ev.total_outdoor) >= target:
            break

        # Serving-side view of the incumbent plan.
        if state.stations:
            ordered = sorted(state.stations, key=lambda s: s.id)
            pl = np.vstack([state.rows[s.id] for s in ordered])
            rx = np.array([[s.tx_power] for s in ordered]) - pl
            serving = rx.argmax(axis=0)
            idx = np.arange(pl.shape[1])
            best_rx = rx[serving, idx]
            covered = pl[serving, idx] <= cfg.pl_threshold
        else:
            best_rx = np.full(ev.total_outdoor, -np.inf)
            covered = np.zeros(ev.total_outdoor, dtype=bool)

        probe = BaseStation(id="probe", position=ev.candidates[0])
        taken = {(s.position.x, s.position.y) for s in state.stations}

        # Upper bound per candidate assumes full boresight gain everywhere;
        # exact (site, azimuth) evaluation happens only where the bound
        # still beats the best exact gain found so far.
        bounds: list[tuple[int, int]] = []
        for ci, pos in enumerate(ev.candidates):
            if (pos.x, pos.y) in taken:
                continue
            if not _spacing_ok(pos, state.stations, cfg.min_spacing):
                continue
            d2d, _, walls = ev._site_vectors(pos)
            dz = probe.mast_height - ev.rx_height
            d3d = np.maximum(np.sqrt(d2d * d2d + dz * dz), MIN_DISTANCE_M)
            base = (20.0 * np.log10(d3d) + 20.0 * np.log10(probe.frequency)
                    + FSPL_CONSTANT_DB + ev.wall_loss_db * walls)
            pl_lb = base - ev.pattern.boresight_gain
            gain_ub = int((~covered & (pl_lb <= cfg.pl_threshold)).sum())
            bounds.append((ci, gain_ub))

        best_gain = 0
        best_pick: tuple[int, float, np.ndarray] | None = None
        for ci, ub in bounds:
            if ub <= best_gain:
                continue
            pos = ev.candidates[ci]
            for az in azimuths:
                cand = replace(probe, position=pos, azimuth=az)
                row = ev.path_loss_row(cand)
                new_rx = cand.tx_power - row
                steals = new_rx > best_rx
                after = np.where(steals, row <= cfg.pl_threshold, covered)
                gain = int(after.sum()) - current
                if gain > best_gain:
                    best_gain = gain
                    best_pick = (ci, az, row)

        if best_pick is None:
            break  # no placement strictly improves compliance
        ci, az, row = best_pick
        id_counter[0] += 1
        new_bs = BaseStation(id=f"opt-{id_counter[0]:03d}",
                             position=ev.candidates[ci], azimuth=az)
        state.apply(state.stations + [new_bs], extra_rows={new_bs.id: row})
        cov, obj = ev.objective(state.stations)
        trace.append(obj)
        log.debug("greedy add %s at (%.0f, %.0f) az %.0f: +%d cells",
                  new_bs.id, new_bs.position.x, new_bs.position.y, az, best_gain)


def _anneal(ev: PlanEvaluator, state: _SearchState, rng: random.Random,
            trace: list[float], id_counter: list[int],
            initial_coverage: Fraction) -> tuple[list[BaseStation], Fraction, float]:
    """Simulated annealing over plan moves; returns the best plan seen
    whose coverage does not drop below the initial plan's."""
    cfg = ev.config
    azimuths = cfg.azimuths()

    cov, obj = ev.objective(state.stations)
    best_plan, best_cov, best_obj = list(state.stations), cov, obj
    cur_obj = obj
    temp = cfg.initial_temperature

    for _ in range(cfg.iteration_budget):
        move = rng.choices(
            ["relocate", "rotate", "tilt", "power", "add", "remove"],
            weights=[0.30, 0.25, 0.15, 0.15, 0.075, 0.075], k=1)[0]
        proposal: list[BaseStation] | None = None
        extra: dict[str, np.ndarray] = {}

        if move == "relocate" and state.stations:
            si = rng.randrange(len(state.stations))
            bs = state.stations[si]
            near = [p for p in ev.candidates
                    if 0.0 < bs.position.distance_to(p) <= 2.0 * cfg.min_spacing
                    and _spacing_ok(p, state.stations, cfg.min_spacing, skip_id=bs.id)]
            if near:
                moved = replace(bs, position=rng.choice(near))
                proposal = state.stations[:si] + [moved] + state.stations[si + 1:]
                extra[moved.id] = ev.path_loss_row(moved)
        elif move == "rotate" and state.stations:
            si = rng.randrange(len(state.stations))
            bs = state.stations[si]
            delta = rng.choice([-cfg.azimuth_step, cfg.azimuth_step])
            rotated = replace(bs, azimuth=(bs.azimuth + delta) % 360.0)
            proposal = state.stations[:si] + [rotated] + state.stations[si + 1:]
            extra[rotated.id] = ev.path_loss_row(rotated)
        elif move == "tilt" and state.stations:
            si = rng.randrange(len(state.stations))
            bs = state.stations[si]
            delta = rng.choice([-cfg.tilt_step, cfg.tilt_step])
            tilt = min(cfg.tilt_range[1], max(cfg.tilt_range[0], bs.down_tilt + delta))
            if tilt != bs.down_tilt:
                tilted = replace(bs, down_tilt=tilt)
                proposal = state.stations[:si] + [tilted] + state.stations[si + 1:]
                extra[tilted.id] = ev.path_loss_row(tilted)
        elif move == "power" and state.stations:
            si = rng.randrange(len(state.stations))
            bs = state.stations[si]
            delta = rng.choice([-cfg.power_step, cfg.power_step])
            power = min(cfg.power_range[1], max(cfg.power_range[0], bs.tx_power + delta))
            if power != bs.tx_power:
                repowered = replace(bs, tx_power=power)
                proposal = state.stations[:si] + [repowered] + state.stations[si + 1:]
                extra[repowered.id] = ev.path_loss_row(repowered)
        elif move == "add" and len(state.stations) < cfg.max_stations:
            taken = {(s.position.x, s.position.y) for s in state.stations}
            free = [p for p in ev.candidates
                    if (p.x, p.y) not in taken
                    and _spacing_ok(p, state.stations, cfg.min_spacing)]
            if free:
                id_counter[0] += 1
                new_bs = BaseStation(id=f"opt-{id_counter[0]:03d}",
                                     position=rng.choice(free),
                                     azimuth=rng.choice(azimuths))
                proposal = state.stations + [new_bs]
                extra[new_bs.id] = ev.path_loss_row(new_bs)
        elif move == "remove" and len(state.stations) > 1:
            si = rng.randrange(len(state.stations))
            proposal = state.stations[:si] + state.stations[si + 1:]

        if proposal is not None:
            count = state.compliant_count(proposal, extra_rows=extra)
            cov = Fraction(count, ev.total_outdoor)
            obj = _objective(cov, proposal, cfg)
            delta = obj - cur_obj
            if delta >= 0.0 or rng.random() < math.exp(delta / temp):
                state.apply(proposal, extra_rows=extra)
                cur_obj = obj
                if cov >= initial_coverage and obj > best_obj:
                    best_plan, best_cov, best_obj = list(proposal), cov, obj
        temp *= cfg.cooling
        trace.append(best_obj)

    return best_plan, best_cov, best_obj


def optimize(env: EnvironmentModel, grid: SimulationGrid, pattern: AntennaPattern,
             config: PlanningConfig, initial: list[BaseStation] | None = None,
             evaluator: PlanEvaluator | None = None) -> NetworkPlan:
    """Search for a deployment meeting the coverage-compliance target.

    Returns the best plan found; ``compliant`` reflects whether the
    coverage target was reached (an exhausted budget is not an error).
    The returned coverage never falls below the initial plan's.  Fixed
    seeds give byte-identical plans.  Callers running many seeds on one
    scene can share a :class:`PlanEvaluator` to reuse its site caches.
    """
    initial = list(initial or [])
    ev = evaluator or PlanEvaluator(grid, env, pattern, config)
    check_plan_invariants(initial, config)

    rng = random.Random(config.seed)
    trace: list[float] = []
    id_counter = [0]

    state = _SearchState(ev, initial)
    initial_coverage = (Fraction(state.compliant_count(), ev.total_outdoor)
                        if initial else Fraction(0))

    _greedy_construction(ev, state, trace, id_counter)
    best_plan, best_cov, best_obj = _anneal(ev, state, rng, trace, id_counter,
                                            initial_coverage)

    stations = sorted(best_plan, key=lambda s: s.id)
    compliant = best_cov >= config.coverage_target_exact
    return NetworkPlan(stations=stations,
                       achieved_coverage=float(best_cov),
                       compliant=compliant,
                       objective_trace=trace,
                       seed=config.seed)


def default_seed_radius(grid: SimulationGrid) -> float:
    """Radius of the central region used for naive initial deployments."""
    extent = min(grid.width, grid.height) * grid.resolution
    return 0.3 * extent / 2.0


def random_deployment(grid: SimulationGrid, env: EnvironmentModel,
                      config: PlanningConfig, count: int = 3, seed: int = 0,
                      id_prefix: str = "init",
                      within_radius_m: float | None = None) -> list[BaseStation]:
    """Seeded random station deployment on the candidate lattice.

    Positions are drawn without replacement, rejecting any draw closer
    than the minimum spacing to an accepted one; azimuth, tilt, and power
    stay at their defaults.  With ``within_radius_m`` the draw is limited
    to sites near the grid center, mimicking a user dropping pins around
    the area of interest; the radius grows if too few sites fit.
    """
    sites = candidate_sites(grid, env, config)
    corner = grid.min_corner
    center = LocalPoint(corner.x + grid.width * grid.resolution / 2.0,
                        corner.y + grid.height * grid.resolution / 2.0)
    rng = random.Random(seed)

    radius = within_radius_m
    while True:
        pool = (sites if radius is None
                else [p for p in sites if p.distance_to(center) <= radius])
        order = list(range(len(pool)))
        rng.shuffle(order)
        chosen: list[LocalPoint] = []
        for idx in order:
            pos = pool[idx]
            if all(pos.distance_to(p) >= config.min_spacing for p in chosen):
                chosen.append(pos)
            if len(chosen) == count:
                break
        if len(chosen) == count:
            break
        if radius is None:
            raise NoFeasibleSitesError(
                f"could only place {len(chosen)} of {count} stations at "
                f"{config.min_spacing} m spacing")
        radius *= 1.5  # too tight; widen the drop zone and redraw

    return [BaseStation(id=f"{id_prefix}-{k + 1:02d}", position=pos)
            for k, pos in enumerate(chosen)]
