"""
PSO Module - continuous particle swarm optimizer (maximization)
Inertia-weighted velocity update with linear inertia decay, velocity clamping and bounded positions
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from utils.errors import ParameterError

logger = logging.getLogger(__name__)

Fitness = Callable[[np.ndarray], float]
# evaluator(fitness, positions) -> one fitness per row, in row order
Evaluator = Callable[[Fitness, np.ndarray], np.ndarray]
# prefer(candidate, incumbent) -> True when an equal-fitness candidate should replace gbest
Preference = Callable[[np.ndarray, np.ndarray], bool]


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 20
    iterations: int = 100
    c1: float = 2.0
    c2: float = 2.0
    w_start: float = 0.9
    w_end: float = 0.4
    pos_bounds: Tuple[float, float] = (-5.0, 5.0)
    v_max: float = 5.0
    seed: int = 0

    def __post_init__(self):
        bounds = tuple(float(b) for b in self.pos_bounds)
        object.__setattr__(self, 'pos_bounds', bounds)
        if len(bounds) != 2 or bounds[0] >= bounds[1]:
            raise ParameterError(f"pos_bounds must be [lo, hi] with lo < hi, got {self.pos_bounds}")
        if self.particles < 1:
            raise ParameterError(f"particles must be positive, got {self.particles}")
        if self.iterations < 1:
            raise ParameterError(f"iterations must be positive, got {self.iterations}")
        if self.c1 < 0 or self.c2 < 0:
            raise ParameterError(f"c1 and c2 must be non-negative, got {self.c1}, {self.c2}")
        if self.w_end > self.w_start:
            raise ParameterError(f"w_end ({self.w_end}) must not exceed w_start ({self.w_start})")
        if self.v_max <= 0:
            raise ParameterError(f"v_max must be positive, got {self.v_max}")

    def inertia(self, t: int) -> float:
        """w(t), decaying linearly from w_start at t=0 to w_end at the last iteration"""
        if self.iterations == 1:
            return self.w_start
        return self.w_start - (self.w_start - self.w_end) * t / (self.iterations - 1)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float


@dataclass
class SwarmState:
    """Swarm arrays (one row per particle) plus the global best and its trace"""

    positions: np.ndarray
    velocities: np.ndarray
    pbest_positions: np.ndarray
    pbest_fitness: np.ndarray
    gbest_position: np.ndarray
    gbest_fitness: float
    rng: np.random.Generator
    iteration: int = 0
    history: List[float] = field(default_factory=list)

    @property
    def particles(self) -> List[Particle]:
        return [
            Particle(self.positions[i].copy(), self.velocities[i].copy(),
                     self.pbest_positions[i].copy(), float(self.pbest_fitness[i]))
            for i in range(len(self.positions))
        ]


@dataclass(frozen=True)
class PsoResult:
    position: np.ndarray
    fitness: float
    history: List[float]


def serial_evaluator(fitness: Fitness, positions: np.ndarray) -> np.ndarray:
    return np.array([fitness(p) for p in positions], dtype=np.float64)


def thread_evaluator(workers: int) -> Evaluator:
    """Evaluate particles on a joblib thread pool; results keep particle order"""
    from joblib import Parallel, delayed

    def evaluate(fitness: Fitness, positions: np.ndarray) -> np.ndarray:
        values = Parallel(n_jobs=workers, prefer='threads')(delayed(fitness)(p) for p in positions)
        return np.asarray(values, dtype=np.float64)

    return evaluate


def velocity_update(v, x, pbest, gbest, w: float, c1: float, c2: float, r1, r2, v_max: float) -> np.ndarray:
    """v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x), clamped to [-v_max, v_max]"""
    new_v = w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)
    return np.clip(new_v, -v_max, v_max)


def _update_gbest(state: SwarmState, positions: np.ndarray, fitness: np.ndarray, prefer: Optional[Preference]):
    for i in range(len(positions)):
        f = fitness[i]
        if f > state.gbest_fitness or (
                prefer is not None and f == state.gbest_fitness and prefer(positions[i], state.gbest_position)):
            state.gbest_fitness = float(f)
            state.gbest_position = positions[i].copy()


def pso_init(cfg: SwarmConfig, dim: int, fitness: Fitness,
             evaluator: Evaluator = serial_evaluator, prefer: Optional[Preference] = None) -> SwarmState:
    """Random positions in pos_bounds, velocities in [-v_max/2, v_max/2], evaluated once"""
    if dim < 1:
        raise ParameterError(f"dimension must be positive, got {dim}")
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.pos_bounds
    positions = rng.uniform(lo, hi, size=(cfg.particles, dim))
    velocities = rng.uniform(-cfg.v_max / 2, cfg.v_max / 2, size=(cfg.particles, dim))
    values = evaluator(fitness, positions)

    best = int(np.argmax(values))
    state = SwarmState(
        positions=positions,
        velocities=velocities,
        pbest_positions=positions.copy(),
        pbest_fitness=values.copy(),
        gbest_position=positions[best].copy(),
        gbest_fitness=float(values[best]),
        rng=rng,
    )
    _update_gbest(state, positions, values, prefer)
    state.history.append(state.gbest_fitness)
    return state


def pso_step(state: SwarmState, cfg: SwarmConfig, fitness: Fitness,
             evaluator: Evaluator = serial_evaluator, prefer: Optional[Preference] = None) -> SwarmState:
    """One synchronous swarm update; mutates and returns state"""
    w = cfg.inertia(state.iteration)
    shape = state.positions.shape
    r1 = state.rng.random(shape)
    r2 = state.rng.random(shape)

    state.velocities = velocity_update(
        state.velocities, state.positions, state.pbest_positions, state.gbest_position,
        w, cfg.c1, cfg.c2, r1, r2, cfg.v_max)
    lo, hi = cfg.pos_bounds
    state.positions = np.clip(state.positions + state.velocities, lo, hi)

    values = evaluator(fitness, state.positions)
    improved = values > state.pbest_fitness
    state.pbest_positions[improved] = state.positions[improved]
    state.pbest_fitness[improved] = values[improved]
    _update_gbest(state, state.positions, values, prefer)

    state.iteration += 1
    state.history.append(state.gbest_fitness)
    return state


def pso_run(cfg: SwarmConfig, dim: int, fitness: Fitness,
            evaluator: Evaluator = serial_evaluator, prefer: Optional[Preference] = None) -> PsoResult:
    """pso_init followed by cfg.iterations steps; history holds the initial gbest plus one entry per step"""
    state = pso_init(cfg, dim, fitness, evaluator, prefer)
    for _ in range(cfg.iterations):
        pso_step(state, cfg, fitness, evaluator, prefer)
    logger.debug("PSO finished: gbest %.6f after %d iterations", state.gbest_fitness, state.iteration)
    return PsoResult(position=state.gbest_position.copy(), fitness=state.gbest_fitness, history=list(state.history))
