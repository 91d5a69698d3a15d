"""Discrete-time SI epidemic simulation with a fractional-infection stopping
rule, plus the independent per-node observation model that splits the
infected set into observed (symptomatic) and asymptomatic nodes.

One synchronous step infects each susceptible node v independently with
probability 1 - (1 - beta)^r(v), where r(v) is its number of infected
neighbours; all transitions apply simultaneously. Infection is permanent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .graphs import Graph, GenParamsBA, GenParamsWS, generate_ba, generate_ws, is_connected

BETA_CHOICES = (0.1, 0.3, 0.5)
STOP_FRACTION = 0.2

# Guard against non-spreading configurations (e.g. beta ~ 0).
_STEP_CAP_FACTOR = 10


class SimulationStallError(RuntimeError):
    """Epidemic failed to reach the stop fraction within the step cap."""


@dataclass(frozen=True)
class EpidemicConfig:
    """Per-edge infection probability, stop rule, source, and seed.

    `source=None` draws the source uniformly from the epidemic's own stream.
    """

    beta: float
    stop_fraction: float = STOP_FRACTION
    source: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if not 0.0 < self.stop_fraction <= 1.0:
            raise ValueError("stop_fraction must be in (0, 1]")
        rngmod.check_seed(self.seed)


@dataclass(frozen=True)
class EpidemicInstance:
    """One problem instance: graph, snapshot of infections, and observations.

    `infected` and `observed` are sorted node-id arrays. The asymptomatic
    set is always derived as infected minus observed, never stored.
    """

    graph: Graph
    source: int
    beta: float
    t_h: int
    infected: np.ndarray
    observed: np.ndarray
    theta: float

    def __post_init__(self):
        inf = np.unique(np.asarray(self.infected, dtype=np.int64))
        obs = np.unique(np.asarray(self.observed, dtype=np.int64))
        object.__setattr__(self, "infected", inf)
        object.__setattr__(self, "observed", obs)
        if inf.size == 0 or inf.min() < 0 or inf.max() >= self.graph.n:
            raise ValueError("infected ids out of range or empty")
        if not np.isin(obs, inf).all():
            raise ValueError("observed set must be a subset of infected")
        if self.source not in inf:
            raise ValueError("source must be infected")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")

    @property
    def asymptomatic(self) -> np.ndarray:
        return np.setdiff1d(self.infected, self.observed, assume_unique=True)

    def infected_mask(self) -> np.ndarray:
        mask = np.zeros(self.graph.n, dtype=bool)
        mask[self.infected] = True
        return mask

    def observed_mask(self) -> np.ndarray:
        mask = np.zeros(self.graph.n, dtype=bool)
        mask[self.observed] = True
        return mask

    def pool_mask(self) -> np.ndarray:
        """Evaluation pool: every node not observed as infected."""
        return ~self.observed_mask()


def si_step(g: Graph, infected: np.ndarray, beta: float,
            rng: np.random.Generator) -> np.ndarray:
    """One synchronous SI step; returns the new infected mask.

    Consumes exactly n uniforms from `rng` regardless of state, so
    trajectories can be replayed step by step.
    """
    row_of = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    infected_neighbor = infected[g.neighbors]
    r = np.bincount(row_of[infected_neighbor], minlength=g.n)
    p = 1.0 - (1.0 - beta) ** r
    draws = rng.random(g.n)
    return infected | (~infected & (draws < p))


def simulate_si(g: Graph, cfg: EpidemicConfig) -> tuple[np.ndarray, int]:
    """Run the epidemic until the infected count first reaches
    ceil(stop_fraction * n); returns (sorted infected ids, t_h).

    The step that crosses the target usually overshoots it; arrivals of the
    crossing step are trimmed uniformly at random so the snapshot holds
    exactly ceil(stop_fraction * n) infected nodes. Earlier infections are
    never removed.
    """
    if not is_connected(g):
        raise ValueError("epidemic requires a connected graph")
    rng = rngmod.generator(cfg.seed)
    source = cfg.source if cfg.source is not None else int(rng.integers(g.n))
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range")
    infected = np.zeros(g.n, dtype=bool)
    infected[source] = True
    target = math.ceil(cfg.stop_fraction * g.n)
    t = 0
    cap = _STEP_CAP_FACTOR * g.n
    while infected.sum() < target:
        if t >= cap:
            raise SimulationStallError(
                f"stop fraction {cfg.stop_fraction} unreached after {cap} steps "
                f"(beta={cfg.beta})"
            )
        stepped = si_step(g, infected, cfg.beta, rng)
        t += 1
        excess = int(stepped.sum()) - target
        if excess > 0:
            arrivals = np.flatnonzero(stepped & ~infected)
            stepped[rng.choice(arrivals, size=excess, replace=False)] = False
        infected = stepped
    return np.flatnonzero(infected).astype(np.int64), t


def apply_observation(infected: np.ndarray, theta: float, seed: int) -> np.ndarray:
    """Observe each infected node independently with probability theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must be in [0, 1]")
    infected = np.asarray(infected, dtype=np.int64)
    rng = rngmod.generator(seed)
    return infected[rng.random(infected.size) < theta]


def generate_instance(model: str, n: int, theta: float, seed: int, *,
                      m: int = 4, k: int = 8, p: float = 0.3,
                      beta_choices=BETA_CHOICES,
                      stop_fraction: float = STOP_FRACTION) -> EpidemicInstance:
    """Generate one instance: network, uniform source, uniform beta from
    `beta_choices`, SI epidemic to the stop rule, then observation.

    All randomness derives from `seed` via per-role sub-seeds (graph /
    source / beta / epidemic / observation), so re-running with the same
    seed reproduces the instance exactly.
    """
    if model == "ba":
        g = generate_ba(GenParamsBA(n=n, m=m, seed=rngmod.role_seed(seed, "graph")))
    elif model == "ws":
        g = generate_ws(GenParamsWS(n=n, k=k, p=p, seed=rngmod.role_seed(seed, "graph")))
    else:
        raise ValueError(f"unknown network model {model!r} (expected 'ba' or 'ws')")
    source = int(rngmod.generator(rngmod.role_seed(seed, "source")).integers(n))
    beta_rng = rngmod.generator(rngmod.role_seed(seed, "beta"))
    beta = float(beta_choices[int(beta_rng.integers(len(beta_choices)))])
    infected, t_h = simulate_si(
        g, EpidemicConfig(beta=beta, stop_fraction=stop_fraction, source=source,
                          seed=rngmod.role_seed(seed, "epidemic")))
    observed = apply_observation(infected, theta, rngmod.role_seed(seed, "observation"))
    return EpidemicInstance(graph=g, source=source, beta=beta, t_h=t_h,
                            infected=infected, observed=observed, theta=theta)
