import math

import numpy as np
import pytest
from scipy import stats

from asymdetect import rng as rngmod
from asymdetect.epidemic import (EpidemicConfig, EpidemicInstance,
                                 SimulationStallError, apply_observation,
                                 generate_instance, si_step, simulate_si)
from asymdetect.dataset import record_dict, DatasetConfig

from conftest import path_graph, random_graph, star_graph


class TestEpidemicConfig:
    def test_validates_beta(self):
        with pytest.raises(ValueError):
            EpidemicConfig(beta=1.2)

    def test_validates_stop_fraction(self):
        with pytest.raises(ValueError):
            EpidemicConfig(beta=0.3, stop_fraction=0.0)


class TestSimulateSi:
    def test_certain_transmission_star(self):
        g = star_graph(9)
        infected, t_h = simulate_si(g, EpidemicConfig(beta=1.0, stop_fraction=1.0,
                                                      source=0, seed=1))
        assert t_h == 1
        assert infected.tolist() == list(range(10))

    def test_no_spread_needed(self):
        g = star_graph(9)
        infected, t_h = simulate_si(g, EpidemicConfig(beta=0.0, stop_fraction=0.1,
                                                      source=3, seed=1))
        assert t_h == 0
        assert infected.tolist() == [3]

    def test_beta_zero_stalls(self):
        g = path_graph(5)
        with pytest.raises(SimulationStallError):
            simulate_si(g, EpidemicConfig(beta=0.0, stop_fraction=0.5, source=0, seed=1))

    def test_snapshot_hits_stop_target_exactly(self, rng):
        for seed in range(10):
            g = random_graph(200, 400, rng)
            infected, t_h = simulate_si(g, EpidemicConfig(beta=0.5, stop_fraction=0.2,
                                                          source=0, seed=seed))
            assert infected.size == math.ceil(0.2 * 200)
            assert 0 in infected

    def test_deterministic_under_seed(self, rng):
        g = random_graph(150, 250, rng)
        cfg = EpidemicConfig(beta=0.3, stop_fraction=0.25, source=5, seed=77)
        a = simulate_si(g, cfg)
        b = simulate_si(g, cfg)
        assert a[1] == b[1]
        assert np.array_equal(a[0], b[0])

    def test_disconnected_graph_rejected(self):
        from asymdetect.graphs import Graph
        g = Graph.from_edges(4, [(0, 1), (2, 3)])
        with pytest.raises(ValueError):
            simulate_si(g, EpidemicConfig(beta=0.5, source=0, seed=0))


class TestTrajectoryProperties:
    def test_monotone_and_neighbour_backed(self, rng):
        """I(t) only grows, and every new infection had an infected neighbour
        at the previous step."""
        g = random_graph(120, 200, rng)
        step_rng = rngmod.generator(123)
        infected = np.zeros(g.n, dtype=bool)
        infected[0] = True
        for _ in range(15):
            new = si_step(g, infected, 0.3, step_rng)
            assert (new | infected).sum() == new.sum()  # no recovery
            for v in np.flatnonzero(new & ~infected):
                nbrs = g.neighbors_of(int(v))
                assert infected[nbrs].any()
            infected = new

    def test_crossing_step_bound(self, rng):
        """Replay the trajectory: the pre-snapshot step is below the target,
        the snapshot is exactly at it, and the snapshot only adds nodes
        adjacent to the previous infected set."""
        g = random_graph(200, 420, rng)
        cfg = EpidemicConfig(beta=0.5, stop_fraction=0.2, source=0, seed=9)
        infected_ids, t_h = simulate_si(g, cfg)
        target = math.ceil(cfg.stop_fraction * g.n)

        replay_rng = rngmod.generator(cfg.seed)
        mask = np.zeros(g.n, dtype=bool)
        mask[0] = True
        history = [mask.copy()]
        for _ in range(t_h):
            mask = si_step(g, mask, cfg.beta, replay_rng)
            history.append(mask.copy())
        prev = history[t_h - 1]
        assert prev.sum() < target <= history[t_h].sum()
        snapshot = np.zeros(g.n, dtype=bool)
        snapshot[infected_ids] = True
        assert infected_ids.size == target
        assert (snapshot & prev).sum() == prev.sum()  # earlier infections kept
        frontier = np.zeros(g.n, dtype=bool)
        for v in np.flatnonzero(prev):
            frontier[g.neighbors_of(v)] = True
        assert not (snapshot & ~prev & ~frontier).any()


class TestSiStepLaw:
    @pytest.mark.parametrize("beta,r", [(0.1, 1), (0.3, 2), (0.5, 5)])
    def test_single_step_infection_frequency(self, beta, r):
        """Monte Carlo over 1e5 disjoint star gadgets: the infection
        frequency of a node with r infected neighbours must match
        1 - (1-beta)^r within +-0.01."""
        trials = 10**5
        from asymdetect.graphs import Graph
        block = r + 1
        edges = [(b * block, b * block + j) for b in range(trials) for j in range(1, r + 1)]
        g = Graph.from_edges(trials * block, edges)
        infected = np.ones(g.n, dtype=bool)
        infected[::block] = False  # centers susceptible, leaves infected
        new = si_step(g, infected, beta, rngmod.generator(42 + r))
        freq = new[::block].mean()
        assert abs(freq - (1.0 - (1.0 - beta) ** r)) < 0.01


class TestApplyObservation:
    def test_theta_one(self):
        infected = np.arange(10, dtype=np.int64)
        assert np.array_equal(apply_observation(infected, 1.0, 5), infected)

    def test_theta_zero(self):
        assert apply_observation(np.arange(10, dtype=np.int64), 0.0, 5).size == 0

    def test_binomial_moments(self):
        """|O| over 1e4 seeds: mean 300, std ~12.2 for |I|=600, theta=0.5."""
        infected = np.arange(600, dtype=np.int64)
        counts = np.array([apply_observation(infected, 0.5, seed).size
                           for seed in range(10**4)])
        assert abs(counts.mean() - 300.0) < 1.0
        assert abs(counts.std() - math.sqrt(600 * 0.25)) < 0.5

    def test_binomial_chi_square_gof(self):
        """Chi-square goodness of fit of |O| against Binomial(|I|, theta)
        at significance 0.01, over 1e4 seeds."""
        n_inf, theta = 40, 0.3
        infected = np.arange(n_inf, dtype=np.int64)
        counts = np.bincount(
            [apply_observation(infected, theta, 10_000 + s).size for s in range(10**4)],
            minlength=n_inf + 1)
        probs = stats.binom.pmf(np.arange(n_inf + 1), n_inf, theta)
        # Pool tail bins so every expected count is >= 5.
        keep = probs * 10**4 >= 5
        obs = np.concatenate([counts[keep], [counts[~keep].sum()]])
        exp = np.concatenate([probs[keep], [probs[~keep].sum()]]) * 10**4
        result = stats.chisquare(obs, exp)
        assert result.pvalue > 0.01

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            apply_observation(np.arange(3, dtype=np.int64), 1.5, 0)


class TestEpidemicInstance:
    def test_observed_subset_enforced(self, rng):
        g = random_graph(20, 30, rng)
        with pytest.raises(ValueError):
            EpidemicInstance(graph=g, source=0, beta=0.3, t_h=1,
                             infected=np.array([0, 1, 2]),
                             observed=np.array([3]), theta=0.5)

    def test_source_must_be_infected(self, rng):
        g = random_graph(20, 30, rng)
        with pytest.raises(ValueError):
            EpidemicInstance(graph=g, source=9, beta=0.3, t_h=1,
                             infected=np.array([0, 1, 2]),
                             observed=np.array([0]), theta=0.5)

    def test_asymptomatic_is_derived(self, rng):
        g = random_graph(20, 30, rng)
        inst = EpidemicInstance(graph=g, source=0, beta=0.3, t_h=1,
                                infected=np.array([0, 1, 2, 5]),
                                observed=np.array([1, 5]), theta=0.5)
        assert inst.asymptomatic.tolist() == [0, 2]
        assert inst.pool_mask().sum() == 18


class TestGenerateInstance:
    def test_size_floor_3000(self):
        inst = generate_instance("ws", 3000, 0.5, seed=41)
        assert inst.infected.size >= 600

    def test_theta_one_pool_has_no_positives(self):
        inst = generate_instance("ba", 400, 1.0, seed=12)
        assert inst.asymptomatic.size == 0

    def test_deterministic_instance_bytes(self):
        cfg = DatasetConfig(model="ws", n=300, instance_count=1, theta=0.5, seed=8)
        a = record_dict(cfg, 0, generate_instance("ws", 300, 0.5, seed=8))
        b = record_dict(cfg, 0, generate_instance("ws", 300, 0.5, seed=8))
        import json
        assert json.dumps(a) == json.dumps(b)

    def test_beta_from_choices(self):
        betas = {generate_instance("ws", 200, 0.5, seed=s).beta for s in range(12)}
        assert betas <= {0.1, 0.3, 0.5}
        assert len(betas) > 1

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            generate_instance("er", 100, 0.5, seed=0)
