import numpy as np
import pytest

from fronsim.config import ScenarioConfig
from fronsim.errors import ConfigurationError
from fronsim.grid import CellState, bfs_distance_field
from fronsim.scenario import generate_scenario, largest_free_component, sample_static_grid


def cfg(**kw):
    base = dict(width=20, height=20, n_robots=3, p_occ=0.3, n_dynamic=6, seed=0)
    base.update(kw)
    return ScenarioConfig(**base)


class TestStaticSampling:
    def test_zero_density_fully_free(self):
        grid = sample_static_grid(np.random.default_rng(0), 10, 10, 0.0)
        assert (grid == CellState.FREE).all()

    def test_prerepair_density_concentrates(self):
        total = occ = 0
        for seed in range(100):
            rng = np.random.Generator(np.random.PCG64(seed))
            grid = sample_static_grid(rng, 40, 40, 0.3)
            occ += int((grid == CellState.OCC).sum())
            total += grid.size
        assert abs(occ / total - 0.3) < 0.03


class TestLargestComponent:
    def test_picks_biggest_pocket(self):
        cells = np.array(
            [
                [0, 1, 0, 0],
                [0, 1, 0, 0],
                [0, 1, 0, 0],
            ],
            dtype=np.int8,
        )
        mask = largest_free_component(cells)
        assert mask.sum() == 6
        assert mask[0, 2] and mask[2, 3] and not mask[0, 0]


class TestGenerateScenario:
    def test_deterministic_per_seed(self):
        a = generate_scenario(cfg(seed=11))
        b = generate_scenario(cfg(seed=11))
        assert a.truth == b.truth
        assert a.starts == b.starts
        assert a.obstacles.positions == b.obstacles.positions
        assert a.obstacles.headings == b.obstacles.headings

    def test_different_seeds_differ(self):
        a = generate_scenario(cfg(seed=1))
        b = generate_scenario(cfg(seed=2))
        assert a.truth != b.truth or a.starts != b.starts

    def test_starts_mutually_reachable_and_disjoint(self):
        for seed in range(10):
            scenario = generate_scenario(cfg(seed=seed))
            starts = scenario.starts
            assert len(set(starts)) == len(starts)
            field = bfs_distance_field(scenario.truth, starts[0])
            for other in starts[1:]:
                assert field.reachable(other)
            for cell in scenario.obstacles.positions:
                assert scenario.truth.is_free(cell)
                assert cell not in starts

    def test_truth_has_no_unknown_and_is_connected(self):
        scenario = generate_scenario(cfg(seed=4))
        assert not (scenario.truth.cells == CellState.UNK).any()
        free = np.argwhere(scenario.truth.cells == CellState.FREE)
        field = bfs_distance_field(scenario.truth, (int(free[0][0]), int(free[0][1])))
        for r, c in free:
            assert field.reachable((int(r), int(c)))

    def test_impossible_request_raises(self):
        with pytest.raises(ConfigurationError):
            generate_scenario(cfg(width=3, height=1, n_robots=3, n_dynamic=4))
