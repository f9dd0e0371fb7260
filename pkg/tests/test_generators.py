"""Instance generators: ranges, coverage guarantees, determinism."""

import numpy as np
import pytest

from caradec.generators import (
    InfeasibleConfigError,
    gen_er_graph,
    gen_random_pareto,
    gen_random_uniform,
)


class TestRandomUniform:
    def test_ranges(self):
        inst = gen_random_uniform(60, 200, seed=1)
        assert all(10 <= len(s) <= 30 for s in inst.sets)
        assert all(1 <= w <= 100 and w == int(w) for w in inst.weights)
        assert inst.n_sets == 60 and inst.n_elements == 200

    def test_byte_identical_regeneration(self):
        a = gen_random_uniform(40, 100, seed=7, instance_id=3).to_json()
        b = gen_random_uniform(40, 100, seed=7, instance_id=3).to_json()
        assert a == b

    def test_distinct_instances_differ(self):
        a = gen_random_uniform(40, 100, seed=7, instance_id=0).to_json()
        b = gen_random_uniform(40, 100, seed=7, instance_id=1).to_json()
        assert a != b

    def test_infeasible_degree_range(self):
        with pytest.raises(InfeasibleConfigError):
            gen_random_uniform(10, 5, degree_range=(10, 30), seed=0)


class TestRandomPareto:
    def test_full_coverage(self):
        for i in range(5):
            inst = gen_random_pareto(50, 120, seed=3, instance_id=i)
            covered = np.zeros(120, dtype=bool)
            for s in inst.sets:
                covered[list(s)] = True
            assert covered.all()

    def test_heavy_tail(self):
        # at the dataset's native scale, the top 20% of sets hold the
        # majority of edges on average
        fracs = []
        for i in range(20):
            inst = gen_random_pareto(1000, 1000, seed=11, instance_id=i)
            sizes = np.sort([len(s) for s in inst.sets])[::-1]
            top = sizes[: len(sizes) // 5].sum()
            fracs.append(top / sizes.sum())
        assert np.mean(fracs) > 0.5

    def test_deterministic(self):
        a = gen_random_pareto(30, 60, seed=2, instance_id=1).to_json()
        b = gen_random_pareto(30, 60, seed=2, instance_id=1).to_json()
        assert a == b


class TestErdosRenyi:
    def test_single_node(self):
        g = gen_er_graph(1, 0.5, seed=0)
        assert g.n_nodes == 1 and g.m == 0

    def test_edge_count_statistics(self):
        n, p = 30, 0.2
        pairs = n * (n - 1) // 2
        counts = [gen_er_graph(n, p, seed=13, instance_id=i).m for i in range(200)]
        mean = np.mean(counts)
        sigma = np.sqrt(pairs * p * (1 - p) / len(counts))
        assert abs(mean - pairs * p) <= 3 * sigma

    def test_deterministic(self):
        a = gen_er_graph(20, 0.3, seed=5, instance_id=2)
        b = gen_er_graph(20, 0.3, seed=5, instance_id=2)
        assert a.edges == b.edges

    def test_bad_probability(self):
        with pytest.raises(InfeasibleConfigError):
            gen_er_graph(10, 1.5, seed=0)
