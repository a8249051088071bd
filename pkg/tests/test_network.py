import numpy as np
import pytest
from scipy import stats as sps

from ibsim.network import gen_ba, gen_complete, gen_er


def assert_well_formed(net):
    adj = net.adjacency
    assert adj.dtype == bool
    assert (adj == adj.T).all()
    assert not adj.diagonal().any()


class TestComplete:
    def test_two_banks_single_edge(self):
        net = gen_complete(2)
        assert_well_formed(net)
        assert net.edge_count() == 1

    def test_hundred_banks(self):
        net = gen_complete(100)
        assert net.edge_count() == 100 * 99 // 2
        assert (net.degrees() == 99).all()

    def test_too_small(self):
        with pytest.raises(ValueError):
            gen_complete(1)


class TestEr:
    def test_gamma_zero_empty(self):
        net = gen_er(30, 0.0, seed=1)
        assert_well_formed(net)
        assert net.edge_count() == 0

    def test_gamma_one_complete(self):
        net = gen_er(30, 1.0, seed=1)
        assert net.edge_count() == 30 * 29 // 2

    def test_gamma_out_of_range(self):
        with pytest.raises(ValueError):
            gen_er(10, 1.5, seed=0)

    def test_deterministic_per_seed(self):
        a = gen_er(40, 0.2, seed=9)
        b = gen_er(40, 0.2, seed=9)
        c = gen_er(40, 0.2, seed=10)
        assert (a.adjacency == b.adjacency).all()
        assert (a.adjacency != c.adjacency).any()

    def test_mean_degree_matches_binomial(self):
        # <k> = gamma * (B - 1); check over many seeds within 3 standard errors
        B, gamma, n_seeds = 100, 0.115, 1000
        degrees = np.concatenate([gen_er(B, gamma, seed=s).degrees() for s in range(n_seeds)])
        expected = gamma * (B - 1)
        se = np.sqrt(expected * (1 - gamma) / len(degrees))
        assert abs(degrees.mean() - expected) <= 3 * se

    def test_degree_distribution_binomial_gof(self):
        # chi-square goodness of fit against Binomial(B-1, gamma) at the 1% level
        B, gamma, n_seeds = 50, 0.2, 1000
        degrees = np.concatenate([gen_er(B, gamma, seed=s).degrees() for s in range(n_seeds)])
        counts = np.bincount(degrees.astype(int), minlength=B)
        probs = sps.binom.pmf(np.arange(B), B - 1, gamma)
        # pool tail bins with tiny expectation to keep the test valid
        expected = probs * len(degrees)
        keep = expected >= 5
        obs = np.append(counts[keep], counts[~keep].sum())
        exp = np.append(expected[keep], expected[~keep].sum())
        stat = ((obs - exp) ** 2 / exp).sum()
        pvalue = sps.chi2.sf(stat, df=len(obs) - 1)
        assert pvalue > 0.01


class TestBa:
    def test_tree_for_m_one(self):
        net = gen_ba(3, 1, seed=0)
        assert_well_formed(net)
        assert net.edge_count() == 2

    def test_edge_count_exact(self):
        for seed in range(50):
            net = gen_ba(100, 6, seed=seed)
            assert net.edge_count() == 6 * (100 - 6) + 6 * 5 // 2

    def test_m_out_of_range(self):
        with pytest.raises(ValueError):
            gen_ba(10, 10, seed=0)
        with pytest.raises(ValueError):
            gen_ba(10, 0, seed=0)

    def test_mean_degree_near_target(self):
        # m = 6 gives <k> close to 11.5 at B = 100
        nets = [gen_ba(100, 6, seed=s) for s in range(100)]
        mean_k = np.mean([n.mean_degree() for n in nets])
        assert 11.0 <= mean_k <= 12.0

    def test_heavy_tail(self):
        # a hub well above 3<k> appears in nearly every realization
        hits = 0
        for seed in range(1000):
            net = gen_ba(100, 6, seed=seed)
            if net.degrees().max() > 3 * net.mean_degree():
                hits += 1
        assert hits > 950

    def test_deterministic_per_seed(self):
        a = gen_ba(50, 3, seed=4)
        b = gen_ba(50, 3, seed=4)
        assert (a.adjacency == b.adjacency).all()


class TestEdgeList:
    def test_round_trip(self, tmp_path):
        net = gen_er(20, 0.3, seed=2)
        path = tmp_path / "edges.txt"
        net.write_edge_list(path)
        lines = path.read_text().splitlines()
        assert len(lines) == net.edge_count()
        for line in lines:
            i, j = map(int, line.split())
            assert i < j
            assert net.adjacency[i, j]
