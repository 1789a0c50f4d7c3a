import math

import numpy as np
import pytest

from app.core.exceptions import InvalidModelConfiguration
from app.data import frequency_matrix
from app.sampler import ChainState, EstimationEngine, PosteriorDraws, RngStream, default_priors
from app.schemas import StaticConfig
from app.simulate import DESIGNS, Design, draw_true_params, simulate_static
from app.selection import (
    bic,
    count_parameters,
    frequency_fit,
    max_identifiable_k,
    scree,
    select_k,
    suggest_k_scree,
)


def _flat_draws(K: int, n_respondents: int = 6) -> PosteriorDraws:
    """One snapshot with uniform pi and beta on the tiny dataset"""
    draws = PosteriorDraws(mode="static", K=K)
    state = ChainState(
        z=np.zeros(n_respondents, dtype=int),
        pi=np.full((2, K), 1 / K),
        beta=[np.full((K, 2), 0.5)] * 2,
    )
    draws.record(state, iteration=1, loglik=0.0)
    return draws


def _make_config(data, iterations=40, burn_in=20):
    def make(K):
        alpha, eta, _ = default_priors(data, K)
        return StaticConfig(K=K, alpha=alpha, eta=eta, iterations=iterations, burn_in=burn_in)

    return make


class TestCountingRule:
    """Test cases for max_identifiable_k"""

    @pytest.mark.parametrize(
        "G, J, L, expected",
        [
            (2, 2, 4, 1),
            (5, 4, 20, 4),
            (1, 3, 9, 1),
            (10, 5, 25, 7),
        ],
    )
    def test_bound(self, G, J, L, expected):
        """Test floor(G - G(G-1)/(L+G-J))"""
        assert max_identifiable_k(G, J, L) == expected

    def test_bound_satisfies_inequality(self):
        """Test the returned K passes G(L-J) >= K(L-J) + G(K-1) and K+1 fails"""
        for G, J, L in [(3, 2, 7), (6, 4, 12), (8, 3, 30)]:
            K = max_identifiable_k(G, J, L)
            assert G * (L - J) >= K * (L - J) + G * (K - 1)
            assert G * (L - J) < (K + 1) * (L - J) + G * K

    @pytest.mark.parametrize("G, J, L", [(3, 4, 4), (0, 2, 5), (3, 0, 5)])
    def test_invalid_dimensions(self, G, J, L):
        """Test L <= J or non-positive G, J is rejected"""
        with pytest.raises(InvalidModelConfiguration):
            max_identifiable_k(G, J, L)


class TestScree:
    """Test cases for scree and suggest_k_scree"""

    def test_rank_one_matrix(self):
        """Test proportional rows give a single non-zero eigenvalue"""
        eigenvalues = scree(np.array([[1.0, 2.0], [2.0, 4.0]]))

        np.testing.assert_allclose(eigenvalues, [25.0, 0.0], atol=1e-10)
        assert suggest_k_scree(eigenvalues, 0.9) == 1

    def test_descending_and_non_negative(self, identified_data):
        """Test eigenvalues of the frequency matrix come sorted and clipped"""
        eigenvalues = scree(frequency_matrix(identified_data))

        assert eigenvalues.shape == (5,)
        assert np.all(eigenvalues >= 0)
        assert np.all(np.diff(eigenvalues) <= 0)

    @pytest.mark.parametrize("threshold, expected", [(0.9, 1), (0.95, 2)])
    def test_threshold_is_inclusive(self, threshold, expected):
        """Test a leading share of exactly 0.9 meets threshold 0.9"""
        assert suggest_k_scree([9.0, 1.0], threshold) == expected

    def test_empty_eigenvalues(self):
        """Test an empty list is rejected"""
        with pytest.raises(InvalidModelConfiguration):
            suggest_k_scree([], 0.9)

    def test_row_permutation_and_trace(self):
        """Test group order does not matter and the eigenvalues sum to ||Y||_F^2"""
        Y = np.random.default_rng(8).integers(0, 50, size=(5, 12)).astype(float)

        eigenvalues = scree(Y)

        np.testing.assert_allclose(scree(Y[[3, 0, 4, 1, 2]]), eigenvalues, rtol=1e-9)
        assert eigenvalues.sum() == pytest.approx(np.sum(Y**2), rel=1e-9)

    def test_diagonal_matrix(self):
        """Test a diagonal Y gives its squared entries"""
        np.testing.assert_allclose(scree(np.diag([3.0, 1.0, 2.0])), [9.0, 4.0, 1.0])

    def test_simulated_rank_shows_k_dominant_eigenvalues(self):
        """Test 1e5 respondents of the identified design separate lambda_3 from lambda_4 by 5x"""
        rng = RngStream(41)
        design = DESIGNS["identified"]
        data = simulate_static(draw_true_params(design, rng), 20000, rng)

        eigenvalues = scree(frequency_matrix(data))

        assert eigenvalues[design.K - 1] >= 5 * eigenvalues[design.K]


class TestBic:
    """Test cases for count_parameters, bic and frequency_fit"""

    def test_parameter_count(self, tiny_dataset):
        """Test K * sum(L_j - 1) + G(K - 1), plus K variances when dynamic"""
        assert count_parameters(tiny_dataset, 2) == 6
        assert count_parameters(tiny_dataset, 2, mode="dynamic") == 8
        assert count_parameters(tiny_dataset, 1) == 2

    def test_bic_at_uniform_parameters(self, tiny_dataset):
        """Test -loglik + p/2 log N with every response probability 1/2"""
        expected = -6 * math.log(0.25) + 0.5 * 6 * math.log(6)
        assert bic(tiny_dataset, _flat_draws(2)) == pytest.approx(expected)

    def test_frequency_fit_error(self, tiny_dataset):
        """Test Y_hat = n_g pi B and the relative Frobenius error"""
        Y_hat, error = frequency_fit(
            tiny_dataset, np.full((2, 2), 0.5), [np.full((2, 2), 0.5)] * 2
        )

        np.testing.assert_allclose(Y_hat, 1.5)
        assert error == pytest.approx(math.sqrt(0.1))


class TestSelectK:
    """Test cases for select_k"""

    def test_report_with_mocked_engine(self, tiny_dataset, mocker):
        """Test BIC argmin, weights, scree agreement and the bound warning"""
        engine = mocker.Mock(spec=EstimationEngine)
        engine.run.side_effect = lambda data, config, seed, chains: (_flat_draws(config.K), None)

        report = select_k(
            tiny_dataset, [1, 2], _make_config(tiny_dataset), seed=3, scree_threshold=0.9, engine=engine
        )

        assert engine.run.call_count == 2
        assert engine.run.call_args.kwargs == {"seed": 3, "chains": 1}
        assert report.k_max_counting == 1
        assert report.params_by_k == {1: 2, 2: 6}
        assert report.recommended_k == 1
        assert report.k_scree == 1
        assert report.scree_agrees
        assert sum(report.weights_by_k.values()) == pytest.approx(1.0)
        assert report.weights_by_k[2] / report.weights_by_k[1] == pytest.approx(1 / 36)
        assert len(report.warnings) == 1
        assert "K=2" in report.warnings[0]

    def test_empty_range(self, tiny_dataset):
        """Test an empty k-range is rejected"""
        with pytest.raises(InvalidModelConfiguration, match="empty"):
            select_k(tiny_dataset, [], _make_config(tiny_dataset), seed=0)

    @pytest.mark.slow
    def test_bic_recovers_true_k(self):
        """Test BIC picks the true K=2 in at least 16 of 20 replications at N=2000"""
        design = Design(G=5, J=4, n_categories=5, K=2)
        hits = 0
        for rep in range(20):
            rng = RngStream(500 + rep)
            data = simulate_static(draw_true_params(design, rng), 400, rng)

            report = select_k(
                data, [1, 2, 3, 4], _make_config(data, 400, 200), seed=rep, engine=EstimationEngine(max_workers=1)
            )
            hits += report.recommended_k == 2
        assert hits >= 16
