import numpy as np
import pytest

from app.core.exceptions import InvalidModelConfiguration
from app.sampler import RngStream
from app.schemas import RecoveryPoint
from app.selection import max_identifiable_k
from app.simulate import (
    DESIGNS,
    Design,
    TrueParams,
    draw_true_params,
    random_walk_logits,
    recovery_experiment,
    recovery_frame,
    recovery_gap,
    simulate_dynamic,
    simulate_static,
    split_sample,
)
from app.simulate.recovery import beta_row_correlation


def _point(design, n, mean_corr):
    return RecoveryPoint(design=design, n=n, mean_corr=mean_corr, sd_corr=0.0, reps=1)


class TestDesigns:
    """Test cases for the built-in simulation designs"""

    def test_identified_design_passes_counting_rule(self):
        """Test G=5, J=4, L_j=5, K=3 is within the bound"""
        design = DESIGNS["identified"]
        assert design.L == 20
        assert max_identifiable_k(design.G, design.J, design.L) >= design.K

    def test_under_identified_design_fails_counting_rule(self):
        """Test the two-group design asks for more types than the bound"""
        design = DESIGNS["under_identified"]
        assert max_identifiable_k(design.G, design.J, design.L) < design.K

    def test_off_anchor_rows_share_the_anchor_entries(self):
        """Test off-anchor types agree on the first K categories and differ after them"""
        design = DESIGNS["under_identified"]
        truth = draw_true_params(design, RngStream(3))
        beta = truth.beta_true[0]

        assert beta.shape == (2, 4)
        np.testing.assert_allclose(beta[0, :2], beta[1, :2])
        np.testing.assert_allclose(beta.sum(axis=1), 1.0)
        assert not np.allclose(beta[0, 2:], beta[1, 2:])

    def test_off_anchor_needs_room_past_the_anchor(self):
        """Test off-anchor truth with fewer than 2K categories is rejected"""
        with pytest.raises(ValueError, match="off_anchor"):
            Design(G=2, J=1, n_categories=3, K=2, truth="off_anchor")


class TestSimulateStatic:
    """Test cases for draw_true_params and simulate_static"""

    def test_true_params_on_simplex(self, identified_truth):
        """Test pi and beta rows sum to one with the design shapes"""
        assert identified_truth.pi_true.shape == (5, 3)
        assert identified_truth.n_categories == [5, 5, 5, 5]
        np.testing.assert_allclose(identified_truth.pi_true.sum(axis=1), 1.0)
        for beta in identified_truth.beta_true:
            np.testing.assert_allclose(beta.sum(axis=1), 1.0)

    def test_dataset_layout(self, identified_data):
        """Test 1-based ids and labels, 200 respondents per group"""
        assert identified_data.n_respondents == 1000
        assert identified_data.label_counts.tolist() == [200] * 5
        assert identified_data.ids[0] == "1"
        assert identified_data.label_values == ["1", "2", "3", "4", "5"]
        assert identified_data.questions[0].codes == ["1", "2", "3", "4", "5"]
        assert identified_data.responses.min() >= 0

    def test_group_sizes_per_label(self, rng):
        """Test a list of sizes gives uneven groups"""
        params = TrueParams(pi_true=np.array([[1.0, 0.0], [0.0, 1.0]]), beta_true=[np.eye(2)])
        data = simulate_static(params, [3, 5], rng)

        assert data.label_counts.tolist() == [3, 5]
        # one-hot beta makes the answer equal the type
        assert data.responses[:3, 0].tolist() == [0, 0, 0]
        assert data.responses[3:, 0].tolist() == [1] * 5

    def test_empirical_frequencies(self, rng):
        """Test answer shares approach pi @ beta"""
        params = TrueParams(
            pi_true=np.array([[0.3, 0.7]]),
            beta_true=[np.array([[0.9, 0.1], [0.2, 0.8]])],
        )
        data = simulate_static(params, 20000, rng)
        share = np.bincount(data.responses[:, 0], minlength=2) / data.n_respondents

        np.testing.assert_allclose(share, params.pi_true[0] @ params.beta_true[0], atol=0.015)

    def test_invalid_sizes(self, identified_truth, rng):
        """Test group sizes must match the labels and be positive"""
        with pytest.raises(InvalidModelConfiguration):
            simulate_static(identified_truth, [10, 10], rng)
        with pytest.raises(InvalidModelConfiguration):
            simulate_static(identified_truth, 0, rng)

    def test_beta_rows_must_match_k(self):
        """Test TrueParams rejects beta with the wrong number of types"""
        with pytest.raises(ValueError):
            TrueParams(pi_true=np.array([[0.5, 0.5]]), beta_true=[np.full((3, 2), 0.5)])


class TestSimulateDynamic:
    """Test cases for random_walk_logits and simulate_dynamic"""

    def test_zero_variance_keeps_pi_constant(self, rng):
        """Test sigma2 = 0 gives the starting pi in every period"""
        params = TrueParams(pi_true=np.array([[0.2, 0.5, 0.3]]), beta_true=[np.eye(3)])
        data, realised = simulate_dynamic(params, 10, 0.0, rng, T=6)

        assert data.mode == "dynamic"
        assert data.n_labels == 6
        np.testing.assert_allclose(realised.pi_true, np.tile([0.2, 0.5, 0.3], (6, 1)))
        np.testing.assert_array_equal(realised.sigma2, [0.0, 0.0, 0.0])

    def test_random_walk_increments(self, rng):
        """Test increments have the requested variance per type"""
        logits = random_walk_logits(20001, 2, np.array([0.25, 4.0]), rng)
        increments = np.diff(logits, axis=0)

        assert np.all(logits[0] == 0.0)
        np.testing.assert_allclose(increments.var(axis=0), [0.25, 4.0], rtol=0.05)

    def test_negative_variance(self, rng):
        """Test a negative sigma2 is rejected"""
        with pytest.raises(InvalidModelConfiguration):
            random_walk_logits(5, 2, -1.0, rng)


class TestRecovery:
    """Test cases for the identification experiment"""

    @pytest.mark.parametrize("n, labels, expected", [(10, 3, [4, 3, 3]), (6, 2, [3, 3])])
    def test_split_sample(self, n, labels, expected):
        """Test sizes differ by at most one and sum to n"""
        assert split_sample(n, labels) == expected

    def test_split_sample_too_small(self):
        """Test fewer respondents than labels is rejected"""
        with pytest.raises(InvalidModelConfiguration):
            split_sample(1, 2)

    def test_row_correlation(self):
        """Test perfect, inverse and constant rows"""
        row = np.array([0.1, 0.2, 0.7])
        assert beta_row_correlation(row, row) == pytest.approx(1.0)
        assert beta_row_correlation(row, row[::-1]) < 0
        assert beta_row_correlation(np.full(3, 1 / 3), row) == 0.0

    def test_serial_run_shape(self):
        """Test one rep per N run in-process gives one point per grid value"""
        points = recovery_experiment(
            "under_identified", [20, 40], reps=1, seed=1, iterations=20, burn_in=10, max_workers=1
        )

        assert [p.n for p in points] == [20, 40]
        assert all(-1.0 <= p.mean_corr <= 1.0 for p in points)
        assert all(p.sd_corr == 0.0 for p in points)
        frame = recovery_frame(points)
        assert frame.columns.tolist() == ["design", "n", "mean_corr", "sd_corr", "reps"]

    def test_deterministic_for_seed(self):
        """Test the same seed reproduces the curve"""
        kwargs = dict(reps=2, seed=4, iterations=15, burn_in=5, max_workers=1)
        first = recovery_experiment("identified", [50], **kwargs)
        second = recovery_experiment("identified", [50], **kwargs)

        assert first == second

    def test_unknown_design(self):
        """Test an unknown design name is rejected"""
        with pytest.raises(InvalidModelConfiguration, match="Unknown design"):
            recovery_experiment("mystery", [10], reps=1, seed=0)

    def test_gap_uses_largest_shared_n(self):
        """Test the gap compares the curves at the largest common N"""
        identified = [_point("identified", 100, 0.8), _point("identified", 1000, 0.97)]
        under = [_point("under_identified", 100, 0.6), _point("under_identified", 1000, 0.7)]

        assert recovery_gap(identified, under) == pytest.approx(0.27)

    def test_gap_without_shared_n(self):
        """Test disjoint grids raise"""
        with pytest.raises(InvalidModelConfiguration):
            recovery_gap([_point("identified", 10, 0.5)], [_point("under_identified", 20, 0.5)])

    @pytest.mark.slow
    def test_identified_design_recovers_beta(self):
        """Test corr rises with N to >= 0.95 at N = 5000 and beats the under-identified design by 0.15"""
        grid = [500, 2000, 5000]
        identified = recovery_experiment("identified", grid, reps=20, seed=7)
        under = recovery_experiment("under_identified", grid, reps=20, seed=7)

        means = np.array([p.mean_corr for p in identified])
        assert means[-1] > means[0]
        assert np.all(np.diff(means) > -1e-3)
        assert means[-1] >= 0.95
        assert recovery_gap(identified, under) >= 0.15

    def test_true_params_for_recovery(self):
        """Test anchored truth tilts type k toward category k on average"""
        design = DESIGNS["identified"]
        rng = RngStream(0)
        lead, rest = [], []
        for _ in range(200):
            truth = draw_true_params(design, rng)
            lead.append(np.diag(truth.beta_true[0][:, :3]).mean())
            rest.append(np.diag(truth.beta_true[1][:, :3]).mean())
        # Dirichlet(2, 1, 1, 1, 1) on question 1, Dirichlet(10, 1, 1, 1, 1) elsewhere
        assert np.mean(lead) == pytest.approx(2 / 6, abs=0.03)
        assert np.mean(rest) == pytest.approx(10 / 14, abs=0.03)
