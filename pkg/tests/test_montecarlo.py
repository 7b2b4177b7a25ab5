import numpy as np
import pytest

from channel import discrete_channel
from distiller import distilled_gln, herald, joint_quadrature_variances
from exceptions import ConfigError, DegenerateSelectionError
from gaussian_core import make_kerr_entangled, vacuum
from montecarlo import (
    PAIRS,
    SERIES,
    McConfig,
    MomentAccumulator,
    histogram,
    run_mc,
    run_mc_sweep,
    sample_level,
    sample_phase_point,
)


def mc_config(**overrides):
    values = {"n_shots": 200_000, "seed": 7, "threshold_x": 0.0, "chunk_size": 65_536}
    values.update(overrides)
    return McConfig(**values)


class TestSampling:
    def test_level_frequencies(self):
        rng = np.random.default_rng(1)
        channel = discrete_channel()
        draws = np.array([sample_level(channel, rng) for _ in range(20_000)])
        assert abs(draws.mean() - 0.5) < 4 * 0.5 / np.sqrt(20_000)

    def test_vacuum_variance(self):
        rng = np.random.default_rng(2)
        state = vacuum(1)
        points = np.array([sample_phase_point(state, rng) for _ in range(20_000)])
        np.testing.assert_allclose(points.var(axis=0), [1.0, 1.0], atol=4 * np.sqrt(2 / 20_000))

    def test_entangled_sum_quadrature(self):
        rng = np.random.default_rng(3)
        v_s = 2.0 ** -0.76
        state = make_kerr_entangled(v_s, 20.0)
        points = np.array([sample_phase_point(state, rng) for _ in range(20_000)])
        expected, _ = joint_quadrature_variances(state.cov)
        observed = np.var(points[:, 0] + points[:, 2])
        assert abs(observed - expected) < 4 * expected * np.sqrt(2 / 20_000)


class TestMomentAccumulator:
    def test_matches_numpy(self):
        x = np.random.default_rng(4).normal(size=(5_000, 4)) @ np.diag([1.0, 2.0, 3.0, 4.0])
        acc = MomentAccumulator().update(x)
        np.testing.assert_allclose(acc.quadrature_mean, x.mean(axis=0))
        np.testing.assert_allclose(acc.quadrature_cov, np.cov(x.T, bias=True), rtol=1e-10)

    def test_merge_is_associative(self):
        x = np.random.default_rng(5).normal(size=(3_000, 4))
        single = MomentAccumulator().update(x)
        parts = [MomentAccumulator().update(chunk) for chunk in np.array_split(x, [700, 1_900])]
        left = parts[0].merge(parts[1]).merge(parts[2])
        right = parts[0].merge(parts[1].merge(parts[2]))
        for merged in (left, right):
            assert merged.n == single.n
            np.testing.assert_allclose(merged.mean, single.mean)
            np.testing.assert_allclose(merged.m2, single.m2, rtol=1e-9, atol=1e-9)

    def test_merge_leaves_operands(self):
        first = MomentAccumulator().update(np.ones((3, 4)))
        second = MomentAccumulator().update(np.zeros((2, 4)))
        first.merge(second)
        assert first.n == 3

    def test_empty_batch(self):
        acc = MomentAccumulator().update(np.empty((0, 4)))
        assert acc.n == 0

    def test_standard_errors_shrink(self):
        rng = np.random.default_rng(6)
        small = MomentAccumulator().update(rng.normal(size=(1_000, 4)))
        large = MomentAccumulator().update(rng.normal(size=(100_000, 4)))
        assert np.all(large.cov_stderr() < small.cov_stderr())
        assert len(PAIRS) == 10


class TestHistogram:
    def test_outliers_land_in_end_bins(self):
        edges, counts = histogram(np.array([-100.0, -25.0, 0.0, 24.99, 100.0]), bins=201, half_range=25.0)
        assert len(edges) == 202
        assert counts.sum() == 5
        assert counts[0] == 2
        assert counts[-1] == 2
        assert counts[100] == 1

    def test_needs_two_bins(self):
        with pytest.raises(ConfigError):
            histogram(np.zeros(3), bins=1)


class TestConfig:
    @pytest.mark.parametrize("bad", [{"n_shots": 0}, {"seed": -1}, {"histogram_bins": 1},
                                     {"histogram_range": 0.0}, {"workers": 0}])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ConfigError):
            mc_config(**bad)


class TestRunMc:
    def test_deterministic_for_seed(self, discrete_mixture3):
        first = run_mc(discrete_mixture3, mc_config(n_shots=50_000))
        second = run_mc(discrete_mixture3, mc_config(n_shots=50_000))
        assert first.kept_count == second.kept_count
        np.testing.assert_array_equal(first.pooled_cov_hat, second.pooled_cov_hat)
        other = run_mc(discrete_mixture3, mc_config(n_shots=50_000, seed=8))
        assert not np.array_equal(first.pooled_cov_hat, other.pooled_cov_hat)

    def test_agrees_with_analytic_engine(self, discrete_mixture3):
        result = run_mc(discrete_mixture3, mc_config(threshold_x=2.0))
        ensemble = herald(discrete_mixture3, 2.0)
        assert abs(result.success_probability_hat - ensemble.success_probability) \
            < 4 * result.success_probability_stderr
        deviation = np.abs(result.pooled_cov_hat - ensemble.pooled_cov)
        assert np.all(deviation < 4 * result.pooled_cov_stderr + 1e-12)
        assert abs(result.ln_hat - distilled_gln(ensemble)) < 4 * result.ln_stderr

    def test_sweep_shares_one_sample(self, discrete_mixture3):
        results = run_mc_sweep(discrete_mixture3, mc_config(n_shots=50_000), [-1e9, 0.0, 3.0])
        kept = [r.kept_count for r in results]
        assert kept[0] == 50_000
        assert kept[0] > kept[1] > kept[2]
        for result in results:
            assert result.total_count == 50_000
            assert result.per_level_kept.sum() == result.kept_count
            for series in SERIES:
                _, pre = result.histograms["pre"][series]
                _, post = result.histograms["post"][series]
                assert pre.sum() == 50_000
                assert post.sum() == result.kept_count
        np.testing.assert_array_equal(results[0].histograms["pre"]["X_B"][1],
                                      results[2].histograms["pre"]["X_B"][1])

    def test_parallel_workers(self, discrete_mixture3):
        result = run_mc(discrete_mixture3, mc_config(n_shots=40_001, workers=2))
        assert result.total_count == 40_001
        assert result.metadata["workers"] == 2
        assert 0.4 < result.success_probability_hat < 0.6

    def test_degenerate_selection_carries_partial_result(self, discrete_mixture3):
        with pytest.raises(DegenerateSelectionError) as info:
            run_mc(discrete_mixture3, mc_config(n_shots=1_000, threshold_x=50.0))
        partial = info.value.partial
        assert partial.total_count == 1_000
        assert partial.kept_count == 0
        assert np.isnan(partial.ln_hat)
        assert partial.histograms["pre"]["X_tap"][1].sum() == 1_000


@pytest.mark.slow
class TestFullScale:
    def test_oracle_equivalence_at_four(self, discrete_mixture3):
        config = McConfig(n_shots=10_000_000, seed=20260101, threshold_x=4.0, workers=4)
        result = run_mc(discrete_mixture3, config)
        ensemble = herald(discrete_mixture3, 4.0)
        assert abs(result.success_probability_hat - ensemble.success_probability) \
            < 4 * result.success_probability_stderr
        assert np.all(np.abs(result.pooled_cov_hat - ensemble.pooled_cov) < 4 * result.pooled_cov_stderr)
        assert abs(result.ln_hat - distilled_gln(ensemble)) < 4 * result.ln_stderr

    def test_head_count_at_nine(self, discrete_mixture3):
        config = McConfig(n_shots=240_000_000, seed=20260101, threshold_x=9.0, workers=8)
        result = run_mc(discrete_mixture3, config)
        assert 3_000 <= result.kept_count <= 30_000

    def test_ln_error_scales_with_shots(self, discrete_mixture3):
        errors = [run_mc(discrete_mixture3, McConfig(n_shots=n, seed=20260101, threshold_x=0.0, workers=4)).ln_stderr
                  for n in (100_000, 1_000_000, 10_000_000)]
        for coarse, fine in zip(errors, errors[1:]):
            assert 2.5 < coarse / fine < 4.0


def test_sweep_entry_matches_single_run(discrete_mixture3):
    config = mc_config(n_shots=30_000, threshold_x=1.5)
    single = run_mc(discrete_mixture3, config)
    swept = run_mc_sweep(discrete_mixture3, config, [0.0, 1.5])[1]
    assert swept.kept_count == single.kept_count
    np.testing.assert_array_equal(swept.pooled_cov_hat, single.pooled_cov_hat)
    assert swept.ln_hat == single.ln_hat


def test_parallel_run_is_reproducible(discrete_mixture3):
    config = mc_config(n_shots=60_000, workers=3, threshold_x=1.0)
    first, second = run_mc(discrete_mixture3, config), run_mc(discrete_mixture3, config)
    assert first.kept_count == second.kept_count
    assert first.success_probability_hat == second.success_probability_hat
    assert first.ln_hat == second.ln_hat
    np.testing.assert_array_equal(first.pooled_mean_hat, second.pooled_mean_hat)
    np.testing.assert_array_equal(first.pooled_cov_hat, second.pooled_cov_hat)
    np.testing.assert_array_equal(first.per_level_kept, second.per_level_kept)
    for selection in ("pre", "post"):
        for series in SERIES:
            np.testing.assert_array_equal(first.histograms[selection][series][1],
                                          second.histograms[selection][series][1])


def test_ln_error_shrinks_as_root_shots(discrete_mixture3):
    small = run_mc(discrete_mixture3, mc_config(n_shots=20_000)).ln_stderr
    large = run_mc(discrete_mixture3, mc_config(n_shots=200_000)).ln_stderr
    assert 2.5 < small / large < 4.0
