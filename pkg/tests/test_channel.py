import numpy as np
import pytest

from channel import (
    ChannelLevel,
    FluctuatingChannel,
    MixtureState,
    channel_from_dict,
    channel_to_dict,
    discrete_channel,
    envelope_exponential,
    max_component_ln,
    pooled_cm,
    pooled_state,
    propagate,
    semicontinuous_levels,
    uniform_channel,
    upper_bound_ln,
)
from exceptions import ChannelError, ConfigError, DimensionError
from gaussian_core import GaussianState, apply_loss, gaussian_log_negativity, vacuum


class TestChannels:
    def test_discrete_channel(self):
        channel = discrete_channel()
        np.testing.assert_array_equal(channel.transmittances, [0.25, 1.0])
        np.testing.assert_array_equal(channel.probabilities, [0.5, 0.5])

    def test_levels_must_increase(self):
        with pytest.raises(ChannelError):
            FluctuatingChannel((ChannelLevel(1.0, 0.5), ChannelLevel(0.5, 0.5)))

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ChannelError):
            FluctuatingChannel((ChannelLevel(0.5, 0.5), ChannelLevel(1.0, 0.4)))

    def test_level_ranges(self):
        with pytest.raises(ChannelError):
            ChannelLevel(1.2, 0.5)
        with pytest.raises(ChannelError):
            ChannelLevel(0.5, -0.1)

    def test_semicontinuous_grid(self):
        t = semicontinuous_levels()
        assert len(t) == 45
        assert t[0] == pytest.approx(0.1)
        assert t[-1] == 1.0

    def test_uniform_channel(self):
        channel = uniform_channel(10)
        assert channel.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(channel.probabilities, 0.1)

    def test_envelope_puts_p_full_at_unit_transmission(self):
        channel = envelope_exponential(3.0, p_full=0.2)
        assert channel.levels[-1] == ChannelLevel(1.0, 0.2)
        assert channel.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(channel.probabilities[:-1]) > 0)

    def test_flat_envelope(self):
        channel = envelope_exponential(0.0, p_full=0.2, n_levels=5)
        np.testing.assert_allclose(channel.probabilities, [0.2] * 5)

    def test_envelope_p_full_range(self):
        with pytest.raises(ChannelError):
            envelope_exponential(1.0, p_full=1.0)


class TestChannelDict:
    def test_levels_round_trip(self):
        channel = discrete_channel()
        assert channel_from_dict(channel_to_dict(channel)) == channel

    def test_presets(self):
        assert channel_from_dict({"preset": "discrete"}) == discrete_channel()
        assert channel_from_dict({"preset": "semicontinuous", "beta": 2.0}) == envelope_exponential(2.0)

    def test_uncalibrated_envelope_is_rejected(self):
        with pytest.raises(ConfigError):
            channel_from_dict({"preset": "semicontinuous", "ln_premix": -0.11})

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            channel_from_dict({"preset": "discrete", "extra": 1})
        with pytest.raises(ConfigError):
            channel_from_dict({"levels": [{"t": 1.0, "p": 1.0, "q": 0}]})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            channel_from_dict({"preset": "lognormal"})


class TestMixtures:
    def test_propagate_one_component_per_level(self, source):
        mixture = propagate(source, discrete_channel())
        assert len(mixture) == 2
        np.testing.assert_allclose(mixture.states[0].cov, apply_loss(source, 1, 0.25).cov)
        np.testing.assert_allclose(mixture.states[1].cov, source.cov)

    def test_propagate_skips_empty_levels(self, source):
        channel = FluctuatingChannel.from_arrays([0.5, 1.0], [0.0, 1.0])
        assert len(propagate(source, channel)) == 1

    def test_mixture_validation(self):
        with pytest.raises(ChannelError):
            MixtureState(((0.5, vacuum(2)), (0.4, vacuum(2))))
        with pytest.raises(DimensionError):
            MixtureState(((0.5, vacuum(2)), (0.5, vacuum(3))))
        with pytest.raises(ChannelError):
            MixtureState(((1.0, GaussianState(1, np.zeros(2), 0.5 * np.eye(2))),))

    def test_pooled_moments_include_mean_spread(self):
        left = GaussianState(1, [1.0, 0.0], np.eye(2))
        right = GaussianState(1, [-1.0, 0.0], np.eye(2))
        mean, cov = pooled_cm(MixtureState(((0.5, left), (0.5, right))))
        np.testing.assert_allclose(mean, [0.0, 0.0])
        np.testing.assert_allclose(cov, np.diag([2.0, 1.0]))

    def test_calibrated_discrete_mixture(self, discrete_mixture):
        assert gaussian_log_negativity(pooled_state(discrete_mixture)) == pytest.approx(-1.63, abs=1e-4)

    def test_upper_bound(self, discrete_mixture):
        assert upper_bound_ln(discrete_mixture) == pytest.approx(0.49, abs=0.08)

    def test_bound_ordering(self, discrete_mixture):
        pooled = gaussian_log_negativity(pooled_state(discrete_mixture))
        upper = upper_bound_ln(discrete_mixture)
        assert pooled <= upper <= max_component_ln(discrete_mixture)

    def test_single_component_bound_is_exact(self, source):
        mixture = propagate(source, FluctuatingChannel.from_arrays([1.0], [1.0]))
        assert upper_bound_ln(mixture) == pytest.approx(gaussian_log_negativity(source), abs=1e-9)


def test_upper_bound_brackets_pooled_ln_on_random_mixtures(random_state):
    rng = np.random.default_rng(31)
    for _ in range(100):
        n = rng.integers(1, 5)
        weights = rng.dirichlet(np.ones(n))
        mixture = MixtureState(tuple((w, random_state(rng)) for w in weights))
        upper = upper_bound_ln(mixture)
        assert upper >= -1e-12
        assert upper >= gaussian_log_negativity(pooled_state(mixture)) - 1e-9
