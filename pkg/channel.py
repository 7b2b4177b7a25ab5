"""Fluctuating-loss channels and the Gaussian mixtures they produce."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from exceptions import ChannelError, ConfigError, DimensionError
from gaussian_core import (
    GaussianState,
    apply_loss,
    gaussian_log_negativity,
    partial_trace,
    pt_trace_norm,
    validate_physical,
)

logger = logging.getLogger(__name__)

SUM_TOL = 1e-12
SEMICONTINUOUS_LEVELS = 45
T_MIN, T_MAX = 0.1, 1.0
DEFAULT_P_FULL = 0.20
SIGNAL_MODE = 1


# =============== DOMAIN TYPES ===============
@dataclass(frozen=True)
class ChannelLevel:
    transmittance: float
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise ChannelError(f"transmittance must lie in [0, 1], got {self.transmittance}")
        if not 0.0 <= self.probability <= 1.0:
            raise ChannelError(f"probability must lie in [0, 1], got {self.probability}")


@dataclass(frozen=True)
class FluctuatingChannel:
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ChannelError("a channel needs at least one level")
        t = np.array([lvl.transmittance for lvl in levels])
        p = np.array([lvl.probability for lvl in levels])
        if np.any(np.diff(t) <= 0):
            raise ChannelError("transmittances must be strictly increasing")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ChannelError(f"probabilities must sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "levels", levels)

    @property
    def transmittances(self):
        return np.array([lvl.transmittance for lvl in self.levels])

    @property
    def probabilities(self):
        return np.array([lvl.probability for lvl in self.levels])

    def __len__(self):
        return len(self.levels)

    @classmethod
    def from_arrays(cls, transmittances, probabilities):
        return cls(tuple(ChannelLevel(float(t), float(p))
                         for t, p in zip(transmittances, probabilities)))


@dataclass(frozen=True)
class MixtureState:
    """Convex mixture of Gaussian states, ``components`` is a tuple of (weight, state)."""
    components: tuple

    def __post_init__(self):
        components = tuple((float(w), s) for w, s in self.components)
        if not components:
            raise ChannelError("a mixture needs at least one component")
        weights = np.array([w for w, _ in components])
        if np.any(weights <= 0):
            raise ChannelError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > SUM_TOL:
            raise ChannelError(f"mixture weights must sum to 1, got {weights.sum()!r}")
        n_modes = {s.n_modes for _, s in components}
        if len(n_modes) != 1:
            raise DimensionError(f"mixture components disagree on mode count: {sorted(n_modes)}")
        for _, state in components:
            if not validate_physical(state):
                raise ChannelError("mixture component is not a physical state")
        object.__setattr__(self, "components", components)

    @property
    def weights(self):
        return np.array([w for w, _ in self.components])

    @property
    def states(self):
        return [s for _, s in self.components]

    @property
    def n_modes(self):
        return self.components[0][1].n_modes

    def __len__(self):
        return len(self.components)


# =============== CHANNEL CONSTRUCTORS ===============
def discrete_channel():
    """Full transmission and 25% transmission, each with probability 1/2."""
    return FluctuatingChannel((ChannelLevel(0.25, 0.5), ChannelLevel(1.0, 0.5)))


def semicontinuous_levels(n_levels=SEMICONTINUOUS_LEVELS):
    """Evenly spaced transmittances from 0.1 to 1.0, both ends included."""
    if n_levels < 2:
        raise ChannelError(f"need at least two levels, got {n_levels}")
    return np.linspace(T_MIN, T_MAX, n_levels)


def uniform_channel(n_levels=SEMICONTINUOUS_LEVELS):
    t = semicontinuous_levels(n_levels)
    p = np.full(n_levels, 1.0 / n_levels)
    p[-1] = 1.0 - p[:-1].sum()
    return FluctuatingChannel.from_arrays(t, p)


def envelope_exponential(beta, p_full=DEFAULT_P_FULL, n_levels=SEMICONTINUOUS_LEVELS):
    """Point mass ``p_full`` at T = 1 plus an exp(beta*T) envelope over the other levels."""
    if not 0.0 < p_full < 1.0:
        raise ChannelError(f"p_full must lie in (0, 1), got {p_full}")
    t = semicontinuous_levels(n_levels)
    rest = (1.0 - p_full) * softmax(beta * t[:-1])
    return FluctuatingChannel.from_arrays(t, np.append(rest, p_full))


def channel_from_dict(spec):
    """Build a channel from its JSON form, see ``config.py`` for the schema."""
    if not isinstance(spec, dict):
        raise ConfigError("channel must be an object")
    if "levels" in spec:
        _reject_unknown(spec, {"levels"})
        if not isinstance(spec["levels"], list) or not all(isinstance(l, dict) for l in spec["levels"]):
            raise ConfigError("channel levels must be a list of objects")
        try:
            levels = [(float(lvl["t"]), float(lvl["p"])) for lvl in spec["levels"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"channel levels need numeric 't' and 'p': {exc}") from exc
        for lvl in spec["levels"]:
            _reject_unknown(lvl, {"t", "p"})
        return FluctuatingChannel(tuple(ChannelLevel(t, p) for t, p in levels))

    preset = spec.get("preset")
    if preset == "discrete":
        _reject_unknown(spec, {"preset"})
        return discrete_channel()
    if preset == "semicontinuous":
        _reject_unknown(spec, {"preset", "beta", "p_full", "n_levels", "ln_premix"})
        if "ln_premix" in spec:
            raise ConfigError("channel with 'ln_premix' must be calibrated before it is built")
        return envelope_exponential(float(spec.get("beta", 0.0)),
                                    float(spec.get("p_full", DEFAULT_P_FULL)),
                                    int(spec.get("n_levels", SEMICONTINUOUS_LEVELS)))
    raise ConfigError(f"unknown channel preset {preset!r}")


def channel_to_dict(channel):
    return {"levels": [{"t": lvl.transmittance, "p": lvl.probability} for lvl in channel.levels]}


def _reject_unknown(spec, allowed):
    unknown = set(spec) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown channel keys: {sorted(unknown)}")


# =============== MIXTURES ===============
def propagate(state, channel, mode=SIGNAL_MODE):
    """Send one arm of ``state`` through every level of ``channel``."""
    if not validate_physical(state):
        raise ChannelError("input state is not physical")
    components = tuple(
        (lvl.probability, apply_loss(state, mode, lvl.transmittance))
        for lvl in channel.levels if lvl.probability > 0
    )
    return MixtureState(components)


def pooled_cm(mixture):
    """Central first and second moments of the whole mixture."""
    w = mixture.weights
    means = np.array([s.mean for s in mixture.states])
    covs = np.array([s.cov for s in mixture.states])
    mean = w @ means
    second = np.einsum("k,kij->ij", w, covs + np.einsum("ki,kj->kij", means, means))
    cov = second - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


def upper_bound_ln(mixture):
    """Convexity bound log2(sum_i w_i ||rho_i^T||_1) on the mixture's total LN."""
    if mixture.n_modes != 2:
        raise DimensionError(f"upper bound needs two-mode components, got {mixture.n_modes}")
    norms = np.array([pt_trace_norm(s) for s in mixture.states])
    return float(np.log2(mixture.weights @ norms))


def max_component_ln(mixture, modes=(0, 1)):
    """Largest Gaussian LN among the components, evaluated on ``modes``."""
    return max(gaussian_log_negativity(partial_trace(s, modes)) for s in mixture.states)


def pooled_state(mixture):
    mean, cov = pooled_cm(mixture)
    return GaussianState(mixture.n_modes, mean, cov)
