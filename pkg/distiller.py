"""Analytic distillation engine: tap, threshold heralding, Gaussification diagnostics.

Every component of the mixture is Gaussian, so keeping the shots whose tap
outcome X_T >= X_th truncates a multivariate normal along a single
direction. First and second moments of the kept ensemble follow in closed
form from the tail probability Q and the hazard function phi/Q.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcx, log_ndtr, logsumexp, softmax
from scipy.stats import entropy

from channel import MixtureState
from exceptions import (
    ConfigError,
    DegenerateSelectionError,
    DimensionError,
    DistillationError,
    UnsupportedInputError,
)
from gaussian_core import apply_beamsplitter, log_negativity_from_cov, tensor, vacuum

logger = logging.getLogger(__name__)

DEFAULT_REFLECTIVITY = 0.07
SUCCESS_FLOOR = 1e-300
ACTIVE_WEIGHT = 1e-6
MODE_B, MODE_TAP = 1, 2
TAP_X = 2 * MODE_TAP
SQRT2 = np.sqrt(2.0)
TAIL_FLOOR = np.finfo(float).smallest_subnormal


# =============== DOMAIN TYPES ===============
@dataclass(frozen=True)
class TapConfig:
    reflectivity: float = DEFAULT_REFLECTIVITY
    threshold_x: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.reflectivity < 1.0:
            raise ConfigError(f"tap reflectivity must lie in (0, 1), got {self.reflectivity}")

    @property
    def transmittance(self):
        return 1.0 - self.reflectivity


@dataclass(frozen=True, eq=False)
class DistilledEnsemble:
    threshold_x: float
    success_probability: float
    prior_weights: np.ndarray = field(repr=False)
    posterior_weights: np.ndarray
    per_component_pass: np.ndarray = field(repr=False)
    component_means: list = field(repr=False)
    component_second_moments: list = field(repr=False)
    pooled_mean: np.ndarray = field(repr=False)
    pooled_cov: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    success_probability: float
    gln: float
    posterior_weights: tuple
    error: str = None
    ensemble: DistilledEnsemble = field(default=None, repr=False, compare=False)

    @property
    def ok(self):
        return self.error is None


# =============== TAIL FUNCTIONS ===============
def _as_output(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def gaussian_tail(alpha):
    """Q(alpha) = P(Z >= alpha) for a standard normal Z.

    Stays inside (0, 1): beyond alpha ~ 38 the value is clamped to the smallest
    subnormal double. Use :func:`log_gaussian_tail` for far-tail arithmetic.
    """
    q = 0.5 * erfc(np.asarray(alpha, dtype=float) / SQRT2)
    return _as_output(np.maximum(q, TAIL_FLOOR))


def log_gaussian_tail(alpha):
    """log Q(alpha), accurate far into the tail where Q itself underflows."""
    return _as_output(log_ndtr(-np.asarray(alpha, dtype=float)))


def hazard(alpha):
    """Inverse Mills ratio phi(alpha)/Q(alpha), finite for any real alpha."""
    alpha = np.asarray(alpha, dtype=float)
    # erfcx overflows to inf far in the left tail, where the hazard is 0
    return _as_output(np.sqrt(2.0 / np.pi) / erfcx(alpha / SQRT2))


# =============== TAP AND HERALD ===============
def attach_vacuum_port(mixture):
    """Append an uncoupled vacuum mode to every component, modes become (A, B, Tap)."""
    if mixture.n_modes != 2:
        raise DimensionError(f"tap port needs a two-mode mixture, got {mixture.n_modes}")
    return MixtureState(tuple((w, tensor(s, vacuum(1))) for w, s in mixture.components))


def attach_tap(mixture, tap):
    """Split off ``tap.reflectivity`` of mode B into a vacuum tap port."""
    ported = attach_vacuum_port(mixture)
    components = tuple(
        (w, apply_beamsplitter(s, MODE_TAP, MODE_B, tap.transmittance))
        for w, s in ported.components
    )
    return MixtureState(components)


def herald(mixture3, threshold_x):
    """Keep the shots with X_Tap >= threshold_x and return the kept ensemble."""
    if mixture3.n_modes != 3:
        raise DimensionError(f"herald needs a three-mode mixture, got {mixture3.n_modes}")

    prior = mixture3.weights
    log_pass, means, seconds = [], [], []
    for state in mixture3.states:
        if abs(state.mean[TAP_X]) > 1e-12:
            raise UnsupportedInputError("tap quadrature must have zero mean")
        var_t = state.cov[TAP_X, TAP_X]
        sigma = np.sqrt(var_t)
        c = state.cov[:4, TAP_X]
        m = state.mean[:4]
        alpha = threshold_x / sigma
        lam = hazard(alpha)
        alpha_lam = alpha * lam if lam > 0 else 0.0

        cond = state.cov[:4, :4] - np.outer(c, c) / var_t
        mu = m + c / sigma * lam
        second = (cond + np.outer(m, m)
                  + (np.outer(m, c) + np.outer(c, m)) * lam / sigma
                  + np.outer(c, c) / var_t * (1.0 + alpha_lam))
        log_pass.append(log_gaussian_tail(alpha))
        means.append(mu)
        seconds.append(0.5 * (second + second.T))

    log_pass = np.array(log_pass)
    log_terms = np.log(prior) + log_pass
    log_success = logsumexp(log_terms)
    if not np.isfinite(log_success) or log_success < np.log(SUCCESS_FLOOR):
        raise DegenerateSelectionError(
            f"success probability below {SUCCESS_FLOOR:g} at threshold {threshold_x:g} SNU")
    posterior = softmax(log_terms)

    pooled_mean = posterior @ np.array(means)
    pooled_cov = np.einsum("k,kij->ij", posterior, np.array(seconds)) - np.outer(pooled_mean, pooled_mean)
    return DistilledEnsemble(
        threshold_x=float(threshold_x),
        success_probability=float(np.exp(log_success)),
        prior_weights=prior,
        posterior_weights=posterior,
        per_component_pass=np.exp(log_pass),
        component_means=means,
        component_second_moments=seconds,
        pooled_mean=pooled_mean,
        pooled_cov=0.5 * (pooled_cov + pooled_cov.T),
    )


def distilled_gln(ensemble):
    return log_negativity_from_cov(ensemble.pooled_cov)


def threshold_sweep(mixture3, thresholds):
    """Herald at every threshold (ascending); failed points come back with ``error`` set."""
    points = []
    for threshold in sorted(float(t) for t in thresholds):
        if not np.isfinite(threshold):
            raise ConfigError(f"thresholds must be finite, got {threshold}")
        try:
            ensemble = herald(mixture3, threshold)
            points.append(SweepPoint(threshold, ensemble.success_probability, distilled_gln(ensemble),
                                     tuple(ensemble.posterior_weights.tolist()), ensemble=ensemble))
        except DistillationError as exc:
            logger.warning("dropping threshold %.6g SNU: %s", threshold, exc)
            points.append(SweepPoint(threshold, 0.0, float("nan"), (), error=str(exc)))
    return points


# =============== DIAGNOSTICS ===============
def gaussification_metrics(ensemble):
    """Posterior weight entropy (bits) and the largest component-to-pool covariance distance."""
    weights = ensemble.posterior_weights
    weight_entropy = float(entropy(weights, base=2)) if len(weights) > 1 else 0.0
    pbar = ensemble.pooled_mean
    distance = 0.0
    for w, mu, second in zip(weights, ensemble.component_means, ensemble.component_second_moments):
        if w <= ACTIVE_WEIGHT:
            continue
        # second moments of the component about the pooled mean
        about_pool = second - np.outer(mu, pbar) - np.outer(pbar, mu) + np.outer(pbar, pbar)
        distance = max(distance, float(np.linalg.norm(about_pool - ensemble.pooled_cov, "fro")))
    return max(weight_entropy, 0.0), distance


def joint_quadrature_variances(cov):
    """Var(X_A + X_B) and Var(P_A - P_B); the two-mode vacuum gives (2, 2)."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4):
        raise DimensionError(f"expected a two-mode covariance, got {cov.shape}")
    var_x_sum = cov[0, 0] + cov[2, 2] + 2.0 * cov[0, 2]
    var_p_diff = cov[1, 1] + cov[3, 3] - 2.0 * cov[1, 3]
    return float(var_x_sum), float(var_p_diff)
