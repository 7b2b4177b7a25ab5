"""Covariance-matrix toolkit for multimode Gaussian states.

Conventions used throughout the project:

* shot-noise units, the vacuum has variance 1 in every quadrature;
* interleaved ordering ``(X1, P1, X2, P2, ...)``;
* the symplectic form is block diagonal with blocks ``[[0, 1], [-1, 0]]``.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from exceptions import ChannelError, DimensionError, InvalidMatrixError, UnphysicalStateError

logger = logging.getLogger(__name__)

PHYS_TOL = 1e-9
SYMMETRY_TOL = 1e-10


# =============== DOMAIN TYPES ===============
@dataclass(frozen=True)
class SymplecticEigenvalues:
    values: np.ndarray

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float))
        if values.size == 0 or np.any(values <= 0):
            raise InvalidMatrixError("symplectic eigenvalues must be positive")
        object.__setattr__(self, "values", values)

    @property
    def minimum(self):
        return float(self.values[0])

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of ``n_modes`` bosonic modes.

    The covariance is symmetrized on construction. Physicality is not
    enforced here so that :func:`validate_physical` can be asked about any
    candidate matrix; every operation in this module checks its output.
    """
    n_modes: int
    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.n_modes) < 1:
            raise DimensionError(f"n_modes must be positive, got {self.n_modes}")
        dim = 2 * int(self.n_modes)
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (dim,):
            raise DimensionError(f"mean must have length {dim}, got {mean.shape}")
        if cov.shape != (dim, dim):
            raise DimensionError(f"cov must be {dim}x{dim}, got {cov.shape}")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise InvalidMatrixError("mean and cov must be finite")
        cov = 0.5 * (cov + cov.T)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @cached_property
    def cholesky(self):
        """Lower-triangular factor of the covariance, cached per state."""
        try:
            return np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidMatrixError(f"covariance is not positive definite: {exc}") from exc

    def to_dict(self):
        return {
            "n_modes": self.n_modes,
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }


# =============== HELPERS ===============
def symplectic_form(n_modes):
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _mode_index(state, mode):
    if not 0 <= int(mode) < state.n_modes:
        raise DimensionError(f"mode {mode} out of range for {state.n_modes}-mode state")
    return int(mode)


def _checked(state):
    if not validate_physical(state):
        nu = symplectic_eigenvalues(state.cov).minimum
        raise UnphysicalStateError(f"state violates the uncertainty principle (nu_min={nu:.6g})")
    return state


def vacuum(n_modes):
    return GaussianState(n_modes, np.zeros(2 * n_modes), np.eye(2 * n_modes))


def tensor(first, second):
    """Direct sum of two states, modes of ``first`` come first."""
    dim_a, dim_b = 2 * first.n_modes, 2 * second.n_modes
    cov = np.zeros((dim_a + dim_b, dim_a + dim_b))
    cov[:dim_a, :dim_a] = first.cov
    cov[dim_a:, dim_a:] = second.cov
    return GaussianState(first.n_modes + second.n_modes,
                         np.concatenate([first.mean, second.mean]), cov)


# =============== SPECTRAL QUANTITIES ===============
def symplectic_eigenvalues(cov):
    """Moduli of the eigenvalues of ``i*Omega*cov``, each pair reported once."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise DimensionError(f"covariance must be 2n x 2n, got {cov.shape}")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if not np.allclose(cov, cov.T, rtol=0.0, atol=SYMMETRY_TOL * scale):
        raise InvalidMatrixError("covariance matrix is not symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidMatrixError("covariance matrix is not positive definite") from exc

    omega = symplectic_form(cov.shape[0] // 2)
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * omega @ cov)))
    # eigenvalues come in +/- pairs
    return SymplecticEigenvalues(moduli[::2])


def validate_physical(state):
    try:
        nu = symplectic_eigenvalues(state.cov)
    except InvalidMatrixError:
        return False
    return nu.minimum >= 1.0 - PHYS_TOL


def partial_transpose(cov):
    """Flip the sign of P on mode B of a two-mode covariance."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4):
        raise DimensionError(f"partial transposition needs a two-mode covariance, got {cov.shape}")
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    return flip @ cov @ flip


def log_negativity_from_cov(cov):
    """Gaussian logarithmic negativity in bits; negative for separable fits."""
    nu = symplectic_eigenvalues(partial_transpose(cov))
    return float(-np.log2(nu.minimum))


def gaussian_log_negativity(state):
    if state.n_modes != 2:
        raise DimensionError(f"log negativity needs two modes, got {state.n_modes}")
    return log_negativity_from_cov(state.cov)


def pt_trace_norm(state):
    """Trace norm of the partially transposed density operator."""
    if state.n_modes != 2:
        raise DimensionError(f"trace norm needs two modes, got {state.n_modes}")
    nu = symplectic_eigenvalues(partial_transpose(state.cov)).values
    return float(np.prod(np.maximum(1.0, 1.0 / nu)))


# =============== SYMPLECTIC OPERATIONS ===============
def apply_symplectic(state, S):
    S = np.asarray(S, dtype=float)
    return GaussianState(state.n_modes, S @ state.mean, S @ state.cov @ S.T)


def beamsplitter_matrix(n_modes, mode_a, mode_b, transmittance):
    """Symplectic matrix of a real beam splitter.

    ``mode_b`` is the transmitted signal and ``mode_a`` the second port:
    X_b' = sqrt(T) X_b - sqrt(1-T) X_a and X_a' = sqrt(T) X_a + sqrt(1-T) X_b,
    identically for P.
    """
    t = np.sqrt(transmittance)
    r = np.sqrt(1.0 - transmittance)
    S = np.eye(2 * n_modes)
    for q in (0, 1):
        a, b = 2 * mode_a + q, 2 * mode_b + q
        S[b, b], S[b, a] = t, -r
        S[a, a], S[a, b] = t, r
    return S


def apply_beamsplitter(state, mode_a, mode_b, transmittance):
    mode_a, mode_b = _mode_index(state, mode_a), _mode_index(state, mode_b)
    if mode_a == mode_b:
        raise DimensionError("beam splitter needs two distinct modes")
    if not 0.0 <= transmittance <= 1.0:
        raise ChannelError(f"transmittance must lie in [0, 1], got {transmittance}")
    S = beamsplitter_matrix(state.n_modes, mode_a, mode_b, transmittance)
    return _checked(apply_symplectic(state, S))


def apply_rotation(state, mode, theta):
    """Phase rotation of a single mode by ``theta`` radians."""
    mode = _mode_index(state, mode)
    c, s = np.cos(theta), np.sin(theta)
    S = np.eye(2 * state.n_modes)
    S[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = [[c, -s], [s, c]]
    return apply_symplectic(state, S)


def apply_loss(state, mode, eta):
    """Pure-loss channel with transmittance ``eta`` acting on one mode."""
    mode = _mode_index(state, mode)
    if not 0.0 <= eta <= 1.0:
        raise ChannelError(f"eta must lie in [0, 1], got {eta}")
    scale = np.ones(2 * state.n_modes)
    scale[2 * mode:2 * mode + 2] = np.sqrt(eta)
    cov = state.cov * np.outer(scale, scale)
    cov[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] += (1.0 - eta) * np.eye(2)
    return _checked(GaussianState(state.n_modes, state.mean * scale, cov))


def partial_trace(state, keep):
    """Reduced state on the modes listed in ``keep`` (order preserved)."""
    keep = [int(m) for m in keep]
    if not keep:
        raise DimensionError("partial trace needs at least one mode to keep")
    if len(set(keep)) != len(keep):
        raise DimensionError(f"duplicate modes in keep set {keep}")
    for m in keep:
        _mode_index(state, m)
    idx = np.array([[2 * m, 2 * m + 1] for m in keep]).reshape(-1)
    return GaussianState(len(keep), state.mean[idx], state.cov[np.ix_(idx, idx)])


# =============== STATE PREPARATION ===============
def make_kerr_entangled(v_squeezed, v_antisqueezed):
    """Two-mode entangled state from an X- and a P-squeezed beam on a 50/50 splitter.

    Input 1 carries variances (V_s, V_a), input 2 carries (V_a, V_s).
    """
    if not 0.0 < v_squeezed <= 1.0:
        raise UnphysicalStateError(f"V_s must lie in (0, 1], got {v_squeezed}")
    if v_antisqueezed < 1.0 or v_squeezed * v_antisqueezed < 1.0 - PHYS_TOL:
        raise UnphysicalStateError(
            f"V_s * V_a must be at least 1, got {v_squeezed} * {v_antisqueezed}")
    inputs = GaussianState(2, np.zeros(4),
                           np.diag([v_squeezed, v_antisqueezed, v_antisqueezed, v_squeezed]))
    state = apply_beamsplitter(inputs, 1, 0, 0.5)
    logger.debug("entangled source V_s=%.6g V_a=%.6g", v_squeezed, v_antisqueezed)
    return state
