"""Truncated single-mode Fock space: states, operators, entropy and overlaps.

Everything here works on the number basis ``|0>, ..., |dim-1>``. Matrix
elements are the exact infinite-dimensional ones restricted to the retained
block; nothing is renormalized after truncation, so the missing probability
mass stays visible as a trace deficit.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammainc, gammaln

from .errors import DimMismatch, DomainError, NotHermitian, TailMassExceeded

DEFAULT_TAIL_TOL = 1e-10
MIN_DIM = 32

HERMITIAN_TOL = 1e-12
NEGATIVE_EIG_TOL = 1e-10
EIGENVALUE_FLOOR = 1e-15


def _readonly(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TruncationConfig:
    """Number of retained Fock levels and the admissible tail mass above them."""

    dim: int
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"dim must be an integer >= 2, got {self.dim!r}")
        if not 0.0 <= self.tail_tol < 1.0:
            raise DomainError(f"tail_tol must lie in [0, 1), got {self.tail_tol!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def for_mean(cls, mean_photons, tail_tol=DEFAULT_TAIL_TOL, minimum=MIN_DIM):
        """Pick a dimension large enough for states with the given mean photon number.

        Uses ``max(minimum, 8 * (mean + 1))`` and, because geometric tails
        decay slowly once the mean exceeds one, also the level at which a
        thermal distribution of that mean falls below ``tail_tol``. The
        result is rounded up to a multiple of 8.
        """
        if mean_photons < 0:
            raise DomainError(f"mean photon number must be >= 0, got {mean_photons!r}")
        dim = max(minimum, math.ceil(8 * (mean_photons + 1)))
        if mean_photons > 0 and tail_tol > 0:
            ratio = mean_photons / (1.0 + mean_photons)
            dim = max(dim, math.ceil(math.log(tail_tol) / math.log(ratio)))
        return cls(dim=8 * math.ceil(dim / 8), tail_tol=tail_tol)


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure state given by its amplitudes in the number basis."""

    amps: np.ndarray

    def __post_init__(self):
        amps = _readonly(self.amps)
        if amps.ndim != 1:
            raise DomainError("FockState amplitudes must be a 1-D array")
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self):
        return self.amps.shape[0]

    @property
    def norm_sq(self):
        return float(np.vdot(self.amps, self.amps).real)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix in the truncated number basis.

    Construction only checks the shape; call :meth:`validate` to check the
    Hermiticity, positivity and trace invariants.
    """

    mat: np.ndarray

    def __post_init__(self):
        mat = _readonly(self.mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DomainError(f"density matrix must be square, got shape {mat.shape}")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_state(cls, psi):
        """Projector ``|psi><psi|``."""
        return cls(np.outer(psi.amps, psi.amps.conj()))

    @property
    def dim(self):
        return self.mat.shape[0]

    @property
    def trace(self):
        return float(np.trace(self.mat).real)

    def hermitian_error(self):
        return float(np.max(np.abs(self.mat - self.mat.conj().T)))

    def eigenvalues(self):
        """Eigenvalues of the Hermitian part, in descending order."""
        herm = 0.5 * (self.mat + self.mat.conj().T)
        return np.linalg.eigvalsh(herm)[::-1]

    def validate(self, tail_tol=DEFAULT_TAIL_TOL):
        err = self.hermitian_error()
        if err > HERMITIAN_TOL:
            raise NotHermitian(f"max |rho - rho^dagger| = {err:.3e}")
        lowest = self.eigenvalues()[-1]
        if lowest < -NEGATIVE_EIG_TOL:
            raise DomainError(f"density matrix has eigenvalue {lowest:.3e} < 0")
        deficit = 1.0 - self.trace
        if deficit > tail_tol:
            raise TailMassExceeded(deficit, tail_tol, self.dim)
        if deficit < -tail_tol:
            raise DomainError(f"trace exceeds 1 by {-deficit:.3e}")
        return self


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    mat: np.ndarray
    kind: str = "general"

    KINDS = ("annihilation", "creation", "number", "displacement", "general")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "mat", _readonly(self.mat))

    @property
    def dim(self):
        return self.mat.shape[0]


def ladder_operators(cfg):
    """Return ``(a, a_dagger)`` with ``a[n-1, n] = sqrt(n)``."""
    n = np.arange(1, cfg.dim)
    a = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    a[n - 1, n] = np.sqrt(n)
    return OperatorMatrix(a, "annihilation"), OperatorMatrix(a.conj().T, "creation")


def number_operator(cfg):
    return OperatorMatrix(np.diag(np.arange(cfg.dim, dtype=complex)), "number")


def poisson_tail(mean, dim):
    """Probability that a Poisson variable of the given mean is ``>= dim``."""
    if mean == 0:
        return 0.0
    return float(gammainc(dim, mean))


def coherent_amplitudes(alphas, dim):
    """Number-basis amplitudes of coherent states, one column per alpha.

    No tail check is made: the retained entries are exact whatever the
    truncation.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    n = np.arange(dim)[:, None]
    nonzero = alphas != 0
    log_alpha = np.log(np.where(nonzero, alphas, 1.0))
    with np.errstate(invalid="ignore"):
        log_amp = -0.5 * np.abs(alphas) ** 2 + n * log_alpha - 0.5 * gammaln(n + 1)
    amps = np.exp(log_amp)
    amps[:, ~nonzero] = 0.0
    amps[0, ~nonzero] = 1.0
    return amps


def coherent_state(alpha, cfg):
    """Coherent state ``|alpha>`` truncated to ``cfg.dim`` levels."""
    alpha = complex(alpha)
    tail = poisson_tail(abs(alpha) ** 2, cfg.dim)
    if tail > cfg.tail_tol:
        raise TailMassExceeded(tail, cfg.tail_tol, cfg.dim)
    return FockState(coherent_amplitudes(alpha, cfg.dim)[:, 0])


def displacement_elements(betas, dim, ncols=None):
    """Exact matrix elements ``<m|D(beta)|n>`` for ``m < dim``, ``n < ncols``.

    Uses the associated-Laguerre closed form with log-factorial scaling.
    ``betas`` may be a scalar (returns a 2-D array) or a 1-D array (returns
    a stack of shape ``(len(betas), dim, ncols)``).
    """
    scalar = np.ndim(betas) == 0
    betas = np.atleast_1d(np.asarray(betas, dtype=complex))
    ncols = dim if ncols is None else ncols

    m = np.arange(dim)[:, None]
    n = np.arange(ncols)[None, :]
    low = np.minimum(m, n)
    k = np.abs(m - n)
    log_fact_ratio = 0.5 * (gammaln(low + 1) - gammaln(low + k + 1))
    sign_upper = np.where(m < n, (-1.0) ** k, 1.0)

    b = betas[:, None, None]
    r = np.abs(b)
    x = r**2
    zero = (r == 0)[:, 0, 0]
    r_safe = np.where(r == 0, 1.0, r)
    lag = eval_genlaguerre(low, k, x)
    with np.errstate(divide="ignore"):
        log_mag = np.log(np.abs(lag)) + log_fact_ratio + k * np.log(r_safe) - 0.5 * x
    phase = np.exp(1j * (m - n) * np.angle(b)) * sign_upper
    out = np.sign(lag) * np.exp(log_mag) * phase
    if zero.any():
        out[zero] = np.eye(dim, ncols)
    return out[0] if scalar else out


def displacement_matrix(beta, cfg, method="laguerre"):
    """Matrix of ``D(beta) = exp(beta a^dagger - beta* a)`` in the number basis.

    ``method="laguerre"`` gives the exact elements of the infinite operator
    restricted to the block. ``method="expm"`` exponentiates the truncated
    generator instead; it agrees with the exact elements only away from the
    truncation edge.
    """
    beta = complex(beta)
    tail = poisson_tail(abs(beta) ** 2, cfg.dim)
    if tail > cfg.tail_tol:
        raise TailMassExceeded(tail, cfg.tail_tol, cfg.dim)
    if method == "laguerre":
        mat = displacement_elements(beta, cfg.dim)
    elif method == "expm":
        a, ad = ladder_operators(cfg)
        mat = expm(beta * ad.mat - beta.conjugate() * a.mat)
    else:
        raise DomainError(f"unknown displacement method {method!r}")
    return OperatorMatrix(mat, "displacement")


def thermal_state(nbar, cfg):
    """Thermal state with populations ``nbar^n / (1 + nbar)^(n + 1)``.

    The populations are not renormalized; the truncated tail
    ``(nbar / (1 + nbar))^dim`` must not exceed ``cfg.tail_tol``.
    """
    if nbar < 0:
        raise DomainError(f"mean photon number must be >= 0, got {nbar!r}")
    n = np.arange(cfg.dim)
    if nbar == 0:
        return DensityMatrix(np.diag((n == 0).astype(float)))
    ratio = nbar / (1.0 + nbar)
    tail = ratio**cfg.dim
    if tail > cfg.tail_tol:
        raise TailMassExceeded(tail, cfg.tail_tol, cfg.dim)
    return DensityMatrix(np.diag(ratio**n / (1.0 + nbar)))


def von_neumann_entropy(rho):
    """Entropy ``-Tr(rho log2 rho)`` in bits."""
    err = rho.hermitian_error()
    if err > HERMITIAN_TOL:
        raise NotHermitian(f"max |rho - rho^dagger| = {err:.3e}")
    lam = rho.eigenvalues()
    lam = lam[lam >= EIGENVALUE_FLOOR]
    return max(0.0, float(-np.sum(lam * np.log2(lam))))


def overlap(psi, rho):
    """``<psi|rho|psi>`` as a real number."""
    if psi.dim != rho.dim:
        raise DimMismatch(f"state has dim {psi.dim}, density matrix has dim {rho.dim}")
    value = np.vdot(psi.amps, rho.mat @ psi.amps)
    if abs(value.imag) > 1e-10:
        raise NotHermitian(f"overlap has imaginary part {value.imag:.3e}")
    return float(value.real)


def mean_photon(rho):
    """``Tr(rho a^dagger a)``."""
    return float(np.real(np.diagonal(rho.mat) @ np.arange(rho.dim)))
