"""The teleportation channel as a Gaussian mixture of displacements.

The channel maps ``rho`` to ``int d^2 beta q(beta) D(beta) rho D(beta)^dagger``
with ``q`` a circular complex Gaussian of variance ``nbar_s``. The integral is
evaluated numerically, either by deterministic quadrature over the complex
plane or by seeded Monte-Carlo sampling; no closed-form output state is used
anywhere in this module.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.special import roots_laguerre

from .errors import ConvergenceFailure, DimMismatch, DomainError, TailMassExceeded
from .fock import (
    DensityMatrix,
    TruncationConfig,
    coherent_amplitudes,
    displacement_elements,
)

SELF_CONVERGENCE_TOL = 1e-8
MC_BLOCK_SIZE = 1000
# Quadrature nodes with smaller weight contribute below double precision.
NEGLIGIBLE_WEIGHT = 1e-30
# Eigen-components of the input below this weight are dropped.
EIGEN_CUTOFF = 1e-16
AMPLITUDE_CUTOFF = 1e-17


def noise_variance(T, s):
    """Mean photon number added by the channel, ``2 (1 - T (1 - exp(-2 s)))``."""
    if not 0.0 <= T <= 1.0:
        raise DomainError(f"transmission T must lie in [0, 1], got {T!r}")
    if s < 0:
        raise DomainError(f"squeezing s must be >= 0, got {s!r}")
    return 2.0 * (1.0 - T * (1.0 - math.exp(-2.0 * s)))


@dataclass(frozen=True)
class ChannelParams:
    """Channel parameters.

    Either give ``T`` and ``s`` (the noise variance is derived from them) or
    give ``nbar_s`` directly.
    """

    T: float | None = None
    s: float | None = None
    nbar_s: float | None = None

    def __post_init__(self):
        if (self.T is None) != (self.s is None):
            raise DomainError("T and s must be given together")
        if self.T is not None:
            derived = noise_variance(self.T, self.s)
            if self.nbar_s is None:
                object.__setattr__(self, "nbar_s", derived)
            elif abs(self.nbar_s - derived) > 1e-12:
                raise DomainError(
                    f"nbar_s={self.nbar_s!r} inconsistent with T={self.T!r}, s={self.s!r}"
                )
        elif self.nbar_s is None:
            raise DomainError("need either (T, s) or nbar_s")
        if not self.nbar_s >= 0:
            raise DomainError(f"nbar_s must be >= 0, got {self.nbar_s!r}")
        object.__setattr__(self, "nbar_s", float(self.nbar_s))

    @classmethod
    def from_ts(cls, T, s):
        return cls(T=float(T), s=float(s))

    @classmethod
    def from_noise(cls, nbar_s):
        return cls(nbar_s=float(nbar_s))


@dataclass(frozen=True)
class IntegrationScheme:
    """How integrals over the complex plane are discretized.

    ``radial_quadrature`` uses Gauss-Laguerre nodes in ``|beta|^2 / variance``
    times a uniform angular grid; ``cartesian_quadrature`` uses tensor
    Gauss-Hermite nodes in the real and imaginary parts; ``monte_carlo``
    draws ``samples`` seeded Gaussian displacements. With ``adaptive`` set,
    quadrature node counts are doubled until the result changes by less than
    ``1e-8`` entrywise, up to ``max_nodes`` per axis.
    """

    kind: str = "radial_quadrature"
    radial_nodes: int = 24
    angular_nodes: int = 24
    samples: int = 100_000
    seed: int = 0
    adaptive: bool = False
    max_nodes: int = 384

    KINDS = ("radial_quadrature", "cartesian_quadrature", "monte_carlo")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown integration scheme {self.kind!r}")
        if self.radial_nodes < 4 or self.angular_nodes < 4:
            raise DomainError("quadrature node counts must be >= 4")
        if self.kind == "monte_carlo" and self.samples < MC_BLOCK_SIZE:
            raise DomainError(f"Monte-Carlo needs at least {MC_BLOCK_SIZE} samples")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def refined(self):
        return replace(self, radial_nodes=2 * self.radial_nodes, angular_nodes=2 * self.angular_nodes)

    def nodes(self, variance):
        """Nodes and weights for the circular Gaussian of the given variance."""
        if self.kind == "radial_quadrature":
            radii, rw, thetas = radial_rule(variance, self.radial_nodes, self.angular_nodes)
            betas = (radii[:, None] * np.exp(1j * thetas)[None, :]).ravel()
            weights = np.repeat(rw / len(thetas), len(thetas))
            return betas, weights
        if self.kind == "cartesian_quadrature":
            u, w = np.polynomial.hermite.hermgauss(self.radial_nodes)
            scale = math.sqrt(variance)
            betas = scale * (u[:, None] + 1j * u[None, :]).ravel()
            weights = np.outer(w, w).ravel() / math.pi
            keep = weights > NEGLIGIBLE_WEIGHT
            return betas[keep], weights[keep]
        raise DomainError("Monte-Carlo schemes have no quadrature nodes")


DEFAULT_SCHEME = IntegrationScheme(adaptive=True)
ENSEMBLE_SCHEME = IntegrationScheme(radial_nodes=16, angular_nodes=16)
MEMBER_SCHEME = IntegrationScheme(radial_nodes=48, angular_nodes=48)


def radial_rule(variance, radial_nodes, angular_nodes):
    """Radii, radial weights and angles for ``int d^2 beta q(beta) f(beta)``.

    Substituting ``t = |beta|^2 / variance`` turns the radial integral into
    ``int_0^inf e^{-t} ... dt``; nodes with negligible weight are dropped.
    """
    t, w = roots_laguerre(radial_nodes)
    keep = w > NEGLIGIBLE_WEIGHT
    thetas = 2.0 * np.pi * np.arange(angular_nodes) / angular_nodes
    return np.sqrt(variance * t[keep]), w[keep], thetas


def gaussian_weight(beta, nbar_s):
    """Noise density ``exp(-|beta|^2 / nbar_s) / (pi nbar_s)``."""
    if not nbar_s > 0:
        raise DomainError(f"nbar_s must be > 0 to evaluate the density, got {nbar_s!r}")
    return float(np.exp(-abs(beta) ** 2 / nbar_s) / (np.pi * nbar_s))


def sample_displacements(variance, samples, seed, block=0):
    """Draw ``samples`` displacements from the circular Gaussian.

    Samples are produced in blocks of ``MC_BLOCK_SIZE``; block ``b`` uses its
    own Philox stream spawned from ``(seed, b)``, so any contiguous range of
    blocks can be regenerated independently. ``block`` is the index of the
    first block.
    """
    sigma = math.sqrt(variance / 2.0)
    chunks = []
    remaining = samples
    b = block
    while remaining > 0:
        size = min(MC_BLOCK_SIZE, remaining)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(b,))))
        xy = rng.normal(0.0, sigma, size=(size, 2))
        chunks.append(xy[:, 0] + 1j * xy[:, 1])
        remaining -= size
        b += 1
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=complex)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted collection of states ``{(p_i, rho_i)}``.

    ``inputs`` optionally records the coherent amplitudes that were sent
    through the channel to produce each member.
    """

    members: tuple
    inputs: tuple | None = None

    def __post_init__(self):
        members = tuple((float(p), rho) for p, rho in self.members)
        if not members:
            raise DomainError("ensemble must have at least one member")
        probs = np.array([p for p, _ in members])
        if np.any(probs < 0):
            raise DomainError("ensemble probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise DomainError(f"ensemble probabilities sum to {probs.sum()!r}")
        if self.inputs is not None and len(self.inputs) != len(members):
            raise DomainError("inputs must match members one to one")
        object.__setattr__(self, "members", members)

    @property
    def probabilities(self):
        return np.array([p for p, _ in self.members])

    def average_state(self):
        mat = sum(p * rho.mat for p, rho in self.members)
        return DensityMatrix(mat)

    def input_mean_photon(self):
        if self.inputs is None:
            raise DomainError("ensemble does not record its inputs")
        return float(self.probabilities @ (np.abs(np.array(self.inputs)) ** 2))


def _factorize(rho):
    """Vectors ``V`` with ``rho ~= V V^dagger`` and the number of rows in use."""
    herm = 0.5 * (rho.mat + rho.mat.conj().T)
    lam, vecs = np.linalg.eigh(herm)
    keep = lam > EIGEN_CUTOFF
    V = vecs[:, keep] * np.sqrt(lam[keep])
    rows = np.nonzero(np.max(np.abs(V), axis=1, initial=0.0) > AMPLITUDE_CUTOFF)[0]
    support = int(rows[-1]) + 1 if rows.size else 1
    return V[:support], support


def _conjugate_radial(V, dim, variance, scheme):
    ncols, rank = V.shape
    radii, rw, thetas = radial_rule(variance, scheme.radial_nodes, scheme.angular_nodes)
    n_theta = len(thetas)
    rot_in = np.exp(-1j * np.outer(np.arange(ncols), thetas))
    rot_out = np.exp(1j * np.outer(np.arange(dim), thetas))
    # D(r e^{i theta}) = R(theta) D(r) R(theta)^dagger with R diagonal.
    U = (V[:, :, None] * rot_in[:, None, :]).reshape(ncols, rank * n_theta)
    out = np.zeros((dim, dim), dtype=complex)
    for r, w in zip(radii, rw):
        D = displacement_elements(r, dim, ncols).real
        X = (D @ U).reshape(dim, rank, n_theta) * rot_out[:, None, :]
        X = X.reshape(dim, rank * n_theta)
        out += (w / n_theta) * (X @ X.conj().T)
    return out


def _conjugate_batch(V, dim, betas, weights, chunk=64):
    """``sum_k w_k D(beta_k) V V^dagger D(beta_k)^dagger``, accumulated in order."""
    ncols = V.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for start in range(0, len(betas), chunk):
        b = betas[start : start + chunk]
        w = weights[start : start + chunk]
        X = displacement_elements(b, dim, ncols) @ V
        X = X * np.sqrt(w)[:, None, None]
        X = np.moveaxis(X, 0, 1).reshape(dim, -1)
        out += X @ X.conj().T
    return out


def _conjugate_quadrature(V, dim, variance, scheme):
    if scheme.kind == "radial_quadrature":
        return _conjugate_radial(V, dim, variance, scheme)
    betas, weights = scheme.nodes(variance)
    return _conjugate_batch(V, dim, betas, weights)


def _block_moments(block_sums, block_sizes):
    total = block_sizes.sum()
    mean = block_sums.sum(axis=0) / total
    k = len(block_sizes)
    if k < 2:
        return mean, np.full(mean.shape, np.inf)
    block_means = block_sums / block_sizes[:, None, None]
    dev = (block_means - mean) * block_sizes[:, None, None]
    var = (np.abs(dev) ** 2).sum(axis=0) / total**2 * k / (k - 1)
    return mean, np.sqrt(var)


def _conjugate_monte_carlo(V, dim, variance, scheme):
    n_blocks = math.ceil(scheme.samples / MC_BLOCK_SIZE)
    sums = np.zeros((n_blocks, dim, dim), dtype=complex)
    sizes = np.zeros(n_blocks)
    for b in range(n_blocks):
        size = min(MC_BLOCK_SIZE, scheme.samples - b * MC_BLOCK_SIZE)
        betas = sample_displacements(variance, size, scheme.seed, block=b)
        sums[b] = _conjugate_batch(V, dim, betas, np.ones(size))
        sizes[b] = size
    return _block_moments(sums, sizes)


def _check_dims(rho, cfg):
    if cfg is None:
        return TruncationConfig(rho.dim)
    if cfg.dim != rho.dim:
        raise DimMismatch(f"state has dim {rho.dim}, config has dim {cfg.dim}")
    return cfg


def _refine_until_converged(compute, scheme):
    """Evaluate ``compute(scheme)``, doubling nodes when the scheme is adaptive."""
    current = compute(scheme)
    if not scheme.adaptive or scheme.kind == "monte_carlo":
        return current, scheme
    while True:
        finer = scheme.refined()
        if max(finer.radial_nodes, finer.angular_nodes) > scheme.max_nodes:
            raise ConvergenceFailure(
                f"quadrature did not self-converge below {SELF_CONVERGENCE_TOL} "
                f"within {scheme.max_nodes} nodes per axis"
            )
        refined = compute(finer)
        change = np.max(np.abs(refined - current))
        scheme, current = finer, refined
        if change < SELF_CONVERGENCE_TOL:
            return current, scheme


def _check_lost_mass(trace_in, out, cfg):
    lost = trace_in - float(np.trace(out).real)
    if lost > cfg.tail_tol:
        raise TailMassExceeded(lost, cfg.tail_tol, cfg.dim)


def apply_channel(rho, params, scheme=None, cfg=None):
    """Push ``rho`` through the channel by numerical integration.

    The input is factorized as ``V V^dagger`` (eigen-decomposition) so each
    node costs one displaced block of vectors instead of a full conjugation.
    The default scheme is adaptive radial quadrature starting at 24 x 24
    nodes. Raises :class:`TailMassExceeded` when more than ``cfg.tail_tol``
    of probability leaks above the truncation.
    """
    cfg = _check_dims(rho, cfg)
    if params.nbar_s == 0:
        return rho
    scheme = DEFAULT_SCHEME if scheme is None else scheme
    V, _ = _factorize(rho)
    if scheme.kind == "monte_carlo":
        out, _ = _conjugate_monte_carlo(V, cfg.dim, params.nbar_s, scheme)
    else:
        out, _ = _refine_until_converged(
            lambda sch: _conjugate_quadrature(V, cfg.dim, params.nbar_s, sch), scheme
        )
    _check_lost_mass(rho.trace, out, cfg)
    return DensityMatrix(out)


def monte_carlo_channel(rho, params, scheme, cfg=None):
    """Monte-Carlo channel output and its entrywise standard error.

    The standard error comes from the scatter of per-block means.
    """
    cfg = _check_dims(rho, cfg)
    if scheme.kind != "monte_carlo":
        raise DomainError("monte_carlo_channel needs a monte_carlo scheme")
    if params.nbar_s == 0:
        return rho, np.zeros((cfg.dim, cfg.dim))
    V, _ = _factorize(rho)
    out, stderr = _conjugate_monte_carlo(V, cfg.dim, params.nbar_s, scheme)
    return DensityMatrix(out), stderr


def coherent_mixture(center, variance, scheme, dim):
    """``int d^2 beta q(beta) |center + beta><center + beta|`` as a matrix.

    ``q`` has the given variance. This is the channel output for a coherent
    input, using ``D(beta)|alpha> = exp(i Im(beta alpha*)) |alpha + beta>``
    so each node is a single coherent vector.
    """
    if variance == 0:
        v = coherent_amplitudes(center, dim)
        return v @ v.conj().T
    if scheme.kind == "monte_carlo":
        n_blocks = math.ceil(scheme.samples / MC_BLOCK_SIZE)
        out = np.zeros((dim, dim), dtype=complex)
        for b in range(n_blocks):
            size = min(MC_BLOCK_SIZE, scheme.samples - b * MC_BLOCK_SIZE)
            W = coherent_amplitudes(center + sample_displacements(variance, size, scheme.seed, block=b), dim)
            out += W @ W.conj().T
        return out / scheme.samples

    def compute(sch):
        betas, weights = sch.nodes(variance)
        W = coherent_amplitudes(center + betas, dim) * np.sqrt(weights)
        return W @ W.conj().T

    out, _ = _refine_until_converged(compute, scheme)
    return out


def ensemble_average_state(nbar, params, scheme=None, cfg=None):
    """Average channel output over Gaussian coherent modulation of mean ``nbar``.

    Modulation and noise compose into one circular Gaussian of variance
    ``nbar + nbar_s``, so the double integral is evaluated as a single
    mixture of displaced vacua.
    """
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar!r}")
    variance = nbar + params.nbar_s
    cfg = TruncationConfig.for_mean(variance) if cfg is None else cfg
    scheme = DEFAULT_SCHEME if scheme is None else scheme
    out = coherent_mixture(0.0, variance, scheme, cfg.dim)
    _check_lost_mass(1.0, out, cfg)
    return DensityMatrix(out)


def _rotate(mat, theta):
    ph = np.exp(1j * theta * np.arange(mat.shape[0]))
    return mat * ph[:, None] * ph.conj()[None, :]


def discretized_gaussian_ensemble(nbar, params, scheme=None, cfg=None, channel_scheme=None):
    """Quadrature discretization of Gaussian coherent modulation, through the channel.

    Members are ``(w_k, Lambda(|alpha_k><alpha_k|))`` at the nodes ``alpha_k``
    of ``scheme`` for a circular Gaussian of variance ``nbar``; weights are
    renormalized to sum to one. ``channel_scheme`` discretizes the channel
    integral inside each member.

    For radial schemes, members on the same ring are obtained by rotating
    the real-axis member with ``exp(i theta a^dagger a)``: the noise is
    isotropic, so the channel commutes with phase rotations.
    """
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar!r}")
    scheme = ENSEMBLE_SCHEME if scheme is None else scheme
    channel_scheme = MEMBER_SCHEME if channel_scheme is None else channel_scheme
    cfg = TruncationConfig.for_mean(nbar + params.nbar_s) if cfg is None else cfg
    if scheme.kind == "monte_carlo":
        raise DomainError("discretized ensembles need a quadrature scheme")
    ns = params.nbar_s

    if nbar == 0:
        alphas, weights = np.zeros(1, dtype=complex), np.ones(1)
        mats = [coherent_mixture(0.0, ns, channel_scheme, cfg.dim)]
    elif scheme.kind == "radial_quadrature":
        radii, rw, thetas = radial_rule(nbar, scheme.radial_nodes, scheme.angular_nodes)
        alphas = (radii[:, None] * np.exp(1j * thetas)[None, :]).ravel()
        weights = np.repeat(rw / len(thetas), len(thetas))
        mats = []
        for r in radii:
            base = coherent_mixture(r, ns, channel_scheme, cfg.dim)
            mats.extend(_rotate(base, th) for th in thetas)
    else:
        alphas, weights = scheme.nodes(nbar)
        mats = [coherent_mixture(a, ns, channel_scheme, cfg.dim) for a in alphas]

    weights = weights / weights.sum()
    lost = sum(w * (1.0 - np.trace(m).real) for w, m in zip(weights, mats))
    if lost > cfg.tail_tol:
        raise TailMassExceeded(float(lost), cfg.tail_tol, cfg.dim)
    members = tuple((w, DensityMatrix(m)) for w, m in zip(weights, mats))
    return Ensemble(members, inputs=tuple(complex(a) for a in alphas))
