"""Closed-form capacity, fidelity and output states of the teleportation channel.

All entropies are in bits. ``g(x) = (x+1) log2(x+1) - x log2 x`` is the
entropy of a thermal state with mean photon number ``x``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .channel import ChannelParams
from .errors import DomainError, TailMassExceeded
from .fock import (
    DensityMatrix,
    displacement_elements,
    poisson_tail,
    thermal_state,
    von_neumann_entropy,
)


@dataclass(frozen=True)
class CapacityPoint:
    nbar: float
    T: float | None
    s: float | None
    nbar_s: float
    capacity_bits: float
    fidelity: float


def g_entropy(x):
    if x < 0:
        raise DomainError(f"g is defined for x >= 0, got {x!r}")
    if x == 0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def output_entropy(nbar_s):
    """Entropy of the channel output for any coherent input."""
    return g_entropy(nbar_s)


def average_entropy(nbar, nbar_s):
    """Entropy of the average output under Gaussian modulation of mean ``nbar``."""
    return g_entropy(nbar + nbar_s)


def capacity(nbar, params):
    """Holevo capacity ``g(nbar + nbar_s) - g(nbar_s)`` under mean photon budget ``nbar``."""
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar!r}")
    return average_entropy(nbar, params.nbar_s) - output_entropy(params.nbar_s)


def channel_fidelity(params):
    """``<alpha|Lambda(|alpha><alpha|)|alpha> = 1 / (1 + nbar_s)``, the same for every alpha."""
    return 1.0 / (1.0 + params.nbar_s)


def capacity_point(nbar, params):
    return CapacityPoint(
        nbar=nbar,
        T=params.T,
        s=params.s,
        nbar_s=params.nbar_s,
        capacity_bits=capacity(nbar, params),
        fidelity=channel_fidelity(params),
    )


def analytic_output_state(alpha, params, cfg):
    """Displaced thermal state ``D(alpha) rho_th(nbar_s) D(alpha)^dagger``.

    Built directly from the thermal populations and exact displacement
    elements, without integrating over the noise.
    """
    alpha = complex(alpha)
    tail = poisson_tail(abs(alpha) ** 2, cfg.dim)
    if tail > cfg.tail_tol:
        raise TailMassExceeded(tail, cfg.tail_tol, cfg.dim)
    pops = np.real(np.diagonal(thermal_state(params.nbar_s, cfg).mat))
    D = displacement_elements(alpha, cfg.dim)
    out = (D * pops) @ D.conj().T
    lost = 1.0 - float(np.trace(out).real)
    if lost > cfg.tail_tol:
        raise TailMassExceeded(lost, cfg.tail_tol, cfg.dim)
    return DensityMatrix(out)


def holevo_quantity(ens):
    """``S(sum_i p_i rho_i) - sum_i p_i S(rho_i)`` for one ensemble (no maximization)."""
    avg = von_neumann_entropy(ens.average_state())
    return avg - sum(p * von_neumann_entropy(rho) for p, rho in ens.members)


__all__ = [
    "CapacityPoint",
    "ChannelParams",
    "analytic_output_state",
    "average_entropy",
    "capacity",
    "capacity_point",
    "channel_fidelity",
    "g_entropy",
    "holevo_quantity",
    "output_entropy",
]
