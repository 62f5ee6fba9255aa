"""Probe-state constructors and the mean-photon resource matching rule."""
import logging
from enum import Enum
from typing import TYPE_CHECKING, List, Tuple

import numpy as np
from scipy import optimize

from ecs_metrology.core.exceptions import CutoffTooSmall, OddN, TruncationOverflow, ValidationException
from ecs_metrology.quantum.fock import (
    DEFAULT_CUTOFF,
    TAIL_TOLERANCE,
    Cutoff,
    FockVector,
    PureState2M,
    coherent_amplitudes,
    coherent_tail_mass,
    coherent_vector,
    fidelity,
    number_operator,
    observable_moments,
    product_state,
)

if TYPE_CHECKING:
    from ecs_metrology.models.schemas import ProbeSpec

logger = logging.getLogger(__name__)

RESOURCE_TOLERANCE = 1e-10


class ProbeKind(str, Enum):
    NOON = "NOON"
    BAT = "BAT"
    ECS = "ECS"
    SCS = "SCS"
    UNCORRELATED = "UNCORRELATED"


def ecs_normalizer(alpha: float) -> float:
    """1 / sqrt(2 (1 + e^{-|alpha|^2}))"""
    return 1.0 / np.sqrt(2.0 * (1.0 + np.exp(-abs(alpha) ** 2)))


def scs_normalizer(alpha: float) -> float:
    """1 / sqrt(2 (1 + e^{-2 |alpha|^2}))"""
    return 1.0 / np.sqrt(2.0 * (1.0 + np.exp(-2.0 * abs(alpha) ** 2)))


def _require_level(n: int, cutoff: Cutoff) -> None:
    if n > cutoff.max_occupation:
        raise CutoffTooSmall(f"Occupation {n} needs a cutoff of at least {n + 1}, got {cutoff.dim}")


def make_noon(N: int, cutoff: Cutoff = DEFAULT_CUTOFF) -> PureState2M:
    """(|N,0> + |0,N>) / sqrt(2)"""
    if N < 1:
        raise ValidationException(f"NOON states need N >= 1, got {N}")
    _require_level(N, cutoff)
    amplitudes = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    amplitudes[N, 0] = amplitudes[0, N] = 1.0 / np.sqrt(2.0)
    return PureState2M(amplitudes, cutoff)


def make_bat(N: int, cutoff: Cutoff = DEFAULT_CUTOFF) -> PureState2M:
    """Twin-Fock input |N/2, N/2> sent through the 50:50 beam splitter."""
    # Local import: channels builds on this module
    from ecs_metrology.quantum.channels import beam_splitter_5050

    if N < 2 or N % 2:
        raise OddN(f"BAT states need an even N >= 2, got {N}")
    _require_level(N, cutoff)
    amplitudes = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    amplitudes[N // 2, N // 2] = 1.0
    return beam_splitter_5050(PureState2M(amplitudes, cutoff))


def ecs_tail_mass(alpha: float, cutoff: Cutoff) -> float:
    """Probability the truncation discards from the ECS (both rays)."""
    return 2.0 * ecs_normalizer(alpha) ** 2 * coherent_tail_mass(alpha, cutoff.dim)


def two_ray_amplitudes(ray_one: np.ndarray, ray_two: np.ndarray) -> np.ndarray:
    """|ray_one>|0> + |0>|ray_two> on the amplitude grid (unnormalized)."""
    dim = ray_one.shape[0]
    amplitudes = np.zeros((dim, dim), dtype=complex)
    amplitudes[:, 0] += ray_one
    amplitudes[0, :] += ray_two
    return amplitudes


def make_ecs(
    alpha: float,
    cutoff: Cutoff = DEFAULT_CUTOFF,
    allow_truncation: bool = False,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> PureState2M:
    """N_alpha (|alpha>|0> + |0>|alpha>), renormalized on the truncated space."""
    if alpha < 0:
        raise ValidationException(f"ECS amplitude must be >= 0, got {alpha}")
    tail = ecs_tail_mass(alpha, cutoff)
    if tail >= tail_tolerance and not allow_truncation:
        raise TruncationOverflow(f"ECS alpha={alpha} loses {tail:.3e} probability at cutoff {cutoff.dim}")
    ray = coherent_amplitudes(alpha, cutoff.dim)
    amplitudes = two_ray_amplitudes(ray, ray)
    amplitudes /= np.linalg.norm(amplitudes)
    return PureState2M(amplitudes, cutoff, tail)


def make_scs(
    alpha: float,
    cutoff: Cutoff = DEFAULT_CUTOFF,
    allow_truncation: bool = False,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> FockVector:
    """Single-mode cat state N_alpha (|alpha> + |-alpha>)."""
    raw = scs_normalizer(alpha) * (coherent_amplitudes(alpha, cutoff.dim) + coherent_amplitudes(-alpha, cutoff.dim))
    tail = max(0.0, 1.0 - float(np.sum(np.abs(raw) ** 2)))
    if tail >= tail_tolerance and not allow_truncation:
        raise TruncationOverflow(f"Cat state alpha={alpha} loses {tail:.3e} probability at cutoff {cutoff.dim}")
    return FockVector(raw / np.linalg.norm(raw), cutoff, tail)


def make_uncorrelated(N: int, cutoff: Cutoff = DEFAULT_CUTOFF) -> List[PureState2M]:
    """N independent copies of (|1,0> + |0,1>) / sqrt(2)."""
    if N < 1:
        raise ValidationException(f"Uncorrelated probes need N >= 1, got {N}")
    return [make_noon(1, cutoff) for _ in range(N)]


def make_probe(spec: "ProbeSpec") -> PureState2M:
    """Two-mode state for a probe spec; uncorrelated probes return one copy."""
    cutoff = spec.cutoff
    if spec.kind == ProbeKind.NOON:
        return make_noon(spec.N, cutoff)
    if spec.kind == ProbeKind.BAT:
        return make_bat(spec.N, cutoff)
    if spec.kind == ProbeKind.ECS:
        return make_ecs(spec.alpha, cutoff)
    if spec.kind == ProbeKind.UNCORRELATED:
        return make_uncorrelated(spec.N, cutoff)[0]
    raise ValidationException("Cat states are a single-mode preparation resource, not a two-mode probe")


def mean_photon_mode1(state: PureState2M) -> float:
    mean, _ = observable_moments(state, number_operator(state.cutoff, 1))
    return mean


def ecs_mean_photons(alpha: float) -> float:
    """N_alpha^2 |alpha|^2, the untruncated mode-1 mean of the ECS."""
    return ecs_normalizer(alpha) ** 2 * alpha ** 2


def alpha_for_mean_photons(target_n: float) -> float:
    """Invert N_alpha^2 alpha^2 = target_n by bisection on [0, 2 sqrt(target) + 1]."""
    if target_n < 0:
        raise ValidationException(f"Mean photon number must be >= 0, got {target_n}")
    if target_n == 0:
        return 0.0
    upper = 2.0 * np.sqrt(target_n) + 1.0
    alpha = optimize.bisect(lambda a: ecs_mean_photons(a) - target_n, 0.0, upper, xtol=1e-14, maxiter=200)
    residual = abs(ecs_mean_photons(alpha) - target_n)
    if residual >= RESOURCE_TOLERANCE:
        logger.warning("resource matching residual %.3e for target %s", residual, target_n)
    return float(alpha)


def noon_weights(alpha: float, cutoff: Cutoff = DEFAULT_CUTOFF) -> np.ndarray:
    """Weights of the ECS written as a superposition of NOON components.

    Entry 0 is the vacuum weight, entry n >= 1 the weight of the n-photon NOON
    state; untruncated weights sum to one.
    """
    normalizer = ecs_normalizer(alpha)
    coefficients = np.abs(coherent_amplitudes(alpha, cutoff.dim)) ** 2
    weights = 2.0 * normalizer ** 2 * coefficients
    weights[0] = 4.0 * normalizer ** 2 * coefficients[0]
    return weights


def prepare_ecs_via_bs(
    alpha: float,
    cutoff: Cutoff = DEFAULT_CUTOFF,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> Tuple[PureState2M, float]:
    """Mix |alpha> with a cat state on a 50:50 beam splitter.

    Returns the output state and its fidelity with the ECS of amplitude
    sqrt(2) alpha.
    """
    from ecs_metrology.quantum.channels import beam_splitter_5050

    scaled = np.sqrt(2.0) * alpha
    tail = coherent_tail_mass(scaled, cutoff.dim)
    if tail >= tail_tolerance:
        raise TruncationOverflow(f"Prepared ray {scaled:.6f} loses {tail:.3e} probability at cutoff {cutoff.dim}")
    source = product_state(
        coherent_vector(alpha, cutoff, tail_tolerance=tail_tolerance),
        make_scs(alpha, cutoff, tail_tolerance=tail_tolerance),
    )
    output = beam_splitter_5050(source, allow_truncation=True)
    return output, fidelity(output, make_ecs(scaled, cutoff, tail_tolerance=tail_tolerance))
