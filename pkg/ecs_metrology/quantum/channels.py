"""Phase shifter, 50:50 beam splitter and equal-arm photon loss."""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Dict, List, Union

import numpy as np
from scipy.special import gammaln

from ecs_metrology.core.exceptions import (
    BadTransmissivity,
    DimensionMismatch,
    SupportLeakage,
    TruncationOverflow,
    ValidationException,
)
from ecs_metrology.models.schemas import PhaseSpec
from ecs_metrology.quantum.fock import (
    DEFAULT_CUTOFF,
    TAIL_TOLERANCE,
    Cutoff,
    DensityOp2M,
    FockVector,
    OperatorLabel,
    OperatorMatrix,
    PureState2M,
    coherent_amplitudes,
    coherent_tail_mass,
    restrict_density,
    working_cutoff,
)
from ecs_metrology.quantum.states import ecs_normalizer, make_ecs, two_ray_amplitudes

logger = logging.getLogger(__name__)

COMPLETENESS_TOLERANCE = 1e-12
LEAKAGE_TOLERANCE = 1e-10

# Sign of the mode-1 output fed by the mode-2 input. -1 reproduces the
# closed-form parity signal with the parity read on mode 2.
LOCKED_CROSS_SIGN = -1


def phase_shift(
    state: Union[PureState2M, DensityOp2M], spec: PhaseSpec
) -> Union[PureState2M, DensityOp2M]:
    """Apply exp(i phi (a2^dagger a2)^k)."""
    occupations = np.arange(state.cutoff.dim, dtype=float)
    phases = np.exp(1j * spec.phi * occupations ** spec.k)
    if isinstance(state, PureState2M):
        return PureState2M(np.asarray(state.amplitudes) * phases[None, :], state.cutoff, state.tail_mass)
    diagonal = np.tile(phases, state.cutoff.dim)
    matrix = np.asarray(state.matrix) * diagonal[:, None] * diagonal.conj()[None, :]
    return DensityOp2M(matrix, state.cutoff, state.tail_mass)


@lru_cache(maxsize=None)
def _mixing_coefficients(n1: int, n2: int, cross_sign: int) -> np.ndarray:
    """Output amplitudes of |n1, n2> over |p, n1 + n2 - p>, p = 0..n1+n2.

    a1^dagger -> (a1^dagger + a2^dagger) / sqrt(2),
    a2^dagger -> cross_sign (a1^dagger - a2^dagger) / sqrt(2).
    """
    total = n1 + n2
    # Integer polynomial coefficients of (x + y)^n1 (x - y)^n2 in powers of x
    first = [comb(n1, j) for j in range(n1 + 1)]
    second = [comb(n2, k) * (-1) ** (n2 - k) for k in range(n2 + 1)]
    product = [0] * (total + 1)
    for j, a in enumerate(first):
        for k, b in enumerate(second):
            product[j + k] += a * b
    powers = np.arange(total + 1)
    log_scale = 0.5 * (
        gammaln(powers + 1) + gammaln(total - powers + 1) - gammaln(n1 + 1) - gammaln(n2 + 1) - total * np.log(2.0)
    )
    coefficients = np.array([float(c) for c in product]) * np.exp(log_scale) * float(cross_sign) ** n2
    coefficients.setflags(write=False)
    return coefficients


def mix_amplitudes(amplitudes: np.ndarray, cross_sign: int = LOCKED_CROSS_SIGN) -> np.ndarray:
    """Exact 50:50 mixing of an amplitude grid onto the enlarged (2d-1) x (2d-1) grid."""
    if cross_sign not in (-1, 1):
        raise ValidationException(f"Beam-splitter sign must be +1 or -1, got {cross_sign}")
    rows, cols = amplitudes.shape
    output = np.zeros((rows + cols - 1, rows + cols - 1), dtype=complex)
    for n1, n2 in zip(*np.nonzero(amplitudes)):
        total = n1 + n2
        powers = np.arange(total + 1)
        output[powers, total - powers] += amplitudes[n1, n2] * _mixing_coefficients(int(n1), int(n2), cross_sign)
    return output


def beam_splitter_5050(
    state: PureState2M,
    cross_sign: int = LOCKED_CROSS_SIGN,
    allow_truncation: bool = False,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> PureState2M:
    """Unitary 50:50 mixing of modes 1 and 2 on the state's cutoff.

    With the locked sign, |a>|0> -> |a/sqrt2>|a/sqrt2> and
    |0>|b> -> |-b/sqrt2>|b/sqrt2>.
    """
    dim = state.cutoff.dim
    mixed = mix_amplitudes(np.asarray(state.amplitudes), cross_sign)
    kept = mixed[:dim, :dim]
    kept_mass = float(np.sum(np.abs(kept) ** 2))
    discarded = float(np.sum(np.abs(mixed) ** 2)) - kept_mass
    if discarded >= tail_tolerance and not allow_truncation:
        raise TruncationOverflow(f"Beam-splitter output loses {discarded:.3e} probability at cutoff {dim}")
    return PureState2M(kept / np.sqrt(kept_mass), state.cutoff, state.tail_mass + discarded)


@dataclass(frozen=True)
class KrausSet:
    """Single-mode photon-loss operators K_l, l = 0..dim-1."""

    T: float
    elements: List[OperatorMatrix] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.elements[0].side

    def completeness_error(self) -> float:
        total = sum(np.asarray(k.matrix).conj().T @ np.asarray(k.matrix) for k in self.elements)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def band_weights(self) -> List[np.ndarray]:
        """Nonzero band of each K_l: entry i is <i|K_l|i + l>."""
        return [np.real(np.diagonal(np.asarray(k.matrix), offset=l)) for l, k in enumerate(self.elements)]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """sum_l K_l rho K_l^dagger for a single-mode matrix."""
        if rho.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"Single-mode matrix {rho.shape} does not match Kraus dimension {self.dim}")
        return sum(np.asarray(k.matrix) @ rho @ np.asarray(k.matrix).conj().T for k in self.elements)


def _validate_transmissivity(T: float) -> None:
    if not 0.0 <= T <= 1.0:
        raise BadTransmissivity(f"Transmissivity must lie in [0, 1], got {T}")


def loss_kraus(T: float, cutoff: Cutoff = DEFAULT_CUTOFF) -> KrausSet:
    """<n-l|K_l|n> = sqrt(C(n,l)) T^{(n-l)/2} (1-T)^{l/2}"""
    _validate_transmissivity(T)
    dim = cutoff.dim
    elements = []
    for l in range(dim):
        matrix = np.zeros((dim, dim))
        n = np.arange(l, dim)
        if T == 1.0:
            weights = np.ones(dim) if l == 0 else np.zeros(dim - l)
        elif T == 0.0:
            weights = np.zeros(dim - l)
            weights[0] = 1.0
        else:
            log_weights = 0.5 * (
                gammaln(n + 1) - gammaln(l + 1) - gammaln(n - l + 1) + (n - l) * np.log(T) + l * np.log1p(-T)
            )
            weights = np.exp(log_weights)
        matrix[n - l, n] = weights
        elements.append(OperatorMatrix(matrix, OperatorLabel.KRAUS))
    kraus = KrausSet(T, elements)
    logger.debug("loss Kraus set T=%s dim=%d completeness error %.3e", T, dim, kraus.completeness_error())
    return kraus


def _lose_on_mode(tensor: np.ndarray, weights: List[np.ndarray], mode: int) -> np.ndarray:
    """Apply the banded loss operators to one mode of rho[n1, n2, n1', n2']."""
    dim = tensor.shape[0]
    output = np.zeros_like(tensor)
    for l, band in enumerate(weights):
        if not band.any():
            continue
        span = dim - l
        scale = np.outer(band, band)
        if mode == 1:
            output[:span, :, :span, :] += scale[:, None, :, None] * tensor[l:, :, l:, :]
        else:
            output[:, :span, :, :span] += scale[None, :, None, :] * tensor[:, l:, :, l:]
    return output


def apply_loss_both_modes(rho: Union[DensityOp2M, PureState2M], T: float) -> DensityOp2M:
    """sum_{l,m} (K_l x K_m) rho (K_l x K_m)^dagger with equal transmissivity."""
    _validate_transmissivity(T)
    if isinstance(rho, PureState2M):
        rho = rho.density()
    cutoff = rho.cutoff
    if T == 1.0:
        return DensityOp2M(np.asarray(rho.matrix), cutoff, rho.tail_mass)
    if T == 0.0:
        matrix = np.zeros_like(np.asarray(rho.matrix))
        matrix[0, 0] = rho.trace()
        return DensityOp2M(matrix, cutoff, rho.tail_mass)
    weights = loss_kraus(T, cutoff).band_weights()
    tensor = _lose_on_mode(np.array(rho.tensor()), weights, 1)
    tensor = _lose_on_mode(tensor, weights, 2)
    side = cutoff.two_mode_dim
    return DensityOp2M(tensor.reshape(side, side), cutoff, rho.tail_mass)


@dataclass(frozen=True)
class LossyEcsDecomposition:
    alpha: float
    T: float
    phi: float
    P00: float
    PD: float
    S_L: FockVector
    S_R: FockVector
    S00: PureState2M
    rho: DensityOp2M

    def loss_events(self) -> Dict[str, float]:
        return loss_event_probabilities(self.alpha, self.T, self.rho.cutoff)


def no_loss_probability(alpha: float, T: float) -> float:
    """P00 = (e^{a^2 T} + 1) / (e^{a^2} + 1), evaluated without overflow."""
    mean = alpha ** 2
    return float((np.exp(mean * (T - 1.0)) + np.exp(-mean)) / (1.0 + np.exp(-mean)))


def loss_detection_probability(alpha: float, T: float) -> float:
    """PD = N_alpha^2 (1 - e^{a^2 (T - 1)})"""
    return float(ecs_normalizer(alpha) ** 2 * -np.expm1(alpha ** 2 * (T - 1.0)))


def loss_event_probabilities(alpha: float, T: float, cutoff: Cutoff = DEFAULT_CUTOFF) -> Dict[str, float]:
    """Probabilities of the loss-mode detection events for the lossy ECS.

    P_{0n} (n photons in the mode-4 loss port) follow a Poisson law in the
    lost amplitude; the truncated sums run over n = 1..dim-1.
    """
    _validate_transmissivity(T)
    lost = alpha ** 2 * (1.0 - T)
    normalizer = ecs_normalizer(alpha) ** 2
    n = np.arange(1, cutoff.dim)
    per_event = normalizer * np.exp(-lost + n * np.log(lost) - gammaln(n + 1)) if lost > 0 else np.zeros(n.shape)
    return {
        "P00": no_loss_probability(alpha, T),
        "PD": loss_detection_probability(alpha, T),
        "P0n_truncated": float(per_event.sum()),
        "Pn0_truncated": float(per_event.sum()),
    }


def ecs_lossy_closed_form(
    alpha: float,
    T: float,
    phi: float,
    cutoff: Cutoff = DEFAULT_CUTOFF,
    allow_truncation: bool = False,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> LossyEcsDecomposition:
    """rho = P00 |S00><S00| + PD (rho_L + rho_R), projected onto the cutoff."""
    _validate_transmissivity(T)
    dim = cutoff.dim
    surviving = alpha * np.sqrt(T)
    tail = 2.0 * ecs_normalizer(alpha) ** 2 * coherent_tail_mass(surviving, dim)
    if tail >= tail_tolerance and not allow_truncation:
        raise TruncationOverflow(f"Lossy ECS ray {surviving:.6f} loses {tail:.3e} probability at cutoff {dim}")
    left = coherent_amplitudes(surviving, dim)
    right = coherent_amplitudes(surviving * np.exp(1j * phi), dim)
    vacuum_ray = np.zeros(dim, dtype=complex)
    vacuum_ray[0] = 1.0

    P00 = no_loss_probability(alpha, T)
    PD = loss_detection_probability(alpha, T)
    no_loss = (ecs_normalizer(surviving) * two_ray_amplitudes(left, right)).reshape(-1)
    left_term = np.outer(left, vacuum_ray).reshape(-1)
    right_term = np.outer(vacuum_ray, right).reshape(-1)
    matrix = (
        P00 * np.outer(no_loss, no_loss.conj())
        + PD * np.outer(left_term, left_term.conj())
        + PD * np.outer(right_term, right_term.conj())
    )
    kept = float(np.real(np.trace(matrix)))
    rho = DensityOp2M(matrix / kept, cutoff, 1.0 - kept)

    S00 = no_loss.reshape(dim, dim)
    return LossyEcsDecomposition(
        alpha=alpha,
        T=T,
        phi=phi,
        P00=P00,
        PD=PD,
        S_L=FockVector(left / np.linalg.norm(left), cutoff, coherent_tail_mass(surviving, dim)),
        S_R=FockVector(right / np.linalg.norm(right), cutoff, coherent_tail_mass(surviving, dim)),
        S00=PureState2M(S00 / np.linalg.norm(S00), cutoff),
        rho=rho,
    )


def ecs_lossy_kraus(
    alpha: float,
    T: float,
    phi: float,
    cutoff: Cutoff = DEFAULT_CUTOFF,
    working_tolerance: float = 1e-13,
) -> DensityOp2M:
    """Generic Kraus path for the lossy ECS, free of input truncation error.

    The ECS is built on a working cutoff whose discarded mass is below
    ``working_tolerance``, sent through phase and loss, then projected onto
    ``cutoff``.
    """
    work = working_cutoff(cutoff, alpha, working_tolerance)
    source = make_ecs(alpha, work, tail_tolerance=1.0)
    lossy = apply_loss_both_modes(phase_shift(source, PhaseSpec(phi=phi)), T)
    return restrict_density(lossy, cutoff)


@dataclass(frozen=True)
class ReducedSupport:
    """Density operator re-expressed on span{|n,0>, |0,m>} (side 2 dim - 1)."""

    indices: np.ndarray
    matrix: np.ndarray
    cutoff: Cutoff
    tail_mass: float = 0.0

    def mode_occupations(self, mode: int) -> np.ndarray:
        n1, n2 = np.divmod(self.indices, self.cutoff.dim)
        return n1 if mode == 1 else n2

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def expand(self) -> DensityOp2M:
        side = self.cutoff.two_mode_dim
        full = np.zeros((side, side), dtype=complex)
        full[np.ix_(self.indices, self.indices)] = self.matrix
        return DensityOp2M(full, self.cutoff, self.tail_mass)


def support_indices(cutoff: Cutoff) -> np.ndarray:
    """Flattened indices of |0,0>, |n,0> (n >= 1) and |0,m> (m >= 1)."""
    dim = cutoff.dim
    mode_one = np.arange(dim) * dim
    mode_two = np.arange(1, dim)
    return np.concatenate([mode_one, mode_two])


def reduced_support_basis(rho: DensityOp2M) -> ReducedSupport:
    indices = support_indices(rho.cutoff)
    matrix = np.asarray(rho.matrix)
    off_support = np.ones(rho.cutoff.two_mode_dim, dtype=bool)
    off_support[indices] = False
    leakage = float(np.sum(np.abs(np.diagonal(matrix)[off_support])))
    if leakage > LEAKAGE_TOLERANCE:
        raise SupportLeakage(f"Density operator has {leakage:.3e} mass outside the two-ray support")
    compressed = matrix[np.ix_(indices, indices)]
    return ReducedSupport(indices, compressed, rho.cutoff, rho.tail_mass)

