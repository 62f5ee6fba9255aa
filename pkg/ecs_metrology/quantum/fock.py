"""Truncated two-mode Fock-space linear algebra.

Pure states are stored as an amplitude grid ``amplitudes[n1, n2]``; density
operators and two-mode operators use the row-major flattening
``index = n1 * dim + n2``. All containers are immutable after construction.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg
from scipy.special import gammainc

from ecs_metrology.core.exceptions import (
    CutoffTooSmall,
    DimensionMismatch,
    NotDensityOperator,
    NotHermitian,
    TruncationOverflow,
)

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-5
WORKING_TAIL_TOLERANCE = 1e-13
HERMITIAN_TOLERANCE = 1e-10
SYMMETRIZE_TOLERANCE = 1e-6
TRACE_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = 1e-10


class Cutoff(BaseModel):
    """Number of Fock levels kept per mode (occupations 0..dim-1)."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(16, ge=2)

    @property
    def max_occupation(self) -> int:
        return self.dim - 1

    @property
    def two_mode_dim(self) -> int:
        return self.dim * self.dim


DEFAULT_CUTOFF = Cutoff()


class OperatorLabel(str, Enum):
    NUMBER = "number-operator"
    PARITY = "parity"
    PHASE = "phase"
    KRAUS = "kraus-element"
    GENERIC = "generic"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FockVector:
    """Single-mode amplitudes over levels 0..dim-1."""

    amplitudes: np.ndarray
    cutoff: Cutoff
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes))
        if self.amplitudes.shape != (self.cutoff.dim,):
            raise DimensionMismatch(
                f"Fock vector of length {self.amplitudes.shape} does not match cutoff {self.cutoff.dim}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "FockVector") -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class PureState2M:
    amplitudes: np.ndarray
    cutoff: Cutoff
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes))
        dim = self.cutoff.dim
        if self.amplitudes.shape != (dim, dim):
            raise DimensionMismatch(
                f"Amplitude grid {self.amplitudes.shape} does not match cutoff {dim}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def ket(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def inner(self, other: "PureState2M") -> complex:
        """<self|other>"""
        _check_same_cutoff(self.cutoff, other.cutoff)
        return complex(np.vdot(self.ket(), other.ket()))

    def edge_mass(self) -> float:
        """Probability on the outermost retained level of either mode."""
        probabilities = np.abs(self.amplitudes) ** 2
        edge = probabilities[-1, :].sum() + probabilities[:, -1].sum() - probabilities[-1, -1]
        return float(edge)

    def density(self) -> "DensityOp2M":
        ket = self.ket()
        return DensityOp2M(np.outer(ket, ket.conj()), self.cutoff, self.tail_mass)

    def support_size(self, threshold: float = 1e-14) -> int:
        return int(np.count_nonzero(np.abs(self.amplitudes) > threshold))


@dataclass(frozen=True)
class DensityOp2M:
    matrix: np.ndarray
    cutoff: Cutoff
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        side = self.cutoff.two_mode_dim
        if self.matrix.shape != (side, side):
            raise DimensionMismatch(
                f"Density matrix {self.matrix.shape} does not match two-mode side {side}"
            )

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def tensor(self) -> np.ndarray:
        """View as rho[n1, n2, n1', n2']."""
        dim = self.cutoff.dim
        return self.matrix.reshape(dim, dim, dim, dim)

    def mode_occupations(self, mode: int) -> np.ndarray:
        """Occupation of ``mode`` for every flattened basis index."""
        n1, n2 = np.divmod(np.arange(self.cutoff.two_mode_dim), self.cutoff.dim)
        return n1 if mode == 1 else n2

    def validate(self) -> None:
        """Raise NotDensityOperator unless Hermitian, unit trace and positive."""
        if self.hermiticity_error() > HERMITIAN_TOLERANCE:
            raise NotDensityOperator(f"Density matrix is not Hermitian (deviation {self.hermiticity_error():.3e})")
        if abs(self.trace() - 1.0) > TRACE_TOLERANCE:
            raise NotDensityOperator(f"Density matrix trace {self.trace():.12f} differs from 1")
        smallest = float(linalg.eigvalsh(_symmetrized(self.matrix))[0])
        if smallest < -POSITIVITY_TOLERANCE:
            raise NotDensityOperator(f"Density matrix has negative eigenvalue {smallest:.3e}")


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    label: OperatorLabel = OperatorLabel.GENERIC

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatch(f"Operator must be square, got {self.matrix.shape}")

    @property
    def side(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EigDecomposition:
    """Ascending eigenvalues; column i of ``eigenvectors`` belongs to eigenvalue i."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        vectors = self.eigenvectors
        return (vectors * self.eigenvalues) @ vectors.conj().T


def _check_same_cutoff(first: Cutoff, second: Cutoff) -> None:
    if first.dim != second.dim:
        raise DimensionMismatch(f"Cutoff {first.dim} does not match cutoff {second.dim}")


def _symmetrized(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def coherent_tail_mass(alpha: complex, dim: int) -> float:
    """Poisson probability of occupations >= dim for a coherent amplitude."""
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return 0.0
    return float(gammainc(dim, mean))


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Untruncated coherent amplitudes alpha^n e^{-|alpha|^2/2} / sqrt(n!) for n < dim."""
    ratios = np.ones(dim, dtype=complex)
    ratios[1:] = alpha / np.sqrt(np.arange(1, dim))
    return np.exp(-0.5 * abs(alpha) ** 2) * np.cumprod(ratios)


def coherent_vector(
    alpha: complex,
    cutoff: Cutoff = DEFAULT_CUTOFF,
    allow_truncation: bool = False,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> FockVector:
    """Coherent state |alpha> renormalized on the truncated space."""
    tail = coherent_tail_mass(alpha, cutoff.dim)
    if tail >= tail_tolerance and not allow_truncation:
        raise TruncationOverflow(
            f"Coherent amplitude {alpha} loses {tail:.3e} probability at cutoff {cutoff.dim}"
        )
    amplitudes = coherent_amplitudes(alpha, cutoff.dim)
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return FockVector(amplitudes, cutoff, tail)


def working_cutoff(
    cutoff: Cutoff, alpha: float, tolerance: float = WORKING_TAIL_TOLERANCE
) -> Cutoff:
    """Smallest cutoff >= ``cutoff`` whose coherent tail at ``alpha`` is below tolerance."""
    dim = cutoff.dim
    while coherent_tail_mass(alpha, dim) >= tolerance:
        dim += 1
    if dim != cutoff.dim:
        logger.debug("working cutoff for alpha=%s raised from %d to %d", alpha, cutoff.dim, dim)
    return Cutoff(dim=dim)


def number_operator(cutoff: Cutoff, mode: int) -> OperatorMatrix:
    diagonal = np.arange(cutoff.dim, dtype=float)
    return OperatorMatrix(_embed(np.diag(diagonal), cutoff, mode), OperatorLabel.NUMBER)


def parity_operator(cutoff: Cutoff, mode: int) -> OperatorMatrix:
    diagonal = (-1.0) ** np.arange(cutoff.dim)
    return OperatorMatrix(_embed(np.diag(diagonal), cutoff, mode), OperatorLabel.PARITY)


def phase_generator(cutoff: Cutoff, k: int = 1) -> OperatorMatrix:
    """(a2^dagger a2)^k, the generator of the order-k phase operation."""
    diagonal = np.arange(cutoff.dim, dtype=float) ** k
    return OperatorMatrix(_embed(np.diag(diagonal), cutoff, 2), OperatorLabel.PHASE)


def _embed(single_mode: np.ndarray, cutoff: Cutoff, mode: int) -> np.ndarray:
    identity = np.eye(cutoff.dim)
    if mode == 1:
        return np.kron(single_mode, identity)
    if mode == 2:
        return np.kron(identity, single_mode)
    raise DimensionMismatch(f"Mode must be 1 or 2, got {mode}")


def hermitian_eig(m: Union[OperatorMatrix, DensityOp2M, np.ndarray]) -> EigDecomposition:
    """Full spectrum of a Hermitian matrix with a reproducible eigenvector phase.

    Each eigenvector is rotated so that its largest-magnitude component (first
    one on ties) is real and positive.
    """
    matrix = _raw_matrix(m)
    deviation = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if deviation > SYMMETRIZE_TOLERANCE:
        raise NotHermitian(f"Matrix deviates from Hermitian by {deviation:.3e}")
    eigenvalues, eigenvectors = linalg.eigh(_symmetrized(matrix))
    pivots = np.argmax(np.abs(eigenvectors), axis=0)
    pivot_values = eigenvectors[pivots, np.arange(eigenvectors.shape[1])]
    eigenvectors = eigenvectors * (pivot_values.conj() / np.abs(pivot_values))
    return EigDecomposition(eigenvalues, eigenvectors)


def _raw_matrix(m: Union[OperatorMatrix, DensityOp2M, np.ndarray]) -> np.ndarray:
    if isinstance(m, (OperatorMatrix, DensityOp2M)):
        return np.asarray(m.matrix)
    return np.asarray(m, dtype=complex)


def observable_moments(
    state: Union[PureState2M, DensityOp2M], obs: OperatorMatrix
) -> Tuple[float, float]:
    """Mean and variance of ``obs`` on ``state``."""
    side = state.cutoff.two_mode_dim
    if obs.side != side:
        raise DimensionMismatch(f"Observable of side {obs.side} on a state of side {side}")
    operator = np.asarray(obs.matrix)
    if isinstance(state, PureState2M):
        ket = state.ket()
        applied = operator @ ket
        mean = float(np.real(np.vdot(ket, applied)))
        second = float(np.real(np.vdot(applied, applied)))
    else:
        rho = np.asarray(state.matrix)
        mean = float(np.real(np.trace(rho @ operator)))
        second = float(np.real(np.trace(rho @ operator @ operator)))
    return mean, second - mean ** 2


def fidelity(first: PureState2M, second: PureState2M) -> float:
    """|<first|second>|^2"""
    return abs(first.inner(second)) ** 2


def vacuum(cutoff: Cutoff = DEFAULT_CUTOFF) -> PureState2M:
    amplitudes = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    amplitudes[0, 0] = 1.0
    return PureState2M(amplitudes, cutoff)


def product_state(first: FockVector, second: FockVector) -> PureState2M:
    _check_same_cutoff(first.cutoff, second.cutoff)
    amplitudes = np.outer(first.amplitudes, second.amplitudes)
    # Discarded mass of a product: 1 - (1 - t1)(1 - t2)
    tail = first.tail_mass + second.tail_mass - first.tail_mass * second.tail_mass
    return PureState2M(amplitudes, first.cutoff, tail)


def restrict_state(state: PureState2M, cutoff: Cutoff, tail_mass: Optional[float] = None) -> PureState2M:
    """Crop a state to a smaller cutoff and renormalize."""
    if cutoff.dim > state.cutoff.dim:
        raise CutoffTooSmall(f"Cannot restrict cutoff {state.cutoff.dim} to larger cutoff {cutoff.dim}")
    amplitudes = np.asarray(state.amplitudes)[: cutoff.dim, : cutoff.dim]
    kept = float(np.sum(np.abs(amplitudes) ** 2))
    if tail_mass is None:
        tail_mass = state.tail_mass + (state.norm() ** 2 - kept)
    return PureState2M(amplitudes / np.sqrt(kept), cutoff, tail_mass)


def restrict_density(rho: DensityOp2M, cutoff: Cutoff) -> DensityOp2M:
    """Project onto a smaller two-mode box and renormalize the trace."""
    if cutoff.dim > rho.cutoff.dim:
        raise CutoffTooSmall(f"Cannot restrict cutoff {rho.cutoff.dim} to larger cutoff {cutoff.dim}")
    dim = cutoff.dim
    block = rho.tensor()[:dim, :dim, :dim, :dim].reshape(dim * dim, dim * dim)
    kept = float(np.real(np.trace(block)))
    return DensityOp2M(block / kept, cutoff, rho.tail_mass + (rho.trace() - kept))
