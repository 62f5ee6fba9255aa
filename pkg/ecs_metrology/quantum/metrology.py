"""Quantum Fisher information, Cramer-Rao bounds and parity readout."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg, optimize

from ecs_metrology.core.exceptions import (
    NotDensityOperator,
    PipelineNotCovariant,
    StationaryPoint,
    TruncationOverflow,
    ValidationException,
    ZeroInformation,
)
from ecs_metrology.models.schemas import (
    ParityCurve,
    ParitySample,
    PhaseSpec,
    ProbeSpec,
    QfiMethod,
    QfiResult,
)
from ecs_metrology.quantum.channels import (
    ReducedSupport,
    apply_loss_both_modes,
    beam_splitter_5050,
    ecs_lossy_closed_form,
    loss_detection_probability,
    no_loss_probability,
    phase_shift,
    reduced_support_basis,
)
from ecs_metrology.quantum.fock import (
    DEFAULT_CUTOFF,
    HERMITIAN_TOLERANCE,
    TAIL_TOLERANCE,
    TRACE_TOLERANCE,
    Cutoff,
    DensityOp2M,
    OperatorMatrix,
    PureState2M,
    hermitian_eig,
    observable_moments,
    parity_operator,
    phase_generator,
    working_cutoff,
)
from ecs_metrology.quantum.states import ProbeKind, ecs_normalizer, make_ecs, make_probe, two_ray_amplitudes

logger = logging.getLogger(__name__)

FINITE_DIFFERENCE_STEP = 1e-5
PAIR_CUTOFF_RATIO = 1e-12
STATIONARY_SLOPE = 1e-12
NORM_TOLERANCE = 1e-8
PARITY_GRID_POINTS = 2048
PARITY_REFINE_TOLERANCE = 1e-8
WORKING_PHASE = 0.3


# ==================== Bounds ====================

def crb(F: float, mu: int = 1) -> float:
    """Cramer-Rao bound 1 / sqrt(mu F) with equality."""
    if mu < 1:
        raise ValidationException(f"Shot count must be >= 1, got {mu}")
    if F <= 0.0:
        raise ZeroInformation("Fisher information is zero; the phase is not estimable")
    return float(1.0 / np.sqrt(mu * F))


def qfi_result(F: float, mu: int, method: QfiMethod, spectrum_cut: int = 0) -> QfiResult:
    """Wrap a Fisher information; F = 0 reports an infinite bound."""
    F = max(float(F), 0.0)
    delta_phi = crb(F, mu) if F > 0.0 else float("inf")
    return QfiResult(F=F, delta_phi=delta_phi, mu=mu, method=method, spectrum_cut=spectrum_cut)


# ==================== Pure states ====================

def qfi_pure(
    state: PureState2M,
    generator: Optional[OperatorMatrix] = None,
    mu: int = 1,
    derivative: str = "analytic",
    k: int = 1,
    step: float = FINITE_DIFFERENCE_STEP,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> QfiResult:
    """F = 4 (<psi'|psi'> - |<psi'|psi>|^2) with |psi'> = i G |psi>.

    The analytic derivative reduces to 4 Var(G). The finite-difference path
    differentiates exp(i phi G)|psi> by a central difference of step ``step``.
    States that lost ``tail_tolerance`` or more probability to truncation are rejected.
    """
    if state.tail_mass >= tail_tolerance:
        raise TruncationOverflow(f"State lost {state.tail_mass:.3e} probability at cutoff {state.cutoff.dim}")
    if abs(state.norm() - 1.0) > NORM_TOLERANCE:
        raise ValidationException(f"State norm {state.norm():.12f} differs from 1")
    if generator is None:
        generator = phase_generator(state.cutoff, k)

    if derivative == "analytic":
        _, variance = observable_moments(state, generator)
        return qfi_result(4.0 * variance, mu, QfiMethod.PURE_ANALYTIC)
    if derivative != "finite-difference":
        raise ValidationException(f"Unknown derivative method '{derivative}'")

    ket = state.ket()
    hamiltonian = np.asarray(generator.matrix)
    forward = linalg.expm(1j * step * hamiltonian) @ ket
    backward = linalg.expm(-1j * step * hamiltonian) @ ket
    slope = (forward - backward) / (2.0 * step)
    F = 4.0 * (np.real(np.vdot(slope, slope)) - abs(np.vdot(slope, ket)) ** 2)
    return qfi_result(F, mu, QfiMethod.PURE_NUMERIC)


def qfi_pure_ecs_closed(alpha: float, mu: int = 1) -> QfiResult:
    """F = 4 a^2 N^2 (1 + (1 - N^2) a^2) for the untruncated ECS."""
    if alpha < 0:
        raise ValidationException(f"ECS amplitude must be >= 0, got {alpha}")
    weight = ecs_normalizer(alpha) ** 2
    F = 4.0 * alpha ** 2 * weight * (1.0 + (1.0 - weight) * alpha ** 2)
    return qfi_result(F, mu, QfiMethod.CLOSED_FORM)


# ==================== Mixed states ====================

class PipelineStep(str, Enum):
    PHASE = "phase"
    LOSS = "loss"
    BEAM_SPLITTER = "beam-splitter"


@dataclass(frozen=True)
class StateRecipe:
    """Rebuilds the output state of a probe pipeline at any phase."""

    probe: ProbeSpec
    T: float = 1.0
    k: int = 1
    steps: Tuple[PipelineStep, ...] = (PipelineStep.PHASE, PipelineStep.LOSS)

    def build(self, phi: float) -> DensityOp2M:
        state: Union[PureState2M, DensityOp2M] = make_probe(self.probe)
        for step in self.steps:
            if step == PipelineStep.PHASE:
                state = phase_shift(state, PhaseSpec(phi=phi, k=self.k))
            elif step == PipelineStep.LOSS:
                state = apply_loss_both_modes(state, self.T)
            elif isinstance(state, PureState2M):
                state = beam_splitter_5050(state)
            else:
                raise ValidationException("Beam splitter acts on pure states only")
        return state.density() if isinstance(state, PureState2M) else state

    def is_covariant(self) -> bool:
        """True when the output is exp(i phi G) rho0 exp(-i phi G) with G = n2^k."""
        if PipelineStep.PHASE not in self.steps:
            return True
        after_phase = self.steps[self.steps.index(PipelineStep.PHASE) + 1:]
        if PipelineStep.BEAM_SPLITTER in after_phase:
            return False
        # Loss commutes with the linear phase rotation only
        return not (PipelineStep.LOSS in after_phase and self.k > 1 and self.T < 1.0)


def drho_dphi(
    rho: Union[DensityOp2M, ReducedSupport],
    method: str = "analytic",
    recipe: Optional[StateRecipe] = None,
    phi: float = 0.0,
    k: int = 1,
    step: float = FINITE_DIFFERENCE_STEP,
) -> np.ndarray:
    """Phase derivative of the output density operator.

    ``analytic`` returns i[n2^k, rho]; ``finite-difference`` rebuilds the
    recipe at phi +- step.
    """
    if method == "analytic":
        if recipe is not None:
            if not recipe.is_covariant():
                raise PipelineNotCovariant(f"Pipeline {[s.value for s in recipe.steps]} is not phase covariant")
            k = recipe.k
        generator = rho.mode_occupations(2).astype(float) ** k
        matrix = np.asarray(rho.matrix)
        return 1j * (generator[:, None] - generator[None, :]) * matrix
    if method != "finite-difference":
        raise ValidationException(f"Unknown derivative method '{method}'")
    if recipe is None:
        raise ValidationException("Finite-difference derivative needs a state recipe")
    forward = np.asarray(recipe.build(phi + step).matrix)
    backward = np.asarray(recipe.build(phi - step).matrix)
    return (forward - backward) / (2.0 * step)


def _validate_reduced(rho: ReducedSupport) -> None:
    if rho.hermiticity_error() > HERMITIAN_TOLERANCE:
        raise NotDensityOperator(f"Density matrix is not Hermitian (deviation {rho.hermiticity_error():.3e})")
    if abs(rho.trace() - 1.0) > TRACE_TOLERANCE:
        raise NotDensityOperator(f"Density matrix trace {rho.trace():.12f} differs from 1")


def qfi_mixed(
    rho: Union[DensityOp2M, ReducedSupport],
    drho: np.ndarray,
    pair_cutoff: Optional[float] = None,
    mu: int = 1,
) -> QfiResult:
    """F = sum_{ij} 2 |<i|drho|j>|^2 / (l_i + l_j) over pairs with l_i + l_j > pair_cutoff."""
    if isinstance(rho, ReducedSupport):
        _validate_reduced(rho)
        if drho.shape != rho.matrix.shape:
            drho = drho[np.ix_(rho.indices, rho.indices)]
    else:
        rho.validate()

    decomposition = hermitian_eig(np.asarray(rho.matrix))
    eigenvalues = decomposition.eigenvalues
    vectors = decomposition.eigenvectors
    projected = vectors.conj().T @ drho @ vectors

    sums = eigenvalues[:, None] + eigenvalues[None, :]
    if pair_cutoff is None:
        pair_cutoff = PAIR_CUTOFF_RATIO * float(np.max(eigenvalues))
    kept = sums > pair_cutoff
    F = float(np.sum(2.0 * np.abs(projected[kept]) ** 2 / sums[kept]))
    spectrum_cut = int(kept.size - np.count_nonzero(kept))
    logger.debug("mixed QFI %.12g, %d eigen-pairs discarded", F, spectrum_cut)
    return qfi_result(F, mu, QfiMethod.MIXED_EIG, spectrum_cut)


def lossy_qfi(
    probe: ProbeSpec, T: float, phi: float = WORKING_PHASE, mu: int = 1, k: int = 1
) -> QfiResult:
    """Mixed QFI of one probe after the phase and equal-arm loss."""
    if probe.kind == ProbeKind.UNCORRELATED:
        # Independent single photons: QFI is additive over copies
        single = ProbeSpec(kind=ProbeKind.NOON, N=1, cutoff=probe.cutoff)
        per_copy = lossy_qfi(single, T, phi, 1, k)
        return qfi_result(probe.N * per_copy.F, mu, QfiMethod.MIXED_EIG, per_copy.spectrum_cut)
    if probe.kind == ProbeKind.ECS and k == 1:
        reduced = reduced_support_basis(ecs_lossy_closed_form(probe.alpha, T, phi, probe.cutoff).rho)
        return qfi_mixed(reduced, drho_dphi(reduced), mu=mu)
    recipe = StateRecipe(probe=probe, T=T, k=k)
    rho = recipe.build(phi)
    return qfi_mixed(rho, drho_dphi(rho, recipe=recipe), mu=mu)


def lossy_bound_sweep(
    probe: ProbeSpec, T_grid: Iterable[float], phi: float = WORKING_PHASE, mu: int = 1
) -> List[QfiResult]:
    return [lossy_qfi(probe, T, phi, mu) for T in T_grid]


# ==================== Parity readout ====================

def parity_expectation_closed(alpha: float, phi: float) -> float:
    """<Pi_2> = (2 + 2 e^{-a^2 cos phi} cos(a^2 sin phi)) / (2 + 2 e^{a^2}), overflow-safe form."""
    mean = alpha ** 2
    damping = np.exp(-mean)
    interference = np.real(np.exp(-mean * (1.0 + np.exp(-1j * phi))))
    return float((damping + interference) / (damping + 1.0))


def parity_slope_closed(alpha: float, phi: float) -> float:
    mean = alpha ** 2
    rotated = np.exp(-1j * phi)
    slope = np.real(1j * mean * rotated * np.exp(-mean * (1.0 + rotated)))
    return float(slope / (np.exp(-mean) + 1.0))


def _uncertainty(expectation: float, slope: float, alpha: float, phi: float) -> float:
    if abs(slope) < STATIONARY_SLOPE:
        raise StationaryPoint(f"Parity signal is stationary at alpha={alpha}, phi={phi}")
    return float(np.sqrt(max(1.0 - expectation ** 2, 0.0)) / abs(slope))


def parity_uncertainty(alpha: float, phi: float) -> float:
    """(Delta phi)^2 = (1 - <Pi>^2) / (d<Pi>/dphi)^2"""
    return _uncertainty(parity_expectation_closed(alpha, phi), parity_slope_closed(alpha, phi), alpha, phi)


def parity_expectation_lossy(alpha: float, T: float, phi: float) -> float:
    """P00 <Pi>(alpha sqrt T, phi) + 2 PD e^{-a^2 T}; each loss branch is a single ray."""
    surviving = alpha * np.sqrt(T)
    return float(
        no_loss_probability(alpha, T) * parity_expectation_closed(surviving, phi)
        + 2.0 * loss_detection_probability(alpha, T) * np.exp(-surviving ** 2)
    )


def parity_slope_lossy(alpha: float, T: float, phi: float) -> float:
    return no_loss_probability(alpha, T) * parity_slope_closed(alpha * np.sqrt(T), phi)


def parity_uncertainty_lossy(alpha: float, T: float, phi: float) -> float:
    return _uncertainty(parity_expectation_lossy(alpha, T, phi), parity_slope_lossy(alpha, T, phi), alpha, phi)


def _parity_after_mixing(amplitudes: np.ndarray, cutoff: Cutoff) -> float:
    mixed = beam_splitter_5050(PureState2M(amplitudes / np.linalg.norm(amplitudes), cutoff))
    mean, _ = observable_moments(mixed, parity_operator(cutoff, 2))
    return mean


def parity_expectation_numeric(alpha: float, phi: float, cutoff: Cutoff = DEFAULT_CUTOFF) -> float:
    """Recombine the phase-imprinted ECS on the beam splitter and read parity on mode 2.

    Runs on a working cutoff with negligible coherent tail.
    """
    work = working_cutoff(cutoff, alpha)
    imprinted = phase_shift(make_ecs(alpha, work, tail_tolerance=1.0), PhaseSpec(phi=phi))
    return _parity_after_mixing(np.asarray(imprinted.amplitudes), work)


def parity_expectation_lossy_numeric(
    alpha: float, T: float, phi: float, cutoff: Cutoff = DEFAULT_CUTOFF
) -> float:
    """Lossy parity from the pure components of the closed-form lossy ECS."""
    work = working_cutoff(cutoff, alpha)
    decomposition = ecs_lossy_closed_form(alpha, T, phi, work, tail_tolerance=1.0)
    silent = np.zeros(work.dim, dtype=complex)
    left = two_ray_amplitudes(np.asarray(decomposition.S_L.amplitudes), silent)
    right = two_ray_amplitudes(silent, np.asarray(decomposition.S_R.amplitudes))
    no_loss = np.asarray(decomposition.S00.amplitudes)
    return float(
        decomposition.P00 * _parity_after_mixing(no_loss, work)
        + decomposition.PD * (_parity_after_mixing(left, work) + _parity_after_mixing(right, work))
    )


def _safe(uncertainty: Callable[[float], float]) -> Callable[[float], float]:
    def evaluate(phi: float) -> float:
        try:
            return uncertainty(phi)
        except StationaryPoint:
            return float("inf")

    return evaluate


def optimize_parity_uncertainty(
    alpha: float,
    T: float = 1.0,
    grid_points: int = PARITY_GRID_POINTS,
    tolerance: float = PARITY_REFINE_TOLERANCE,
) -> Tuple[float, float]:
    """Minimize the parity uncertainty over phi in (0, pi).

    A uniform grid locates the basin, then golden-section search refines it.
    Raises StationaryPoint when the signal is flat everywhere (alpha = 0).
    """
    objective = _safe(lambda phi: parity_uncertainty_lossy(alpha, T, phi))
    grid = np.linspace(0.0, np.pi, grid_points + 2)[1:-1]
    values = np.array([objective(phi) for phi in grid])
    best = int(np.argmin(values))
    if not np.isfinite(values[best]):
        raise StationaryPoint(f"Parity signal carries no phase information at alpha={alpha}, T={T}")

    phi_star, delta_star = float(grid[best]), float(values[best])
    if 0 < best < grid_points - 1 and values[best] < min(values[best - 1], values[best + 1]):
        refined = optimize.minimize_scalar(
            objective, bracket=(grid[best - 1], grid[best], grid[best + 1]), method="golden", tol=tolerance
        )
        if refined.fun < delta_star:
            phi_star, delta_star = float(refined.x), float(refined.fun)
    logger.debug("parity optimum alpha=%s T=%s: phi*=%.10f delta*=%.12g", alpha, T, phi_star, delta_star)
    return phi_star, delta_star


def parity_curve(
    alpha: float,
    phi_grid: Iterable[float],
    T: float = 1.0,
    grid_points: int = PARITY_GRID_POINTS,
    tolerance: float = PARITY_REFINE_TOLERANCE,
) -> ParityCurve:
    samples = [
        ParitySample(
            phi=phi,
            expectation=parity_expectation_lossy(alpha, T, phi),
            uncertainty=_safe(lambda p: parity_uncertainty_lossy(alpha, T, p))(phi),
        )
        for phi in phi_grid
    ]
    phi_star, delta_star = optimize_parity_uncertainty(alpha, T, grid_points, tolerance)
    return ParityCurve(alpha=alpha, T=T, samples=samples, phi_star=phi_star, delta_star=delta_star)
