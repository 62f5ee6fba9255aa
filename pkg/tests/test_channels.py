import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from pydantic import ValidationError

from ecs_metrology.core.exceptions import (
    BadTransmissivity,
    DimensionMismatch,
    SupportLeakage,
    TruncationOverflow,
    ValidationException,
)
from ecs_metrology.models.schemas import PhaseSpec
from ecs_metrology.quantum.channels import (
    apply_loss_both_modes,
    beam_splitter_5050,
    ecs_lossy_closed_form,
    ecs_lossy_kraus,
    loss_event_probabilities,
    loss_kraus,
    phase_shift,
    reduced_support_basis,
)
from ecs_metrology.quantum.fock import (
    Cutoff,
    DensityOp2M,
    PureState2M,
    coherent_amplitudes,
    coherent_vector,
    fidelity,
    product_state,
    vacuum,
)
from ecs_metrology.quantum.states import make_bat, make_ecs, make_noon, two_ray_amplitudes


@pytest.fixture
def small_cutoff():
    """Five levels per mode keeps brute-force checks cheap"""
    return Cutoff(dim=5)


@pytest.fixture
def random_density(small_cutoff):
    """Seeded random density operator on the small cutoff"""
    rng = np.random.default_rng(7)
    side = small_cutoff.two_mode_dim
    raw = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    matrix = raw @ raw.conj().T
    return DensityOp2M(matrix / np.trace(matrix), small_cutoff)


def fock_state(n1, n2, cutoff):
    amplitudes = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    amplitudes[n1, n2] = 1.0
    return PureState2M(amplitudes, cutoff)


# ===== PHASE SHIFT TEST CASES =====

def test_phase_shift_zero_is_identity():
    """phi = 0 leaves the state untouched"""
    state = make_ecs(1.5)
    shifted = phase_shift(state, PhaseSpec(phi=0.0))
    assert np.array_equal(np.asarray(shifted.amplitudes), np.asarray(state.amplitudes))

def test_phase_shift_imprints_ecs_ray():
    """Phase on the ECS rotates the mode-2 ray to alpha e^{i phi}"""
    phi = 0.83
    shifted = phase_shift(make_ecs(2.0), PhaseSpec(phi=phi))
    dim = shifted.cutoff.dim
    expected = two_ray_amplitudes(coherent_amplitudes(2.0, dim), coherent_amplitudes(2.0 * np.exp(1j * phi), dim))
    expected /= np.linalg.norm(expected)
    assert np.max(np.abs(np.asarray(shifted.amplitudes) - expected)) < 1e-10

def test_phase_shift_nonlinear_order():
    """|0,2> picks up e^{i (pi/2) 4} = 1 for k = 2"""
    shifted = phase_shift(fock_state(0, 2, Cutoff(dim=4)), PhaseSpec(phi=np.pi / 2, k=2))
    assert np.asarray(shifted.amplitudes)[0, 2] == pytest.approx(1.0, abs=1e-12)

def test_phase_shift_density_matches_pure():
    """Conjugating rho equals shifting the ket"""
    state = make_noon(3)
    spec = PhaseSpec(phi=0.4)
    from_density = phase_shift(state.density(), spec)
    from_ket = phase_shift(state, spec).density()
    assert np.max(np.abs(np.asarray(from_density.matrix) - np.asarray(from_ket.matrix))) < 1e-14
    assert from_density.trace() == pytest.approx(1.0)

def test_phase_spec_rejects_zero_order():
    """Nonlinearity order is a positive integer"""
    with pytest.raises(ValidationError):
        PhaseSpec(phi=0.1, k=0)

# ===== BEAM SPLITTER TEST CASES =====

def test_beam_splitter_vacuum():
    """Vacuum in, vacuum out"""
    output = beam_splitter_5050(vacuum())
    assert fidelity(output, vacuum()) == pytest.approx(1.0, abs=1e-15)

def test_beam_splitter_hong_ou_mandel():
    """|1,1> bunches into (|0,2> - |2,0>) / sqrt(2)"""
    output = np.asarray(beam_splitter_5050(fock_state(1, 1, Cutoff(dim=4))).amplitudes)
    assert output[1, 1] == pytest.approx(0.0, abs=1e-15)
    assert output[2, 0] == pytest.approx(-1 / np.sqrt(2), abs=1e-15)
    assert output[0, 2] == pytest.approx(1 / np.sqrt(2), abs=1e-15)

def test_beam_splitter_locked_convention_on_rays():
    """|a>|0> -> |a/sqrt2>|a/sqrt2> and |0>|b> -> |-b/sqrt2>|b/sqrt2>"""
    cutoff = Cutoff()
    alpha, beta = 1.2, 0.9j
    zero = coherent_vector(0.0, cutoff)
    first = beam_splitter_5050(product_state(coherent_vector(alpha, cutoff), zero))
    second = beam_splitter_5050(product_state(zero, coherent_vector(beta, cutoff)))
    scale = np.sqrt(2.0)
    assert fidelity(first, product_state(coherent_vector(alpha / scale), coherent_vector(alpha / scale))) > 1 - 1e-10
    assert fidelity(second, product_state(coherent_vector(-beta / scale), coherent_vector(beta / scale))) > 1 - 1e-10

def test_beam_splitter_literal_convention():
    """cross_sign=+1 sends |alpha>|alpha> to |sqrt2 alpha>|0>"""
    state = product_state(coherent_vector(1.0), coherent_vector(1.0))
    output = beam_splitter_5050(state, cross_sign=1)
    target = product_state(coherent_vector(np.sqrt(2.0)), coherent_vector(0.0))
    assert fidelity(output, target) >= 1 - 1e-8

def test_beam_splitter_locked_convention_on_equal_rays():
    """The locked sign sends |alpha>|alpha> to |0>|sqrt2 alpha>"""
    state = product_state(coherent_vector(1.0), coherent_vector(1.0))
    target = product_state(coherent_vector(0.0), coherent_vector(np.sqrt(2.0)))
    assert fidelity(beam_splitter_5050(state), target) >= 1 - 1e-8

def test_beam_splitter_preserves_norm():
    """Unitary on states whose output fits the cutoff"""
    rng = np.random.default_rng(3)
    cutoff = Cutoff(dim=10)
    amplitudes = np.zeros((10, 10), dtype=complex)
    amplitudes[:4, :4] = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    amplitudes /= np.linalg.norm(amplitudes)
    output = beam_splitter_5050(PureState2M(amplitudes, cutoff))
    assert output.tail_mass == pytest.approx(0.0, abs=1e-14)
    assert output.norm() == pytest.approx(1.0, abs=1e-14)

def test_beam_splitter_truncation_overflow():
    """Output that leaves the cutoff raises unless allowed"""
    state = product_state(coherent_vector(3.0, allow_truncation=True), coherent_vector(3.0, allow_truncation=True))
    with pytest.raises(TruncationOverflow):
        beam_splitter_5050(state, cross_sign=1)
    output = beam_splitter_5050(state, cross_sign=1, allow_truncation=True)
    assert output.tail_mass > 1e-5

def test_beam_splitter_rejects_bad_sign():
    """Convention flag is +1 or -1"""
    with pytest.raises(ValidationException):
        beam_splitter_5050(vacuum(), cross_sign=0)

# ===== KRAUS TEST CASES =====

@pytest.mark.parametrize("T", [0.0, 0.3, 0.7, 1.0])
def test_kraus_completeness(T):
    """sum_l K_l^dagger K_l = identity"""
    assert loss_kraus(T).completeness_error() < 1e-12

def test_kraus_identity_at_full_transmission():
    """T = 1 keeps only K_0 = identity"""
    kraus = loss_kraus(1.0)
    assert np.array_equal(np.asarray(kraus.elements[0].matrix), np.eye(16))
    assert all(not np.any(np.asarray(k.matrix)) for k in kraus.elements[1:])

def test_kraus_entry_rule():
    """<n-l|K_l|n> = sqrt(C(n,l)) T^{(n-l)/2} (1-T)^{l/2}"""
    T = 0.35
    kraus = loss_kraus(T)
    assert np.asarray(kraus.elements[1].matrix)[2, 3] == pytest.approx(np.sqrt(3) * T * np.sqrt(1 - T), rel=1e-12)
    assert np.asarray(kraus.elements[2].matrix)[0, 2] == pytest.approx(1 - T, rel=1e-12)

def test_kraus_full_loss_to_vacuum():
    """T = 0 maps every level to the vacuum"""
    kraus = loss_kraus(0.0, Cutoff(dim=4))
    rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    output = kraus.apply(rho)
    assert output[0, 0] == pytest.approx(1.0)
    assert abs(np.trace(output) - output[0, 0]) < 1e-15

def test_kraus_coherent_input_stays_coherent():
    """Loss maps |alpha> to |alpha sqrt T>"""
    T = 0.6
    kraus = loss_kraus(T)
    output = kraus.apply(coherent_vector(1.0).projector())
    target = coherent_vector(np.sqrt(T)).projector()
    assert np.max(np.abs(output - target)) < 1e-8

def test_kraus_apply_dimension_mismatch():
    """Single-mode matrix must match the Kraus dimension"""
    with pytest.raises(DimensionMismatch):
        loss_kraus(0.5, Cutoff(dim=4)).apply(np.eye(5))

@pytest.mark.parametrize("T", [-0.1, 1.5])
def test_kraus_bad_transmissivity(T):
    """Transmissivity must be in [0, 1]"""
    with pytest.raises(BadTransmissivity):
        loss_kraus(T)

# ===== TWO-MODE LOSS TEST CASES =====

def test_loss_full_transmission_unchanged():
    """T = 1 leaves rho unchanged"""
    rho = make_bat(4).density()
    output = apply_loss_both_modes(rho, 1.0)
    assert np.max(np.abs(np.asarray(output.matrix) - np.asarray(rho.matrix))) < 1e-12

def test_loss_full_attenuation_gives_vacuum():
    """T = 0 leaves only |0,0>"""
    output = apply_loss_both_modes(make_noon(3), 0.0)
    assert np.max(np.abs(np.asarray(output.matrix) - np.asarray(vacuum().density().matrix))) < 1e-15

def test_loss_matches_brute_force_kronecker(random_density, small_cutoff):
    """Banded application equals sum (K_l x K_m) rho (K_l x K_m)^dagger"""
    T = 0.45
    kraus = loss_kraus(T, small_cutoff)
    rho = np.asarray(random_density.matrix)
    expected = np.zeros_like(rho)
    for first in kraus.elements:
        for second in kraus.elements:
            operator = np.kron(np.asarray(first.matrix), np.asarray(second.matrix))
            expected += operator @ rho @ operator.conj().T
    output = apply_loss_both_modes(random_density, T)
    assert np.max(np.abs(np.asarray(output.matrix) - expected)) < 1e-12

def test_loss_preserves_trace_and_hermiticity(random_density):
    """Trace and Hermiticity survive the channel"""
    output = apply_loss_both_modes(random_density, 0.3)
    assert output.trace() == pytest.approx(1.0, abs=1e-10)
    assert output.hermiticity_error() < 1e-12

@pytest.mark.parametrize("phi", [0.25, 1.9])
def test_loss_commutes_with_phase(random_density, phi):
    """Equal-arm loss commutes with the mode-2 phase rotation"""
    spec = PhaseSpec(phi=phi)
    first = apply_loss_both_modes(phase_shift(random_density, spec), 0.55)
    second = phase_shift(apply_loss_both_modes(random_density, 0.55), spec)
    assert np.max(np.abs(np.asarray(first.matrix) - np.asarray(second.matrix))) < 1e-10

# ===== LOSSY ECS TEST CASES =====

def test_lossy_ecs_probabilities():
    """alpha=2, T=0.5: P00 = (e^2+1)/(e^4+1), PD = N^2 (1 - e^{-2})"""
    decomposition = ecs_lossy_closed_form(2.0, 0.5, 0.3)
    assert decomposition.P00 == pytest.approx((np.e ** 2 + 1) / (np.e ** 4 + 1), rel=1e-12)
    assert decomposition.P00 == pytest.approx(0.15088, abs=1e-5)
    assert decomposition.PD == pytest.approx(0.42456, abs=1e-5)

@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("T", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_lossy_ecs_probabilities_sum_to_one(alpha, T):
    """P00 + 2 PD = 1"""
    decomposition = ecs_lossy_closed_form(alpha, T, 0.0)
    assert decomposition.P00 + 2 * decomposition.PD == pytest.approx(1.0, abs=1e-12)
    assert decomposition.rho.trace() == pytest.approx(1.0, abs=1e-12)

def test_lossy_ecs_without_loss_is_pure():
    """T = 1 reproduces the phase-imprinted ECS projector"""
    phi = 0.7
    decomposition = ecs_lossy_closed_form(2.0, 1.0, phi)
    expected = phase_shift(make_ecs(2.0), PhaseSpec(phi=phi)).density()
    assert decomposition.P00 == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(np.asarray(decomposition.rho.matrix) - np.asarray(expected.matrix))) < 1e-10

def test_lossy_ecs_full_loss_is_vacuum():
    """T = 0 leaves |0,0>"""
    rho = ecs_lossy_closed_form(2.0, 0.0, 0.4).rho
    assert np.max(np.abs(np.asarray(rho.matrix) - np.asarray(vacuum().density().matrix))) < 1e-12

def test_lossy_ecs_rays():
    """Surviving rays are |alpha sqrt T> and |alpha sqrt T e^{i phi}>"""
    decomposition = ecs_lossy_closed_form(2.0, 0.5, 0.3)
    surviving = 2.0 * np.sqrt(0.5)
    assert abs(decomposition.S_L.inner(coherent_vector(surviving))) == pytest.approx(1.0, abs=1e-12)
    assert abs(decomposition.S_R.inner(coherent_vector(surviving * np.exp(0.3j)))) == pytest.approx(1.0, abs=1e-12)

def test_lossy_ecs_truncation_overflow():
    """Surviving ray must fit the cutoff"""
    with pytest.raises(TruncationOverflow):
        ecs_lossy_closed_form(4.0, 0.9, 0.0)

@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("T", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
@pytest.mark.parametrize("phi", [0.0, 0.7])
def test_lossy_ecs_matches_kraus_path(alpha, T, phi):
    """Closed-form decomposition equals the generic channel entrywise"""
    closed = ecs_lossy_closed_form(alpha, T, phi).rho
    generic = ecs_lossy_kraus(alpha, T, phi)
    assert np.max(np.abs(np.asarray(closed.matrix) - np.asarray(generic.matrix))) < 1e-8

def test_loss_event_probabilities():
    """Truncated P0n sum approaches PD"""
    events = loss_event_probabilities(2.0, 0.5)
    decomposition = ecs_lossy_closed_form(2.0, 0.5, 0.0)
    assert events["P00"] == pytest.approx(decomposition.P00)
    assert events["PD"] == pytest.approx(decomposition.PD)
    assert events["P0n_truncated"] <= events["PD"]
    assert events["P0n_truncated"] == pytest.approx(events["PD"], abs=1e-8)
    assert decomposition.loss_events() == events

def test_loss_event_probabilities_without_loss():
    """No photons reach the loss ports at T = 1"""
    events = loss_event_probabilities(2.0, 1.0)
    assert events["P00"] == pytest.approx(1.0)
    assert events["PD"] == 0.0
    assert events["P0n_truncated"] == 0.0

# ===== REDUCED SUPPORT TEST CASES =====

def test_reduced_support_side():
    """ECS projector lives on 2 dim - 1 basis states"""
    rho = make_ecs(2.0).density()
    reduced = reduced_support_basis(rho)
    assert reduced.matrix.shape == (31, 31)
    assert np.max(np.abs(np.asarray(reduced.expand().matrix) - np.asarray(rho.matrix))) == 0.0

def test_reduced_support_vacuum():
    """Vacuum compresses to a single nonzero entry"""
    reduced = reduced_support_basis(vacuum().density())
    assert reduced.matrix.shape == (31, 31)
    assert np.count_nonzero(reduced.matrix) == 1

def test_reduced_support_occupations():
    """Compressed basis keeps |0,0>, |n,0> and |0,m>"""
    reduced = reduced_support_basis(vacuum().density())
    n1, n2 = reduced.mode_occupations(1), reduced.mode_occupations(2)
    assert np.all((n1 == 0) | (n2 == 0))
    assert len(set(zip(n1, n2))) == 31

def test_reduced_support_leakage():
    """BAT(4) has |2,2> mass outside the two-ray support"""
    with pytest.raises(SupportLeakage):
        reduced_support_basis(make_bat(4).density())

def test_reduced_support_lossy_ecs():
    """Lossy ECS stays on the two-ray support"""
    rho = ecs_lossy_closed_form(2.0, 0.4, 0.3).rho
    reduced = reduced_support_basis(rho)
    assert reduced.trace() == pytest.approx(1.0, abs=1e-12)
