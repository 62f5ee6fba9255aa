import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from pydantic import BaseModel

from ecs_metrology.core.config import Settings, get_settings
from ecs_metrology.core.exceptions import StationaryPoint, TruncationOverflow, ValidationException
from ecs_metrology.models.schemas import (
    Command,
    ParityRow,
    ProbeSpec,
    QfiResult,
    RunConfig,
    StateReport,
    SweepRow,
)
from ecs_metrology.quantum.channels import ecs_lossy_closed_form, ecs_lossy_kraus
from ecs_metrology.quantum.fock import Cutoff, working_cutoff
from ecs_metrology.quantum.metrology import (
    lossy_qfi,
    optimize_parity_uncertainty,
    parity_expectation_lossy,
    parity_expectation_lossy_numeric,
    parity_expectation_numeric,
    parity_uncertainty_lossy,
    qfi_pure,
    qfi_pure_ecs_closed,
    qfi_result,
)
from ecs_metrology.quantum.states import (
    ProbeKind,
    alpha_for_mean_photons,
    ecs_normalizer,
    ecs_tail_mass,
    make_bat,
    make_ecs,
    make_noon,
    make_probe,
    make_scs,
    mean_photon_mode1,
    scs_normalizer,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_CURVE_POINTS = 21


@dataclass
class SweepOutcome:
    rows: List[BaseModel] = field(default_factory=list)
    failures: List[BaseModel] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


class SweepService:
    """Service layer for sweep orchestration"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def _map(self, task: Callable[..., T], items: Iterable) -> List[T]:
        """Evaluate grid points concurrently; results keep grid order."""
        with ThreadPoolExecutor(max_workers=self.settings.max_workers) as executor:
            return list(executor.map(task, items))

    def _outcome(self, rows: Sequence[BaseModel], tolerance_for: Callable[[BaseModel], float], name: str) -> SweepOutcome:
        failures = [
            row for row in rows
            if row.agreement is not None and not row.agreement <= tolerance_for(row)
        ]
        for row in failures:
            logger.warning("%s: internal agreement %.3e exceeds tolerance for %s", name, row.agreement, row)
        logger.info("%s finished: %d rows, %d agreement failures", name, len(rows), len(failures))
        return SweepOutcome(list(rows), failures)

    def _working(self, cutoff: Cutoff, alpha: float) -> Cutoff:
        return working_cutoff(cutoff, alpha, self.settings.working_tail_tolerance)

    @staticmethod
    def _row(state: str, result: QfiResult, **fields) -> SweepRow:
        return SweepRow(
            state=state,
            F=result.F,
            delta_phi=result.delta_phi,
            method=result.method.value,
            spectrum_cut=result.spectrum_cut,
            **fields,
        )

    # ==================== Pure sweep ====================

    def _ecs_pure_rows(self, alpha: float, N: Optional[int], config: RunConfig) -> List[SweepRow]:
        cutoff = config.fock_cutoff
        tail = ecs_tail_mass(alpha, cutoff)
        if tail >= self.settings.tail_tolerance:
            raise TruncationOverflow(f"ECS alpha={alpha:.6f} loses {tail:.3e} probability at cutoff {cutoff.dim}")
        closed = qfi_pure_ecs_closed(alpha, config.mu)
        numeric = qfi_pure(make_ecs(alpha, self._working(cutoff, alpha), tail_tolerance=1.0), mu=config.mu)
        agreement = abs(numeric.F - closed.F) / closed.F if closed.F > 0 else abs(numeric.F)
        rows = [
            self._row("ECS", closed, N=N, alpha=alpha, tail_mass=tail, agreement=agreement)
        ]
        try:
            phi_star, delta_star = optimize_parity_uncertainty(
                alpha, 1.0, self.settings.parity_grid_points, self.settings.parity_refine_tolerance
            )
        except StationaryPoint:
            return rows
        parity_check = abs(parity_expectation_numeric(alpha, phi_star, cutoff) - parity_expectation_lossy(alpha, 1.0, phi_star))
        rows.append(
            SweepRow(
                state="ECS-PARITY",
                N=N,
                alpha=alpha,
                F=1.0 / delta_star ** 2,
                delta_phi=delta_star,
                method="parity",
                agreement=parity_check,
            )
        )
        return rows

    def _pure_rows_for_n(self, N: int, config: RunConfig) -> List[SweepRow]:
        cutoff = config.fock_cutoff
        rows = [self._row("NOON", qfi_pure(make_noon(N, cutoff), mu=config.mu), N=N)]
        if N % 2 == 0:
            bat = make_bat(N, cutoff)
            rows.append(self._row("BAT", qfi_pure(bat, mu=config.mu), N=N, tail_mass=bat.tail_mass))
        if config.matched:
            rows.extend(self._ecs_pure_rows(alpha_for_mean_photons(N / 2.0), N, config))
        single = qfi_pure(make_noon(1, cutoff))
        rows.append(self._row("UNCORRELATED", qfi_result(N * single.F, config.mu, single.method), N=N))
        return rows

    def run_pure_sweep(self, config: RunConfig) -> SweepOutcome:
        """NOON, BAT, ECS and uncorrelated bounds without loss"""
        logger.info("pure sweep started: N=%s matched=%s", config.n_values, config.matched)
        rows: List[SweepRow] = []
        for group in self._map(lambda N: self._pure_rows_for_n(N, config), config.n_values):
            rows.extend(group)
        if not config.matched:
            for group in self._map(lambda alpha: self._ecs_pure_rows(alpha, None, config), config.alphas):
                rows.extend(group)
        return self._outcome(rows, self._tolerance_for, Command.PURE_SWEEP.value)

    def _tolerance_for(self, row: BaseModel) -> float:
        if getattr(row, "state", None) == "ECS-PARITY" or isinstance(row, ParityRow):
            return self.settings.parity_agreement_tolerance
        return self.settings.agreement_tolerance

    # ==================== Loss sweep ====================

    def _loss_probes(self, config: RunConfig) -> List[ProbeSpec]:
        cutoff = config.fock_cutoff
        probes: List[ProbeSpec] = []
        for N in config.n_values:
            probes.append(ProbeSpec(kind=ProbeKind.NOON, N=N, cutoff=cutoff))
            if N % 2 == 0:
                probes.append(ProbeSpec(kind=ProbeKind.BAT, N=N, cutoff=cutoff))
        for alpha in config.alphas:
            probes.append(ProbeSpec(kind=ProbeKind.ECS, alpha=alpha, cutoff=cutoff))
        for N in config.n_values:
            probes.append(ProbeSpec(kind=ProbeKind.UNCORRELATED, N=N, cutoff=cutoff))
        return probes

    def _loss_row(self, point: Tuple[ProbeSpec, float], config: RunConfig) -> SweepRow:
        probe, T = point
        phi = config.phi
        result = lossy_qfi(probe, T, phi, config.mu)
        fields = dict(N=probe.N if probe.kind != ProbeKind.ECS else None, T=T)
        if probe.kind == ProbeKind.NOON:
            fields["agreement"] = abs(result.F - probe.N ** 2 * T ** probe.N)
        elif probe.kind == ProbeKind.UNCORRELATED:
            fields["agreement"] = abs(result.F - probe.N * T)
        elif probe.kind == ProbeKind.ECS:
            closed = ecs_lossy_closed_form(probe.alpha, T, phi, probe.cutoff)
            kraus = ecs_lossy_kraus(probe.alpha, T, phi, probe.cutoff, self.settings.working_tail_tolerance)
            fields["agreement"] = float(np.max(np.abs(np.asarray(closed.rho.matrix) - np.asarray(kraus.matrix))))
            fields["alpha"] = probe.alpha
            fields["tail_mass"] = closed.rho.tail_mass
        return self._row(probe.kind.value, result, **fields)

    def run_loss_sweep(self, config: RunConfig) -> SweepOutcome:
        """Mixed-state bounds across the transmissivity grid"""
        logger.info("loss sweep started: N=%s alphas=%s T=%s", config.n_values, config.alphas, config.t_grid)
        points = [(probe, T) for probe in self._loss_probes(config) for T in config.t_grid]
        rows = self._map(lambda point: self._loss_row(point, config), points)
        return self._outcome(rows, self._tolerance_for, Command.LOSS_SWEEP.value)

    # ==================== Parity sweep ====================

    def _parity_rows(self, alpha: float, config: RunConfig) -> List[ParityRow]:
        T = config.transmissivity
        try:
            phi_star, delta_star = optimize_parity_uncertainty(
                alpha, T, self.settings.parity_grid_points, self.settings.parity_refine_tolerance
            )
            closed = parity_expectation_lossy(alpha, T, phi_star)
            numeric = parity_expectation_lossy_numeric(alpha, T, phi_star, config.fock_cutoff)
            rows = [
                ParityRow(
                    sample="optimum",
                    alpha=alpha,
                    T=T,
                    phi=phi_star,
                    expectation=closed,
                    delta_phi=delta_star,
                    agreement=abs(numeric - closed),
                )
            ]
        except StationaryPoint:
            rows = [ParityRow(sample="optimum", alpha=alpha, T=T, delta_phi=float("inf"), degenerate=True)]

        if config.include_curve or config.phi_grid:
            grid = config.phi_grid or list(np.linspace(0.0, np.pi, DEFAULT_CURVE_POINTS))
            for phi in grid:
                try:
                    uncertainty = parity_uncertainty_lossy(alpha, T, phi)
                except StationaryPoint:
                    uncertainty = float("inf")
                rows.append(
                    ParityRow(
                        sample="curve",
                        alpha=alpha,
                        T=T,
                        phi=float(phi),
                        expectation=parity_expectation_lossy(alpha, T, phi),
                        delta_phi=uncertainty,
                    )
                )
        return rows

    def run_parity_sweep(self, config: RunConfig) -> SweepOutcome:
        """Parity working point and optional parity curve per coherent amplitude"""
        logger.info("parity sweep started: alphas=%s T=%s", config.alphas, config.transmissivity)
        rows: List[ParityRow] = []
        for group in self._map(lambda alpha: self._parity_rows(alpha, config), config.alphas):
            rows.extend(group)
        return self._outcome(rows, self._tolerance_for, Command.PARITY_SWEEP.value)

    # ==================== Diagnostics ====================

    def run_state_info(self, config: RunConfig) -> StateReport:
        """Resource and truncation report for a single probe"""
        if config.probe is None:
            raise ValidationException("state-info needs a probe kind")
        kind = config.probe
        N, alpha = config.n_values[0], config.alphas[0]
        cutoff = config.fock_cutoff

        if kind == ProbeKind.SCS:
            cat = make_scs(alpha, cutoff)
            probabilities = np.abs(np.asarray(cat.amplitudes)) ** 2
            return StateReport(
                state=kind,
                alpha=alpha,
                cutoff=cutoff.dim,
                mean_n1=float(np.dot(np.arange(cutoff.dim), probabilities)),
                normalizer=scs_normalizer(alpha),
                tail_mass=cat.tail_mass,
                edge_mass=float(probabilities[-1]),
                support_size=int(np.count_nonzero(probabilities > 1e-28)),
                norm=cat.norm(),
            )

        spec = ProbeSpec(kind=kind, N=N if kind != ProbeKind.ECS else 0, alpha=alpha, cutoff=cutoff)
        state = make_probe(spec)
        normalizer = {
            ProbeKind.ECS: ecs_normalizer(alpha),
            ProbeKind.BAT: 1.0,
        }.get(kind, 1.0 / np.sqrt(2.0))
        return StateReport(
            state=kind,
            N=None if kind == ProbeKind.ECS else N,
            alpha=alpha if kind == ProbeKind.ECS else None,
            cutoff=cutoff.dim,
            mean_n1=mean_photon_mode1(state),
            normalizer=float(normalizer),
            tail_mass=state.tail_mass,
            edge_mass=state.edge_mass(),
            support_size=state.support_size(),
            norm=state.norm(),
        )

    def _resource_row(self, N: int, config: RunConfig) -> SweepRow:
        alpha = alpha_for_mean_photons(N / 2.0)
        measured = mean_photon_mode1(make_ecs(alpha, self._working(config.fock_cutoff, alpha), tail_tolerance=1.0))
        return self._row(
            "ECS",
            qfi_pure_ecs_closed(alpha, config.mu),
            N=N,
            alpha=alpha,
            tail_mass=ecs_tail_mass(alpha, config.fock_cutoff),
            agreement=abs(measured - N / 2.0),
        )

    def run_resource_match(self, config: RunConfig) -> SweepOutcome:
        """ECS amplitude carrying the mean photon number of an N-photon NOON state"""
        logger.info("resource matching started: N=%s", config.n_values)
        rows = self._map(lambda N: self._resource_row(N, config), config.n_values)
        return self._outcome(rows, self._tolerance_for, Command.RESOURCE_MATCH.value)
