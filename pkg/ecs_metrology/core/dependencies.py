from typing import Callable, Dict, Optional, TypeVar

from ecs_metrology.core.config import get_settings
from ecs_metrology.models.schemas import OutputFormat
from ecs_metrology.repositories.base_repository import BaseSweepRepository
from ecs_metrology.repositories.sweep_repo import create_sweep_repository
from ecs_metrology.services.sweep_service import SweepService

T = TypeVar("T")

# Singleton instances
_repository_instances: Dict[OutputFormat, BaseSweepRepository] = {}
_service_instance: Optional[SweepService] = None

# Provider -> replacement factory, consulted by resolve(); tests install fresh instances here
dependency_overrides: Dict[Callable, Callable] = {}


# Repository dependency
def get_sweep_repository(fmt: OutputFormat = OutputFormat.CSV) -> BaseSweepRepository:
    """Get singleton sweep repository for an output format"""
    if fmt not in _repository_instances:
        _repository_instances[fmt] = create_sweep_repository(fmt, get_settings().float_digits)
    return _repository_instances[fmt]


# Service dependency
def get_sweep_service() -> SweepService:
    """Get singleton sweep service instance"""
    global _service_instance
    if _service_instance is None:
        _service_instance = SweepService(get_settings())
    return _service_instance


def resolve(provider: Callable[..., T], *args) -> T:
    """Call ``provider`` unless an override is installed for it"""
    return dependency_overrides.get(provider, provider)(*args)
