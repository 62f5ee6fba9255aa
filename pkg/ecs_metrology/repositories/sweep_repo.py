import json
from typing import Any, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from ecs_metrology.models.schemas import OutputFormat
from ecs_metrology.repositories.base_repository import BaseSweepRepository
from ecs_metrology.utils.grid_utils import FormatUtils


class CsvSweepRepository(BaseSweepRepository):
    """Comma-separated rows with a header that is always emitted"""

    def __init__(self, digits: int = 12):
        self.digits = digits

    def render(self, rows: Sequence[BaseModel], row_model: type, config: Optional[dict] = None) -> str:
        columns = list(row_model.model_fields)
        cells = [[FormatUtils.format_cell(getattr(row, column), self.digits) for column in columns] for row in rows]
        # Cells are preformatted strings so every float keeps the same notation
        frame = pd.DataFrame(cells, columns=columns, dtype=object)
        return frame.to_csv(index=False, lineterminator="\n")


class JsonSweepRepository(BaseSweepRepository):
    """{"config": ..., "rows": [...]} with floats at 12 significant digits"""

    def __init__(self, digits: int = 12):
        self.digits = digits

    def _clean(self, value: Any) -> Any:
        if isinstance(value, bool) or value is None:
            return value
        if isinstance(value, float):
            return FormatUtils.round_significant(value, self.digits)
        if isinstance(value, dict):
            return {key: self._clean(item) for key, item in value.items()}
        if isinstance(value, list):
            return [self._clean(item) for item in value]
        return value

    def render(self, rows: Sequence[BaseModel], row_model: type, config: Optional[dict] = None) -> str:
        payload = {
            "config": self._clean(config or {}),
            "rows": [self._clean(row.model_dump(mode="json")) for row in rows],
        }
        return json.dumps(payload, indent=2) + "\n"


# Factory function for creating repository instances
def create_sweep_repository(fmt: OutputFormat = OutputFormat.CSV, digits: int = 12) -> BaseSweepRepository:
    if fmt == OutputFormat.JSON:
        return JsonSweepRepository(digits)
    return CsvSweepRepository(digits)
