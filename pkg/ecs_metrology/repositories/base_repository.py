from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel


class BaseSweepRepository(ABC):
    """Abstract sink for sweep rows"""

    @abstractmethod
    def render(self, rows: Sequence[BaseModel], row_model: type, config: Optional[dict] = None) -> str:
        # Serialize rows in model field order
        pass

    def save(
        self,
        rows: Sequence[BaseModel],
        row_model: type,
        config: Optional[dict] = None,
        out: Optional[Path] = None,
    ) -> str:
        """Render rows and write them to ``out`` when given"""
        text = self.render(rows, row_model, config)
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text, encoding="utf-8")
        return text
