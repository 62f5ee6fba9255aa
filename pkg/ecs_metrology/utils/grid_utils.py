import math
from typing import List, Optional, Union

import numpy as np

GRID_DIGITS = 12


class GridUtils:

    @staticmethod
    def parse_grid(spec: str) -> List[float]:
        """Parse 'start:stop:count' (inclusive linspace) or a comma list into floats"""
        spec = spec.strip()
        if not spec:
            raise ValueError("Grid specification is empty")
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError(f"Range grid must be start:stop:count, got '{spec}'")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError(f"Grid count must be >= 1, got {count}")
            # Rounded so 0.05:1:20 yields 0.15 rather than 0.15000000000000002
            return [float(v) for v in np.round(np.linspace(start, stop, count), GRID_DIGITS)]
        return [float(item) for item in spec.split(",") if item.strip()]

    @staticmethod
    def parse_int_grid(spec: str) -> List[int]:
        """Parse 'first:last' (inclusive) or a comma list into integers"""
        spec = spec.strip()
        if not spec:
            raise ValueError("Grid specification is empty")
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 2:
                raise ValueError(f"Integer range must be first:last, got '{spec}'")
            first, last = int(parts[0]), int(parts[1])
            if last < first:
                raise ValueError(f"Integer range {spec} is empty")
            return list(range(first, last + 1))
        return [int(item) for item in spec.split(",") if item.strip()]


class FormatUtils:

    @staticmethod
    def format_cell(value: Union[None, bool, int, float, str], digits: int = GRID_DIGITS) -> str:
        """Deterministic CSV cell: floats in scientific notation with `digits` significant digits"""
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, int):
            return str(value)
        if isinstance(value, float):
            if math.isinf(value):
                return "inf" if value > 0 else "-inf"
            if math.isnan(value):
                return "nan"
            return "{:.{}e}".format(value, digits - 1)
        return str(value)

    @staticmethod
    def round_significant(value: float, digits: int = GRID_DIGITS) -> Optional[float]:
        """Round to ``digits`` significant digits; non-finite values become None"""
        if not math.isfinite(value):
            return None
        return float("{:.{}e}".format(value, digits - 1))
