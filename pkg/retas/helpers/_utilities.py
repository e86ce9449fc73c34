# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import psutil

FLOAT_FORMAT = "%.17g"


class Utilities:
    def __init__(self):
        pass

    def format_float(self, value: float) -> str:
        return FLOAT_FORMAT % value

    def format_duration(self, seconds: float) -> str:
        if seconds < 10:
            return f"{seconds:.2f}s"
        seconds = int(round(seconds))
        if seconds < 3600:
            return f"{seconds // 60}:{seconds % 60:02d} min"
        h, rest = divmod(seconds, 3600)
        return f"{h}:{rest // 60:02d}:{rest % 60:02d} h"

    def progress(self, done: int, total: int, elapsed: float, unit: str = "replicates") -> str:
        """'3/10 replicates, 0:42 min elapsed, about 1:38 min left'"""
        text = f"{done}/{total} {unit}, {self.format_duration(elapsed)} elapsed"
        if 0 < done < total:
            text += f", about {self.format_duration(elapsed * (total - done) / done)} left"
        return text

    def resolve_threads(self, flag: int | None, env_value: int = 0) -> int:
        """Worker count: the flag wins over the environment; 0 means one per physical core."""
        for value in (flag, env_value):
            if value:
                return max(1, int(value))
        return psutil.cpu_count(logical=False) or 1

    def write_csv(self, frame: pd.DataFrame, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def write_json(self, data: dict, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            json.dump(self.jsonable(data), file, indent=2, sort_keys=True)
        return path

    def read_json(self, path: str | Path) -> dict:
        with open(path, "r", encoding="utf-8") as file:
            return json.load(file)

    def jsonable(self, value):
        """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
        if isinstance(value, dict):
            return {str(k): self.jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [self.jsonable(v) for v in value]
        if isinstance(value, np.ndarray):
            return [self.jsonable(v) for v in value.tolist()]
        if isinstance(value, (np.bool_, bool)):
            return bool(value)
        if isinstance(value, (np.integer,)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            value = float(value)
            if math.isnan(value):
                return "nan"
            if math.isinf(value):
                return "inf" if value > 0 else "-inf"
            return value
        return value

    def sha256(self, data: dict) -> str:
        encoded = json.dumps(self.jsonable(data), sort_keys=True).encode("utf-8")
        return hashlib.sha256(encoded).hexdigest()
