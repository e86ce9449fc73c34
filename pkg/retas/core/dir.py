# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from pathlib import Path

from retas import logger
from retas.helpers import DataError


def ensure_dirs(*dirs: str | Path) -> list[Path]:
    """
    Ensure that the output directories exist and are writable.
    """
    made = []
    for dir in dirs:
        path = Path(dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as ex:
            raise DataError(f"Cannot create output directory {path}: {ex}") from ex
        if not path.is_dir():
            raise DataError(f"Output path {path} is not a directory")
        made.append(path)
    logger.debug(f"Output directories ready: {', '.join(str(p) for p in made)}")
    return made
