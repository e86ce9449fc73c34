# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import time
import logging
from logging.handlers import RotatingFileHandler

from config import Config

config = Config()
config.check()

logging.basicConfig(
    format="[%(asctime)s - %(levelname)s] - %(name)s: %(message)s",
    datefmt="%d-%b-%y %H:%M:%S",
    handlers=[
        RotatingFileHandler(config.LOG_FILE, maxBytes=10485760, backupCount=5),
        logging.StreamHandler(),
    ],
    level=getattr(logging, config.LOG_LEVEL),
)
logging.getLogger("numexpr").setLevel(logging.ERROR)
logger = logging.getLogger(__name__)


__version__ = "1.0.0"

boot = time.time()
