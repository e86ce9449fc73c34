from os import getenv
from dotenv import load_dotenv

load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Config:
    def __init__(self):
        self.THREADS = int(getenv("RETAS_THREADS", 0))
        self.SEED = int(getenv("RETAS_SEED", 42))

        self.OUT_DIR = getenv("RETAS_OUT_DIR", "output")
        self.LOG_FILE = getenv("RETAS_LOG_FILE", "log.txt")
        self.LOG_LEVEL = getenv("RETAS_LOG_LEVEL", "INFO").upper()

        self.MAX_EVENTS = int(getenv("RETAS_MAX_EVENTS", 1_000_000))
        self.MAX_ITER = int(getenv("RETAS_MAX_ITER", 50))
        self.TOLERANCE = float(getenv("RETAS_TOLERANCE", 0.001))

    def check(self):
        invalid = []
        if self.THREADS < 0:
            invalid.append("RETAS_THREADS")
        if self.LOG_LEVEL not in LOG_LEVELS:
            invalid.append("RETAS_LOG_LEVEL")
        if self.MAX_EVENTS <= 0:
            invalid.append("RETAS_MAX_EVENTS")
        if self.MAX_ITER <= 0:
            invalid.append("RETAS_MAX_ITER")
        if self.TOLERANCE <= 0:
            invalid.append("RETAS_TOLERANCE")
        if invalid:
            raise SystemExit(f"Invalid environment variables: {', '.join(invalid)}")
