"""Configuration for the Robinson seriation engine."""
import os
from pathlib import Path

# Paths
DATA_DIR = Path(os.getenv("DATA_DIR", "data"))
DB_PATH = DATA_DIR / "seriation.db"

# Solver settings
SEARCH_MODE = os.getenv("SERIATION_SEARCH_MODE", "binary")
STRICT_VERIFY = os.getenv("SERIATION_STRICT", "0") == "1"
DIAGNOSTICS = os.getenv("SERIATION_DIAGNOSTICS", "0") == "1"

# Brute-force oracle enumerates n!/2 orders
ORACLE_MAX_N = int(os.getenv("ORACLE_MAX_N", "9"))

# Matrix input
SYMMETRY_TOLERANCE = float(os.getenv("SYMMETRY_TOLERANCE", "1e-12"))

# Server
HOST = os.getenv("HOST", "0.0.0.0")
PORT = int(os.getenv("PORT", "8080"))
API_MAX_N = int(os.getenv("API_MAX_N", "64"))

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
