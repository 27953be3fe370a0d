"""Flight-deck advisory relay.

Turns live flight telemetry, aircraft documentation, and airport/weather
data into context-assembled prompts for a pluggable chat backend, governed
by a three-state advisory model (Armed / Active / Interactive).
"""

from pathlib import Path

__version__ = "0.1.0"

# Fixtures shipped with the package: sample corpus, airports, METARs,
# scenarios, and a sample config.
DATA_DIR = Path(__file__).parent / "data"
