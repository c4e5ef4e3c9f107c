from .config import SweepConfig, parse_config_file, parse_config_text, parse_regime
from .seeds import derive_child_seed, splitmix64
from .sweep import (CSV_COLUMNS, Coordinate, RunRecord, enumerate_coordinates,
                    run_records, run_sweep, write_csv)

__all__ = [
    "SweepConfig", "parse_config_file", "parse_config_text", "parse_regime",
    "derive_child_seed", "splitmix64", "CSV_COLUMNS", "Coordinate", "RunRecord",
    "enumerate_coordinates", "run_records", "run_sweep", "write_csv",
]
