"""
Run outputs

- trace_<seed>.csv: one row per step, every column named in the header
- report.json: config echo, per-seed metrics, wall-clock and version

Floats are written with repr so traces are byte-identical across reruns
and reports round-trip losslessly.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from . import __version__


TRACE_TEMPLATE = 'trace_{seed}.csv'
REPORT_FILE = 'report.json'


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_, int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_trace(path: Path, header: List[str], rows: List[List[Any]]):
    """
    Write a CSV trace

    Args:
        path: Output file
        header: Column names
        rows: One list of values per step, matching the header
    """
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"trace row has {len(row)} values for {len(header)} columns")
            writer.writerow([_cell(v) for v in row])


@dataclass
class RunReport:
    """Summary of one experiment run"""
    experiment: str
    config: Dict[str, Any]
    results: List[Dict[str, Any]] = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    version: str = __version__

    def add_seed(self, seed: int, metrics: Dict[str, float]):
        for name, value in metrics.items():
            if not math.isfinite(value):
                raise ValueError(f"metric {name} for seed {seed} is not finite: {value}")
        self.results.append({'seed': seed, 'metrics': {k: float(v) for k, v in metrics.items()}})

    def metrics_for(self, seed: int) -> Dict[str, float]:
        for entry in self.results:
            if entry['seed'] == seed:
                return entry['metrics']
        raise KeyError(seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunReport':
        return cls(**data)

    def to_json(self, path: Path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')

    @classmethod
    def from_json(cls, path: Path) -> 'RunReport':
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))
