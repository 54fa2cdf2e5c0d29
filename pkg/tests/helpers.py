"""Shared builders and frozen reference values for the test modules."""

import functools
import json
from pathlib import Path

from modwit.states import REFERENCE_SLITS, FarFieldMode, ideal_far_field, ideal_near_field, momentum_axis, position_axis

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@functools.lru_cache(maxsize=None)
def ideal_pair(D: int, mode: str = "comb", cells: int = 1024, bins: int = 64):
    spec = REFERENCE_SLITS[D]
    near = ideal_near_field(spec, position_axis(spec, cells, bins))
    far = ideal_far_field(spec, momentum_axis(spec, cells, bins), FarFieldMode(mode))
    return spec, near, far




ACCEPTANCE_LINES: list[str] = []


def verdict(number: int, title: str, ok: bool, detail: str) -> bool:
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
