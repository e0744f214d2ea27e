import itertools
import random

import numpy as np
import pytest

from coververify.boxgeom import Box, Configuration, Hyperplane

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE[criterion] = (bool(passed), detail)
    return bool(passed)


@pytest.fixture
def accept():
    return record


def _crit_key(c: str):
    num = "".join(ch for ch in c if ch.isdigit())
    return (int(num) if num else 0, c)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=_crit_key):
        ok, detail = ACCEPTANCE[crit]
        terminalreporter.write_line(f"criterion {crit:<4} {'PASS' if ok else 'FAIL'}  {detail}")


# ----------------------------------------------------------------------
# random instances shared by property tests


def random_box(rng: random.Random, max_points: int, dims=(2, 4), sizes=(2, 6)) -> Box:
    while True:
        n = rng.randint(*dims)
        q = [rng.randint(*sizes) for _ in range(n)]
        if np.prod(q) <= max_points:
            return Box(q)


def random_config(rng: random.Random, box: Box, nplanes: int | None = None, min_coord: int = 1) -> Configuration:
    """Non-parallel hyperplanes with random fixed sets inside ``[min_coord, n]``."""
    coords = list(range(min_coord, box.dim + 1))
    sets = [frozenset(s) for r in range(1, len(coords) + 1) for s in itertools.combinations(coords, r)]
    if nplanes is None:
        nplanes = rng.randint(0, len(sets))
    chosen = rng.sample(sets, min(nplanes, len(sets)))
    planes = [Hyperplane.from_fixed(box.dim, {c: rng.randint(1, box.size(c)) for c in F}) for F in chosen]
    return Configuration(box, tuple(planes))


def random_deltas(rng: random.Random, n: int, low: float = 0.0) -> list[float]:
    return [rng.choice([0.5, rng.uniform(low, 0.5)]) if low > 0 else rng.uniform(0.0, 0.5) for _ in range(n)]


def pytest_collection_modifyitems(config, items):
    # the acceptance file goes last so it can reuse what the property tests recorded
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")
