import numpy as np
import pytest

from agchan.core import MultipathComponent, Snapshot


def make_snapshot(delays, powers_db=None, index=0, distance=20.0):
    delays = np.asarray(delays, dtype=float)
    if powers_db is None:
        powers_db = np.zeros(delays.size)
    mpcs = [MultipathComponent.from_power_db(t, p, 0.0, i) for i, (t, p) in enumerate(zip(delays, powers_db))]
    return Snapshot(index, distance, tuple(mpcs))


def planted_snapshot(rng, n_clusters=6, rays=10, spread=1.0, separation_factor=5.0, index=0):
    """Clusters at evenly spaced centres with Gaussian delay jitter.

    Centre spacing is ``separation_factor`` times the full intra-cluster
    span, so planted clusters never overlap in delay.
    """
    width = 6.0 * spread
    gap = separation_factor * width
    centres = 20.0 + gap * np.arange(n_clusters)
    delays, powers, truth = [], [], []
    for k, c in enumerate(centres):
        off = np.clip(rng.normal(0.0, spread, rays), -3 * spread, 3 * spread)
        delays.extend(c + off)
        powers.extend(-3.0 * k - rng.uniform(0, 6, rays))
        truth.extend([k + 1] * rays)
    return make_snapshot(delays, powers, index=index), np.array(truth), centres


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
