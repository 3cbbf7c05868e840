"""Multipath components, snapshots and power delay profiles.

Powers are kept in dB for reporting; every weighted computation elsewhere
converts back to linear scale with :func:`db2lin`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateProfileError, InvalidArgumentError

SPEED_OF_LIGHT_M_PER_NS = 0.299792458
CARRIER_FREQUENCY_HZ = 6.5e9
BANDWIDTH_HZ = 5e8
TAP_SPACING_NS = 1e9 / BANDWIDTH_HZ
MAX_DELAY_NS = 550.0
FLOOR_DB = -30.0
MAX_PATHS = 50

_TWO_PI = 2.0 * math.pi


def db2lin(x):
    return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def wrap_phase(phase: float) -> float:
    """Map a phase onto ``[0, 2*pi)``."""
    wrapped = math.fmod(float(phase), _TWO_PI)
    if wrapped < 0.0:
        wrapped += _TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if wrapped >= _TWO_PI:
        wrapped = 0.0
    return wrapped + 0.0  # no negative zero


@dataclass(frozen=True)
class MultipathComponent:
    """One resolvable path: delay and complex amplitude (as magnitude and phase)."""

    delay_ns: float
    magnitude: float
    phase_rad: float = 0.0
    path_id: int = 0

    def __post_init__(self):
        delay = float(self.delay_ns)
        mag = float(self.magnitude)
        if not math.isfinite(delay) or delay < 0.0:
            raise InvalidArgumentError(f"delay must be finite and >= 0, got {self.delay_ns!r}")
        if not math.isfinite(mag) or mag <= 0.0:
            raise InvalidArgumentError(f"magnitude must be finite and > 0, got {self.magnitude!r}")
        if not math.isfinite(float(self.phase_rad)):
            raise InvalidArgumentError("phase must be finite")
        object.__setattr__(self, "delay_ns", delay)
        object.__setattr__(self, "magnitude", mag)
        object.__setattr__(self, "phase_rad", wrap_phase(self.phase_rad))
        object.__setattr__(self, "path_id", int(self.path_id))

    @classmethod
    def from_complex(cls, delay_ns, amplitude, path_id=0):
        amplitude = complex(amplitude)
        return cls(delay_ns, abs(amplitude), math.atan2(amplitude.imag, amplitude.real), path_id)

    @classmethod
    def from_power_db(cls, delay_ns, power_db, phase_rad=0.0, path_id=0):
        return cls(delay_ns, 10.0 ** (float(power_db) / 20.0), phase_rad, path_id)

    @property
    def amplitude(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase_rad), math.sin(self.phase_rad))

    @property
    def power(self) -> float:
        """Linear power ``|alpha|^2``."""
        return self.magnitude * self.magnitude

    @property
    def power_db(self) -> float:
        return 20.0 * math.log10(self.magnitude)


@dataclass(frozen=True)
class Snapshot:
    """MPCs observed at one time instant, tagged with the Tx-Rx link distance."""

    index: int
    link_distance_m: float
    mpcs: tuple = ()

    def __post_init__(self):
        d = float(self.link_distance_m)
        if not math.isfinite(d) or d <= 0.0:
            raise InvalidArgumentError(f"link distance must be > 0, got {self.link_distance_m!r}")
        object.__setattr__(self, "index", int(self.index))
        object.__setattr__(self, "link_distance_m", d)
        object.__setattr__(self, "mpcs", tuple(self.mpcs))

    def __len__(self):
        return len(self.mpcs)

    @property
    def delays(self) -> np.ndarray:
        return np.array([m.delay_ns for m in self.mpcs], dtype=float)

    @property
    def powers(self) -> np.ndarray:
        """Linear powers."""
        return np.array([m.power for m in self.mpcs], dtype=float)

    @property
    def powers_db(self) -> np.ndarray:
        return np.array([m.power_db for m in self.mpcs], dtype=float)

    def with_mpcs(self, mpcs: Iterable[MultipathComponent]) -> "Snapshot":
        return replace(self, mpcs=tuple(mpcs))


@dataclass(frozen=True)
class ChannelRecord:
    """A time-varying channel: record metadata plus successive snapshots.

    ``max_paths`` caps the MPC count of each snapshot; ``None`` disables the
    cap (synthetic records routinely carry more sub-paths than an estimator
    would report).
    """

    snapshots: tuple = ()
    frequency_hz: float = CARRIER_FREQUENCY_HZ
    bandwidth_hz: float = BANDWIDTH_HZ
    max_delay_ns: float = MAX_DELAY_NS
    max_paths: int | None = MAX_PATHS
    metadata: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        last = None
        for s in snaps:
            if last is not None and s.index <= last:
                raise InvalidArgumentError(f"snapshot indices must be strictly increasing ({last} -> {s.index})")
            last = s.index
            if self.max_paths is not None and len(s.mpcs) > self.max_paths:
                raise InvalidArgumentError(
                    f"snapshot {s.index} has {len(s.mpcs)} MPCs, more than max_paths={self.max_paths}"
                )
            for m in s.mpcs:
                if m.delay_ns > self.max_delay_ns:
                    raise InvalidArgumentError(
                        f"snapshot {s.index}: delay {m.delay_ns} ns exceeds max_delay_ns={self.max_delay_ns}"
                    )

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def tap_spacing_ns(self) -> float:
        return 1e9 / self.bandwidth_hz

    @property
    def link_distances(self) -> np.ndarray:
        return np.array([s.link_distance_m for s in self.snapshots], dtype=float)


def normalize_mpcs(mpcs: Sequence[MultipathComponent], floor_db: float = FLOOR_DB) -> list:
    """Scale MPC powers so the strongest is 0 dB and drop those below ``floor_db``.

    Path ids are kept; phases and delays are untouched.
    """
    if not mpcs:
        return []
    peak = max(m.magnitude for m in mpcs)
    out = []
    for m in mpcs:
        mag = m.magnitude / peak
        if 20.0 * math.log10(mag) >= floor_db:
            out.append(replace(m, magnitude=mag))
    return out


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    """Tap powers in dB on a uniform delay grid.

    Only present taps are stored: ``bins[i]`` is the delay-bin index of
    ``taps_db[i]``. ``n_bins`` is the length of the underlying grid, so a
    dropped tap is simply missing rather than a ``-inf`` entry.
    """

    tap_spacing_ns: float
    n_bins: int
    bins: np.ndarray
    taps_db: np.ndarray

    def __len__(self):
        return self.n_bins

    @property
    def delays_ns(self) -> np.ndarray:
        return self.bins * self.tap_spacing_ns

    def dense(self, fill=np.nan) -> np.ndarray:
        """All ``n_bins`` taps, missing ones replaced by ``fill``."""
        out = np.full(self.n_bins, fill, dtype=float)
        out[self.bins] = self.taps_db
        return out

    def equals(self, other: "PowerDelayProfile") -> bool:
        return (
            self.tap_spacing_ns == other.tap_spacing_ns
            and self.n_bins == other.n_bins
            and np.array_equal(self.bins, other.bins)
            and np.array_equal(self.taps_db, other.taps_db)
        )


def compute_pdp(cir, tap_spacing_ns: float = TAP_SPACING_NS) -> PowerDelayProfile:
    """Squared-magnitude profile of a sampled CIR, in dB (no normalisation).

    Zero-magnitude taps have no finite dB value and are left out.
    """
    h = np.asarray(cir)
    if h.ndim != 1 or h.size == 0:
        raise InvalidArgumentError("CIR must be a non-empty 1-D sequence of taps")
    if not np.all(np.isfinite(h)):
        raise InvalidArgumentError("CIR contains non-finite samples")
    power = np.abs(h) ** 2
    bins = np.flatnonzero(power > 0.0)
    return PowerDelayProfile(float(tap_spacing_ns), int(h.size), bins, lin2db(power[bins]))


def normalize_and_clip(pdp: PowerDelayProfile, floor_db: float = FLOOR_DB) -> PowerDelayProfile:
    """Shift the peak to 0 dB and drop taps below ``floor_db``."""
    taps = np.asarray(pdp.taps_db, dtype=float)
    finite = np.isfinite(taps)
    if not finite.any():
        raise DegenerateProfileError("power delay profile has no finite taps")
    bins = pdp.bins[finite]
    taps = taps[finite] - taps[finite].max()
    keep = taps >= floor_db
    return PowerDelayProfile(pdp.tap_spacing_ns, pdp.n_bins, bins[keep], taps[keep])
