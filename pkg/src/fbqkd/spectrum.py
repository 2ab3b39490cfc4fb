"""Biphoton frequency-comb bookkeeping and channel planning.

Maps comb mode indices to signal/idler frequencies, parses measured
per-mode coincidence-rate tables (JSI summaries), and greedily allocates
multi-resonance wavelength channels over the usable modes.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, TextIO

from .qudit import BellStateSpec

__all__ = [
    "ChannelSpec",
    "FrequencyComb",
    "FrequencyMode",
    "JsiRecord",
    "JsiParseError",
    "Side",
    "allocate_channels",
    "bell_state",
    "channel_modes",
    "load_jsi",
    "mode_offsets",
    "write_jsi",
]


class Side(Enum):
    """Which half of an energy-matched mode pair a photon belongs to."""

    SIGNAL = "signal"
    IDLER = "idler"


class JsiParseError(ValueError):
    """Malformed row in a per-mode rate table; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class FrequencyComb:
    """Energy-matched biphoton comb around a single pump.

    Mode n sits at pump -/+ n*FSR for idler/signal. ``phase_slope_rad`` is
    the residual spectral phase accumulated per mode step across the comb
    (dispersion left uncompensated by the analyzers).
    """

    pump_frequency_thz: float = 194.67
    fsr_ghz: float = 21.23
    mode_count: int = 82
    phase_slope_rad: float = 0.065

    def __post_init__(self) -> None:
        if self.fsr_ghz <= 0.0:
            raise ValueError(f"FSR must be positive, got {self.fsr_ghz}")
        if self.mode_count < 1:
            raise ValueError(f"mode count must be >= 1, got {self.mode_count}")

    def signal_frequency_thz(self, index: int) -> float:
        self._check_index(index)
        return self.pump_frequency_thz + index * self.fsr_ghz * 1e-3

    def idler_frequency_thz(self, index: int) -> float:
        self._check_index(index)
        return self.pump_frequency_thz - index * self.fsr_ghz * 1e-3

    def mode(self, index: int, side: Side) -> "FrequencyMode":
        self._check_index(index)
        return FrequencyMode(index=index, side=side)

    def _check_index(self, index: int) -> None:
        if not 1 <= index <= self.mode_count:
            raise ValueError(
                f"mode index {index} outside comb range 1..{self.mode_count}"
            )


@dataclass(frozen=True)
class FrequencyMode:
    """One comb resonance on one side of the pump."""

    index: int
    side: Side

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"mode index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class JsiRecord:
    """Measured per-mode-pair rates: coincidences and flat background, in Hz."""

    mode_index: int
    coincidence_rate_hz: float
    background_rate_hz: float = 0.0

    def __post_init__(self) -> None:
        if self.mode_index < 1:
            raise ValueError(f"mode index must be >= 1, got {self.mode_index}")
        if self.coincidence_rate_hz < 0.0 or self.background_rate_hz < 0.0:
            raise ValueError(
                f"rates must be non-negative, got ({self.coincidence_rate_hz}, "
                f"{self.background_rate_hz}) for mode {self.mode_index}"
            )


@dataclass(frozen=True)
class ChannelSpec:
    """A contiguous block of comb modes operated as one qudit channel.

    Occupied modes are [center - floor((w-1)/2), center + floor(w/2)]:
    width 3 -> {c-1, c, c+1}; width 2 -> the adjacent pair {c, c+1} with the
    left mode as center. Width caps the usable qudit dimension.
    """

    center_mode: int
    width_resonances: int = 3

    def __post_init__(self) -> None:
        if self.width_resonances not in (2, 3):
            raise ValueError(
                f"channel width must be 2 or 3 resonances, got {self.width_resonances}"
            )
        if self.first_mode < 1:
            raise ValueError(
                f"channel at center {self.center_mode} extends below mode 1"
            )

    @property
    def first_mode(self) -> int:
        return self.center_mode - (self.width_resonances - 1) // 2

    @property
    def last_mode(self) -> int:
        return self.center_mode + self.width_resonances // 2

    @property
    def occupied_modes(self) -> tuple[int, ...]:
        return tuple(range(self.first_mode, self.last_mode + 1))

    @property
    def max_dimension(self) -> int:
        return self.width_resonances

    @property
    def bandwidth_ghz(self) -> float:
        """Spectral span per user in GHz, given the default comb FSR."""
        return self.width_resonances * FrequencyComb().fsr_ghz


def load_jsi(source: str | Path | TextIO | Iterable[str]) -> list[JsiRecord]:
    """Parse a tab-separated per-mode rate table into sorted records.

    Format: ``mode_index<TAB>coincidence_rate_hz<TAB>background_rate_hz``,
    one mode per row; blank lines and '#' comments ignored. Raises
    JsiParseError (with line number) on malformed rows and ValueError on
    duplicate mode indices or negative rates.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_jsi(fh)
    records: dict[int, JsiRecord] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise JsiParseError(lineno, f"expected 3 fields, found {len(fields)}")
        try:
            index = int(fields[0])
        except ValueError:
            raise JsiParseError(lineno, f"mode index {fields[0]!r} is not an integer")
        try:
            rate = float(fields[1])
            background = float(fields[2])
        except ValueError:
            raise JsiParseError(lineno, f"rates {fields[1]!r}/{fields[2]!r} not numeric")
        if not (math.isfinite(rate) and math.isfinite(background)):
            raise JsiParseError(lineno, "rates must be finite")
        if index in records:
            raise ValueError(f"duplicate mode index {index} (line {lineno})")
        if index < 1 or rate < 0.0 or background < 0.0:
            # Semantically invalid but well-formed: surface as validation error.
            raise ValueError(
                f"invalid record at line {lineno}: mode={index}, "
                f"rate={rate}, background={background}"
            )
        records[index] = JsiRecord(index, rate, background)
    return [records[i] for i in sorted(records)]


def write_jsi(records: Iterable[JsiRecord], target: str | Path | TextIO,
              header: str | None = None) -> None:
    """Write records in the tab-separated on-disk format (sorted by mode)."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            write_jsi(records, fh, header=header)
            return
    if header:
        for line in header.splitlines():
            target.write(f"# {line}\n" if not line.startswith("#") else f"{line}\n")
    target.write("# mode_index\tcoincidence_rate_hz\tbackground_rate_hz\n")
    for rec in sorted(records, key=lambda r: r.mode_index):
        target.write(
            f"{rec.mode_index}\t{rec.coincidence_rate_hz:.1f}\t"
            f"{rec.background_rate_hz:.1f}\n"
        )


def allocate_channels(
    jsi: Iterable[JsiRecord],
    width_resonances: int = 3,
    rate_floor_hz: float = 1000.0,
) -> list[ChannelSpec]:
    """Greedy channel plan over the usable comb modes.

    Modes below ``rate_floor_hz`` are dropped; the survivors split into
    maximal contiguous index runs; each run is packed left-to-right with
    non-overlapping channels of the requested width. Greedy left packing is
    count-optimal for fixed-width intervals on a line. Returns channels
    sorted by center mode; an empty usable set yields an empty list.
    """
    if width_resonances not in (2, 3):
        raise ValueError(f"channel width must be 2 or 3, got {width_resonances}")
    if rate_floor_hz < 0.0:
        raise ValueError(f"rate floor must be non-negative, got {rate_floor_hz}")
    usable = sorted(
        {r.mode_index for r in jsi if r.coincidence_rate_hz >= rate_floor_hz}
    )
    channels: list[ChannelSpec] = []
    run_start = None
    prev = None
    for m in usable + [None]:  # sentinel flushes the last run
        if run_start is not None and (m is None or m != prev + 1):
            length = prev - run_start + 1
            for k in range(length // width_resonances):
                first = run_start + k * width_resonances
                channels.append(
                    ChannelSpec(
                        center_mode=first + (width_resonances - 1) // 2,
                        width_resonances=width_resonances,
                    )
                )
            run_start = None
        if m is not None and run_start is None:
            run_start = m
        prev = m if m is not None else prev
    return sorted(channels, key=lambda c: c.center_mode)


def mode_offsets(dimension: int, adjacent: bool = False) -> tuple[int, ...]:
    """Mode-index offsets (relative to channel center) encoding a d-level qudit.

    Odd d uses the contiguous symmetric block; even d uses the symmetric
    pattern excluding the center (d=2 -> outer modes of a width-3 channel,
    matching the qubit encoding on {c-1, c+1}). ``adjacent=True`` selects the
    two-mode pattern {0, +1} of a width-2 channel.
    """
    if dimension < 2:
        raise ValueError(f"dimension must be >= 2, got {dimension}")
    if adjacent:
        if dimension != 2:
            raise ValueError("adjacent-mode encoding is a width-2 (d=2) layout")
        return (0, 1)
    if dimension % 2 == 1:
        half = dimension // 2
        return tuple(range(-half, half + 1))
    half = dimension // 2
    return tuple(o for o in range(-half, half + 1) if o != 0)


def channel_modes(channel: ChannelSpec, dimension: int | None = None) -> tuple[int, ...]:
    """Absolute comb modes used when running ``channel`` at ``dimension``."""
    d = channel.max_dimension if dimension is None else dimension
    if d > channel.max_dimension:
        raise ValueError(
            f"dimension {d} exceeds channel capacity {channel.max_dimension}"
        )
    offs = mode_offsets(d, adjacent=channel.width_resonances == 2)
    return tuple(channel.center_mode + o for o in offs)


def bell_state(
    comb: FrequencyComb,
    center_mode: int,
    dimension: int,
    adjacent: bool = False,
) -> BellStateSpec:
    """Entangled state carried by the modes around ``center_mode``.

    Spectral phases follow the comb's per-mode phase slope evaluated at each
    participating mode offset; only phase differences across the d terms
    matter.
    """
    offs = mode_offsets(dimension, adjacent=adjacent)
    lo, hi = center_mode + offs[0], center_mode + offs[-1]
    if lo < 1 or hi > comb.mode_count:
        raise ValueError(
            f"encoding at center {center_mode} spans modes {lo}..{hi}, outside "
            f"comb range 1..{comb.mode_count}"
        )
    phases = tuple(comb.phase_slope_rad * o for o in offs)
    return BellStateSpec(dimension=dimension, center_mode=center_mode, mode_phases=phases)


def jsi_to_text(records: Iterable[JsiRecord], header: str | None = None) -> str:
    """Render records to the on-disk text format (used by the CLI emitter)."""
    buf = io.StringIO()
    write_jsi(records, buf, header=header)
    return buf.getvalue()
