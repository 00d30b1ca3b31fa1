"""Decoding x86 model-specific registers to CPU supply voltage.

Intel parts report the active voltage identifier in IA32_PERF_STATUS
(address 0x198), bits 47:32, scaled by 2^-13 volts per unit. AMD parts use a
serial VID encoding that maps a VID byte linearly downwards from a
generation-dependent offset. Both decoders are pure; live register access
sits behind a small source interface with a file-backed replay
implementation so decoded values can be tested without privileges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import DomainError, InputFormatError, MissingDataError

MSR_PERF_STATUS = 0x198
INTEL_VID_SCALE_V = 2.0 ** -13

PLAUSIBLE_MIN_V = 0.2
PLAUSIBLE_MAX_V = 1.6


@dataclass(frozen=True)
class Msr64:
    """A raw 64-bit register value."""

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < 1 << 64:
            raise DomainError(f"raw must fit in 64 unsigned bits, got {self.raw!r}")


@dataclass(frozen=True)
class AmdSviParams:
    """Generation-dependent constants of the AMD serial VID line."""

    v_offset: float
    k_step: float

    def __post_init__(self):
        for name in ("v_offset", "k_step"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")


def decode_intel_vid(msr: Msr64 | int) -> float:
    """Voltage from IA32_PERF_STATUS: bits 47:32 times 2^-13 V."""
    raw = msr.raw if isinstance(msr, Msr64) else Msr64(msr).raw
    field = (raw >> 32) & 0xFFFF
    return field * INTEL_VID_SCALE_V


def decode_amd_svi2(vid: int, params: AmdSviParams) -> float:
    """Voltage from an extracted AMD VID byte: v_offset - k_step * vid."""
    if not 0 <= vid <= 0xFF:
        raise DomainError(f"vid must fit in 8 unsigned bits, got {vid!r}")
    return params.v_offset - params.k_step * vid


def is_plausible_voltage(
    voltage_v: float,
    low_v: float = PLAUSIBLE_MIN_V,
    high_v: float = PLAUSIBLE_MAX_V,
) -> bool:
    """Whether a decoded value looks like a real CPU core voltage."""
    return math.isfinite(voltage_v) and low_v <= voltage_v <= high_v


@dataclass(frozen=True)
class DecodedVoltage:
    voltage_v: float
    plausible: bool


def decode(msr: Msr64 | int, encoding: str = "intel", params: AmdSviParams | None = None) -> DecodedVoltage:
    """Decode plus plausibility flag in one step.

    For the AMD encoding the register value is taken as an already-extracted
    VID byte, since the field position inside MSR_PSTATE_n varies by
    generation.
    """
    if encoding == "intel":
        v = decode_intel_vid(msr)
    elif encoding == "amd":
        if params is None:
            raise DomainError("the amd encoding needs v_offset and k_step")
        raw = msr.raw if isinstance(msr, Msr64) else msr
        v = decode_amd_svi2(raw, params)
    else:
        raise DomainError(f"unknown encoding {encoding!r}; expected 'intel' or 'amd'")
    return DecodedVoltage(voltage_v=v, plausible=is_plausible_voltage(v))


class RegisterSource(Protocol):
    """Anything that can produce a 64-bit value for an MSR address."""

    def read(self, address: int) -> Msr64: ...


class ReplayRegisterSource:
    """Register reads recorded to a file, one `address_hex,value_hex` per line.

    Repeated lines for the same address replay in order; once exhausted the
    last value repeats, matching a register that has settled.
    """

    def __init__(self, path: str | Path):
        self._values: dict[int, list[int]] = {}
        self._cursor: dict[int, int] = {}
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise InputFormatError(
                        f"{path}:{line_no}: expected 'address_hex,value_hex'"
                    )
                try:
                    address = int(parts[0], 16)
                    value = int(parts[1], 16)
                except ValueError as exc:
                    raise InputFormatError(f"{path}:{line_no}: {exc}") from exc
                self._values.setdefault(address, []).append(value)

    def read(self, address: int) -> Msr64:
        recorded = self._values.get(address)
        if not recorded:
            raise MissingDataError(
                f"no recorded value for register {address:#x}"
            )
        i = self._cursor.get(address, 0)
        value = recorded[min(i, len(recorded) - 1)]
        self._cursor[address] = i + 1
        return Msr64(value)
