"""Device power-profile documents.

A profile bundles the static cluster descriptions of one device with the
fitted model parameters and, when rail mapping has run, the regulator rail
each cluster draws from. Serialized as JSON with lower_snake_case fields and
SI units throughout; floats keep full precision so that a load/save round
trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import InputFormatError, MissingDataError
from .powermodel import ClusterSpec, FittedParams

_SPEC_FIELDS = ("f_min_hz", "f_max_hz", "v_min_v", "v_max_v")
_PARAM_FIELDS = (
    "c_eff_at_fmin_f",
    "c_eff_at_fmax_f",
    "c_eff_mean_f",
    "epsilon_at_fmin",
    "epsilon_at_fmax",
    "epsilon_mean",
)


@dataclass
class ClusterProfile:
    spec: ClusterSpec
    params: Optional[FittedParams] = None
    rail_id: Optional[str] = None

    def to_dict(self) -> dict:
        d: dict = {"name": self.spec.name, "core_ids": list(self.spec.core_ids)}
        for name in _SPEC_FIELDS:
            d[name] = getattr(self.spec, name)
        if self.rail_id is not None:
            d["rail_id"] = self.rail_id
        if self.params is not None:
            for name in _PARAM_FIELDS:
                d[name] = getattr(self.params, name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterProfile":
        try:
            spec = ClusterSpec(
                name=d["name"],
                core_ids=tuple(d["core_ids"]),
                f_min_hz=d["f_min_hz"],
                f_max_hz=d["f_max_hz"],
                v_min_v=d["v_min_v"],
                v_max_v=d["v_max_v"],
            )
        except KeyError as exc:
            raise InputFormatError(f"cluster object missing field {exc}") from exc
        params = None
        if any(name in d for name in _PARAM_FIELDS):
            try:
                params = FittedParams(**{name: d[name] for name in _PARAM_FIELDS})
            except KeyError as exc:
                raise InputFormatError(
                    f"cluster {spec.name}: fitted parameters incomplete, missing {exc}"
                ) from exc
        return cls(spec=spec, params=params, rail_id=d.get("rail_id"))


@dataclass
class DeviceProfile:
    device: str
    soc: str
    clusters: list[ClusterProfile] = field(default_factory=list)

    def cluster(self, name: str) -> ClusterProfile:
        for c in self.clusters:
            if c.spec.name == name:
                return c
        known = ", ".join(c.spec.name for c in self.clusters) or "<none>"
        raise MissingDataError(f"no cluster named {name!r} in profile (have: {known})")

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "soc": self.soc,
            "voltage_interpolation": "linear",
            "clusters": [c.to_dict() for c in self.clusters],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceProfile":
        try:
            clusters = [ClusterProfile.from_dict(c) for c in d["clusters"]]
            return cls(device=d["device"], soc=d["soc"], clusters=clusters)
        except KeyError as exc:
            raise InputFormatError(f"profile missing field {exc}") from exc


def save_profile(profile: DeviceProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n")


def load_profile(path: str | Path) -> DeviceProfile:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputFormatError(f"{path}: profile must be a JSON object")
    return DeviceProfile.from_dict(raw)
