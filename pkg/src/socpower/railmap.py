"""Rail-to-cluster voltage mapping from regulator logs.

Mobile SoCs expose regulator rail voltages through the kernel, but not which
CPU cluster each rail feeds. Scheduling a CPU-bound activation on one cluster
at a time makes its rail's voltage rise while the others stay at their idle
level, so the rail whose mean in-window rise over the pre-window baseline is
largest (and above a spike threshold) identifies the cluster's supply.
Holding an activation at a corner frequency then exposes the corner voltage
as a plateau, read off robustly as the median over the window interior.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, InputFormatError, MissingDataError, PairingError

DEFAULT_SPIKE_THRESHOLD_V = 0.030
DEFAULT_SETTLE_MARGIN_FRAC = 0.10
BASELINE_CAP_S = 30.0


@dataclass(frozen=True)
class RailSample:
    t_s: float
    rail_id: str
    voltage_v: float

    def __post_init__(self):
        if not self.rail_id:
            raise DomainError("rail_id must be non-empty")
        if not math.isfinite(self.voltage_v) or self.voltage_v < 0:
            raise DomainError(
                f"voltage_v must be finite and non-negative, got {self.voltage_v!r}"
            )


@dataclass(frozen=True)
class ScheduleEntry:
    t_start_s: float
    t_end_s: float
    cluster: str
    freq_hz: float

    def __post_init__(self):
        if self.t_end_s <= self.t_start_s:
            raise DomainError(
                f"schedule window for {self.cluster!r} must end after it starts "
                f"({self.t_start_s!r} .. {self.t_end_s!r})"
            )
        if not self.cluster:
            raise DomainError("schedule entry needs a cluster label")
        if not self.freq_hz > 0:
            raise DomainError(f"freq_hz must be positive, got {self.freq_hz!r}")


@dataclass(frozen=True)
class ActivationSchedule:
    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        ordered = sorted(self.entries, key=lambda e: e.t_start_s)
        for a, b in zip(ordered, ordered[1:]):
            if b.t_start_s < a.t_end_s:
                raise DomainError(
                    f"schedule windows overlap: {a.cluster!r} ends at {a.t_end_s!r} "
                    f"but {b.cluster!r} starts at {b.t_start_s!r}"
                )
        object.__setattr__(self, "entries", tuple(ordered))

    def for_cluster(self, cluster: str) -> list[ScheduleEntry]:
        return [e for e in self.entries if e.cluster == cluster]

    @property
    def clusters(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.cluster, None)
        return list(seen)


@dataclass(frozen=True)
class RailMapping:
    """Injective cluster-to-rail assignment plus extracted corner voltages."""

    assignments: dict[str, str]
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        rails = list(self.assignments.values())
        if len(set(rails)) != len(rails):
            shared = [r for r in set(rails) if rails.count(r) > 1]
            raise PairingError(
                f"rail(s) {shared} assigned to more than one cluster; "
                f"a shared rail cannot be attributed"
            )
        for cluster, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise DomainError(
                    f"cluster {cluster!r}: v_min {lo!r} exceeds v_max {hi!r}"
                )


def _rail_series(log: Sequence[RailSample]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-rail (times, voltages) arrays, validating per-rail time order."""
    times: dict[str, list[float]] = {}
    volts: dict[str, list[float]] = {}
    for s in log:
        ts = times.setdefault(s.rail_id, [])
        if ts and s.t_s < ts[-1]:
            raise InputFormatError(
                f"rail {s.rail_id!r}: time went backwards at t={s.t_s!r}"
            )
        ts.append(s.t_s)
        volts.setdefault(s.rail_id, []).append(s.voltage_v)
    return {
        rail: (np.asarray(times[rail]), np.asarray(volts[rail])) for rail in times
    }


def _window_mean(
    series: tuple[np.ndarray, np.ndarray], t0: float, t1: float
) -> Optional[float]:
    t, v = series
    mask = (t >= t0) & (t < t1)
    if not mask.any():
        return None
    return float(v[mask].mean())


def detect_activations(
    log: Sequence[RailSample],
    schedule: ActivationSchedule,
    spike_threshold_v: float = DEFAULT_SPIKE_THRESHOLD_V,
    baseline_cap_s: float = BASELINE_CAP_S,
) -> RailMapping:
    """Assign each scheduled cluster to the rail that spikes in its windows.

    The baseline for a window is the gap immediately before it, the same
    duration capped at ``baseline_cap_s`` and never reaching into the
    previous window. A cluster with no rail above the threshold is an
    unmapped-cluster error; two clusters preferring the same rail is a
    conflict, since a shared rail cannot be attributed.
    """
    if not log:
        raise MissingDataError("rail log is empty")
    series = _rail_series(log)
    entries = schedule.entries

    rises: dict[str, dict[str, list[float]]] = {}
    for idx, entry in enumerate(entries):
        duration = entry.t_end_s - entry.t_start_s
        base_len = min(duration, baseline_cap_s)
        base_start = entry.t_start_s - base_len
        if idx > 0:
            base_start = max(base_start, entries[idx - 1].t_end_s)
        if base_start >= entry.t_start_s:
            raise MissingDataError(
                f"no baseline gap before window of {entry.cluster!r} at "
                f"t={entry.t_start_s!r}"
            )
        for rail, data in series.items():
            base = _window_mean(data, base_start, entry.t_start_s)
            inside = _window_mean(data, entry.t_start_s, entry.t_end_s)
            if base is None or inside is None:
                raise MissingDataError(
                    f"rail {rail!r}: log does not cover window/baseline of "
                    f"{entry.cluster!r} at t={entry.t_start_s!r}"
                )
            rises.setdefault(entry.cluster, {}).setdefault(rail, []).append(inside - base)

    assignments: dict[str, str] = {}
    claimed: dict[str, str] = {}
    for cluster in schedule.clusters:
        mean_rise = {rail: float(np.mean(r)) for rail, r in rises[cluster].items()}
        best_rail = max(sorted(mean_rise), key=lambda r: mean_rise[r])
        if mean_rise[best_rail] <= spike_threshold_v:
            raise MissingDataError(
                f"cluster {cluster!r}: no rail rises above {spike_threshold_v!r} V "
                f"in its windows (best {best_rail!r} at {mean_rise[best_rail]!r} V)"
            )
        if best_rail in claimed:
            raise PairingError(
                f"rail {best_rail!r} is the best match for both "
                f"{claimed[best_rail]!r} and {cluster!r}; shared rails are not attributable"
            )
        claimed[best_rail] = cluster
        assignments[cluster] = best_rail
    return RailMapping(assignments=assignments)


def extract_voltage_range(
    log: Sequence[RailSample],
    mapping: RailMapping,
    cluster: str,
    schedule: ActivationSchedule,
    settle_margin_frac: float = DEFAULT_SETTLE_MARGIN_FRAC,
) -> tuple[float, float]:
    """Corner voltages for a mapped cluster as median window plateaus.

    The lowest and highest scheduled frequencies for the cluster identify the
    f_min and f_max windows; a settle margin is trimmed from both ends of
    each window before taking the median.
    """
    if cluster not in mapping.assignments:
        raise MissingDataError(f"cluster {cluster!r} has no rail assignment")
    if not 0 <= settle_margin_frac < 0.5:
        raise DomainError(
            f"settle_margin_frac must lie in [0, 0.5), got {settle_margin_frac!r}"
        )
    windows = schedule.for_cluster(cluster)
    freqs = sorted({w.freq_hz for w in windows})
    if len(freqs) < 2:
        raise MissingDataError(
            f"cluster {cluster!r}: schedule needs windows at two distinct "
            f"frequencies, found {freqs}"
        )
    rail = mapping.assignments[cluster]
    series = _rail_series(log).get(rail)
    if series is None:
        raise MissingDataError(f"rail {rail!r} absent from log")

    def plateau(freq: float) -> float:
        values: list[np.ndarray] = []
        for w in windows:
            if w.freq_hz != freq:
                continue
            margin = (w.t_end_s - w.t_start_s) * settle_margin_frac
            t, v = series
            mask = (t >= w.t_start_s + margin) & (t < w.t_end_s - margin)
            if mask.any():
                values.append(v[mask])
        if not values:
            raise MissingDataError(
                f"cluster {cluster!r}: no samples inside its {freq!r} Hz window interior"
            )
        return float(np.median(np.concatenate(values)))

    return plateau(freqs[0]), plateau(freqs[-1])


def map_rails(
    log: Sequence[RailSample],
    schedule: ActivationSchedule,
    spike_threshold_v: float = DEFAULT_SPIKE_THRESHOLD_V,
    settle_margin_frac: float = DEFAULT_SETTLE_MARGIN_FRAC,
) -> RailMapping:
    """Detect assignments, then extract (v_min, v_max) per mapped cluster."""
    detected = detect_activations(log, schedule, spike_threshold_v)
    ranges = {
        cluster: extract_voltage_range(log, detected, cluster, schedule, settle_margin_frac)
        for cluster in detected.assignments
    }
    return RailMapping(assignments=dict(detected.assignments), ranges=ranges)


def build_activation_schedule(
    clusters: Sequence[tuple[str, float, float]],
    window_s: float = 60.0,
    gap_s: float = 30.0,
    start_s: float = 30.0,
) -> ActivationSchedule:
    """Back-to-back corner windows: per cluster one at f_min, one at f_max,
    separated by idle gaps that double as detection baselines."""
    if window_s <= 0 or gap_s <= 0 or start_s <= 0:
        raise DomainError("window_s, gap_s, and start_s must all be positive")
    entries = []
    t = start_s
    for name, f_min_hz, f_max_hz in clusters:
        for freq in (f_min_hz, f_max_hz):
            entries.append(ScheduleEntry(t, t + window_s, name, freq))
            t += window_s + gap_s
    return ActivationSchedule(tuple(entries))


def synth_rail_log(
    cluster_rails: dict[str, str],
    cluster_levels: dict[str, tuple[float, float]],
    schedule: ActivationSchedule,
    cadence_s: float = 0.1,
    noise_v: float = 0.0,
    seed: int = 0,
    tail_s: float = 10.0,
) -> list[RailSample]:
    """Synthetic regulator log consistent with a known ground-truth mapping.

    Each rail idles at its cluster's v_min and, during that cluster's
    windows, sits at the voltage for the scheduled frequency (linear between
    the cluster's lowest and highest scheduled frequencies). Noise is
    uniform on [-noise_v, +noise_v] so medians stay within noise_v of the
    plateau. Deterministic per seed.
    """
    if cadence_s <= 0:
        raise DomainError(f"cadence_s must be positive, got {cadence_s!r}")
    if noise_v < 0:
        raise DomainError(f"noise_v must be non-negative, got {noise_v!r}")
    missing = set(cluster_rails) - set(cluster_levels)
    if missing:
        raise MissingDataError(f"no voltage levels for clusters: {sorted(missing)}")

    freq_span: dict[str, tuple[float, float]] = {}
    for cluster in cluster_rails:
        freqs = sorted({e.freq_hz for e in schedule.for_cluster(cluster)})
        if freqs:
            freq_span[cluster] = (freqs[0], freqs[-1])

    def level_in_window(cluster: str, freq: float) -> float:
        v_lo, v_hi = cluster_levels[cluster]
        f_lo, f_hi = freq_span[cluster]
        if f_hi == f_lo:
            return v_hi
        t = (freq - f_lo) / (f_hi - f_lo)
        return v_lo + t * (v_hi - v_lo)

    end = max(e.t_end_s for e in schedule.entries) + tail_s
    n = int(round(end / cadence_s))
    times = np.arange(n) * cadence_s
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    samples: list[RailSample] = []
    for cluster in sorted(cluster_rails):
        rail = cluster_rails[cluster]
        idle = cluster_levels[cluster][0]
        levels = np.full(n, idle)
        for e in schedule.for_cluster(cluster):
            mask = (times >= e.t_start_s) & (times < e.t_end_s)
            levels[mask] = level_in_window(cluster, e.freq_hz)
        if noise_v > 0:
            levels = levels + rng.uniform(-noise_v, noise_v, size=n)
        for t, v in zip(times, levels):
            samples.append(RailSample(float(t), rail, max(float(v), 0.0)))
    samples.sort(key=lambda s: (s.t_s, s.rail_id))
    return samples


RAIL_LOG_HEADER = ("t_s", "rail_id", "voltage_v")


def write_rail_log(samples: Sequence[RailSample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAIL_LOG_HEADER)
        for s in samples:
            writer.writerow([repr(s.t_s), s.rail_id, repr(s.voltage_v)])


def read_rail_log(path: str | Path) -> list[RailSample]:
    samples: list[RailSample] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RAIL_LOG_HEADER:
            raise InputFormatError(
                f"{path}: expected header {','.join(RAIL_LOG_HEADER)!r}"
            )
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise InputFormatError(f"{path}:{row_no}: expected 3 fields, got {len(row)}")
            try:
                samples.append(RailSample(float(row[0]), row[1], float(row[2])))
            except (ValueError, DomainError) as exc:
                raise InputFormatError(f"{path}:{row_no}: {exc}") from exc
    return samples


def read_schedule(path: str | Path) -> ActivationSchedule:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise InputFormatError(f"{path}: schedule must be a JSON array")
    entries = []
    for i, item in enumerate(raw):
        try:
            entries.append(
                ScheduleEntry(
                    t_start_s=item["t_start_s"],
                    t_end_s=item["t_end_s"],
                    cluster=item["cluster"],
                    freq_hz=item["freq_hz"],
                )
            )
        except (KeyError, TypeError) as exc:
            raise InputFormatError(f"{path}: entry {i} malformed: {exc}") from exc
    return ActivationSchedule(tuple(entries))


def write_schedule(schedule: ActivationSchedule, path: str | Path) -> None:
    doc = [
        {
            "t_start_s": e.t_start_s,
            "t_end_s": e.t_end_s,
            "cluster": e.cluster,
            "freq_hz": e.freq_hz,
        }
        for e in schedule.entries
    ]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
