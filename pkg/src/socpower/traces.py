"""Fuel-gauge trace parsing, phase averaging, and activation-strategy reduction.

A measurement trace is a sequence of battery telemetry samples taken at a
nominal 0.5 s cadence while a scripted protocol walks a cluster through four
phases: idle_min, stress_min, idle_max, stress_max (idle always precedes the
matching stress phase, and each phase may repeat several times). Under
CPU-bound isolation the battery draw approximates CPU power, so cluster
dynamic power falls out as phase-mean differences:

* per-cluster activation: P_dyn(f) = P_load(f) - P_idle(f), with every
  cluster core online and all except the housekeeping core stressed;
* single activation: one core k at a time alongside the housekeeping core
  k0, P_core_k(f) = (P_load_k(f) + P_idle_k0(f)) - P_idle_k0k(f), summed
  over the cluster's cores.

Samples outside the thermal acceptance band are rejected before averaging.
"""

from __future__ import annotations

import csv
import math
import statistics
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, InputFormatError, MissingDataError, PairingError

PHASES = ("idle_min", "stress_min", "idle_max", "stress_max")
DEFAULT_TEMP_BAND_C = (28.0, 32.0)

PER_CLUSTER = "per_cluster"
SINGLE = "single"


@dataclass(frozen=True)
class PowerSample:
    """One telemetry sample; metadata fields are filled when parsed from a
    labeled protocol trace and stay None for bare readings."""

    t_s: float
    v_batt_v: float
    i_batt_a: float
    freq_hz: float
    util_pct: float
    temp_c: float
    phase: Optional[str] = None
    cluster: Optional[str] = None
    active_cores: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not self.v_batt_v > 0:
            raise DomainError(f"v_batt_v must be positive, got {self.v_batt_v!r}")


@dataclass(frozen=True)
class PhaseMeasurement:
    """Aggregated battery power for one protocol phase.

    ``std_power_w`` is the population deviation over individual in-band
    samples; ``std_across_repeats_w`` is the sample deviation across repeat
    means and is None for a single run. ``mean_power_w`` is the mean of the
    repeat means.
    """

    phase: Optional[str]
    cluster: Optional[str]
    active_cores: Optional[tuple[int, ...]]
    freq_hz: float
    mean_power_w: float
    std_power_w: float
    n_samples: int
    n_rejected_thermal: int
    n_repeats: int = 1
    std_across_repeats_w: Optional[float] = None


@dataclass(frozen=True)
class ClusterDynResult:
    """Reduced dynamic power of one cluster at one frequency."""

    cluster: str
    freq_hz: float
    p_dyn_w: float
    strategy: str
    per_core_w: Optional[tuple[tuple[int, float], ...]] = None
    p_idle_w: Optional[float] = None
    p_load_w: Optional[float] = None

    def __post_init__(self):
        if self.strategy not in (PER_CLUSTER, SINGLE):
            raise DomainError(f"strategy must be {PER_CLUSTER} or {SINGLE}, got {self.strategy!r}")
        if self.strategy == SINGLE:
            if self.per_core_w is None:
                raise DomainError("single-strategy result requires per_core_w")
            total = sum(w for _, w in self.per_core_w)
            if abs(total - self.p_dyn_w) > 1e-9:
                raise DomainError(
                    f"single-strategy total {self.p_dyn_w!r} differs from per-core "
                    f"sum {total!r} by more than 1e-9 W"
                )


def battery_power(sample: PowerSample) -> float:
    """Instantaneous battery draw in watts: V_batt * |I_batt|.

    The magnitude makes the value convention-independent; use
    normalize_discharge_sign when the signed current itself matters.
    """
    return sample.v_batt_v * abs(sample.i_batt_a)


def normalize_discharge_sign(
    samples: Sequence[PowerSample],
) -> tuple[list[PowerSample], str]:
    """Flip currents if the trace used a discharge-negative convention.

    Returns the normalized samples and which convention the raw file used
    ("discharge_positive" or "discharge_negative"). Protocol traces are
    dominated by discharge, so the median current sign identifies it.
    """
    if not samples:
        raise MissingDataError("cannot infer sign convention from an empty trace")
    median_i = statistics.median(s.i_batt_a for s in samples)
    if median_i < 0:
        flipped = [replace(s, i_batt_a=-s.i_batt_a) for s in samples]
        return flipped, "discharge_negative"
    return list(samples), "discharge_positive"


def _in_band(sample: PowerSample, band: tuple[float, float]) -> bool:
    return band[0] <= sample.temp_c <= band[1]


def phase_average(
    samples: Sequence[PowerSample] | Sequence[Sequence[PowerSample]],
    temp_band: tuple[float, float] = DEFAULT_TEMP_BAND_C,
) -> PhaseMeasurement:
    """Mean and deviation of battery power over one phase.

    Accepts a flat sample sequence (one run) or a sequence of runs (repeats).
    Thermal filtering happens per sample; with repeats the reported mean is
    the mean of the per-repeat means. All in-band samples must agree on
    phase, cluster, and pinned frequency.
    """
    if len(samples) == 0:
        raise MissingDataError("phase_average requires a non-empty sample sequence")
    if isinstance(samples[0], PowerSample):
        runs: list[Sequence[PowerSample]] = [samples]  # type: ignore[list-item]
    else:
        runs = list(samples)  # type: ignore[arg-type]

    kept_runs: list[list[float]] = []
    rejected = 0
    meta: Optional[PowerSample] = None
    for run in runs:
        kept: list[float] = []
        for s in run:
            if not _in_band(s, temp_band):
                rejected += 1
                continue
            if meta is None:
                meta = s
            elif (s.phase, s.cluster, s.freq_hz) != (meta.phase, meta.cluster, meta.freq_hz):
                raise PairingError(
                    f"mixed phase metadata within one average: "
                    f"({s.phase}, {s.cluster}, {s.freq_hz!r}) vs "
                    f"({meta.phase}, {meta.cluster}, {meta.freq_hz!r})"
                )
            kept.append(battery_power(s))
        if kept:
            kept_runs.append(kept)

    if not kept_runs or meta is None:
        raise MissingDataError(
            f"all samples rejected by thermal band {temp_band} "
            f"({rejected} rejected); phase is empty"
        )

    run_means = [float(np.mean(k)) for k in kept_runs]
    pooled = np.concatenate([np.asarray(k) for k in kept_runs])
    return PhaseMeasurement(
        phase=meta.phase,
        cluster=meta.cluster,
        active_cores=meta.active_cores,
        freq_hz=meta.freq_hz,
        mean_power_w=float(np.mean(run_means)),
        std_power_w=float(np.std(pooled)),
        n_samples=int(pooled.size),
        n_rejected_thermal=rejected,
        n_repeats=len(kept_runs),
        std_across_repeats_w=(
            float(np.std(run_means, ddof=1)) if len(run_means) > 1 else None
        ),
    )


def dynamic_power(p_load_w: float, p_idle_w: float) -> float:
    """Dynamic power as the load/idle difference.

    Noise can push the difference negative; that is reported as-is with a
    warning so the caller can decide how to treat the run.
    """
    for name, value in (("p_load_w", p_load_w), ("p_idle_w", p_idle_w)):
        if not math.isfinite(value) or value < 0:
            raise DomainError(f"{name} must be finite and non-negative, got {value!r}")
    diff = p_load_w - p_idle_w
    if diff < 0:
        warnings.warn(
            f"negative dynamic power {diff!r} W (load {p_load_w!r} below idle "
            f"{p_idle_w!r}); keeping the raw difference",
            stacklevel=2,
        )
    return diff


def per_cluster_reduce(
    idle: PhaseMeasurement,
    load: PhaseMeasurement,
    housekeeping_core: Optional[int] = None,
) -> ClusterDynResult:
    """Whole-cluster reduction: P_dyn = mean(load) - mean(idle)."""
    if idle.cluster != load.cluster:
        raise PairingError(
            f"idle/load cluster mismatch: {idle.cluster!r} vs {load.cluster!r}"
        )
    if idle.freq_hz != load.freq_hz:
        raise PairingError(
            f"idle/load frequency mismatch for cluster {idle.cluster!r}: "
            f"{idle.freq_hz!r} vs {load.freq_hz!r}"
        )
    if (
        housekeeping_core is not None
        and load.active_cores is not None
        and housekeeping_core in load.active_cores
    ):
        raise PairingError(
            f"load phase stresses housekeeping core {housekeeping_core}; "
            f"it must stay shielded"
        )
    return ClusterDynResult(
        cluster=idle.cluster or "",
        freq_hz=idle.freq_hz,
        p_dyn_w=dynamic_power(load.mean_power_w, idle.mean_power_w),
        strategy=PER_CLUSTER,
        p_idle_w=idle.mean_power_w,
        p_load_w=load.mean_power_w,
    )


def single_reduce(
    core_phases: Sequence[tuple[int, float, float]],
    p_idle_k0_w: float,
    *,
    cluster: str,
    freq_hz: float,
    housekeeping_core: Optional[int] = None,
) -> ClusterDynResult:
    """Per-core reduction summed to a cluster total.

    ``core_phases`` holds (core_id, P_idle_k0k_w, P_load_k_w) per measured
    core; the housekeeping core must not appear. Per core:
    P_core_k = (P_load_k + P_idle_k0) - P_idle_k0k.
    """
    if not core_phases:
        raise MissingDataError("single_reduce requires at least one measured core")
    if not math.isfinite(p_idle_k0_w) or p_idle_k0_w < 0:
        raise DomainError(f"p_idle_k0_w must be finite and non-negative, got {p_idle_k0_w!r}")
    seen: set[int] = set()
    per_core: list[tuple[int, float]] = []
    for core_id, p_idle_pair, p_load in core_phases:
        if core_id in seen:
            raise PairingError(f"duplicate core_id {core_id} in single-activation phases")
        if housekeeping_core is not None and core_id == housekeeping_core:
            raise PairingError(
                f"housekeeping core {core_id} cannot appear as a measured core"
            )
        seen.add(core_id)
        p_core = (p_load + p_idle_k0_w) - p_idle_pair
        if p_core < 0:
            warnings.warn(
                f"negative per-core power {p_core!r} W for core {core_id}; "
                f"keeping the raw value",
                stacklevel=2,
            )
        per_core.append((int(core_id), p_core))
    total = sum(w for _, w in per_core)
    return ClusterDynResult(
        cluster=cluster,
        freq_hz=freq_hz,
        p_dyn_w=total,
        strategy=SINGLE,
        per_core_w=tuple(per_core),
        p_idle_w=p_idle_k0_w,
    )


def synth_trace(
    p_idle_w: float,
    p_dyn_w: float,
    noise_sigma_w: float = 0.0,
    duration_s: float = 600.0,
    cadence_s: float = 0.5,
    seed: int = 0,
    *,
    repeats: int = 1,
    cluster: str = "cluster0",
    freq_hz: float = 1.0e9,
    corner: str = "max",
    v_batt_v: float = 3.85,
    temp_c: float = 30.0,
    idle_cores: tuple[int, ...] = (0, 1),
    load_cores: tuple[int, ...] = (1,),
    start_t_s: float = 0.0,
) -> list[PowerSample]:
    """Generate an idle/stress phase pair with optional Gaussian power noise.

    Deterministic for a given seed. Each repeat emits one idle phase at
    p_idle_w followed by one stress phase at p_idle_w + p_dyn_w, each
    duration_s long at the given cadence; phase labels carry the corner
    suffix. Per-phase means recover the levels within 3 sigma / sqrt(n).
    """
    if not cadence_s > 0:
        raise DomainError(f"cadence_s must be positive, got {cadence_s!r}")
    if duration_s < cadence_s:
        raise DomainError(
            f"duration_s ({duration_s!r}) must be at least cadence_s ({cadence_s!r})"
        )
    if noise_sigma_w < 0:
        raise DomainError(f"noise_sigma_w must be non-negative, got {noise_sigma_w!r}")
    if repeats < 1:
        raise DomainError(f"repeats must be at least 1, got {repeats!r}")
    if corner not in ("min", "max"):
        raise DomainError(f"corner must be 'min' or 'max', got {corner!r}")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = int(round(duration_s / cadence_s))
    samples: list[PowerSample] = []
    t = start_t_s
    for _ in range(repeats):
        for phase, level, util, cores in (
            (f"idle_{corner}", p_idle_w, 0.0, idle_cores),
            (f"stress_{corner}", p_idle_w + p_dyn_w, 100.0, load_cores),
        ):
            noise = rng.normal(0.0, noise_sigma_w, size=n) if noise_sigma_w > 0 else np.zeros(n)
            for j in range(n):
                power = max(level + float(noise[j]), 0.0)
                samples.append(
                    PowerSample(
                        t_s=t,
                        v_batt_v=v_batt_v,
                        i_batt_a=power / v_batt_v,
                        freq_hz=freq_hz,
                        util_pct=util,
                        temp_c=temp_c,
                        phase=phase,
                        cluster=cluster,
                        active_cores=tuple(cores),
                    )
                )
                t += cadence_s
    return samples


def synth_protocol_trace(
    cluster_name: str,
    core_ids: Sequence[int],
    f_min_hz: float,
    f_max_hz: float,
    *,
    strategy: str = PER_CLUSTER,
    p_idle_w: float = 0.8,
    p_dyn_at_fmin_w: float = 0.2,
    p_dyn_at_fmax_w: float = 0.8,
    per_core_at_fmin_w: Optional[dict[int, float]] = None,
    per_core_at_fmax_w: Optional[dict[int, float]] = None,
    pair_idle_extra_w: float = 0.0,
    housekeeping_core: int = 0,
    noise_sigma_w: float = 0.0,
    duration_s: float = 600.0,
    cadence_s: float = 0.5,
    seed: int = 0,
    repeats: int = 1,
    v_batt_v: float = 3.85,
    temp_c: float = 30.0,
) -> list[PowerSample]:
    """Full measurement-protocol trace for one cluster at both corners.

    For the per-cluster strategy the idle phases list every cluster core and
    the stress phases list the loaded set (cluster minus housekeeping core
    when it belongs to the cluster). For the single strategy each corner gets
    a housekeeping-only idle baseline, then an idle/stress pair per measured
    core; stress levels are constructed so the reduction recovers the given
    per-core ground truth exactly in the noiseless case.
    """
    if strategy not in (PER_CLUSTER, SINGLE):
        raise DomainError(f"strategy must be {PER_CLUSTER} or {SINGLE}, got {strategy!r}")
    if not cadence_s > 0:
        raise DomainError(f"cadence_s must be positive, got {cadence_s!r}")
    if duration_s < cadence_s:
        raise DomainError(
            f"duration_s ({duration_s!r}) must be at least cadence_s ({cadence_s!r})"
        )
    core_ids = tuple(int(c) for c in core_ids)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = int(round(duration_s / cadence_s))
    samples: list[PowerSample] = []
    t = 0.0

    def emit(level_w: float, phase: str, freq: float, util: float, cores: tuple[int, ...]):
        nonlocal t
        noise = rng.normal(0.0, noise_sigma_w, size=n) if noise_sigma_w > 0 else np.zeros(n)
        for j in range(n):
            power = max(level_w + float(noise[j]), 0.0)
            samples.append(
                PowerSample(
                    t_s=t,
                    v_batt_v=v_batt_v,
                    i_batt_a=power / v_batt_v,
                    freq_hz=freq,
                    util_pct=util,
                    temp_c=temp_c,
                    phase=phase,
                    cluster=cluster_name,
                    active_cores=cores,
                )
            )
            t += cadence_s

    for corner, freq in (("min", f_min_hz), ("max", f_max_hz)):
        p_dyn = p_dyn_at_fmin_w if corner == "min" else p_dyn_at_fmax_w
        per_core = per_core_at_fmin_w if corner == "min" else per_core_at_fmax_w
        for _ in range(repeats):
            if strategy == PER_CLUSTER:
                loaded = tuple(c for c in core_ids if c != housekeeping_core) or core_ids
                emit(p_idle_w, f"idle_{corner}", freq, 0.0, core_ids)
                emit(p_idle_w + p_dyn, f"stress_{corner}", freq, 100.0, loaded)
            else:
                if per_core is None:
                    raise DomainError(
                        f"single-strategy synthesis needs per-core ground truth at f_{corner}"
                    )
                emit(p_idle_w, f"idle_{corner}", freq, 0.0, (housekeeping_core,))
                for k in core_ids:
                    if k == housekeeping_core:
                        continue
                    pair_level = p_idle_w + pair_idle_extra_w
                    load_level = pair_level + per_core[k] - p_idle_w
                    emit(pair_level, f"idle_{corner}", freq, 0.0, (housekeeping_core, k))
                    emit(load_level, f"stress_{corner}", freq, 100.0, (k,))
    return samples


@dataclass(frozen=True)
class _Segment:
    phase: str
    cluster: str
    active_cores: Optional[tuple[int, ...]]
    samples: tuple[PowerSample, ...]


def segment_phases(samples: Sequence[PowerSample]) -> list[_Segment]:
    """Split a labeled trace into contiguous runs of identical phase labels."""
    segments: list[_Segment] = []
    current: list[PowerSample] = []
    key = None
    for s in samples:
        if s.phase is None or s.cluster is None:
            raise MissingDataError(
                f"sample at t={s.t_s!r} lacks phase/cluster labels; "
                f"reduction needs a labeled trace"
            )
        k = (s.phase, s.cluster, s.active_cores)
        if k != key and current:
            segments.append(_Segment(key[0], key[1], key[2], tuple(current)))
            current = []
        key = k
        current.append(s)
    if current:
        segments.append(_Segment(key[0], key[1], key[2], tuple(current)))
    return segments


def reduce_trace(
    samples: Sequence[PowerSample],
    strategy: str,
    housekeeping_core: int = 0,
    temp_band: tuple[float, float] = DEFAULT_TEMP_BAND_C,
) -> list[ClusterDynResult]:
    """Reduce a labeled protocol trace to per-cluster dynamic power.

    Repeated segments with the same (cluster, phase, active cores) are
    treated as protocol repeats and averaged together. Results come out
    sorted by cluster then corner (min before max).
    """
    if strategy not in (PER_CLUSTER, SINGLE):
        raise DomainError(f"strategy must be {PER_CLUSTER} or {SINGLE}, got {strategy!r}")
    segments = segment_phases(samples)
    if not segments:
        raise MissingDataError("trace contains no labeled samples")

    groups: dict[tuple, list[Sequence[PowerSample]]] = {}
    for seg in segments:
        if seg.phase not in PHASES:
            raise InputFormatError(
                f"unknown phase label {seg.phase!r}; expected one of {PHASES}"
            )
        groups.setdefault((seg.cluster, seg.phase, seg.active_cores), []).append(seg.samples)

    clusters = sorted({c for c, _, _ in groups})
    results: list[ClusterDynResult] = []
    for cluster_name in clusters:
        for corner in ("min", "max"):
            idle_key = f"idle_{corner}"
            stress_key = f"stress_{corner}"
            idle_groups = {
                cores: runs
                for (c, p, cores), runs in groups.items()
                if c == cluster_name and p == idle_key
            }
            stress_groups = {
                cores: runs
                for (c, p, cores), runs in groups.items()
                if c == cluster_name and p == stress_key
            }
            if not idle_groups and not stress_groups:
                continue
            if not idle_groups:
                raise MissingDataError(
                    f"cluster {cluster_name!r}: phase {idle_key} missing from trace"
                )
            if not stress_groups:
                raise MissingDataError(
                    f"cluster {cluster_name!r}: phase {stress_key} missing from trace"
                )

            if strategy == PER_CLUSTER:
                idle_runs = [run for runs in idle_groups.values() for run in runs]
                stress_runs = [run for runs in stress_groups.values() for run in runs]
                idle = phase_average(idle_runs, temp_band)
                load = phase_average(stress_runs, temp_band)
                results.append(per_cluster_reduce(idle, load, housekeeping_core))
            else:
                baseline_runs = idle_groups.get((housekeeping_core,))
                if baseline_runs is None:
                    raise MissingDataError(
                        f"cluster {cluster_name!r}: no housekeeping-only idle baseline "
                        f"(active_cores == {housekeeping_core}) in phase {idle_key}"
                    )
                baseline = phase_average(baseline_runs, temp_band)
                core_phases: list[tuple[int, float, float]] = []
                freq = baseline.freq_hz
                for cores, runs in sorted(idle_groups.items(), key=lambda kv: kv[0]):
                    if cores == (housekeeping_core,):
                        continue
                    others = [c for c in cores if c != housekeeping_core]
                    if len(others) != 1:
                        raise InputFormatError(
                            f"cluster {cluster_name!r}: idle pair {cores} must hold the "
                            f"housekeeping core plus exactly one target core"
                        )
                    k = others[0]
                    load_runs = stress_groups.get((k,))
                    if load_runs is None:
                        raise MissingDataError(
                            f"cluster {cluster_name!r}: core {k} has an idle pair but no "
                            f"{stress_key} phase"
                        )
                    pair = phase_average(runs, temp_band)
                    load = phase_average(load_runs, temp_band)
                    if pair.freq_hz != freq or load.freq_hz != freq:
                        raise PairingError(
                            f"cluster {cluster_name!r} core {k}: frequency mismatch "
                            f"across single-activation phases"
                        )
                    core_phases.append((k, pair.mean_power_w, load.mean_power_w))
                results.append(
                    single_reduce(
                        core_phases,
                        baseline.mean_power_w,
                        cluster=cluster_name,
                        freq_hz=freq,
                        housekeeping_core=housekeeping_core,
                    )
                )
    if not results:
        raise MissingDataError("trace produced no reducible cluster/corner groups")
    return results


TRACE_HEADER = (
    "t_s",
    "v_batt_v",
    "i_batt_a",
    "freq_hz",
    "util_pct",
    "temp_c",
    "phase",
    "cluster",
    "active_cores",
)


def write_trace_csv(samples: Iterable[PowerSample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for s in samples:
            writer.writerow(
                [
                    repr(s.t_s),
                    repr(s.v_batt_v),
                    repr(s.i_batt_a),
                    repr(s.freq_hz),
                    repr(s.util_pct),
                    repr(s.temp_c),
                    s.phase or "",
                    s.cluster or "",
                    "|".join(str(c) for c in s.active_cores) if s.active_cores else "",
                ]
            )


def read_trace_csv(path: str | Path) -> list[PowerSample]:
    """Parse a trace CSV, reporting the offending row on any format problem."""
    samples: list[PowerSample] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise InputFormatError(
                f"{path}: expected header {','.join(TRACE_HEADER)!r}, "
                f"got {','.join(header) if header else '<empty file>'!r}"
            )
        prev_t = None
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_HEADER):
                raise InputFormatError(
                    f"{path}:{row_no}: expected {len(TRACE_HEADER)} fields, got {len(row)}"
                )
            try:
                t, v, i, f, util, temp = (float(x) for x in row[:6])
            except ValueError as exc:
                raise InputFormatError(f"{path}:{row_no}: non-numeric field: {exc}") from exc
            if prev_t is not None and t < prev_t:
                raise InputFormatError(
                    f"{path}:{row_no}: time went backwards ({t!r} after {prev_t!r})"
                )
            prev_t = t
            phase = row[6] or None
            if phase is not None and phase not in PHASES:
                raise InputFormatError(
                    f"{path}:{row_no}: unknown phase {phase!r}; expected one of {PHASES}"
                )
            cores: Optional[tuple[int, ...]] = None
            if row[8]:
                try:
                    cores = tuple(int(c) for c in row[8].split("|"))
                except ValueError as exc:
                    raise InputFormatError(
                        f"{path}:{row_no}: bad active_cores {row[8]!r}"
                    ) from exc
            try:
                samples.append(
                    PowerSample(t, v, i, f, util, temp, phase, row[7] or None, cores)
                )
            except DomainError as exc:
                raise InputFormatError(f"{path}:{row_no}: {exc}") from exc
    return samples
