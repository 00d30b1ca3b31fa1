"""Command-line entry point.

One binary, subcommand style. Data goes to standard output or the requested
output path; errors go to standard error as single-line `code=... msg=...`
records. Exit codes: 0 success, 1 validation threshold failures, 2 input
format, 3 semantic/missing data, 4 runtime divergence. Numeric output keeps
full precision unless --round is given, and seeds default to 0, so repeated
runs are byte-identical. Environment variables are never consulted.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import devices, flsim, msr, railmap, traces
from .errors import (
    DivergenceError,
    DomainError,
    InputFormatError,
    MissingDataError,
    PairingError,
)
from .powermodel import (
    ANALYTICAL,
    APPROXIMATE,
    ClusterSpec,
    fit_profile,
    predict_for_cluster,
    relative_error,
)
from .profiles import ClusterProfile, DeviceProfile, load_profile, save_profile

CORNERS_HEADER = ("cluster", "freq_hz", "voltage_v", "p_dyn_w")
MEASUREMENTS_HEADER = ("cluster", "freq_hz", "p_measured_w")
REPORT_HEADER = (
    "cluster",
    "freq_hz",
    "p_measured_w",
    "p_analytical_w",
    "analytical_error_pct",
    "p_approximate_w",
    "approximate_error_pct",
    "passed",
)


def _fmt(value: float, places: int | None) -> str:
    if places is None:
        return repr(float(value))
    return repr(round(float(value), places))


def _read_csv_rows(path: str, header: tuple[str, ...]) -> list[dict[str, str]]:
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got is None or tuple(h.strip() for h in got) != header:
            raise InputFormatError(f"{path}: expected header {','.join(header)!r}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputFormatError(
                    f"{path}:{row_no}: expected {len(header)} fields, got {len(row)}"
                )
            rows.append(dict(zip(header, row)))
    return rows


def _parse_float(path: str, row_no: int, name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InputFormatError(f"{path}:{row_no}: bad {name} value {text!r}") from exc


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_fit(args) -> int:
    try:
        doc = json.loads(Path(args.clusters).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{args.clusters}: not valid JSON: {exc}") from exc
    except OSError as exc:
        raise InputFormatError(f"{args.clusters}: {exc.strerror}") from exc
    if not isinstance(doc, dict) or "clusters" not in doc:
        raise InputFormatError(f"{args.clusters}: expected an object with a clusters list")

    corner_rows: dict[str, list[tuple[float, float, float]]] = {}
    for row_no, row in enumerate(_read_csv_rows(args.corners, CORNERS_HEADER), start=2):
        corner_rows.setdefault(row["cluster"], []).append(
            (
                _parse_float(args.corners, row_no, "freq_hz", row["freq_hz"]),
                _parse_float(args.corners, row_no, "voltage_v", row["voltage_v"]),
                _parse_float(args.corners, row_no, "p_dyn_w", row["p_dyn_w"]),
            )
        )

    clusters = []
    for entry in doc["clusters"]:
        if not isinstance(entry, dict) or "name" not in entry or "core_ids" not in entry:
            raise InputFormatError(
                f"{args.clusters}: each cluster needs name and core_ids"
            )
        name = entry["name"]
        rows = corner_rows.pop(name, None)
        if rows is None:
            raise MissingDataError(f"no corner rows for cluster {name!r}")
        if len(rows) != 2:
            raise MissingDataError(
                f"cluster {name!r} needs exactly two corner rows, got {len(rows)}"
            )
        rows = sorted(rows)
        spec = ClusterSpec(
            name=name,
            core_ids=tuple(int(c) for c in entry["core_ids"]),
            f_min_hz=rows[0][0],
            f_max_hz=rows[1][0],
            v_min_v=rows[0][1],
            v_max_v=rows[1][1],
        )
        clusters.append(ClusterProfile(spec=spec, params=fit_profile(rows)))
    if corner_rows:
        raise MissingDataError(
            f"corner rows for undeclared cluster(s): {sorted(corner_rows)}"
        )
    if not clusters:
        raise MissingDataError("clusters list is empty")

    profile = DeviceProfile(
        device=doc.get("device", "unknown"),
        soc=doc.get("soc", "unknown"),
        clusters=tuple(clusters),
    )
    if args.out:
        save_profile(profile, args.out)
    else:
        sys.stdout.write(json.dumps(profile.to_dict(), indent=2) + "\n")
    return 0


def cmd_predict(args) -> int:
    profile = load_profile(args.profile)
    cluster = profile.cluster(args.cluster)
    if cluster.params is None:
        raise MissingDataError(f"cluster {args.cluster!r} has no fitted parameters")
    prediction = predict_for_cluster(
        cluster.spec,
        cluster.params,
        args.freq,
        model=args.model,
        use_mean_params=not args.corner_params,
    )
    sys.stdout.write(_fmt(prediction.power_w, args.round) + "\n")
    return 0


def cmd_validate(args) -> int:
    profile = load_profile(args.profile)
    rows = _read_csv_rows(args.measurements, MEASUREMENTS_HEADER)
    report = []
    all_pass = True
    for row_no, row in enumerate(rows, start=2):
        name = row["cluster"]
        try:
            cluster = profile.cluster(name)
        except MissingDataError as exc:
            # The measurement file references a cluster the profile does not
            # define, treated as a malformed input per the CLI contract.
            raise InputFormatError(str(exc)) from exc
        if cluster.params is None:
            raise MissingDataError(f"cluster {name!r} has no fitted parameters")
        freq = _parse_float(args.measurements, row_no, "freq_hz", row["freq_hz"])
        measured = _parse_float(
            args.measurements, row_no, "p_measured_w", row["p_measured_w"]
        )
        ana = predict_for_cluster(
            cluster.spec,
            cluster.params,
            freq,
            model=ANALYTICAL,
            use_mean_params=not args.corner_params,
        ).power_w
        apx = predict_for_cluster(
            cluster.spec,
            cluster.params,
            freq,
            model=APPROXIMATE,
            use_mean_params=not args.corner_params,
        ).power_w
        ana_err = relative_error(ana, measured)
        apx_err = relative_error(apx, measured)
        passed = abs(ana_err) < args.threshold
        all_pass = all_pass and passed
        report.append((name, freq, measured, ana, ana_err, apx, apx_err, passed))

    lines = [",".join(REPORT_HEADER)]
    for name, freq, measured, ana, ana_err, apx, apx_err, passed in report:
        lines.append(
            ",".join(
                [
                    name,
                    _fmt(freq, args.round),
                    _fmt(measured, args.round),
                    _fmt(ana, args.round),
                    _fmt(ana_err, args.round),
                    _fmt(apx, args.round),
                    _fmt(apx_err, args.round),
                    "pass" if passed else "fail",
                ]
            )
        )
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0 if all_pass else 1


def cmd_reduce(args) -> int:
    samples = traces.read_trace_csv(args.trace)
    results = traces.reduce_trace(
        samples,
        strategy=args.strategy,
        housekeeping_core=args.housekeeping_core,
        temp_band=(args.temp_low, args.temp_high),
    )
    doc = {"strategy": args.strategy, "results": []}
    for r in results:
        entry = {
            "cluster": r.cluster,
            "freq_hz": r.freq_hz,
            "p_dyn_w": r.p_dyn_w,
        }
        if r.p_idle_w is not None:
            entry["p_idle_w"] = r.p_idle_w
        if r.p_load_w is not None:
            entry["p_load_w"] = r.p_load_w
        if r.per_core_w is not None:
            entry["per_core_w"] = {str(core): w for core, w in r.per_core_w}
        doc["results"].append(entry)
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_railmap(args) -> int:
    log = railmap.read_rail_log(args.rail_log)
    schedule = railmap.read_schedule(args.schedule)
    mapping = railmap.map_rails(
        log,
        schedule,
        spike_threshold_v=args.threshold_mv / 1000.0,
        settle_margin_frac=args.settle_margin,
    )
    if args.profile:
        try:
            doc = json.loads(Path(args.profile).read_text())
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{args.profile}: not valid JSON: {exc}") from exc
        entries = {c.get("name"): c for c in doc.get("clusters", [])}
        for cluster, rail in mapping.assignments.items():
            if cluster not in entries:
                raise MissingDataError(
                    f"mapped cluster {cluster!r} not present in profile "
                    f"{sorted(entries)}"
                )
            entries[cluster]["rail_id"] = rail
            lo, hi = mapping.ranges[cluster]
            entries[cluster]["v_min_v"] = lo
            entries[cluster]["v_max_v"] = hi
        _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        doc = {
            "assignments": dict(mapping.assignments),
            "ranges": {c: list(r) for c, r in mapping.ranges.items()},
        }
        _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_decode_msr(args) -> int:
    if args.encoding == "amd" and (args.v_offset is None or args.k_step is None):
        raise InputFormatError("amd encoding needs --v-offset and --k-step")
    if args.value is None and args.replay is None:
        raise InputFormatError("provide a register value (--value) or a replay file")
    if args.value is not None:
        try:
            raw = int(args.value, 16)
        except ValueError as exc:
            raise InputFormatError(f"bad hex value {args.value!r}") from exc
    else:
        source = msr.ReplayRegisterSource(args.replay)
        raw = source.read(int(args.address, 16)).raw
    params = None
    if args.encoding == "amd":
        params = msr.AmdSviParams(v_offset=args.v_offset, k_step=args.k_step)
    decoded = msr.decode(raw, encoding=args.encoding, params=params)
    sys.stdout.write(
        f"voltage_v={_fmt(decoded.voltage_v, args.round)} "
        f"plausible={'true' if decoded.plausible else 'false'}\n"
    )
    return 0


def cmd_simulate(args) -> int:
    config = flsim.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.estimator is not None:
        overrides["estimator"] = args.estimator
    if args.max_rounds is not None:
        overrides["max_rounds"] = args.max_rounds
    if args.target is not None:
        overrides["target_accuracy"] = args.target
    if overrides:
        config = dataclasses.replace(config, **overrides)
    records = flsim.run_simulation(config)
    flsim.write_run_csv(records, args.out)
    if records:
        last = records[-1]
        reached = last.global_accuracy >= config.target_accuracy
        sys.stdout.write(
            f"rounds={len(records)} "
            f"final_accuracy={_fmt(last.global_accuracy, args.round)} "
            f"cumulative_true_energy_j={_fmt(last.cumulative_true_energy_j, args.round)} "
            f"reached_target={'true' if reached else 'false'}\n"
        )
    else:
        sys.stdout.write(
            "rounds=0 cumulative_true_energy_j=0.0 reached_target=false\n"
        )
    return 0


def _parse_cores(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(",") if c != "")
    except ValueError as exc:
        raise InputFormatError(f"bad core list {text!r}") from exc


def cmd_synth_trace(args) -> int:
    cores = _parse_cores(args.cores)
    per_core_min = per_core_max = None
    if args.strategy == traces.SINGLE:
        measured = [c for c in cores if c != args.housekeeping_core]
        if not measured:
            raise DomainError("single strategy needs at least one non-housekeeping core")
        per_core_min = {c: args.p_dyn_min / len(measured) for c in measured}
        per_core_max = {c: args.p_dyn_max / len(measured) for c in measured}
    samples = traces.synth_protocol_trace(
        args.cluster,
        cores,
        args.fmin,
        args.fmax,
        strategy=args.strategy,
        p_idle_w=args.p_idle,
        p_dyn_at_fmin_w=args.p_dyn_min,
        p_dyn_at_fmax_w=args.p_dyn_max,
        per_core_at_fmin_w=per_core_min,
        per_core_at_fmax_w=per_core_max,
        housekeeping_core=args.housekeeping_core,
        noise_sigma_w=args.noise,
        duration_s=args.duration,
        cadence_s=args.cadence,
        seed=args.seed,
        repeats=args.repeats,
    )
    traces.write_trace_csv(samples, args.out)
    return 0


def cmd_synth_rail_log(args) -> int:
    characterization = {
        "samsung": devices.SAMSUNG_A16,
        "pixel": devices.PIXEL_8_PRO,
    }[args.device]
    rail_names = [f"rail_{chr(ord('a') + i)}" for i in range(len(characterization.clusters))]
    cluster_rails = {}
    cluster_levels = {}
    corner_freqs = []
    for rail, cluster in zip(rail_names, characterization.clusters):
        spec = cluster.spec
        cluster_rails[spec.name] = rail
        cluster_levels[spec.name] = (spec.v_min_v, spec.v_max_v)
        corner_freqs.append((spec.name, spec.f_min_hz, spec.f_max_hz))
    schedule = railmap.build_activation_schedule(
        corner_freqs, window_s=args.window, gap_s=args.gap
    )
    log = railmap.synth_rail_log(
        cluster_rails,
        cluster_levels,
        schedule,
        cadence_s=args.cadence,
        noise_v=args.noise_mv / 1000.0,
        seed=args.seed,
    )
    railmap.write_rail_log(log, args.out)
    railmap.write_schedule(schedule, args.schedule_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="socpower",
        description=(
            "CPU dynamic power modeling from battery telemetry: corner fitting, "
            "prediction, validation, trace reduction, rail mapping, MSR voltage "
            "decoding, and an energy-aware federated learning simulator."
        ),
    )
    parser.add_argument(
        "--round",
        type=int,
        default=None,
        metavar="PLACES",
        help="round displayed numbers to this many decimal places (display only)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser(
        "fit",
        help="fit per-cluster power-model parameters from two-corner measurements",
        description=(
            "Corners CSV columns: cluster,freq_hz,voltage_v,p_dyn_w (watts of "
            "dynamic power per corner, two rows per cluster). Clusters JSON: "
            '{"device": ..., "soc": ..., "clusters": [{"name", "core_ids"}]}.'
        ),
    )
    p.add_argument("corners", help="two-corner measurement CSV")
    p.add_argument("clusters", help="cluster geometry JSON")
    p.add_argument("--out", help="device profile JSON path (default: stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser(
        "predict",
        help="predict cluster power at a frequency from a fitted profile",
        description="Prints watts; voltage is interpolated linearly for the analytical model.",
    )
    p.add_argument("profile", help="device profile JSON")
    p.add_argument("--cluster", required=True)
    p.add_argument("--freq", type=float, required=True, help="frequency in Hz")
    p.add_argument("--model", choices=[ANALYTICAL, APPROXIMATE], default=ANALYTICAL)
    p.add_argument(
        "--corner-params",
        action="store_true",
        help="use corner-specific parameters at exact corner frequencies",
    )
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser(
        "validate",
        help="score a profile against measured powers; exit 1 on threshold failures",
        description=(
            "Measurements CSV columns: cluster,freq_hz,p_measured_w. Report "
            "columns: " + ",".join(REPORT_HEADER) + ". Signed errors in percent."
        ),
    )
    p.add_argument("profile")
    p.add_argument("measurements")
    p.add_argument("--out", help="report CSV path (default: stdout)")
    p.add_argument(
        "--threshold",
        type=float,
        default=5.0,
        help="absolute analytical error percent a row must stay under (default 5)",
    )
    p.add_argument("--corner-params", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "reduce",
        help="reduce a labeled battery trace to per-cluster dynamic power",
        description=(
            "Trace CSV columns: " + ",".join(traces.TRACE_HEADER) + ". Phases "
            "idle_min/stress_min/idle_max/stress_max; active_cores is |-separated."
        ),
    )
    p.add_argument("trace")
    p.add_argument(
        "--strategy", choices=[traces.PER_CLUSTER, traces.SINGLE], required=True
    )
    p.add_argument("--housekeeping-core", type=int, default=0)
    p.add_argument("--temp-low", type=float, default=traces.DEFAULT_TEMP_BAND_C[0])
    p.add_argument("--temp-high", type=float, default=traces.DEFAULT_TEMP_BAND_C[1])
    p.add_argument("--out", help="results JSON path (default: stdout)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser(
        "railmap",
        help="map regulator rails to clusters from a voltage log and schedule",
        description=(
            "Rail log CSV columns: t_s,rail_id,voltage_v. Schedule JSON: array "
            "of {t_start_s,t_end_s,cluster,freq_hz}. With --profile, writes the "
            "profile with rail_id and extracted v_min_v/v_max_v merged in."
        ),
    )
    p.add_argument("rail_log")
    p.add_argument("schedule")
    p.add_argument("--profile", help="device profile JSON to merge results into")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument(
        "--threshold-mv",
        type=float,
        default=railmap.DEFAULT_SPIKE_THRESHOLD_V * 1000.0,
        help="spike detection threshold in millivolts (default 30)",
    )
    p.add_argument(
        "--settle-margin",
        type=float,
        default=railmap.DEFAULT_SETTLE_MARGIN_FRAC,
        help="fraction trimmed from each window end before the median (default 0.1)",
    )
    p.set_defaults(func=cmd_railmap)

    p = sub.add_parser(
        "decode-msr",
        help="decode a voltage register value (intel IA32_PERF_STATUS or amd SVI2)",
        description=(
            "Replay files hold lines of msr_address_hex,raw_value_hex. For the "
            "amd encoding the value is the already-extracted VID byte."
        ),
    )
    p.add_argument("--encoding", choices=["intel", "amd"], default="intel")
    p.add_argument("--value", help="register value as hex")
    p.add_argument("--replay", help="recorded register file")
    p.add_argument(
        "--address",
        default=hex(msr.MSR_PERF_STATUS),
        help="register address for --replay (default 0x198)",
    )
    p.add_argument("--v-offset", type=float, help="amd VID offset in volts")
    p.add_argument("--k-step", type=float, help="amd volts per VID unit")
    p.set_defaults(func=cmd_decode_msr)

    p = sub.add_parser(
        "simulate",
        help="run the energy-aware federated learning simulator",
        description=(
            "Config JSON fields: n_peers, tau, target_accuracy, max_rounds, "
            "estimator, ground_truth, seed, learning_rate, batch_size, w_sample, "
            "dataset. Output CSV columns: " + ",".join(flsim.RUN_HEADER) + " "
            "(peer rows plus an aggregate row with empty peer_id per round)."
        ),
    )
    p.add_argument("config", help="FL configuration JSON")
    p.add_argument("--out", required=True, help="round-records CSV path")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--estimator", choices=[ANALYTICAL, APPROXIMATE])
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--target", type=float, help="override target accuracy")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "synth",
        help="generate synthetic traces or rail logs with known ground truth",
    )
    synth_sub = p.add_subparsers(dest="kind", required=True)

    q = synth_sub.add_parser(
        "trace", help="four-phase battery trace for one cluster at both corners"
    )
    q.add_argument("--out", required=True)
    q.add_argument("--cluster", default="LITTLE")
    q.add_argument("--cores", default="0,1,2,3,4,5", help="comma-separated core ids")
    q.add_argument("--fmin", type=float, default=5.0e8)
    q.add_argument("--fmax", type=float, default=2.0e9)
    q.add_argument(
        "--strategy",
        choices=[traces.PER_CLUSTER, traces.SINGLE],
        default=traces.PER_CLUSTER,
    )
    q.add_argument("--p-idle", type=float, default=0.8, help="idle watts")
    q.add_argument("--p-dyn-min", type=float, default=0.182, help="dynamic watts at fmin")
    q.add_argument("--p-dyn-max", type=float, default=0.549, help="dynamic watts at fmax")
    q.add_argument("--housekeeping-core", type=int, default=0)
    q.add_argument("--noise", type=float, default=0.0, help="gaussian sigma in watts")
    q.add_argument("--duration", type=float, default=600.0, help="seconds per phase")
    q.add_argument("--cadence", type=float, default=0.5, help="seconds per sample")
    q.add_argument("--repeats", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_synth_trace)

    q = synth_sub.add_parser(
        "rail-log", help="regulator log plus activation schedule for a known device"
    )
    q.add_argument("--out", required=True, help="rail log CSV path")
    q.add_argument("--schedule-out", required=True, help="schedule JSON path")
    q.add_argument("--device", choices=["samsung", "pixel"], default="pixel")
    q.add_argument("--window", type=float, default=60.0, help="activation seconds")
    q.add_argument("--gap", type=float, default=30.0, help="idle seconds between windows")
    q.add_argument("--cadence", type=float, default=0.1, help="seconds per sample")
    q.add_argument("--noise-mv", type=float, default=0.0, help="uniform noise bound")
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_synth_rail_log)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputFormatError as exc:
        sys.stderr.write(f"code=2 msg={exc}\n")
        return 2
    except OSError as exc:
        where = exc.filename if exc.filename is not None else "i/o error"
        sys.stderr.write(f"code=2 msg={where}: {exc.strerror or exc}\n")
        return 2
    except DivergenceError as exc:
        sys.stderr.write(f"code=4 msg={exc}\n")
        return 4
    except (MissingDataError, PairingError, DomainError) as exc:
        sys.stderr.write(f"code=3 msg={exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
