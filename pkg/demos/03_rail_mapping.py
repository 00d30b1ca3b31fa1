"""Figure out which regulator rail feeds which CPU cluster.

Kernel regulator logs expose rail voltages but use board-specific rail
names. To label them, we schedule one cluster at a time at a known
frequency and look for the rail whose voltage rises during that window.
Each cluster must claim a different rail; the plateau medians then give
the cluster's operating voltage range.

Ground truth here is synthetic: three rails wired to the Pixel 8 Pro
tri-cluster layout, 3 mV of uniform regulator noise.
"""

from socpower.devices import PIXEL_8_PRO
from socpower.railmap import build_activation_schedule, map_rails, synth_rail_log

# Deliberately unhelpful rail names, as a real log would have.
TRUE_WIRING = {"LITTLE": "buck3_out", "big": "buck1_out", "Prime": "buck7_out"}


def main():
    clusters = [
        (cz.spec.name, cz.spec.f_min_hz, cz.spec.f_max_hz)
        for cz in PIXEL_8_PRO.clusters
    ]
    levels = {
        cz.spec.name: (cz.spec.v_min_v, cz.spec.v_max_v)
        for cz in PIXEL_8_PRO.clusters
    }

    schedule = build_activation_schedule(clusters, window_s=30.0, gap_s=15.0, start_s=15.0)
    print(f"schedule: {len(schedule.entries)} windows, one per cluster corner")
    for entry in schedule.entries:
        print(
            f"  [{entry.t_start_s:6.1f} s, {entry.t_end_s:6.1f} s) "
            f"{entry.cluster:>6} @ {entry.freq_hz / 1e9:.3f} GHz"
        )
    print()

    log = synth_rail_log(TRUE_WIRING, levels, schedule, cadence_s=0.1, noise_v=0.003, seed=5)
    mapping = map_rails(log, schedule)

    print(f"recovered wiring from {len(log)} log samples:")
    for cluster, rail in sorted(mapping.assignments.items()):
        mark = "ok" if TRUE_WIRING[cluster] == rail else "WRONG"
        lo, hi = mapping.ranges[cluster]
        true_lo, true_hi = levels[cluster]
        print(
            f"  {cluster:>6} <- {rail:<10} [{mark}]  "
            f"range {lo:.4f}-{hi:.4f} V (true {true_lo:.2f}-{true_hi:.2f})"
        )


if __name__ == "__main__":
    main()
