"""Reference characterization data for the profiled devices.

Corner measurements collected with the battery fuel-gauge protocol on two
commodity handsets, plus the constants measured on an instrumented x86
workstation (Intel Xeon W-2123). These feed the bundled demos, the default
federated-learning peer population, and the regression tests; a profiling
campaign on new hardware produces the same structures through ``fit``.

Dynamic powers are in watts at the cluster's minimum and maximum frequency.
``single`` values come from summed one-core-at-a-time activations,
``per_cluster`` from whole-cluster activations; the stds accompany the means
as printed by the measurement pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

from .powermodel import ClusterSpec, FittedParams, fit_profile
from .profiles import ClusterProfile, DeviceProfile

PER_CLUSTER = "per_cluster"
SINGLE = "single"


@dataclass(frozen=True)
class CornerPowers:
    """Measured dynamic power at the two DVFS corners for one strategy."""

    p_dyn_at_fmin_w: float
    p_dyn_at_fmax_w: float
    std_at_fmin_w: float
    std_at_fmax_w: float


@dataclass(frozen=True)
class ClusterCharacterization:
    spec: ClusterSpec
    measured: dict[str, CornerPowers]

    def corners(self, strategy: str = SINGLE) -> list[tuple[float, float, float]]:
        """Fitting corners (freq_hz, voltage_v, p_dyn_w) for one strategy."""
        m = self.measured[strategy]
        return [
            (self.spec.f_min_hz, self.spec.v_min_v, m.p_dyn_at_fmin_w),
            (self.spec.f_max_hz, self.spec.v_max_v, m.p_dyn_at_fmax_w),
        ]

    def fitted(self, strategy: str = SINGLE) -> FittedParams:
        return fit_profile(self.corners(strategy))


@dataclass(frozen=True)
class DeviceCharacterization:
    device: str
    soc: str
    clusters: tuple[ClusterCharacterization, ...]

    def cluster(self, name: str) -> ClusterCharacterization:
        for c in self.clusters:
            if c.spec.name == name:
                return c
        raise KeyError(name)

    def profile(self, strategy: str = SINGLE) -> DeviceProfile:
        """Fitted profile built from this device's corner measurements."""
        return DeviceProfile(
            device=self.device,
            soc=self.soc,
            clusters=[
                ClusterProfile(spec=c.spec, params=c.fitted(strategy))
                for c in self.clusters
            ],
        )


SAMSUNG_A16 = DeviceCharacterization(
    device="Samsung A16",
    soc="MediaTek Helio G99",
    clusters=(
        ClusterCharacterization(
            spec=ClusterSpec("LITTLE", (0, 1, 2, 3, 4, 5), 5.00e8, 2.00e9, 0.55, 0.81),
            measured={
                SINGLE: CornerPowers(0.100, 0.859, 0.045, 0.143),
                PER_CLUSTER: CornerPowers(0.182, 0.549, 0.087, 0.074),
            },
        ),
        ClusterCharacterization(
            spec=ClusterSpec("big", (6, 7), 7.25e8, 2.20e9, 0.55, 0.76),
            measured={
                SINGLE: CornerPowers(0.206, 0.862, 0.037, 0.081),
                PER_CLUSTER: CornerPowers(0.189, 0.806, 0.062, 0.042),
            },
        ),
    ),
)

PIXEL_8_PRO = DeviceCharacterization(
    device="Google Pixel 8 Pro",
    soc="Google Tensor G3",
    clusters=(
        ClusterCharacterization(
            spec=ClusterSpec("LITTLE", (0, 1, 2, 3), 3.24e8, 1.70e9, 0.56, 0.85),
            measured={
                SINGLE: CornerPowers(0.142, 1.056, 0.070, 0.167),
                PER_CLUSTER: CornerPowers(0.146, 0.995, 0.041, 0.097),
            },
        ),
        ClusterCharacterization(
            spec=ClusterSpec("big", (4, 5, 6, 7), 4.02e8, 2.37e9, 0.55, 1.13),
            measured={
                SINGLE: CornerPowers(0.199, 4.639, 0.107, 0.153),
                PER_CLUSTER: CornerPowers(0.142, 4.267, 0.095, 0.101),
            },
        ),
        ClusterCharacterization(
            spec=ClusterSpec("Prime", (8,), 5.00e8, 2.91e9, 0.53, 1.20),
            measured={
                SINGLE: CornerPowers(0.100, 3.178, 0.021, 0.092),
                PER_CLUSTER: CornerPowers(0.100, 3.114, 0.065, 0.063),
            },
        ),
    ),
)

HANDSETS = (SAMSUNG_A16, PIXEL_8_PRO)


@dataclass(frozen=True)
class WorkstationReference:
    """Instrumented x86 box: wall-power corners with MSR-read voltages."""

    c_eff_f: float
    epsilon: float
    f_min_hz: float
    f_max_hz: float
    vid_at_fmin: int
    vid_at_fmax: int
    v_at_fmin_v: float
    v_at_fmax_v: float
    p_dyn_at_fmin_w: float
    p_dyn_at_fmax_w: float


XEON_W2123 = WorkstationReference(
    c_eff_f=8.2e-9,
    epsilon=1.91e-27,
    f_min_hz=1.2e9,
    f_max_hz=3.6e9,
    vid_at_fmin=6193,
    vid_at_fmax=7971,
    v_at_fmin_v=0.756,
    v_at_fmax_v=0.973,
    p_dyn_at_fmin_w=5.57,
    p_dyn_at_fmax_w=28.21,
)
