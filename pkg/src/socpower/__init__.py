"""CPU dynamic power modeling from battery telemetry.

Fits analytical (C_eff * V^2 * f) and approximate (epsilon * f^3) dynamic
power models from two-corner measurements, reduces fuel-gauge traces to
per-cluster dynamic power, maps regulator rails to clusters, decodes x86
voltage registers, and simulates energy-budgeted federated learning where a
biased power estimator makes peers over-shrink their workloads.
"""

from .errors import (
    DivergenceError,
    DomainError,
    InputFormatError,
    MissingDataError,
    PairingError,
    SocPowerError,
)
from .flsim import (
    FlConfig,
    FlRoundRecord,
    IdxDataSpec,
    PeerProfile,
    PeerRoundStats,
    SyntheticDataSpec,
    compute_workload,
    default_peer_profiles,
    energy_analytical,
    energy_approximate,
    run_simulation,
    select_alpha,
)
from .msr import (
    AmdSviParams,
    Msr64,
    ReplayRegisterSource,
    decode_amd_svi2,
    decode_intel_vid,
    is_plausible_voltage,
)
from .powermodel import (
    ANALYTICAL,
    APPROXIMATE,
    ClusterSpec,
    FittedParams,
    PowerPrediction,
    fit_ceff,
    fit_epsilon,
    fit_profile,
    interpolate_voltage,
    predict_analytical,
    predict_approximate,
    predict_for_cluster,
    relative_error,
    total_cpu_power,
)
from .profiles import ClusterProfile, DeviceProfile, load_profile, save_profile
from .railmap import (
    ActivationSchedule,
    RailMapping,
    RailSample,
    ScheduleEntry,
    detect_activations,
    extract_voltage_range,
    map_rails,
    synth_rail_log,
)
from .traces import (
    PER_CLUSTER,
    SINGLE,
    ClusterDynResult,
    PhaseMeasurement,
    PowerSample,
    battery_power,
    dynamic_power,
    per_cluster_reduce,
    phase_average,
    reduce_trace,
    single_reduce,
    synth_protocol_trace,
    synth_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ANALYTICAL",
    "APPROXIMATE",
    "ActivationSchedule",
    "AmdSviParams",
    "ClusterDynResult",
    "ClusterProfile",
    "ClusterSpec",
    "DeviceProfile",
    "DivergenceError",
    "DomainError",
    "FittedParams",
    "FlConfig",
    "FlRoundRecord",
    "IdxDataSpec",
    "InputFormatError",
    "MissingDataError",
    "Msr64",
    "PER_CLUSTER",
    "PairingError",
    "PeerProfile",
    "PeerRoundStats",
    "PhaseMeasurement",
    "PowerPrediction",
    "PowerSample",
    "RailMapping",
    "RailSample",
    "ReplayRegisterSource",
    "SINGLE",
    "ScheduleEntry",
    "SocPowerError",
    "SyntheticDataSpec",
    "battery_power",
    "compute_workload",
    "decode_amd_svi2",
    "decode_intel_vid",
    "default_peer_profiles",
    "detect_activations",
    "dynamic_power",
    "energy_analytical",
    "energy_approximate",
    "extract_voltage_range",
    "fit_ceff",
    "fit_epsilon",
    "fit_profile",
    "interpolate_voltage",
    "is_plausible_voltage",
    "load_profile",
    "map_rails",
    "per_cluster_reduce",
    "phase_average",
    "predict_analytical",
    "predict_approximate",
    "predict_for_cluster",
    "reduce_trace",
    "relative_error",
    "run_simulation",
    "save_profile",
    "select_alpha",
    "single_reduce",
    "synth_protocol_trace",
    "synth_rail_log",
    "synth_trace",
    "total_cpu_power",
]
