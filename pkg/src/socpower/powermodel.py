"""CMOS dynamic power models and parameter fitting.

Two models of cluster dynamic power as a function of DVFS operating point:

* analytical:   P = C_eff * V^2 * f      (effective capacitance, volts, hertz)
* approximate:  P = epsilon * f^3        (assumes V grows linearly with f)

Both are fit from corner measurements, one at the lowest and one at the
highest frequency of a cluster. C_eff is expected to stay roughly constant
across corners at full load; epsilon typically is not, so its representative
value is the arithmetic mean of the two corner fits. The same mean
construction is applied to C_eff so that both models expose per-corner and
mean parameters symmetrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import DomainError

ANALYTICAL = "analytical"
APPROXIMATE = "approximate"


def _require_finite_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    if value <= 0.0:
        raise DomainError(f"{name} must be positive, got {value!r}")
    return value


def _require_finite_nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    if value < 0.0:
        raise DomainError(f"{name} must be non-negative, got {value!r}")
    return value


@dataclass(frozen=True)
class ClusterSpec:
    """Static description of one CPU cluster.

    Frequencies in hertz, rail voltages in volts at the two DVFS corners.
    """

    name: str
    core_ids: tuple[int, ...]
    f_min_hz: float
    f_max_hz: float
    v_min_v: float
    v_max_v: float

    def __post_init__(self):
        if not self.name:
            raise DomainError("cluster name must be non-empty")
        if len(self.core_ids) == 0:
            raise DomainError(f"cluster {self.name}: core_ids must be non-empty")
        if len(set(self.core_ids)) != len(self.core_ids):
            raise DomainError(f"cluster {self.name}: core_ids must be distinct")
        object.__setattr__(self, "core_ids", tuple(int(c) for c in self.core_ids))
        _require_finite_positive("f_min_hz", self.f_min_hz)
        _require_finite_positive("f_max_hz", self.f_max_hz)
        if self.f_min_hz >= self.f_max_hz:
            raise DomainError(
                f"cluster {self.name}: f_min_hz ({self.f_min_hz!r}) must be "
                f"strictly below f_max_hz ({self.f_max_hz!r})"
            )
        _require_finite_positive("v_min_v", self.v_min_v)
        _require_finite_positive("v_max_v", self.v_max_v)
        if self.v_min_v > self.v_max_v:
            raise DomainError(
                f"cluster {self.name}: v_min_v ({self.v_min_v!r}) must not "
                f"exceed v_max_v ({self.v_max_v!r})"
            )

    @property
    def n_cores(self) -> int:
        return len(self.core_ids)


@dataclass(frozen=True)
class FittedParams:
    """Model parameters extracted from the two corner measurements.

    The mean fields are exact arithmetic means of the corresponding corner
    values; keeping the per-corner fits around makes the spread between them
    an immediate diagnostic for how well each model's constancy assumption
    held on a given cluster.
    """

    c_eff_at_fmin_f: float
    c_eff_at_fmax_f: float
    c_eff_mean_f: float
    epsilon_at_fmin: float
    epsilon_at_fmax: float
    epsilon_mean: float

    def __post_init__(self):
        for field in (
            "c_eff_at_fmin_f",
            "c_eff_at_fmax_f",
            "c_eff_mean_f",
            "epsilon_at_fmin",
            "epsilon_at_fmax",
            "epsilon_mean",
        ):
            _require_finite_positive(field, getattr(self, field))


@dataclass(frozen=True)
class PowerPrediction:
    """One model evaluation at an operating point.

    ``voltage_v`` is None for the approximate model, which never consults the
    rail voltage. ``voltage_interpolated`` marks analytical predictions whose
    voltage came from the linear corner interpolation rather than a measured
    corner.
    """

    power_w: float
    model: str
    freq_hz: float
    voltage_v: Optional[float] = None
    voltage_interpolated: bool = False


def predict_analytical(c_eff_f: float, voltage_v: float, freq_hz: float) -> float:
    """Dynamic power in watts from P = C_eff * V^2 * f."""
    c = _require_finite_positive("c_eff_f", c_eff_f)
    v = _require_finite_positive("voltage_v", voltage_v)
    f = _require_finite_positive("freq_hz", freq_hz)
    return c * v * v * f


def predict_approximate(epsilon: float, freq_hz: float) -> float:
    """Dynamic power in watts from P = epsilon * f^3."""
    e = _require_finite_positive("epsilon", epsilon)
    f = _require_finite_positive("freq_hz", freq_hz)
    return e * f**3


def fit_ceff(p_dyn_w: float, freq_hz: float, voltage_v: float) -> float:
    """Effective capacitance in farads implied by one corner: C = P / (f * V^2)."""
    p = _require_finite_positive("p_dyn_w", p_dyn_w)
    f = _require_finite_positive("freq_hz", freq_hz)
    v = _require_finite_positive("voltage_v", voltage_v)
    return p / (f * v * v)


def fit_epsilon(p_dyn_w: float, freq_hz: float) -> float:
    """Cubic-model coefficient implied by one corner: epsilon = P / f^3."""
    p = _require_finite_positive("p_dyn_w", p_dyn_w)
    f = _require_finite_positive("freq_hz", freq_hz)
    return p / f**3


def mean_epsilon(epsilon_at_fmin: float, epsilon_at_fmax: float) -> float:
    """Representative epsilon: plain arithmetic mean of the two corner fits."""
    lo = _require_finite_positive("epsilon_at_fmin", epsilon_at_fmin)
    hi = _require_finite_positive("epsilon_at_fmax", epsilon_at_fmax)
    return (lo + hi) / 2.0


def relative_error(p_hat_w: float, p_measured_w: float) -> float:
    """Signed relative error of a prediction, in percent of the measurement."""
    p_hat = float(p_hat_w)
    if not math.isfinite(p_hat):
        raise DomainError(f"p_hat_w must be finite, got {p_hat!r}")
    p_meas = _require_finite_positive("p_measured_w", p_measured_w)
    return (p_hat - p_meas) / p_meas * 100.0


def total_cpu_power(cluster_powers_w: Iterable[float]) -> float:
    """Total CPU dynamic power: the sum over per-cluster contributions.

    Entries must be non-negative; an empty sequence totals zero.
    """
    total = 0.0
    for i, p in enumerate(cluster_powers_w):
        total += _require_finite_nonnegative(f"cluster_powers_w[{i}]", p)
    return total


def interpolate_voltage(spec: ClusterSpec, freq_hz: float) -> float:
    """Rail voltage at an intermediate frequency, linear between the corners.

    Exact at the corners. Frequencies outside [f_min, f_max] raise
    DomainError; extrapolating a DVFS curve is not meaningful.
    """
    f = _require_finite_positive("freq_hz", freq_hz)
    if f < spec.f_min_hz or f > spec.f_max_hz:
        raise DomainError(
            f"freq_hz {f!r} outside cluster {spec.name} range "
            f"[{spec.f_min_hz!r}, {spec.f_max_hz!r}]"
        )
    if f == spec.f_min_hz:
        return spec.v_min_v
    if f == spec.f_max_hz:
        return spec.v_max_v
    t = (f - spec.f_min_hz) / (spec.f_max_hz - spec.f_min_hz)
    return spec.v_min_v + t * (spec.v_max_v - spec.v_min_v)


def fit_profile(corners: Sequence[tuple[float, float, float]]) -> FittedParams:
    """Fit both models from exactly two corner measurements.

    Each corner is a (freq_hz, voltage_v, p_dyn_w) triple; the two must have
    distinct frequencies. The lower-frequency corner provides the *_at_fmin
    fits, the higher one the *_at_fmax fits.
    """
    corners = list(corners)
    if len(corners) != 2:
        raise DomainError(f"corners must hold exactly 2 measurements, got {len(corners)}")
    (f_a, v_a, p_a), (f_b, v_b, p_b) = corners
    if float(f_a) == float(f_b):
        raise DomainError(f"corner frequencies must be distinct, both are {float(f_a)!r}")
    if f_a > f_b:
        (f_a, v_a, p_a), (f_b, v_b, p_b) = (f_b, v_b, p_b), (f_a, v_a, p_a)
    c_lo = fit_ceff(p_a, f_a, v_a)
    c_hi = fit_ceff(p_b, f_b, v_b)
    e_lo = fit_epsilon(p_a, f_a)
    e_hi = fit_epsilon(p_b, f_b)
    return FittedParams(
        c_eff_at_fmin_f=c_lo,
        c_eff_at_fmax_f=c_hi,
        c_eff_mean_f=(c_lo + c_hi) / 2.0,
        epsilon_at_fmin=e_lo,
        epsilon_at_fmax=e_hi,
        epsilon_mean=mean_epsilon(e_lo, e_hi),
    )


def predict_for_cluster(
    spec: ClusterSpec,
    params: FittedParams,
    freq_hz: float,
    model: str,
    use_mean_params: bool = True,
) -> PowerPrediction:
    """Evaluate one model for a cluster at a frequency inside its range.

    With ``use_mean_params`` (the default) the mean parameter is used at every
    frequency. Otherwise the corner-specific fit is used when the frequency
    equals a corner, falling back to the mean in between.
    """
    f = _require_finite_positive("freq_hz", freq_hz)
    if model == ANALYTICAL:
        v = interpolate_voltage(spec, f)
        c = params.c_eff_mean_f
        if not use_mean_params:
            if f == spec.f_min_hz:
                c = params.c_eff_at_fmin_f
            elif f == spec.f_max_hz:
                c = params.c_eff_at_fmax_f
        return PowerPrediction(
            power_w=predict_analytical(c, v, f),
            model=ANALYTICAL,
            freq_hz=f,
            voltage_v=v,
            voltage_interpolated=f not in (spec.f_min_hz, spec.f_max_hz),
        )
    if model == APPROXIMATE:
        e = params.epsilon_mean
        if not use_mean_params:
            if f == spec.f_min_hz:
                e = params.epsilon_at_fmin
            elif f == spec.f_max_hz:
                e = params.epsilon_at_fmax
        return PowerPrediction(
            power_w=predict_approximate(e, f),
            model=APPROXIMATE,
            freq_hz=f,
        )
    raise DomainError(f"model must be '{ANALYTICAL}' or '{APPROXIMATE}', got {model!r}")
