"""Fit the two dynamic-power models to one cluster and compare them.

The analytical model P = C_eff * V^2 * f keeps voltage explicit; the
approximate model P = eps * f^3 folds the DVFS curve into a single cubic.
Both are fitted from the same two corner measurements of the Samsung A16
LITTLE cluster, then evaluated across the whole frequency range. The
cubic looks harmless near the corners it was fitted on and falls apart
everywhere else.
"""

import numpy as np

from socpower.devices import SAMSUNG_A16, SINGLE
from socpower.powermodel import (
    interpolate_voltage,
    predict_analytical,
    predict_approximate,
    relative_error,
)


def main():
    cz = SAMSUNG_A16.cluster("LITTLE")
    params = cz.fitted(SINGLE)
    spec = cz.spec
    corners = cz.corners(SINGLE)

    print(f"{SAMSUNG_A16.device} / {SAMSUNG_A16.soc}, cluster {spec.name}")
    print(f"  C_eff (mean of corner fits) = {params.c_eff_mean_f:.4e} F")
    print(f"  eps   (mean of corner fits) = {params.epsilon_mean:.4e} W/Hz^3")
    print()

    print(f"{'freq [GHz]':>10} {'V [V]':>7} {'analytical [W]':>15} {'approximate [W]':>16}")
    for freq in np.linspace(spec.f_min_hz, spec.f_max_hz, 7):
        volt = interpolate_voltage(spec, freq)
        ana = predict_analytical(params.c_eff_mean_f, volt, freq)
        apx = predict_approximate(params.epsilon_mean, freq)
        print(f"{freq / 1e9:>10.3f} {volt:>7.3f} {ana:>15.3f} {apx:>16.3f}")
    print()

    # Relative error against the corner measurements the fit came from.
    # The analytical model stays within a fraction of a percent; the cubic
    # misses by -43% at one corner and +322% at the other, because no
    # single eps can serve both ends of a non-linear DVFS curve.
    print("errors at the fitting corners (predicted vs measured):")
    for freq, volt, measured in corners:
        ana = predict_analytical(params.c_eff_mean_f, volt, freq)
        apx = predict_approximate(params.epsilon_mean, freq)
        print(
            f"  f = {freq / 1e9:.2f} GHz: analytical {relative_error(ana, measured):+7.2f} %, "
            f"approximate {relative_error(apx, measured):+7.2f} %"
        )


if __name__ == "__main__":
    main()
