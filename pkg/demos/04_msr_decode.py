"""Decode CPU core voltage from model-specific registers.

On x86 there is no regulator log to read, but the running voltage hides
in MSRs. Intel parts report a VID in bits 47:32 of IA32_PERF_STATUS
(0x198), scaled by 2^-13 V per step. AMD's SVI2 encoding runs the other
way: a higher VID means a lower voltage, V = offset - step * VID.
A plausibility band catches garbage reads before they poison a model.
"""

from socpower.devices import XEON_W2123
from socpower.msr import (
    AmdSviParams,
    decode,
    decode_amd_svi2,
    decode_intel_vid,
    is_plausible_voltage,
)


def main():
    print("Intel IA32_PERF_STATUS, bits 47:32, 2^-13 V per step")
    for label, vid in (("f_min", XEON_W2123.vid_at_fmin), ("f_max", XEON_W2123.vid_at_fmax)):
        raw = vid << 32
        volts = decode_intel_vid(raw)
        print(f"  {label}: raw={raw:#018x} vid={vid} -> {volts:.6f} V")

    # Bits outside the VID field are ignored, so a register crowded with
    # unrelated status bits decodes to the same voltage.
    noisy = (0xDEAD << 48) | (XEON_W2123.vid_at_fmax << 32) | 0xBEEF
    print(f"  noisy read {noisy:#018x} -> {decode_intel_vid(noisy):.6f} V (same VID)")
    print()

    print("AMD SVI2, V = v_offset - k_step * VID")
    params = AmdSviParams(v_offset=1.55, k_step=0.00625)
    for vid in (100, 136, 180):
        print(f"  vid={vid:>3} -> {decode_amd_svi2(vid, params):.5f} V")
    print()

    print("plausibility gate (0.2 V to 1.6 V)")
    for raw in (XEON_W2123.vid_at_fmin << 32, 0x0, 0xFFFF << 32):
        result = decode(raw, encoding="intel")
        verdict = "plausible" if result.plausible else "implausible"
        print(f"  {raw:#018x} -> {result.voltage_v:.6f} V ({verdict})")
    print()

    print("sanity-check helper:", is_plausible_voltage(0.756), is_plausible_voltage(8.0))


if __name__ == "__main__":
    main()
