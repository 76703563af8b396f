"""Link-level building blocks and the path-loss spread of a whole network.

Prints a few single-link numbers, then writes the empirical path-loss CDF of
every realised UE/base-station pair, split into ground-to-ground (Hata),
aerial-user (UMa-AV) and UAV-to-ground links.

    python demos/channel_and_pathloss.py [out.csv]
"""

import sys

import numpy as np

from aghetnet import channel as ch
from aghetnet import harness as hn

# one MBS link at a few distances, both readings of the Hata distance term
for d in (100.0, 1000.0, 5000.0):
    print(f"Hata {d:6.0f} m: {float(ch.pl_gtg(d)):6.1f} dB (km term), "
          f"{float(ch.pl_gtg(d, distance_units='m')):6.1f} dB (meter term)")

# LOS odds of a UAV seen from the ground, by elevation
for theta in (5, 15, 30, 60, 90):
    print(f"ATG elevation {theta:2d} deg: P_LOS {float(ch.atg_los_probability(theta)):.3f}")

# element gain off boresight
for phi in (0, 30, 65, 120):
    print(f"antenna phi={phi:3d} deg: {float(ch.antenna_gain(phi, 90.0)):6.1f} dBi")

rx = ch.received_power(26.0, float(ch.pl_atg(300.0, 25.0, 1.5)), 8.0, 1.0)
print(f"UABS at 25 m, UE 300 m away: {10 * np.log10(rx):.1f} dBm")

cfg = hn.desk_scale()
samples = hn.pathloss_samples(cfg)
for kind, v in samples.items():
    print(f"{kind}: {v.size} links, median {np.median(v):.1f} dB, max {v.max():.1f} dB")

out = sys.argv[1] if len(sys.argv) > 1 else "pathloss_cdf.csv"
hn.write_pathloss_cdf(samples, out)
print("CDF written to", out)
