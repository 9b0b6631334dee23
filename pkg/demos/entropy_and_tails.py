"""
Relative entropy and tail events
================================

The relative entropy decides how small a canonical event probability must be
before it carries over to the microcanonical ensemble.  A single edge-count
constraint costs about log n nats; fixing every degree costs far more.
"""

import math

from ensemble_spectra.entropy import entropy_scaling_scan
from ensemble_spectra.experiments import ExperimentConfig, transfer_check

print("edge count, density 1/2")
for n, s, s_minus_log, per_nlogn in entropy_scaling_scan("edge_count", [10, 100, 1000, 10_000], density=0.5):
    print(f"{n:6d}  S = {s:8.4f}   S - log n = {s_minus_log:7.4f}")
# Stirling's formula puts the limit of S - log n at log(pi/4)/2.
print(f"limit: {0.5 * math.log(math.pi / 4):.4f}")

print("constant degree, density 1/2 (exact enumeration)")
for n, s, s_minus_log, per_nlogn in entropy_scaling_scan("degree_sequence", [4, 5, 6, 7], density=0.5):
    print(f"{n:6d}  S = {s:8.4f}   S / (n log n) = {per_nlogn:7.4f}")

# Canonical probability of a large ratio deviation, measured in units of e^{-S}.
# With a threshold growing like log n the ratio falls with n.
config = ExperimentConfig(kind="edge_count", p=0.5, n_list=(100, 200), samples_per_n=3000,
                          gamma=0.4, event_scale="log", seed=4)
for row in transfer_check(config).rows:
    print(f"n={row['n']}: P(E^c) ~ {row['p_event']:.4f} (upper {row['p_event_upper']:.4f}), "
          f"e^-S = {row['exp_neg_s_n']:.4f}, ratio {row['ratio']:.3f}")
