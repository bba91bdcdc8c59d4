"""The measurement toolkit on hand-made data: threshold crossings, rolling
averages, overfit detection, memory-unit lengths, and POS ratios.

Run:  python demos/demo_03_metrics_toolkit.py
"""

import numpy as np

from memlab.metrics import (
    detect_overfit_epoch,
    memory_unit_lengths,
    rolling_average,
    threshold_crossing,
)

print("== threshold crossing T(tau) ==")
m_per_epoch = [0.20, 0.50, 0.93, 0.91, 0.95]
for tau in (0.5, 0.9, 0.99):
    c = threshold_crossing(m_per_epoch, tau)
    print(f"tau={tau:4.2f} -> {'T=' + str(c.index) if c.reached else 'unreached'}"
          f" (budget {c.budget} epochs)")

print("\n== rolling average, window 5 ==")
noisy = [0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4]
print("raw     :", noisy)
print("smoothed:", rolling_average(noisy, 5).round(3).tolist())

print("\n== overfit epoch (first strict validation-perplexity rise) ==")
ppls = [10.0, 8.0, 7.0, 7.5, 6.0]
e = detect_overfit_epoch(ppls)
print(f"val ppl {ppls} -> overfit at epoch {e}")

print("\n== memory-unit lengths ==")
bitmap = np.array([1, 1, 0, 1, 1, 1, 0], dtype=bool)
stats = memory_unit_lengths([bitmap])
print(f"bitmap {bitmap.astype(int).tolist()}")
print(f"runs: {stats.histogram}  mean L (over runs) = {stats.mean_len_runs}")
print(f"token-weighted mean = {stats.mean_len_tokens:.3f}; "
      f"histogram weight {sum(l * c for l, c in stats.histogram.items())}"
      f" == memorized positions {stats.total_memorized}")
