"""Where robust memorization at width k is possible, impossible or open.

Prints a character map over width k (rows) and radius ratio sigma/delta
(columns): '+' possible, '-' impossible, '.' unknown, 'x' invalid radius.
"""
import numpy as np

from robustmem.memorizer import bounds_report

N, d = 1000, 40
ratios = np.logspace(-7, np.log10(0.6), 48)
mark = {"possible": "+", "impossible": "-", "unknown": ".", "invalid-radius": "x"}
print(f"N={N}, d={d}, p=q=2; columns: sigma/delta from {ratios[0]:.0e} to {ratios[-1]:.2f}")
for k in (1, 2, 4, 8, 12, 20, 30, 40, 45, 46, 50):
    row = "".join(mark[bounds_report(N, d, k, 2, 2, 1.0, float(s)).regime] for s in ratios)
    print(f"k={k:>3} {row}")
rep = bounds_report(N, d, 20, 2, 2, 1.0, 1e-4)
print(f"\nat sigma/delta=1e-4: width sufficient > {rep.width_sufficient:.1f}, "
      f"necessary > {rep.width_necessary:.2f}; a={rep.a:.3e}, b={rep.b:.0f}")
