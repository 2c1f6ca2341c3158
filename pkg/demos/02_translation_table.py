"""What the discrete kernel looks like next to the continuous one.

The table entry T(j) is the scheme applied to a unit spike. Away from the
origin it should track h^3 / (4 pi |x|). It does, with a small ripple that
alternates in sign and shrinks roughly like 0.11 / j.

Run: python3 demos/02_translation_table.py
"""

import math

from volpot import potential
from volpot.grid import GridSpec
from volpot.kernels import KernelSpec

for n in (32, 64):
    grid = GridSpec(3, n)
    table = potential.precompute_table(potential.SpectralMultiplier(KernelSpec(3, "laplace"), grid))
    t0 = table.entry((0, 0, 0)).real / grid.h**2
    print(f"n={n}: T(0) / h^2 = {t0:.6f} (finite self-term)")
    print("   j   T(j) / (h^3 g(jh))   (ratio - 1) * j")
    for j in sorted({1, 2, 3, 5, 8, 12, 16, n // 2}):
        ratio = table.entry((j, 0, 0)).real / (grid.h**3 / (4 * math.pi * j * grid.h))
        print(f"{j:4d}   {ratio:18.5f}   {(ratio - 1) * j:+.4f}")
    print()
