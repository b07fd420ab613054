"""
Sensitivity exponent sweep in 1D
================================

Runs a small (m, α) grid through the sweep driver and prints the
classification next to the admissibility overlay.  For m = 2 the proven 1D
range is 1 ≤ α ≤ 2; cells outside it still run.
"""

import tempfile
from pathlib import Path

from ddchemo.harness import execute_sweep, parse_config

cfg = parse_config("""
[grid]
cells_x = 64
[model]
ell = 0.0
[control]
t_end = 0.5
[initial]
preset = gaussian_bump
amplitude = 2.0
width = 0.08
[diagnostics]
track_energy = false
[output]
snapshot_times = 0.5
[sweep]
m_values = 1.5, 2
alpha_values = 0.3, 1.0, 2.0, 2.6
""")

with tempfile.TemporaryDirectory() as out:
    code = execute_sweep(cfg, Path(out))
    print("exit code", code)
    print((Path(out) / "classification.csv").read_text())
    print((Path(out) / "overlay.csv").read_text())
