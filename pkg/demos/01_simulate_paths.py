"""Simulate and plot solution paths.

Demonstrates the basic workflow: describe a scenario, draw a jump
realization, run the integrator, and look at the three stored processes
(the jump factor X, the coupling vector p, and the state S = p * X).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sdde_logem import build_grid, sample_jump_realization, simulate
from sdde_logem.presets import strong_rate

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scenario = strong_rate()
grid = build_grid(scenario.b, scenario.T, m=64)
print(f"scenario: d={scenario.d}, delay b={scenario.b}, horizon T={scenario.T}")
print(f"grid: {grid.n_steps} steps of {grid.delta:.4f}")

fig, axes = plt.subplots(3, 1, figsize=(9, 9), sharex=True)
for stream in range(5):
    realization = sample_jump_realization(scenario.levy, scenario.T, seed=2026, stream_index=stream)
    path = simulate(scenario, grid, realization)
    events = realization.total_events
    print(f"stream {stream}: {events} jumps, min S = {path.S.min():.4f}, "
          f"final S = {np.array2string(path.S[-1], precision=4)}")
    axes[0].plot(grid.times, path.S[:, 0], lw=1.2, label=f"stream {stream}")
    axes[1].plot(grid.times, path.X[:, 0], lw=1.2)
    axes[2].plot(grid.times, path.p[:, 0], lw=1.2)

axes[0].set_ylabel("S_1 (state)")
axes[1].set_ylabel("X_1 (jump factor)")
axes[2].set_ylabel("p_1 (coupling)")
axes[2].set_xlabel("t")
axes[0].legend(fontsize=8)
axes[0].set_title("Component 1 of five simulated paths")
fig.tight_layout()
target = OUT / "paths.png"
fig.savefig(target, dpi=150)
print(f"wrote {target}")
