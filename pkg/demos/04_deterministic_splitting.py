"""First-order behavior of the linear coupling update, noise off.

With zero diagonal drift, constant symmetric coupling and no jumps, the
exact flow is the matrix exponential exp(At) phi(0).  The scheme replaces
it by products of (I + A dt), so the error halves with the step size.
"""

from sdde_logem import deterministic_reference_error
from sdde_logem.presets import deterministic_coupling

scenario = deterministic_coupling()
result = deterministic_reference_error(scenario, m_list=[4, 8, 16, 32, 64, 128])
print(f"horizon: [0, {result.horizon}]  (delayed argument known in closed form there)")
print(f"{'m':>5} {'delta':>10} {'sup error':>13} {'ratio':>7}")
prev = None
for (m, delta, err), ratio in zip(result.levels, (None, *result.ratios)):
    tag = f"{ratio:7.3f}" if ratio is not None else "      -"
    print(f"{m:>5} {delta:>10.5f} {err:>13.6e} {tag}")
print("ratios near 2 per halving: first-order convergence of the splitting")
