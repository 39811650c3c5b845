"""Check the positivity guarantee, and watch it fail when the hypotheses do.

Validation computes the worst-case jump factor min(1 + z * g) from the
coefficient ranges and mark supports.  When it passes (and phi(0) > 0,
off-diagonal drift >= 0), every simulated state stays positive; the audit
simulates a batch and counts sign violations.  The second half builds a
scenario that violates the margin on purpose.
"""

from sdde_logem import (
    CoefficientField,
    Constant,
    ConstantPath,
    LevyComponentSpec,
    Scenario,
    UniformJumps,
    build_grid,
    positivity_audit,
    validate_assumptions,
)
from sdde_logem.presets import strong_rate

scenario = strong_rate()
checks = validate_assumptions(scenario, q_list=[2.0, 4.0])
print(f"validation passed: {checks.passed}")
print(f"  jump margin min(1 + z g) = {checks.jump_margin:.3f}")
print(f"  aggregate Lipschitz/bound constant = {checks.rho:.3f}")
print(f"  mark-space floor = {checks.support_floor}")

grid = build_grid(scenario.b, scenario.T, m=8)
audit = positivity_audit(scenario, grid, n_paths=2000, seed=2026, threads=2)
print(f"audited {audit.entries_checked} node-component entries over {audit.n_paths} paths")
print(f"  negative entries: {audit.negative_entries}")
print(f"  minimum state observed: {audit.min_value:.6f}")
print(f"  per-path minimum quartiles: {audit.per_path_min_summary}")

print()
print("adversarial scenario (g = -2 against marks near +0.9):")
bad = Scenario(
    d=1,
    b=1.0,
    T=1.0,
    field=CoefficientField(1, ((Constant(0.0),),), ((Constant(-2.0),),)),
    phi=(ConstantPath(1.0),),
    levy=(LevyComponentSpec(8.0, UniformJumps(0.85, 0.95)),),
    positivity_mode=True,
)
bad_checks = validate_assumptions(bad, q_list=[2.0])
print(f"  validation passed: {bad_checks.passed} (margin {bad_checks.jump_margin:.2f})")
bad_audit = positivity_audit(bad, build_grid(1.0, 1.0, 8), n_paths=200, seed=2026)
print(f"  breached paths: {bad_audit.breached_paths} of {bad_audit.n_paths}")
print(f"  first diagnostic: {bad_audit.first_breach}")
