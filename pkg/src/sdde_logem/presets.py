"""Ready-made example scenarios.

These are the reference problem instances used by the demos and the
verification suite: a scalar constant-coefficient case with a closed-form
solution, a two-component state-dependent case exercising the strong
convergence rate, the noise-free coupling case with a matrix-exponential
reference, and a scalar jump-driven case for increment scaling.
"""

from .coefficients import CoefficientField, Constant, ConstantPath, Sigmoid
from .levy import LevyComponentSpec, UniformJumps
from .scheme import Scenario

__all__ = [
    "scalar_constant",
    "strong_rate",
    "deterministic_coupling",
    "scalar_jumps",
]


def scalar_constant(f=0.3, g=0.1, rate=2.0, phi0=1.0, T=1.0,
                    mark_lo=-0.5, mark_hi=1.0):
    """d=1 with constant coefficients: the closed-form product solution applies."""
    field = CoefficientField(
        d=1,
        f_entries=((Constant(f),),),
        g_entries=((Constant(g),),),
    )
    return Scenario(
        d=1,
        b=1.0,
        T=T,
        field=field,
        phi=(ConstantPath(phi0),),
        levy=(LevyComponentSpec(rate, UniformJumps(mark_lo, mark_hi)),),
        positivity_mode=True,
    )


def strong_rate():
    """d=2 with bounded Lipschitz state-dependent coefficients.

    Weak drift and strong state dependence in g keep the coupling error
    dominated by the jump/freeze interaction, whose order 1/2 the strong
    convergence experiment measures.  Jump margin 0.7.
    """
    f = (
        (Sigmoid(c0=-0.02, amplitude=0.04, w=(0.6, -0.4)),
         Sigmoid(c0=0.0, amplitude=0.03, w=(0.7, 0.3))),
        (Sigmoid(c0=0.0, amplitude=0.03, w=(0.4, 0.4)),
         Sigmoid(c0=-0.02, amplitude=0.04, w=(-0.5, 0.5))),
    )
    g = (
        (Sigmoid(c0=0.1, amplitude=0.5, w=(1.6, -1.1)),
         Sigmoid(c0=0.55, amplitude=-0.5, w=(-1.2, 1.4))),
        (Sigmoid(c0=0.15, amplitude=0.4, w=(1.1, 1.0)),
         Sigmoid(c0=0.6, amplitude=-0.5, w=(-1.3, 0.9))),
    )
    field = CoefficientField(d=2, f_entries=f, g_entries=g)
    return Scenario(
        d=2,
        b=1.0,
        T=2.0,
        field=field,
        phi=(ConstantPath(1.0), ConstantPath(1.5)),
        levy=(
            LevyComponentSpec(3.0, UniformJumps(-0.5, 0.5)),
            LevyComponentSpec(3.0, UniformJumps(-0.45, 0.45)),
        ),
        positivity_mode=True,
    )


def deterministic_coupling():
    """d=2, zero diagonal drift, constant symmetric coupling, no noise.

    The flow is exp(At) with A = [[0, 1], [1, 0]]; the scheme's linear
    coupling update converges to it at first order.
    """
    f = (
        (Constant(0.0), Constant(1.0)),
        (Constant(1.0), Constant(0.0)),
    )
    g = ((Constant(0.0), Constant(0.0)), (Constant(0.0), Constant(0.0)))
    field = CoefficientField(d=2, f_entries=f, g_entries=g)
    return Scenario(
        d=2,
        b=1.0,
        T=1.0,
        field=field,
        phi=(ConstantPath(1.0), ConstantPath(1.0)),
        levy=(
            LevyComponentSpec(0.0, UniformJumps(-0.1, 0.1)),
            LevyComponentSpec(0.0, UniformJumps(-0.1, 0.1)),
        ),
        positivity_mode=True,
    )


def scalar_jumps():
    """d=1, jump-dominated dynamics for the step-increment study."""
    field = CoefficientField(
        d=1,
        f_entries=((Constant(0.1),),),
        g_entries=((Sigmoid(c0=0.1, amplitude=0.3, w=(1.0,)),),),
    )
    return Scenario(
        d=1,
        b=1.0,
        T=1.0,
        field=field,
        phi=(ConstantPath(1.0),),
        levy=(LevyComponentSpec(4.0, UniformJumps(-0.4, 0.9)),),
        positivity_mode=True,
    )
