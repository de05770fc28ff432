"""Text generators for the example PDE models bundled with the package.

Each function returns a spec document (the grammar consumed by
:func:`pistab.pdemodel.parse_spec`) with the model parameter baked in, so the
same source covers both the bundled ``specs/*.pde`` files and parameter
sweeps in tests and benchmarks.
"""

from fractions import Fraction

__all__ = [
    "reaction_diffusion",
    "damped_wave",
    "kirchhoff_plate",
    "inconsistent_example",
]


def _frac(x) -> str:
    f = Fraction(str(x)) if not isinstance(x, Fraction) else x
    return str(f)


def reaction_diffusion(r=0) -> str:
    """2D reaction-diffusion u_t = u_xx + u_yy + r u on [0,1]^2 with
    u(0,y) = u(1,y) = u(x,0) = u_y(x,1) = 0."""
    return f"""\
# reaction-diffusion: u_t = u_xx + u_yy + r*u, r = {_frac(r)}
dim 2
n 1
box 0 1 0 1
delta 2 2
term 0 0 : [{_frac(r)}]
term 2 0 : [1]
term 0 2 : [1]
bc 1 0 0 a : [1]
bc 1 1 0 b : [1]
bc 2 0 0 a : [1]
bc 2 1 1 b : [1]
"""


def damped_wave(kappa=1) -> str:
    """2D wave equation with stabilizing feedback, first-order form in the
    state (phi, phi_t):
      phi_tt = phi_xx + phi_yy - 2 kappa phi_t - kappa^2 phi,
      phi(0,y) = phi_x(1,y) = phi(x,0) = phi_y(x,1) = 0."""
    k = Fraction(str(kappa))
    return f"""\
# damped wave in first-order form, kappa = {k}
dim 2
n 2
box 0 1 0 1
delta 2 2
term 0 0 : [0, 1; {-k * k}, {-2 * k}]
term 2 0 : [0, 0; 1, 0]
term 0 2 : [0, 0; 1, 0]
bc 1 0 0 a : [1, 0; 0, 1]
bc 1 1 1 b : [1, 0; 0, 1]
bc 2 0 0 a : [1, 0; 0, 1]
bc 2 1 1 b : [1, 0; 0, 1]
"""


def kirchhoff_plate(alpha0="1/5") -> str:
    """Kirchhoff plate with structural damping, first-order form in
    (w, w_t):
      w_tt = -w_xxxx - 2 w_xxyy - w_yyyy + alpha0 (w_txx + w_tyy),
    clamped on all four edges (value and normal derivative zero)."""
    a0 = Fraction(str(alpha0))
    lines = [
        f"# Kirchhoff plate, structural damping alpha0 = {a0}",
        "dim 2",
        "n 2",
        "box 0 1 0 1",
        "delta 4 4",
        "term 0 0 : [0, 1; 0, 0]",
        "term 4 0 : [0, 0; -1, 0]",
        "term 2 2 : [0, 0; -2, 0]",
        "term 0 4 : [0, 0; -1, 0]",
        f"term 2 0 : [0, 0; 0, {a0}]",
        f"term 0 2 : [0, 0; 0, {a0}]",
    ]
    for axis in (1, 2):
        for row, (deriv, side) in enumerate(
            [(0, "a"), (1, "a"), (0, "b"), (1, "b")]
        ):
            lines.append(f"bc {axis} {row} {deriv} {side} : [1, 0; 0, 1]")
    return "\n".join(lines) + "\n"


def inconsistent_example() -> str:
    """First-order 2D domain whose per-axis boundary corrections do not
    commute (K1 = [[0,0],[1,0]], K2 = [[0,1],[0,0]]), so the multivariate
    differential operator is not invertible on the joint domain."""
    return """\
# inconsistent boundary conditions: the per-axis K blocks do not commute
dim 2
n 2
box 0 1 0 1
delta 1 1
term 0 0 : [0, 0; 0, 0]
bc 1 0 0 a : [1, 0; 0, 1]
bc 1 0 0 b : [0, 0; 1, 0]
bc 2 0 0 a : [1, 0; 0, 1]
bc 2 0 0 b : [0, 1; 0, 0]
"""
