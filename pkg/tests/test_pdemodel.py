"""PDE specifications: parsing, admissibility, K matrices, consistency."""

import math
import random
from fractions import Fraction

import pytest

from conftest import rand_axis_bc
from pistab.pdemodel import (
    AxisBC,
    InadmissibleBC,
    PDESpec,
    SpecParseError,
    build_Q,
    check_admissible,
    check_consistent,
    compute_K,
    mat_identity,
    mat_inv,
    mat_mul,
    parse_spec,
)

F = Fraction

HEAT_1D = """
dim 1
n 1
box 0 1
delta 2
term 2 : [1]
bc 1 0 0 a : [1]
bc 1 1 0 b : [1]
"""


# ---------------------------------------------------------------------------
# Taylor-shift matrix Q
# ---------------------------------------------------------------------------

def test_build_Q_entries():
    q = build_Q(F(2), 3, 1)
    # block (j,k) = z^(k-j)/(k-j)!
    assert q[0][0] == 1 and q[0][1] == 2 and q[0][2] == 2
    assert q[1][2] == 2 and q[2][2] == 1
    assert q[1][0] == 0 and q[2][0] == 0


def test_build_Q_group_property():
    # Q(y) Q(z) = Q(y + z), the flow property of the Taylor shift
    for d in (1, 2, 3):
        qy = build_Q(F(1, 2), d, 2)
        qz = build_Q(F(1, 3), d, 2)
        assert mat_mul(qy, qz) == build_Q(F(5, 6), d, 2)


def test_build_Q_rejects_order_zero():
    with pytest.raises(ValueError):
        build_Q(F(1), 0, 1)


# ---------------------------------------------------------------------------
# boundary conditions and K
# ---------------------------------------------------------------------------

def dirichlet_bc() -> AxisBC:
    one = ((F(1),),)
    return AxisBC(0, 1, 2, 1, {(0, 0): one}, {(1, 0): one})


def test_dirichlet_K_matrix():
    # value pinned at both ends on [0,1]:
    # H_a = [[1,0],[0,0]], H_b = [[0,0],[1,0]], K = [[0,0],[1,0]]
    k = compute_K(dirichlet_bc())
    assert k == ((F(0), F(0)), (F(1), F(0)))


def test_clamped_K_matrix():
    # value and slope at the left end only: H_b = 0 so K = 0
    one = ((F(1),),)
    bc = AxisBC(0, 1, 2, 1, {(0, 0): one, (1, 1): one}, {})
    assert compute_K(bc) == ((F(0), F(0)), (F(0), F(0)))


def test_inadmissible_bc_detected():
    # two copies of the same condition leave the system singular
    one = ((F(1),),)
    bc = AxisBC(0, 1, 2, 1, {(0, 0): one, (1, 0): one}, {})
    assert not check_admissible(bc)
    with pytest.raises(InadmissibleBC):
        compute_K(bc)


def test_admissibility_modes_agree():
    rng = random.Random(5)
    for _ in range(20):
        bc = rand_axis_bc(rng, F(0), F(1), rng.randint(1, 2), rng.randint(1, 2))
        assert check_admissible(bc, "rational")
        assert check_admissible(bc, "float")
    with pytest.raises(ValueError):
        check_admissible(dirichlet_bc(), "decimal")


def test_bc_index_range_checked():
    one = ((F(1),),)
    with pytest.raises(ValueError):
        AxisBC(0, 1, 1, 1, {(0, 1): one}, {})
    with pytest.raises(ValueError):
        AxisBC(1, 1, 1, 1, {(0, 0): one}, {})  # empty interval


def test_K_defining_identity():
    # K = (H_a + H_b Q)^(-1) H_b, so (H_a + H_b Q) K = H_b
    rng = random.Random(6)
    for _ in range(10):
        bc = rand_axis_bc(rng, F(0), F(2), 2, 2)
        k = compute_K(bc)
        assert mat_mul(bc.system_matrix(), k) == bc.H_b


# ---------------------------------------------------------------------------
# consistency across axes
# ---------------------------------------------------------------------------

def test_diagonal_bcs_always_consistent():
    rng = random.Random(7)
    for _ in range(10):
        bcs = tuple(rand_axis_bc(rng, F(0), F(1), 2, 2) for _ in range(2))
        spec = PDESpec(
            box=((F(0), F(1)), (F(0), F(1))), n=2, delta=(2, 2),
            terms={}, bcs=bcs,
        )
        ok, witness = check_consistent(spec)
        assert ok and witness is None


def test_known_inconsistent_pair():
    from pistab import models

    spec = parse_spec(models.inconsistent_example())
    ok, w = check_consistent(spec)
    assert not ok
    assert w.Ki_block == ((F(0), F(0)), (F(1), F(0)))
    assert w.Kj_block == ((F(0), F(1)), (F(0), F(0)))
    assert "does not commute" in str(w)


def test_order_zero_axes_skip_consistency():
    spec = PDESpec(
        box=((F(0), F(1)), (F(0), F(1))), n=1, delta=(2, 0),
        terms={}, bcs=(dirichlet_bc(), None),
    )
    ok, _ = check_consistent(spec)
    assert ok


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def test_parse_heat_1d():
    spec = parse_spec(HEAT_1D)
    assert spec.ndim == 1 and spec.n == 1 and spec.delta == (2,)
    assert spec.box == (((F(0)), F(1)),)
    assert (2,) in spec.terms
    assert spec.axis_K(1) == ((F(0), F(0)), (F(1), F(0)))


def test_parse_polynomial_coefficients():
    spec = parse_spec("""
dim 1
n 1
box 0 2
delta 1
term 1 : [s1^2 + 1/2]
bc 1 0 0 a : [1]
""")
    p = spec.terms[(1,)][0, 0]
    assert p.evaluate({list(p.variables())[0]: F(2)}) == F(9, 2)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(SpecParseError, match="line"):
        parse_spec("dim 1\nbogus 3\n")
    with pytest.raises(SpecParseError):
        parse_spec(HEAT_1D.replace("box 0 1", "box 1 0"))
    with pytest.raises(SpecParseError):
        parse_spec(HEAT_1D.replace("[1]", "[1, 0]", 1))


def test_spec_validates_term_orders():
    with pytest.raises(ValueError):
        parse_spec(HEAT_1D.replace("term 2", "term 3"))


def test_bundled_specs_load():
    from importlib import resources

    names = ["reaction_diffusion", "damped_wave", "kirchhoff_plate",
             "inconsistent_example"]
    for name in names:
        text = (resources.files("pistab") / "specs" / f"{name}.pde").read_text()
        spec = parse_spec(text, name=name)
        assert spec.ndim == 2


def test_float_vs_rational_admissibility_near_singular():
    # a nearly-singular system is still admissible in exact arithmetic
    eps = F(1, 10**12)
    one = ((F(1),),)
    tiny = ((eps,),)
    bc = AxisBC(0, 1, 2, 1, {(0, 0): one, (1, 0): tiny}, {(1, 0): one})
    assert check_admissible(bc, "rational")


def test_mat_inv_roundtrip():
    rng = random.Random(8)
    for _ in range(10):
        m = tuple(
            tuple(F(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(3))
            for _ in range(3)
        )
        inv = mat_inv(m)
        if inv is not None:
            assert mat_mul(m, inv) == mat_identity(3)
