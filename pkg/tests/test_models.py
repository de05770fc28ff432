"""Bundled model generators parse, carry their parameters, and have the
expected consistency verdicts."""

from fractions import Fraction

from pistab import models
from pistab.pdemodel import check_consistent, parse_spec


def test_reaction_diffusion_parses_and_is_consistent():
    spec = parse_spec(models.reaction_diffusion(0))
    assert spec.ndim == 2
    assert spec.n == 1
    assert spec.delta == (2, 2)
    ok, witness = check_consistent(spec)
    assert ok and witness is None


def test_reaction_parameter_is_exact():
    spec = parse_spec(models.reaction_diffusion("12.3"))
    coeff = spec.terms[(0, 0)]
    assert coeff[0, 0].constant_value() == Fraction(123, 10)


def test_damped_wave_parses():
    for kappa in (1, 2):
        spec = parse_spec(models.damped_wave(kappa))
        assert spec.n == 2
        k = Fraction(kappa)
        coeff = spec.terms[(0, 0)]
        assert coeff[1, 0].constant_value() == -k * k
        assert coeff[1, 1].constant_value() == -2 * k
        assert check_consistent(spec)[0]


def test_kirchhoff_plate_parses():
    spec = parse_spec(models.kirchhoff_plate())
    assert spec.delta == (4, 4)
    assert spec.terms[(0, 0)][0, 1].constant_value() == 1
    assert spec.terms[(2, 2)][1, 0].constant_value() == -2
    assert check_consistent(spec)[0]


def test_inconsistent_example_witness():
    spec = parse_spec(models.inconsistent_example())
    ok, witness = check_consistent(spec)
    assert not ok
    F = Fraction
    assert witness.Ki_block == ((F(0), F(0)), (F(1), F(0)))
    assert witness.Kj_block == ((F(0), F(1)), (F(0), F(0)))


def test_bundled_files_match_generators(tmp_path):
    # the packaged spec files are the default-parameter generator outputs
    import importlib.resources as res

    pairs = {
        "reaction_diffusion.pde": models.reaction_diffusion(),
        "damped_wave.pde": models.damped_wave(),
        "kirchhoff_plate.pde": models.kirchhoff_plate(),
        "inconsistent_example.pde": models.inconsistent_example(),
    }
    root = res.files("pistab") / "specs"
    for fname, text in pairs.items():
        assert (root / fname).read_text() == text
