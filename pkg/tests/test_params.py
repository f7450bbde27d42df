import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from spinshortcut.params import (
    HBAR,
    MU_B,
    ParameterError,
    PhysicalParams,
    field_conversion_constants,
    parse_config,
    load_config,
    reduction_validity,
    zeeman_splitting,
)


def si_conversion_constant(hbar_strength_meVcm, sqrt2=False):
    """meV gained per ns under 1 V/m, through SI units only."""
    meV = 1e-3 * sc.e
    strength_Jm = hbar_strength_meVcm * meV * 1e-2
    velocity = strength_Jm / sc.hbar
    energy_J = sc.e * velocity * 1.0 * 1e-9  # e * v * E * t
    if sqrt2:
        energy_J *= math.sqrt(2.0)
    return energy_J / meV


def test_unit_constants_match_reference_values():
    assert HBAR == pytest.approx(6.58212e-4, rel=1e-4)
    assert MU_B == pytest.approx(5.7884e-2, rel=1e-4)


def test_zeeman_zero_field():
    assert zeeman_splitting(PhysicalParams(B=0.0)) == 0.0


def test_zeeman_device_point():
    # hand product -0.44 * 0.057883818 * 3.43
    assert zeeman_splitting(PhysicalParams()) == pytest.approx(-0.0873582582, rel=1e-8)


def test_zeeman_sign_symmetry():
    pos = PhysicalParams(g=0.44, allow_positive_g=True)
    assert zeeman_splitting(pos) == pytest.approx(-zeeman_splitting(PhysicalParams()), rel=1e-15)


def test_positive_g_needs_override():
    with pytest.raises(ParameterError):
        PhysicalParams(g=0.44)


@pytest.mark.parametrize("field", ["J", "t_f", "hbar_alpha", "hbar_beta"])
def test_nonpositive_parameters_rejected(field):
    with pytest.raises(ParameterError):
        PhysicalParams(**{field: 0.0})


@pytest.mark.parametrize("seed", range(3))
def test_zeeman_linear_in_g_and_B(seed):
    rng = np.random.default_rng(seed)
    g1, g2 = -rng.uniform(0.1, 2, 2)
    B1, B2 = rng.uniform(0, 10, 2)
    z = lambda g, B: zeeman_splitting(PhysicalParams(g=g, B=B))  # noqa: E731
    assert z(g1 + g2, B1) == pytest.approx(z(g1, B1) + z(g2, B1), rel=1e-13)
    assert z(g1, B1 + B2) == pytest.approx(z(g1, B1) + z(g1, B2), rel=1e-13)


def test_reduction_validity_device_point():
    ratio, valid = reduction_validity(PhysicalParams())
    assert abs(ratio - 0.126) <= 0.010
    assert valid


def test_reduction_validity_degenerate_levels():
    B = 0.1 / (0.44 * MU_B)
    ratio, valid = reduction_validity(PhysicalParams(B=B))
    assert ratio == pytest.approx(0.0, abs=1e-14)
    assert valid


def test_reduction_validity_no_field():
    ratio, valid = reduction_validity(PhysicalParams(B=0.0))
    assert ratio == 1.0
    assert not valid


def test_reduction_validity_threshold_configurable():
    assert not reduction_validity(PhysicalParams(), threshold=0.1)[1]


def test_conversion_constants_against_si_chain():
    u = field_conversion_constants(PhysicalParams())
    assert u.c_beta == pytest.approx(si_conversion_constant(0.3e-6), rel=1e-9)
    assert u.c_alpha == pytest.approx(si_conversion_constant(1.2e-6, sqrt2=True), rel=1e-9)
    assert u.c_beta == pytest.approx(4.558e-3, rel=1e-3)
    assert u.c_alpha == pytest.approx(2.578e-2, rel=1e-3)


def test_conversion_doubles_with_strength():
    a = field_conversion_constants(PhysicalParams())
    b = field_conversion_constants(PhysicalParams(hbar_beta=0.6e-6))
    assert b.c_beta == pytest.approx(2 * a.c_beta, rel=1e-14)
    assert b.c_alpha == a.c_alpha


@settings(max_examples=30, deadline=None)
@given(
    ha=st.floats(1e-8, 1e-4),
    hb=st.floats(1e-8, 1e-4),
    s=st.floats(0.01, 100.0),
)
def test_conversion_homogeneous_degree_one(ha, hb, s):
    base = field_conversion_constants(PhysicalParams(hbar_alpha=ha, hbar_beta=hb))
    sa = field_conversion_constants(PhysicalParams(hbar_alpha=s * ha, hbar_beta=hb))
    sb = field_conversion_constants(PhysicalParams(hbar_alpha=ha, hbar_beta=s * hb))
    assert sa.c_alpha == pytest.approx(s * base.c_alpha, rel=1e-12)
    assert sa.c_beta == base.c_beta
    assert sb.c_beta == pytest.approx(s * base.c_beta, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(rate=st.floats(-1e3, 1e3, allow_nan=False), channel=st.sampled_from(["alpha", "beta"]))
def test_rate_field_round_trip(rate, channel):
    u = PhysicalParams().units
    back = u.rate_from_field(u.field_from_rate(rate, channel), channel)
    assert back == pytest.approx(rate, rel=1e-12, abs=1e-300)


def test_parse_config_reads_all_keys():
    text = """
    # reference device
    g = -0.44
    B_tesla = 3.43
    J_meV = 0.1
    hbar_alpha_meVcm = 1.2e-6
    hbar_beta_meVcm = 0.3e-6   # Dresselhaus
    tf_ns = 2
    """
    p, extras = parse_config(text)
    assert p == PhysicalParams()
    assert extras == {}


def test_parse_config_extras_and_errors(tmp_path):
    p, extras = parse_config("J_meV = 0.2\nscenario = rotated", extra_keys=("scenario",))
    assert p.J == 0.2 and extras == {"scenario": "rotated"}
    with pytest.raises(ParameterError, match="unknown key"):
        parse_config("colour = blue")
    with pytest.raises(ParameterError, match="duplicate"):
        parse_config("g = -0.4\ng = -0.5")
    with pytest.raises(ParameterError, match="not a number"):
        parse_config("g = minus")
    with pytest.raises(ParameterError, match="key=value"):
        parse_config("g -0.44")
    path = tmp_path / "dev.cfg"
    path.write_text("B_tesla = 1.0\n")
    assert load_config(path)[0].B == 1.0
