"""Bond law: strain, potential, force, curvature, critical strain, moments."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize

from cohesive_pd.kernel import (
    BondGeometry,
    CohesivePotential,
    InfluenceFunction,
    RootNotFoundError,
    ball_normalization,
    bond_force_curvature,
    bond_force_per_length,
    bond_potential,
    bond_strain,
    critical_strain,
    influence_moment,
)

EXP = CohesivePotential.exponential(1.0, 1.0)
RAT = CohesivePotential.rational(1.0, 1.0)
J1 = InfluenceFunction.constant()
CONE = InfluenceFunction.conical()

profiles = st.sampled_from(["exponential", "rational"])
positive = st.floats(0.05, 20.0)


def make(kind, slope, plateau):
    return getattr(CohesivePotential, kind)(slope, plateau)


def geom(q=0.05, eps=0.1, e=(1.0, 0.0)):
    return BondGeometry(q, np.asarray(e), eps)


# --- strain ---------------------------------------------------------------

def test_strain_rigid_translation_is_zero():
    assert bond_strain([0.3, -0.2], [0.3, -0.2], geom()) == 0.0


def test_strain_of_dilation_equals_scale():
    c = 0.037
    x, y = np.array([0.2, 0.4]), np.array([0.25, 0.43])
    g = BondGeometry.between(x, y, 0.1)
    assert bond_strain(c * x, c * y, g) == pytest.approx(c, rel=1e-14)


def test_strain_difference_quotient_example():
    assert bond_strain([0.0, 0.0], [0.01, 0.0], geom(0.1, 0.2)) == pytest.approx(0.1, rel=1e-14)


def test_geometry_rejects_bad_input():
    with pytest.raises(ValueError):
        BondGeometry(0.2, np.array([1.0, 0.0]), 0.1)      # beyond the horizon
    with pytest.raises(ValueError):
        BondGeometry(0.05, np.array([1.0, 0.1]), 0.1)     # not a unit vector
    with pytest.raises(ValueError):
        BondGeometry(0.0, np.array([1.0, 0.0]), 0.1)


# --- potential ------------------------------------------------------------

def test_potential_zero_at_zero_strain():
    assert bond_potential(0.0, geom(), EXP, J1) == 0.0


def test_potential_saturates_to_plateau():
    assert bond_potential(1e4, geom(), EXP, J1) == pytest.approx(1.0 / 0.1, rel=1e-12)


def test_potential_closed_form_example():
    # (1/eps) (1 - exp(-q S^2)) with q = 0.05, S = 1
    expected = (1.0 / 0.1) * (1.0 - math.exp(-0.05))
    assert bond_potential(1.0, geom(), EXP, J1) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.48771, abs=5e-6)


@given(profiles, positive, positive, st.floats(0.0, 50.0))
def test_profile_is_increasing_concave_and_bounded(kind, slope, plateau, rho):
    f = make(kind, slope, plateau)
    assert float(f.value(0.0)) == 0.0
    assert float(f.slope(rho)) > 0.0 or float(f.value(rho)) == pytest.approx(plateau)
    assert float(f.curvature(rho)) <= 0.0
    assert float(f.value(rho)) <= plateau * (1 + 1e-15)


@given(profiles, positive, positive)
def test_profile_limits(kind, slope, plateau):
    f = make(kind, slope, plateau)
    r = 1e-9 * plateau / slope
    assert float(f.value(r)) / r == pytest.approx(slope, rel=1e-6)
    assert float(f.value(1e12 * plateau / slope)) == pytest.approx(plateau, rel=1e-9)


# --- force ----------------------------------------------------------------

@given(profiles, st.floats(0.01, 0.0999), st.floats(-50, 50))
def test_force_is_odd(kind, q, S):
    f, g = make(kind, 1.0, 1.0), geom(q, 0.1)
    assert bond_force_per_length(-S, g, f, J1) == -bond_force_per_length(S, g, f, J1)


@given(profiles, st.floats(0.005, 0.099), st.floats(0.0, 3.0), st.sampled_from([J1, CONE]))
def test_force_is_derivative_of_potential(kind, q, frac, J):
    """Central difference of the potential, per unit length (divide by 2 per the (2/eps) law)."""
    f, g = make(kind, 1.0, 1.0), geom(q, 0.1)
    S = max(frac, 0.05) * float(critical_strain(q, f))
    h = 1e-5 * S
    fd = (bond_potential(S + h, g, f, J) - bond_potential(S - h, g, f, J)) / (2 * h)
    # potential (1/eps) J f(q S^2): dS -> (2/eps) J f' q S = q * force_per_length
    assert bond_force_per_length(S, g, f, J) * q == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("f", [EXP, RAT, CohesivePotential.exponential(3.0, 0.5)])
@pytest.mark.parametrize("q", [0.01, 0.05, 0.09])
def test_force_argmax_is_critical_strain(f, q):
    """Independent oracle: maximise the finite-difference force of the potential."""
    g = geom(q, 0.1)

    def force_fd(S):
        h = 1e-6 * max(S, 1e-3)
        return (bond_potential(S + h, g, f, J1) - bond_potential(S - h, g, f, J1)) / (2 * h)

    upper = 10.0 * math.sqrt(f.plateau / f.initial_slope / q)
    grid = np.linspace(1e-6, upper, 4001)
    k = int(np.argmax([force_fd(s) for s in grid]))
    res = optimize.minimize_scalar(lambda s: -force_fd(s), bracket=(grid[k - 1], grid[k], grid[k + 1]),
                                   tol=1e-12)
    assert res.x == pytest.approx(float(critical_strain(q, f)), rel=1e-5)


# --- curvature ------------------------------------------------------------

def test_curvature_at_zero():
    assert bond_force_curvature(0.0, geom(), EXP, J1) == pytest.approx(2.0 / 0.1)


@pytest.mark.parametrize("f", [EXP, RAT])
def test_curvature_vanishes_at_critical_strain(f):
    for q in (0.01, 0.05, 0.099):
        g = geom(q, 0.1)
        assert abs(bond_force_curvature(float(critical_strain(q, f)), g, f, J1)) < 1e-10


@pytest.mark.parametrize("f", [EXP, RAT])
def test_curvature_matches_force_difference(f):
    g = geom(0.04, 0.1)
    Sc = float(critical_strain(0.04, f))
    for S in np.linspace(0.01, 3 * Sc, 100):
        h = 1e-6 * S
        fd = (bond_force_per_length(S + h, g, f, J1) - bond_force_per_length(S - h, g, f, J1)) / (2 * h)
        ref = bond_force_curvature(S, g, f, J1)
        assert ref == pytest.approx(fd, rel=1e-6, abs=1e-6 * abs(bond_force_curvature(0.0, g, f, J1)))


@given(profiles, positive, positive, st.floats(0.01, 0.099), st.floats(0.01, 10.0))
def test_curvature_sign_change_exactly_at_critical_strain(kind, slope, plateau, q, ratio):
    f = make(kind, slope, plateau)
    g = geom(q, 0.1)
    Sc = float(critical_strain(q, f))
    if abs(ratio - 1.0) < 1e-6:
        return
    c = bond_force_curvature(ratio * Sc, g, f, J1)
    assert (c > 0) == (ratio < 1.0)


# --- critical strain ------------------------------------------------------

def test_exponential_inflection_closed_form():
    assert EXP.inflection_argument() == 0.5
    assert EXP.inflection_radius() == pytest.approx(math.sqrt(0.5), rel=1e-15)


def test_rational_inflection_is_root():
    rho = RAT.inflection_argument()
    assert float(RAT.slope(rho) + 2 * rho * RAT.curvature(rho)) == pytest.approx(0.0, abs=1e-14)


@given(st.floats(1e-3, 10.0))
def test_critical_strain_inverse_sqrt_scaling(q):
    assert critical_strain(4 * q, EXP) == pytest.approx(0.5 * critical_strain(q, EXP), rel=1e-14)


def test_critical_strain_rejects_nonpositive_separation():
    with pytest.raises(ValueError):
        critical_strain(0.0, EXP)


def test_table_profile_matches_its_source():
    rho = np.linspace(0, 6, 601)
    f = CohesivePotential.from_table(rho, 1 - np.exp(-rho))
    assert f.initial_slope == pytest.approx(1.0, rel=5e-3)   # one-sided PCHIP end slope
    assert float(f.value(20.0)) == pytest.approx(1 - math.exp(-6))
    assert f.inflection_argument() == pytest.approx(0.5, rel=1e-2)


def test_table_profile_rejects_nonconcave():
    rho = np.linspace(0, 4, 41)
    with pytest.raises(ValueError):
        CohesivePotential.from_table(rho, rho**2 / (1 + rho**2))


def test_table_without_inflection_raises_root_not_found():
    # concave and increasing but f' + 2 rho f'' stays positive (f = sqrt-like growth)
    rho = np.linspace(0, 4, 41)
    f = CohesivePotential.from_table(rho, rho / (1 + 0.01 * rho))
    with pytest.raises(RootNotFoundError):
        f.inflection_argument()


# --- influence and moments ------------------------------------------------

def test_influence_support():
    assert float(J1(0.999)) == 1.0 and float(J1(1.0)) == 0.0
    assert float(CONE(0.25)) == 0.75 and float(CONE(1.5)) == 0.0


def test_moment_examples():
    assert influence_moment(J1, 2) == pytest.approx(1 / 3, rel=1e-14)
    assert influence_moment(CONE, 2) == pytest.approx(1 / 12, rel=1e-13)
    assert ball_normalization(J1, 2) == pytest.approx(2 * math.pi / 3, rel=1e-14)
    assert ball_normalization(J1, 3) == pytest.approx(math.pi, rel=1e-14)


def test_normalization_polar_oracle():
    """m = int_{|xi|<1} |xi| J(|xi|) dxi by an independent 2-D cubature."""
    val = integrate.dblquad(lambda r, t: r * (1 - r) * r, 0, 2 * math.pi, 0, 1)[0]
    assert ball_normalization(CONE, 2) == pytest.approx(val, rel=1e-10)


@pytest.mark.parametrize("J", [J1, CONE, InfluenceFunction.from_table([0, 0.5, 1], [1, 0.8, 0.2])])
@pytest.mark.parametrize("p", [0, 1, 2, 3, 4, 5, 6])
def test_moment_resolution_doubling(J, p):
    a = influence_moment(J, p, resolution=64)
    b = influence_moment(J, p, resolution=128)
    assert abs(a - b) < 1e-10
    assert influence_moment(J, p) == pytest.approx(b, abs=1e-10)
