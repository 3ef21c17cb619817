"""Dense nonlocal energies, the energy inequalities and the plane-wave check."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cohesive_pd.benchmarks import unit_material
from cohesive_pd.calibration import MaterialModel
from cohesive_pd.kernel import CohesivePotential, InfluenceFunction
from cohesive_pd.verification import (
    DilationField,
    LinearField,
    ModeIOpeningField,
    NonConvergedError,
    PlaneWaveField,
    PureJumpField,
    ZeroField,
    check_inequality,
    check_monotonicity,
    field_catalog,
    lefm_energy,
    pd_energy_dense,
    plane_wave_check,
    saturating_jump,
    wave_speed,
)

MAT = unit_material(0.1)
CONE = MaterialModel(1.0, 0.1, 2, CohesivePotential.rational(1.0, 1.0), InfluenceFunction.conical())


def linear_density_oracle(G, material, eps):
    """Polar integral of the ball-averaged nonlocal density of ``u = G x`` (uniform in x)."""
    J, f = material.influence, material.potential

    def integrand(r, th):
        e = np.array([math.cos(th), math.sin(th)])
        S = float(e @ G @ e)
        return float(J.closure(r / eps)) * float(f.value(r * S * S)) / eps * r

    val = integrate.dblquad(integrand, 0.0, 2 * math.pi, 0.0, eps, epsabs=0, epsrel=1e-11)[0]
    return val / (math.pi * eps**2)


def jump_line_oracle(material, eps, delta):
    """Energy per unit length of a straight jump ``delta`` along its normal."""
    J, f = material.influence, material.potential

    def integrand(r, th):
        return float(J.closure(r / eps)) * float(f.value(delta**2 * math.sin(th) ** 2 / r)) / eps * r

    # A bond (r, th) from a point at distance s below the line crosses it iff
    # s < r sin(th); integrating s out leaves the weight r sin(th).  Both sides
    # of the line contribute equally.
    val = integrate.dblquad(lambda r, th: integrand(r, th) * r * math.sin(th),
                            0.0, math.pi, 0.0, eps, epsabs=0, epsrel=1e-10)[0]
    return 2.0 * val / (math.pi * eps**2)


def test_zero_field():
    z = ZeroField(2)
    assert pd_energy_dense(z, MAT) == 0.0
    r = check_inequality(z, MAT, 0.1)
    assert r.pd == 0.0 and r.lefm == 0.0 and r


@pytest.mark.parametrize("material", [MAT, CONE])
@pytest.mark.parametrize("G", [((0.01, 0.0), (0.0, 0.01)), ((0.02, 0.01), (-0.005, 0.015))])
def test_linear_field_matches_polar_oracle(material, G):
    fld = LinearField(G)
    box = ((0.0, 1.0), (0.0, 0.5))
    got = pd_energy_dense(fld, material, 0.1, box=box)
    assert got == pytest.approx(0.5 * linear_density_oracle(np.array(G), material, 0.1), rel=1e-6)


def test_dilation_lefm_closed_form():
    c = 0.01
    # 2 mu |E|^2 + lam tr(E)^2 = 4 mu c^2 + 4 lam c^2 with mu = lam = M_2 / 4
    assert lefm_energy(DilationField(c), MAT) == pytest.approx(8.0 * MAT.mu * c * c, rel=1e-14)
    assert lefm_energy(DilationField(c), MAT) == pytest.approx(2.0 / 3.0 * c * c, rel=1e-14)
    assert DilationField(c).kind == "dilation"


def test_pure_jump_matches_line_oracle():
    delta = saturating_jump(MAT, 0.2)
    fld = PureJumpField((0.5, 0.5), (0.0, 1.0), (0.0, delta))
    got = pd_energy_dense(fld, MAT, 0.1)
    assert got == pytest.approx(jump_line_oracle(MAT, 0.1, delta), rel=2e-4)


def test_dilation_density_approaches_elastic_value_from_below():
    c = 1e-3
    ratios = [pd_energy_dense(DilationField(c), MAT, eps) / (2.0 / 3.0 * c * c) for eps in (0.2, 0.1, 0.05)]
    assert all(r < 1.0 for r in ratios)
    assert ratios == sorted(ratios) and ratios[-1] == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("name,M", [("dilation", 2), ("pure-jump", 2), ("pure-jump", 4)])
def test_monotonicity_examples(name, M):
    r = check_monotonicity(field_catalog(MAT)[name], MAT, 0.05, M)
    assert r and r.coarse <= r.fine


def test_mode_i_equals_pure_jump_of_same_size():
    delta = 0.3
    a = pd_energy_dense(ModeIOpeningField((0.5, 0.5), (0.0, 1.0), amplitude=delta), MAT, 0.1)
    b = pd_energy_dense(PureJumpField((0.5, 0.5), (0.0, 1.0), (0.0, delta)), MAT, 0.1)
    assert a == pytest.approx(b, rel=1e-9)


def test_saturating_jump_definition():
    delta = saturating_jump(MAT, 0.2)
    f = MAT.potential
    assert float(f.value(delta**2 / 0.2)) == pytest.approx(0.99 * f.plateau, rel=1e-12)


def test_jump_length_of_chords():
    assert PureJumpField((0.5, 0.5), (0.0, 1.0), (0.0, 1.0)).jump_length(((0, 1), (0, 1))) == pytest.approx(1.0)
    diag = PureJumpField((0.5, 0.5), (1.0, 1.0), (0.0, 1.0))
    assert diag.jump_length(((0, 1), (0, 1))) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert lefm_energy(diag, MAT) == pytest.approx(MAT.Gc * math.sqrt(2.0), rel=1e-12)


def test_plane_wave_bulk_energy_against_quadrature():
    fld = PlaneWaveField((3.0, -2.0), (0.6, 0.8), amplitude=0.01, phase=0.4)
    box = ((0.1, 1.3), (-0.2, 0.7))
    mu, lam = 0.3, 0.2

    def dens(y, x):
        E = fld.strain(np.array([x, y]))
        return 2 * mu * np.sum(E * E) + lam * np.trace(E) ** 2

    ref = integrate.dblquad(dens, *box[0], *box[1], epsabs=0, epsrel=1e-12)[0]
    assert fld.bulk_energy(box, mu, lam) == pytest.approx(ref, rel=1e-10)


def test_translation_invariance():
    delta = 0.3
    a = pd_energy_dense(PureJumpField((0.5, 0.5), (0.0, 1.0), (0.0, delta)), MAT, 0.1)
    b = pd_energy_dense(PureJumpField((2.5, -0.5), (0.0, 1.0), (0.0, delta)), MAT, 0.1,
                        box=((2.0, 3.0), (-1.0, 0.0)))
    assert a == pytest.approx(b, rel=1e-10)


def test_monotonicity_with_unit_factor_is_equality():
    r = check_monotonicity(field_catalog(MAT)["linear"], MAT, 0.1, 1)
    assert r.coarse == r.fine and r


@pytest.mark.parametrize("eta,M", [(0.1, 0), (0.1, 2.0), (0.3, 4)])
def test_monotonicity_rejects_bad_arguments(eta, M):
    with pytest.raises(ValueError):
        check_monotonicity(field_catalog(MAT)["linear"], MAT, eta, M)


def test_nonconverged_quadrature_raises():
    fld = field_catalog(MAT)["pure-jump"]
    with pytest.raises(NonConvergedError):
        pd_energy_dense(fld, MAT, 0.1, quad_resolution=2, max_resolution=2)


def test_horizon_out_of_range_rejected():
    with pytest.raises(ValueError):
        pd_energy_dense(ZeroField(2), MAT, 1.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        lefm_energy(ZeroField(3), MAT)


@settings(max_examples=15)
@given(st.lists(st.floats(-0.05, 0.05), min_size=4, max_size=4), st.sampled_from([0.2, 0.1, 0.05]))
def test_linear_fields_obey_inequality_and_monotonicity(g, eps):
    fld = LinearField(((g[0], g[1]), (g[2], g[3])))
    fine = check_inequality(fld, MAT, eps / 2)
    coarse = check_inequality(fld, MAT, eps)
    assert fine and coarse
    assert coarse.pd <= fine.pd * (1 + 1e-3)


@settings(max_examples=10)
@given(st.floats(0.001, 0.01), st.integers(1, 3), st.floats(0.0, 6.28))
def test_plane_waves_obey_inequality(amp, kx, phase):
    fld = PlaneWaveField((2 * math.pi * kx, 0.0), (0.0, 1.0), amplitude=amp, phase=phase)
    assert check_inequality(fld, MAT, 0.1)


# --- plane-wave dynamics --------------------------------------------------

def test_wave_speed_conventions():
    k, p = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    s_e, s_t = wave_speed(MAT, k, p), wave_speed(MAT, k, p, "textbook")
    assert s_e == pytest.approx(math.sqrt(2 * MAT.mu / MAT.density), rel=1e-15)
    assert s_e / s_t == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert wave_speed(MAT, k, k) == pytest.approx(math.sqrt((4 * MAT.mu + 2 * MAT.lam) / MAT.density))
    with pytest.raises(ValueError):
        wave_speed(MAT, k, np.array([0.6, 0.8]))
    with pytest.raises(ValueError):
        wave_speed(MAT, k, p, "other")


def test_plane_wave_zero_amplitude_has_zero_error():
    r = plane_wave_check(MAT, (2 * math.pi, 0.0), (0.0, 1.0), T=0.05, amplitude=0.0)
    assert r.error == 0.0 and len(r.times) == 4


def test_plane_wave_period_must_fit_lattice():
    with pytest.raises(ValueError):
        plane_wave_check(MAT, (7.0, 0.0), (0.0, 1.0))


def test_plane_wave_short_run_is_accurate():
    r = plane_wave_check(unit_material(0.05), (2 * math.pi, 0.0), (0.0, 1.0), T=0.2)
    assert r.error < 0.01
    assert float(r) == max(r.errors)


def test_catalog_names():
    assert set(field_catalog(MAT)) == {"linear", "dilation", "pure-jump", "mode-I", "plane-wave"}
