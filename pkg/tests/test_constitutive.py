import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matnet.constitutive import (ElasticOrthotropic, J2Plasticity, LinearElastic, MaterialState,
                                 isotropic_stiffness, stiffness_of, von_mises)
from matnet.errors import AdmissibilityError
from matnet.presets import load_preset

import oracles


def test_composite2_fiber_c1111():
    E, nu = 72.0, 0.22
    C = stiffness_of(ElasticOrthotropic(E, E, E, 29.5, 29.5, 29.5, nu, nu, nu))
    assert np.isclose(C[0, 0], E * (1 - nu) / ((1 + nu) * (1 - 2 * nu)), rtol=1e-12)
    assert np.isclose(C[0, 0], 82.20, atol=5e-3)


def test_isotropic_zero_poisson_is_diagonal():
    C = stiffness_of(ElasticOrthotropic.isotropic(10.0, 0.0))
    assert np.allclose(C, np.diag([10, 10, 10, 5, 5, 5.0]), atol=1e-13)


def test_isotropic_matches_lame_form():
    C = stiffness_of(ElasticOrthotropic.isotropic(3.8, 0.387))
    assert np.allclose(C, isotropic_stiffness(3.8, 0.387), rtol=1e-12)


def test_composite1_fiber_is_psd():
    fiber = ElasticOrthotropic(19.8, 19.8, 245.0, 5.9, 29.2, 29.2, 0.67, 0.02, 0.02)
    C = stiffness_of(fiber)
    assert np.linalg.eigvalsh(C).min() > 0
    assert np.allclose(C, C.T)


def test_non_psd_compliance_names_minor():
    with pytest.raises(AdmissibilityError, match="leading minor"):
        stiffness_of(ElasticOrthotropic(1.0, 1.0, 1.0, 1, 1, 1, 1.5, 0.0, 0.0))
    with pytest.raises(AdmissibilityError, match="G23"):
        stiffness_of(ElasticOrthotropic(1.0, 1.0, 1.0, 1, 1, -1, 0.1, 0.1, 0.1))


def test_j2_invariants_validated():
    with pytest.raises(AdmissibilityError):
        J2Plasticity(E=-1.0, nu=0.3, sy0=0.1)
    with pytest.raises(AdmissibilityError):
        J2Plasticity(E=1.0, nu=0.5, sy0=0.1)
    with pytest.raises(AdmissibilityError):
        J2Plasticity(E=1.0, nu=0.3, sy0=0.0)
    with pytest.raises(AdmissibilityError):
        J2Plasticity(E=1.0, nu=0.3, sy0=0.1, H_lin=-1.0)


def test_j2_default_hardening():
    m = J2Plasticity(E=5.0, nu=0.3, sy0=0.02)
    assert m.H_lin == 5.0 / 50 and m.K_exp == 0.02 and m.m_exp == 100.0


def test_elastic_step_below_yield():
    m = J2Plasticity(3.8, 0.387, 0.03)
    deps = np.array([1e-3, 0, 0, 0, 0, 0])
    st0 = MaterialState.virgin(1)
    dsig, st1, Ct = m.update(st0, deps)
    Ce = isotropic_stiffness(3.8, 0.387)
    assert np.array_equal(Ct[0], Ce)
    assert np.allclose(dsig[0], Ce @ deps, rtol=1e-14)
    assert st1.eq_plastic_strain[0] == 0.0


def test_zero_increment_keeps_state():
    m = J2Plasticity(3.8, 0.387, 0.03)
    st0 = MaterialState.virgin(1)
    _, st1, _ = m.update(st0, np.array([0.02, 0, 0, 0, 0, 0]))
    dsig, st2, _ = m.update(st1, np.zeros(6))
    assert np.array_equal(dsig, np.zeros((1, 6)))
    for f in ("stress", "strain", "plastic_strain", "eq_plastic_strain"):
        assert np.array_equal(getattr(st2, f), getattr(st1, f))


def _uniaxial_stress_drive(m, eps_max, steps):
    """Drive eps11 while iterating lateral strains to zero lateral stress."""
    st0 = MaterialState.virgin(1)
    out = []
    free = [1, 2, 3, 4, 5]
    for k in range(steps):
        deps = np.zeros(6)
        deps[0] = eps_max / steps
        for _ in range(50):
            dsig, st1, Ct = m.update(st0, deps)
            r = (st0.stress[0] + dsig[0])[free]
            if np.abs(r).max() < 1e-14:
                break
            deps[free] -= np.linalg.solve(Ct[0][np.ix_(free, free)], r)
        st0 = st1
        out.append((st0.strain[0, 0], st0.stress[0, 0], st0.eq_plastic_strain[0]))
    return out


@pytest.mark.parametrize("H_lin,K_exp", [(0.0, 0.03), (0.076, 0.0), (0.076, 0.03)])
def test_uniaxial_matches_1d_closed_form(H_lin, K_exp):
    m = J2Plasticity(3.8, 0.387, 0.03, H_lin=H_lin, K_exp=K_exp, m_exp=100.0)
    for eps, sig, p in _uniaxial_stress_drive(m, 0.03, 30):
        ref_sig, ref_p = oracles.uniaxial_1d(3.8, 0.03, H_lin, K_exp, 100.0, eps)
        assert np.isclose(sig, ref_sig, rtol=1e-9, atol=1e-13)
        assert np.isclose(p, ref_p, rtol=1e-8, atol=1e-13)


def test_consistent_tangent_matches_fd():
    m = J2Plasticity(2.1, 0.3, 0.029)
    rng = np.random.default_rng(0)
    st0 = MaterialState.virgin(1)
    _, st0, _ = m.update(st0, np.array([0.01, -0.003, 0.0, 0.004, 0.0, 0.002]))
    deps = rng.normal(size=6) * 1e-3
    _, _, Ct = m.update(st0, deps)
    h = 1e-8
    fd = np.empty((6, 6))
    for j in range(6):
        d = np.zeros(6)
        d[j] = h
        fd[:, j] = (m.update(st0, deps + d)[0][0] - m.update(st0, deps - d)[0][0]) / (2 * h)
    assert np.allclose(Ct[0], fd, rtol=1e-5, atol=1e-6)


strain_step = st.lists(st.floats(-5e-3, 5e-3, allow_nan=False), min_size=6, max_size=6)


@settings(max_examples=60, deadline=None)
@given(st.lists(strain_step, min_size=1, max_size=8))
def test_yield_consistency_and_dissipation(steps):
    m = J2Plasticity(3.8, 0.387, 0.01)
    s = MaterialState.virgin(1)
    for deps in steps:
        dsig, new, _ = m.update(s, np.array(deps))
        f = von_mises(new.stress)[0] - m.yield_stress(new.eq_plastic_strain[0])
        assert f <= 1e-10
        assert new.eq_plastic_strain[0] >= s.eq_plastic_strain[0]
        deps_p = new.plastic_strain[0] - s.plastic_strain[0]
        assert new.stress[0] @ deps_p >= -1e-12
        s = new


def test_state_copy_is_deep():
    s = MaterialState.virgin(3)
    c = s.copy()
    c.stress[0, 0] = 1.0
    c.eq_plastic_strain[1] = 2.0
    c.plastic_strain[2, 1] = 3.0
    c.strain[0, 5] = 4.0
    assert not s.stress.any() and not s.eq_plastic_strain.any()
    assert not s.plastic_strain.any() and not s.strain.any()


def test_state_put_does_not_touch_original():
    s = MaterialState.virgin(3)
    other = MaterialState(np.ones((1, 6)), np.ones((1, 6)), np.ones((1, 6)), np.ones(1))
    t = s.put([1], other)
    assert t.stress[1, 0] == 1.0 and s.stress[1, 0] == 0.0


def test_update_does_not_mutate_inputs():
    m = J2Plasticity(3.8, 0.387, 0.01)
    s = MaterialState.virgin(2)
    m.update(s, np.array([[0.05, 0, 0, 0, 0, 0], [0, 0, 0, 0.05, 0, 0]]))
    assert not s.stress.any() and not s.eq_plastic_strain.any()


def test_linear_elastic_update():
    C = oracles.random_spd(np.random.default_rng(1))
    law = LinearElastic(C)
    deps = np.random.default_rng(2).normal(size=(4, 6))
    dsig, new, Ct = law.update(MaterialState.virgin(4), deps)
    assert np.allclose(dsig, deps @ C.T)
    assert np.allclose(new.strain, deps)
    assert np.array_equal(Ct[2], C)


@pytest.mark.parametrize("name", ["composite1", "composite2", "composite3"])
def test_presets(name):
    matrix, fiber = load_preset(name)
    assert isinstance(matrix, J2Plasticity)
    assert np.linalg.eigvalsh(fiber.elastic_stiffness()).min() > 0
    if name == "composite3":
        assert matrix.H_lin == 0.0 and matrix.sy0 == 0.03
