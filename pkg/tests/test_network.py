import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matnet.errors import DegenerateNetworkError, SingularInterfaceError
from matnet.network import (DmnParams, ImnParams, Topology, count_active_nodes, dmn_param_count,
                            forward, forward_dmn, forward_imn, imn_param_count, laminate_block,
                            laminate_block_affine, propagate_weights)
from matnet.voigt import h_matrix, rotate_stiffness

import oracles
from conftest import random_params, random_phases


def test_topology_counts():
    t = Topology(3)
    assert (t.n_base, t.n_parents, t.n_nodes) == (8, 7, 15)
    assert t.children(0) == (1, 2) and t.children(2) == (5, 6)
    assert t.base_node(0) == 7
    assert [t.base_phase(m) for m in range(4)] == [1, 2, 1, 2]
    with pytest.raises(ValueError):
        Topology(0)


@pytest.mark.parametrize("N", range(1, 9))
def test_param_counts(N):
    rng = np.random.default_rng(N)
    assert random_params("dmn", N, rng).n_params == dmn_param_count(N) == 7 * 2 ** N - 3
    assert random_params("imn", N, rng).n_params == imn_param_count(N) == 3 * 2 ** N - 2


def test_weights_relu():
    wf = propagate_weights(np.array([0.3, -0.2]))
    assert np.allclose(wf.w, [0.3, 0.3, 0.0])
    assert wf.f1[0] == 1.0 and wf.f2()[0] == 0.0


def test_weights_symmetric():
    wf = propagate_weights(np.ones(4))
    assert np.allclose(wf.f1, 0.5)


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_weights_sum(z):
    z = np.array(z)
    if np.all(z <= 0):
        with pytest.raises(DegenerateNetworkError):
            propagate_weights(z)
        return
    wf = propagate_weights(z)
    assert np.isclose(wf.top, np.maximum(z, 0).sum(), rtol=1e-14)
    t = Topology(3)
    for k in range(t.n_parents):
        l, r = t.children(k)
        assert wf.w[k] == wf.w[l] + wf.w[r]
        if wf.w[k] > 0:
            assert np.isclose(wf.f1[k] + wf.f2()[k], 1.0)


def test_count_active():
    assert count_active_nodes(ImnParams(2, np.ones(4), np.zeros(3), np.zeros(3))) == 4
    assert count_active_nodes(ImnParams(2, -np.ones(4), np.zeros(3), np.zeros(3))) == 0
    assert count_active_nodes(ImnParams(2, np.array([1, -1, 0, 2.0]), np.zeros(3),
                                        np.zeros(3))) == 2


# -- laminate block -------------------------------------------------------------

def test_block_identical_phases():
    rng = np.random.default_rng(0)
    C = oracles.random_spd(rng)
    Ch, B = laminate_block(C, C, 0.3, oracles.random_unit(rng))
    assert np.allclose(Ch, C, rtol=1e-13) and np.allclose(B, 0, atol=1e-13)


def test_block_single_phase():
    rng = np.random.default_rng(1)
    C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
    Ch, B = laminate_block(C1, C2, 1.0, oracles.random_unit(rng))
    assert np.array_equal(Ch, C1) and not B.any()
    Ch, _ = laminate_block(C1, C2, 0.0, oracles.random_unit(rng))
    assert np.array_equal(Ch, C2)


def test_block_matches_bilayer_oracle_isotropic():
    rng = np.random.default_rng(2)
    C1, C2 = oracles.random_isotropic(rng), oracles.random_isotropic(rng)
    n = np.array([0.0, 0.0, 1.0])
    Ch, _ = laminate_block(C1, C2, 0.5, n)
    assert np.allclose(Ch, oracles.bilayer_stiffness(C1, C2, 0.5, n), rtol=1e-11)


def test_block_matches_bilayer_oracle_general():
    rng = np.random.default_rng(3)
    for _ in range(50):
        C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
        n, f1 = oracles.random_unit(rng), rng.uniform(0.05, 0.95)
        Ch, _ = laminate_block(C1, C2, f1, n)
        ref = oracles.bilayer_stiffness(C1, C2, f1, n)
        assert np.abs(Ch - ref).max() <= 1e-10 * np.abs(ref).max()


def test_block_voigt_reuss_bounds():
    rng = np.random.default_rng(4)
    for _ in range(200):
        C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
        f1 = rng.uniform(0.05, 0.95)
        Ch, _ = laminate_block(C1, C2, f1, oracles.random_unit(rng))
        x = rng.normal(size=6)
        voigt_b = x @ (f1 * C1 + (1 - f1) * C2) @ x
        assert x @ Ch @ x <= voigt_b * (1 + 1e-10)
        reuss = x @ (f1 * np.linalg.inv(C1) + (1 - f1) * np.linalg.inv(C2)) @ x
        assert x @ np.linalg.inv(Ch) @ x <= reuss * (1 + 1e-10)


def test_affine_equal_residuals():
    rng = np.random.default_rng(5)
    C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
    ds = rng.normal(size=6)
    _, dsh, _, bd = laminate_block_affine(C1, C2, ds, ds, 0.4, oracles.random_unit(rng))
    assert np.allclose(bd, 0, atol=1e-14) and np.allclose(dsh, ds, rtol=1e-12)


def test_affine_equal_stiffness():
    rng = np.random.default_rng(6)
    C = oracles.random_spd(rng)
    ds1, ds2 = rng.normal(size=6), rng.normal(size=6)
    _, dsh, _, _ = laminate_block_affine(C, C, ds1, ds2, 0.3, oracles.random_unit(rng))
    assert np.allclose(dsh, 0.3 * ds1 + 0.7 * ds2, rtol=1e-12)


def test_affine_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
        ds1, ds2 = rng.normal(size=6), rng.normal(size=6)
        n, f1 = oracles.random_unit(rng), rng.uniform(0.05, 0.95)
        eps = rng.normal(size=6) * 0.01
        Ch, dsh, B, bd = laminate_block_affine(C1, C2, ds1, ds2, f1, n)
        e1, e2, s1, s2 = oracles.bilayer_solve(C1, C2, f1, n, eps, ds1, ds2)
        Hb = h_matrix(n) @ (B @ eps + bd)
        assert np.allclose(eps + Hb / f1, e1, atol=1e-12)
        assert np.allclose(eps - Hb / (1 - f1), e2, atol=1e-12)
        assert np.allclose(Ch @ eps + dsh, f1 * s1 + (1 - f1) * s2, atol=1e-10)


def test_singular_interface():
    with pytest.raises(SingularInterfaceError):
        laminate_block(np.zeros((6, 6)), np.zeros((6, 6)), 0.5, np.array([0, 0, 1.0]))


def test_block_accepts_nonsymmetric():
    rng = np.random.default_rng(8)
    C1 = oracles.random_spd(rng) + rng.normal(size=(6, 6))
    C2 = oracles.random_spd(rng)
    n = oracles.random_unit(rng)
    Ch, dsh, B, bd = laminate_block_affine(C1, C2, np.zeros(6), np.zeros(6), 0.5, n)
    eps = rng.normal(size=6)
    Hb = h_matrix(n) @ (B @ eps)
    s1, s2 = C1 @ (eps + Hb / 0.5), C2 @ (eps - Hb / 0.5)
    assert np.linalg.norm(h_matrix(n).T @ (s1 - s2)) <= 1e-10 * np.linalg.norm(s1)


# -- forward passes ------------------------------------------------------------------

def test_dmn_identical_phases_zero_angles():
    rng = np.random.default_rng(10)
    C = oracles.random_spd(rng)
    p = DmnParams(3, rng.uniform(0.1, 1, 8), np.zeros((15, 3)))
    assert np.allclose(forward_dmn(p, C, C), C, rtol=1e-12)


def test_dmn_identical_phases_rotated():
    rng = np.random.default_rng(11)
    C = oracles.random_spd(rng)
    ang = rng.uniform(-np.pi, np.pi, (3, 3))
    p = DmnParams(1, np.array([1.0, 2.0]), ang)
    # both children rotated differently, so only check the one-branch case
    p.z[:] = [1.0, -1.0]
    expected = rotate_stiffness(ang[0], rotate_stiffness(ang[1], C))
    assert np.allclose(forward_dmn(p, C, oracles.random_spd(rng)), expected, rtol=1e-12)


def test_dmn_n1_is_e3_laminate():
    rng = np.random.default_rng(12)
    C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
    p = DmnParams(1, np.ones(2), np.zeros((3, 3)))
    ref = oracles.bilayer_stiffness(C1, C2, 0.5, np.array([0, 0, 1.0]))
    assert np.allclose(forward_dmn(p, C1, C2), ref, rtol=1e-11)


def test_imn_identical_phases():
    rng = np.random.default_rng(13)
    C = oracles.random_spd(rng)
    p = random_params("imn", 4, rng, dead=5)
    assert np.allclose(forward_imn(p, C, C), C, rtol=1e-11)


def test_imn_n1_phi0_matches_dmn():
    rng = np.random.default_rng(14)
    C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
    z = np.array([0.7, 0.4])
    imn = ImnParams(1, z, np.array([0.3]), np.array([0.0]))
    dmn = DmnParams(1, z, np.zeros((3, 3)))
    assert np.allclose(forward_imn(imn, C1, C2), forward_dmn(dmn, C1, C2), rtol=1e-13)


def test_imn_single_active_node():
    rng = np.random.default_rng(15)
    C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
    p = random_params("imn", 3, rng)
    p.z[:] = -1.0
    p.z[5] = 0.4
    assert np.array_equal(forward_imn(p, C1, C2), C2)
    p.z[5], p.z[2] = -1.0, 0.4
    assert np.array_equal(forward_imn(p, C1, C2), C1)


@pytest.mark.parametrize("model_type", ["dmn", "imn"])
def test_phase_swap_with_mirrored_tree(model_type):
    # swapping phases equals mirroring the tree; a laminate is symmetric
    # under exchanging (C1, f1) with (C2, f2)
    rng = np.random.default_rng(16)
    C1, C2 = oracles.random_spd(rng), oracles.random_spd(rng)
    p = random_params(model_type, 1, rng)
    q = p.copy()
    q.z = p.z[::-1].copy()
    if model_type == "dmn":
        q.angles = p.angles[[0, 2, 1]]
    assert np.allclose(forward(p, C1, C2), forward(q, C2, C1), rtol=1e-12)


@pytest.mark.parametrize("model_type", ["dmn", "imn"])
def test_output_symmetric_psd(model_type):
    rng = np.random.default_rng(17)
    for _ in range(1000 // 20):
        p = random_params(model_type, 3, rng, dead=int(rng.integers(0, 5)))
        Cp1, Cp2 = random_phases(rng, 20)
        out = forward(p, Cp1, Cp2)
        for C in out:
            assert np.allclose(C, C.T, rtol=1e-12, atol=1e-12 * np.abs(C).max())
            assert np.linalg.eigvalsh(C).min() >= -1e-10 * np.linalg.eigvalsh(C).max()


def test_batch_and_single_agree():
    rng = np.random.default_rng(18)
    p = random_params("dmn", 3, rng, dead=2)
    Cp1, Cp2 = random_phases(rng, 5)
    out = forward(p, Cp1, Cp2)
    for j in range(5):
        assert np.allclose(forward(p, Cp1[j], Cp2[j]), out[j], rtol=1e-14)


def test_shape_validation():
    with pytest.raises(ValueError):
        DmnParams(2, np.ones(3), np.zeros((7, 3)))
    with pytest.raises(ValueError):
        ImnParams(2, np.ones(4), np.zeros(2), np.zeros(3))
