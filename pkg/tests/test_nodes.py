import itertools

import numpy as np
import pytest

from nhbands.errors import NoConvergence, ProbeDegenerate
from nhbands.models import SIGMA_X, SIGMA_Y, SIGMA_Z, FunctionModel, KpModel, LatticeModel
from nhbands.nodes import (Region, canonical_position, chern_sphere, classify_node, find_nodes,
                           sphere_flux)

KZ3 = 2 * np.arcsin(np.sqrt(0.75))  # sin(k_z/2) = sqrt(1 - m) at m = 1/4


def weyl(sign=1.0):
    return FunctionModel(lambda k: sign * (k[..., 0, None, None] * SIGMA_X + k[..., 1, None, None] * SIGMA_Y
                                           + k[..., 2, None, None] * SIGMA_Z), 2, 3)


def kp_region():
    return Region((-1.0, -1.0, 0.0), (1.0, 1.0, 0.0), ball_radius=1.0, tube_radius=0.1)


def positions(nodes):
    return np.array([n.position for n in nodes])


def assert_same_points(found, expected, atol=1e-6):
    found, expected = np.asarray(found), np.asarray(expected)
    assert len(found) == len(expected)
    for e in expected:
        assert np.min(np.linalg.norm(found - e, axis=1)) < atol


@pytest.fixture(scope="module")
def supp_quarter():
    return find_nodes(LatticeModel(0.25, "supp"))


def test_main_inventory():
    nodes = find_nodes(LatticeModel(2.0, "main"))
    exp = [(a, b, 0.0) for a, b in itertools.product([0.0, np.pi], repeat=2)]
    assert_same_points(positions(nodes), exp)
    assert all(n.residual < 1e-10 for n in nodes)


def test_supp_inventory(supp_quarter):
    exp = [(a, b, c) for a, b in itertools.product([0.0, np.pi], repeat=2) for c in (0.0, KZ3, -KZ3)]
    assert abs(KZ3 - 2 * np.pi / 3) < 1e-12
    assert_same_points(positions(supp_quarter), exp)


def test_nodes_sorted_and_folded(supp_quarter):
    keys = [tuple(np.round(n.position, 9)) for n in supp_quarter]
    assert keys == sorted(keys)
    p = positions(supp_quarter)
    assert np.all(p > -np.pi) and np.all(p <= np.pi)


@pytest.mark.parametrize("alpha", [0.9, np.pi / 2, 2.2])
def test_kp_locus(alpha):
    nodes = find_nodes(KpModel(alpha), kp_region(), coarse=101)
    phi = np.arccos(-np.sqrt(2) * np.cos(alpha))
    r = 1 / np.sqrt(2)
    exp = [(r * np.cos(phi), r * np.sin(phi), 0.0), (r * np.cos(phi), -r * np.sin(phi), 0.0)]
    assert_same_points(positions(nodes), exp)


@pytest.mark.parametrize("alpha", [0.5, 2.5])
def test_kp_outside_window(alpha):
    assert find_nodes(KpModel(alpha), kp_region(), coarse=101) == []


def test_kp_exceptional_point():
    rep = classify_node(KpModel(np.pi / 2), (0.0, 0.0, 0.0), 0.1)
    assert rep.kind == "ExceptionalCrossing"
    assert rep.chirality is None


@pytest.mark.parametrize("m,chi", [(-0.5, 1), (2.0, -1)])
def test_chirality(m, chi):
    rep = classify_node(LatticeModel(m, "supp"), (0.0, 0.0, 0.0), 0.3)
    assert rep.kind == "WeylPoint"
    assert rep.chirality == chi
    assert sum(rep.charges) == 0


@pytest.mark.parametrize("m,charges", [(-0.5, (1, -1)), (2.0, (-1, 1))])
def test_chern_sphere_examples(m, charges):
    flux = sphere_flux(LatticeModel(m, "supp"), (0.0, 0.0, 0.0), 0.3)
    assert flux.charges == charges
    assert flux.residue < 0.05


def test_hermitian_weyl_convention():
    assert chern_sphere(weyl(), (0.0, 0.0, 0.0), 0.5) == (1, -1)
    assert chern_sphere(weyl(-1.0), (0.0, 0.0, 0.0), 0.5) == (-1, 1)


def test_empty_sphere():
    assert chern_sphere(LatticeModel(2.0, "main"), (np.pi / 2, np.pi / 2, np.pi / 2), 0.3) == (0, 0)
    assert chern_sphere(weyl(), (2.0, 0.0, 0.0), 0.5) == (0, 0)


def test_large_sphere_matches_probe():
    model = LatticeModel(0.25, "supp")
    probe = classify_node(model, (0.0, 0.0, 0.0), 0.3)
    assert chern_sphere(model, (0.0, 0.0, 0.0), 0.9) == probe.charges


@pytest.mark.parametrize("radius", [0.1, 0.25, 0.4])
def test_radius_independence(supp_quarter, radius):
    model = LatticeModel(0.25, "supp")
    ref = {tuple(np.round(n.position, 6)): chern_sphere(model, n.position, 0.3)
           for n in supp_quarter[:3]}
    for n in supp_quarter[:3]:
        assert chern_sphere(model, n.position, radius) == ref[tuple(np.round(n.position, 6))]


def test_total_charge_vanishes(supp_quarter):
    model = LatticeModel(0.25, "supp")
    total = sum(classify_node(model, n.position, 0.3, n_theta=101, n_phi=101).chirality
                for n in supp_quarter)
    assert total == 0


@pytest.mark.parametrize("m,count", [(-0.5, 1), (0.25, 3), (2.0, 1)])
def test_gamma_column_parity(m, count):
    column = Region((0.0, 0.0, -np.pi), (0.0, 0.0, np.pi))
    nodes = find_nodes(LatticeModel(m, "supp"), column, coarse=64)
    assert len(nodes) == count
    assert len(nodes) % 2 == 1


def test_no_convergence_is_reported():
    failures = []
    nodes = find_nodes(LatticeModel(0.25, "supp"), max_iter=1, failures=failures)
    assert failures and all(isinstance(f, NoConvergence) for f in failures)
    assert all(n.residual < 1e-10 for n in nodes)


def test_positions_stable_under_tol():
    model = LatticeModel(0.25, "supp")
    a = positions(find_nodes(model, tol=1e-10))
    b = positions(find_nodes(model, tol=5e-11))
    assert a.shape == b.shape
    assert np.max(np.abs(a - b)) < 1e-6


def test_probe_through_other_node():
    with pytest.raises(ProbeDegenerate):
        classify_node(LatticeModel(0.25, "supp"), (0.0, 0.0, 0.0), KZ3)


def test_region_helpers():
    r = Region((-1.0, -1.0, 0.0), (1.0, 1.0, 0.0), ball_radius=1.0, tube_radius=0.1)
    assert r.free_axes() == [0, 1]
    assert r.contains(np.array([0.5, 0.0, 0.0]))
    assert not r.contains(np.array([0.05, 0.0, 0.0]))
    assert not r.contains(np.array([0.9, 0.9, 0.0]))
    np.testing.assert_allclose(canonical_position([3 * np.pi, -np.pi, 7.0], (True, True, False)),
                               [np.pi, np.pi, 7.0])
    with pytest.raises(ValueError):
        find_nodes(LatticeModel(2.0, "main"), coarse=4)
