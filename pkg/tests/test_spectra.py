import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nhbands.errors import Defective, DegenerateOnPath
from nhbands.models import SIGMA_Z, FunctionModel, KpModel, LatticeModel, axis_loop, eval_kp
from nhbands.spectra import decompose, discriminant, match_steps, spectrum, track

from oracles import charpoly, discriminant_via_resultant

seeds = st.integers(0, 2**32 - 1)


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_sigma_z():
    f = decompose(SIGMA_Z)
    np.testing.assert_array_equal(f.values, [-1, 1])
    for M in (f.right, f.left):
        assert sorted(np.abs(M).ravel().tolist()) == [0, 0, 1, 1]
        np.testing.assert_allclose(np.abs(M) @ np.abs(M).T, np.eye(2))


def test_jordan_block_is_defective():
    with pytest.raises(Defective):
        decompose(eval_kp([0, 0, 0], np.pi / 2, True))
    with pytest.raises(Defective):
        decompose(np.zeros((2, 2)))


def test_discriminant_examples():
    assert discriminant(SIGMA_Z) == 4
    for a in np.linspace(0, 2 * np.pi, 7):
        assert discriminant(eval_kp([0, 0, 0], a, True)) == 0


@given(seeds)
def test_random_3x3_against_polynomial_roots(seed):
    rng = np.random.default_rng(seed)
    H = rand_complex(rng, 3, 3)
    f = decompose(H)
    roots = np.roots(charpoly(H))
    for v in f.values:
        assert np.min(np.abs(roots - v)) < 1e-8
    order = np.lexsort((f.values.imag, f.values.real))
    assert np.array_equal(order, np.arange(3))


@given(seeds)
def test_random_3x3_discriminant_oracles(seed):
    rng = np.random.default_rng(seed)
    H = rand_complex(rng, 3, 3)
    lam = decompose(H).values
    prod = np.prod([(lam[i] - lam[j]) ** 2 for i in range(3) for j in range(i + 1, 3)])
    d = discriminant(H)
    assert abs(d - prod) < 1e-8 * max(1, abs(d))
    assert abs(d - discriminant_via_resultant(H)) < 1e-8 * max(1, abs(d))


@given(seeds, st.integers(2, 5))
def test_discriminant_similarity_invariance(seed, n):
    rng = np.random.default_rng(seed)
    H = rand_complex(rng, n, n)
    P = rand_complex(rng, n, n)
    assume(np.linalg.cond(P) < 1e3)
    d1, d2 = discriminant(H), discriminant(P @ H @ np.linalg.inv(P))
    assert abs(d1 - d2) < 1e-8 * max(1, abs(d1))


def _random_points(model, rng, count):
    if model.periodic[0]:
        return rng.uniform(-np.pi, np.pi, (count, 3))
    return rng.uniform(-1, 1, (count, 3))


@pytest.mark.parametrize("model", [LatticeModel(2.0, "main"), LatticeModel(0.25, "supp"),
                                   LatticeModel(-0.5, "supp"), KpModel(np.pi / 2), KpModel(1.0, False)],
                         ids=lambda m: f"{m.kind}")
def test_biorthonormal_and_reconstruct(model):
    rng = np.random.default_rng(7)
    k = _random_points(model, rng, 1000)
    H = model(k)
    sp = spectrum(H)
    good = ~sp.bad
    assert good.sum() > 990
    eye = np.conj(np.swapaxes(sp.left, -1, -2)) @ sp.right
    assert np.max(np.abs(eye[good] - np.eye(2))) < 1e-10
    rec = sp.right @ (sp.values[..., :, None] * np.conj(np.swapaxes(sp.left, -1, -2)))
    assert np.max(np.abs(rec[good] - H[good])) < 1e-9
    assert np.max(sp.residual[good]) < 1e-9


@given(seeds, st.integers(3, 6))
@settings(max_examples=30)
def test_general_n_frames(seed, n):
    rng = np.random.default_rng(seed)
    H = rand_complex(rng, n, n)
    f = decompose(H)
    np.testing.assert_allclose(np.conj(f.left.T) @ f.right, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(H @ f.right, f.right * f.values, atol=1e-9)


@given(seeds)
def test_closed_form_matches_lapack(seed):
    rng = np.random.default_rng(seed)
    H = rand_complex(rng, 2, 2)
    H -= np.trace(H) / 2 * np.eye(2)
    f = decompose(H)
    ev = np.linalg.eigvals(H)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    np.testing.assert_allclose(f.values, ev, atol=1e-10)
    hp, hm, hz = H[0, 1] / 2, H[1, 0] / 2, H[0, 0]
    s = np.sqrt(4 * hp * hm + hz * hz)
    assert min(abs(f.values[0] - s), abs(f.values[0] + s)) < 1e-12


# tracking


def test_constant_path_identity():
    H0 = np.diag([1.0, 2.0 + 1j, -3.0])
    model = FunctionModel(lambda k: np.broadcast_to(H0, k.shape[:-1] + (3, 3)), 3, 1)
    bp = track(model, np.linspace(0, 1, 20)[:, None])
    assert (bp.steps == np.arange(3)).all()
    assert bp.composite.is_identity()
    assert not bp.refined.any()


@pytest.mark.parametrize("samples", [401, 4001])
def test_kz_path_swaps(samples):
    loop = axis_loop("z", (np.pi / 2, np.pi / 2))
    t, pts = loop.sample(samples - 1)
    bp = track(LatticeModel(2.0, "main"), pts, curve=loop, params=t, closed=True)
    assert bp.composite.images == (2, 1)


def test_kx_path_identity_stable():
    loop = axis_loop("x", (np.pi / 2, np.pi / 2))
    for samples in (401, 4001):
        t, pts = loop.sample(samples - 1)
        assert track(LatticeModel(2.0, "main"), pts, curve=loop, params=t, closed=True).composite.is_identity()


def test_path_through_node_fails():
    pts = np.array([[0.0, 0.0, z] for z in np.linspace(-0.5, 0.5, 11)])
    with pytest.raises(DegenerateOnPath):
        track(LatticeModel(2.0, "main"), pts)


def test_coarse_path_is_refined():
    loop = axis_loop("z", (np.pi / 2, np.pi / 2))
    t, pts = loop.sample(6)
    bp = track(LatticeModel(2.0, "main"), pts, curve=loop, params=t, closed=True)
    assert bp.refined.any()
    assert len(bp.params) > 7
    assert bp.composite.images == (2, 1)
    v = bp.values
    moved = np.abs(np.diff(v, axis=0))
    sep = np.abs(v[:-1, 0] - v[:-1, 1])
    assert np.all(moved < 0.5 * sep[:, None])


def test_match_steps_optimal():
    a = np.array([[0, 1, 2, 3, 4, 5, 6]], dtype=complex)
    b = a[:, ::-1] + 0.01
    p = match_steps(a, b)
    assert (p[0] == np.arange(7)[::-1]).all()
