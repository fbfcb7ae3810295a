import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyllevy.linalg import (
    Contraction,
    HSMap,
    Partition,
    as_vector,
    clip_norm,
    project_basis,
    random_hs_map,
    rotation_align,
    sample_contraction,
    spectral_norm,
)
from cyllevy.rng import derive


def test_hs_map_apply_matches_matmul():
    rng = derive(11, "linalg")
    m = rng.standard_normal((3, 5))
    phi = HSMap(m)
    g = rng.standard_normal(5)
    np.testing.assert_allclose(phi(g), m @ g, rtol=1e-14)
    rows = rng.standard_normal((7, 5))
    np.testing.assert_allclose(phi(rows), rows @ m.T, rtol=1e-14)
    np.testing.assert_allclose(phi.adjoint_apply(np.ones(3)), m.T @ np.ones(3), rtol=1e-14)


def test_hs_map_arithmetic_and_norm():
    a = HSMap(np.array([[3.0, 0.0], [0.0, 4.0]]))
    b = HSMap(np.eye(2))
    assert a.hs_norm == pytest.approx(5.0)
    np.testing.assert_allclose((a + b).matrix, a.matrix + np.eye(2))
    np.testing.assert_allclose((a - b).matrix, a.matrix - np.eye(2))
    np.testing.assert_allclose((2.0 * a).matrix, 2.0 * a.matrix)
    np.testing.assert_allclose((-a).matrix, -a.matrix)
    assert HSMap.zeros(2, 3).hs_norm == 0.0
    assert HSMap.identity(4).d_out == 4


def test_hs_map_rejects_bad_input():
    with pytest.raises(ValueError):
        HSMap(np.ones(3))
    with pytest.raises(ValueError):
        HSMap(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    phi = HSMap(np.eye(2))
    with pytest.raises(ValueError):
        phi.matrix[0, 0] = 5.0


def test_clip_norm_values():
    h = np.array([0.3, 0.4])
    np.testing.assert_allclose(clip_norm(h), h)
    big = np.array([3.0, 4.0])
    np.testing.assert_allclose(clip_norm(big), big / 5.0)
    rows = np.stack([h, big])
    out = clip_norm(rows)
    np.testing.assert_allclose(out[0], h)
    np.testing.assert_allclose(np.linalg.norm(out[1]), 1.0)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6))
@settings(max_examples=120, deadline=None)
def test_clip_norm_never_exceeds_unit_ball(coords):
    out = clip_norm(np.array(coords))
    assert np.linalg.norm(out) <= 1.0 + 1e-12
    if np.linalg.norm(coords) <= 1.0:
        np.testing.assert_allclose(out, coords, atol=1e-14)


def test_spectral_norm_matches_two_norm():
    rng = derive(12, "spectral")
    for _ in range(25):
        m = rng.standard_normal((5, 5)) * rng.uniform(0.1, 4.0)
        assert spectral_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-8)
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_contraction_rejects_expanding_map():
    with pytest.raises(ValueError):
        Contraction(1.5 * np.eye(2))
    c = Contraction.identity(3)
    assert c.operator_norm == pytest.approx(1.0)


def test_sample_contraction_modes_stay_contractive():
    rng = derive(13, "contractions")
    for mode in ("orthogonal", "scaled-svd", "rank-one"):
        for _ in range(10):
            c = sample_contraction(rng, 6, mode=mode)
            assert spectral_norm(c.matrix) <= 1.0 + 1e-9
    o = sample_contraction(rng, 6, mode="orthogonal")
    np.testing.assert_allclose(o.matrix.T @ o.matrix, np.eye(6), atol=1e-10)
    with pytest.raises(ValueError):
        sample_contraction(rng, 4, mode="nope")


def test_rotation_align_sends_vector_to_direction():
    rng = derive(14, "align")
    e1 = np.zeros(5)
    e1[0] = 1.0
    for _ in range(20):
        h = rng.standard_normal(5) * rng.uniform(0.1, 3.0)
        r = rotation_align(h, e1)
        np.testing.assert_allclose(r(h), np.linalg.norm(h) * e1, atol=1e-10)
        # isometry
        np.testing.assert_allclose(r.matrix.T @ r.matrix, np.eye(5), atol=1e-10)


def test_rotation_align_degenerate_cases():
    e = np.array([0.0, 1.0])
    np.testing.assert_allclose(rotation_align(np.zeros(2), e).matrix, np.eye(2))
    np.testing.assert_allclose(rotation_align(np.array([0.0, 2.0]), e).matrix, np.eye(2))
    np.testing.assert_allclose(rotation_align(np.array([0.0, -2.0]), e).matrix, -np.eye(2))
    with pytest.raises(ValueError):
        rotation_align(np.ones(2), np.array([1.0, 1.0]))


def test_partition_basics():
    p = Partition.dyadic(3)
    assert p.n_intervals == 8
    assert p.mesh == pytest.approx(0.125)
    assert p.span == (0.0, 1.0)
    np.testing.assert_allclose(p.widths.sum(), 1.0)
    q = Partition.regular(3, 0.0, 1.0)
    r = p.refine_with(q)
    assert p.is_nested_in(r) and q.is_nested_in(r)
    assert not r.is_nested_in(p)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(np.array([0.0]))
    with pytest.raises(ValueError):
        Partition(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        Partition(np.array([0.0, np.inf]))
    with pytest.raises(ValueError):
        Partition.regular(2, 0.0, 1.0).refine_with(Partition.regular(2, 0.0, 2.0))


def test_project_basis_zeroes_tail_columns():
    phi = HSMap(np.arange(12.0).reshape(3, 4))
    out = project_basis(phi, 2)
    np.testing.assert_allclose(out.matrix[:, :2], phi.matrix[:, :2])
    np.testing.assert_allclose(out.matrix[:, 2:], 0.0)
    assert project_basis(phi, 4) is phi
    with pytest.raises(ValueError):
        project_basis(phi, -1)


def test_random_hs_map_hits_requested_scale():
    rng = derive(15, "hs")
    phi = random_hs_map(rng, 4, 6, scale=2.5)
    assert phi.hs_norm == pytest.approx(2.5)
    assert (phi.d_out, phi.d_in) == (4, 6)


def test_as_vector_checks_dimension():
    np.testing.assert_allclose(as_vector([1.0, 2.0], dim=2), [1.0, 2.0])
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], dim=3)
