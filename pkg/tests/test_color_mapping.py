import hashlib
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import pairwise_distances_ok, transport_bruteforce

from oclbcp.color_mapping import (
    ColorPalette,
    build_pair_matrix,
    build_palette,
    classical_mds,
    code_to_distribution,
    colorize,
    distance_correlation,
    emd_circular,
    pairwise_euclidean,
)

GOLDEN = Path(__file__).parent / "data" / "palette_golden.oclb"
# frozen from the first verified build (see test_distance_correlation_regression)
DISTANCE_CORRELATION = 0.9424333201307666


def delta(i, n=8):
    p = np.zeros(n)
    p[i] = 1.0
    return p


def test_code_to_distribution_examples():
    assert np.array_equal(code_to_distribution(0b10000000), delta(7))
    assert np.allclose(code_to_distribution(0xFF), 1 / 8)
    assert np.allclose(code_to_distribution(0), 1 / 8)
    with pytest.raises(ValueError):
        code_to_distribution(256)


def test_emd_examples():
    p = code_to_distribution(0b1011)
    assert emd_circular(p, p) == 0.0
    assert emd_circular(delta(0), delta(4)) == 4.0
    q = np.zeros(8)
    q[1] = q[7] = 0.5
    assert emd_circular(delta(0), q) == pytest.approx(1.0, abs=1e-15)
    assert transport_bruteforce(delta(0), q) == pytest.approx(1.0, abs=1e-15)


def test_emd_rejects_unnormalised():
    with pytest.raises(ValueError):
        emd_circular(np.full(8, 0.2), delta(0))


def few_atoms(max_atoms=3):
    @st.composite
    def build(draw):
        k = draw(st.integers(1, max_atoms))
        pos = draw(st.lists(st.integers(0, 7), min_size=k, max_size=k, unique=True))
        w = np.array(draw(st.lists(st.integers(1, 20), min_size=k, max_size=k)), float)
        p = np.zeros(8)
        p[pos] = w / w.sum()
        return p
    return build()


@settings(max_examples=200, deadline=None)
@given(p=few_atoms(), q=few_atoms())
def test_emd_matches_plan_enumeration(p, q):
    assert abs(emd_circular(p, q) - transport_bruteforce(p, q)) < 1e-12


def test_emd_matches_linear_programme(rng):
    linprog = pytest.importorskip("scipy.optimize").linprog
    cost = np.array([[min(abs(i - j), 8 - abs(i - j)) for j in range(8)] for i in range(8)], float)
    a_eq = np.vstack([np.kron(np.eye(8), np.ones(8)), np.kron(np.ones(8), np.eye(8))])
    for _ in range(25):
        p, q = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
        res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs")
        assert emd_circular(p, q) == pytest.approx(res.fun, abs=1e-9)


def test_distance_matrix_examples(distance_matrix, rng):
    d = distance_matrix
    assert d.shape == (256, 256)
    assert d[0, 0] == 0.0
    assert d[0b1, 0b10] == pytest.approx(1.0, abs=1e-15)
    u, v = rng.integers(0, 256, size=(2, 1000))
    assert np.array_equal(d[u, v], d[v, u])
    for a, b in zip(u[:20], v[:20]):
        assert d[a, b] == pytest.approx(emd_circular(code_to_distribution(a), code_to_distribution(b)), abs=1e-12)


def test_distance_matrix_is_metric(distance_matrix):
    assert pairwise_distances_ok(distance_matrix, 1e-9)


def test_mds_all_zero_distances():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        emb = classical_mds(np.zeros((5, 5)))
    assert np.array_equal(emb, np.zeros((5, 3)))


def test_mds_triangle_is_exact():
    d = np.array([[0, 3, 4], [3, 0, 5], [4, 5, 0]], float)
    with pytest.warns(RuntimeWarning):  # three points span only two dimensions
        emb = classical_mds(d, 3)
    assert np.max(np.abs(pairwise_euclidean(emb) - d)) < 1e-6
    assert np.all(emb[:, 2] == 0)


def test_mds_sign_convention(distance_matrix):
    emb = classical_mds(distance_matrix)
    for col in emb.T:
        assert col[np.argmax(np.abs(col))] > 0
    spread = emb.var(axis=0)
    assert spread[0] >= spread[1] >= spread[2] - 1e-9


def test_mds_rejects_asymmetric():
    with pytest.raises(ValueError):
        classical_mds(np.array([[0, 1.0], [2.0, 0]]))


def test_distance_correlation_regression(distance_matrix, palette):
    corr = distance_correlation(distance_matrix, palette.embedding)
    assert corr >= 0.8
    assert corr == pytest.approx(DISTANCE_CORRELATION, abs=1e-9)


def test_pair_matrix_properties(palette):
    delta_m = palette.pair_matrix
    assert delta_m.shape == (256, 256, 3) and delta_m.dtype == np.uint8
    assert np.array_equal(delta_m, delta_m.transpose(1, 0, 2))
    assert delta_m.max() <= 254
    zero = build_pair_matrix(np.zeros((256, 3)))
    assert np.all(zero == zero[0, 0])


def test_pair_matrix_is_floor_of_sum(rng):
    emb = rng.normal(size=(256, 3))
    levels = (emb - emb.min(0)) / (emb.max(0) - emb.min(0)) * 127
    u, v = rng.integers(0, 256, size=(2, 200))
    expected = np.floor(levels[u] + levels[v])
    assert np.array_equal(build_pair_matrix(emb)[u, v], expected.astype(np.uint8))


def test_palette_deterministic(palette):
    again = build_palette()
    assert again.to_bytes() == palette.to_bytes()


def test_palette_golden_file(palette):
    assert GOLDEN.exists(), "golden palette missing; regenerate with scripts/make_golden_palette.py"
    assert palette.to_bytes() == GOLDEN.read_bytes()


def test_palette_file_roundtrip(tmp_path, palette):
    path = tmp_path / "p.oclb"
    palette.save(path)
    blob = path.read_bytes()
    assert blob[:4] == b"OCLB"
    assert int.from_bytes(blob[4:8], "little") == 1
    assert len(blob) == 8 + 256 * 3 * 8 + 256 * 256 * 3
    loaded = ColorPalette.load(path)
    assert np.array_equal(loaded.embedding, palette.embedding)
    assert np.array_equal(loaded.pair_matrix, palette.pair_matrix)
    assert hashlib.sha256(blob).hexdigest() == palette.sha256()
    with pytest.raises(ValueError):
        ColorPalette.from_bytes(b"XXXX" + blob[4:])


def test_build_palette_requires_three_dims():
    with pytest.raises(ValueError):
        build_palette(dims=2)


def test_colorize_is_per_code_lookup(palette, rng):
    const = colorize(np.full((5, 5), 77, np.uint8), palette)
    assert np.all(const == palette.pair_matrix[77, 77])
    codes = rng.integers(0, 256, size=(10, 12), dtype=np.uint8)
    img = colorize(codes, palette)
    assert img.shape == (10, 12, 3)
    perm = rng.permutation(codes.size)
    assert np.array_equal(colorize(codes.ravel()[perm], palette), img.reshape(-1, 3)[perm])
    same = codes == codes[0, 0]
    assert np.all(img[same] == img[0, 0])


def test_colour_distances_follow_code_distances(palette, distance_matrix, rng):
    """On sampled triples, the farther code pair usually gets the farther colour pair."""
    colours = palette.colors.astype(float)
    agree = total = 0
    for _ in range(2000):
        u, v, w = rng.integers(0, 256, size=3)
        near, far = distance_matrix[u, v], distance_matrix[u, w]
        if abs(near - far) < 1.0:
            continue
        if near > far:
            v, w = w, v
        total += 1
        agree += np.linalg.norm(colours[u] - colours[v]) < np.linalg.norm(colours[u] - colours[w])
    assert total > 100
    assert agree / total > 0.8
