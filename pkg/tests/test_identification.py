import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import ranking_bruteforce

from oclbcp.identification import (
    CmcCurve,
    GalleryEntry,
    Probe,
    build_gallery,
    cmc,
    cmc_from_ranks,
    fuse_lr,
    identify,
    score_table,
    side_score,
    true_ranks,
)


def test_side_score_examples():
    v = np.array([0.2, 0.5, 1.3])
    assert side_score(v, v) == pytest.approx(1.0, abs=1e-15)
    assert side_score([1, 0], [0, 1]) == 0.0
    assert side_score([0.7, 0.3], [0.3, 0.7]) == pytest.approx(0.7241, abs=1e-4)
    assert side_score([0.7, 0.3], [0.3, 0.7], rule="one_minus_cosine") == pytest.approx(1 - 0.7241, abs=1e-4)
    with pytest.raises(ValueError):
        side_score([0, 0], [1, 0])
    with pytest.raises(ValueError):
        side_score([1, 0], [1, 0, 0])


def test_fuse_lr_examples(rng):
    g = GalleryEntry("a", np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert fuse_lr(g, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(2.0)
    assert fuse_lr(g, [1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0)
    for _ in range(20):
        gl, gr, pl, pr = rng.uniform(size=(4, 6))
        entry = GalleryEntry(0, gl, gr)
        assert abs(fuse_lr(entry, pl, pr) - (side_score(gl, pl) + side_score(gr, pr))) < 1e-12


def _random_gallery(rng, n, c=6):
    return [GalleryEntry(i, rng.dirichlet(np.ones(c)) * 2, rng.dirichlet(np.ones(c)) * 2) for i in range(n)]


def test_identify_examples(rng):
    gallery = _random_gallery(rng, 5)
    delta, ranked = identify(gallery, gallery[3].o_left, gallery[3].o_right)
    assert delta == 3 and ranked[0][1] == pytest.approx(2.0)
    only = gallery[:1]
    assert identify(only, *rng.uniform(size=(2, 6)))[0] == 0
    with pytest.raises(ValueError):
        identify([], [1.0], [1.0])


def test_identify_ranking_matches_bruteforce(rng):
    for _ in range(30):
        gallery = _random_gallery(rng, 5)
        pl, pr = rng.uniform(size=(2, 6))
        scores = {g.subject: fuse_lr(g, pl, pr) for g in gallery}
        _, ranked = identify(gallery, pl, pr)
        assert [s for s, _ in ranked] == ranking_bruteforce(scores)
        _, ranked_d = identify(gallery, pl, pr, rule="one_minus_cosine")
        assert [s for s, _ in ranked_d] == [s for s, _ in ranked]


def test_identify_tie_break_by_subject_id():
    v = np.array([1.0, 1.0])
    gallery = [GalleryEntry("c", v, v), GalleryEntry("a", v, v), GalleryEntry("b", v, v)]
    delta, ranked = identify(gallery, v, v)
    assert delta == "a" and [s for s, _ in ranked] == ["a", "b", "c"]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 100))
def test_identify_invariant_to_gallery_rescaling(seed, scale):
    rng = np.random.default_rng(seed)
    gallery = _random_gallery(rng, 6)
    pl, pr = rng.uniform(size=(2, 6))
    scaled = [GalleryEntry(g.subject, g.o_left * scale, g.o_right * scale) for g in gallery]
    assert identify(gallery, pl, pr)[0] == identify(scaled, pl, pr)[0]


def test_fuse_symmetric_under_exchange(rng):
    gl, gr, pl, pr = rng.uniform(size=(4, 5))
    a = fuse_lr(GalleryEntry(0, gl, gr), pl, pr)
    b = fuse_lr(GalleryEntry(0, pl, pr), gl, gr)
    assert a == pytest.approx(b, abs=1e-15)


def test_score_table_matches_pairwise(rng):
    gallery = _random_gallery(rng, 4)
    probes = [Probe(*rng.uniform(size=(2, 6)), subject=i % 4) for i in range(7)]
    table = score_table(gallery, probes)
    for i, g in enumerate(gallery):
        for j, p in enumerate(probes):
            assert table[i, j] == pytest.approx(fuse_lr(g, p.o_left, p.o_right), abs=1e-12)
    diss = score_table(gallery, probes, rule="one_minus_cosine")
    assert np.allclose(diss, 2 - table)


def test_cmc_perfect_and_adversarial():
    eye = np.eye(4)
    gallery = [GalleryEntry(i, eye[i] + 0.01, eye[i] + 0.01) for i in range(4)]
    perfect = [Probe(eye[i] + 0.01, eye[i] + 0.01, i) for i in range(4)]
    curve = cmc([(gallery, perfect)])
    assert curve.rate(1) == 1.0
    # each probe matches another subject best and its own subject worst
    scores = np.array([[0.0, 1, 1, 1], [1, 0.0, 1, 1], [1, 1, 0.0, 1], [1, 1, 1, 0.0]])
    ranks = true_ranks(scores, [0, 1, 2, 3], [0, 1, 2, 3])
    rates = cmc_from_ranks(ranks, 4)
    assert rates[0] == 0.0 and rates[-1] == 1.0


def test_cmc_rejects_unenrolled(rng):
    gallery = _random_gallery(rng, 3)
    with pytest.raises(ValueError):
        cmc([(gallery, [Probe(*rng.uniform(size=(2, 6)), subject=99)])])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 12), m=st.integers(1, 20))
def test_random_cmc_monotone_to_one(seed, n, m):
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=(n, m))
    probes = rng.integers(0, n, size=m)
    rates = cmc_from_ranks(true_ranks(scores, list(range(n)), list(probes)), n)
    assert np.all(np.diff(rates) >= 0)
    assert rates[-1] == 1.0


def test_cmc_confidence_interval():
    per_rep = np.array([[0.5, 1.0], [0.7, 1.0], [0.6, 1.0]])
    curve = CmcCurve(np.array([1, 2]), per_rep)
    half = 1.96 * np.std([0.5, 0.7, 0.6], ddof=1) / np.sqrt(3)
    assert curve.mean[0] == pytest.approx(0.6)
    assert curve.ci_low[0] == pytest.approx(0.6 - half)
    assert curve.ci_high[1] == pytest.approx(1.0)
    single = CmcCurve(np.array([1]), np.array([[0.4]]))
    assert single.ci_low[0] == single.ci_high[0] == 0.4


def test_build_gallery_averages():
    g = build_gallery({"s": (np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[2.0, 0.0], [0.0, 2.0]]))})
    assert np.allclose(g[0].o_left, [0.5, 0.5]) and np.allclose(g[0].o_right, [1.0, 1.0])
