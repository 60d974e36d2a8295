import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contfit.core import (
    EvalGrid,
    SampleSet,
    derive_seed,
    eval_grid_coords,
    gen_samples,
    make_rng,
    nrmse,
    default_grid,
    read_grid,
    read_samples_csv,
    rect2d,
    split_samples,
    write_cross_section,
    write_grid,
    write_samples_csv,
)


@pytest.mark.parametrize("x,y,expected", [
    (1.5, 1.5, 1.0),
    (0.0, 0.0, 0.0),
    (1.0, 1.5, 0.5),
    (2.0, 2.0, 0.25),
    (1.999, 1.001, 1.0),
    (2.001, 1.5, 0.0),
])
def test_rect2d(x, y, expected):
    assert rect2d(x, y) == expected


def test_rect2d_vectorized():
    out = rect2d(np.array([1.5, 0.0]), np.array([1.5, 1.5]))
    np.testing.assert_array_equal(out, [1.0, 0.0])


def test_gen_samples_domain_and_values():
    s = gen_samples(10000, 7, rect2d)
    assert len(s) == 10000
    assert s.coords.min() >= 0.0 and s.coords.max() <= 3.0
    assert set(np.unique(s.values)) <= {0.0, 0.5, 1.0}
    # about 1/9 of the square is inside the support
    assert 0.09 < s.values.mean() < 0.13


def test_gen_samples_single_and_zero():
    assert len(gen_samples(1, 123)) == 1
    with pytest.raises(ValueError):
        gen_samples(0, 1)


@pytest.mark.property
def test_gen_samples_deterministic():
    a, b = gen_samples(500, 99), gen_samples(500, 99)
    assert a.coords.tobytes() == b.coords.tobytes()
    assert a.values.tobytes() == b.values.tobytes()
    assert gen_samples(500, 100) != a


def test_split_sizes():
    s = split_samples(gen_samples(10000, 1), 0.8, 5)
    assert len(s.train_idx) == 8000 and len(s.val_idx) == 2000
    s2 = split_samples(gen_samples(2, 1), 0.5, 5)
    assert len(s2.train) == 1 and len(s2.validation) == 1


@pytest.mark.parametrize("frac", [0.999, 0.001, 0.0, 1.0])
def test_split_rejects_empty_partition(frac):
    with pytest.raises(ValueError):
        split_samples(gen_samples(10, 1), frac, 0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 300), frac=st.floats(0.05, 0.95), seed=st.integers(0, 2**64 - 1))
def test_split_preserves_pairs(n, frac, seed):
    s = gen_samples(n, seed % 1000)
    try:
        sp = split_samples(s, frac, seed)
    except ValueError:
        return
    rebuilt = np.vstack([
        np.column_stack([sp.train.coords, sp.train.values]),
        np.column_stack([sp.validation.coords, sp.validation.values]),
    ])
    orig = np.column_stack([s.coords, s.values])
    key = lambda a: a[np.lexsort(a.T[::-1])]
    np.testing.assert_array_equal(key(rebuilt), key(orig))
    assert np.intersect1d(sp.train_idx, sp.val_idx).size == 0


@pytest.mark.property
def test_split_deterministic():
    s = gen_samples(100, 3)
    assert split_samples(s, 0.8, 11) == split_samples(s, 0.8, 11)


def test_sampleset_validation():
    with pytest.raises(ValueError):
        SampleSet(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        SampleSet(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        SampleSet(np.zeros((3, 2)), np.zeros(3), [0, 1], [1, 2])


def test_nrmse_examples():
    t = np.array([1.0, 0.0, 2.0, -1.0])
    assert nrmse(t, t) == 0.0
    assert nrmse(np.zeros(4), t) == pytest.approx(1.0)
    assert nrmse(2 * t, t) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        nrmse([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        nrmse([1.0], [1.0, 2.0])


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(0.01, 100.0), seed=st.integers(0, 10**6))
def test_nrmse_homogeneous(scale, seed):
    rng = make_rng(seed)
    t = rng.normal(size=20)
    e = rng.normal(size=20)
    base = nrmse(t + e, t)
    assert nrmse(t + scale * e, t) == pytest.approx(scale * base, rel=1e-9)


def test_eval_grid_default_endpoints():
    c = eval_grid_coords(default_grid(with_truth=False))
    assert c.shape == (501 * 501, 2)
    assert tuple(c[0]) == (-0.3, -0.3)
    assert tuple(c[-1]) == (3.3, 3.3)
    # row-major: x varies fastest
    assert c[1, 1] == -0.3 and c[1, 0] > -0.3


def test_eval_grid_small():
    c = eval_grid_coords(EvalGrid(0, 1, 0, 1, 2, 2))
    np.testing.assert_array_equal(c, [[0, 0], [1, 0], [0, 1], [1, 1]])
    xs = EvalGrid(0, 1, 0, 1, 3, 2).xs()
    np.testing.assert_array_equal(xs, [0.0, 0.5, 1.0])


def test_eval_grid_invalid():
    with pytest.raises(ValueError):
        EvalGrid(1, 0, 0, 1, 3, 3)
    with pytest.raises(ValueError):
        EvalGrid(0, 1, 0, 1, 1, 3)


def test_default_truth():
    g = default_grid()
    assert g.truth.shape == (251001,)
    assert g.truth.max() == 1.0
    # no grid point lands exactly on an edge of the support
    assert set(np.unique(g.truth)) == {0.0, 1.0}
    assert g.ys()[g.nearest_row(1.5)] == pytest.approx(1.5, abs=0.0036)


def test_seed_helpers():
    assert derive_seed(5, 1) == derive_seed(5, 1)
    assert derive_seed(5, 1) != derive_seed(5, 2)
    assert make_rng(3).random() == make_rng(3).random()
    with pytest.raises(ValueError):
        make_rng(-1)


def test_samples_csv_roundtrip(tmp_path):
    s = gen_samples(50, 4)
    p = tmp_path / "s.csv"
    write_samples_csv(p, s)
    assert p.read_text().splitlines()[0] == "x,y,value"
    assert read_samples_csv(p) == s


def test_grid_binary_roundtrip(tmp_path):
    g = EvalGrid(0, 1, -1, 1, 4, 3)
    v = np.arange(12, dtype=float)
    write_grid(tmp_path / "g.bin", g, v, meta={"k": 1})
    g2, v2, meta = read_grid(tmp_path / "g.bin")
    assert g2.meta() == g.meta()
    np.testing.assert_array_equal(v, v2)
    assert meta == {"k": 1}
    with pytest.raises(ValueError):
        write_grid(tmp_path / "bad.bin", g, v[:5])


def test_cross_section(tmp_path):
    g = EvalGrid(0, 3, 0, 3, 7, 7)
    v = np.arange(49, dtype=float)
    row = write_cross_section(tmp_path / "c.csv", g, v, 1.5)
    assert row == 3
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 8
    assert float(lines[1].split(",")[2]) == 21.0
