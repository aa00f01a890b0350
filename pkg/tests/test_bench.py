import math

import numpy as np
import pytest

from qtune.bench import (
    CountingSurface,
    Direction,
    MetaFeatures,
    QuadraticSurface,
    RandomSmoothSurface,
    SurfaceError,
    SurfaceFormatError,
    SurfaceIntegrityError,
    TabularSurface,
    best_of,
    load_tabular,
    metafeatures,
    parse_tabular,
    save_tabular,
    summarize_dataset,
)
from qtune.space import Configuration, Dimension, SearchSpace, cnn_grid, lstm_grid


def naive_best(surface):
    """Independent scan: walk every cell, keep the first strictly better one."""
    best_k, best_m = None, None
    space = surface.space
    for k in range(space.cardinality):
        m = surface.evaluate(space.config_from_flat_index(k))
        better = best_m is None or (
            m > best_m if surface.direction == Direction.MAXIMIZE else m < best_m
        )
        if better:
            best_k, best_m = k, m
    return space.config_from_flat_index(best_k), best_m


def grid20():
    return SearchSpace([Dimension("x", tuple(range(20)), "scalar"),
                        Dimension("y", tuple(range(20)), "scalar")])


def all_surfaces():
    space = cnn_grid()
    rng = np.random.default_rng(3)
    return [
        QuadraticSurface(space, Configuration((1, 2, 0, 3, 4, 1)), 2.0),
        QuadraticSurface(lstm_grid(), Configuration((2, 0, 1, 1, 0, 2, 1, 0)), 0.5,
                         direction="minimize"),
        RandomSmoothSurface(space, seed=7),
        RandomSmoothSurface(grid20(), seed=7, smoothness=0.3, direction="minimize"),
        TabularSurface(space, rng.uniform(size=space.cardinality)),
        TabularSurface(SearchSpace([Dimension("a", (1, 2, 3))]), [0.2, 0.9, 0.9]),
    ]


class TestEvaluate:
    def test_quadratic_optimum(self):
        opt = Configuration((1, 2, 0, 3, 4, 1))
        s = QuadraticSurface(cnn_grid(), opt, 3.0)
        assert s.evaluate(opt) == 1.0
        assert s.score(opt) == 1.0

    def test_quadratic_formula(self):
        space = SearchSpace([Dimension("x", (0, 1, 2, 3, 4), "scalar"),
                             Dimension("c", ("a", "b"))])
        s = QuadraticSurface(space, Configuration((0, 0)), 1.0)
        # scalar gap 0.5 -> 0.25, one-hot differs -> 1, averaged over 2 dims
        assert s.evaluate(Configuration((2, 1))) == pytest.approx(1 - (0.25 + 1) / 2)
        assert s.evaluate(Configuration((4, 1))) == 0.0

    def test_tabular_lookup(self):
        space = cnn_grid()
        table = np.linspace(0, 1, space.cardinality)
        s = TabularSurface(space, table)
        for k in (0, 17, 3839):
            assert s.evaluate(space.config_from_flat_index(k)) == table[k]

    def test_minimize_flip(self):
        space = SearchSpace([Dimension("a", (1, 2))])
        s = TabularSurface(space, [0.3, 0.6], direction="minimize")
        assert s.evaluate(Configuration((0,))) == 0.3
        assert s.score(Configuration((0,))) == pytest.approx(0.7)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            RandomSmoothSurface(cnn_grid(), seed=1).evaluate(Configuration((0, 0)))

    @pytest.mark.parametrize("surface", all_surfaces(), ids=lambda s: s.kind)
    def test_purity(self, surface):
        rng = np.random.default_rng(0)
        for _ in range(5):
            config = surface.space.sample(rng)
            first = surface.evaluate(config)
            assert 0.0 <= first <= 1.0
            assert all(surface.evaluate(config) == first for _ in range(1000))

    def test_random_smooth_argmax_matches_scan(self):
        s = RandomSmoothSurface(grid20(), seed=7)
        cells = [(x, y) for x in range(20) for y in range(20)]
        values = [s.evaluate(Configuration(c)) for c in cells]
        assert len(values) == 400
        brute = cells[int(np.argmax(values))]
        assert best_of(s)[0].indices == brute
        assert max(values) == 1.0 and min(values) == 0.0

    def test_random_smooth_seeds(self):
        a = RandomSmoothSurface(cnn_grid(), seed=7).table()
        b = RandomSmoothSurface(cnn_grid(), seed=7).table()
        c = RandomSmoothSurface(cnn_grid(), seed=8).table()
        assert np.array_equal(a, b)
        assert np.any(a != c)

    def test_random_smooth_is_smooth(self):
        # neighbours along the learning-rate axis differ less than random pairs
        s = RandomSmoothSurface(cnn_grid(), seed=11)
        t = s.table().reshape(cnn_grid().sizes)
        neighbour = np.abs(np.diff(t, axis=0)).mean()
        rng = np.random.default_rng(0)
        flat = s.table()
        random_pairs = np.abs(flat[rng.integers(3840, size=5000)] -
                              flat[rng.integers(3840, size=5000)]).mean()
        assert neighbour < random_pairs


class TestBestOf:
    @pytest.mark.parametrize("surface", all_surfaces(), ids=lambda s: s.kind)
    def test_matches_naive_scan(self, surface):
        assert best_of(surface) == naive_best(surface)

    def test_quadratic_declared_optimum(self):
        opt = Configuration((3, 0, 2, 1, 0, 3))
        assert best_of(QuadraticSurface(cnn_grid(), opt, 1.0)) == (opt, 1.0)

    def test_tie_break(self):
        s = TabularSurface(SearchSpace([Dimension("a", (1, 2, 3))]), [0.2, 0.9, 0.9])
        assert best_of(s) == (Configuration((1,)), 0.9)

    @pytest.mark.parametrize("surface", all_surfaces(), ids=lambda s: s.kind)
    def test_dominates_samples(self, surface):
        config, metric = best_of(surface)
        rng = np.random.default_rng(1)
        for _ in range(100):
            m = surface.evaluate(surface.space.sample(rng))
            assert (m <= metric) if surface.direction == Direction.MAXIMIZE else (m >= metric)

    def test_refuses_huge_space(self):
        space = SearchSpace([Dimension(f"d{i}", tuple(range(10))) for i in range(7)])
        with pytest.raises(SurfaceError):
            best_of(QuadraticSurface(space, space.zero_config()))


class TestMetaFeatures:
    def summary(self, **kw):
        base = dict(n_instances=100, n_numeric=10, n_categorical=0, n_classes=2,
                    feature_means=[0.0] * 10, feature_stds=[0.0] * 10,
                    feature_skews=[0.0] * 10)
        base.update(kw)
        return base

    def test_worked_example(self):
        assert metafeatures(self.summary()).values == (2, 1, 10, 0, 2, 0, 0, 0)

    def test_single_instance(self):
        mf = metafeatures(self.summary(n_instances=1, n_numeric=1, feature_means=[3.0],
                                       feature_stds=[0.0], feature_skews=[0.0]))
        assert mf.values[:2] == (0.0, 0.0)

    def test_pure(self):
        assert metafeatures(self.summary()) == metafeatures(self.summary())

    def test_missing_fields_listed(self):
        s = self.summary()
        del s["feature_stds"], s["n_classes"]
        with pytest.raises(ValueError, match="n_classes, feature_stds"):
            metafeatures(s)

    def test_length_and_finite(self):
        with pytest.raises(ValueError):
            MetaFeatures((0.0,) * 7)
        with pytest.raises(ValueError):
            MetaFeatures((0.0,) * 7 + (math.nan,))

    def test_summarize_dataset(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.normal(2, 3, 500), rng.exponential(1, 500),
                             rng.integers(0, 4, 500)])
        y = rng.integers(0, 3, 500)
        mf = metafeatures(summarize_dataset(X, y, categorical=[False, False, True]))
        assert mf.values[0] == pytest.approx(math.log10(500))
        assert mf.values[1] == pytest.approx(math.log10(3))
        assert mf.values[2:5] == (2, 1, 3)
        assert mf.values[5] == pytest.approx((X[:, 0].mean() + X[:, 1].mean()) / 2)
        assert mf.values[7] > 0  # the exponential column is right-skewed


class TestTabularFile:
    def test_round_trip(self, tmp_path):
        space = lstm_grid()
        s = RandomSmoothSurface(space, seed=3, direction="minimize").to_tabular()
        save_tabular(s, tmp_path / "s.csv")
        loaded = load_tabular(tmp_path / "s.csv")
        assert loaded == s
        assert loaded.provenance == s.provenance
        assert loaded.table().tobytes() == s.table().tobytes()

    def test_header(self, tmp_path):
        space = SearchSpace([Dimension("lr", (0.1, 0.01), "scalar"), Dimension("act", ("a", "b"))])
        save_tabular(TabularSurface(space, [0.1, 0.2, 0.3, 1 / 3]), tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0].startswith("#space ") and '"lr"' in lines[0]
        assert lines[2] == "#direction maximize"
        assert lines[3:] == ["0,0.1", "1,0.2", "2,0.3", "3,0.3333333333333333"]

    def test_missing_row(self, tmp_path):
        s = RandomSmoothSurface(cnn_grid(), seed=7)
        save_tabular(s, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()[:-1]
        assert sum(not l.startswith("#") for l in lines) == 3839
        (tmp_path / "short.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(SurfaceIntegrityError, match="3839.*3840"):
            load_tabular(tmp_path / "short.csv")

    def test_empty(self):
        with pytest.raises(SurfaceFormatError):
            parse_tabular("")

    @pytest.mark.parametrize("body, line", [
        ('#space {"name": "a", "values": [1, 2]}\n#direction maximize\n0,0.5\n1,abc\n', 4),
        ('#space {"name": "a", "values": [1, 2]}\n#direction maximize\n0,0.5\n2,0.5\n', 4),
        ('#space {"name": "a", "values": [1, 2]}\n#direction sideways\n', 2),
        ('#space {"name": "a" "values"}\n', 1),
        ('#space {"name": "a", "values": [1, 2]}\n#direction maximize\n0,1.5\n', 3),
        ('#space {"name": "a", "values": [1, 2]}\n#direction maximize\n0,0.5,1\n', 3),
    ])
    def test_parse_errors_carry_line(self, body, line):
        with pytest.raises(SurfaceFormatError) as err:
            parse_tabular(body)
        assert err.value.lineno == line


def test_counting_surface():
    inner = RandomSmoothSurface(cnn_grid(), seed=1)
    s = CountingSurface(inner)
    c = cnn_grid().zero_config()
    assert s.score(c) == inner.score(c)
    s.evaluate(c)
    assert s.count == 2
