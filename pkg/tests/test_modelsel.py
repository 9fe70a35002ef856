import numpy as np
import pytest

from proxout import Grid, grid_search
from proxout.forest import ForestParams
from proxout.modelsel import ModelSelError, write_cv_table

from conftest import separable_dataset


SMALL_GRID = Grid(n_trees_values=(5,), max_depth_values=(3,),
                  max_features_values=("sqrt",), criterion_values=("gini",))


class TestGrid:
    def test_default_sizes(self):
        g = Grid()
        assert len(list(g.configs())) == 10 * 11 * 2 * 3

    def test_empty_axis_rejected(self):
        with pytest.raises(ModelSelError):
            Grid(n_trees_values=())

    def test_strided_subsample(self):
        g = Grid(n_trees_values=(1, 2, 3, 4), max_depth_values=(None,),
                 max_features_values=("sqrt",), criterion_values=("gini",))
        assert [c["n_trees"] for c in g.strided(2)] == [1, 3]

    def test_deterministic_order(self):
        assert list(SMALL_GRID.configs()) == list(SMALL_GRID.configs())


class TestGridSearch:
    def test_single_config_selected(self):
        d = separable_dataset(np.random.default_rng(0), n_per=20)
        result = grid_search(d, SMALL_GRID, k=3, seed=1)
        assert result.best_config == next(SMALL_GRID.configs())
        assert len(result.table) == 1

    def test_dominant_config_wins(self):
        # depth 1 with one feature cannot separate the diagonal pattern that
        # full-depth trees fit perfectly
        rng = np.random.default_rng(1)
        n = 60
        X = rng.normal(size=(n, 2))
        labels = ["a" if (x[0] > 0) ^ (x[1] > 0) else "b" for x in X]
        from proxout import dataset_from_arrays

        d = dataset_from_arrays(X, labels)
        grid = Grid(n_trees_values=(30,), max_depth_values=(1, None),
                    max_features_values=("all",), criterion_values=("gini",))
        result = grid_search(d, grid, k=3, seed=2)
        assert result.best_config["max_depth"] is None

    def test_fold_identity_across_configs(self):
        # equal configs must produce identical fold scores
        d = separable_dataset(np.random.default_rng(2), n_per=15)
        grid = Grid(n_trees_values=(4, 4), max_depth_values=(2,),
                    max_features_values=("sqrt",), criterion_values=("gini",))
        result = grid_search(d, grid, k=3, seed=3)
        assert result.table[0]["fold_scores"] == result.table[1]["fold_scores"]

    def test_mean_is_arithmetic_mean(self):
        d = separable_dataset(np.random.default_rng(3), n_per=15)
        result = grid_search(d, SMALL_GRID, k=3, seed=4)
        row = result.table[0]
        assert row["mean"] == pytest.approx(np.mean(row["fold_scores"]),
                                            abs=1e-12)

    def test_tie_prefers_fewer_trees_then_shallower(self):
        d = separable_dataset(np.random.default_rng(4), n_per=20)
        grid = Grid(n_trees_values=(10, 5), max_depth_values=(None, 3),
                    max_features_values=("sqrt",), criterion_values=("gini",))
        result = grid_search(d, grid, k=3, seed=5)
        # separable data: every config scores 1.0; tie rule picks 5 trees,
        # depth 3
        assert all(r["mean"] == 1.0 for r in result.table)
        assert result.best_config["n_trees"] == 5
        assert result.best_config["max_depth"] == 3

    def test_adding_dominated_config_keeps_best(self):
        d = separable_dataset(np.random.default_rng(5), n_per=20)
        base_grid = Grid(n_trees_values=(8,), max_depth_values=(None,),
                         max_features_values=("sqrt",),
                         criterion_values=("gini",))
        best_before = grid_search(d, base_grid, k=3, seed=6).best_config
        wider = Grid(n_trees_values=(8, 50), max_depth_values=(None,),
                     max_features_values=("sqrt",),
                     criterion_values=("gini",))
        best_after = grid_search(d, wider, k=3, seed=6).best_config
        assert best_before == best_after

    def test_invalid_scoring(self):
        d = separable_dataset(np.random.default_rng(6), n_per=15)
        with pytest.raises(ModelSelError):
            grid_search(d, SMALL_GRID, k=3, seed=0, scoring="auc")

    def test_best_params_passthrough(self):
        d = separable_dataset(np.random.default_rng(7), n_per=15)
        result = grid_search(d, SMALL_GRID, k=3, seed=8)
        params = result.best_params(ForestParams(seed=8, min_samples_leaf=2))
        assert params.n_trees == 5
        assert params.min_samples_leaf == 2

    def test_wine_reduced_grid(self, wine):
        # desk-scale slice of the full grid; threshold anchored well below
        # the benchmark's near-perfect accuracy
        grid = Grid(n_trees_values=(100, 200), max_depth_values=(5, 10, None),
                    max_features_values=("sqrt",),
                    criterion_values=("gini", "entropy"))
        result = grid_search(wine, grid, k=5, seed=0)
        best = max(r["mean"] for r in result.table)
        assert best >= 0.95
        assert result.best_config is not None

    def test_cv_table_csv(self, tmp_path):
        d = separable_dataset(np.random.default_rng(8), n_per=15)
        result = grid_search(d, SMALL_GRID, k=3, seed=9)
        path = tmp_path / "cv.csv"
        write_cv_table(path, result)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("n_trees,max_depth,max_features,criterion")
        assert len(lines) == 2
