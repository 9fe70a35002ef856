import numpy as np
import pytest

from proxout import Dataset, FeatureSchema, dataset_from_arrays

# Tuned hyperparameters per benchmark dataset: winners of grid_search over
# a stride of the default grid (k=5, seed=SPLIT_SEED), frozen so the
# acceptance suite does not re-tune on every run.  Car is a placeholder
# pending the fixture file (see README); it cannot be tuned without data.
SPLIT_SEED = 1

TUNED_PARAMS = {
    "iris": {"n_trees": 100, "max_depth": 10, "max_features": "sqrt",
             "criterion": "gini"},
    "wine": {"n_trees": 100, "max_depth": 10, "max_features": "sqrt",
             "criterion": "gini"},
    "breast_cancer": {"n_trees": 300, "max_depth": 10,
                      "max_features": "sqrt", "criterion": "entropy"},
    "digits": {"n_trees": 200, "max_depth": 20, "max_features": "sqrt",
               "criterion": "entropy"},
    "car": {"n_trees": 200, "max_depth": None, "max_features": "sqrt",
            "criterion": "entropy"},
}


def _sklearn_dataset(name) -> Dataset:
    from sklearn import datasets as skd

    loader = {
        "iris": skd.load_iris,
        "wine": skd.load_wine,
        "breast_cancer": skd.load_breast_cancer,
        "digits": skd.load_digits,
    }[name]
    raw = loader()
    labels = [str(raw.target_names[t]) for t in raw.target]
    return dataset_from_arrays(raw.data, labels, label_column="target")


@pytest.fixture(scope="session")
def iris():
    return _sklearn_dataset("iris")


@pytest.fixture(scope="session")
def wine():
    return _sklearn_dataset("wine")


@pytest.fixture(scope="session")
def breast_cancer():
    return _sklearn_dataset("breast_cancer")


@pytest.fixture(scope="session")
def digits():
    return _sklearn_dataset("digits")


def load_benchmark(name: str) -> Dataset:
    """Benchmark dataset by name; 'car' comes from a local fixture file.

    The car-evaluation data is not bundled (UCI download); see README for
    how to supply tests/fixtures/car.csv.
    """
    if name == "car":
        import pathlib

        from proxout import load_csv

        path = pathlib.Path(__file__).parent / "fixtures" / "car.csv"
        if not path.exists():
            raise FileNotFoundError(
                f"{path} missing: the UCI car-evaluation dataset is not "
                "redistributable offline; see README 'Car evaluation data'")
        schema = FeatureSchema(
            tuple((c, "categorical") for c in
                  ("buying", "maint", "doors", "persons", "lug_boot", "safety")),
            "class")
        return load_csv(path, schema)
    return _sklearn_dataset(name)


def random_dataset(rng, n=40, p=4, k=2, informative=True) -> Dataset:
    """Small random dataset; classes get shifted centers when informative."""
    X = rng.normal(size=(n, p))
    y = rng.integers(0, k, size=n)
    # ensure every class appears at least twice
    for j in range(k):
        y[2 * j] = j
        y[2 * j + 1] = j
    if informative:
        X += 2.0 * y[:, None]
    return dataset_from_arrays(X, [f"c{j}" for j in y])


def separable_dataset(rng, n_per=20, p=3) -> Dataset:
    a = rng.normal(size=(n_per, p)) + np.array([4.0] * p)
    b = rng.normal(size=(n_per, p)) - np.array([4.0] * p)
    X = np.vstack([a, b])
    return dataset_from_arrays(X, ["a"] * n_per + ["b"] * n_per)
