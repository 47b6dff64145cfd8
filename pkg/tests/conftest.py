import pytest

from support import make_synthetic_series, write_cmapss_file

import rulkit


@pytest.fixture(scope="session")
def synthetic_series():
    return make_synthetic_series()


@pytest.fixture(scope="session")
def synthetic_dataset(synthetic_series):
    """(stats, rul_denominator, WindowedDataset) for the 20-engine set."""
    stats = rulkit.fit_normalizer(synthetic_series)
    denominator = rulkit.default_rul_denominator(synthetic_series)
    dataset = rulkit.build_windows(synthetic_series, stats, denominator, 20)
    return stats, denominator, dataset


@pytest.fixture(scope="session")
def synthetic_split(synthetic_dataset):
    _, _, dataset = synthetic_dataset
    return rulkit.train_val_split(dataset, 0.2, seed=5)


@pytest.fixture(scope="session")
def small_series():
    # 6 short engines: enough to train a couple of fast epochs
    return make_synthetic_series(n_engines=6, t_range=(30, 50), seed=7)


@pytest.fixture()
def small_data_file(tmp_path, small_series):
    path = tmp_path / "train_data.txt"
    write_cmapss_file(small_series, path)
    return path
