import numpy as np
import pytest

from mipipe.data_model import Trial, TrialSet


def make_trial(data, label=None, session_id=1, trial_index=0):
    return Trial(np.asarray(data, dtype=float), label, session_id, trial_index)


def make_set(trials, fs=100.0):
    n_ch = trials[0].n_channels
    return TrialSet(tuple(trials), fs, tuple(f"ch{i}" for i in range(n_ch)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
