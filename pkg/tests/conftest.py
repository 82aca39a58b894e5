import numpy as np
import pytest

from brainalign.iodata import FULL, EmbeddingTensor, ResponseMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_tensor(data, model_id="m", context_window=FULL, word_ids=None):
    data = np.asarray(data)
    if word_ids is None:
        word_ids = np.arange(data.shape[1])
    return EmbeddingTensor(model_id=model_id, context_window=context_window, data=data, word_ids=word_ids)


def make_responses(values, word_ids=None, electrode_ids=None):
    values = np.asarray(values, dtype=np.float64)
    if word_ids is None:
        word_ids = np.arange(values.shape[1])
    if electrode_ids is None:
        electrode_ids = [f"E{i:03d}" for i in range(values.shape[0])]
    return ResponseMatrix(values=values, word_ids=word_ids, electrode_ids=electrode_ids)
