import numpy as np
import pytest

from choicerbm.model import CrbmParams


def random_params(rng, n_alternatives, n_hidden, n_features, scale=1.0):
    return CrbmParams(
        choice_hidden_w=rng.normal(0, scale, (n_alternatives, n_hidden)),
        choice_context_w=rng.normal(0, scale, (n_alternatives, n_features)),
        hidden_context_w=rng.normal(0, scale, (n_hidden, n_features)),
        choice_bias=rng.normal(0, scale, n_alternatives),
        hidden_bias=rng.normal(0, scale, n_hidden))


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
