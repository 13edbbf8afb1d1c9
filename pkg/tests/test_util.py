import logging
import math

import pytest
import torch

from zsight.util import DTYPE, derive_seed, log_mean_exp, pool_map, seeded, simpson_weights, timed


def test_derive_seed():
    seed = derive_seed(0, "replicate", 3)

    assert seed == derive_seed(0, "replicate", 3)
    assert 0 <= seed < 2**63

    others = {derive_seed(0, "replicate", 4), derive_seed(1, "replicate", 3), derive_seed(0, "bootstrap", 3)}

    assert seed not in others
    assert len(others) == 3


def test_seeded_restores_state():
    torch.manual_seed(5)
    expected = torch.rand(3)

    torch.manual_seed(5)

    with seeded(1):
        first = torch.rand(3)

    assert torch.equal(torch.rand(3), expected)

    with seeded(1):
        assert torch.equal(torch.rand(3), first)


def test_log_mean_exp():
    values = torch.log(torch.tensor([[1.0, 3.0], [2.0, 6.0]], dtype=DTYPE))

    assert torch.allclose(log_mean_exp(values), torch.log(torch.tensor([2.0, 4.0], dtype=DTYPE)))
    assert torch.allclose(log_mean_exp(values, dim=0), torch.log(torch.tensor([1.5, 4.5], dtype=DTYPE)))


def test_simpson_weights():
    weights = simpson_weights(5, 0.25)

    assert weights.tolist() == pytest.approx([1 / 12, 4 / 12, 2 / 12, 4 / 12, 1 / 12])

    # exact on cubics
    x = torch.linspace(0.0, 1.0, 5, dtype=DTYPE)

    assert float((weights * x**3).sum()) == pytest.approx(0.25)

    with pytest.raises(ValueError):
        simpson_weights(4, 0.25)


def test_pool_map():
    assert pool_map(math.sqrt, [4.0, 9.0]) == [2.0, 3.0]


def test_timed(caplog):
    lggr = logging.getLogger("zsight-timing")

    @timed(lggr)
    def double(x):
        return 2 * x

    with caplog.at_level(logging.DEBUG, logger="zsight-timing"):
        assert double(4) == 8

    assert "double took" in caplog.text
    assert double.__name__ == "double"
