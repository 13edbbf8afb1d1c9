import math

import pytest
import torch

from zsight.bridge import BridgeSpec, LogWeightMatrix, eval_weight_matrix, finite_difference_hessian
from zsight.errors import RankDeficiencyError
from zsight.estimators import LogNormalizers, recursive_normalize
from zsight.models import BananaModel
from zsight.pydantics.Experiment import ChainConfig
from zsight.sampler import mc3_sample
from zsight.uncertainty import (
    bootstrap_se,
    ess,
    quasi_hessian,
    quasi_hessian_covariance,
    quasi_log_likelihood,
    rung_probabilities,
)
from zsight.util import DTYPE, seeded


@pytest.fixture(scope="module")
def W():
    with seeded(0):
        entries = torch.randn((300, 3), dtype=DTYPE)

    entries[:, 0] = 0.0

    return LogWeightMatrix(entries, torch.arange(3).repeat_interleave(100))


@pytest.fixture(scope="module")
def normalizers(W: LogWeightMatrix):
    return recursive_normalize(W)


@pytest.fixture(scope="module")
def constant():
    return LogWeightMatrix(torch.zeros((60, 3), dtype=DTYPE), torch.tensor([0] * 10 + [1] * 20 + [2] * 30))


def test_ess():
    log_weights = torch.log(torch.tensor([1.0, 2.0, 3.0, 4.0], dtype=DTYPE))

    assert ess(log_weights) == pytest.approx(10 / 3)
    assert ess(log_weights + 100.0) == pytest.approx(10 / 3)
    assert ess(torch.zeros(7, dtype=DTYPE)) == pytest.approx(7.0)
    assert ess(torch.tensor([0.0, -math.inf], dtype=DTYPE)) == pytest.approx(1.0)

    with pytest.raises(ValueError):
        ess(torch.full((3,), -math.inf, dtype=DTYPE))


def test_rung_probabilities(W: LogWeightMatrix, normalizers: LogNormalizers):
    probabilities = rung_probabilities(W, normalizers.log_z)

    assert probabilities.shape == (300, 3)
    assert torch.allclose(probabilities.sum(dim=1), torch.ones(300, dtype=DTYPE))


def test_hessian_finite_difference(W: LogWeightMatrix, normalizers: LogNormalizers):
    def objective(nu):
        return quasi_log_likelihood(W, torch.cat([torch.zeros(1, dtype=DTYPE), nu]))

    numeric = finite_difference_hessian(objective, normalizers.log_z[1:])

    assert torch.allclose(quasi_hessian(W, normalizers.log_z), numeric, rtol=1e-4, atol=1e-3)


def test_score_vanishes_at_fixed_point(W: LogWeightMatrix, normalizers: LogNormalizers):
    # the recursive fixed point maximizes the quasi log-likelihood
    nu = normalizers.log_z[1:].clone()

    for k in range(2):
        step = torch.zeros(2, dtype=DTYPE)
        step[k] = 1e-3

        up = quasi_log_likelihood(W, torch.cat([torch.zeros(1, dtype=DTYPE), nu + step]))
        down = quasi_log_likelihood(W, torch.cat([torch.zeros(1, dtype=DTYPE), nu - step]))
        center = quasi_log_likelihood(W, normalizers.log_z)

        assert center >= up
        assert center >= down


def test_covariance(W: LogWeightMatrix, normalizers: LogNormalizers):
    covariance = quasi_hessian_covariance(W, normalizers)
    uncorrected = quasi_hessian_covariance(W, normalizers, iid_correction=False)

    assert covariance.cov.shape == (2, 2)
    assert torch.allclose(covariance.cov, covariance.cov.T)
    assert bool(torch.all(torch.diagonal(covariance.cov) >= 0))
    assert bool(torch.all(torch.diagonal(covariance.cov) < torch.diagonal(uncorrected.cov)))
    assert covariance.se_target == pytest.approx(float(covariance.se[-1]))

    data = covariance.to_dict()

    assert data["method"] == "quasi_hessian"
    assert data["interval"] is None


def test_constant_toy(constant: LogWeightMatrix):
    normalizers = recursive_normalize(constant)

    assert torch.allclose(normalizers.log_z, torch.zeros(3, dtype=DTYPE), atol=1e-12)

    covariance = quasi_hessian_covariance(constant, normalizers)

    assert covariance.se_target == 0.0
    assert torch.equal(torch.diagonal(covariance.cov), torch.zeros(2, dtype=DTYPE))

    bootstrap = bootstrap_se(constant, normalizers, B=100, seed=0, covariance=covariance)

    assert bootstrap.se_target == pytest.approx(0.0, abs=1e-8)


def test_rank_deficiency():
    entries = torch.zeros((4, 2), dtype=DTYPE)
    entries[:, 0] = -math.inf

    W = LogWeightMatrix(entries, torch.ones(4, dtype=torch.long), 2)

    with pytest.raises(RankDeficiencyError) as error:
        quasi_hessian_covariance(W, LogNormalizers(torch.zeros(2, dtype=DTYPE), 1, 0.0, True))

    assert error.value.rungs == [1]


def test_bootstrap(W: LogWeightMatrix, normalizers: LogNormalizers):
    first = bootstrap_se(W, normalizers, B=100, seed=3)
    second = bootstrap_se(W, normalizers, B=100, seed=3)

    assert first.method == "bootstrap"
    assert first.cov.shape == (2, 2)
    assert first.se_target > 0
    assert first.interval[0] < first.interval[1]
    assert first.se_target == second.se_target
    assert torch.equal(first.cov, second.cov)

    with pytest.raises(ValueError):
        bootstrap_se(W, normalizers, B=50)

    with pytest.raises(ValueError):
        bootstrap_se(W, normalizers, B=100, log_target=torch.zeros(5, dtype=DTYPE))


@pytest.mark.slow
def test_bootstrap_matches_hessian():
    model = BananaModel()
    spec = BridgeSpec.power_posterior(5, 5.0)

    pool = mc3_sample(model, spec, 250, ChainConfig(steps=1000, burn_in=1000, seed=9))

    W = eval_weight_matrix(pool, spec, model)
    normalizers = recursive_normalize(W)

    hessian = quasi_hessian_covariance(W, normalizers).se_target
    bootstrap = bootstrap_se(W, normalizers, B=200, seed=1).se_target

    assert 0.5 < bootstrap / hessian < 2.0


def test_covariance_ignores_labels(W: LogWeightMatrix, normalizers: LogNormalizers):
    expected = quasi_hessian_covariance(W, normalizers).cov

    relabeled = LogWeightMatrix(W.entries, (W.labels + 1) % W.m)

    assert torch.allclose(quasi_hessian_covariance(relabeled, recursive_normalize(relabeled)).cov, expected, atol=1e-12)

    with seeded(3):
        order = torch.randperm(W.n)

    permuted = W.select(order)

    assert torch.allclose(quasi_hessian_covariance(permuted, recursive_normalize(permuted)).cov, expected, atol=1e-10)
