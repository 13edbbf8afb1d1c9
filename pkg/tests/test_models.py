import math

import pytest
import torch
from torch.distributions import Normal

from zsight.errors import UnsupportedModelError
from zsight.models import (
    BananaModel,
    Box,
    FunctionModel,
    MixtureModel,
    banana_log_likelihood,
    build_mixture,
    load_galaxy,
    quadrature_evidence,
)
from zsight.pydantics.Experiment import MixtureHyperModel
from zsight.util import DTYPE


@pytest.fixture(scope="module")
def banana():
    return BananaModel()


@pytest.fixture(scope="module")
def galaxy():
    return load_galaxy("roeder")


def test_banana_peak(banana: BananaModel):
    assert float(banana_log_likelihood(torch.tensor(BananaModel.MODE, dtype=DTYPE))) == pytest.approx(0.0, abs=1e-12)

    grid = banana.support.sample(10000)

    assert bool(torch.all(banana.log_likelihood(grid) <= 0))


def test_banana_prior(banana: BananaModel):
    inside = torch.tensor([[0.0, 0.0], [1.5, -0.5]], dtype=DTYPE)
    outside = torch.tensor([[2.0, 0.0], [0.0, -0.6]], dtype=DTYPE)

    assert torch.allclose(banana.log_prior(inside), torch.full((2,), -math.log(4.0), dtype=DTYPE))
    assert bool(torch.all(torch.isinf(banana.log_prior(outside))))
    assert bool(torch.all(torch.isinf(banana.log_posterior(outside))))


def test_banana_quadrature(banana: BananaModel):
    assert quadrature_evidence(banana) == pytest.approx(-4.1543, abs=1e-3)


def test_quadrature_self_convergence(banana: BananaModel):
    assert abs(quadrature_evidence(banana, 501) - quadrature_evidence(banana, 1001)) < 1e-5


def test_quadrature_constant_likelihood():
    model = FunctionModel(lambda theta: torch.zeros(theta.shape[:-1], dtype=DTYPE), lower=[0.0, -1.0], upper=[2.0, 3.0])

    assert quadrature_evidence(model, 101) == pytest.approx(0.0, abs=1e-12)


def test_quadrature_rejects(galaxy: torch.Tensor, banana: BananaModel):
    model = build_mixture(2, data=galaxy)

    with pytest.raises(UnsupportedModelError):
        quadrature_evidence(model)

    with pytest.raises(ValueError):
        quadrature_evidence(banana, 100)


def test_box():
    box = Box([0.0, 0.0], [1.0, 2.0])

    assert box.log_volume == pytest.approx(math.log(2.0))
    assert box.dimension == 2

    with pytest.raises(ValueError):
        Box([0.0], [0.0])


def test_galaxy_variants(galaxy: torch.Tensor):
    chib = load_galaxy("chib78")

    assert galaxy.shape == (82,)
    assert float(galaxy.mean()) == pytest.approx(20.8, abs=0.05)

    differs = torch.nonzero(galaxy != chib).flatten().tolist()

    assert differs == [77]
    assert float(chib[77]) == pytest.approx(26.690)

    with pytest.raises(ValueError):
        load_galaxy("unknown")


def test_mixture_packing(galaxy: torch.Tensor):
    astro = MixtureModel(galaxy, 3, MixtureHyperModel.preset("astro"))
    chib = MixtureModel(galaxy, 3, MixtureHyperModel.preset("chib"))

    assert astro.dimension == 10
    assert chib.dimension == 9

    theta = astro.sample_prior(4)
    phi, mu, tau, beta = astro.unpack(theta)

    assert torch.allclose(astro.pack(phi, mu, tau, beta), theta)
    assert torch.allclose(phi.sum(dim=-1), torch.ones(4, dtype=DTYPE))

    with pytest.raises(ValueError):
        astro.unpack(torch.zeros((1, 9), dtype=DTYPE))


def test_single_component_likelihood(galaxy: torch.Tensor):
    model = MixtureModel(galaxy, 1, MixtureHyperModel.preset("chib"))

    theta = torch.tensor([1.0, 20.0, 0.05], dtype=DTYPE)
    expected = Normal(torch.tensor(20.0, dtype=DTYPE), torch.tensor(0.05, dtype=DTYPE) ** -0.5).log_prob(galaxy).sum()

    assert float(model.log_likelihood(theta)) == pytest.approx(float(expected), rel=1e-12)


def test_partial_data_prefixes(galaxy: torch.Tensor):
    model = MixtureModel(galaxy, 2, MixtureHyperModel.preset("astro"), subset_seed=7)

    assert torch.equal(model.subset(10), model.subset(20)[:10])
    assert sorted(model.subset(82).tolist()) == sorted(galaxy.tolist())

    theta = model.sample_prior(3)

    assert torch.equal(model.partial_log_likelihood(0, theta), torch.zeros(3, dtype=DTYPE))
    assert torch.allclose(model.partial_log_likelihood(82, theta), model.log_likelihood(theta))

    with pytest.raises(ValueError):
        model.subset(83)


def test_mixture_collapse_and_relabelling(galaxy: torch.Tensor):
    one = MixtureModel(galaxy, 1, MixtureHyperModel.preset("chib"))
    two = MixtureModel(galaxy, 2, MixtureHyperModel.preset("chib"))

    collapsed = torch.tensor([0.3, 0.7, 21.0, 21.0, 0.2, 0.2], dtype=DTYPE)

    assert float(two.log_likelihood(collapsed)) == pytest.approx(
        float(one.log_likelihood(torch.tensor([1.0, 21.0, 0.2], dtype=DTYPE))), rel=1e-12
    )

    theta = torch.tensor([0.3, 0.7, 10.0, 22.0, 1.0, 0.5], dtype=DTYPE)
    swapped = torch.tensor([0.7, 0.3, 22.0, 10.0, 0.5, 1.0], dtype=DTYPE)

    assert float(two.log_likelihood(swapped)) == pytest.approx(float(two.log_likelihood(theta)), rel=1e-12)


def test_tiny_mixture_likelihood():
    data = [9.0, 20.0, 23.5]
    model = MixtureModel(data, 2, MixtureHyperModel.preset("chib"), subset_seed=1)

    theta = torch.tensor([0.4, 0.6, 10.0, 21.0, 1.0, 0.25], dtype=DTYPE)

    def density(y):
        return sum(
            phi * math.sqrt(tau / (2 * math.pi)) * math.exp(-0.5 * tau * (y - mu) ** 2)
            for phi, mu, tau in [(0.4, 10.0, 1.0), (0.6, 21.0, 0.25)]
        )

    expected = sum(math.log(density(y)) for y in data)

    assert float(model.log_likelihood(theta)) == pytest.approx(expected, rel=1e-12)

    first_two = sum(math.log(density(float(y))) for y in model.subset(2))
    rest = model.data[model.permutation[2:]]

    assert float(model.partial_log_likelihood(2, theta)) == pytest.approx(first_two, rel=1e-12)
    assert float(model.partial_log_likelihood(2, theta) + model.log_likelihood_subset(theta, rest)) == pytest.approx(
        expected, rel=1e-12
    )

    with pytest.raises(ValueError):
        model.log_likelihood(torch.tensor([0.5, 0.6, 10.0, 21.0, 1.0, 0.25], dtype=DTYPE))


def test_mixture_prior_support(galaxy: torch.Tensor):
    model = MixtureModel(galaxy, 2, MixtureHyperModel.preset("astro"))

    theta = model.sample_prior(5)

    assert bool(torch.isfinite(model.log_prior(theta)).all())

    bad = theta.clone()
    bad[:, 4] = -1.0

    assert bool(torch.isinf(model.log_prior(bad)).all())

    with pytest.raises(ValueError):
        model.log_likelihood(bad)


def test_mixture_with_hyper(galaxy: torch.Tensor):
    model = MixtureModel(galaxy, 2, MixtureHyperModel.preset("astro"), subset_seed=3)

    other = model.with_hyper(MixtureHyperModel.preset("data_driven"))

    assert torch.equal(other.permutation, model.permutation)
    assert other.hyper.kappa == 20.8

    with pytest.raises(ValueError):
        model.with_hyper(MixtureHyperModel.preset("chib"))


def test_richardson_green_preset(galaxy: torch.Tensor):
    hyper = MixtureHyperModel.preset("richardson_green", galaxy.tolist())

    spread = float(galaxy.max() - galaxy.min())

    assert hyper.kappa == pytest.approx(float(galaxy.max() + galaxy.min()) / 2)
    assert hyper.xi == pytest.approx(1 / spread**2)

    with pytest.raises(ValueError):
        MixtureHyperModel.preset("richardson_green")
