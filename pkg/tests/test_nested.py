import csv
import logging
import math

import pytest
import torch

from zsight import CONFIG
from zsight.errors import SamplerStallError, UnsupportedModelError
from zsight.models import BananaModel, Box, FunctionModel, build_mixture
from zsight.nested import (
    Ellipsoid,
    NSRun,
    Shell,
    ins_evidence,
    ins_log_density,
    log_unit_ball_volume,
    mvee,
    nested_run,
    ns_evidence,
    ns_posterior_weights,
    shell_pool,
    shell_recursive_evidence,
)
from zsight.util import DTYPE, as_tensor, seeded

BANANA_LOG_Z = -4.1543


@pytest.fixture(scope="module")
def banana():
    return BananaModel()


@pytest.fixture(scope="module")
def run(banana: BananaModel):
    return nested_run(banana, 50, 500, expand_factor=1.5, seed=0)


@pytest.fixture(scope="module")
def triangle():
    # triangular likelihood on [0, 1] peaking at 2 in the middle: Z = 1
    return FunctionModel(
        lambda theta: math.log(2.0) + torch.log1p(-torch.abs(2 * theta[..., 0] - 1)), lower=[0.0], upper=[1.0]
    )


@pytest.fixture(scope="module")
def triangle_run(triangle: FunctionModel):
    return nested_run(triangle, 50, 500, expand_factor=1.5, seed=0)


def ladder_run(thresholds, live_log_likelihood, n_live: int = 10) -> NSRun:
    """A hand-built run on the unit square with the given shell thresholds and final live log-likelihoods."""
    support = Box([0.0, 0.0], [1.0, 1.0])
    steps = len(thresholds)

    with seeded(0):
        initial = support.sample(n_live)
        points = support.sample(steps)

    ellipsoid = Ellipsoid(torch.full((2,), 0.5, dtype=DTYPE), torch.eye(2, dtype=DTYPE) * 2)
    empty = torch.empty((0, 2), dtype=DTYPE)

    shells = [
        Shell(float(t), ellipsoid, initial[0], points[i], float(t), empty, torch.empty(0, dtype=DTYPE))
        for i, t in enumerate(thresholds)
    ]

    return NSRun(
        shells,
        initial,
        torch.full((n_live,), float(thresholds[0]) if steps else 0.0, dtype=DTYPE),
        initial,
        as_tensor(live_log_likelihood),
        support,
        n_live,
        1.5,
    )


def flat_run(log_c: float, n_live: int = 10, steps: int = 25) -> NSRun:
    """A hand-built run on a flat likelihood: every threshold and live point equals log c."""
    return ladder_run([log_c] * steps, torch.full((n_live,), log_c, dtype=DTYPE), n_live)


def test_unit_ball_volume():
    assert log_unit_ball_volume(1) == pytest.approx(math.log(2.0))
    assert log_unit_ball_volume(2) == pytest.approx(math.log(math.pi))
    assert log_unit_ball_volume(3) == pytest.approx(math.log(4 * math.pi / 3))


def test_mvee_square():
    points = torch.tensor([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [0.0, 0.0], [0.3, -0.2]], dtype=DTYPE)

    ellipsoid = mvee(points)

    assert torch.allclose(ellipsoid.center, torch.zeros(2, dtype=DTYPE), atol=1e-8)
    assert torch.allclose(ellipsoid.axes, torch.full((2,), math.sqrt(2.0), dtype=DTYPE), atol=1e-6)
    assert math.exp(ellipsoid.log_volume) == pytest.approx(2 * math.pi, rel=1e-6)
    assert bool(ellipsoid.contains(points).all())


def test_mvee_degenerate():
    points = torch.tensor([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.5, 0.5]], dtype=DTYPE)

    ellipsoid = mvee(points)

    assert bool(ellipsoid.contains(points).all())
    assert float(ellipsoid.axes[0]) > 0

    with pytest.raises(ValueError):
        mvee(points[:1])


def test_mvee_encloses_random_points():
    with seeded(2):
        points = torch.randn((200, 3), dtype=DTYPE) @ torch.tensor([[2.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.0, 0.3, 0.2]], dtype=DTYPE)

    ellipsoid = mvee(points)

    assert bool(ellipsoid.contains(points).all())
    assert float(ellipsoid.mahalanobis(points).max()) == pytest.approx(1.0, abs=1e-9)


def test_ellipsoid_sampling():
    ellipsoid = Ellipsoid(torch.tensor([1.0, -1.0], dtype=DTYPE), torch.tensor([[4.0, 1.0], [1.0, 2.0]], dtype=DTYPE))

    with seeded(0):
        draws = ellipsoid.sample(20000)

    assert bool(ellipsoid.contains(draws).all())
    assert torch.allclose(draws.mean(dim=0), ellipsoid.center, atol=0.02)

    # uniform in volume: the mean Mahalanobis radius squared of a uniform 2-ball is 1/2
    assert float(ellipsoid.mahalanobis(draws).mean()) == pytest.approx(0.5, abs=0.01)

    assert ellipsoid.scale(2.0).log_volume == pytest.approx(ellipsoid.log_volume + 2 * math.log(2.0))

def test_near_boundary():
    circle = Ellipsoid(torch.zeros(2, dtype=DTYPE), torch.eye(2, dtype=DTYPE))

    points = torch.tensor([[0.993, 0.0], [0.985, 0.0], [0.0, -0.995], [0.5, 0.5], [0.6, 0.8]], dtype=DTYPE)

    assert circle.near_boundary(points, 0.01).tolist() == [True, False, True, False, True]
    assert float(circle.radius(points[4])) == pytest.approx(1.0)

    # radius is linear along an axis of a stretched, shifted ellipsoid
    stretched = Ellipsoid(torch.ones(2, dtype=DTYPE), torch.diag(torch.tensor([0.25, 1.0], dtype=DTYPE)))

    assert float(stretched.radius(torch.tensor([1.0 + 2 * 0.993, 1.0], dtype=DTYPE))) == pytest.approx(0.993)
    assert bool(stretched.near_boundary(torch.tensor([1.0 + 2 * 0.993, 1.0], dtype=DTYPE), 0.01))
    assert not bool(stretched.near_boundary(torch.tensor([1.0, 1.985], dtype=DTYPE), 0.01))



def test_run_shape(run: NSRun):
    assert run.steps == 500
    assert run.live.shape == (50, 2)
    assert bool(torch.all(run.thresholds[1:] >= run.thresholds[:-1]))
    assert bool(torch.all(run.accepted_log_likelihood > run.thresholds))
    assert run.likelihood_calls == 50 + 500 + int(run.overheads.sum())
    assert run.mean_overhead >= 0


def test_run_determinism(banana: BananaModel, run: NSRun):
    again = nested_run(banana, 50, 20, expand_factor=1.5, seed=0)

    assert torch.equal(again.thresholds, run.thresholds[:20])
    assert torch.equal(again.initial, run.initial)


def test_run_rejects(banana: BananaModel):
    with pytest.raises(UnsupportedModelError):
        nested_run(build_mixture(2), 10, 5)

    with pytest.raises(ValueError):
        nested_run(banana, 2, 5)

    with pytest.raises(ValueError):
        nested_run(banana, 10, 0)

    with pytest.raises(ValueError):
        nested_run(banana, 10, 5, expand_factor=0.5)


def test_stall():
    model = FunctionModel(lambda theta: torch.zeros(theta.shape[:-1], dtype=DTYPE), lower=[0.0, 0.0], upper=[1.0, 1.0])

    with pytest.raises(SamplerStallError) as error:
        nested_run(model, 5, 3, max_proposals=50)

    assert error.value.shell == 0
    assert error.value.proposals == 50


def test_run_boundary_hits(banana: BananaModel, monkeypatch, caplog):
    monkeypatch.setattr(CONFIG.NESTED, "BOUNDARY_WARN", 1.0)

    with caplog.at_level(logging.WARNING, logger="zsight"):
        run = nested_run(banana, 20, 30, seed=1)

    # every accepted point has a positive radius
    assert run.boundary_hits == 30
    assert "30 accepted points lay beyond Mahalanobis radius 0.0000" in caplog.text

    monkeypatch.setattr(CONFIG.NESTED, "BOUNDARY_WARN", 0.0)

    assert nested_run(banana, 20, 30, seed=1).boundary_hits == 0


def test_flat_likelihood_evidence():
    log_c = -2.5
    run = flat_run(log_c)

    assert ns_evidence(run) == pytest.approx(log_c, abs=1e-12)

    sample = ns_posterior_weights(run)

    assert sample.points.shape == (35, 2)
    assert float(torch.logsumexp(sample.log_weights, dim=0)) == pytest.approx(log_c, abs=1e-12)



def test_ns_evidence_monotone():
    thresholds = torch.linspace(-3.0, 0.0, 20, dtype=DTYPE)
    live = torch.full((10,), 0.5, dtype=DTYPE)

    base = ns_evidence(ladder_run(thresholds, live))

    for i in (0, 7, 19):
        raised = thresholds.clone()
        raised[i] += 0.1

        assert ns_evidence(ladder_run(raised, live)) > base

    raised = live.clone()
    raised[3] += 0.1

    assert ns_evidence(ladder_run(thresholds, raised)) > base

    # lower final live points shrink only the final term
    lowered = live.clone().fill_(-3.0)

    assert ns_evidence(ladder_run(thresholds, lowered)) < base


def test_zero_shells_is_ame():
    support = Box([0.0, 0.0], [2.0, 2.0])

    with seeded(1):
        initial = support.sample(30)

    log_likelihood = -((initial - 1.0) ** 2).sum(dim=1)

    run = NSRun([], initial, log_likelihood, initial, log_likelihood, support, 30, 1.5)

    ame = float(torch.logsumexp(log_likelihood, dim=0) - math.log(30))

    assert ins_evidence(run, B=0).log_z == pytest.approx(ame, abs=1e-12)
    assert shell_recursive_evidence(run).log_z == pytest.approx(ame, abs=1e-10)


def test_shell_pool(run: NSRun):
    pool, spec = shell_pool(run)

    # snapshots after steps 0, 50, ..., 450 and the final live set
    assert pool.m == 12
    assert spec.m == 12
    assert pool.counts.tolist() == [50] * 12
    assert float(spec.shells[1]) == float(run.thresholds[0])
    assert float(spec.shells[2]) == float(run.thresholds[50])
    assert float(spec.shells[11]) == float(run.thresholds[499])

    assert torch.equal(pool.rung(0), run.initial)

    final = pool.log_likelihood[pool.labels == 11]

    assert torch.equal(final.sort().values, run.live_log_likelihood.sort().values)

    for q, step in enumerate(range(0, 500, 50), start=1):
        log_likelihood = pool.log_likelihood[pool.labels == q]

        assert bool(torch.all(log_likelihood > spec.shells[q]))

        # a snapshot is the whole live set: its worst point dies at the next step
        assert float(log_likelihood.min()) == float(run.thresholds[step + 1])


def test_shell_pool_rung_every(run: NSRun):
    pool, spec = shell_pool(run, rung_every=100)

    assert pool.m == 7
    assert [float(threshold) for threshold in spec.shells[1:]] == [float(run.thresholds[s]) for s in (0, 100, 200, 300, 400, 499)]

    with pytest.raises(ValueError):
        shell_pool(run, rung_every=0)


def test_ins_density_chunks(run: NSRun):
    with seeded(4):
        points = run.support.sample(100)

    assert torch.allclose(ins_log_density(run, points, chunk=7), ins_log_density(run, points), atol=1e-12)


def test_estimates(run: NSRun):
    ns = ns_evidence(run)
    ins = ins_evidence(run, B=100, seed=1)
    shell = shell_recursive_evidence(run)

    assert ns == pytest.approx(BANANA_LOG_Z, abs=1.0)
    assert ins.log_z == pytest.approx(BANANA_LOG_Z, abs=0.3)
    assert shell.log_z == pytest.approx(BANANA_LOG_Z, abs=0.6)
    assert shell.log_z == pytest.approx(ins.log_z, abs=0.6)

    assert ins.method == "ins"
    assert ins.se_bootstrap > 0
    assert ins.diagnostics["draws"] == run.likelihood_calls

    assert shell.method == "shell_recursive"
    assert shell.diagnostics["se_hessian_unreliable"]
    assert shell.log_z_rungs[0] == 0.0
    assert all(b <= a for a, b in zip(shell.log_z_rungs, shell.log_z_rungs[1:]))

    # the last rung is the final live set, whose prior mass shrank by about e^-10
    assert shell.log_z_rungs[-1] == pytest.approx(-run.steps / run.n_live, abs=1.5)


def test_triangle_estimates(triangle_run: NSRun):
    assert triangle_run.support.dimension == 1

    assert ns_evidence(triangle_run) == pytest.approx(0.0, abs=0.25)
    assert ins_evidence(triangle_run, B=0).log_z == pytest.approx(0.0, abs=0.1)
    assert shell_recursive_evidence(triangle_run).log_z == pytest.approx(0.0, abs=0.25)


def test_ins_density_normalized(triangle_run: NSRun):
    # in one dimension the mixture is piecewise constant between interval ends: integrate it exactly
    ends = [triangle_run.support.lower, triangle_run.support.upper]

    for shell in triangle_run.shells:
        half = shell.ellipsoid.axes
        ends.extend([shell.ellipsoid.center - half, shell.ellipsoid.center + half])

    breaks = torch.unique(torch.cat(ends))
    middles = ((breaks[1:] + breaks[:-1]) / 2).unsqueeze(1)

    density = torch.exp(ins_log_density(triangle_run, middles))

    assert float((density * (breaks[1:] - breaks[:-1])).sum()) == pytest.approx(1.0, abs=1e-9)


def test_nested_csv(run: NSRun, tmp_path):
    path = tmp_path / "nested.csv"

    run.to_csv(str(path))

    with open(path) as file:
        rows = list(csv.reader(file))

    assert rows[0][:4] == ["replicate", "shell", "threshold", "overhead"]
    assert len(rows) == 501


@pytest.mark.slow
def test_overhead_at_scale(banana: BananaModel):
    run = nested_run(banana, 125, 1250, expand_factor=1.5, seed=3)

    assert 1.8 <= run.mean_overhead <= 2.8
    assert ns_evidence(run) == pytest.approx(BANANA_LOG_Z, abs=0.5)
    assert ins_evidence(run, seed=3).log_z == pytest.approx(BANANA_LOG_Z, abs=0.2)
