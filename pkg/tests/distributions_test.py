# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from queuelab.model import ServiceDistribution
from queuelab import rng

LAWS = [
    ServiceDistribution.exponential(2.0),
    ServiceDistribution.deterministic(0.7),
    ServiceDistribution.erlang(3, 2.0),
    ServiceDistribution.pareto(3.0, 1.0),
    ServiceDistribution.lognormal(0.0, 0.5),
    ServiceDistribution.weibull(1.5, 2.0),
]


@pytest.mark.parametrize('dist', LAWS, ids=lambda dist: dist.kind.value)
def test_sample_mean(dist):
    draws = dist.sample(rng.stream(11), 400000)

    assert draws.shape == (400000,)
    assert np.all(draws > 0)
    assert abs(draws.mean() - dist.mean()) < 0.01 * dist.mean()


@pytest.mark.parametrize('dist', LAWS, ids=lambda dist: dist.kind.value)
def test_lst_properties(dist):
    s = np.array([0.0, 0.1, 1.0, 5.0])
    values = dist.lst(s)

    assert values[0] == pytest.approx(1.0)
    assert np.all(values > 0) and np.all(values <= 1)
    assert np.all(np.diff(values) < 0)


def test_closed_form_lst():
    assert ServiceDistribution.exponential(2.0).lst(1.0) == pytest.approx(2 / 3)
    assert ServiceDistribution.erlang(2, 1.0).lst(1.0) == pytest.approx(0.25)
    assert ServiceDistribution.deterministic(2.0).lst(0.5) == pytest.approx(math.exp(-1))


def test_quadrature_matches_closed_form():
    dist = ServiceDistribution.exponential(1.5)
    for s in (0.2, 1.0, 7.0):
        assert dist._quad_lst(s) == pytest.approx(float(dist.lst(s)), abs=1e-10)


def test_pareto_moments_and_tail():
    dist = ServiceDistribution.pareto(2.5, 0.3)

    assert dist.mean() == pytest.approx(0.5)
    assert dist.mu == pytest.approx(2.0)
    assert float(dist.sf(0.6)) == pytest.approx(0.5 ** 2.5)
    assert float(dist.sf(0.1)) == 1.0
    assert dist.is_pareto and dist.is_subexponential


def test_heavy_weibull_only_below_one():
    assert ServiceDistribution.weibull(0.5, 1.0).is_subexponential
    assert not ServiceDistribution.weibull(1.5, 1.0).is_subexponential
    assert not ServiceDistribution.exponential(1.0).is_subexponential


def test_problems():
    assert ServiceDistribution.pareto(0.9, 1.0).problems() == ['infinite mean service time']
    assert ServiceDistribution.pareto(0.9, 1.0).mean() == math.inf
    assert ServiceDistribution.exponential(-1.0).problems()
    assert ServiceDistribution.erlang(1.5, 1.0).problems()
    assert ServiceDistribution.lognormal(0.0, 1.0).problems() == []


def test_record_round_trip():
    for dist in LAWS:
        assert ServiceDistribution.from_record(dist.to_record()) == dist


def test_bad_records():
    with pytest.raises(ServiceDistribution.Invalid):
        ServiceDistribution.from_record({'rate': 1.0})
    with pytest.raises(ServiceDistribution.Invalid):
        ServiceDistribution.from_record({'kind': 'gamma', 'rate': 1.0})
    with pytest.raises(ServiceDistribution.Invalid):
        ServiceDistribution.from_record({'kind': 'exponential', 'mean': 1.0})
