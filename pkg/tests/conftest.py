# -*- coding: utf-8 -*-

import json

import pytest

from queuelab.model import ModelSpec, ServiceDistribution


def exponential_model(lam, mu, lam0=None) -> ModelSpec:
    """Exponential services with rates ``mu``; ``lam0`` defaults to 0.5 for every class."""
    k = len(mu)
    return ModelSpec(lam, [0.5] * k if lam0 is None else lam0, [ServiceDistribution.exponential(m) for m in mu])


@pytest.fixture
def mm1():
    """Single class, lambda = 0.5, mu = 1: rho = 0.5, mean busy period 2."""
    return exponential_model([[0.5]], [1.0])


@pytest.fixture
def symmetric():
    """Two exponential classes with mu = 2 feeding each other at rate 1: rho = 0.5."""
    return exponential_model([[0.0, 1.0], [1.0, 0.0]], [2.0, 2.0])


@pytest.fixture
def critical():
    return exponential_model([[0.0, 2.0], [2.0, 0.0]], [2.0, 2.0])


@pytest.fixture
def supercritical():
    return exponential_model([[0.0, 3.0], [3.0, 0.0]], [2.0, 2.0])


@pytest.fixture
def no_feedback():
    """Lambda = 0: every busy period is a single service."""
    return exponential_model([[0.0, 0.0], [0.0, 0.0]], [1.0, 3.0], lam0=[1.0, 1.0])


@pytest.fixture
def write_model(tmp_path):
    def write(spec_or_record, name='model.json'):
        record = spec_or_record.to_record() if isinstance(spec_or_record, ModelSpec) else spec_or_record
        path = tmp_path / name
        path.write_text(json.dumps(record))
        return str(path)

    return write
