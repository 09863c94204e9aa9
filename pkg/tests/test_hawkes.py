import numpy as np
import pytest

from seppnet.hawkes import EventLog, discretize, likelihood_gap, per_model_gap
from seppnet.model import (
    BasisSet,
    InfluenceModel,
    InputFormatError,
    ParameterError,
    Saturation,
    bounds_for,
)


def random_model(M, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-0.2, 0.2, size=(M, M))
    nu = rng.uniform(-0.5, 0.5, size=M)
    return InfluenceModel(nu, A, BasisSet.geometric(0.3), Saturation.clip(6), bounds_for(A, nu))


def random_log(M, seed, n=60, horizon=20.0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0.0, horizon, size=n))
    nodes = rng.integers(0, M, size=n)
    return EventLog(events=tuple(zip(times.tolist(), nodes.tolist())), M=M, horizon=horizon)


# ---------------------------------------------------------------------------
# EventLog validation
# ---------------------------------------------------------------------------


def test_event_log_rejects_unsorted():
    with pytest.raises(InputFormatError) as e:
        EventLog(events=((1.0, 0), (0.5, 0)), M=1, horizon=2.0)
    assert e.value.code == "E_EVENT_ORDER"


def test_event_log_rejects_past_horizon():
    with pytest.raises(InputFormatError) as e:
        EventLog(events=((2.0, 0),), M=1, horizon=2.0)
    assert e.value.code == "E_EVENT_HORIZON"


def test_event_log_rejects_bad_node():
    with pytest.raises(InputFormatError) as e:
        EventLog(events=((0.5, 3),), M=2, horizon=2.0)
    assert e.value.code == "E_EVENT_NODE"


def test_event_log_rejects_negative_time():
    with pytest.raises(InputFormatError) as e:
        EventLog(events=((-0.1, 0),), M=1, horizon=2.0)
    assert e.value.code == "E_EVENT_TIME"


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------


def test_discretize_empty_log():
    X = discretize(EventLog(events=(), M=2, horizon=3.0), 1.0)
    assert X.counts.shape == (3, 2)
    assert np.all(X.counts == 0)


def test_discretize_half_open_bins():
    log = EventLog(events=((0.5, 0), (1.5, 0)), M=1, horizon=2.0)
    X = discretize(log, 1.0)
    assert X.counts[:, 0].tolist() == [1, 1]


def test_discretize_boundary_goes_right():
    log = EventLog(events=((1.0, 0),), M=1, horizon=2.0)
    X = discretize(log, 1.0)
    assert X.counts[:, 0].tolist() == [0, 1]


def test_discretize_conserves_counts():
    log = random_log(3, seed=1, n=100)
    X = discretize(log, 0.7)
    per_node = np.bincount([n for _, n in log.events], minlength=3)
    assert np.array_equal(X.counts.sum(axis=0), per_node)


def test_discretize_refinement_consistency():
    log = random_log(2, seed=2, n=80, horizon=16.0)
    fine = discretize(log, 0.5).counts
    coarse = discretize(log, 1.0).counts
    paired = fine.reshape(-1, 2, 2).sum(axis=1)
    assert np.array_equal(paired, coarse)


def test_discretize_rejects_bad_delta():
    with pytest.raises(ParameterError):
        discretize(random_log(2, seed=3), 0.0)


# ---------------------------------------------------------------------------
# Likelihood identity
# ---------------------------------------------------------------------------


def test_per_model_gap_is_count_times_log_delta():
    log = random_log(3, seed=4, n=120)
    model = random_model(3, seed=5)
    for delta in (0.25, 1.0, 2.0):
        gap = per_model_gap(log, model, delta)
        assert gap == pytest.approx(len(log.events) * np.log(delta), abs=1e-9)


def test_likelihood_gap_model_independent():
    log = random_log(4, seed=6, n=150)
    a = random_model(4, seed=7)
    b = random_model(4, seed=8)
    assert abs(likelihood_gap(log, a, b, 0.25)) <= 1e-9
