import json

import numpy as np
import pytest

from seppnet import io as sio
from seppnet.hawkes import EventLog
from seppnet.model import (
    BasisSet,
    CountMatrix,
    InfluenceModel,
    InputFormatError,
    Saturation,
    bounds_for,
)


def sample_model():
    A = np.array([[0.1, -0.2], [0.0, 0.30000000000000004]])
    nu = np.array([0.5, -1.25])
    return InfluenceModel(nu, A, BasisSet.geometric(0.25), Saturation.clip(6), bounds_for(A, nu))


def test_counts_csv_round_trip(tmp_path):
    X = CountMatrix(np.array([[1, 2], [0, 7]]))
    path = tmp_path / "c.csv"
    sio.write_counts_csv(path, X)
    back = sio.read_counts_csv(path)
    assert np.array_equal(back.counts, X.counts)
    assert path.read_text().splitlines()[0] == "node_0,node_1"


def test_counts_csv_error_codes(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("node_0\n-1\n")
    with pytest.raises(InputFormatError) as e:
        sio.read_counts_csv(path)
    assert e.value.code == "E_COUNTS_NEGATIVE"

    path.write_text("x,y\n1,2\n")
    with pytest.raises(InputFormatError) as e:
        sio.read_counts_csv(path)
    assert e.value.code == "E_COUNTS_HEADER"

    path.write_text("node_0,node_1\n1\n")
    with pytest.raises(InputFormatError) as e:
        sio.read_counts_csv(path)
    assert e.value.code == "E_COUNTS_SHAPE"

    path.write_text("node_0\n1.5\n")
    with pytest.raises(InputFormatError) as e:
        sio.read_counts_csv(path)
    assert e.value.code == "E_COUNTS_NONINTEGER"

    path.write_text("")
    with pytest.raises(InputFormatError) as e:
        sio.read_counts_csv(path)
    assert e.value.code == "E_COUNTS_EMPTY"


def test_model_json_round_trip(tmp_path):
    model = sample_model()
    path = tmp_path / "m.json"
    sio.write_model_json(path, model)
    back = sio.read_model_json(path)
    assert np.array_equal(back.A, model.A)
    assert np.array_equal(back.nu, model.nu)
    assert back.basis == model.basis
    assert back.saturation.u == model.saturation.u
    assert back.bounds == model.bounds


def test_model_json_bad_input(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InputFormatError) as e:
        sio.read_model_json(path)
    assert e.value.code == "E_MODEL_JSON"

    path.write_text(json.dumps({"nu": [0.0]}))
    with pytest.raises(InputFormatError) as e:
        sio.read_model_json(path)
    assert e.value.code == "E_MODEL_FORMAT"


def test_events_csv_round_trip(tmp_path):
    log = EventLog(events=((0.25, 0), (1.5, 1)), M=2, horizon=3.0)
    path = tmp_path / "e.csv"
    sio.write_events_csv(path, log)
    back = sio.read_events_csv(path, M=2, horizon=3.0)
    assert back.events == log.events


def test_events_csv_errors(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("when,who\n1,0\n")
    with pytest.raises(InputFormatError) as e:
        sio.read_events_csv(path, M=2)
    assert e.value.code == "E_EVENTS_HEADER"

    path.write_text("time,node\nabc,0\n")
    with pytest.raises(InputFormatError) as e:
        sio.read_events_csv(path, M=2)
    assert e.value.code == "E_EVENTS_FORMAT"


def test_table_csv_float_precision(tmp_path):
    path = tmp_path / "t.csv"
    val = 0.1 + 0.2
    sio.write_table_csv(path, [{"x": val}], ["x"])
    text = path.read_text().splitlines()[1]
    assert float(text) == val


def test_manifest_sidecar(tmp_path):
    out = tmp_path / "res.csv"
    out.write_text("node_0\n1\n")
    mpath = sio.write_manifest(out, "simulate", {"T": 10}, 7, ["model.json"], [str(out)], 0.5)
    data = json.loads(mpath.read_text())
    assert data["subcommand"] == "simulate"
    assert data["seed"] == 7
    assert str(mpath).endswith(".manifest.json")
