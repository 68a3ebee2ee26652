"""CLI behavior: exit codes, determinism, formats, server round trip.

Everything runs through main(argv) in-process; the server path is exercised
by routing qnv.cli's httpx.post into a FastAPI test client, which keeps the
byte-parity assertion honest without opening sockets.
"""

import json

import pytest
from fastapi.testclient import TestClient

import qnv.cli
from qnv.cli import main
from qnv.service import app

BASE = """
model.e1 = 1.0
model.e2 = -3.0
model.e3 = 2.0
model.y0 = 3.0
claim.kind = capped-call
claim.strike = 1.0
claim.cap = 4.0
claim.horizon = 1.0
engine.n_paths = 2000
engine.n_steps = 32
engine.dt = 0.01
engine.seed = 11
"""

BM = """
model.e1 = 0.0
model.e2 = 0.0
model.e3 = 1.0
model.y0 = 1.0
engine.n_paths = 2000
engine.n_steps = 32
engine.seed = 11
"""


def conf(tmp_path, text, name="run.conf"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# ---------------------------------------------------------------------------
# Happy paths
# ---------------------------------------------------------------------------


def test_classify_json(tmp_path, capsys):
    assert main(["classify", "--config", conf(tmp_path, BASE)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["profile"]["kind"] == "TwoRealRoots"
    assert out["branch"] == "hyperbolic_out"
    assert out["martingality"]["stopped_true"] is False
    assert "strict local" in out["summary"]
    assert out["runtime_ms"] == 0.0


def test_price_all_estimators(tmp_path, capsys):
    path = conf(tmp_path, BASE + "engine.estimator = all\n")
    assert main(["price", "--config", path]) == 0
    out = json.loads(capsys.readouterr().out)
    names = [r["estimator"] for r in out["results"]]
    assert names == ["transform", "euler", "gbm-dual"]
    assert set(out["pairwise_z"]) == {"transform/euler", "transform/gbm-dual", "euler/gbm-dual"}
    for r in out["results"]:
        assert r["claim"]["dollar"]["kind"] == "capped-call"


def test_defect_closed_form(tmp_path, capsys):
    assert main(["defect", "--config", conf(tmp_path, BASE)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "closed-form"
    assert out["defect"] == pytest.approx(0.656233588284752, rel=1e-12)
    assert out["defect_over_y0"] == out["defect"] / 3.0
    assert out["stderr"] == 0.0


def test_defect_monte_carlo_fallback(tmp_path, capsys):
    # no hitting-law closed form at a double root, so the defect is estimated
    path = conf(tmp_path, BM.replace("model.e1 = 0.0", "model.e1 = 1.0").replace("model.e3 = 1.0", "model.e3 = 0.0"))
    assert main(["defect", "--config", path]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "monte-carlo"
    assert out["stderr"] > 0.0
    assert abs(out["defect"] - 0.3173105078629141) < 4.0 * out["stderr"]


def test_defect_zero_for_true_martingale(tmp_path, capsys):
    assert main(["defect", "--config", conf(tmp_path, BM)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "zero"
    assert out["defect"] == 0.0


def test_verify_passes(tmp_path, capsys):
    path = conf(tmp_path, BM.replace("engine.n_paths = 2000", "engine.n_paths = 20000"))
    assert main(["verify", "--config", path]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is True
    assert len(out["checks"]) == 6


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


def test_exit_2_missing_file(tmp_path, capsys):
    assert main(["classify", "--config", str(tmp_path / "absent.conf")]) == 2
    assert "error:" in capsys.readouterr().err


def test_exit_2_bad_config(tmp_path, capsys):
    assert main(["price", "--config", conf(tmp_path, BASE + "engine.warp = 9\n")]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_exit_2_bad_threads(tmp_path, capsys):
    assert main(["price", "--config", conf(tmp_path, BASE), "--threads", "0"]) == 2


def test_exit_3_invalid_model(tmp_path, capsys):
    path = conf(tmp_path, BASE.replace("model.y0 = 3.0", "model.y0 = -1.0"))
    assert main(["classify", "--config", path]) == 3
    assert "error:" in capsys.readouterr().err


def test_exit_5_budget(tmp_path, capsys):
    path = conf(
        tmp_path,
        BASE.replace("engine.n_paths = 2000", "engine.n_paths = 10000000").replace(
            "engine.n_steps = 32", "engine.n_steps = 1000000"
        ),
    )
    assert main(["price", "--config", path]) == 5
    assert "error:" in capsys.readouterr().err


def test_exit_4_verification_failure(tmp_path, capsys, monkeypatch):
    def failing(spec, n_paths, seed, threads, timings=False):
        return {
            "passed": False,
            "checks": [{"name": "stop-swap", "passed": False, "detail": "forced"}],
            "runtime_ms": 0.0,
        }

    monkeypatch.setattr("qnv.cli.verify_payload", failing)
    assert main(["verify", "--config", conf(tmp_path, BM)]) == 4
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is False


# ---------------------------------------------------------------------------
# Output handling
# ---------------------------------------------------------------------------


def test_threads_do_not_change_bytes(tmp_path, capsys):
    path = conf(tmp_path, BASE + "engine.estimator = all\n")
    assert main(["price", "--config", path, "--threads", "1"]) == 0
    one = capsys.readouterr().out
    assert main(["price", "--config", path, "--threads", "4"]) == 0
    four = capsys.readouterr().out
    assert one == four


def test_csv_format(tmp_path, capsys):
    assert main(["price", "--config", conf(tmp_path, BASE), "--format", "csv"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("results.0.estimate,") for line in lines)
    # config-level format choice works the same way
    assert main(["price", "--config", conf(tmp_path, BASE + "output.format = csv\n")]) == 0
    assert capsys.readouterr().out == out


def test_output_file(tmp_path, capsys):
    target = tmp_path / "price.json"
    assert main(["price", "--config", conf(tmp_path, BASE), "--output", str(target)]) == 0
    assert capsys.readouterr().out == ""
    on_disk = json.loads(target.read_text())
    assert on_disk["results"][0]["estimator"] == "transform"


def test_floats_rendered_at_full_precision(tmp_path, capsys):
    path = conf(tmp_path, BM.replace("model.e1 = 0.0", "model.e1 = 1.0").replace("model.e3 = 1.0", "model.e3 = 0.0"))
    assert main(["defect", "--config", path]) == 0
    raw = capsys.readouterr().out
    value = json.loads(raw)["defect"]
    assert f"{value:.17g}" in raw


# ---------------------------------------------------------------------------
# Server mode
# ---------------------------------------------------------------------------


@pytest.fixture()
def fake_server(monkeypatch):
    client = TestClient(app)

    def fake_post(url, json=None, timeout=None):
        path = "/" + url.split("/", 3)[3]
        return client.post(path, json=json)

    monkeypatch.setattr(qnv.cli.httpx, "post", fake_post)


@pytest.mark.parametrize("command", ["classify", "price", "defect"])
def test_server_mode_matches_in_process(tmp_path, capsys, fake_server, command):
    path = conf(tmp_path, BASE + "engine.estimator = all\n")
    assert main([command, "--config", path]) == 0
    local = capsys.readouterr().out
    assert main([command, "--config", path, "--server", "http://testserver"]) == 0
    remote = capsys.readouterr().out
    assert remote == local


def test_server_mode_maps_error_codes(tmp_path, capsys, fake_server):
    path = conf(tmp_path, BASE.replace("model.y0 = 3.0", "model.y0 = -1.0"))
    assert main(["classify", "--config", path, "--server", "http://testserver"]) == 3
    assert "error:" in capsys.readouterr().err


def test_server_unreachable_is_reported(tmp_path, capsys):
    path = conf(tmp_path, BASE)
    code = main(["classify", "--config", path, "--server", "http://127.0.0.1:1"])
    assert code == 1
    assert "cannot reach" in capsys.readouterr().err
