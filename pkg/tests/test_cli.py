"""CLI: config handling, experiment dispatch, manifest reproducibility."""

import json

import numpy as np
import pytest

from affinelab.cli import main, run
from affinelab.models import preset
from affinelab.sde import SchemeSettings, simulate_ensemble, write_samples


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def test_validate_preset(tmp_path):
    cfg = write_config(tmp_path, {"model": "cir", "experiment": "validate", "out": str(tmp_path / "o")})
    assert run(cfg) == 0
    payload = json.loads((tmp_path / "o" / "validation.json").read_text())
    assert payload["admissible"] is True
    assert payload["violations"] == []


def test_validate_inline_violation(tmp_path):
    model = {
        "m": 1, "n": 1,
        "a": [[0.0, 0.0], [0.0, 1.0]],
        "alpha": [[[0.0, 0.0], [0.0, 0.0]]],
        "b": [0.0, 0.0],
        "beta": [[-1.0, 1.0], [0.0, -1.0]],  # feeds real into branching
    }
    cfg = write_config(tmp_path, {"model": model, "experiment": "validate", "out": str(tmp_path / "o")})
    assert run(cfg) == 1
    payload = json.loads((tmp_path / "o" / "validation.json").read_text())
    assert payload["admissible"] is False


def test_malformed_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(bad) == 2
    missing_experiment = write_config(tmp_path, {"model": "cir"})
    assert run(missing_experiment) == 2
    unknown = write_config(tmp_path, {"model": "cir", "experiment": "nope"}, "u.json")
    assert run(unknown) == 2


def test_riccati_csv_matches_closed_form(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(
        tmp_path,
        {
            "model": "cir",
            "experiment": "riccati",
            "u": [-1.0],
            "t_end": 10.0,
            "out": str(out),
        },
    )
    assert run(cfg) == 0
    rows = (out / "riccati.csv").read_text().strip().splitlines()
    assert rows[0] == "t,re_phi,im_phi,re_psi1,im_psi1"
    data = np.loadtxt(rows[1:], delimiter=",")
    t, psi = data[:, 0], data[:, 3]
    e = np.exp(-0.5 * t)
    closed = -e / (1.0 - (-1.0 * 0.25 / -0.5) * (e - 1.0))
    assert np.max(np.abs(psi - closed)) < 1e-7


def test_mean_experiment_and_overrides(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(
        tmp_path,
        {
            "model": "cir",
            "experiment": "mean",
            "t": 1.0,
            "n_paths": 2000,
            "scheme": {"step": 0.00390625, "horizon": 1.0},
            "out": str(out),
        },
    )
    assert main(["--config", str(cfg), "--seed", "3"]) == 0
    payload = json.loads((out / "mean.json").read_text())
    assert payload["passed"] is True
    # dotted overrides, including a nested path
    code = main(
        ["--config", str(cfg), "--seed", "3", "--set", "n_paths=4000",
         "--set", "t=2.0", "--set", "scheme.horizon=2.0"]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["t"] == 2.0
    assert manifest["n_paths"] == 4000
    assert manifest["scheme"]["horizon"] == 2.0
    # record time beyond the horizon is a configuration error
    assert main(["--config", str(cfg), "--set", "t=3.0"]) == 2


def test_manifest_rerun_bit_exact(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    cfg = write_config(
        tmp_path,
        {
            "model": "stoch-vol",
            "experiment": "mean",
            "t": 0.5,
            "n_paths": 500,
            "seed": 11,
            "scheme": {"step": 0.0078125, "horizon": 0.5},
            "out": str(out_a),
            "workers": 1,
        },
    )
    assert run(cfg) == 0
    # rerun FROM THE MANIFEST with a different worker count
    manifest_path = out_a / "manifest.json"
    assert run(manifest_path, overrides=[f'out="{out_b}"', "workers=3"]) == 0
    for name in ("mean.json",):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    # manifests differ only in out/workers
    ma = json.loads((out_a / "manifest.json").read_text())
    mb = json.loads((out_b / "manifest.json").read_text())
    for key in ("model", "seed", "t", "n_paths", "scheme", "start"):
        assert ma[key] == mb[key]


def test_simulate_trajectory_and_ensemble(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(
        tmp_path,
        {
            "model": "cir",
            "experiment": "simulate",
            "scheme": {"step": 0.25, "horizon": 1.0},
            "out": str(out),
        },
    )
    assert run(cfg) == 0
    assert (out / "trajectory.csv").exists()
    cfg2 = write_config(
        tmp_path,
        {
            "model": "cir",
            "experiment": "simulate",
            "n_paths": 50,
            "record_times": [0.5, 1.0],
            "scheme": {"step": 0.25, "horizon": 1.0},
            "out": str(out),
            "seed": 5,
        },
        "c2.json",
    )
    assert run(cfg2) == 0
    assert (out / "samples_0.bin").exists() and (out / "samples_1.bin").exists()
    assert (out / "ensemble.csv").exists()


def test_wasserstein_experiment_consumes_dumps(tmp_path):
    p = preset("cir").params
    st = SchemeSettings(step=2.0**-6, horizon=1.0)
    e1 = simulate_ensemble(p, [1.0], st, 64, 1, record_times=[1.0])
    e2 = simulate_ensemble(p, [4.0], st, 64, 2, record_times=[1.0])
    write_samples(e1.at(1.0), tmp_path / "p.bin")
    write_samples(e2.at(1.0), tmp_path / "q.bin")
    out = tmp_path / "o"
    cfg = write_config(
        tmp_path,
        {
            "model": "cir",
            "experiment": "wasserstein",
            "pairs": [{"t": 1.0, "p": str(tmp_path / "p.bin"), "q": str(tmp_path / "q.bin")}],
            "metric": {"kind": "kappa", "kappa": 1.0},
            "out": str(out),
        },
    )
    assert run(cfg) == 0
    lines = (out / "wasserstein.csv").read_text().strip().splitlines()
    assert lines[0] == "t,distance"
    t, w = lines[1].split(",")
    assert float(w) > 0


def test_invariant_experiment(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(
        tmp_path,
        {"model": "cir", "experiment": "invariant", "u": [-1.0], "out": str(out)},
    )
    assert run(cfg) == 0
    payload = json.loads((out / "invariant.json").read_text())
    want = (1.0 - (-1.0) * 0.25 / 0.5) ** (-4.0)
    assert payload["value"]["re"] == pytest.approx(want, rel=1e-6)
