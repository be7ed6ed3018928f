import csv
import json

import numpy as np
import pytest

from gaugeinterp.cli import EXIT_CONFIG, EXIT_OK, expand_grid, fmt_float, main


def run(tmp_path, command, cfg, *extra):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    return main([command, str(path), *extra])


def read_log(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_fmt_float_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 2.0):
        assert float(fmt_float(x)) == x


def test_expand_grid():
    assert expand_grid([0.1, 0.2]) == [0.1, 0.2]
    assert expand_grid({"start": 0, "stop": 1, "num": 3}) == [0.0, 0.5, 1.0]
    assert expand_grid({"start": 0, "stop": 1, "num": 0}) == []


def test_malformed_configs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["gs-solve", str(bad)]) == EXIT_CONFIG
    assert run(tmp_path, "gs-solve", {"variant": "u1", "l_max": 1, "N": 2, "output": "x"}) == EXIT_CONFIG
    assert run(tmp_path, "gs-solve", {"variant": "so3", "l_max": 1, "N": 2, "g_inv2": 1,
                                      "output": "x"}) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["gs-solve", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_gs_solve(tmp_path):
    out = tmp_path / "gs.json"
    cfg = {"variant": "su2", "l_max": 0.5, "N": 3, "g_inv2": 0.02, "output": str(out)}
    assert run(tmp_path, "gs-solve", cfg) == EXIT_OK
    first = json.loads(out.read_text())
    assert first["fidelity_strong_coupling"] > 0.99
    assert first["solver"] == "ed" and first["D"] is None
    events = [r["event"] for r in read_log(tmp_path / "gs.json.log.jsonl")]
    assert events[0] == "start" and "ground_state" in events
    assert run(tmp_path, "gs-solve", cfg) == EXIT_OK
    second = json.loads(out.read_text())
    first.pop("timestamp"), second.pop("timestamp")
    assert first == second


def test_gs_solve_overrides(tmp_path):
    out = tmp_path / "o.json"
    cfg = {"variant": "u1", "l_max": 1, "N": 3, "g_inv2": 1.0, "output": "unused"}
    assert run(tmp_path, "gs-solve", cfg, "--output", str(out), "--set", "solver=\"dmrg\"",
               "--set", "D=9", "--log", str(tmp_path / "side.jsonl")) == EXIT_OK
    res = json.loads(out.read_text())
    assert res["solver"] == "dmrg" and res["D"] == 9
    assert (tmp_path / "side.jsonl").exists()


def test_gs_solve_rejects_huge_ed(tmp_path):
    cfg = {"variant": "su2", "l_max": 1.5, "N": 6, "g_inv2": 1, "output": str(tmp_path / "o")}
    assert run(tmp_path, "gs-solve", cfg) == EXIT_CONFIG


def test_fidelity_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg = {"variant": "u1", "l_max": 1, "N": 2, "g0_inv2": 0.5, "g_inv2_grid": [0.5, 1.0],
           "lambda_grid": {"start": 0.2, "stop": 0.6, "num": 2}, "output": str(out)}
    assert run(tmp_path, "fidelity-sweep", cfg) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    assert rows[0]["solver"] == "ed" and rows[0]["D"] == "" and rows[0]["N"] == "2"
    diag = [r for r in rows if float(r["g_inv2"]) == 0.5]
    assert all(float(r["f_baseline"]) == pytest.approx(1) for r in diag)
    argmax = [r for r in read_log(tmp_path / "sweep.csv.log.jsonl") if r["event"] == "argmax"]
    assert len(argmax) == 2
    first = out.read_bytes()
    assert run(tmp_path, "fidelity-sweep", cfg) == EXIT_OK
    assert out.read_bytes() == first


def test_fidelity_sweep_empty_grid(tmp_path):
    out = tmp_path / "empty.csv"
    cfg = {"variant": "u1", "l_max": 1, "N": 2, "g0_inv2": 0.5, "g_inv2_grid": [],
           "lambda_grid": [0.3], "output": str(out)}
    assert run(tmp_path, "fidelity-sweep", cfg) == EXIT_OK
    assert out.read_text().splitlines() == [
        "g0_inv2,g_inv2,lambda,f_finegrained,f_baseline,energy_density,isometry_defect,solver,N,D,l_max"]


def test_interp_flat_stays_flat(tmp_path):
    out = tmp_path / "fine.json"
    cfg = {"lattice": {"generate": "flat", "variant": "su2", "shape": [3, 3]}, "iterations": 2,
           "output": str(out), "flux_csv": str(tmp_path / "flux.csv")}
    assert run(tmp_path, "interp", cfg) == EXIT_OK
    fine = json.loads(out.read_text())
    assert fine["shape"] == [9, 9]
    fluxes = [float(r["flux"]) for r in csv.DictReader((tmp_path / "flux.csv").open())]
    assert len(fluxes) == 64 and max(fluxes) == 0


@pytest.mark.parametrize("m", [1, 3])
def test_interp_single_flux(tmp_path, m):
    out = tmp_path / "fine.json"
    cfg = {"lattice": {"generate": "single_flux", "variant": "u1", "shape": [2, 2], "flux": 1.2},
           "iterations": m, "output": str(out), "flux_csv": str(tmp_path / "flux.csv")}
    assert run(tmp_path, "interp", cfg) == EXIT_OK
    fluxes = np.array([float(r["flux"]) for r in csv.DictReader((tmp_path / "flux.csv").open())])
    assert np.allclose(fluxes, 1.2 / 4 ** m, atol=1e-9)


def test_interp_lattice_file_round_trip(tmp_path):
    from gaugeinterp.classical import LatticeConfig
    lat = LatticeConfig.random("su2", 2, 2, np.random.default_rng(0))
    src = tmp_path / "lat.json"
    src.write_text(lat.dumps())
    out = tmp_path / "fine.json"
    assert run(tmp_path, "interp", {"lattice": str(src), "iterations": 0, "output": str(out)}) == EXIT_OK
    assert np.allclose(LatticeConfig.from_json(json.loads(out.read_text())).links, lat.links)
    assert run(tmp_path, "interp", {"lattice": str(tmp_path / "nope.json"), "output": str(out)}) == EXIT_CONFIG


def test_mera_expect(tmp_path):
    out = tmp_path / "mera.json"
    cfg = {"variant": "su2", "seed": 4, "samples": 4000, "output": str(out), "records": [
        {"observable": "flux", "m": 2, "methods": ["closed_form", "quadrature", "monte_carlo"]},
        {"observable": "flux_product", "m": 1, "plaquettes": [[0, 0], [1, 1]], "methods": ["closed_form"]},
        {"observable": "trace_polynomial", "m": 1, "coeffs": [0, 1], "methods": ["closed_form"]},
        {"observable": "wilson_loop", "m": 1, "loop": [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]],
         "lambda": 0},
    ]}
    assert run(tmp_path, "mera-expect", cfg) == EXIT_OK
    recs = json.loads(out.read_text())
    assert [r["method"] for r in recs] == ["closed_form", "quadrature", "monte_carlo",
                                           "closed_form", "closed_form", "exact"]
    assert recs[0]["prefactor"] == "1/16"
    assert recs[0]["value"] == pytest.approx(np.pi / 32)
    assert recs[1]["value"] == pytest.approx(np.pi / 32, abs=1e-8)
    assert abs(recs[2]["value"] - np.pi / 32) < 4 * recs[2]["stderr"]
    assert recs[-1]["value"] == 0
    text = out.read_text()
    assert run(tmp_path, "mera-expect", cfg) == EXIT_OK
    assert out.read_text() == text


def test_mera_expect_bad_record(tmp_path):
    cfg = {"output": str(tmp_path / "o"), "records": [{"observable": "trace_polynomial", "m": 1}]}
    assert run(tmp_path, "mera-expect", cfg) == EXIT_CONFIG
    cfg = {"output": str(tmp_path / "o"), "records": [{"observable": "flux", "m": 1, "lambda": 0}]}
    assert run(tmp_path, "mera-expect", cfg) == EXIT_CONFIG


def test_reduce_graph(tmp_path):
    out = tmp_path / "petal.json"
    assert run(tmp_path, "reduce-graph", {"graph": {"grid": [3, 3]}, "output": str(out)}) == EXIT_OK
    res = json.loads(out.read_text())
    assert res["loops"] == 4 and res["root"] == "0,0"
    loop = {"vertices": ["a"], "edges": [{"name": "l", "source": "a", "target": "a"}]}
    assert run(tmp_path, "reduce-graph", {"graph": loop, "output": str(out)}) == EXIT_OK
    assert json.loads(out.read_text())["gates"] == []
    split = {"vertices": ["a", "b"], "edges": []}
    assert run(tmp_path, "reduce-graph", {"graph": split, "output": str(out)}) == EXIT_CONFIG
