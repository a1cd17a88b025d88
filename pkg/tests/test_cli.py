import json

import numpy as np
import pytest

from stoclot.cli import json_dumps, main
from stoclot.core import DemandChance, demands_to_json_dict, load_instance


def run(args):
    return main(args)


def write_demands(path, inst, p, r=None, t=None):
    ch = DemandChance(np.full(inst.n_clients, p),
                      np.full(inst.n_clients, r)) if r is not None else None
    ex = None
    if t is not None:
        from stoclot.core import DemandExpected
        ex = DemandExpected(np.full(inst.n_clients, t), inst)
    path.write_text(json.dumps(demands_to_json_dict(inst, ch, ex)))


def test_json_dumps_roundtrip_and_determinism():
    blob = json_dumps({"a": 0.1 + 0.2, "b": [1, 2.5]})
    assert json.loads(blob)["a"] == 0.1 + 0.2
    assert blob == json_dumps({"b": [1, 2.5], "a": 0.1 + 0.2})


def test_gen_and_solve_lottery(tmp_path):
    inst_path = tmp_path / "inst.json"
    assert run(["gen", "--kind", "uniform_gadget", "--n", "5", "--k", "2",
                "--out", str(inst_path)]) == 0
    inst = load_instance(inst_path)
    assert inst.n_facilities == 5 and inst.k == 2

    out = tmp_path / "sol.json"
    assert run(["solve", "lottery", "--instance", str(inst_path),
                "--algo", "partial", "--seed", "7", "--samples", "1",
                "--out", str(out)]) == 0
    sol = json.loads(out.read_text())
    assert 1 <= len(sol["open"]) <= 2

    rep = tmp_path / "rep.json"
    assert run(["verify", "lottery", "--instance", str(inst_path),
                "--algo", "scc", "--seed", "3", "--samples", "2000",
                "--out", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert report["passed"]
    assert report["n_samples"] == 2000


def test_byte_identical_outputs(tmp_path):
    inst_path = tmp_path / "inst.json"
    run(["gen", "--kind", "random_metric", "--n", "8", "--scc", "--k", "2",
         "--seed", "5", "--out", str(inst_path)])
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        assert run(["solve", "lottery", "--instance", str(inst_path),
                    "--algo", "general", "--seed", "11", "--samples", "1500",
                    "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_solve_chance_and_dump_lp(tmp_path):
    inst_path = tmp_path / "inst.json"
    run(["gen", "--kind", "random_metric", "--n", "7", "--scc", "--k", "2",
         "--seed", "2", "--out", str(inst_path)])
    inst = load_instance(inst_path)
    dem_path = tmp_path / "dem.json"
    write_demands(dem_path, inst, 0.6, r=float(inst.D.max()))
    out = tmp_path / "out.json"
    lp = tmp_path / "model.lp"
    assert run(["solve", "chance", "--instance", str(inst_path),
                "--demands", str(dem_path), "--algo", "faithful",
                "--seed", "1", "--out", str(out), "--dump-lp", str(lp)]) == 0
    assert len(json.loads(out.read_text())["open"]) <= 2
    assert "Subject To" in lp.read_text()
    for algo in ("half-homog", "iterative"):
        assert run(["solve", "chance", "--instance", str(inst_path),
                    "--demands", str(dem_path), "--algo", algo,
                    "--seed", "1", "--out", str(out)]) == 0


def test_determinize_modes_and_exit_codes(tmp_path):
    inst_path = tmp_path / "inst.json"
    run(["gen", "--kind", "uniform_gadget", "--n", "3", "--k", "2",
         "--out", str(inst_path)])
    inst = load_instance(inst_path)
    dem = tmp_path / "dem.json"
    write_demands(dem, inst, None, t=2 / 3)
    out = tmp_path / "det.json"
    assert run(["determinize", "--instance", str(inst_path), "--demands",
                str(dem), "--mode", "scalefree", "--alpha", "1.5",
                "--out", str(out)]) == 0
    got = json.loads(out.read_text())
    assert got["beta_achieved"] <= 6.0 + 1e-9
    assert run(["determinize", "--instance", str(inst_path), "--demands",
                str(dem), "--mode", "exact", "--out", str(out)]) == 0
    assert run(["determinize", "--instance", str(inst_path), "--demands",
                str(dem), "--mode", "log", "--epsilon", "0.4",
                "--out", str(out)]) == 0

    # infeasible targets: the exact mode returns the witness with exit 2
    bad = tmp_path / "bad.json"
    write_demands(bad, inst, None, t=1e-6)
    code = run(["determinize", "--instance", str(inst_path), "--demands",
                str(bad), "--mode", "exact", "--out", str(out)])
    assert code == 2
    assert json.loads(out.read_text())["infeasible"]


def test_solve_expected_and_sparsify(tmp_path):
    inst_path = tmp_path / "inst.json"
    run(["gen", "--kind", "uniform_gadget", "--n", "4", "--k", "2",
         "--out", str(inst_path)])
    inst = load_instance(inst_path)
    dem = tmp_path / "dem.json"
    write_demands(dem, inst, None, t=0.5)
    out = tmp_path / "lott.json"
    assert run(["solve", "expected", "--instance", str(inst_path),
                "--demands", str(dem), "--epsilon", "0.5",
                "--plugin", "bruteforce", "--max-rounds", "50",
                "--reduce-support", "--out", str(out)]) == 0
    lott = json.loads(out.read_text())
    assert abs(sum(a["prob"] for a in lott["atoms"]) - 1) < 1e-9
    assert len(lott["atoms"]) <= inst.n_clients + 1

    assert run(["sparsify", "--instance", str(inst_path), "--algo",
                "partial", "--epsilon", "1.0", "--seed", "3",
                "--out", str(out)]) == 0
    assert json.loads(out.read_text())["atoms"]


def test_certify_cli(tmp_path):
    out = tmp_path / "cert.json"
    assert run(["certify", "--mode", "scc", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["bound"] <= 1.60794
    assert run(["certify", "--mode", "partial", "--eps-grid", "2^-5",
                "--L", "3", "--out", str(out)]) == 0
    cert = json.loads(out.read_text())
    assert cert["bound"] < 1.75
    assert cert["parameters"]["levels"] == 3


def test_usage_errors():
    assert run(["gen", "--kind", "uniform_gadget"]) == 3  # missing --k
    assert run(["solve", "chance", "--instance", "/nonexistent",
                "--demands", "/nonexistent", "--algo", "faithful"]) != 0


def test_env_seed(tmp_path, monkeypatch):
    inst_path = tmp_path / "inst.json"
    run(["gen", "--kind", "uniform_gadget", "--n", "4", "--k", "2",
         "--out", str(inst_path)])
    out1 = tmp_path / "o1.json"
    out2 = tmp_path / "o2.json"
    monkeypatch.setenv("STOCLOT_SEED", "99")
    run(["solve", "lottery", "--instance", str(inst_path), "--algo",
         "general", "--out", str(out1)])
    run(["solve", "lottery", "--instance", str(inst_path), "--algo",
         "general", "--seed", "99", "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_resource_error_maps_to_exit_4(monkeypatch):
    from stoclot import cli
    from stoclot.errors import ResourceError

    def boom(args):
        raise ResourceError("tuple cap")

    monkeypatch.setitem(cli.__dict__, "cmd_certify", boom)
    parser_args = ["certify", "--mode", "scc"]
    # rebuild the parser so the monkeypatched handler is picked up
    monkeypatch.setattr(cli, "build_parser", lambda: _patched_parser(boom))
    assert cli.main(parser_args) == 4


def _patched_parser(handler):
    import argparse
    p = argparse.ArgumentParser()
    sub = p.add_subparsers(dest="verb", required=True)
    c = sub.add_parser("certify")
    c.add_argument("--mode")
    c.set_defaults(func=handler)
    return p
