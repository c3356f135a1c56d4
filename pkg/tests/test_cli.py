import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from alh.cli import main, parse_complex, parse_z_grid
from alh.lattice import loads_state, random_state


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_complex():
    assert parse_complex("2.0") == 2
    assert parse_complex("1.5+0.5i") == 1.5 + 0.5j
    assert parse_complex("3j") == 3j
    assert parse_complex("-i") == -1j


def test_parse_z_grid():
    assert parse_z_grid("single:2.0") == [2.0]
    zs = parse_z_grid("1:2:2,0:1.5:3")
    assert len(zs) == 6
    assert zs[0] == 1 and abs(zs[-1] - 2 * np.exp(1.5j)) < 1e-15


def test_gen_pair_then_conserved(tmp_path, capsys):
    f = tmp_path / "s.json"
    assert main(["gen", "--kind", "pair", "--r0", "0.1", "--q1", "0.2", "--n", "32", "-o", str(f)]) == 0
    code, out, _ = run(["conserved", "--state", str(f)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["C1"][0] == pytest.approx(0.02, abs=1e-17) and doc["C1"][1] == 0
    assert set(doc) == {"H0", "C0", "C1", "C2", "C1hat", "C2hat", "H_AL"}


def test_gen_zero_then_scatter_from_stdin(capsys, monkeypatch):
    _, state, _ = run(["gen", "--kind", "zero", "--n", "16"], capsys)
    code, out, _ = run(["scatter", "--z-grid", "single:2.0"], capsys, state, monkeypatch)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["z_re", "z_im", "a_re", "a_im", "ahat_re", "ahat_im", "b_re", "b_im", "C0_re", "C0_im"]
    assert float(rows[0]["a_re"]) == 1 and float(rows[0]["a_im"]) == 0


def test_verify_kernel_exit_zero(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out, _ = run(["verify", "--suite", "kernel", "--seeds", "42", "--json", str(rep)], capsys)
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["summary"]["failed"] == 0
    assert doc["config"]["seeds"] == [42]
    assert out.count("PASS") == doc["summary"]["gating"]


def test_verify_failure_exit_one(capsys, monkeypatch):
    import alh.verify as v

    monkeypatch.setitem(v.DEFAULT_TOLS, "kernel", -1.0)
    code, _, _ = run(["verify", "--suite", "kernel", "--seeds", "42", "-q"], capsys)
    assert code == 1


def test_round_trip_bit_exact(tmp_path):
    f = tmp_path / "s.json"
    main(["gen", "--kind", "random", "--seed", "7", "--amplitude", "0.2", "-o", str(f)])
    s = loads_state(f.read_text())
    ref = random_state(32, seed=7, amplitude=0.2)
    np.testing.assert_array_equal(s.q, ref.q)
    np.testing.assert_array_equal(s.r, ref.r)


def test_outputs_reproducible(tmp_path, capsys):
    outs = []
    for _ in range(2):
        run(["gen", "--kind", "gaussian", "--n", "32", "--amplitude", "0.2", "-o", str(tmp_path / "g.json")], capsys)
        _, out, _ = run(["evolve", "--state", str(tmp_path / "g.json"), "--flow", "al", "--dt", "0.01",
                         "--T", "0.05", "--z-samples", "2.0,1.5+0.5i"], capsys)
        outs.append(out)
    assert outs[0] == outs[1]


def test_evolve_csv(tmp_path, capsys):
    g = tmp_path / "g.json"
    main(["gen", "--kind", "gaussian", "--n", "32", "--amplitude", "0.2", "-o", str(g)])
    traj = tmp_path / "t.csv"
    code, _, _ = run(["evolve", "--state", str(g), "--flow", "n:1", "--dt", "0.01", "--T", "0.1",
                      "--z-samples", "2.0,1.5+0.5i", "--out", str(traj)], capsys)
    assert code == 0
    rows = list(csv.reader(traj.open()))
    assert rows[0][:10] == ["t", "H0", "C1", "C2", "C1hat", "C2hat", "|a(z_1)|", "arg a(z_1)", "|a(z_2)|", "arg a(z_2)"]
    assert rows[0][10:] == ["H0_im", "C1_im", "C2_im", "C1hat_im", "C2hat_im"]
    assert len(rows) == 12
    h0 = [float(r[1]) for r in rows[1:]]
    assert max(h0) - min(h0) < 1e-7


def test_apply_and_dump(tmp_path, capsys):
    s = tmp_path / "s.json"
    main(["gen", "--kind", "random", "--seed", "42", "-o", str(s)])
    dump = tmp_path / "R.csv"
    code, out, _ = run(["apply", "--state", str(s), "--op", "Lplus", "--pow", "2", "--dump-csv", str(dump)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["ordering"] == "rq" and len(doc["c1"]) == 32
    assert dump.read_text().startswith("row,col,re,im\n")
    field = tmp_path / "f.json"
    field.write_text(out)
    code, _, err = run(["apply", "--state", str(s), "--op", "R", "--field", str(field)], capsys)
    assert code == 2 and "qr-ordered" in err


def test_usage_errors(tmp_path, capsys, monkeypatch):
    assert run(["gen", "--kind", "zero", "--bogus"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["scatter", "--z-grid", "nonsense"], capsys, "{}", monkeypatch)[0] == 2
    assert run(["conserved"], capsys, "not json", monkeypatch)[0] == 2
    assert run(["conserved", "--state", str(tmp_path / "missing.json")], capsys)[0] == 2
    s = tmp_path / "s.json"
    main(["gen", "--kind", "zero", "--n", "16", "-o", str(s)])
    assert run(["evolve", "--state", str(s), "--flow", "bad", "--dt", "0.1", "--T", "1"], capsys)[0] == 2


def test_numeric_errors(tmp_path, capsys, monkeypatch):
    bad = {"k_min": 0, "q": [[0, 0], [0, 0], [1, 0], [0, 0], [0, 0]], "r": [[0, 0], [0, 0], [1, 0], [0, 0], [0, 0]]}
    code, _, err = run(["conserved"], capsys, json.dumps(bad), monkeypatch)
    assert code == 3 and "numeric" in err
    g = tmp_path / "g.json"
    main(["gen", "--kind", "gaussian", "--amplitude", "0.3", "-o", str(g)])
    code, _, _ = run(["evolve", "--state", str(g), "--flow", "n:1", "--dt", "10", "--T", "1000"], capsys)
    assert code == 3


@pytest.mark.parametrize("cmd", ["gen", "scatter", "conserved", "evolve", "apply", "verify"])
def test_help(cmd, capsys):
    code, out, _ = run([cmd, "--help"], capsys)
    assert code == 0 and "usage" in out


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "alh.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("alh ")
