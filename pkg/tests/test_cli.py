import csv
import io
import json
import math

import numpy as np
import pytest

from qrandbench.cli import main
from qrandbench.entropy import cq_up_entropy_closed, renyi_entropy
from qrandbench.extraction import RateQuery, objective, optimize_alpha, output_length
from qrandbench.quantum_core import density_to_json, load_density, load_measurement


@pytest.fixture
def states(tmp_path, fig2_rho, fig3_rho):
    paths = {}
    for name, matrix in {
        "fig2": fig2_rho.matrix,
        "fig3": fig3_rho.matrix,
        "qubit": np.diag([0.75, 0.25]),
        "mixed": np.eye(2) / 2,
        "pure": np.diag([1.0, 0.0]),
    }.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(density_to_json(matrix)))
        paths[name] = str(path)
    return paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# --- rate -----------------------------------------------------------------


def test_rate_figure3(states, capsys, fig3_rho):
    code, out, _ = run(capsys, "rate", "--state", states["fig3"], "--epsilon", 1e-12, "--n", 10**6, "--json")
    assert code == 0
    report = json.loads(out)
    penalty_min = min(objective(fig3_rho, a, 1e-12, 10**6) for a in 1 + np.geomspace(1e-7, 1, 4000))
    expected = 2 * math.log2(3) - penalty_min
    assert abs(report["rate_bits_per_copy"] - expected) < 1e-6
    assert report["rate_bits_per_copy"] < report["asymptotic_rate"]


def test_rate_trivial_cases(states, capsys):
    code, out, _ = run(capsys, "rate", "--state", states["mixed"], "--epsilon", 1, "--n", 50, "--class", "pvm", "--json")
    assert code == 0 and abs(json.loads(out)["rate_bits_per_copy"]) < 1e-6
    code, out, _ = run(capsys, "rate", "--state", states["pure"], "--epsilon", 1, "--n", 50, "--class", "povm")
    assert code == 0
    lines = dict(line.split(": ") for line in out.strip().splitlines())
    assert float(lines["rate_bits_per_copy"]) == 2.0
    assert lines["at_boundary"] in ("true", "false")


def test_rate_errors_exit_two(states, capsys, tmp_path):
    code, _, err = run(capsys, "rate", "--state", states["fig3"], "--epsilon", 2, "--n", 10)
    assert code == 2 and json.loads(err)["error"] == "OutOfRange"
    code, _, err = run(capsys, "rate", "--state", tmp_path / "missing.json", "--epsilon", 0.1, "--n", 10)
    assert code == 2 and "error" in json.loads(err)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 2, "re": [[1, 1], [0, 0]], "im": [[0, 0], [0, 0]]}))
    code, _, err = run(capsys, "rate", "--state", bad, "--epsilon", 0.1, "--n", 10)
    assert code == 2 and json.loads(err)["error"] == "NotHermitian"
    code, _, err = run(capsys, "rate", "--state", states["fig3"])
    assert code == 2 and json.loads(err)["error"] == "UsageError"


# --- sweep-alpha ----------------------------------------------------------


def test_sweep_alpha_figure2(states, capsys):
    code, out, _ = run(capsys, "sweep-alpha", "--state", states["fig2"], "--family", "down", "--with-limit")
    assert code == 0
    assert out.splitlines()[0] == "alpha,value_bits"
    rows = read_csv(out)
    assert rows[0]["alpha"] == "0.5"
    assert abs(float(rows[0]["value_bits"]) - (1 + math.log2(0.75))) < 1e-9
    values = [float(r["value_bits"]) for r in rows]
    assert np.all(np.diff(values) <= 1e-12)
    assert rows[-1]["alpha"] == "inf" and float(rows[-1]["value_bits"]) == 0.0


def test_sweep_alpha_up_family_limit(states, capsys):
    code, out, err = run(capsys, "sweep-alpha", "--state", states["fig2"], "--family", "up", "--with-limit",
                         "--alpha-min", 0.5, "--alpha-max", 2, "--points", 4)
    assert code == 0 and "omitting" in err
    rows = read_csv(out)
    assert [r["alpha"] for r in rows] == ["1.5", "2", "inf"]
    _, down, _ = run(capsys, "sweep-alpha", "--state", states["fig2"], "--alpha-min", 1, "--alpha-max", 2, "--points", 2)
    down_at_2 = float(read_csv(down)[-1]["value_bits"])
    assert abs(float(rows[-1]["value_bits"]) - down_at_2) < 1e-9


def test_sweep_alpha_maximally_mixed_is_zero(states, capsys):
    code, out, _ = run(capsys, "sweep-alpha", "--state", states["mixed"], "--points", 10)
    assert code == 0
    assert all(float(r["value_bits"]) == 0.0 for r in read_csv(out))


def test_sweep_alpha_near_one_uses_limit(states, capsys, fig2_rho):
    _, out, _ = run(capsys, "sweep-alpha", "--state", states["fig2"], "--alpha-min", 0.5, "--alpha-max", 1.5, "--points", 3)
    row = read_csv(out)[1]
    assert row["alpha"] == "1"
    assert abs(float(row["value_bits"]) - (1 - renyi_entropy(fig2_rho.spectrum, 1))) < 1e-11


def test_sweep_alpha_range_errors(states, capsys):
    code, _, _ = run(capsys, "sweep-alpha", "--state", states["fig2"], "--alpha-min", 0.3)
    assert code == 2
    code, _, _ = run(capsys, "sweep-alpha", "--state", states["fig2"], "--points", 1)
    assert code == 2


# --- sweep-n --------------------------------------------------------------


def test_sweep_n_figure3(states, capsys):
    code, out, _ = run(capsys, "sweep-n", "--state", states["fig3"], "--points", 20)
    assert code == 0
    assert out.splitlines()[0] == "n,epsilon,rate,alpha_star,at_boundary"
    rows = read_csv(out)
    asymptote = 2 * math.log2(3) - renyi_entropy([4 / 7, 2 / 7, 1 / 7], 1)
    for eps in ("0.0001", "1e-12", "1e-20"):
        curve = [r for r in rows if r["epsilon"] == eps]
        rates = [float(r["rate"]) for r in curve]
        assert len(curve) == 20
        assert np.all(np.diff(rates) >= -1e-12) and max(rates) < asymptote
    assert any(r["at_boundary"] == "true" for r in rows if r["epsilon"] == "1e-20")


def test_sweep_n_bounds_compare(states, capsys, tmp_path):
    up, down = tmp_path / "up.csv", tmp_path / "down.csv"
    run(capsys, "sweep-n", "--state", states["fig3"], "--points", 15, "--out", up)
    run(capsys, "sweep-n", "--state", states["fig3"], "--points", 15, "--bound", "down", "--out", down)
    for a, b in zip(read_csv(up.read_text()), read_csv(down.read_text())):
        assert float(a["rate"]) >= float(b["rate"]) - 1e-12
        if a["n"] == "10000":
            assert float(a["rate"]) - float(b["rate"]) < 0.02


def test_sweep_n_bad_epsilon(states, capsys):
    code, _, _ = run(capsys, "sweep-n", "--state", states["fig3"], "--epsilon", "0,1e-3")
    assert code == 2


# --- construct ------------------------------------------------------------


def test_construct_qubit_optimal(states, capsys):
    code, out, _ = run(capsys, "construct", "--state", states["qubit"], "--kind", "qubit-opt", "--alpha", 2, "--family", "up")
    assert code == 0
    obj = json.loads(out)
    assert obj["optimality_residual"] <= 1e-12
    assert obj["certificate"]["is_extremal"]
    assert obj["kind"] == "povm" and len(obj["elements"]) == 4


def test_construct_mub_residual(states, capsys):
    for alpha in ("1.5", "2", "inf"):
        _, out, _ = run(capsys, "construct", "--state", states["fig3"], "--kind", "mub", "--alpha", alpha)
        assert json.loads(out)["optimality_residual"] < 1e-12


def test_construct_uniform_extremal(states, capsys, tmp_path, fig3_rho):
    path = tmp_path / "m.json"
    code, _, _ = run(capsys, "construct", "--state", states["fig3"], "--kind", "uniform-extremal", "--out", path)
    assert code == 0
    obj = json.loads(path.read_text())
    assert obj["certificate"]["is_extremal"]
    meas = load_measurement(path)
    from qrandbench.intrinsic import uniform_povm

    start = uniform_povm(fig3_rho)
    assert max(np.linalg.norm(a - b, 2) for a, b in zip(meas.elements, start.elements)) <= 1e-2


def test_construct_kind_mismatch(states, capsys):
    code, _, err = run(capsys, "construct", "--state", states["fig3"], "--kind", "qubit-opt")
    assert code == 2 and json.loads(err)["error"] == "UsageError"


# --- extract --------------------------------------------------------------


@pytest.fixture
def mub_file(states, capsys, tmp_path):
    path = tmp_path / "mub.json"
    run(capsys, "construct", "--state", states["qubit"], "--kind", "mub", "--out", path)
    return path


def test_extract_composition(states, capsys, tmp_path, mub_file):
    code, _, _ = run(capsys, "extract", "--state", states["qubit"], "--measurement", mub_file, "--n", 10**4,
                     "--epsilon", 1e-6, "--rng-seed", "2a", "--hash-seed", "ff",
                     "--out", tmp_path / "b.bin", "--meta", tmp_path / "m.json")
    assert code == 0
    meta = json.loads((tmp_path / "m.json").read_text())
    rho, meas = load_density(states["qubit"]), load_measurement(mub_file)
    alpha = optimize_alpha(RateQuery(rho, 1e-6, 10**4, "pvm")).alpha_star
    expected = output_length(10**4 * cq_up_entropy_closed(rho, meas, alpha), 1e-6, alpha)
    assert abs(meta["out_bits"] - expected) <= 1
    assert (tmp_path / "b.bin").stat().st_size == math.ceil(meta["out_bits"] / 8)
    assert {"n", "epsilon", "alpha_star", "out_bits", "rng_seed", "hash_seed_hex"} <= set(meta)


def test_extract_too_few_copies(states, capsys, tmp_path, mub_file):
    code, _, _ = run(capsys, "extract", "--state", states["qubit"], "--measurement", mub_file, "--n", 3,
                     "--epsilon", 1e-12, "--rng-seed", "1", "--hash-seed", "1",
                     "--out", tmp_path / "b.bin", "--meta", tmp_path / "m.json")
    assert code == 0
    assert (tmp_path / "b.bin").read_bytes() == b""
    assert json.loads((tmp_path / "m.json").read_text())["out_bits"] == 0


def test_extract_bad_seed(states, capsys, tmp_path, mub_file):
    code, _, err = run(capsys, "extract", "--state", states["qubit"], "--measurement", mub_file, "--n", 3,
                       "--epsilon", 0.1, "--rng-seed", "1", "--hash-seed", "xyz",
                       "--out", tmp_path / "b.bin", "--meta", tmp_path / "m.json")
    assert code == 2 and json.loads(err)["error"] == "UsageError"


def test_extract_random_hash_seed_is_recorded(states, capsys, tmp_path, mub_file):
    run(capsys, "extract", "--state", states["qubit"], "--measurement", mub_file, "--n", 2000,
        "--epsilon", 1e-3, "--rng-seed", "5", "--out", tmp_path / "b.bin", "--meta", tmp_path / "m.json")
    seed_hex = json.loads((tmp_path / "m.json").read_text())["hash_seed_hex"]
    first = (tmp_path / "b.bin").read_bytes()
    run(capsys, "extract", "--state", states["qubit"], "--measurement", mub_file, "--n", 2000,
        "--epsilon", 1e-3, "--rng-seed", "5", "--hash-seed", seed_hex,
        "--out", tmp_path / "c.bin", "--meta", tmp_path / "n.json")
    assert (tmp_path / "c.bin").read_bytes() == first


# --- verify ---------------------------------------------------------------


def test_verify_petz(capsys, tmp_path):
    path = tmp_path / "v.json"
    code, _, err = run(capsys, "verify", "--suites", "petz", "--out", path)
    assert code == 0 and err.startswith("PASS petz")
    (report,) = json.loads(path.read_text())
    assert round(report["details"]["unbiased"], 3) == 0.685
    assert round(report["details"]["second_basis"], 3) == 0.716


def test_verify_unknown_suite(capsys):
    code, _, err = run(capsys, "verify", "--suites", "petz,bogus")
    assert code == 2 and "bogus" in json.loads(err)["message"]


def test_verify_failure_exit_code(capsys, monkeypatch):
    from qrandbench import oracle

    failing = oracle.VerificationReport("petz", 1, 1.0, "forced", 0.0)
    monkeypatch.setitem(oracle.SUITES, "petz", lambda seed: [failing])
    code, _, err = run(capsys, "verify", "--suites", "petz")
    assert code == 1 and err.startswith("FAIL petz")


# --- determinism ----------------------------------------------------------


def _command_matrix(states, mub, out_dir, tag):
    return [
        ("rate", ["rate", "--state", states["fig3"], "--epsilon", 1e-12, "--n", 12345, "--json"], None),
        ("alpha", ["sweep-alpha", "--state", states["fig2"], "--with-limit", "--out", out_dir / f"a{tag}.csv"], "a"),
        ("n", ["sweep-n", "--state", states["fig3"], "--points", 8, "--out", out_dir / f"n{tag}.csv"], "n"),
        ("construct", ["construct", "--state", states["fig3"], "--kind", "uniform-extremal",
                       "--out", out_dir / f"c{tag}.json"], "c"),
        ("extract", ["extract", "--state", states["qubit"], "--measurement", mub, "--n", 3000, "--epsilon", 1e-4,
                     "--rng-seed", "beef", "--hash-seed", "cafe", "--out", out_dir / f"x{tag}.bin",
                     "--meta", out_dir / f"x{tag}.json"], "x"),
        ("verify", ["verify", "--suites", "petz,security", "--seed", "3", "--out", out_dir / f"v{tag}.json"], "v"),
    ]


def test_every_command_is_byte_identical(states, capsys, tmp_path, mub_file, monkeypatch):
    outputs = []
    for tag, threads in (("1", "1"), ("2", "4")):
        monkeypatch.setenv("QRAND_THREADS", threads)
        captured = {}
        for name, argv, _ in _command_matrix(states, mub_file, tmp_path, tag):
            code, out, err = run(capsys, *argv)
            assert code == 0, err
            captured[name] = out
        names = ["a.csv", "n.csv", "c.json", "x.bin", "x.json", "v.json"]
        files = {n: (tmp_path / n.replace(".", f"{tag}.")).read_bytes() for n in names}
        outputs.append((captured, files))
    assert outputs[0] == outputs[1]
