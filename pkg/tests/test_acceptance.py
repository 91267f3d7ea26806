"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line
per criterion.
"""

import csv
import io
import json
import math
import time

import numpy as np
import pytest

from qrandbench.cli import main
from qrandbench.entropy import cq_entropy_closed, renyi_entropy
from qrandbench.extraction import toeplitz_collision_table
from qrandbench.intrinsic import (
    extremal_perturbation,
    extremality_margin,
    family_gamma,
    max_intrinsic_value,
    mub_pvm,
    qubit_optimal_for,
    uniform_povm,
)
from qrandbench.oracle import (
    PETZ_SECOND,
    PETZ_UNBIASED,
    figure2_state,
    figure3_state,
    petz_values,
    random_pvm_supremum_search,
    verify_divergence_closed_form,
    verify_exact_security,
)
from qrandbench.quantum_core import density_to_json, random_density


def report(number, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def write_state(path, rho):
    path.write_text(json.dumps(density_to_json(rho.matrix)))
    return str(path)


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    assert code == 0, err
    return out


def test_criterion_1_divergence_closed_form():
    start = time.perf_counter()
    result = verify_divergence_closed_form(trials=200, max_dim=5, rng_seed=0)
    elapsed = time.perf_counter() - start
    ok = result.trials >= 200 and result.max_deviation <= 1e-8 and elapsed < 30
    report(1, ok, f"{result.trials} cases, max deviation {result.max_deviation:.3g}, {elapsed:.1f} s")


def test_criterion_2_figure2_sweep(capsys, tmp_path):
    state = write_state(tmp_path / "fig2.json", figure2_state())
    down = list(csv.DictReader(io.StringIO(run_cli(
        capsys, "sweep-alpha", "--state", state, "--family", "down", "--alpha-max", 4, "--with-limit"))))
    up = list(csv.DictReader(io.StringIO(run_cli(
        capsys, "sweep-alpha", "--state", state, "--family", "up", "--alpha-min", 1, "--with-limit"))))
    values = {r["alpha"]: float(r["value_bits"]) for r in down}
    half = abs(values["0.5"] - (1 + math.log2(0.75)))
    limit = abs(float(up[-1]["value_bits"]) - values["2"])
    tail = values["inf"]
    ok = half <= 1e-9 and limit <= 1e-9 and up[-1]["alpha"] == "inf" and abs(tail) <= 1e-12
    report(2, ok, f"alpha=0.5 dev {half:.2g}, up limit vs down at 2 dev {limit:.2g}, down at inf {tail:.2g}")


def test_criterion_3_theorem2_structure():
    rng = np.random.default_rng(3)
    settings = [("up", 1.5), ("up", 2.0), ("up", math.inf), ("down", 0.5), ("down", 2.0), ("down", math.inf)]
    gap = attain_pvm = attain_povm = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 7))
        rho = random_density(d, rng)
        for family, alpha in settings:
            pvm = max_intrinsic_value(rho, family, alpha, "pvm")
            povm = max_intrinsic_value(rho, family, alpha, "povm")
            gap = max(gap, abs(povm - pvm - math.log2(d)))
            attain_pvm = max(attain_pvm, abs(cq_entropy_closed(rho, mub_pvm(rho), family, alpha) - pvm))
            if d == 2:
                meas = qubit_optimal_for(rho, family_gamma(family, alpha))
                attain_povm = max(attain_povm, abs(cq_entropy_closed(rho, meas, family, alpha) - povm))
    ok = gap <= 1e-12 and attain_pvm <= 1e-9 and attain_povm <= 1e-9
    report(3, ok, f"log d gap {gap:.2g}, MUB {attain_pvm:.2g}, qubit POVM {attain_povm:.2g}")


def test_criterion_4_figure3_sweep(capsys, tmp_path):
    up_state = write_state(tmp_path / "fig3.json", figure3_state())
    start = time.perf_counter()
    up = list(csv.DictReader(io.StringIO(run_cli(capsys, "sweep-n", "--state", up_state, "--bound", "up"))))
    elapsed = time.perf_counter() - start
    down = list(csv.DictReader(io.StringIO(run_cli(capsys, "sweep-n", "--state", up_state, "--bound", "down"))))
    asymptote = 2 * math.log2(3) - renyi_entropy([4 / 7, 2 / 7, 1 / 7], 1)
    monotone = bounded = True
    for eps in ("0.0001", "1e-12", "1e-20"):
        rates = np.array([float(r["rate"]) for r in up if r["epsilon"] == eps])
        monotone &= bool(np.all(np.diff(rates) >= -1e-12))
        bounded &= bool(np.all(rates <= asymptote + 1e-6))
    kink = any(r["at_boundary"] == "true" for r in up if r["epsilon"] == "1e-20")
    ordered = all(float(a["rate"]) >= float(b["rate"]) - 1e-12 for a, b in zip(up, down))
    ok = monotone and bounded and kink and ordered and abs(asymptote - 1.7911) < 1e-4 and elapsed < 10
    report(4, ok, f"monotone={monotone} bounded={bounded} kink={kink} up>=down={ordered}, "
                  f"asymptote {asymptote:.7f}, {elapsed:.1f} s")


def test_criterion_5_petz():
    first, second = petz_values()
    dev = max(abs(first - PETZ_UNBIASED), abs(second - PETZ_SECOND))
    ok = dev <= 1e-9 and round(first, 3) == 0.685 and round(second, 3) == 0.716
    report(5, ok, f"values {first:.6f}, {second:.6f}, closed-form deviation {dev:.2g}")


def test_criterion_6_supremum():
    rng = np.random.default_rng(6)
    states = [figure2_state(), random_density(2, rng), figure3_state(), random_density(4, rng)]
    worst, qubit_gap = 0.0, 0.0
    for rho in states:
        for family, alpha in (("up", 2.0), ("down", 0.5), ("down", 2.0)):
            result = random_pvm_supremum_search(rho, family, alpha, trials=1000, rng_seed=0)
            worst = max(worst, result.max_deviation)
            if rho.dim == 2:
                qubit_gap = max(qubit_gap, result.details["gap"])
    ok = worst <= 1e-9 and qubit_gap <= 0.02
    report(6, ok, f"max excess {worst:.2g}, worst qubit gap {qubit_gap:.4f}")


def test_criterion_7_extremal_perturbation():
    lines, ok = [], True
    for d in (2, 3, 4):
        rho = random_density(d, np.random.default_rng(70 + d))
        start = uniform_povm(rho)
        out = extremal_perturbation(start, 1e-2)
        margin = extremality_margin(out).margin
        dist = max(np.linalg.norm(a - b, 2) for a, b in zip(out.elements, start.elements))
        gap = max_intrinsic_value(rho, "up", 2.0, "povm") - cq_entropy_closed(rho, out, "up", 2.0)
        ok &= margin > 1e-9 and dist <= 1e-2 and gap < 0.05
        lines.append(f"d={d} margin {margin:.2g} dist {dist:.2g} gap {gap:.4f}")
    report(7, ok, "; ".join(lines))


def test_criterion_8_exact_security():
    result = verify_exact_security(rng_seed=0, alphas=(1.5, 2.0))
    table = toeplitz_collision_table(3, 2)
    universal = len(table) == 28 and all(p == 0.25 for p in table.values())
    ok = result.passed and result.tolerance == 1e-10 and universal
    report(8, ok, f"worst slack violation {result.max_deviation:.2g}, Toeplitz m=3 l=2 universal={universal}")


def test_criterion_9_determinism(capsys, tmp_path):
    fig2 = write_state(tmp_path / "fig2.json", figure2_state())
    fig3 = write_state(tmp_path / "fig3.json", figure3_state())
    qubit = write_state(tmp_path / "qubit.json", random_density(2, np.random.default_rng(9)))

    def run_all(tag):
        d = tmp_path / tag
        d.mkdir()
        stdout = [
            run_cli(capsys, "rate", "--state", fig3, "--epsilon", 1e-12, "--n", 10**5, "--json"),
            run_cli(capsys, "sweep-alpha", "--state", fig2, "--with-limit"),
            run_cli(capsys, "sweep-n", "--state", fig3, "--points", 10),
            run_cli(capsys, "construct", "--state", fig3, "--kind", "uniform-extremal"),
            run_cli(capsys, "construct", "--state", qubit, "--kind", "qubit-opt", "--out", d / "meas.json"),
        ]
        run_cli(capsys, "extract", "--state", qubit, "--measurement", d / "meas.json", "--n", 5000,
                "--epsilon", 1e-6, "--rng-seed", "1234", "--hash-seed", "abcd",
                "--out", d / "bits.bin", "--meta", d / "meta.json")
        run_cli(capsys, "verify", "--suites", "petz,security,divergence", "--seed", "7", "--out", d / "verify.json")
        files = [(d / n).read_bytes() for n in ("meas.json", "bits.bin", "meta.json", "verify.json")]
        return stdout, files

    first, second = run_all("a"), run_all("b")
    report(9, first == second, f"{len(first[0]) + len(first[1])} outputs compared byte for byte")
