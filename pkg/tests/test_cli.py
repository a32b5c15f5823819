import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from pweight import distfn
from pweight.cli import main


def table(text):
    rows = list(csv.reader(io.StringIO(text), delimiter="\t"))
    return rows[0], rows[1:]


def kv(text):
    _, rows = table(text)
    return {k: float(v) for k, v in rows}


@pytest.fixture
def battery_file(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.standard_normal(400) + np.r_[np.full(40, 3.5), np.zeros(360)]
    p = distfn.upper_tail(t)
    path = tmp_path / "battery.tsv"
    with open(path, "w") as fh:
        fh.write("id\tp\tstat\tgroup\n")
        for j in range(400):
            fh.write(f"t{j}\t{float(p[j])!r}\t{float(t[j])!r}\tg{j // 50}\n")
    return path


@pytest.fixture
def means_file(tmp_path):
    path = tmp_path / "means.tsv"
    path.write_text("id\tmean\n" + "".join(f"h{j}\t{x}\n" for j, x in enumerate([0, 0, 0, 2, 3, 4, 5, 0])))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestHelp:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["test"],
            ["weights", "optimal"],
            ["robustness", "turnaround"],
            ["simulate", "surface"],
            ["example", "discontinuity"],
        ],
    )
    def test_help(self, capsys, argv):
        code, out, _ = run(capsys, *argv, "--help")
        assert code == 0 and "usage" in out

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "pweight", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "simulate" in res.stdout


class TestTest:
    @pytest.mark.parametrize("proc", ["bonferroni", "holm", "bh"])
    def test_unit_weights(self, capsys, battery_file, proc):
        code, out, err = run(capsys, "test", proc, "--battery", battery_file)
        header, rows = table(out)
        assert code == 0 and header == ["id", "rejected", "q_value"] and len(rows) == 400
        n = sum(r[1] == "1" for r in rows)
        assert f"rejected\t{n}\tof\t400" in err

    def test_bh_finds_at_least_bonferroni(self, capsys, battery_file):
        counts = {}
        for proc in ("bonferroni", "bh"):
            _, out, _ = run(capsys, "test", proc, "--battery", battery_file)
            counts[proc] = sum(r[1] == "1" for r in table(out)[1])
        assert counts["bh"] >= counts["bonferroni"] > 0

    def test_weights_must_average_one(self, capsys, battery_file, tmp_path):
        wpath = tmp_path / "w.tsv"
        wpath.write_text("id\tweight\n" + "".join(f"t{j}\t2\n" for j in range(400)))
        code, _, err = run(capsys, "test", "bonferroni", "--battery", battery_file, "--weights", wpath)
        assert code == 2 and "pweight: error" in err
        code, _, _ = run(capsys, "test", "bonferroni", "--battery", battery_file, "--weights", wpath, "--renormalize")
        assert code == 0

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "test", "holm", "--battery", tmp_path / "nope.tsv")
        assert code == 2 and err.startswith("pweight: error")

    def test_bad_header(self, capsys, tmp_path):
        path = tmp_path / "b.tsv"
        path.write_text("name\tp\nx\t0.1\n")
        code, _, err = run(capsys, "test", "holm", "--battery", path)
        assert code == 2 and "header" in err

    def test_bad_choice(self, capsys, battery_file):
        code, _, _ = run(capsys, "test", "sidak", "--battery", battery_file)
        assert code == 2

    def test_writes_out_file(self, capsys, battery_file, tmp_path):
        out = tmp_path / "o.tsv"
        code, stdout, _ = run(capsys, "test", "bh", "--battery", battery_file, "--out", out)
        assert code == 0 and stdout == "" and out.read_text().startswith("id\trejected")


class TestWeightsAndPower:
    def test_optimal(self, capsys, means_file):
        code, out, err = run(capsys, "weights", "optimal", "--means", means_file)
        header, rows = table(out)
        w = np.array([float(r[1]) for r in rows])
        assert code == 0 and header == ["id", "weight"]
        assert w.sum() == pytest.approx(8, abs=1e-9)
        assert "oracle_power" in err

    def test_family_scaled(self, capsys):
        code, out, _ = run(capsys, "weights", "family", "--c-list", "1,4", "--n", "50")
        _, rows = table(out)
        assert code == 0 and len(rows) == 100
        for c in (1.0, 4.0):
            assert max(float(r[2]) for r in rows if float(r[0]) == c) == pytest.approx(1.0)

    def test_power_curve(self, capsys):
        code, out, _ = run(capsys, "power", "curve", "--w-list", "1", "--n", "5", "--m", "1")
        _, rows = table(out)
        assert code == 0 and float(rows[0][2]) == pytest.approx(distfn.upper_tail(distfn.upper_quantile(0.05) - float(rows[0][1])))

    def test_power_average(self, capsys, means_file):
        code, out, _ = run(capsys, "power", "average", "--means", means_file)
        assert code == 0 and kv(out)["m1"] == 4


class TestRobustnessCommands:
    def test_two_point(self, capsys):
        code, out, _ = run(capsys, "robustness", "two-point", "--epsilon-list", "0.1", "--B-list", "1,2")
        _, rows = table(out)
        assert code == 0 and float(rows[0][3]) == pytest.approx(0.0, abs=1e-15)

    def test_worst_case(self, capsys):
        code, out, _ = run(capsys, "robustness", "worst-case", "--n", "4", "--m", "1000")
        assert code == 0 and len(table(out)[1]) == 4

    def test_turnaround(self, capsys):
        code, out, _ = run(capsys, "robustness", "turnaround", "--epsilon-list", "0.1", "--m", "1000")
        header, rows = table(out)
        assert code == 0 and float(rows[0][header.index("B0")]) == pytest.approx(118.96, abs=0.01)

    def test_safe_zone(self, capsys):
        code, out, _ = run(capsys, "robustness", "safe-zone", "--B-list", "5,10", "--m", "1000")
        assert code == 0 and float(table(out)[1][0][1]) == pytest.approx(1.4506, abs=1e-4)

    def test_safe_zone_domain(self, capsys):
        code, _, err = run(capsys, "robustness", "safe-zone", "--B-list", "1.5")
        assert code == 2 and "pweight: error" in err


class TestDesignCommands:
    def test_min_power_with_weights(self, capsys, tmp_path):
        wpath = tmp_path / "w.tsv"
        code, out, _ = run(
            capsys, "design", "min-power", "--epsilon", "0.05", "--beta", "0.2", "--m", "100", "--weights-out", wpath
        )
        vals = kv(out)
        assert code == 0 and vals["k"] == 5
        w = np.array([float(line.split("\t")[1]) for line in wpath.read_text().splitlines()[1:]])
        assert w.sum() == pytest.approx(100, abs=1e-9)

    def test_max_count(self, capsys):
        code, out, _ = run(capsys, "design", "max-count", "--beta", "0.2", "--delta", "0.1", "--m", "1000")
        assert code == 0 and kv(out)["k"] >= 1

    def test_infeasible(self, capsys):
        code, _, err = run(capsys, "design", "min-power", "--epsilon", "0.9", "--beta", "0.01", "--m", "10")
        assert code == 2 and "pweight: error" in err


class TestEstimate:
    def test_weights_and_report(self, capsys, battery_file, tmp_path):
        report = tmp_path / "r.tsv"
        code, out, _ = run(capsys, "estimate", "--battery", battery_file, "--report", report)
        _, rows = table(out)
        w = np.array([float(r[1]) for r in rows])
        assert code == 0 and w.sum() == pytest.approx(400, abs=1e-9)
        header, groups = table(report.read_text())
        assert header == ["group_id", "r", "Y", "S2", "pi_hat", "xi_hat", "raw_w", "smoothed_w"]
        assert len(groups) == 8 and w[0] > w[-1]

    def test_chisq_variant(self, capsys, battery_file):
        code, _, _ = run(capsys, "estimate", "--battery", battery_file, "--model", "chisq", "--mom-variant", "derived")
        assert code == 0

    def test_needs_groups(self, capsys, tmp_path):
        path = tmp_path / "b.tsv"
        path.write_text("id\tp\na\t0.1\nb\t0.2\n")
        code, _, err = run(capsys, "estimate", "--battery", path)
        assert code == 2 and "group" in err


class TestSimulateCommands:
    GENOME = ["--n-chrom", "5", "--positions", "300", "--linkage-signals", "4", "--signals", "4", "--m", "200"]

    def test_seed_required(self, capsys):
        for sub in ("genome", "surface", "fwer"):
            code, _, err = run(capsys, "simulate", sub)
            assert code == 2 and "--seed" in err

    def test_genome_reproducible(self, capsys, tmp_path):
        trace = tmp_path / "trace.tsv"
        _, first, _ = run(capsys, "simulate", "genome", "--seed", 7, *self.GENOME, "--trace-out", trace)
        _, second, _ = run(capsys, "simulate", "genome", "--seed", 7, *self.GENOME)
        header, rows = table(first)
        assert first == second
        assert header == ["id", "chrom", "pos", "trace", "band", "weight", "stat", "p", "signal"]
        assert len(rows) == 200 and sum(r[-1] == "1" for r in rows) == 4
        assert len(trace.read_text().splitlines()) == 1 + 5 * 300

    def test_surface(self, capsys):
        argv = ["simulate", "surface", "--seed", 1, *self.GENOME, "--epsilon-list", "0.05", "--B-list", "1,10", "--reps", 3]
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv, "--workers", 2)
        assert first == second and len(table(first)[1]) == 2

    def test_fwer(self, capsys):
        code, out, _ = run(capsys, "simulate", "fwer", "--seed", 2, "--m", "100", "--reps", "1000", "--scheme", "lognormal")
        header, rows = table(out)
        assert code == 0 and float(rows[0][header.index("fwer")]) < 0.1

    def test_fwer_too_few_reps(self, capsys):
        code, _, _ = run(capsys, "simulate", "fwer", "--seed", 2, "--reps", "10")
        assert code == 2


class TestExample:
    def test_discontinuity(self, capsys):
        code, out, _ = run(capsys, "example", "discontinuity")
        assert code == 0 and out
