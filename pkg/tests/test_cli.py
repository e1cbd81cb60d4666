import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fairtopk.cli import ParseError, dump_report, ingest, main
from fairtopk.models import Hypergeometric, PopulationSpec
from fairtopk.sampling import sample_matrix


def write_csv(path, rows, header=("id", "group", "score")):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def groups_file(path, groups):
    return write_csv(path, [(f"c{i:03d}", g) for i, g in enumerate(groups)], header=("id", "group"))


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def null_file(tmp_path):
    row = sample_matrix(Hypergeometric(), PopulationSpec(100, 30), 1, 2025)[0]
    return groups_file(tmp_path / "null.csv", row.tolist())


class TestIngest:
    def test_as_given(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", [("a", 1, ""), ("b", 0, ""), ("c", 1, "")])
        ranking, pop, order, _ = ingest(p)
        assert ranking.groups == (1, 0, 1)
        assert (pop.n, pop.n_p) == (3, 2)
        assert order == [0, 1, 2]

    def test_by_score_stable(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", [("a", 1, 0.5), ("b", 0, 0.9), ("c", 1, 0.9)])
        ranking, _, order, _ = ingest(p, "by_score")
        assert [i + 1 for i in order] == [2, 3, 1]
        assert ranking.ids == ("b", "c", "a")

    def test_bad_group_names_row(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", [("a", 1, 1), ("b", 2, 1)])
        with pytest.raises(ParseError, match="row 2"):
            ingest(p)

    def test_duplicate_id(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", [("a", 1, 1), ("b", 0, 1), ("a", 0, 1)])
        with pytest.raises(ParseError, match="row 3.*duplicate"):
            ingest(p)

    def test_missing_score_by_score(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", [("a", 1, 1), ("b", 0, "")])
        with pytest.raises(ParseError, match="row 2"):
            ingest(p, "by_score")

    def test_score_column_required(self, tmp_path):
        p = groups_file(tmp_path / "r.csv", [1, 0])
        with pytest.raises(ParseError, match="score"):
            ingest(p, "by_score")

    def test_header_required(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1,0\n2,1\n", encoding="utf-8")
        with pytest.raises(ParseError, match="header"):
            ingest(p)

    def test_non_numeric_score(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", [("a", 1, "high")])
        with pytest.raises(ParseError, match="row 1"):
            ingest(p)


class TestCommands:
    """End-to-end runs through ``main``."""

    def test_audit_reproduces_alpha_c(self, null_file, capsys):
        code, out, _ = run(["audit", null_file, "--model", "hyper", "--alpha", 0.1, "--k", 100,
                            "--ne", 1_000_000, "--seed", 7], capsys)
        doc = json.loads(out)
        assert 0.014 <= doc["audit"]["alpha_c"]["alpha_c"] <= 0.019
        assert doc["schema"] == "fairtopk.report/1"
        assert code == (0 if doc["audit"]["verdict"] == "pass" else 1)

    def test_audit_fail_exit_code(self, tmp_path, capsys):
        p = groups_file(tmp_path / "u.csv", [0] * 70 + [1] * 30)
        code, out, _ = run(["audit", p, "--ne", 20_000], capsys)
        assert code == 1
        assert json.loads(out)["audit"]["verdict"] == "fail"

    def test_audit_with_bands(self, null_file, capsys):
        code, out, _ = run(["audit", null_file, "--ne", 10_000, "--bands"], capsys)
        band = json.loads(out)["band"]
        assert band["lower"][-1] == band["upper"][-1] == 30

    def test_rerank_noop_on_fair_file(self, tmp_path, capsys):
        p = groups_file(tmp_path / "f.csv", [1, 0, 0] * 10 + [0] * 10)
        out_csv = tmp_path / "o.csv"
        code, _, _ = run(["rerank", p, "--ne", 50_000, "--out", out_csv, "--report", tmp_path / "rep.json"], capsys)
        assert code == 0
        assert out_csv.read_bytes() == p.read_bytes()
        assert json.loads((tmp_path / "rep.json").read_text())["rerank"]["swap_count"] == 0

    def test_audit_rerank_audit(self, tmp_path, capsys):
        p = groups_file(tmp_path / "u.csv", [0] * 50 + [1] * 30 + [0] * 20)
        flags = ["--ne", 200_000, "--seed", 3]
        assert run(["audit", p, *flags], capsys)[0] == 1
        fixed = tmp_path / "fixed.csv"
        assert run(["rerank", p, *flags, "--out", fixed], capsys)[0] == 0
        code, out, _ = run(["audit", fixed, *flags], capsys)
        assert code == 0
        assert json.loads(out)["audit"]["first_failing_prefix"] is None

    def test_rerank_by_score_keeps_columns(self, tmp_path, capsys):
        rows = [(f"id{i}", int(i >= 7), 10 - i) for i in range(10)]
        p = write_csv(tmp_path / "s.csv", rows)
        out = tmp_path / "o.csv"
        assert run(["rerank", p, "--order", "by-score", "--ne", 20_000, "--out", out], capsys)[0] == 0
        back = list(csv.DictReader(out.open(encoding="utf-8")))
        assert sorted(r["id"] for r in back) == sorted(r[0] for r in rows)
        assert set(back[0]) == {"id", "group", "score"}

    def test_boundaries(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        assert run(["boundaries", "--p", 0.3, "--out", out], capsys)[0] == 0
        rows = list(csv.DictReader(out.open(encoding="utf-8")))
        at = {round(float(r["x"]), 6): r for r in rows}
        assert float(at[0.6]["upper"]) == pytest.approx(0.5)
        assert len(rows) == 100

    def test_bands_csv(self, capsys):
        code, out, _ = run(["bands", "--n", 100, "--np", 30], capsys)
        rows = list(csv.DictReader(out.splitlines()))
        assert code == 0 and len(rows) == 100
        assert rows[-1]["lower"] == rows[-1]["upper"] == "30"

    def test_alpha_command(self, capsys):
        code, out, _ = run(["alpha", "--n", 100, "--np", 30, "--k", 1, "--ne", 10_000], capsys)
        assert code == 0
        assert json.loads(out)["adjusted"]["alpha_c"] == 0.1

    def test_rho_resolves_omega(self, capsys):
        code, out, _ = run(["simulate", "--n", 100, "--np", 30, "--model", "weighted", "--rho", 0.5,
                            "--ne", 200_000, "--k", 5], capsys)
        doc = json.loads(out)
        assert doc["model"]["omega"] == pytest.approx(7 / 3)
        assert doc["prefix"]["protected_share_at_top"] == pytest.approx(0.5, abs=0.004)
        assert doc["prefix"]["exact_mean_count"][0] == pytest.approx(0.5)

    def test_samples(self, capsys):
        code, out, _ = run(["samples", "--delta", 1, "--beta", 0.1], capsys)
        assert json.loads(out)["n_e"] == 150

    def test_backend(self, capsys):
        code, out, _ = run(["backend"], capsys)
        assert code == 0 and out.strip() in ("compiled", "python")


class TestExitCodes:
    def test_f_with_hyper(self, capsys):
        code, _, err = run(["bands", "--n", 10, "--np", 3, "--model", "hyper", "--f", 0.3], capsys)
        assert code == 2
        assert "--f" in err

    def test_omega_with_rho(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bands", "--n", "10", "--np", "3", "--model", "weighted", "--omega", "2", "--rho", "0.4"])
        assert exc.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_parse_error(self, tmp_path, capsys):
        p = write_csv(tmp_path / "bad.csv", [("a", "x", 1)])
        code, _, err = run(["audit", p], capsys)
        assert code == 2
        assert "row 1" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run(["audit", tmp_path / "nope.csv"], capsys)[0] == 2

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "fairtopk", "samples", "--delta", "2"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["n_e"] == 14979


class TestReports:
    def test_byte_identical(self, null_file, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            run(["audit", null_file, "--ne", 50_000, "--seed", 9, "--out", out, "--workers", 2], capsys)
        assert a.read_bytes() == b.read_bytes()
        run(["audit", null_file, "--ne", 50_000, "--seed", 9, "--out", a], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_round_trip(self, null_file, capsys):
        _, out, _ = run(["audit", null_file, "--ne", 20_000], capsys)
        doc = json.loads(out)
        assert dump_report(doc) == out.rstrip("\n") or dump_report(doc) == out
        for v in doc["audit"]["per_prefix_pvalues"]:
            assert float(repr(v)) == v

    def test_precision(self, capsys):
        _, out, _ = run(["alpha", "--n", 30, "--np", 10, "--ne", 20_000], capsys)
        text = json.loads(out)
        assert text["adjusted"]["alpha_c"] == float(repr(text["adjusted"]["alpha_c"]))


class TestBandWidth:
    def test_hypergeometric_tighter(self, capsys):
        widths = {}
        for model, extra in (("hyper", []), ("binom", ["--f", 0.3])):
            _, out, _ = run(["bands", "--n", 100, "--np", 30, "--alpha", 0.1, "--model", model, *extra], capsys)
            rows = list(csv.DictReader(out.splitlines()))
            widths[model] = np.array([int(r["upper"]) - int(r["lower"]) for r in rows])
        k = np.arange(1, 101)
        big = k / 100 >= 0.5
        assert np.all(widths["hyper"][big] <= widths["binom"][big])
