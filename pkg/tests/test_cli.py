import io
import os
import time

import pytest

from cvteleport.cli import UsageError, main, parse_complex, parse_grid

# mpmath at 40 digits: g(0.2) and 1 / (1 + 2 exp(-2))
G_POINT_TWO = 0.7800269059780251
F_T1_S1 = 0.7869860421615985


def invoke(argv):
    out = io.StringIO()
    try:
        code = main(argv, out)
    except SystemExit as exc:
        code = exc.code
    return code, out.getvalue()


def fields(line):
    return dict(kv.split("=", 1) for kv in line.split())


def read_csv(path):
    with open(path, newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    return text, lines[0].split(","), [[float(v) for v in ln.split(",")] for ln in lines[1:]]


class TestParsing:
    @pytest.mark.parametrize(
        "text, expected",
        [("1", 1), ("2i", 2j), ("-1.5+0.5i", -1.5 + 0.5j), ("1-i", 1 - 1j), ("+0.25e1", 2.5)],
    )
    def test_complex(self, text, expected):
        assert parse_complex(text) == expected

    @pytest.mark.parametrize("text", ["", "1 + 2i", "1+2j", "abc", "1+2i+3"])
    def test_complex_rejects(self, text):
        with pytest.raises(UsageError):
            parse_complex(text)

    def test_grid_inclusive(self):
        assert parse_grid("0:1:0.5") == (0, 0.5, 1)
        assert len(parse_grid("0:1:0.05")) == 21
        assert parse_grid("0:1:0.05")[-1] == 1

    def test_grid_exclusive(self):
        assert parse_grid("0:1:0.3") == pytest.approx((0, 0.3, 0.6, 0.9))

    def test_grid_single_point(self):
        assert parse_grid("0.5:0.5:0.1") == (0.5,)

    @pytest.mark.parametrize("text", ["0:1", "0:1:0", "1:0:0.1", "0:1:-1", "a:b:c", "0:inf:1"])
    def test_grid_rejects(self, text):
        with pytest.raises(UsageError):
            parse_grid(text)


class TestCapacityCommand:
    def test_zero_budget(self):
        code, out = invoke(["capacity", "--nbar", "0", "--T", "0.5", "--s", "1"])
        assert code == 0
        assert fields(out)["capacity_bits"] == "0"

    def test_noiseless(self):
        code, out = invoke(["capacity", "--nbar", "0.2", "--nbar-s", "0"])
        assert code == 0
        assert float(fields(out)["capacity_bits"]) == pytest.approx(G_POINT_TWO, abs=1e-11)
        assert fields(out)["T"] == "nan"

    def test_key_order(self):
        _, out = invoke(["capacity", "--nbar", "0.2", "--T", "0.5", "--s", "1"])
        assert list(fields(out)) == ["nbar", "T", "s", "nbar_s", "capacity_bits"]
        assert out.endswith("\n")

    def test_numeric(self):
        code, out = invoke(["capacity", "--nbar", "0.2", "--T", "0.5", "--s", "1", "--numeric", "--dim", "128"])
        f = fields(out)
        assert code == 0
        assert float(f["abs_error"]) <= 1e-4
        assert float(f["numeric_bits"]) == pytest.approx(float(f["capacity_bits"]), abs=1e-4)

    @pytest.mark.parametrize(
        "argv",
        [
            ["capacity", "--T", "0.5", "--s", "1"],
            ["capacity", "--nbar", "0.2", "--T", "0.5"],
            ["capacity", "--nbar", "0.2", "--T", "1.5", "--s", "1"],
            ["capacity", "--nbar", "-0.2", "--nbar-s", "1"],
            ["capacity", "--nbar", "0.2", "--nbar-s", "-1"],
            ["capacity", "--nbar", "0.2", "--s", "-1", "--T", "0"],
            ["capacity", "--nbar", "0.2", "--nbar-s", "1", "--T", "0.5", "--s", "1"],
            ["capacity", "--nbar", "nan", "--nbar-s", "1"],
            ["capacity", "--nbar", "0.2", "--nbar-s", "1", "--numeric", "--tol", "0"],
            ["capacity", "--nbar", "0.2", "--nbar-s", "1", "--jobs", "0"],
            ["capacity", "--nbar", "0.2", "--nbar-s", "1", "--seed", "-3"],
            ["teleport"],
        ],
    )
    def test_usage_errors(self, argv):
        assert invoke(argv)[0] == 2


class TestFidelityCommand:
    def test_identity(self):
        code, out = invoke(["fidelity", "--nbar-s", "0"])
        assert code == 0 and fields(out)["fidelity"] == "1"

    def test_fully_noisy(self):
        _, out = invoke(["fidelity", "--T", "0", "--s", "1"])
        assert float(fields(out)["fidelity"]) == pytest.approx(1 / 3, abs=1e-12)

    def test_numeric(self):
        code, out = invoke(["fidelity", "--T", "1", "--s", "1", "--numeric", "--alpha", "1+0.5i"])
        f = fields(out)
        assert code == 0
        assert float(f["fidelity"]) == pytest.approx(F_T1_S1, abs=1e-11)
        assert float(f["abs_error"]) <= 1e-6
        assert f["alpha"] == "1+0.5i"

    def test_bad_alpha(self):
        assert invoke(["fidelity", "--nbar-s", "1", "--numeric", "--alpha", "1+0.5j"])[0] == 2

    def test_truncation_too_small(self):
        assert invoke(["fidelity", "--nbar-s", "1", "--numeric", "--alpha", "3", "--dim", "8"])[0] == 2


class TestSweepCommand:
    def test_three_by_three(self, tmp_path):
        path = tmp_path / "cap.csv"
        code, _ = invoke(["sweep", "--quantity", "capacity", "--nbar", "0.2",
                          "--T-grid", "0:1:0.5", "--s-grid", "0:1:0.5", "--output", str(path)])
        text, header, rows = read_csv(path)
        assert code == 0
        assert header == ["T", "s", "nbar", "nbar_s", "value"]
        assert len(rows) == 9
        assert text.endswith("\n") and "\r" not in text
        assert [(r[0], r[1]) for r in rows[:4]] == [(0, 0), (0, 0.5), (0, 1), (0.5, 0)]

    def test_twelve_significant_digits(self, tmp_path):
        path = tmp_path / "cap.csv"
        invoke(["sweep", "--quantity", "capacity", "--T-grid", "0.5:0.5:1", "--s-grid", "1:1:1",
                "--output", str(path)])
        value = open(path).read().splitlines()[1].split(",")[-1]
        assert value == "0.171337163001"

    def test_fidelity_independent_of_nbar(self, tmp_path):
        columns = []
        for nbar in ("0", "0.2", "0.8", "3"):
            path = tmp_path / f"fid{nbar}.csv"
            invoke(["sweep", "--quantity", "fidelity", "--nbar", nbar, "--T-grid", "0:1:0.25",
                    "--s-grid", "0:2:0.5", "--output", str(path)])
            columns.append([r[4] for r in read_csv(path)[2]])
        assert all(c == columns[0] for c in columns)

    def test_capacity_monotone_on_fine_grid(self, tmp_path):
        path = tmp_path / "cap.csv"
        invoke(["sweep", "--quantity", "capacity", "--nbar", "0.8", "--output", str(path)])
        rows = read_csv(path)[2]
        n_T, n_s = 21, 21
        assert len(rows) == n_T * n_s
        grid = [[rows[i * n_s + j][4] for j in range(n_s)] for i in range(n_T)]
        for i in range(n_T):
            assert all(grid[i][j] <= grid[i][j + 1] for j in range(n_s - 1))
        for j in range(n_s):
            assert all(grid[i][j] <= grid[i + 1][j] for i in range(n_T - 1))

    def test_numeric_columns(self, tmp_path):
        path = tmp_path / "fid.csv"
        code, _ = invoke(["sweep", "--quantity", "fidelity", "--nbar", "0.5", "--T-grid", "1:1:1",
                          "--s-grid", "0:1:1", "--numeric", "--output", str(path)])
        _, header, rows = read_csv(path)
        assert code == 0
        assert header[-2:] == ["numeric_value", "abs_error"]
        assert all(r[6] <= 1e-6 for r in rows)

    def test_parallel_rows_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["sweep", "--quantity", "capacity", "--T-grid", "0:1:0.25", "--s-grid", "0:2:0.5"]
        invoke(base + ["--output", str(a)])
        invoke(["--jobs", "2"] + base + ["--output", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable_directory(self, tmp_path):
        path = tmp_path / "missing" / "cap.csv"
        code, _ = invoke(["sweep", "--quantity", "capacity", "--output", str(path)])
        assert code == 3
        assert not path.exists()

    def test_bad_grid_leaves_no_file(self, tmp_path):
        path = tmp_path / "cap.csv"
        code, _ = invoke(["sweep", "--quantity", "capacity", "--T-grid", "0:2:0.5", "--output", str(path)])
        assert code == 2
        assert os.listdir(tmp_path) == []


class TestVerifyCommand:
    def test_fidelity_suite_passes(self, tmp_path):
        report = tmp_path / "report.txt"
        code, out = invoke(["verify", "--suite", "fidelity", "--tol", "1e-6", "--seed", "42",
                            "--report", str(report)])
        assert code == 0
        lines = report.read_text().splitlines()
        assert len(lines) == 100
        assert all(ln.endswith("pass=1") for ln in lines)
        assert "100/100 passed" in out

    def test_all_suites_pass_within_budget(self, tmp_path):
        report = tmp_path / "report.txt"
        start = time.perf_counter()
        code, out = invoke(["verify", "--suite", "all", "--tol", "1e-4", "--dim-max", "256",
                            "--seed", "42", "--report", str(report)])
        assert code == 0, out[-3000:]
        assert time.perf_counter() - start < 300

    def test_unattainable_tolerance_fails(self, tmp_path):
        report = tmp_path / "report.txt"
        code, out = invoke(["verify", "--suite", "capacity", "--tol", "1e-12", "--dim-max", "256",
                            "--report", str(report)])
        assert code in (1, 4)
        if code == 1:
            assert "pass=0" in report.read_text()

    def test_dim_ceiling_is_exit_4(self, tmp_path):
        code, _ = invoke(["verify", "--suite", "capacity", "--dim-max", "16",
                          "--report", str(tmp_path / "r.txt")])
        assert code == 4

    def test_global_flags_after_subcommand(self, tmp_path):
        report = tmp_path / "r.txt"
        code, _ = invoke(["verify", "--suite", "average-state", "--jobs", "1", "--seed", "7",
                          "--report", str(report)])
        assert code == 0 and report.exists()

    def test_unknown_suite(self):
        assert invoke(["verify", "--suite", "everything"])[0] == 2
