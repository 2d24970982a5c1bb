import csv
import json

import numpy as np
import pytest

from fuzz import random_tree_instance
from treeqp import ghmm
from treeqp.cli import BENCH_FIELDS, TIMING_FIELDS, loglog_slope, main
from treeqp.tree import TreeInstance


def write_instance(path, inst):
    inst.save(path)
    return str(path)


class TestSolve:
    def test_single_node(self, tmp_path):
        inp = write_instance(tmp_path / "i.json", TreeInstance(1, [1.0], [], [-2.0], [1.0]))
        out = tmp_path / "o.json"
        assert main(["solve", "--input", inp, "--output", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["objective"] == pytest.approx(-1.0)
        assert data["x"] == [2.0] and data["z"] == [1]

    def test_path_dp_on_tree(self, tmp_path):
        star = TreeInstance(4, [2.0] * 4, [(0, 3, -0.5), (1, 3, -0.5), (2, 3, -0.5)], [0.0] * 4, [1.0] * 4)
        inp = write_instance(tmp_path / "i.json", star)
        assert main(["solve", "--input", inp, "--method", "path-dp"]) == 1

    @pytest.mark.parametrize("method", ["parametric", "brute"])
    def test_check(self, tmp_path, rng, method):
        inp = write_instance(tmp_path / "i.json", random_tree_instance(rng, 12, mixed_lambda=True))
        assert main(["solve", "--input", inp, "--method", method, "--check"]) == 0

    def test_clip_flags(self, tmp_path, rng):
        inp = write_instance(tmp_path / "i.json", random_tree_instance(rng, 12))
        assert main(["solve", "--input", inp, "--no-clip", "--check"]) == 0
        assert main(["solve", "--input", inp, "--clip", "1000", "--root", "3", "--check"]) == 0
        assert main(["solve", "--input", inp, "--no-clip", "--clip", "5"]) == 1

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"n": 1,\n "edges": [}')
        assert main(["solve", "--input", str(bad)]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--input", str(tmp_path / "none.json")]) == 1

    def test_usage_error_exit(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve"])
        assert exc.value.code == 1


class TestGen:
    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for f in (a, b):
            assert main(["gen", "--kind", "random-tree", "--n", "30", "--seed", "9", "--out", str(f)]) == 0
        assert a.read_bytes() == b.read_bytes()
        inst = TreeInstance.load(a)
        np.testing.assert_array_equal(inst.lam, 7.5)

    def test_extended_star(self, tmp_path):
        f = tmp_path / "s.json"
        assert main(["gen", "--kind", "extended-star", "--branches", "3", "--length", "2", "--seed", "1",
                     "--out", str(f)]) == 0
        assert TreeInstance.load(f).n == 7

    @pytest.mark.parametrize("argv", [
        ["--kind", "path", "--n", "5", "--branches", "2"],
        ["--kind", "extended-star", "--branches", "2"],
        ["--kind", "extended-star", "--n", "5", "--branches", "2", "--length", "2"],
        ["--kind", "random-tree"],
    ])
    def test_invalid(self, tmp_path, argv):
        assert main(["gen", *argv, "--seed", "0", "--out", str(tmp_path / "x.json")]) == 1

    def test_round_trip_check(self, tmp_path):
        f = tmp_path / "g.json"
        for seed in range(3):
            assert main(["gen", "--kind", "random-tree", "--n", "13", "--seed", str(seed), "--out", str(f)]) == 0
            assert main(["solve", "--input", str(f), "--check"]) == 0


class TestGhmm:
    def test_all_zero(self, tmp_path):
        obs = tmp_path / "o.csv"
        obs.write_text("value\n" + "0\n" * 40)
        out = tmp_path / "g.json"
        assert main(["ghmm", "--obs", str(obs), "--window", "10", "--sigma2", "2", "--nu2", "1",
                     "--lambda-w", "100", "--gamma-x", "400", "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["x"] == [0.0] * 4 and data["outliers"] == [] and data["objective_model"] == 0.0

    def test_empty(self, tmp_path):
        obs = tmp_path / "o.csv"
        obs.write_text("")
        assert main(["ghmm", "--obs", str(obs)]) == 1

    def test_online_timing(self, tmp_path, rng):
        y = np.cumsum(rng.normal(size=95))
        y[[7, 50]] += 30.0
        obs = tmp_path / "o.csv"
        obs.write_text("\n".join(repr(float(v)) for v in y) + "\n")
        timing = tmp_path / "t.csv"
        args = ["--obs", str(obs), "--window", "5", "--lambda-w", "10", "--gamma-x", "5"]
        assert main(["ghmm-online", *args, "--recent", "3", "--timing", str(timing)]) == 0
        with open(timing) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == list(TIMING_FIELDS) and len(rows) == 19
        p = ghmm.GhmmParams(lambda_w=10.0, gamma_x=5.0, K=5)
        ws = ghmm.windows(y, 5)
        for row in rows[::6]:
            T = int(row["horizon"])
            ref = ghmm.solve_batch(ws[:T], p)
            assert float(row["objective_miqp"]) == pytest.approx(ref.objective_miqp, abs=1e-6)
            assert float(row["x_last"]) == pytest.approx(ref.x[-1], abs=1e-6)


class TestBench:
    def test_small(self, tmp_path):
        out = tmp_path / "b.csv"
        assert main(["bench", "--sizes", "10,20", "--trials", "1", "--out", str(out)]) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == list(BENCH_FIELDS)
        runs = [r for r in rows if r["seed"] != "mean"]
        summary = [r for r in rows if r["seed"] == "mean"]
        assert [r["n"] for r in runs] == ["10", "20"]
        assert len(summary) == 2 and summary[0]["slope"] != ""

    def test_path_methods(self, tmp_path):
        out = tmp_path / "b.csv"
        assert main(["bench", "--sizes", "20,40", "--trials", "2", "--kind", "path",
                     "--methods", "parametric,path-dp", "--out", str(out)]) == 0
        with open(out) as fh:
            rows = [r for r in csv.DictReader(fh) if r["seed"] != "mean"]
        assert len(rows) == 8
        by = {}
        for r in rows:
            by.setdefault((r["n"], r["seed"]), []).append(float(r["objective"]))
        for a, b in by.values():
            assert a == pytest.approx(b, abs=1e-7)

    def test_path_dp_needs_path(self, tmp_path):
        assert main(["bench", "--sizes", "10", "--methods", "path-dp", "--out", str(tmp_path / "b.csv")]) == 1

    def test_slope(self):
        assert loglog_slope([10, 100, 1000], [1.0, 100.0, 10000.0]) == pytest.approx(2.0)
