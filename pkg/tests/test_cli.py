import csv
import subprocess
import sys

import pytest

from mixed_gfmm import cli, persist

from conftest import DATA, DATASETS

TOY_SCHEMA = "size,continuous\nweight,continuous\ncolour,categorical\nlabel,class\n"
TOY_ROWS = [
    ("1.0", "10", "red", "small"),
    ("1.5", "12", "red", "small"),
    ("2.0", "11", "red", "small"),
    ("9.0", "80", "blue", "large"),
    ("8.5", "75", "blue", "large"),
    ("9.5", "90", "green", "large"),
]


@pytest.fixture
def toy(tmp_path):
    (tmp_path / "toy.schema").write_text(TOY_SCHEMA)
    lines = ["size,weight,colour,label"] + [",".join(r) for r in TOY_ROWS]
    (tmp_path / "toy.csv").write_text("\n".join(lines) + "\n")
    return tmp_path


def run(capsys, *argv):
    try:
        code = cli.main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


class TestFitPredict:
    def test_reproduces_training_labels(self, toy, capsys):
        model = toy / "m.gfmm"
        code, _, err = run(capsys, "fit", "--data", toy / "toy.csv", "--schema", toy / "toy.schema",
                           "--theta", 0.3, "--delta", 0.5, "--model-out", model)
        assert code == 0, err
        code, out, _ = run(capsys, "predict", "--model", model, "--data", toy / "toy.csv")
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert [r["predicted"] for r in rows] == [r["label"] for r in rows]
        assert all(float(r["membership"]) == 1.0 for r in rows)

    def test_predict_to_file_without_labels(self, toy, capsys):
        model = toy / "m.gfmm"
        run(capsys, "fit", "--data", toy / "toy.csv", "--schema", toy / "toy.schema", "--model-out", model)
        (toy / "new.csv").write_text("size,weight,colour\n1.2,11,red\n30,200,purple\n")
        code, _, _ = run(capsys, "predict", "--model", model, "--data", toy / "new.csv", "--out", toy / "p.csv")
        assert code == 0
        rows = list(csv.DictReader((toy / "p.csv").read_text().splitlines()))
        assert rows[0]["predicted"] == "small"
        assert list(rows[0]) == ["size", "weight", "colour", "predicted", "membership"]

    def test_explicit_alpha_and_shuffle(self, toy, capsys):
        model = toy / "m.gfmm"
        code, _, _ = run(capsys, "fit", "--data", toy / "toy.csv", "--schema", toy / "toy.schema",
                         "--alpha", 0.25, "--shuffle-seed", 3, "--variant", "v2", "--model-out", model)
        assert code == 0
        loaded = persist.load_model(model)
        assert loaded.params.alpha == 0.25 and loaded.params.variant == "v2"

    def test_inspect(self, toy, capsys):
        model = toy / "m.gfmm"
        run(capsys, "fit", "--data", toy / "toy.csv", "--schema", toy / "toy.schema", "--model-out", model)
        code, out, _ = run(capsys, "inspect", "--model", model, "--summary")
        assert code == 0
        lines = out.splitlines()
        assert lines[1] == "class,boxes,samples"
        assert sum(int(line.split(",")[2]) for line in lines[2:]) == len(TOY_ROWS)
        code, out, _ = run(capsys, "inspect", "--model", model)
        assert out == model.read_text()


class TestCv:
    args = ("cv", "--data", DATASETS / "tae.csv", "--schema", DATASETS / "tae.schema",
            "--repeats", 2, "--folds", 4, "--seed", 7, "--theta", 1, "--delta", 0.1)

    def test_byte_identical(self, capsys):
        first = run(capsys, *self.args)
        second = run(capsys, *self.args)
        assert first[0] == 0 and first[1] == second[1]
        header, row = first[1].splitlines()
        assert header == "dataset,method,params,mean_cba,std_cba"
        assert row.startswith("tae,gfmm-v1,theta=1;delta=0.1;alpha=auto;gamma=1,")

    def test_out_append(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        run(capsys, *self.args, "--out", out)
        run(capsys, *self.args, "--variant", "v2", "--out", out, "--append")
        rows = persist.read_results_table(out)
        assert [r.method for r in rows] == ["gfmm-v1", "gfmm-v2"]

    def test_jobs_same_output(self, capsys):
        assert run(capsys, *self.args, "--jobs", 2)[1] == run(capsys, *self.args)[1]

    def test_bad_alpha(self, capsys):
        code, _, err = run(capsys, *self.args, "--alpha", "bogus")
        assert code == 1 and "alpha" in err


class TestTuneAndEstimate:
    def test_tune(self, capsys):
        code, out, _ = run(capsys, "tune", "--data", DATASETS / "tae.csv", "--schema", DATASETS / "tae.schema",
                           "--grid-theta", "0.5,1", "--grid-delta", "0.1", "--grid-alpha", "0.2,0.8", "--seed", 1)
        assert code == 0
        assert out.startswith("theta=") and out.strip().endswith("variant=v1")

    def test_estimate_alpha(self, capsys):
        argv = ("estimate-alpha", "--data", DATASETS / "tae.csv", "--schema", DATASETS / "tae.schema",
                "--method", "v1", "--theta", 1, "--delta", 0.1, "--seed", 2)
        code, out, _ = run(capsys, *argv)
        assert code == 0 and 0.0 <= float(out) <= 1.0
        assert run(capsys, *argv)[1] == out

    def test_estimate_pure_numeric_is_data_error(self, tmp_path, capsys):
        (tmp_path / "s").write_text("a,continuous\ny,class\n")
        (tmp_path / "d.csv").write_text("a,y\n1,A\n2,B\n3,A\n4,B\n5,A\n6,B\n")
        code, _, err = run(capsys, "estimate-alpha", "--data", tmp_path / "d.csv", "--schema", tmp_path / "s",
                           "--method", "v2")
        assert code == 2 and "estimation undefined" in err


class TestStats:
    def test_table_fixture(self, capsys):
        code, out, _ = run(capsys, "stats", "friedman", "--table", DATA / "four_methods_theta01.csv", "--alpha", 0.05)
        assert code == 0
        values = dict(line.split("=", 1) for line in out.splitlines() if line.startswith(("F_F", "chi2_F", "decision")))
        assert float(values["F_F"]) == pytest.approx(5.554, abs=0.02)
        assert values["decision"] == "reject"
        assert "nemenyi CD=" in out

    def test_results_table_input(self, tmp_path, capsys):
        rows = []
        with open(DATA / "four_methods_theta01.csv", newline="") as fh:
            reader = csv.reader(fh)
            methods = next(reader)[1:]
            for cells in reader:
                rows += [persist.ResultRow(cells[0], m, "p", float(v), 0.0) for m, v in zip(methods, cells[1:])]
        persist.write_results_table(rows, tmp_path / "r.csv")
        code, out, _ = run(capsys, "stats", "friedman", "--table", tmp_path / "r.csv")
        assert code == 0 and "F_F=5.55" in out

    def test_degenerate_is_numeric_error(self, tmp_path, capsys):
        (tmp_path / "t.csv").write_text("dataset,a,b\nx,0.9,0.1\ny,0.8,0.2\n")
        code, _, err = run(capsys, "stats", "friedman", "--table", tmp_path / "t.csv")
        assert code == 3 and "error" in err


class TestExitCodes:
    def test_usage(self, capsys):
        assert run(capsys, "fit")[0] == 1
        assert run(capsys, "nonsense")[0] == 1
        assert run(capsys)[0] == 1

    def test_bad_theta_is_usage(self, toy, capsys):
        code, _, _ = run(capsys, "fit", "--data", toy / "toy.csv", "--schema", toy / "toy.schema",
                         "--theta", 2, "--model-out", toy / "m")
        assert code == 1

    def test_missing_file(self, toy, capsys):
        code, _, err = run(capsys, "fit", "--data", toy / "nope.csv", "--schema", toy / "toy.schema",
                           "--model-out", toy / "m")
        assert code == 2 and "error" in err

    def test_bad_data(self, toy, capsys):
        (toy / "bad.csv").write_text("size,weight,colour,label\n1,?,red,small\n")
        code, _, err = run(capsys, "fit", "--data", toy / "bad.csv", "--schema", toy / "toy.schema",
                           "--model-out", toy / "m")
        assert code == 2 and "line 2" in err

    def test_corrupted_model(self, toy, capsys):
        (toy / "m.gfmm").write_text("GFMM-MODEL 9\n")
        code, _, err = run(capsys, "inspect", "--model", toy / "m.gfmm")
        assert code == 2 and "version" in err

    def test_checksum_failure(self, toy, capsys):
        model = toy / "m.gfmm"
        run(capsys, "fit", "--data", toy / "toy.csv", "--schema", toy / "toy.schema", "--model-out", model)
        model.write_text(model.read_text().replace("n=1 ", "n=2 ", 1))
        code, _, err = run(capsys, "predict", "--model", model, "--data", toy / "toy.csv")
        assert code == 2 and "checksum" in err


def test_module_entry_point(toy):
    proc = subprocess.run(
        [sys.executable, "-m", "mixed_gfmm", "fit", "--data", str(toy / "toy.csv"), "--schema",
         str(toy / "toy.schema"), "--model-out", str(toy / "m.gfmm")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "trained on 6 samples" in proc.stderr and proc.stdout == ""
