import csv
import subprocess
import sys

import pytest

from imgvirality.cli import LOCK_NAME, main
from imgvirality.fixtures import golden_scores_12, submissions_12

SPEC = """\
n_images = 120
n_categories = 3
resub_dist = poisson:2
n_planted_viral = 6
n_attributes = 4
feature_dim = 6
"""


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth(tmp_path):
    spec = tmp_path / "synth.cfg"
    spec.write_text(SPEC)
    assert run("synth", "--spec", spec, "--seed", "1", "--out", tmp_path / "s") == 0
    assert run("score", "--submissions", tmp_path / "s/submissions.jsonl",
               "--min-category-submissions", "1", "--out", tmp_path / "score") == 0
    assert run("dataset", "--mode", "topbottom", "--scores", tmp_path / "score/scores.csv",
               "--k", "30", "--out", tmp_path / "d") == 0
    assert run("synth", "--pairs", tmp_path / "d/pairs.csv", "--truth", tmp_path / "s/truth.csv",
               "--out", tmp_path / "a") == 0
    return tmp_path


class TestScore:
    def test_fixture(self, tmp_path, capsys):
        assert run("score", "--submissions", submissions_12(), "--min-category-submissions", "1",
                   "--out", tmp_path) == 0
        rows = list(csv.DictReader((tmp_path / "scores.csv").open()))
        assert [r["image_id"] for r in rows] == ["doge", "grumpy", "higgs", "kitten"]
        golden = {r["image_id"]: float(r["virality"]) for r in csv.DictReader(golden_scores_12().open())}
        for r in rows:
            assert float(r["virality"]) == pytest.approx(golden[r["image_id"]], rel=1e-11)
        assert "m_bar: 3" in capsys.readouterr().out

    def test_missing_input(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run("score", "--submissions", tmp_path / "nope.jsonl", "--out", out) == 2
        assert "error: E_NO_INPUT" in capsys.readouterr().err
        assert not out.exists()

    def test_data_error(self, tmp_path, capsys):
        bad = tmp_path / "subs.jsonl"
        bad.write_text('{"image_id":"a","category":"c","hour_bucket":0,"ups":1,"downs":0}\n' * 2)
        assert run("score", "--submissions", bad, "--min-category-submissions", "1", "--out", tmp_path / "o") == 3
        assert "E_DUPLICATE_EVENT" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_csv_format(self, tmp_path):
        src = tmp_path / "subs.csv"
        src.write_text("image_id,category,hour_bucket,ups,downs\na,c,0,5,1\nb,c,0,3,0\na,c,1,2,0\n")
        assert run("score", "--submissions", src, "--format", "csv", "--min-category-submissions", "1",
                   "--out", tmp_path) == 0
        assert (tmp_path / "scores.csv").read_text().count("\n") == 3

    def test_idempotent(self, tmp_path):
        for out in ("a", "b"):
            run("score", "--submissions", submissions_12(), "--min-category-submissions", "1",
                "--out", tmp_path / out)
        assert (tmp_path / "a/scores.csv").read_bytes() == (tmp_path / "b/scores.csv").read_bytes()


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert run("frobnicate") == 2

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"submissions = {submissions_12()}\nmin-category-submissions = 1\n")
        assert run("score", "--config", cfg, "--out", tmp_path / "o") == 0
        assert (tmp_path / "o/scores.csv").exists()

    def test_flag_beats_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"submissions = {submissions_12()}\nmin_category_submissions = 1000\n")
        assert run("score", "--config", cfg, "--out", tmp_path / "o") == 3
        capsys.readouterr()
        assert run("score", "--config", cfg, "--min-category-submissions", "1", "--out", tmp_path / "o") == 0

    @pytest.mark.parametrize("text", ["bogus = 1\n", "min-category-submissions = many\n", "no equals sign\n"])
    def test_bad_config(self, tmp_path, capsys, text):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(text)
        assert run("score", "--config", cfg, "--submissions", submissions_12()) == 2
        assert "E_BAD_CONFIG" in capsys.readouterr().err

    def test_lock(self, tmp_path, capsys):
        (tmp_path / LOCK_NAME).write_text("")
        assert run("score", "--submissions", submissions_12(), "--min-category-submissions", "1",
                   "--out", tmp_path) == 3
        assert "E_LOCKED" in capsys.readouterr().err
        assert not (tmp_path / "scores.csv").exists()

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "imgvirality", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "score" in proc.stdout


class TestPipeline:
    def test_outputs(self, synth):
        assert (synth / "s/features.csv").read_text().startswith("#dim=6\n")
        assert (synth / "d/pairs.csv").read_text().count("\n") == 31
        assert (synth / "d/dichotomy.csv").exists()
        assert (synth / "a/annotations.csv").read_text().count("\n") == 1 + 30 * 4 * 5

    def test_random_mix_and_category(self, synth, capsys):
        assert run("dataset", "--mode", "random-mix", "--scores", synth / "score/scores.csv",
                   "--k", "10", "--n-pairs", "40", "--out", synth / "rm") == 0
        assert "random-mix pairs" in capsys.readouterr().out
        assert run("dataset", "--mode", "category", "--submissions", synth / "s/submissions.jsonl",
                   "--min-category-submissions", "1", "--categories", "cat00,cat01",
                   "--per-category", "3", "--out", synth / "cat") == 0
        lines = (synth / "cat/categories.csv").read_text().splitlines()
        assert lines[0] == "category,rank,image_id,dominance_ratio" and len(lines) == 7

    def test_dataset_needs_scores(self, synth, capsys):
        assert run("dataset", "--mode", "topbottom", "--out", synth / "x") == 2
        assert "E_BAD_USAGE" in capsys.readouterr().err

    def test_correlate_and_greedy(self, synth, capsys):
        args = ["--pairs", synth / "d/pairs.csv", "--annotations", synth / "a/annotations.csv"]
        assert run("correlate", *args, "--out", synth / "c") == 0
        assert (synth / "c/correlations.csv").read_text().count("\n") == 5
        assert run("greedy", *args, "--max-size", "3", "--mode", "force", "--out", synth / "g") == 0
        assert (synth / "g/trace.csv").read_text().startswith("step,direction,attribute,correlation\n")
        assert run("greedy", *args, "--seed-attribute=-attr01", "--out", synth / "g2") == 0
        assert (synth / "g2/trace.csv").read_text().splitlines()[1].startswith("1,down,attr01,")

    def test_train_predict(self, synth):
        feats, pairs = synth / "s/features.csv", synth / "d/pairs.csv"
        assert run("train", "--features", feats, "--pairs", pairs, "--out", synth / "m") == 0
        assert run("predict", "--model", synth / "m/model.txt", "--features", feats, "--pairs", pairs,
                   "--out", synth / "p") == 0
        lines = (synth / "p/predictions.csv").read_text().splitlines()
        assert lines[0] == "id,label,margin" and len(lines) == 31

    def test_absolute_task(self, synth):
        rows = list(csv.DictReader((synth / "d/dichotomy.csv").open()))
        labels = synth / "labels.csv"
        labels.write_text("image_id,label\n" + "".join(
            f"{r['image_id']},{1 if r['side'] == 'viral' else -1}\n" for r in rows))
        assert run("cv", "--task", "absolute", "--features", synth / "s/features.csv",
                   "--labels", labels, "--folds", "5", "--out", synth / "abs") == 0
        assert "absolute,all,60," in (synth / "abs/accuracy.csv").read_text()

    def test_cv_and_report(self, synth, capsys):
        feats, pairs = synth / "s/features.csv", synth / "d/pairs.csv"
        assert run("cv", "--features", feats, "--pairs", pairs, "--folds", "5", "--out", synth / "cv") == 0
        assert run("cv", "--task", "attribute", "--features", feats, "--pairs", pairs,
                   "--annotations", synth / "a/annotations.csv", "--folds", "5", "--out", synth / "att") == 0
        text = (synth / "att/accuracy.csv").read_text()
        assert "attribute:attr00,all,30," in text and "attribute:attr03:two_class" in text
        assert run("report", "--entry", f"svm,top/bottom,{synth / 'cv/accuracy.csv'}",
                   "--out", synth / "r") == 0
        assert "svm" in (synth / "r/comparison.txt").read_text()
        assert run("report", "--comparison", synth / "r/comparison.csv", "--out", synth / "r2") == 0
        assert (synth / "r2/comparison.csv").read_text() == (synth / "r/comparison.csv").read_text()

    def test_proxies(self, synth):
        assert run("proxies", "--features", synth / "s/features.csv", "--pairs", synth / "d/pairs.csv",
                   "--condition", "all", "--out", synth / "px") == 0
        lines = (synth / "px/proxies.csv").read_text().splitlines()
        assert len(lines) == 1 + 30 * 3
        assert {line.split(",")[1] for line in lines[1:]} == {"viral_nn", "nonviral_nn", "random"}

    def test_synth_annotation_needs_both(self, synth, capsys):
        assert run("synth", "--pairs", synth / "d/pairs.csv", "--out", synth / "x") == 2
