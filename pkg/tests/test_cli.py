import hashlib
import time
from types import SimpleNamespace

import pytest

from truncsr.cli import main


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def smoke_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    args = ["--preset", "smoke", "--set", f"output_dir={root}"]
    start = time.perf_counter()
    assert main(["generate-data", *args]) == 0
    assert main(["train", "--stage", "1", *args]) == 0
    assert main(["train", "--stage", "2", *args]) == 0
    assert main(["stability-report", *args]) == 0
    return SimpleNamespace(root=root, args=args, elapsed=time.perf_counter() - start)


def test_smoke_flow_within_budget(smoke_dir):
    assert smoke_dir.elapsed < 60
    assert (smoke_dir.root / "config.yaml").exists()
    assert len(list((smoke_dir.root / "report").glob("montage_*.pgm"))) == 2


def test_loss_csv_columns(smoke_dir):
    lines = (smoke_dir.root / "stage1" / "loss.csv").read_bytes().split(b"\n")
    assert lines[0] == b"step,l_diff,l_T,l_t_max,total"
    assert len(lines) == 200 // 20 + 2 and lines[-1] == b""


def test_corpus_file_count(smoke_dir):
    train = smoke_dir.root / "data" / "train"
    assert len(list(train.glob("hr_*.pgm"))) == 8
    assert len(list(train.glob("lr_*.pgm"))) == 8
    assert (smoke_dir.root / "data" / "manifest.json").exists()


def test_generate_data_idempotent(smoke_dir):
    before = sha(smoke_dir.root / "data" / "manifest.json")
    assert main(["generate-data", *smoke_dir.args]) == 0
    assert sha(smoke_dir.root / "data" / "manifest.json") == before


def test_stability_report_byte_identical(smoke_dir):
    report = smoke_dir.root / "report"
    before = {p.name: sha(p) for p in report.glob("*.csv")}
    assert main(["stability-report", "--no-montage", *smoke_dir.args]) == 0
    assert {p.name: sha(p) for p in report.glob("*.csv")} == before
    assert set(before) == {"per_run.csv", "summary.csv"}


def test_single_run_marks_std_missing(smoke_dir, tmp_path, capsys):
    args = ["--preset", "smoke", "--set", f"output_dir={smoke_dir.root}", "--set", "n_runs=1"]
    assert main(["stability-report", "--no-montage", *args]) == 0
    text = (smoke_dir.root / "report" / "summary.csv").read_text()
    assert "psnr," in text and ",NA" in text
    assert "l_std\tNA" in capsys.readouterr().out
    # restore the N=2 report for other tests
    assert main(["stability-report", "--no-montage", *smoke_dir.args]) == 0


def test_dump_chain(smoke_dir, tmp_path):
    assert main(["dump-chain", "--image", "1", "--run", "0", "--out", str(tmp_path),
                 *smoke_dir.args]) == 0
    assert len(list(tmp_path.glob("step_*.f32"))) == 15
    assert main(["dump-chain", "--image", "9", "--out", str(tmp_path), *smoke_dir.args]) == 1


def test_invalid_kind_exits_nonzero(tmp_path, capsys):
    code = main(["generate-data", "--set", "data.kind=voxels", "--set", f"output_dir={tmp_path}"])
    assert code == 1
    assert "voxels" in capsys.readouterr().err


def test_bad_arguments_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1
    assert main(["show-config", "--set", "novalue"]) == 1


def test_stage2_without_stage1(tmp_path, capsys):
    code = main(["train", "--stage", "2", "--preset", "smoke", "--set", f"output_dir={tmp_path}"])
    assert code == 2
    assert "stage" in capsys.readouterr().err.lower()


def test_show_config_round_trips(capsys):
    from truncsr.config import ExperimentConfig, preset
    assert main(["show-config", "--preset", "smoke"]) == 0
    assert ExperimentConfig.from_yaml(capsys.readouterr().out) == preset("smoke")


def test_ablate_switch_grid(tmp_path):
    args = ["--preset", "smoke", "--set", f"output_dir={tmp_path}", "--set", "stage1.steps=40",
            "--set", "stage2.steps=4"]
    assert main(["ablate", "--grid", "switches", *args]) == 0
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    assert len(rows) == 4
    header = rows[0].split(",")
    arms = [dict(zip(header, r.split(","))) for r in rows[1:]]
    assert [a["arm"] for a in arms] == ["V1", "V2", "CCSR"]
    assert [a["default"] for a in arms] == ["0", "0", "1"]


def test_ablate_plan_grid_labels_default(tmp_path):
    args = ["--preset", "smoke", "--set", f"output_dir={tmp_path}", "--set", "stage1.steps=20",
            "--set", "stage2.steps=2", "--set", "ablation.decoder_finetune=false"]
    assert main(["ablate", "--grid", "plans", *args]) == 0
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    header = rows[0].split(",")
    arms = {r.split(",")[header.index("arm")]: dict(zip(header, r.split(","))) for r in rows[1:]}
    assert set(arms) == {f"plan-{n}" for n in ("A1", "A2", "default", "A3", "A4")}
    assert [name for name, a in arms.items() if a["default"] == "1"] == ["plan-default"]
    assert arms["plan-A1"]["total_evals"] == "8"
