import json
import shutil

import numpy as np
import pytest
import torch
from PIL import Image

from langanim import cli
from langanim.backends.toy import VocabularyError, render
from langanim.checkpoint import CheckpointError
from langanim.config import TrainConfig
from langanim.core import ConfigurationError, to_uint8
from langanim.export import (contact_sheet, frame_name, list_videos, read_frame, read_frames,
                             read_manifest, write_frames, write_manifest)
from langanim.model import generate
from langanim.trainer import Trainer
from langanim.workflows import (AnimationRequest, animate, chain, evaluate, load_trained, replay,
                                write_report)

SMILE, EYES = "the face is smiling", "the face is closing eyes"


@pytest.fixture(scope="module")
def ckpt(tmp_path_factory):
    d = tmp_path_factory.mktemp("ckpt")
    tr = Trainer(TrainConfig(batch_size=2, T=4, iterations=20, seed=2))
    tr.fit(checkpoint_dir=d)
    return tr.last_checkpoint


@pytest.fixture(scope="module")
def real_ckpt(tmp_path_factory):
    d = tmp_path_factory.mktemp("real")
    tr = Trainer(TrainConfig(batch_size=2, T=4, iterations=3, seed=2, mode="real_image"))
    tr.fit(checkpoint_dir=d)
    return tr.last_checkpoint


def files(d):
    return sorted(p.name for p in d.iterdir())


def frame_bytes(d):
    return [p.read_bytes() for p in sorted(d.glob("frame_*.png"))]


# export ------------------------------------------------------------------------------------

def test_frame_names():
    assert frame_name(1) == "frame_0001.png"
    assert frame_name(32) == "frame_0032.png"
    assert frame_name(12345) == "frame_12345.png"
    with pytest.raises(ValueError):
        frame_name(0)


def test_frames_round_trip_losslessly(tmp_path):
    a = torch.rand(3, 4, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    imgs = render(a)
    write_frames(imgs, tmp_path)
    assert files(tmp_path) == ["frame_0001.png", "frame_0002.png", "frame_0003.png"]
    back = read_frames(tmp_path)
    assert back.dtype == np.uint8 and back.shape == (3, 64, 64, 3)
    assert np.array_equal(back, to_uint8(imgs))


def test_manifest_schema(tmp_path):
    write_manifest(tmp_path, {"prompt": "x"})
    m = read_manifest(tmp_path)
    assert m == {"schema_version": 1, "prompt": "x"}
    (tmp_path / "manifest.json").write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(ValueError, match="schema"):
        read_manifest(tmp_path / "manifest.json")


def test_contact_sheet_layout():
    frames = [np.full((4, 5, 3), k, np.uint8) for k in range(10)]
    sheet = contact_sheet(frames, columns=4, pad=1)
    assert sheet.shape == (3 * 5 + 1, 4 * 6 + 1, 3)
    assert sheet[1, 1, 0] == 0 and sheet[1 + 5, 1 + 6, 0] == 5
    assert sheet[0, 0, 0] == 255


def test_list_videos(tmp_path):
    write_frames([np.zeros((2, 2, 3), np.uint8)] * 2, tmp_path / "b")
    write_frames([np.zeros((2, 2, 3), np.uint8)] * 3, tmp_path / "a")
    (tmp_path / "empty").mkdir()
    videos, loose = list_videos(tmp_path)
    assert list(videos) == ["a", "b"] and [len(v) for v in videos.values()] == [3, 2]
    assert loose == []


# animate / chain / replay ---------------------------------------------------------------------

def test_animate_writes_frames_and_manifest(ckpt, tmp_path):
    res = animate(AnimationRequest(7, [SMILE], ckpt, tmp_path / "a", seed=3, contact_sheet=True))
    names = files(tmp_path / "a")
    assert names == ["contact_sheet.png"] + [frame_name(i) for i in range(1, 17)] + ["manifest.json"]
    m = read_manifest(res.manifest)
    assert m["prompt"] == SMILE and m["seed"] == 3 and m["kind"] == "animate"
    assert m["source"] == {"sample_seed": 7}
    assert m["config_hash"] == load_trained(ckpt)[0].config.hash()
    assert len(m["displacement_norms"]) == 15 and len(m["frames"]) == 16
    assert m["frames"][0]["step_norm"] is None
    assert m["frames"][5]["step_norm"] == pytest.approx(m["displacement_norms"][4])
    assert all(r["segment"] == 1 and r["prompt"] == SMILE for r in m["frames"])


def test_single_frame_is_first_code(ckpt, tmp_path):
    animate(AnimationRequest(7, [SMILE], ckpt, tmp_path, frames_per_prompt=1))
    assert files(tmp_path) == ["frame_0001.png", "manifest.json"]
    _, model, backends = load_trained(ckpt)
    (seg,) = generate(model, backends, 7, [SMILE], 1)
    expect = to_uint8(backends.synthesizer.synthesize(seg.codes[0]))
    assert np.array_equal(read_frame(tmp_path / "frame_0001.png"), expect)


def test_animate_is_bit_identical(ckpt, tmp_path):
    for d in ("x", "y"):
        animate(AnimationRequest(4, [EYES], ckpt, tmp_path / d, seed=9))
    assert frame_bytes(tmp_path / "x") == frame_bytes(tmp_path / "y")
    assert (tmp_path / "x" / "manifest.json").read_text() == (tmp_path / "y" / "manifest.json").read_text()


def test_chain_numbering_and_segments(ckpt, tmp_path):
    res = chain(AnimationRequest(7, [SMILE, EYES], ckpt, tmp_path))
    assert [p.name for p in res.frames] == [frame_name(i) for i in range(1, 33)]
    m = read_manifest(tmp_path)
    assert m["kind"] == "chain" and m["prompt"] is None and m["prompts"] == [SMILE, EYES]
    assert [r["segment"] for r in m["frames"]] == [1] * 16 + [2] * 16
    assert len(m["displacement_norms"]) == 31


def test_identical_prompt_chain_has_no_seam_jump(ckpt, tmp_path):
    steps = chain(AnimationRequest(7, [SMILE, SMILE], ckpt, tmp_path)).step_norms
    # steps[15] is frame 16 -> 17
    assert steps[15] <= steps[14]


def test_single_prompt_chain_equals_animate(ckpt, tmp_path):
    chain(AnimationRequest(5, [SMILE], ckpt, tmp_path / "c", seed=1))
    animate(AnimationRequest(5, [SMILE], ckpt, tmp_path / "a", seed=1))
    assert frame_bytes(tmp_path / "c") == frame_bytes(tmp_path / "a")
    assert read_manifest(tmp_path / "c")["kind"] == "animate"


def test_replay_is_bit_identical(ckpt, tmp_path):
    chain(AnimationRequest(8, [EYES, SMILE], ckpt, tmp_path / "orig", frames_per_prompt=5, seed=4))
    replay(tmp_path / "orig" / "manifest.json", tmp_path / "again")
    assert frame_bytes(tmp_path / "orig") == frame_bytes(tmp_path / "again")
    assert read_manifest(tmp_path / "again") == read_manifest(tmp_path / "orig")


def test_replay_refuses_changed_checkpoint(ckpt, tmp_path):
    local = tmp_path / "ck.npz"
    shutil.copy(ckpt, local)
    animate(AnimationRequest(1, [SMILE], local, tmp_path / "a", frames_per_prompt=2))
    Trainer(TrainConfig(batch_size=2, T=4, iterations=0, seed=3)).save(local)
    with pytest.raises(ConfigurationError, match="changed"):
        replay(tmp_path / "a" / "manifest.json", tmp_path / "b")


def test_real_image_animation(real_ckpt, tmp_path):
    src = tmp_path / "face.png"
    Image.fromarray(to_uint8(render(torch.tensor([0.5, 0.4, 0.6, 0.5])))).save(src)
    animate(AnimationRequest(src, [SMILE], real_ckpt, tmp_path / "out", frames_per_prompt=3))
    m = read_manifest(tmp_path / "out")
    assert m["source"]["image"] == str(src.resolve()) and len(m["source"]["image_sha256"]) == 64
    with pytest.raises(ConfigurationError, match="--image"):
        animate(AnimationRequest(3, [SMILE], real_ckpt, tmp_path / "bad"))


def test_request_errors(ckpt, tmp_path):
    with pytest.raises(ConfigurationError):
        AnimationRequest(1, [], ckpt, tmp_path)
    with pytest.raises(ConfigurationError):
        AnimationRequest(1, [SMILE], ckpt, tmp_path, frames_per_prompt=0)
    with pytest.raises(ConfigurationError):
        animate(AnimationRequest(1, [SMILE, EYES], ckpt, tmp_path))
    with pytest.raises(VocabularyError):
        animate(AnimationRequest(1, ["the face is sneezing"], ckpt, tmp_path))
    with pytest.raises(CheckpointError):
        animate(AnimationRequest(1, [SMILE], tmp_path / "nope.npz", tmp_path))


# evaluate ----------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def videos(ckpt, tmp_path_factory):
    root = tmp_path_factory.mktemp("videos")
    for k, prompt in enumerate((SMILE, EYES, SMILE)):
        animate(AnimationRequest(k, [prompt], ckpt, root / f"v{k}", frames_per_prompt=6))
        (root / f"v{k}" / "manifest.json").unlink()
    return root


def test_self_fid_and_report_fields(videos, tmp_path):
    report = evaluate(videos, videos, cache_dir=tmp_path / "cache")
    assert report["fid"] <= 1e-6
    assert {"fid", "acd", "n_videos", "n_frames", "embedder"} <= set(report)
    assert (report["n_videos"], report["n_frames"], report["n_ref_frames"]) == (3, 18, 18)
    assert report["embedder"] == "toy-encoder"
    assert report["acd"] > 0
    path = write_report(report, tmp_path / "r" / "report.json")
    assert json.loads(path.read_text()) == report
    assert evaluate(videos, videos, cache_dir=tmp_path / "cache") == report


def test_acd_zero_for_identical_frames(tmp_path):
    frame = to_uint8(render(torch.full((4,), 0.5)))
    write_frames([frame] * 5, tmp_path / "v")
    assert evaluate(tmp_path, metrics=["acd"])["acd"] == 0.0


def test_evaluate_errors(videos, tmp_path):
    write_frames([np.zeros((64, 64, 3), np.uint8)] * 2, tmp_path / "loose")
    with pytest.raises(ConfigurationError, match="subdirectory"):
        evaluate(tmp_path / "loose", metrics=["acd"])
    (tmp_path / "empty").mkdir()
    with pytest.raises(FileNotFoundError):
        evaluate(tmp_path / "empty")
    with pytest.raises(ConfigurationError, match="reference"):
        evaluate(videos, metrics=["fid"])
    with pytest.raises(ConfigurationError, match="unknown metrics"):
        evaluate(videos, metrics=["psnr"])


# command line ------------------------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_end_to_end(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "train", "--set", "train.iterations=2", "--set", "train.T=3",
                           "--set", "train.batch_size=2", "--out", tmp_path / "ck")
    assert code == 0
    ck = tmp_path / "ck" / "final.npz"
    assert out.strip() == str(ck) and (tmp_path / "ck" / "config.ini").exists()

    code, out, _ = run_cli(capsys, "chain", "--checkpoint", ck, "--sample-seed", 2, "--text", SMILE,
                           "--text", EYES, "--frames", 4, "--out", tmp_path / "v" / "c", "--seed", 1)
    assert code == 0 and len(list((tmp_path / "v" / "c").glob("frame_*.png"))) == 8
    code, _, _ = run_cli(capsys, "animate", "--replay", tmp_path / "v" / "c" / "manifest.json",
                         "--out", tmp_path / "r")
    assert code == 0 and frame_bytes(tmp_path / "r") == frame_bytes(tmp_path / "v" / "c")

    (tmp_path / "v" / "c" / "manifest.json").unlink()
    code, out, _ = run_cli(capsys, "evaluate", tmp_path / "v", "--ref", tmp_path / "v",
                           "--out", tmp_path / "report.json")
    assert code == 0 and json.loads(out)["n_frames"] == 8
    assert (tmp_path / "report.json").exists()


def test_cli_resume(tmp_path, capsys):
    args = ("--set", "train.T=3", "--set", "train.batch_size=2")
    assert run_cli(capsys, "train", *args, "--set", "train.iterations=2", "--out", tmp_path / "a")[0] == 0
    assert run_cli(capsys, "train", *args, "--set", "train.iterations=4", "--out", tmp_path / "b",
                   "--checkpoint", tmp_path / "a" / "final.npz")[0] == 0
    assert run_cli(capsys, "train", *args, "--set", "train.iterations=4", "--out", tmp_path / "c")[0] == 0
    a, b = (np.load(tmp_path / d / "final.npz") for d in ("b", "c"))
    params = [k for k in a.files if k.startswith("param/")]
    assert params and all(np.array_equal(a[k], b[k]) for k in params)


def test_cli_check_backend_ok(capsys):
    code, out, _ = run_cli(capsys, "check-backend")
    assert code == 0 and "backend: toy" in out


@pytest.mark.parametrize("argv", [
    ["check-backend", "--set", "train.bogus=1"],
    ["check-backend", "--set", "nodot"],
    ["train", "--set", "train.batch_size=0", "--out", "unused"],
])
def test_cli_config_errors_exit_2(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = run_cli(capsys, *argv)
    assert code == 2 and "config error" in err


def test_cli_unknown_prompt_and_source_exit_2(ckpt, tmp_path, capsys):
    code, _, err = run_cli(capsys, "animate", "--checkpoint", ckpt, "--sample-seed", 1,
                           "--text", "the face is sneezing", "--out", tmp_path)
    assert code == 2 and "the face is smiling" in err
    code, _, _ = run_cli(capsys, "animate", "--checkpoint", ckpt, "--text", SMILE, "--out", tmp_path)
    assert code == 2


def test_cli_backend_failure_exit_3(monkeypatch, capsys):
    monkeypatch.setenv("LANGANIM_BACKEND", "external:no_such_adapter_module")
    code, _, err = run_cli(capsys, "check-backend")
    assert code == 3 and "no_such_adapter_module" in err


def test_cli_runtime_failure_exit_4(tmp_path, capsys):
    code, _, err = run_cli(capsys, "animate", "--checkpoint", tmp_path / "missing.npz",
                           "--sample-seed", 1, "--text", SMILE, "--out", tmp_path / "o")
    assert code == 4 and "missing.npz" in err
