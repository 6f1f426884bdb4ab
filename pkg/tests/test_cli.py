import subprocess
import sys

import numpy as np
import pytest

from obbkit.cli import build_parser, run
from obbkit.formats import read_tensor, write_tensor

SQUARE = "0 0 4 0 4 4 0 4\n"
SUBCOMMANDS = ["iou", "nms", "decode", "encode", "roialign", "proposals", "postprocess", "tile", "merge",
               "eval-map", "eval-recall"]


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return _write


def test_iou_identical_quads(write, capsys):
    a = write("a.txt", SQUARE)
    assert run(["iou", "--quads", a, a]) == 0
    assert capsys.readouterr().out == "1.000000\n"


def test_iou_pairwise_hboxes(write, capsys):
    a = write("a.txt", "0 0 2 2\n")
    b = write("b.txt", "0 0 2 2\n1 0 2 2\n")
    assert run(["iou", "--hboxes", a, b, "--pairwise"]) == 0
    assert capsys.readouterr().out == "1.000000 0.333333\n"


def test_eval_map_perfect(write, capsys):
    ann = write("ann.txt", "0 0 4 0 4 4 0 4 ship 0\n10 10 14 10 14 14 10 14 plane 0\n")
    det = write("det.txt", "ship 0.9 0 0 4 0 4 4 0 4\nplane 0.8 10 10 14 10 14 14 10 14\n")
    assert run(["eval-map", "--pair", det, ann]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "mAP 1.000000"
    assert out[:2] == ["ship 1.000000", "plane 1.000000"]


def test_roialign_constant_tensor(tmp_path, capsys):
    feat = tmp_path / "f.obbt"
    write_tensor(np.full((2, 40, 40), 3.5), feat)
    assert run(["roialign", "--feat", str(feat), "--roi", "25 12 8 4 0", "--m", "7"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["3.500000 3.500000"] * 49


def test_roialign_tensor_out_and_rects(write, tmp_path, capsys):
    feat = tmp_path / "f.obbt"
    write_tensor(np.ones((1, 32, 32)), feat)
    rects = write("rects.txt", "100 48 32 16 0.3\n60 60 16 16 0\n")
    out = tmp_path / "o.obbt"
    assert run(["roialign", "--feat", str(feat), "--rects", rects, "--stride", "4", "--m", "3",
                "--tensor-out", str(out)]) == 0
    assert read_tensor(out).shape == (2, 3, 3, 1)
    assert capsys.readouterr().out.count("\n") == 2 * 9 + 1


def test_decode_encode_roundtrip(write, capsys):
    anchors = write("anchors.txt", "10 20 16 32\n")
    gt = write("gt.txt", "12 18 20 30 3 -4\n")
    assert run(["encode", "--anchors", anchors, "--gt", gt, "--gt-format", "midpoint"]) == 0
    deltas = write("deltas.txt", capsys.readouterr().out)
    assert run(["decode", "--anchors", anchors, "--deltas", deltas]) == 0
    got = np.array(capsys.readouterr().out.split(), float)
    # deltas pass through six printed decimals, scaled by sizes up to 30
    np.testing.assert_allclose(got, [12, 18, 20, 30, 3, -4], atol=1e-4)


def test_pipeline_commands(write, tmp_path, capsys):
    level = write("l0.txt", "0.9 50 50 20 10 2 1\n0.8 50 50 20 10 2 1\n0.7 300 300 20 10 0 0\n")
    assert run(["proposals", level]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2

    dets = write("d.txt", "ship 0.9 0 0 4 0 4 4 0 4\nship 0.8 0 0 4 0 4 4 0 4\nship 0.01 9 9 12 9 12 12 9 12\n")
    assert run(["postprocess", dets]) == 0
    assert capsys.readouterr().out.startswith("ship 0.900000 ")
    assert run(["nms", dets, "--iou-thr", "0.5"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2

    assert run(["merge", "--input", dets, "0", "0", "--input", dets, "100", "0"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 4

    ann = write("ann.txt", "100 100 120 100 120 120 100 120 ship 0\n1800 100 1820 100 1820 120 1800 120 car 0\n")
    out_dir = tmp_path / "tiles"
    assert run(["tile", "--width", "2048", "--height", "1024", "--ann", ann, "--out-dir", str(out_dir)]) == 0
    assert capsys.readouterr().out == "0 0\n824 0\n1024 0\n"
    assert (out_dir / "0_0.txt").read_text().split()[-2:] == ["ship", "0"]
    assert (out_dir / "1024_0.txt").read_text().split()[-2:] == ["car", "0"]


def test_eval_recall(write, capsys):
    ann = write("ann.txt", "0 0 4 0 4 4 0 4 ship 0\n10 10 14 10 14 14 10 14 ship 0\n")
    props = write("p.txt", "0.9 0 0 4 0 4 4 0 4\n0.1 10 10 14 10 14 14 10 14\n")
    assert run(["eval-recall", "--pair", props, ann, "--k", "1", "2"]) == 0
    assert capsys.readouterr().out == "recall@1 0.500000\nrecall@2 1.000000\n"


def test_out_file(write, tmp_path, capsys):
    a = write("a.txt", SQUARE)
    target = tmp_path / "res.txt"
    assert run(["iou", "--quads", a, a, "--out", str(target)]) == 0
    assert target.read_text() == "1.000000\n" and capsys.readouterr().out == ""


def test_exit_codes(write, capsys):
    assert run([]) == 2
    assert run(["iou"]) == 2
    assert run(["nms", "x", "--iou-thr", "1.5"]) == 2
    bad = write("bad.txt", "0 0 4 0 4\n")
    assert run(["iou", "--quads", bad, bad]) == 1
    assert "line 1" in capsys.readouterr().err
    assert run(["iou", "--quads", "/nonexistent", "/nonexistent"]) == 1


def test_output_is_deterministic(write, capsys):
    dets = write("d.txt", "".join(f"c{i % 3} 0.{i + 10} {i} 0 {i + 5} 0 {i + 5} 5 {i} 5\n" for i in range(40)))
    outs = []
    for _ in range(2):
        assert run(["postprocess", dets, "--nms-thr", "0.3"]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] and outs[0]


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help(cmd, capsys):
    assert run([cmd, "--help"]) == 0
    assert "usage: obbkit " + cmd in capsys.readouterr().out


def test_parser_lists_all_subcommands():
    actions = [a for a in build_parser()._actions if a.dest == "command"]
    assert sorted(actions[0].choices) == sorted(SUBCOMMANDS)


def test_module_entry_point(write):
    a = write("a.txt", SQUARE)
    res = subprocess.run([sys.executable, "-m", "obbkit.cli", "iou", "--quads", a, a],
                         capture_output=True, text=True, env={"OBB_THREADS": "1", "PATH": ""}, check=False)
    assert res.returncode == 0 and res.stdout == "1.000000\n"
