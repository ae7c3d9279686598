import json
import struct

import numpy as np
import pytest
from PIL import Image

from embed_extract.cli import main
from embed_extract.extract import ExtractionConfig, extract


def make_images(path, n, size=40, seed=0):
    path.mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n):
        arr = rng.integers(0, 255, size=(size, size, 3), dtype=np.uint8)
        Image.fromarray(arr).save(path / f"img{i:02d}.png")


def read_femb_header(path):
    blob = open(path, "rb").read()
    magic, version, n, d = struct.unpack_from("<4sIQQ", blob, 0)
    return magic, version, n, d


class TestExtract:
    def test_ten_images_stub(self, tmp_path):
        make_images(tmp_path / "imgs", 10)
        out = str(tmp_path / "e.femb")
        result = extract(ExtractionConfig(images_dir=str(tmp_path / "imgs"), model="stub", out=out, size=64))
        assert result.n_embedded == 10
        magic, version, n, d = read_femb_header(out)
        assert magic == b"FEMB" and version == 1
        assert (n, d) == (10, result.dim)

    def test_ids_are_file_stems(self, tmp_path):
        make_images(tmp_path / "imgs", 3)
        out = str(tmp_path / "e.csv")
        extract(ExtractionConfig(images_dir=str(tmp_path / "imgs"), model="stub", out=out, size=32))
        lines = open(out).read().strip().splitlines()
        stems = [line.split(",")[0] for line in lines[1:]]
        assert stems == ["img00", "img01", "img02"]

    def test_deterministic_rerun_identical_bytes(self, tmp_path):
        make_images(tmp_path / "imgs", 6, seed=3)
        a = str(tmp_path / "a.femb")
        b = str(tmp_path / "b.femb")
        cfg = dict(images_dir=str(tmp_path / "imgs"), model="stub", size=64)
        extract(ExtractionConfig(out=a, **cfg))
        extract(ExtractionConfig(out=b, **cfg))
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_corrupt_image_skipped_with_manifest_warning(self, tmp_path):
        make_images(tmp_path / "imgs", 9)
        (tmp_path / "imgs" / "broken.png").write_bytes(b"this is not a png")
        out = str(tmp_path / "e.femb")
        result = extract(ExtractionConfig(images_dir=str(tmp_path / "imgs"), model="stub", out=out, size=32))
        assert result.n_embedded == 9
        assert len(result.skipped) == 1 and result.skipped[0][0] == "broken.png"
        manifest = json.load(open(result.manifest_path))
        assert manifest["embedded"] == 9
        assert manifest["skipped"][0]["file"] == "broken.png"

    def test_zero_successes_raises(self, tmp_path):
        d = tmp_path / "imgs"
        d.mkdir()
        (d / "bad.png").write_bytes(b"nope")
        with pytest.raises(RuntimeError):
            extract(ExtractionConfig(images_dir=str(d), model="stub", out=str(tmp_path / "e.femb")))

    def test_batching_matches_single_batch(self, tmp_path):
        make_images(tmp_path / "imgs", 7, seed=5)
        small = str(tmp_path / "small.femb")
        big = str(tmp_path / "big.femb")
        extract(ExtractionConfig(images_dir=str(tmp_path / "imgs"), model="stub", out=small, size=48, batch_size=2))
        extract(ExtractionConfig(images_dir=str(tmp_path / "imgs"), model="stub", out=big, size=48, batch_size=100))
        assert open(small, "rb").read() == open(big, "rb").read()


class TestTorchScriptBackbone:
    def test_scripted_module(self, tmp_path):
        torch = pytest.importorskip("torch")

        class Pool(torch.nn.Module):
            def forward(self, x):
                # (B, 3, H, W) -> (B, 12): channel means over image quadrants
                b = x.shape[0]
                h, w = x.shape[2] // 2, x.shape[3] // 2
                quads = [
                    x[:, :, :h, :w], x[:, :, :h, w:], x[:, :, h:, :w], x[:, :, h:, w:]
                ]
                return torch.cat([q.mean(dim=(2, 3)) for q in quads], dim=1).reshape(b, 12)

        model_path = str(tmp_path / "pool.pt")
        torch.jit.script(Pool()).save(model_path)
        make_images(tmp_path / "imgs", 4, seed=1)
        out = str(tmp_path / "e.femb")
        result = extract(ExtractionConfig(images_dir=str(tmp_path / "imgs"), model=model_path, out=out, size=32))
        assert result.n_embedded == 4 and result.dim == 12


class TestCli:
    def test_cli_roundtrip(self, tmp_path):
        make_images(tmp_path / "imgs", 5)
        out = str(tmp_path / "e.femb")
        code = main(["--images", str(tmp_path / "imgs"), "--model", "stub", "--size", "64", "--out", out])
        assert code == 0
        magic, _, n, _ = read_femb_header(out)
        assert magic == b"FEMB" and n == 5

    def test_cli_bad_dir_exit_2(self, tmp_path):
        assert main(["--images", str(tmp_path / "missing"), "--model", "stub", "--out", str(tmp_path / "e.femb")]) == 2

    def test_cli_zero_success_exit_3(self, tmp_path):
        d = tmp_path / "imgs"
        d.mkdir()
        (d / "bad.jpg").write_bytes(b"junk")
        assert main(["--images", str(d), "--model", "stub", "--out", str(tmp_path / "e.femb")]) == 3

    def test_cli_unknown_model_exit_2(self, tmp_path):
        make_images(tmp_path / "imgs", 1)
        assert main(["--images", str(tmp_path / "imgs"), "--model", "wat", "--out", str(tmp_path / "e.femb")]) == 2
