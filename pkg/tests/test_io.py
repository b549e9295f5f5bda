import json

import numpy as np
import pytest

from kpbms import io as kio
from kpbms.bbox import BoundingBox, BoxSet
from kpbms.fixtures import make_fixture_set
from kpbms.imaging import Keypoint, KeypointSet
from kpbms.saliency import SaliencyConfig


@pytest.fixture
def dataset_dir(tmp_path):
    scenes = make_fixture_set(3, "clean", seed=2, width=64, height=48)
    kio.write_dataset(tmp_path, scenes, split="test")
    return tmp_path, scenes


class TestLoadDataset:
    def test_happy_path(self, dataset_dir):
        root, scenes = dataset_dir
        index = kio.load_dataset(root, "test")
        assert len(index) == 3 and index.report.ok
        assert [e.split for e in index] == ["test"] * 3

    def test_round_trip_exact(self, dataset_dir):
        root, scenes = dataset_dir
        index = kio.load_dataset(root, "all")
        for entry, scene in zip(index, scenes):
            assert entry.image_id == scene.image_id
            assert entry.keypoints == scene.keypoints
            np.testing.assert_array_equal(entry.load_image(), scene.image)

    def test_corrupt_annotation(self, dataset_dir):
        root, scenes = dataset_dir
        (root / "test" / "annotations" / f"{scenes[1].image_id}.json").write_text("{not json")
        index = kio.load_dataset(root, "test")
        assert len(index) == 2
        assert [name for name, _ in index.report.failures] == [scenes[1].image_id]

    def test_out_of_bounds_keypoint(self, dataset_dir):
        root, scenes = dataset_dir
        path = root / "test" / "annotations" / f"{scenes[0].image_id}.json"
        obj = json.loads(path.read_text())
        obj["keypoints"].append({"x": 500, "y": 3, "direct": False})
        path.write_text(json.dumps(obj))
        index = kio.load_dataset(root, "test")
        assert len(index) == 2
        (name, msg), = index.report.failures
        assert name == scenes[0].image_id and "(500, 3)" in msg and scenes[0].image_id in msg

    def test_missing_annotation_skipped(self, dataset_dir):
        root, scenes = dataset_dir
        (root / "test" / "annotations" / f"{scenes[2].image_id}.json").unlink()
        index = kio.load_dataset(root, "test")
        assert len(index) == 2 and index.report.skipped == [scenes[2].image_id]

    def test_unreadable_root(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            kio.load_dataset(tmp_path / "nope")

    def test_missing_split(self, dataset_dir):
        with pytest.raises(FileNotFoundError):
            kio.load_dataset(dataset_dir[0], "train")

    def test_flat_layout_and_adapter(self, tmp_path):
        scenes = make_fixture_set(2, "clean", seed=4, width=40, height=30)
        kio.write_dataset(tmp_path, scenes)
        for s in scenes:
            path = tmp_path / "annotations" / f"{s.image_id}.json"
            obj = json.loads(path.read_text())
            path.write_text(json.dumps({"name": obj["image"], "points": [[k["x"], k["y"]] for k in obj["keypoints"]]}))

        def adapter(obj):
            return kio.AnnotationRecord(obj["name"], KeypointSet(Keypoint(x, y) for x, y in obj["points"]))

        index = kio.load_dataset(tmp_path, adapter=adapter)
        assert len(index) == 2
        assert [(k.x, k.y) for k in index.entries[0].keypoints] == [(k.x, k.y) for k in scenes[0].keypoints]

    def test_one_based(self):
        rec = kio.parse_annotation({"image": "a", "keypoints": [{"x": 1, "y": 1, "direct": True}]}, one_based=True)
        assert rec.keypoints[0] == Keypoint(0, 0)

    @pytest.mark.parametrize("kp", [{"x": 1.5, "y": 1, "direct": True}, {"x": 1, "y": 1, "direct": "yes"}, {"x": 1}])
    def test_bad_keypoint_schema(self, kp):
        with pytest.raises((ValueError, KeyError)):
            kio.parse_annotation({"image": "a", "keypoints": [kp]})


class TestImages:
    @pytest.mark.parametrize("bits", [8, 16])
    def test_round_trip(self, tmp_path, bits):
        levels = 2**bits - 1
        img = np.round(np.random.default_rng(0).random((7, 9)) * levels) / levels
        kio.write_image(tmp_path / "a.png", img, bits)
        np.testing.assert_array_equal(kio.read_image(tmp_path / "a.png"), img)

    def test_rgb_rejected(self, tmp_path):
        from PIL import Image

        Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
        with pytest.raises(ValueError):
            kio.read_image(tmp_path / "c.png")

    @pytest.mark.parametrize("bits", [8, 16])
    def test_attention_map_scale(self, tmp_path, bits):
        a = np.zeros((5, 6))
        a[1:3, 2:5] = 0.125
        a[2, 3] = 0.5
        sidecar = kio.save_attention_map(tmp_path / "m.png", a, bits)
        meta = json.loads(sidecar.read_text())
        assert meta["scale"] == 0.5 and meta["bits"] == bits
        np.testing.assert_allclose(kio.load_attention_map(tmp_path / "m.png"), a, atol=0.5 / (2**bits - 1))


class TestBoxSets:
    def test_jsonl_round_trip(self, tmp_path):
        sets = [
            BoxSet("a", [BoundingBox(1, 2, 3, 4, "direct", (0,)), BoundingBox(0, 0, 9, 9, "unspecified", (1, 2))]),
            BoxSet("b", []),
        ]
        kio.write_boxsets(tmp_path / "b.jsonl", sets)
        lines = (tmp_path / "b.jsonl").read_text().splitlines()
        assert len(lines) == 2
        rec = json.loads(lines[0])
        assert rec["image"] == "a" and rec["boxes"][1]["source_keypoints"] == [1, 2]
        assert set(rec["boxes"][0]) == {"x_min", "y_min", "x_max", "y_max", "class", "source_keypoints"}
        assert kio.read_boxsets(tmp_path / "b.jsonl") == sets


class TestYolo:
    def test_example_line(self):
        lines = kio.export_yolo([BoundingBox(10, 20, 50, 60, "direct")], (100, 100), {"direct": 0})
        assert lines == ["0 0.300000 0.400000 0.400000 0.400000"]

    def test_empty(self):
        assert kio.export_yolo([], (10, 10)) == []

    def test_round_trip(self, rng):
        for _ in range(200):
            w, h = int(rng.integers(20, 2000)), int(rng.integers(20, 2000))
            x0, x1 = sorted(rng.integers(0, w, 2))
            y0, y1 = sorted(rng.integers(0, h, 2))
            cls = ("direct", "indirect")[rng.integers(2)]
            b = BoundingBox(x0, y0, x1, y1, cls)
            back, = kio.parse_yolo(kio.export_yolo([b], (w, h)), (w, h))
            assert back.cls == cls
            assert max(abs(p - q) for p, q in zip(back.coords, b.coords)) <= 1


class TestConfigFile:
    def test_parse(self):
        cfg = kio.parse_config(
            "# tuned\nalpha=0.55\nn_thresholds=100\nblob_fraction=0.3\nconnectivity=eight\nsampling=evenly_spaced\n"
        )
        assert cfg == SaliencyConfig(alpha=0.55, n_thresholds=100, blob_fraction=0.3, connectivity=8,
                                     sampling="evenly_spaced")

    def test_round_trip(self, tmp_path):
        cfg = SaliencyConfig(alpha=0.123456789, n_thresholds=7, connectivity=4, blob_fraction=0.9, seed=5)
        kio.write_config(tmp_path / "c.cfg", cfg)
        assert kio.read_config(tmp_path / "c.cfg") == cfg

    @pytest.mark.parametrize("text", ["alpha 0.3", "beta=1", "alpha=2"])
    def test_errors(self, text):
        with pytest.raises(ValueError):
            kio.parse_config(text)
