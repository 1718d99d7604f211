import numpy as np
import pytest

from caunet import data as D
from synth import textured_images, write_cifar_batch


class TestTasks:
    def test_registry(self):
        assert sorted(D.TASKS) == ["affine", "projective", "rotation", "scaling",
                                   "translation"]
        assert [D.TASKS[n].zdim for n in
                ("translation", "rotation", "scaling", "affine", "projective")] \
            == [2, 1, 2, 4, 6]

    def test_lookup(self):
        assert D.get_task("Rotation").task_id == 1
        assert D.task_by_id(4).name == "projective"
        with pytest.raises(D.DataError):
            D.get_task("shear")
        with pytest.raises(D.DataError):
            D.task_by_id(99)

    def test_translation_matrix(self):
        h = D.build_homography(D.TASKS["translation"], [3.0, -2.0])
        expect = np.eye(3)
        expect[0, 2], expect[1, 2] = 3.0, -2.0
        assert np.array_equal(h, expect)

    def test_rotation_90deg(self):
        h = D.build_homography(D.TASKS["rotation"], [90.0])
        assert np.allclose(h[:2, :2], [[0, -1], [1, 0]], atol=1e-12)
        assert np.allclose(np.linalg.det(h), 1.0)

    def test_scaling_matrix(self):
        h = D.build_homography(D.TASKS["scaling"], [2.0, 0.5])
        assert h[0, 0] == 2.0 and h[1, 1] == 0.5

    def test_affine_nested_in_projective(self):
        za = np.array([0.1, -0.2, 0.3, -0.4])
        ha = D.build_homography(D.TASKS["affine"], za)
        hp = D.build_homography(D.TASKS["projective"], np.r_[za, 0.0, 0.0])
        assert np.array_equal(ha, hp)

    def test_zdim_enforced(self):
        with pytest.raises(D.DataError, match="zdim"):
            D.build_homography(D.TASKS["rotation"], [1.0, 2.0])

    def test_sample_z_ranges(self, rng):
        z = D.sample_z(D.TASKS["projective"], rng, 200)
        assert z.shape == (200, 6)
        lo = z.min(axis=0)
        hi = z.max(axis=0)
        assert np.all(lo >= [-0.5] * 4 + [-0.01] * 2)
        assert np.all(hi <= [0.5] * 4 + [0.01] * 2)


class TestCifar:
    def test_load_shape(self, cifar_dir):
        imgs = D.load_cifar(cifar_dir / "train_batch.bin")
        assert imgs.shape == (60, 32, 32, 3) and imgs.dtype == np.uint8

    def test_missing_file(self, tmp_path):
        with pytest.raises(D.DataError, match="not found"):
            D.load_cifar(tmp_path / "nope.bin")

    def test_bad_size(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"\x00" * 100)
        with pytest.raises(D.DataError, match="3073"):
            D.load_cifar(p)

    def test_gray_weights(self):
        px = np.zeros((1, 1, 3))
        px[0, 0] = [255, 0, 0]
        assert D.to_gray(px)[0, 0] == pytest.approx(0.299 * 255)
        assert D.to_gray(np.full((2, 2, 3), 100.0))[0, 0] == pytest.approx(100.0)


class TestWarpCrop:
    def test_identity(self, rng):
        img = rng.uniform(0, 255, (32, 32))
        assert np.allclose(D.warp_image(img, np.eye(3)), img)

    def test_singular_rejected(self):
        with pytest.raises(D.DataError, match="singular"):
            D.warp_image(np.zeros((8, 8)), np.zeros((3, 3)))

    def test_translation_moves_content(self):
        img = np.zeros((32, 32))
        img[16, 16] = 255.0
        h = D.build_homography(D.TASKS["translation"], [3.0, 1.0])
        out = D.warp_image(img, h)
        r, c = np.unravel_index(np.argmax(out), out.shape)
        assert (r, c) == (17, 19)

    def test_center_crop_offset(self, rng):
        img = rng.uniform(0, 1, (32, 32))
        patch = D.center_crop(img)
        assert patch.shape == (11, 11)
        assert np.array_equal(patch, img[10:21, 10:21])

    def test_center_crop_batch(self, rng):
        imgs = rng.uniform(0, 1, (5, 32, 32))
        assert D.center_crop(imgs).shape == (5, 11, 11)

    def test_crop_too_large(self):
        with pytest.raises(D.DataError):
            D.center_crop(np.zeros((8, 8)), size=11)

    def test_normalize_range(self):
        p = D.normalize_patch(np.array([0.0, 127.5, 255.0]))
        assert np.allclose(p, [-0.5, 0.0, 0.5])


class TestRlds:
    def test_roundtrip(self, tmp_path, rng):
        task = D.TASKS["scaling"]
        x = rng.uniform(-0.5, 0.5, (7, 121)).astype(np.float32)
        y = rng.uniform(-0.5, 0.5, (7, 121)).astype(np.float32)
        z = rng.uniform(0.5, 2.0, (7, 2)).astype(np.float32)
        path = tmp_path / "t.rlds"
        D.write_rlds(path, task, x, y, z)
        task2, x2, y2, z2 = D.read_rlds(path)
        assert task2 is task
        assert np.array_equal(x, x2) and np.array_equal(y, y2)
        assert np.array_equal(z, z2)

    def test_magic(self, tmp_path):
        p = tmp_path / "bad.rlds"
        p.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(D.DataError, match="magic"):
            D.read_rlds(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "short.rlds"
        p.write_bytes(b"RLDS\x01")
        with pytest.raises(D.DataError, match="truncated"):
            D.read_rlds(p)

    def test_truncated_payload(self, tmp_path, rng):
        task = D.TASKS["rotation"]
        p = tmp_path / "t.rlds"
        D.write_rlds(p, task, np.zeros((4, 121), np.float32),
                     np.zeros((4, 121), np.float32), np.zeros((4, 1), np.float32))
        data = p.read_bytes()
        p.write_bytes(data[:-8])
        with pytest.raises(D.DataError, match="expected"):
            D.read_rlds(p)

    def test_shape_mismatch_on_write(self, tmp_path):
        with pytest.raises(D.DataError, match="inconsistent"):
            D.write_rlds(tmp_path / "t.rlds", D.TASKS["rotation"],
                         np.zeros((4, 121)), np.zeros((4, 121)), np.zeros((4, 2)))


def _best_shift(a, b, rad=5):
    """Integer (dx, dy) minimizing overlap MSE, assuming b = a moved by +(dx, dy)."""
    best, bv = None, np.inf
    n = a.shape[0]
    for dy in range(-rad, rad + 1):
        for dx in range(-rad, rad + 1):
            ya0, ya1 = max(0, -dy), min(n, n - dy)
            xa0, xa1 = max(0, -dx), min(n, n - dx)
            if ya1 - ya0 < 6 or xa1 - xa0 < 6:
                continue
            v = np.mean((a[ya0:ya1, xa0:xa1]
                         - b[ya0 + dy:ya1 + dy, xa0 + dx:xa1 + dx]) ** 2)
            if v < bv:
                bv, best = v, (dx, dy)
    return best


class TestGenerate:
    def test_shapes_and_order(self, rng):
        gray = textured_images(6, seed=3)
        task = D.TASKS["translation"]
        x, y, z = D.generate_samples(gray, task, repeats=4, seed=1, stream_tag=0)
        assert x.shape == y.shape == (24, 121)
        assert z.shape == (24, 2)
        # repeat 0 of every image comes first: x row i equals x row i+6
        assert np.array_equal(x[:6], x[6:12])
        assert not np.array_equal(z[:6], z[6:12])

    def test_deterministic(self):
        gray = textured_images(3, seed=5)
        task = D.TASKS["rotation"]
        out1 = D.generate_samples(gray, task, 2, seed=9, stream_tag=0)
        out2 = D.generate_samples(gray, task, 2, seed=9, stream_tag=0)
        for a, b in zip(out1, out2):
            assert np.array_equal(a, b)
        out3 = D.generate_samples(gray, task, 2, seed=10, stream_tag=0)
        assert not np.array_equal(out1[2], out3[2])

    def test_labels_match_observed_shift(self):
        """Regression: labels must be aligned with their own patch pair."""
        gray = textured_images(15, seed=21)
        task = D.TASKS["translation"]
        x, y, z = D.generate_samples(gray, task, repeats=2, seed=4, stream_tag=0)
        hits = 0
        for i in range(30):
            dx, dy = _best_shift(x[i].reshape(11, 11), y[i].reshape(11, 11))
            if max(abs(dx - z[i, 0]), abs(dy - z[i, 1])) <= 1.25:
                hits += 1
        # integer detector vs. continuous labels: allow a few borderline misses
        assert hits >= 24

    def test_generate_dataset_files(self, cifar_dir, tmp_path):
        task = D.TASKS["rotation"]
        tr, te = D.generate_dataset(cifar_dir, task, tmp_path, seed=2, repeats=2,
                                    train_files=["train_batch.bin"],
                                    test_files=["test_batch.bin"])
        t1, x1, _, z1 = D.read_rlds(tr)
        t2, x2, _, _ = D.read_rlds(te)
        assert t1 is task and t2 is task
        assert x1.shape == (120, 121) and x2.shape == (40, 121)
        assert np.all(np.abs(x1) <= 0.5)
        assert np.all((z1 >= -45) & (z1 <= 45))

    def test_train_test_streams_differ(self, cifar_dir, tmp_path):
        task = D.TASKS["translation"]
        tr, te = D.generate_dataset(cifar_dir, task, tmp_path, seed=2, repeats=1,
                                    train_files=["train_batch.bin"],
                                    test_files=["train_batch.bin"])
        _, _, _, ztr = D.read_rlds(tr)
        _, _, _, zte = D.read_rlds(te)
        assert not np.array_equal(ztr, zte)


def _write_pgm(path, img):
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n# test\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


class TestPgm:
    def test_roundtrip_with_comment(self, tmp_path, rng):
        img = rng.integers(0, 256, (9, 13), dtype=np.uint8)
        p = tmp_path / "a.pgm"
        _write_pgm(p, img)
        out = D.read_pgm(p)
        assert out.shape == (9, 13)
        assert np.array_equal(out, img.astype(np.float64))

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
        with pytest.raises(D.DataError, match="P2"):
            D.read_pgm(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(D.DataError, match="truncated"):
            D.read_pgm(p)

    def test_homography_file(self, tmp_path):
        p = tmp_path / "H"
        p.write_text("1 0 2.5\n0 1 -3\n0 0 1\n")
        h = D.read_homography_file(p)
        assert h[0, 2] == 2.5 and h[1, 2] == -3.0
        p.write_text("1 2 3")
        with pytest.raises(D.DataError, match="9 numbers"):
            D.read_homography_file(p)


class TestPatchHomography:
    def test_translation_case(self):
        # global translation by t: the patch homography is identity when the
        # crop center lands exactly on the mapped point
        h = np.eye(3)
        h[0, 2], h[1, 2] = 4.0, -2.0
        hp = D.patch_homography(h, (10.0, 12.0), (14.0, 10.0))
        assert np.allclose(hp, np.eye(3), atol=1e-12)

    def test_anchored_points_map_to_origin(self, rng):
        h = np.eye(3) + 0.05 * rng.standard_normal((3, 3))
        p = np.array([40.0, 30.0])
        pp = D.apply_homography(h, p)
        hp = D.patch_homography(h, p, pp)
        assert np.allclose(D.apply_homography(hp, (0.0, 0.0)), (0.0, 0.0),
                           atol=1e-9)

    def test_mismatched_pprime_rejected(self):
        with pytest.raises(D.DataError, match="not the image"):
            D.patch_homography(np.eye(3), (1.0, 1.0), (5.0, 5.0))


class TestIngestPairs:
    def _frames(self, tmp_path, shift=(3, 1)):
        img = textured_images(1, seed=40, size=64)[0]
        a = tmp_path / "a.pgm"
        b = tmp_path / "b.pgm"
        _write_pgm(a, np.clip(img, 0, 255))
        h = np.eye(3)
        h[0, 2], h[1, 2] = shift
        warped = D.warp_image(img, h)
        _write_pgm(b, np.clip(warped, 0, 255))
        hf = tmp_path / "H"
        hf.write_text(" ".join(str(v) for v in h.ravel()))
        return a, b, hf

    def test_pairs_consistent(self, tmp_path):
        a, b, hf = self._frames(tmp_path)
        pairs = D.ingest_patch_pairs(a, b, hf, count=12, seed=3)
        assert len(pairs) == 12
        for p in pairs:
            assert p.x.shape == (121,) and p.y.shape == (121,)
            # pure pixel shift with integer components: patch homography is
            # exactly identity and the patches match pixel for pixel
            assert np.allclose(p.ground_truth_h, np.eye(3), atol=1e-12)
            assert np.max(np.abs(p.x - p.y)) < 2.5 / 255.0

    def test_deterministic(self, tmp_path):
        a, b, hf = self._frames(tmp_path)
        p1 = D.ingest_patch_pairs(a, b, hf, count=5, seed=8)
        p2 = D.ingest_patch_pairs(a, b, hf, count=5, seed=8)
        for q1, q2 in zip(p1, p2):
            assert np.array_equal(q1.x, q2.x)

    def test_impossible_count_raises(self, tmp_path):
        a, b, hf = self._frames(tmp_path, shift=(200, 200))
        with pytest.raises(D.DataError, match="in-bounds"):
            D.ingest_patch_pairs(a, b, hf, count=3, seed=1)
