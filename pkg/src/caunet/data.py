"""Data pipeline: CIFAR-10 ingestion, grayscale conversion, homography
construction for the five transformation tasks, inverse-mapped warping,
center cropping, dataset serialization, and real-world patch-pair ingestion.

Conventions (the byte formats are part of the public interface):

* Image coordinates are centered on the image center, x = col - (W-1)/2 and
  y = row - (H-1)/2, so homographies act about the center and center crops
  of both images stay corresponded under rotation and scaling.
* Warping is inverse-mapped with bilinear interpolation and clamp-to-edge.
* Grayscale is the 0.299 R + 0.587 G + 0.114 B luminance formula.
* Dataset files (RLDS v1): magic "RLDS", u8 version=1, u8 task id,
  u16 reserved, u32 sample count, u32 patch dim, u32 zdim, little-endian,
  then per sample x, y (f32 each, patch dim) and z (f32, zdim).
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .linalg import substream

CIFAR_RECORD = 3073  # 1 label byte + 3 x 1024 pixel bytes
PATCH = 11
IMG = 32
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

RLDS_MAGIC = b"RLDS"
RLDS_VERSION = 1


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tasks (homography parametrizations and parameter ranges)


@dataclass(frozen=True)
class TaskSpec:
    name: str
    task_id: int
    zdim: int
    ranges: tuple  # ((lo, hi), ...) per component


TASKS = {
    "translation": TaskSpec("translation", 0, 2, ((-5.0, 5.0),) * 2),
    "rotation": TaskSpec("rotation", 1, 1, ((-45.0, 45.0),)),
    "scaling": TaskSpec("scaling", 2, 2, ((0.5, 2.0),) * 2),
    "affine": TaskSpec("affine", 3, 4, ((-0.5, 0.5),) * 4),
    "projective": TaskSpec(
        "projective", 4, 6, ((-0.5, 0.5),) * 4 + ((-0.01, 0.01),) * 2
    ),
}
_TASK_BY_ID = {t.task_id: t for t in TASKS.values()}


def get_task(name):
    try:
        return TASKS[name.lower()]
    except KeyError:
        raise DataError(
            f"unknown task {name!r}; expected one of {sorted(TASKS)}"
        ) from None


def task_by_id(task_id):
    try:
        return _TASK_BY_ID[task_id]
    except KeyError:
        raise DataError(f"unknown task id {task_id}") from None


def build_homography(task, z):
    """3x3 homography for a parameter vector of the given task.

    Out-of-range values are allowed (evaluation reconstructs homographies
    from unclamped predictions); only the dimensionality is enforced.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size != task.zdim:
        raise DataError(f"task {task.name} expects zdim={task.zdim}, got {z.size}")
    h = np.eye(3)
    if task.name == "translation":
        h[0, 2], h[1, 2] = z
    elif task.name == "rotation":
        th = np.deg2rad(z[0])
        c, s = np.cos(th), np.sin(th)
        h[0, 0], h[0, 1] = c, -s
        h[1, 0], h[1, 1] = s, c
    elif task.name == "scaling":
        h[0, 0], h[1, 1] = z
    elif task.name == "affine":
        h[0, 0] = 1 + z[0]
        h[0, 1] = z[1]
        h[1, 0] = z[2]
        h[1, 1] = 1 + z[3]
    else:  # projective
        h[0, 0] = 1 + z[0]
        h[0, 1] = z[1]
        h[1, 0] = z[2]
        h[1, 1] = 1 + z[3]
        h[2, 0] = z[4]
        h[2, 1] = z[5]
    return h


def sample_z(task, rng, count=1):
    lo = np.array([r[0] for r in task.ranges])
    hi = np.array([r[1] for r in task.ranges])
    return rng.uniform(lo, hi, size=(count, task.zdim))


# ---------------------------------------------------------------------------
# CIFAR-10 ingestion and grayscale


def load_cifar(path):
    """Read one CIFAR-10 binary batch; labels are discarded.

    Returns a (count, 32, 32, 3) uint8 array (RGB planes interleaved to
    channel-last).
    """
    if not os.path.exists(path):
        raise DataError(f"CIFAR file not found: {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR_RECORD:
        raise DataError(
            f"{path}: size {raw.size} is not a positive multiple of "
            f"{CIFAR_RECORD} bytes (1 label + 3x1024 pixels)"
        )
    recs = raw.reshape(-1, CIFAR_RECORD)
    planes = recs[:, 1:].reshape(-1, 3, IMG, IMG)
    return np.ascontiguousarray(planes.transpose(0, 2, 3, 1))


def to_gray(rgb):
    """Luminance grayscale in [0, 255] (float64)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = GRAY_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


# ---------------------------------------------------------------------------
# warping and cropping


def warp_image(img, h):
    """Inverse-mapped bilinear warp of one image by homography ``h``."""
    h = np.asarray(h, dtype=np.float64)
    det = np.linalg.det(h)
    if abs(det) < 1e-12:
        raise DataError(f"homography is singular (|det|={abs(det):.3g})")
    hinv = np.linalg.inv(h)
    img = np.asarray(img, dtype=np.float64)
    return kernels.warp_batch(img[None, :, :], hinv[None, :, :])[0]


def warp_images(images, hs):
    """Batch warp; ``hs`` is (n, 3, 3) of forward homographies."""
    hs = np.asarray(hs, dtype=np.float64)
    dets = np.linalg.det(hs)
    bad = np.abs(dets) < 1e-12
    if np.any(bad):
        raise DataError(f"{int(bad.sum())} singular homographies in batch")
    return kernels.warp_batch(images, np.linalg.inv(hs))


def center_crop(img, size=PATCH):
    img = np.asarray(img)
    hh, ww = img.shape[-2:]
    if size > hh or size > ww:
        raise DataError(f"crop size {size} exceeds image {hh}x{ww}")
    r0 = (hh - size) // 2
    c0 = (ww - size) // 2
    return img[..., r0 : r0 + size, c0 : c0 + size]


def normalize_patch(patch):
    """Map [0, 255] pixel values to [-0.5, 0.5]."""
    return np.asarray(patch, dtype=np.float64) / 255.0 - 0.5


# ---------------------------------------------------------------------------
# RLDS dataset files


def write_rlds(path, task, x, y, z):
    x = np.ascontiguousarray(x, dtype=np.float32)
    y = np.ascontiguousarray(y, dtype=np.float32)
    z = np.ascontiguousarray(z, dtype=np.float32)
    count, pdim = x.shape
    if y.shape != x.shape or z.shape != (count, task.zdim):
        raise DataError(
            f"inconsistent arrays: x{x.shape} y{y.shape} z{z.shape} zdim={task.zdim}"
        )
    header = struct.pack(
        "<4sBBHIII", RLDS_MAGIC, RLDS_VERSION, task.task_id, 0, count, pdim, task.zdim
    )
    rec = np.concatenate([x, y, z], axis=1)
    with open(path, "wb") as f:
        f.write(header)
        f.write(rec.tobytes())


def read_rlds(path):
    """Returns (task, x, y, z) with float32 arrays."""
    with open(path, "rb") as f:
        header = f.read(20)
        if len(header) != 20:
            raise DataError(f"{path}: truncated RLDS header")
        magic, ver, task_id, _res, count, pdim, zdim = struct.unpack("<4sBBHIII", header)
        if magic != RLDS_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if ver != RLDS_VERSION:
            raise DataError(f"{path}: unsupported RLDS version {ver}")
        task = task_by_id(task_id)
        if task.zdim != zdim:
            raise DataError(f"{path}: zdim {zdim} does not match task {task.name}")
        stride = 2 * pdim + zdim
        data = np.frombuffer(f.read(), dtype="<f4")
    if data.size != count * stride:
        raise DataError(
            f"{path}: expected {count * stride} floats, found {data.size}"
        )
    rec = data.reshape(count, stride)
    return task, rec[:, :pdim], rec[:, pdim : 2 * pdim], rec[:, 2 * pdim :]


def generate_samples(gray_images, task, repeats, seed, stream_tag):
    """Generate (x, y, z) patch arrays from grayscale images.

    Each source image gets its own RNG substream keyed by (seed, tag, index)
    so serial and parallel generation produce identical output.
    """
    gray_images = np.asarray(gray_images)
    count = gray_images.shape[0]
    zs = np.empty((count, repeats, task.zdim))
    for i in range(count):
        rng = substream(seed, task.task_id, stream_tag, i)
        zs[i] = sample_z(task, rng, repeats)
    xs = np.empty((count * repeats, PATCH * PATCH), dtype=np.float32)
    ys = np.empty_like(xs)
    # xs/ys below are laid out as [rep0 images..., rep1 images...]; flatten
    # the labels the same way so sample i's z matches its patch pair.
    zflat = zs.transpose(1, 0, 2).reshape(count * repeats, task.zdim)
    zflat = np.ascontiguousarray(zflat, dtype=np.float32)
    xpatch = normalize_patch(center_crop(gray_images)).reshape(count, -1)
    chunk = 2000
    for rep in range(repeats):
        hs = np.stack(
            [build_homography(task, zs[i, rep]) for i in range(count)]
        )
        for lo in range(0, count, chunk):
            hi = min(lo + chunk, count)
            warped = warp_images(gray_images[lo:hi], hs[lo:hi])
            ypatch = normalize_patch(center_crop(warped)).reshape(hi - lo, -1)
            sl = slice(rep * count + lo, rep * count + hi)
            xs[sl] = xpatch[lo:hi]
            ys[sl] = ypatch
    return xs, ys, zflat


def generate_dataset(cifar_dir, task, out_dir, seed, repeats=10,
                     train_files=None, test_files=None):
    """Produce RLDS train/test files for a task from CIFAR-10 binaries.

    Returns (train_path, test_path). With the stock CIFAR-10 batches and
    repeats=10 this yields 500,000 train and 100,000 test samples.
    """
    if train_files is None:
        train_files = [f"data_batch_{i}.bin" for i in range(1, 6)]
    if test_files is None:
        test_files = ["test_batch.bin"]
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for tag, files, stem in ((0, train_files, "train"), (1, test_files, "test")):
        imgs = np.concatenate(
            [load_cifar(os.path.join(cifar_dir, f)) for f in files]
        )
        # float32 halves the memory footprint of a full CIFAR split
        gray = to_gray(imgs).astype(np.float32)
        x, y, z = generate_samples(gray, task, repeats, seed, tag)
        path = os.path.join(out_dir, f"{task.name}_{stem}.rlds")
        write_rlds(path, task, x, y, z)
        paths.append(path)
    return tuple(paths)


# ---------------------------------------------------------------------------
# real-world patch pairs with per-patch homographies


@dataclass
class PatchPair:
    x: np.ndarray  # normalized 121-vector
    y: np.ndarray
    ground_truth_h: np.ndarray  # 3x3 patch homography


def read_pgm(path):
    """Binary PGM (P5, maxval 255) as a float64 grayscale image."""
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise DataError(f"{path}: truncated PGM header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise DataError(f"{path}: only maxval 255 is supported, got {maxval}")
    i += 1  # single whitespace after maxval
    if len(data) - i < width * height:
        raise DataError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=i)
    return pixels.reshape(height, width).astype(np.float64)


def read_homography_file(path):
    with open(path) as f:
        vals = f.read().split()
    if len(vals) != 9:
        raise DataError(f"{path}: expected 9 numbers, found {len(vals)}")
    return np.array([float(v) for v in vals]).reshape(3, 3)


def _translation(t):
    m = np.eye(3)
    m[0, 2], m[1, 2] = -t[0], -t[1]
    return m


def apply_homography(h, p):
    """Dehomogenized image of a 2-d point under ``h``."""
    q = h @ np.array([p[0], p[1], 1.0])
    if abs(q[2]) < 1e-12:
        raise DataError("point maps to infinity")
    return q[:2] / q[2]


def patch_homography(h, p, p_prime):
    """Patch-to-patch homography H' = T' H T^-1 anchored at p and p'."""
    mapped = apply_homography(h, p)
    if np.max(np.abs(mapped - np.asarray(p_prime, dtype=np.float64))) > 1e-6:
        raise DataError(
            f"p_prime {tuple(p_prime)} is not the image of p {tuple(p)} "
            f"(expected {tuple(mapped)})"
        )
    tinv = np.eye(3)
    tinv[0, 2], tinv[1, 2] = p[0], p[1]
    return _translation(p_prime) @ h @ tinv


def _crop_at(img, col, row, size=PATCH):
    half = size // 2
    r0 = int(row) - half
    c0 = int(col) - half
    return img[r0 : r0 + size, c0 : c0 + size]


def ingest_patch_pairs(image_a_path, image_b_path, h_path, count, seed):
    """Sample corresponded 11x11 patch pairs from two frames and a homography.

    Points p are drawn uniformly over image A, keeping only those where the
    patch around p and the patch around round(Hp) lie fully inside their
    images. The crop center for B is rounded to the pixel grid; the sub-pixel
    residual is folded into the patch homography so it stays exact.
    """
    img_a = read_pgm(image_a_path)
    img_b = read_pgm(image_b_path)
    h = read_homography_file(h_path)
    half = PATCH // 2
    rng = substream(seed, 0xA11C)
    pairs = []
    ha, wa = img_a.shape
    hb, wb = img_b.shape
    attempts = 0
    max_attempts = max(200 * count, 10000)
    while len(pairs) < count:
        if attempts >= max_attempts:
            raise DataError(
                f"could not find {count} in-bounds patch pairs "
                f"({len(pairs)} found after {attempts} attempts)"
            )
        attempts += 1
        col = int(rng.integers(half, wa - half))
        row = int(rng.integers(half, ha - half))
        p = np.array([col, row], dtype=np.float64)
        try:
            pp = apply_homography(h, p)
        except DataError:
            continue
        cr = np.rint(pp).astype(int)
        if not (half <= cr[0] < wb - half and half <= cr[1] < hb - half):
            continue
        hp = _translation(cr) @ h @ _translation(-p)
        x = normalize_patch(_crop_at(img_a, col, row)).ravel()
        y = normalize_patch(_crop_at(img_b, cr[0], cr[1])).ravel()
        pairs.append(PatchPair(x.astype(np.float32), y.astype(np.float32), hp))
    return pairs
