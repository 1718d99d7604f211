"""Hot numeric kernels with a numba path and a pure-numpy fallback.

``CAUNET_DISABLE_NUMBA=1`` selects the numpy fallback. Both paths implement
the same arithmetic; the warp kernel is written so the two paths agree bit
for bit, the reduction kernels agree to round-off (summation order differs).

Rank-one kernels expect pre-transposed weight views so the inner products
are plain contiguous GEMMs:
  a, b : (batch, n)      inputs
  u, v : (units, n)      non-negative factor rows
  ut, vt : (n, units)    contiguous transposes
  usum, vsum : (units,)  row sums of u and v
"""

import numpy as np

from ._accel import NUMBA_ENABLED, maybe_njit


# ---------------------------------------------------------------------------
# rank-one contrast association: h = 1/2[(V1) o Ua^2 + (U1) o Vb^2] - Ua o Vb

def _cau_rankone_forward(a, b, ut, vt, usum, vsum):
    half = np.float32(0.5)  # exact; a float64 literal would promote float32 inputs
    au = np.dot(a, ut)
    bv = np.dot(b, vt)
    a2u = np.dot(a * a, ut)
    b2v = np.dot(b * b, vt)
    return half * (a2u * vsum + b2v * usum) - au * bv


def _cau_rankone_backward(a, b, u, v, ut, vt, usum, vsum, g):
    au = np.dot(a, ut)
    bv = np.dot(b, vt)
    a2 = a * a
    b2 = b * b
    gbv = g * bv
    gau = g * au
    ga = a * np.dot(g * vsum, u) - np.dot(gbv, u)
    gb = b * np.dot(g * usum, v) - np.dot(gau, v)
    gt = np.ascontiguousarray(g.T)
    b2v = np.dot(b2, vt)
    a2u = np.dot(a2, ut)
    k = u.shape[0]
    half = np.float32(0.5)
    gu = (
        half * vsum.reshape(k, 1) * np.dot(gt, a2)
        + half * np.sum(g * b2v, axis=0).reshape(k, 1)
        - np.dot(np.ascontiguousarray(gbv.T), a)
    )
    gv = (
        half * usum.reshape(k, 1) * np.dot(gt, b2)
        + half * np.sum(g * a2u, axis=0).reshape(k, 1)
        - np.dot(np.ascontiguousarray(gau.T), b)
    )
    return ga, gb, gu, gv


# ---------------------------------------------------------------------------
# rank-one bilinear: h = (Ua) o (Vb)

def _bilinear_rankone_forward(a, b, ut, vt):
    return np.dot(a, ut) * np.dot(b, vt)


def _bilinear_rankone_backward(a, b, u, v, ut, vt, g):
    au = np.dot(a, ut)
    bv = np.dot(b, vt)
    gbv = g * bv
    gau = g * au
    ga = np.dot(gbv, u)
    gb = np.dot(gau, v)
    gu = np.dot(np.ascontiguousarray(gbv.T), a)
    gv = np.dot(np.ascontiguousarray(gau.T), b)
    return ga, gb, gu, gv


# ---------------------------------------------------------------------------
# full-rank contrast association: h_k = 1/2 sum_ij W_kij (a_i - b_j)^2
# Used as the test oracle and by the toy demo; sizes stay small, so the
# numba path uses straight loops and the fallback vectorizes with einsum.

def _cau_full_forward_loops(w, a, b):
    bsz, n = a.shape
    k = w.shape[0]
    h = np.zeros((bsz, k), dtype=a.dtype)
    for s in range(bsz):
        for q in range(k):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    d = a[s, i] - b[s, j]
                    acc += w[q, i, j] * d * d
            h[s, q] = 0.5 * acc
    return h


def _cau_full_forward_numpy(w, a, b):
    rowsum = w.sum(axis=2)
    colsum = w.sum(axis=1)
    cross = np.einsum("bi,kij,bj->bk", a, w, b)
    return 0.5 * ((a * a) @ rowsum.T + (b * b) @ colsum.T) - cross


def _cau_full_backward_loops(w, a, b, g):
    bsz, n = a.shape
    k = w.shape[0]
    ga = np.zeros_like(a)
    gb = np.zeros_like(b)
    gw = np.zeros_like(w)
    for s in range(bsz):
        for q in range(k):
            gs = g[s, q]
            for i in range(n):
                rs = 0.0
                wb = 0.0
                for j in range(n):
                    rs += w[q, i, j]
                    wb += w[q, i, j] * b[s, j]
                ga[s, i] += gs * (rs * a[s, i] - wb)
            for j in range(n):
                cs = 0.0
                wa = 0.0
                for i in range(n):
                    cs += w[q, i, j]
                    wa += w[q, i, j] * a[s, i]
                gb[s, j] += gs * (cs * b[s, j] - wa)
            for i in range(n):
                for j in range(n):
                    gw[q, i, j] += gs * (
                        0.5 * (a[s, i] * a[s, i] + b[s, j] * b[s, j])
                        - a[s, i] * b[s, j]
                    )
    return ga, gb, gw


def _cau_full_backward_numpy(w, a, b, g):
    rowsum = w.sum(axis=2)
    colsum = w.sum(axis=1)
    ga = (g @ rowsum) * a - np.einsum("bk,kij,bj->bi", g, w, b)
    gb = (g @ colsum) * b - np.einsum("bk,kij,bi->bj", g, w, a)
    a2 = a * a
    b2 = b * b
    gw = (
        0.5 * ((g.T @ a2)[:, :, None] + (g.T @ b2)[:, None, :])
        - np.einsum("bk,bi,bj->kij", g, a, b)
    )
    return ga, gb, gw


# ---------------------------------------------------------------------------
# inverse bilinear warp, clamp-to-edge, coordinates centered on the image
# center: x = col - (W-1)/2, y = row - (H-1)/2. For each target pixel the
# source location is hinv @ (x, y, 1), dehomogenized.

def _warp_batch_loops(images, hinvs, out):
    nimg, height, width = images.shape
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    for s in range(nimg):
        m00 = hinvs[s, 0, 0]
        m01 = hinvs[s, 0, 1]
        m02 = hinvs[s, 0, 2]
        m10 = hinvs[s, 1, 0]
        m11 = hinvs[s, 1, 1]
        m12 = hinvs[s, 1, 2]
        m20 = hinvs[s, 2, 0]
        m21 = hinvs[s, 2, 1]
        m22 = hinvs[s, 2, 2]
        for r in range(height):
            y = r - cy
            for c in range(width):
                x = c - cx
                wdn = m20 * x + m21 * y + m22
                sx = (m00 * x + m01 * y + m02) / wdn + cx
                sy = (m10 * x + m11 * y + m12) / wdn + cy
                sx = min(max(sx, 0.0), width - 1.0)
                sy = min(max(sy, 0.0), height - 1.0)
                x0 = int(np.floor(sx))
                y0 = int(np.floor(sy))
                if x0 > width - 2:
                    x0 = width - 2
                if y0 > height - 2:
                    y0 = height - 2
                fx = sx - x0
                fy = sy - y0
                top = (1.0 - fx) * images[s, y0, x0] + fx * images[s, y0, x0 + 1]
                bot = (1.0 - fx) * images[s, y0 + 1, x0] + fx * images[s, y0 + 1, x0 + 1]
                out[s, r, c] = (1.0 - fy) * top + fy * bot
    return out


def _warp_batch_numpy(images, hinvs, out):
    nimg, height, width = images.shape
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    x = (cols - cx).ravel()
    y = (rows - cy).ravel()
    for s in range(nimg):
        m = hinvs[s]
        wdn = m[2, 0] * x + m[2, 1] * y + m[2, 2]
        sx = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / wdn + cx
        sy = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / wdn + cy
        sx = np.minimum(np.maximum(sx, 0.0), width - 1.0)
        sy = np.minimum(np.maximum(sy, 0.0), height - 1.0)
        x0 = np.minimum(np.floor(sx).astype(np.int64), width - 2)
        y0 = np.minimum(np.floor(sy).astype(np.int64), height - 2)
        fx = sx - x0
        fy = sy - y0
        img = images[s]
        top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x0 + 1]
        bot = (1.0 - fx) * img[y0 + 1, x0] + fx * img[y0 + 1, x0 + 1]
        out[s] = ((1.0 - fy) * top + fy * bot).reshape(height, width)
    return out


if NUMBA_ENABLED:
    cau_rankone_forward = maybe_njit(_cau_rankone_forward)
    cau_rankone_backward = maybe_njit(_cau_rankone_backward)
    bilinear_rankone_forward = maybe_njit(_bilinear_rankone_forward)
    bilinear_rankone_backward = maybe_njit(_bilinear_rankone_backward)
    cau_full_forward = maybe_njit(_cau_full_forward_loops)
    cau_full_backward = maybe_njit(_cau_full_backward_loops)
    warp_batch_kernel = maybe_njit(_warp_batch_loops)
else:
    cau_rankone_forward = _cau_rankone_forward
    cau_rankone_backward = _cau_rankone_backward
    bilinear_rankone_forward = _bilinear_rankone_forward
    bilinear_rankone_backward = _bilinear_rankone_backward
    cau_full_forward = _cau_full_forward_numpy
    cau_full_backward = _cau_full_backward_numpy
    warp_batch_kernel = _warp_batch_numpy


def warp_batch(images, hinvs):
    """Warp a stack of images by per-image inverse homographies."""
    images = np.ascontiguousarray(images, dtype=np.float64)
    hinvs = np.ascontiguousarray(hinvs, dtype=np.float64)
    out = np.empty_like(images)
    return warp_batch_kernel(images, hinvs, out)
