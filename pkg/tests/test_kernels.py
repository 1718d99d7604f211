"""Dual-path checks: the numba kernels and the numpy fallbacks must agree.

Both implementations are imported directly (underscore names), so these
tests compare them in-process regardless of which path the package selected
at import time.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from caunet import kernels as K


def _rankone_setup(rng, bsz=7, n=9, k=5, dtype=np.float64):
    a = rng.uniform(-0.5, 0.5, (bsz, n)).astype(dtype)
    b = rng.uniform(-0.5, 0.5, (bsz, n)).astype(dtype)
    u = rng.uniform(0.01, 1.0, (k, n)).astype(dtype)
    v = rng.uniform(0.01, 1.0, (k, n)).astype(dtype)
    ut = np.ascontiguousarray(u.T)
    vt = np.ascontiguousarray(v.T)
    return a, b, u, v, ut, vt, u.sum(axis=1), v.sum(axis=1)


class TestRankOneVsFullRank:
    def test_forward_matches_oracle(self, rng):
        a, b, u, v, ut, vt, usum, vsum = _rankone_setup(rng)
        h = K._cau_rankone_forward(a, b, ut, vt, usum, vsum)
        w = np.einsum("ki,kj->kij", u, v)
        h_ref = K._cau_full_forward_numpy(w, a, b)
        assert np.max(np.abs(h - h_ref)) < 1e-12

    def test_backward_matches_oracle(self, rng):
        a, b, u, v, ut, vt, usum, vsum = _rankone_setup(rng, bsz=4, n=6, k=3)
        g = rng.standard_normal((4, 3))
        ga, gb, gu, gv = K._cau_rankone_backward(a, b, u, v, ut, vt, usum, vsum, g)
        w = np.einsum("ki,kj->kij", u, v)
        ga_ref, gb_ref, gw_ref = K._cau_full_backward_numpy(w, a, b, g)
        assert np.max(np.abs(ga - ga_ref)) < 1e-12
        assert np.max(np.abs(gb - gb_ref)) < 1e-12
        # chain rule through W = u v^T: dL/du_ki = sum_j gw_kij v_kj
        gu_ref = np.einsum("kij,kj->ki", gw_ref, v)
        gv_ref = np.einsum("kij,ki->kj", gw_ref, u)
        assert np.max(np.abs(gu - gu_ref)) < 1e-12
        assert np.max(np.abs(gv - gv_ref)) < 1e-12


class TestFullRankPaths:
    def test_forward_loops_vs_numpy(self, rng):
        a = rng.uniform(-1, 1, (3, 7))
        b = rng.uniform(-1, 1, (3, 7))
        w = rng.uniform(0, 1, (4, 7, 7))
        h1 = K._cau_full_forward_loops(w, a, b)
        h2 = K._cau_full_forward_numpy(w, a, b)
        assert np.max(np.abs(h1 - h2)) < 1e-12

    def test_backward_loops_vs_numpy(self, rng):
        a = rng.uniform(-1, 1, (3, 5))
        b = rng.uniform(-1, 1, (3, 5))
        w = rng.uniform(0, 1, (2, 5, 5))
        g = rng.standard_normal((3, 2))
        outs1 = K._cau_full_backward_loops(w, a, b, g)
        outs2 = K._cau_full_backward_numpy(w, a, b, g)
        for o1, o2 in zip(outs1, outs2):
            assert np.max(np.abs(o1 - o2)) < 1e-12


class TestWarpPaths:
    def _random_hinvs(self, rng, n):
        hs = np.tile(np.eye(3), (n, 1, 1))
        hs[:, :2, :2] += 0.1 * rng.standard_normal((n, 2, 2))
        hs[:, :2, 2] = rng.uniform(-3, 3, (n, 2))
        hs[:, 2, :2] = 0.01 * rng.standard_normal((n, 2))
        return hs

    def test_paths_bit_identical(self, rng):
        imgs = rng.uniform(0, 255, (5, 32, 32))
        hinvs = self._random_hinvs(rng, 5)
        out1 = K._warp_batch_loops(imgs, hinvs, np.empty_like(imgs))
        out2 = K._warp_batch_numpy(imgs, hinvs, np.empty_like(imgs))
        assert np.array_equal(out1, out2)

    def test_identity_warp(self, rng):
        imgs = rng.uniform(0, 255, (2, 16, 16))
        hinvs = np.tile(np.eye(3), (2, 1, 1))
        out = K.warp_batch(imgs, hinvs)
        assert np.allclose(out, imgs)

    def test_integer_translation_interior(self, rng):
        img = rng.uniform(0, 255, (1, 20, 20))
        # content moves +3 cols: inverse map is translation by -3
        hinv = np.eye(3)
        hinv[0, 2] = -3.0
        out = K.warp_batch(img, hinv[None])
        assert np.allclose(out[0, :, 3:], img[0, :, :-3])

    def test_clamp_to_edge(self):
        img = np.zeros((1, 8, 8))
        img[0, :, 0] = 9.0
        hinv = np.eye(3)
        hinv[0, 2] = -5.0  # sources off the left edge clamp to column 0
        out = K.warp_batch(img, hinv[None])
        assert np.allclose(out[0, :, :5], 9.0)


class TestBilinearKernel:
    def test_forward_is_product_of_projections(self, rng):
        a, b, u, v, ut, vt, _, _ = _rankone_setup(rng, bsz=3, n=4, k=2)
        h = K._bilinear_rankone_forward(a, b, ut, vt)
        assert np.allclose(h, (a @ u.T) * (b @ v.T))

    def test_backward_fd(self, rng):
        a, b, u, v, ut, vt, _, _ = _rankone_setup(rng, bsz=2, n=3, k=2)
        g = rng.standard_normal((2, 2))
        ga, gb, gu, gv = K._bilinear_rankone_backward(a, b, u, v, ut, vt, g)
        eps = 1e-6

        def f(aa):
            return np.sum(g * K._bilinear_rankone_forward(aa, b, ut, vt))

        for s in range(2):
            for i in range(3):
                ap = a.copy(); ap[s, i] += eps
                am = a.copy(); am[s, i] -= eps
                num = (f(ap) - f(am)) / (2 * eps)
                assert abs(num - ga[s, i]) < 1e-6


@pytest.mark.slow
def test_numpy_fallback_selected_by_env_flag():
    code = (
        "import caunet.kernels as K; import caunet._accel as A; "
        "print(A.NUMBA_ENABLED, K.warp_batch_kernel is K._warp_batch_numpy)"
    )
    env = dict(os.environ, CAUNET_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
