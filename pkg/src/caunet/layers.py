"""Forward and backward passes for every layer in the three model stacks.

All gradients are hand-coded; there is no autodiff. Layers operate on
batches shaped (batch, dim). ``forward`` returns ``(out, cache)`` and
``backward(cache, grad_out)`` returns ``(grad_inputs, param_grads)`` where
``grad_inputs`` mirrors the forward inputs (a tuple for two-input relation
layers). Parameter gradients are summed over the batch; the loss divides by
the batch size, so they arrive batch-averaged at the optimizer.

Module-level functions give the same math on single vectors where that is
the natural unit (toy demo, oracles, tests).
"""

import numpy as np

from . import kernels

L2NORM_EPS = 1e-12
PRELU_INIT_SLOPE = 0.25


class ConstraintError(ValueError):
    """A non-negative parameter went negative, or shapes disagree."""


def _check_nonneg(name, arr):
    if np.min(arr) < 0:
        raise ConstraintError(f"{name} must be non-negative, min={np.min(arr)}")


def _pair(x):
    x = np.asarray(x)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


class CauRankOne:
    """Rank-one contrast association units, h = 1/2[(V1) o Ua^2 + (U1) o Vb^2] - Ua o Vb."""

    two_input = True

    def __init__(self, u, v):
        u = np.asarray(u)
        v = np.asarray(v)
        if u.shape != v.shape or u.ndim != 2:
            raise ConstraintError(f"U/V must be equal-shape 2-d, got {u.shape} vs {v.shape}")
        _check_nonneg("U", u)
        _check_nonneg("V", v)
        self.u = u
        self.v = v

    def params(self):
        return {"U": self.u, "V": self.v}

    def constraints(self):
        return {"U": "nonneg", "V": "nonneg"}

    def _views(self):
        ut = np.ascontiguousarray(self.u.T)
        vt = np.ascontiguousarray(self.v.T)
        return ut, vt, self.u.sum(axis=1), self.v.sum(axis=1)

    def forward(self, a, b):
        _check_nonneg("U", self.u)
        _check_nonneg("V", self.v)
        if a.shape != b.shape or a.shape[1] != self.u.shape[1]:
            raise ConstraintError(
                f"input shapes {a.shape}/{b.shape} do not match n={self.u.shape[1]}"
            )
        # the jitted kernels require matching dtypes for np.dot
        a = np.ascontiguousarray(a, dtype=self.u.dtype)
        b = np.ascontiguousarray(b, dtype=self.u.dtype)
        ut, vt, usum, vsum = self._views()
        h = kernels.cau_rankone_forward(a, b, ut, vt, usum, vsum)
        return h, (a, b, ut, vt, usum, vsum)

    def backward(self, cache, grad_out):
        a, b, ut, vt, usum, vsum = cache
        grad_out = np.ascontiguousarray(grad_out, dtype=a.dtype)
        ga, gb, gu, gv = kernels.cau_rankone_backward(
            a, b, self.u, self.v, ut, vt, usum, vsum, grad_out
        )
        return (ga, gb), {"U": gu, "V": gv}


class CauFullRank:
    """Full-rank contrast association units, h_k = 1/2 sum_ij W_kij (a_i - b_j)^2.

    Oracle/demo duty only; the trained models use the rank-one form.
    """

    two_input = True

    def __init__(self, w):
        w = np.asarray(w)
        if w.ndim != 3 or w.shape[1] != w.shape[2]:
            raise ConstraintError(f"W must be (K, n, n), got {w.shape}")
        _check_nonneg("W", w)
        self.w = w

    def params(self):
        return {"W": self.w.reshape(self.w.shape[0], -1)}

    def constraints(self):
        return {"W": "nonneg"}

    def forward(self, a, b):
        _check_nonneg("W", self.w)
        h = kernels.cau_full_forward(self.w, a, b)
        return h, (a, b)

    def backward(self, cache, grad_out):
        a, b = cache
        ga, gb, gw = kernels.cau_full_backward(self.w, a, b, grad_out)
        return (ga, gb), {"W": gw.reshape(self.w.shape[0], -1)}


class BilinearRankOne:
    """Rank-one bilinear units, h_k = (u_k . a)(v_k . b); unconstrained sign."""

    two_input = True

    def __init__(self, u, v):
        if u.shape != v.shape or u.ndim != 2:
            raise ConstraintError(f"U/V must be equal-shape 2-d, got {u.shape} vs {v.shape}")
        self.u = np.asarray(u)
        self.v = np.asarray(v)

    def params(self):
        return {"U": self.u, "V": self.v}

    def constraints(self):
        return {"U": "free", "V": "free"}

    def forward(self, a, b):
        a = np.ascontiguousarray(a, dtype=self.u.dtype)
        b = np.ascontiguousarray(b, dtype=self.u.dtype)
        ut = np.ascontiguousarray(self.u.T)
        vt = np.ascontiguousarray(self.v.T)
        h = kernels.bilinear_rankone_forward(a, b, ut, vt)
        return h, (a, b, ut, vt)

    def backward(self, cache, grad_out):
        a, b, ut, vt = cache
        grad_out = np.ascontiguousarray(grad_out, dtype=a.dtype)
        ga, gb, gu, gv = kernels.bilinear_rankone_backward(
            a, b, self.u, self.v, ut, vt, grad_out
        )
        return (ga, gb), {"U": gu, "V": gv}


class Concat:
    two_input = True

    def params(self):
        return {}

    def constraints(self):
        return {}

    def forward(self, a, b):
        return np.concatenate([a, b], axis=1), a.shape[1]

    def backward(self, cache, grad_out):
        na = cache
        return (grad_out[:, :na], grad_out[:, na:]), {}


class Softmin:
    """h'_k = exp(-h_k) / sum_i exp(-h_i), stabilized by subtracting min(h)."""

    two_input = False

    def params(self):
        return {}

    def constraints(self):
        return {}

    def forward(self, h):
        e = np.exp(-(h - h.min(axis=1, keepdims=True)))
        p = e / e.sum(axis=1, keepdims=True)
        return p, p

    def backward(self, cache, grad_out):
        p = cache
        inner = np.sum(grad_out * p, axis=1, keepdims=True)
        return -p * (grad_out - inner), {}


class SumPool:
    """Sum contiguous groups of ``group`` consecutive units."""

    two_input = False

    def __init__(self, group):
        if group < 1:
            raise ConstraintError(f"group size must be >= 1, got {group}")
        self.group = group

    def params(self):
        return {}

    def constraints(self):
        return {}

    def forward(self, h):
        bsz, k = h.shape
        if k % self.group:
            raise ConstraintError(f"length {k} not divisible by group {self.group}")
        out = h.reshape(bsz, k // self.group, self.group).sum(axis=2)
        return out, k

    def backward(self, cache, grad_out):
        k = cache
        bsz = grad_out.shape[0]
        return np.repeat(grad_out, self.group, axis=1).reshape(bsz, k), {}


class L2Norm:
    """h / max(||h||_2, eps) per sample; eps guards the zero vector."""

    two_input = False

    def __init__(self, eps=L2NORM_EPS):
        self.eps = eps

    def params(self):
        return {}

    def constraints(self):
        return {}

    def forward(self, h):
        nrm = np.sqrt(np.sum(h * h, axis=1, keepdims=True))
        d = np.maximum(nrm, self.eps)
        return h / d, (h, nrm, d)

    def backward(self, cache, grad_out):
        h, nrm, d = cache
        live = (nrm > self.eps).astype(h.dtype)
        inner = np.sum(grad_out * h, axis=1, keepdims=True)
        return grad_out / d - live * h * inner / (d * d * d), {}


class Linear:
    """Fully connected layer, out = x W^T + bias."""

    two_input = False

    def __init__(self, w, bias):
        w = np.asarray(w)
        bias = np.asarray(bias)
        if bias.shape != (1, w.shape[0]):
            raise ConstraintError(f"bias shape {bias.shape} != (1, {w.shape[0]})")
        self.w = w
        self.bias = bias

    def params(self):
        return {"W": self.w, "b": self.bias}

    def constraints(self):
        return {"W": "free", "b": "free"}

    def forward(self, x):
        if x.shape[1] != self.w.shape[1]:
            raise ConstraintError(f"input dim {x.shape[1]} != {self.w.shape[1]}")
        return x @ self.w.T + self.bias, x

    def backward(self, cache, grad_out):
        x = cache
        gx = grad_out @ self.w
        gw = grad_out.T @ x
        gb = grad_out.sum(axis=0, keepdims=True)
        return gx, {"W": gw, "b": gb}


class PRelu:
    """Parametric ReLU with one shared learnable slope per layer instance."""

    two_input = False

    def __init__(self, slope=PRELU_INIT_SLOPE, dtype=np.float64):
        self.slope = np.full((1, 1), slope, dtype=dtype)

    def params(self):
        return {"slope": self.slope}

    def constraints(self):
        return {"slope": "free"}

    def forward(self, x):
        pos = x > 0
        out = np.where(pos, x, self.slope[0, 0] * x)
        return out, (x, pos)

    def backward(self, cache, grad_out):
        x, pos = cache
        gx = np.where(pos, grad_out, self.slope[0, 0] * grad_out)
        gs = np.sum(np.where(pos, 0.0, grad_out * x))
        return gx, {"slope": np.full((1, 1), gs, dtype=x.dtype)}


# ---------------------------------------------------------------------------
# functional surface on single vectors


def cau_forward_full(w, a, b):
    (a2, _), (b2, _) = _pair(a), _pair(b)
    h, _ = CauFullRank(w).forward(a2, b2)
    return h[0]


def cau_forward_rankone(u, v, a, b):
    (a2, _), (b2, _) = _pair(a), _pair(b)
    h, _ = CauRankOne(u, v).forward(a2, b2)
    return h[0]


def cau_backward_rankone(u, v, a, b, grad_out):
    layer = CauRankOne(u, v)
    h, cache = layer.forward(a[None, :], b[None, :])
    (ga, gb), grads = layer.backward(cache, grad_out[None, :])
    return ga[0], gb[0], grads["U"], grads["V"]


def cau_backward_full(w, a, b, grad_out):
    layer = CauFullRank(w)
    h, cache = layer.forward(a[None, :], b[None, :])
    (ga, gb), grads = layer.backward(cache, grad_out[None, :])
    return ga[0], gb[0], grads["W"].reshape(w.shape)


def bilinear_forward_rankone(u, v, a, b):
    h, _ = BilinearRankOne(u, v).forward(a[None, :], b[None, :])
    return h[0]


def concat_forward(a, b):
    return np.concatenate([a, b])


def concat_backward(grad_out, na):
    return grad_out[:na], grad_out[na:]


def softmin_forward(h):
    p, _ = Softmin().forward(np.asarray(h, dtype=np.float64)[None, :])
    return p[0]


def softmin_backward(p, grad_out):
    g, _ = Softmin().backward(p[None, :], grad_out[None, :])
    return g[0]


def wta(h):
    """One-hot at the minimum; ties resolved to the lowest index."""
    h = np.asarray(h)
    if h.size == 0:
        raise ConstraintError("wta requires a non-empty vector")
    out = np.zeros_like(h, dtype=np.float64)
    out[int(np.argmin(h))] = 1.0
    return out


def sumpool_forward(h, group):
    out, _ = SumPool(group).forward(np.asarray(h)[None, :])
    return out[0]


def l2norm_forward(h):
    out, _ = L2Norm().forward(np.asarray(h, dtype=np.float64)[None, :])
    return out[0]


def mse_loss(pred, target):
    """Mean squared error over the last axis, averaged over the batch.

    Returns (loss, grad_pred). For a 1-d pair this is the per-sample loss
    (1/d) sum (pred_i - target_i)^2 with gradient (2/d)(pred - target).
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ConstraintError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad
