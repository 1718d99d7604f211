"""Central finite-difference verification of every hand-coded backward pass.

A random scalar projection r . forward(...) turns each layer into a scalar
function; the analytic gradient (backward with grad_out = r) is compared
against (f(t + h e) - f(t - h e)) / 2h entry by entry, in float64.

Relative error per entry: |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
"""

from dataclasses import dataclass

import numpy as np

from . import layers as L
from .linalg import substream
from .model import ModelConfig, build_model

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
DEFAULT_TRIALS = 100


@dataclass
class GradCheckResult:
    layer_name: str
    max_rel_error: float
    worst_index: tuple
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.layer_name:<24} max_rel_err={self.max_rel_error:.3e} "
            f"worst={self.worst_index}"
        )


def _rel_err(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def _run_forward(layer, inputs):
    out, _ = layer.forward(*inputs)
    return out


def _numeric_grad(layer, inputs, tensor, r, step):
    grad = np.zeros_like(tensor)
    it = np.nditer(tensor, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = tensor[idx]
        tensor[idx] = orig + step
        fp = float(np.sum(r * _run_forward(layer, inputs)))
        tensor[idx] = orig - step
        fm = float(np.sum(r * _run_forward(layer, inputs)))
        tensor[idx] = orig
        grad[idx] = (fp - fm) / (2 * step)
    return grad


def check_layer(make_layer, trials=DEFAULT_TRIALS, step=DEFAULT_STEP,
                tol=DEFAULT_TOL, seed=0, name=None, corrupt=False):
    """Finite-difference check of a layer over seeded random instances.

    ``make_layer(rng)`` must return ``(layer, inputs)`` with float64 tensors.
    ``corrupt`` flips the sign of the analytic input gradient, for verifying
    that the harness actually detects broken gradients.
    """
    worst = 0.0
    worst_idx = ()
    layer_name = name or "unnamed"
    for t in range(trials):
        rng = substream(seed, 0x6C, t)
        layer, inputs = make_layer(rng)
        out, cache = layer.forward(*inputs)
        # Small projection scale keeps the finite-difference roundoff below
        # the relative-error floor for entries whose true gradient is ~0.
        r = 0.01 * rng.standard_normal(out.shape)
        gin, pgrads = layer.backward(cache, r.copy())
        if not isinstance(gin, tuple):
            gin = (gin,)
        if corrupt:
            gin = tuple(-g for g in gin)
        targets = [(f"input{i}", inputs[i], g) for i, g in enumerate(gin)]
        params = layer.params()
        targets += [(k, params[k], pgrads[k]) for k in params]
        for tag, tensor, analytic in targets:
            num = _numeric_grad(layer, inputs, tensor, r, step)
            err = _rel_err(np.asarray(analytic, dtype=np.float64), num)
            m = float(err.max()) if err.size else 0.0
            if m > worst:
                worst = m
                worst_idx = (t, tag) + tuple(
                    int(i) for i in np.unravel_index(int(err.argmax()), err.shape)
                )
    return GradCheckResult(layer_name, worst, worst_idx, worst < tol)


# ---------------------------------------------------------------------------
# standard instances for every layer in the model stacks


def _vec(rng, n):
    return rng.uniform(-1.0, 1.0, size=(1, n))


def _away_from_kink(x, margin=1e-3):
    x = x.copy()
    small = np.abs(x) < margin
    x[small] = margin * np.where(x[small] >= 0, 1.0, -1.0) * 2
    return x


def _pos_matrix(rng, shape, step=DEFAULT_STEP):
    # keep entries >= 10*step so the minus perturbation stays positive
    return rng.uniform(10 * step, 1.0, size=shape)


def standard_checks(n=6, k=8):
    """(name, factory) pairs covering every layer type in the three stacks."""

    def cau_rankone(rng):
        return L.CauRankOne(_pos_matrix(rng, (k, n)), _pos_matrix(rng, (k, n))), (
            _vec(rng, n), _vec(rng, n))

    def cau_full(rng):
        return L.CauFullRank(_pos_matrix(rng, (3, n, n))), (_vec(rng, n), _vec(rng, n))

    def bilinear(rng):
        return L.BilinearRankOne(
            rng.standard_normal((k, n)), rng.standard_normal((k, n))
        ), (_vec(rng, n), _vec(rng, n))

    def concat(rng):
        return L.Concat(), (_vec(rng, n), _vec(rng, n))

    def softmin(rng):
        return L.Softmin(), (_vec(rng, k),)

    def sumpool(rng):
        return L.SumPool(2), (_vec(rng, k),)

    def l2norm(rng):
        return L.L2Norm(), (_vec(rng, k) + 0.5,)

    def linear(rng):
        w = rng.standard_normal((4, n))
        b = rng.standard_normal((1, 4))
        return L.Linear(w, b), (_vec(rng, n),)

    def prelu(rng):
        return L.PRelu(slope=rng.uniform(0.05, 0.5)), (_away_from_kink(_vec(rng, n)),)

    return [
        ("cau_rankone", cau_rankone),
        ("cau_fullrank", cau_full),
        ("bilinear_rankone", bilinear),
        ("concat", concat),
        ("softmin", softmin),
        ("sumpool", sumpool),
        ("l2norm", l2norm),
        ("linear", linear),
        ("prelu", prelu),
    ]


def check_all(trials=DEFAULT_TRIALS, step=DEFAULT_STEP, tol=DEFAULT_TOL, seed=0,
              corrupt=None):
    """Run every standard check; ``corrupt`` names one layer to sabotage."""
    results = []
    for name, factory in standard_checks():
        results.append(
            check_layer(
                factory, trials=trials, step=step, tol=tol, seed=seed,
                name=name, corrupt=(name == corrupt),
            )
        )
    return results


def check_whole_model(seed=0, step=DEFAULT_STEP, tol=DEFAULT_TOL, trials=5,
                      kind="can"):
    """End-to-end check of a tiny model's parameter gradients."""
    cfg = ModelConfig(kind=kind, zdim=1, input_dim=6, relation_units=8,
                      pooled_units=2, hidden=(5,))
    worst = 0.0
    worst_idx = ()
    for t in range(trials):
        rng = substream(seed, 0xF0, t)
        model, reg = build_model(cfg, rng, dtype=np.float64)
        x = rng.uniform(-0.5, 0.5, size=(1, 6))
        y = rng.uniform(-0.5, 0.5, size=(1, 6))
        out, trace = model.forward(x, y)
        r = rng.standard_normal(out.shape)
        grads = model.backward(trace, r.copy())
        for entry in reg.entries:
            tensor = entry.tensor
            num = np.zeros_like(tensor)
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + step
                fp = float(np.sum(r * model.forward(x, y)[0]))
                tensor[idx] = orig - step
                fm = float(np.sum(r * model.forward(x, y)[0]))
                tensor[idx] = orig
                num[idx] = (fp - fm) / (2 * step)
            err = _rel_err(np.asarray(grads[entry.name], dtype=np.float64), num)
            m = float(err.max())
            if m > worst:
                worst = m
                worst_idx = (t, entry.name)
    return GradCheckResult(f"whole_{kind}", worst, worst_idx, worst < tol)
