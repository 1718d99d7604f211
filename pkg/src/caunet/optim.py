"""Optimizers: Adam for unconstrained weights, multiplicative updates for
non-negative weights, and the shared learning-rate decay schedule.

The multiplicative update splits the (batch-averaged) gradient into two
strictly positive parts,

    plus  = (abs(g) + g)/2 + eps
    minus = (abs(g) - g)/2 + eps

and applies W <- W o (minus/plus)^eta element-wise. With eps = 1e-20 the
ratio power underflows in float32, so the step always runs in float64
(log space) regardless of the training precision.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_ADAM_EPS = 1e-8


@dataclass
class AdamState:
    alpha: float
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_ADAM_EPS
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


@dataclass
class MulUpdateState:
    eta: float
    eps: float = 1e-20

    def __post_init__(self):
        if self.eta <= 0 or self.eps <= 0:
            raise ValueError(f"eta and eps must be positive, got {self.eta}, {self.eps}")


@dataclass
class LrSchedule:
    decay_factor: float = 0.95
    decay_every: int = 500


def grad_split(grad, eps):
    """Split a gradient into strictly positive parts with plus - minus = grad."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    g = np.asarray(grad, dtype=np.float64)
    a = np.abs(g)
    return 0.5 * (a + g) + eps, 0.5 * (a - g) + eps


def mul_step(w, grad, state):
    """One multiplicative update; preserves strict positivity of ``w``."""
    wmin = np.min(w)
    if wmin <= 0:
        raise ValueError(f"mul_step requires strictly positive weights, min={wmin}")
    plus, minus = grad_split(grad, state.eps)
    ratio = np.exp(state.eta * (np.log(minus) - np.log(plus)))
    return (w.astype(np.float64) * ratio).astype(w.dtype)


def adam_step(param, grad, state):
    """Standard Adam update with bias correction; mutates ``state``."""
    g = np.asarray(grad, dtype=np.float64)
    if state.m is None:
        state.m = np.zeros(param.shape, dtype=np.float64)
        state.v = np.zeros(param.shape, dtype=np.float64)
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * g
    state.v = state.beta2 * state.v + (1 - state.beta2) * (g * g)
    mhat = state.m / (1 - state.beta1 ** state.t)
    vhat = state.v / (1 - state.beta2 ** state.t)
    step = state.alpha * mhat / (np.sqrt(vhat) + state.eps)
    return (param.astype(np.float64) - step).astype(param.dtype)


def schedule_tick(step, sched, alpha, eta):
    """Decay both rates at steps decay_every, 2*decay_every, ..."""
    if step >= 1 and step % sched.decay_every == 0:
        return alpha * sched.decay_factor, eta * sched.decay_factor
    return alpha, eta
