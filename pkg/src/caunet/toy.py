"""Hand-built translation-detection demo with three contrast association
units and winner-take-all competition.

Three 5x5 weight matrices (sub-diagonal, diagonal, super-diagonal ones)
match shift-by-one relations between a = (c1..c5) and b drawn from the same
sequence. With WTA the unit of zero matching error wins and the readout
(-1, 0, 1) . h' recovers the shift exactly, except for degenerate
c-sequences where a non-matching unit also lands at ~0.
"""

from dataclasses import dataclass

import numpy as np

from .layers import cau_forward_full, wta
from .linalg import substream

READOUT = np.array([-1.0, 0.0, 1.0])
TIE_THRESHOLD = 1e-9


def toy_weights():
    """The three 5x5 CAU weight matrices (shift -1, 0, +1)."""
    w1 = np.zeros((5, 5))
    w2 = np.eye(5)
    w3 = np.zeros((5, 5))
    for i in range(1, 5):
        w1[i, i - 1] = 1.0
        w3[i - 1, i] = 1.0
    return np.stack([w1, w2, w3])


def toy_inputs(c, z):
    """a and b for a length-7 sequence c0..c6 and shift z in {-1, 0, 1}."""
    c = np.asarray(c, dtype=np.float64)
    a = c[1:6]
    if z == -1:
        b = c[2:7]
    elif z == 0:
        b = c[1:6]
    elif z == 1:
        b = c[0:5]
    else:
        raise ValueError(f"z must be -1, 0 or 1, got {z}")
    return a, b


def pairwise_sq_diff(a, b):
    """Matrix of (a_i - b_j)^2."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return (a[:, None] - b[None, :]) ** 2


def infer_shift(a, b, w=None):
    """(h, readout value) for one input pair via CAU + WTA."""
    if w is None:
        w = toy_weights()
    h = cau_forward_full(w, a, b)
    return h, float(READOUT @ wta(h))


@dataclass
class ToyResult:
    trials: int
    excluded: int
    recovered: int

    @property
    def considered(self):
        return self.trials - self.excluded


def run_toy(trials=1000, seed=0, tie_threshold=TIE_THRESHOLD):
    """Exact-recovery count over random c-sequences.

    Trials where a non-matching unit falls below ``tie_threshold`` are the
    degenerate near-ties and are excluded from the recovery count.
    """
    w = toy_weights()
    rng = substream(seed, 0x707)
    excluded = 0
    recovered = 0
    for _ in range(trials):
        c = rng.uniform(-1.0, 1.0, size=7)
        z = int(rng.integers(-1, 2))
        a, b = toy_inputs(c, z)
        h, zhat = infer_shift(a, b, w)
        others = np.delete(h, z + 1)
        if np.min(others) <= tie_threshold:
            excluded += 1
            continue
        if zhat == z:
            recovered += 1
    return ToyResult(trials, excluded, recovered)


def demo_report(trials=1000, seed=0):
    """Human-readable report: one worked example plus the recovery rate."""
    rng = substream(seed, 0x708)
    c = rng.uniform(-1.0, 1.0, size=7)
    a, b = toy_inputs(c, 0)
    d = pairwise_sq_diff(a, b)
    res = run_toy(trials=trials, seed=seed)
    lines = ["Toy translation detection (3 CAUs + WTA + readout (-1,0,1))", ""]
    lines.append("Worked example, z = 0 (b = a): pairwise squared differences D(a, b)")
    for row in d:
        lines.append("  [" + "  ".join(f"{v: .4f}" for v in row) + "]")
    lines.append("  (zero diagonal: the identity-shift unit matches exactly)")
    h, zhat = infer_shift(a, b)
    lines.append(f"  h = ({h[0]:.6f}, {h[1]:.6f}, {h[2]:.6f}) -> readout {zhat:+.0f}")
    lines.append("")
    lines.append(
        f"Random trials: {res.recovered}/{res.considered} exact recoveries "
        f"({res.excluded} near-tie trials excluded at threshold {TIE_THRESHOLD:g})"
    )
    return "\n".join(lines), res
