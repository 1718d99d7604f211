"""Minimal dense linear algebra and deterministic RNG.

Everything is backed by numpy. Matrices are 2-d row-major float arrays;
float32 is used for training, float64 for gradient checking. The RNG is
PCG64 behind ``numpy.random.Generator``: a fixed, documented algorithm, so
a seed pins the bit-exact stream for the lifetime of the repo.
"""

import numpy as np

_ELEMENTWISE_OPS = ("add", "sub", "mul", "div", "pow")


class LinalgError(ValueError):
    pass


def as_matrix(a, dtype=None):
    """Coerce to a 2-d contiguous array, validating finiteness."""
    m = np.ascontiguousarray(a, dtype=dtype)
    if m.ndim != 2:
        raise LinalgError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise LinalgError("matrix contains NaN or Inf")
    return m


def gemm(a, b, transpose_a=False, transpose_b=False):
    """Matrix product with optional transposition of either operand."""
    a = np.asarray(a)
    b = np.asarray(b)
    if transpose_a:
        a = a.T
    if transpose_b:
        b = b.T
    if a.shape[1] != b.shape[0]:
        raise LinalgError(
            f"gemm dimension mismatch: ({a.shape[0]}x{a.shape[1]}) @ "
            f"({b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


def elementwise(a, b, op, guarded=False):
    """Element-wise binary operation on same-shape matrices.

    Division by zero is rejected unless ``guarded`` is set; the guarded mode
    exists for callers whose operands are already epsilon-shifted away from
    zero (the multiplicative-update optimizer).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise LinalgError(f"shape mismatch: {a.shape} vs {b.shape}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if not guarded and np.any(b == 0):
            raise LinalgError("division by zero (pass guarded=True to allow)")
        with np.errstate(divide="ignore"):
            return a / b
    if op == "pow":
        return a ** b
    raise LinalgError(f"unknown op {op!r}, expected one of {_ELEMENTWISE_OPS}")


def make_rng(seed):
    """Seeded PCG64 generator. Identical seed gives a bitwise-identical stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def substream(seed, *key):
    """Independent child stream keyed by integers, for parallel-safe determinism."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


def rng_uniform(rng, lo, hi, rows, cols, dtype=np.float64):
    """i.i.d. uniform matrix in [lo, hi)."""
    if not lo < hi:
        raise LinalgError(f"rng_uniform requires lo < hi, got lo={lo}, hi={hi}")
    return rng.uniform(lo, hi, size=(rows, cols)).astype(dtype)
