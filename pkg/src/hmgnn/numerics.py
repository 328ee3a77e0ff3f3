"""Dense kernels, activations, seeded randomness and the finite-difference oracle.

Every array in the package is a float64 ``numpy.ndarray``; the gradient checks
that verify the layers need double precision to resolve relative errors of
1e-4 at a step of 1e-5.
"""
from __future__ import annotations

import zlib
from typing import Callable

import numpy as np

DTYPE = np.float64
DEFAULT_LEAKY_SLOPE = 0.2


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class OracleError(ArithmeticError):
    """The finite-difference oracle hit a non-finite function value."""

    def __init__(self, coordinate: tuple, value: float):
        super().__init__(f"non-finite value {value!r} while probing coordinate {coordinate}")
        self.coordinate = coordinate
        self.value = value


def as_matrix(x, name: str = "array") -> np.ndarray:
    """Return ``x`` as a finite float64 array, raising ``DomainError`` otherwise."""
    arr = np.asarray(x, dtype=DTYPE)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def softmax_stable(v) -> np.ndarray:
    v = np.asarray(v, dtype=DTYPE)
    if v.ndim != 1 or v.size == 0:
        raise DomainError("softmax needs a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise DomainError("softmax input contains non-finite entries")
    z = np.exp(v - v.max())
    return z / z.sum()


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product of softmax at output ``probs``."""
    return probs * (dprobs - np.dot(probs, dprobs))


def leaky_relu(x, slope: float = DEFAULT_LEAKY_SLOPE):
    if not 0.0 < slope < 1.0:
        raise DomainError(f"leaky slope must lie in (0, 1), got {slope}")
    x = np.asarray(x, dtype=DTYPE)
    out = np.where(x >= 0, x, slope * x)
    return out if out.ndim else float(out)


def leaky_relu_grad(x, slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    return np.where(np.asarray(x) >= 0, 1.0, slope)


def relu(x) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x) -> np.ndarray:
    # split branches so exp never overflows
    x = np.asarray(x, dtype=DTYPE)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b`` accumulated over the inner index in ascending order.

    Unlike BLAS-backed ``@`` the summation order is fixed, so the result is
    bit-identical to a naive loop that adds ``a[i, k] * b[k, j]`` for
    ``k = 0, 1, ...`` starting from ``0.0``.
    """
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.shape[1] != b.shape[0]:
        raise DomainError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=DTYPE)
    for k in range(a.shape[1]):
        out += a[:, k:k + 1] * b[k:k + 1, :]
    return out


def make_rng(seed: int, *keys: str) -> np.random.Generator:
    """Deterministic PCG64 generator for ``seed``, optionally split by string keys.

    Keys are hashed with CRC-32 so each named stream is independent of the
    order in which other streams are drawn.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy += [zlib.crc32(k.encode("utf-8")) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def finite_diff_grad(f: Callable[[np.ndarray], float], theta, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``theta`` (any shape).

    ``f`` receives a perturbed copy of ``theta``; ``theta`` itself is never
    modified.
    """
    if h <= 0:
        raise DomainError("step h must be positive")
    theta = np.array(theta, dtype=DTYPE)
    grad = np.zeros_like(theta)
    probe = theta.copy()
    for idx in np.ndindex(theta.shape):
        orig = probe[idx]
        probe[idx] = orig + h
        fp = float(f(probe))
        probe[idx] = orig - h
        fm = float(f(probe))
        probe[idx] = orig
        for val in (fp, fm):
            if not np.isfinite(val):
                raise OracleError(idx, val)
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    """Max over entries of ``|a - n| / max(1, |a|, |n|)``; 0 for empty arrays."""
    a = np.asarray(analytic, dtype=DTYPE)
    n = np.asarray(numeric, dtype=DTYPE)
    if a.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom))
