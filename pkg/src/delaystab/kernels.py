"""Delay distribution kernels and their Laplace transforms.

Four closed-form families are supported: a point mass (discrete delay), a
uniform density on an interval, a Gamma (Erlang) density, and its n=1
special case, the exponential density.  Every kernel integrates to one, so
its transform satisfies hhat(0) = 1 and |hhat(lam)| <= 1 whenever
Re(lam) >= 0.  Transforms are evaluated in closed form and accept scalar or
numpy-array arguments for ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "DelayKernel",
    "Dirac",
    "Uniform",
    "Gamma",
    "Exponential",
    "KernelPoleError",
    "laplace",
    "laplace_derivative",
    "kernel_to_dict",
    "kernel_from_dict",
]

# Below this value of |lam|*A the uniform-kernel transform switches to a
# 4-term Taylor series to avoid cancellation in (exp(-a*lam)-exp(-(a+A)*lam)).
_UNIFORM_SERIES_CUTOFF = 1e-4


class KernelPoleError(ZeroDivisionError):
    """Transform evaluated at a pole (Gamma family at lam = -n/T)."""


@dataclass(frozen=True)
class Dirac:
    """Point mass at delay ``tau``: a single discrete delay."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"Dirac delay must be nonnegative, got {self.tau}")


@dataclass(frozen=True)
class Uniform:
    """Uniform density 1/A on the interval [a, a+A]."""

    a: float
    A: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"Uniform offset must be nonnegative, got {self.a}")
        if self.A <= 0:
            raise ValueError(f"Uniform width must be positive, got {self.A}")


@dataclass(frozen=True)
class Gamma:
    """Gamma (Erlang) density with shape ``n`` and mean ``T``.

    Density n^n/((n-1)! T^n) tau^(n-1) exp(-n tau / T); the transform is
    (1 + lam*T/n)^(-n).
    """

    n: int
    T: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"Gamma shape must be a positive integer, got {self.n}")
        if self.T <= 0:
            raise ValueError(f"Gamma mean must be positive, got {self.T}")


@dataclass(frozen=True)
class Exponential:
    """Exponential density with mean ``T``; identical to Gamma(1, T)."""

    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"Exponential mean must be positive, got {self.T}")


DelayKernel = Union[Dirac, Uniform, Gamma, Exponential]


def _uniform_g(x):
    """(1 - exp(-x))/x with a series branch near x = 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _UNIFORM_SERIES_CUTOFF
    xs = np.where(small, 0.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (1.0 - np.exp(-xs)) / np.where(small, 1.0, xs)
    series = 1.0 - x / 2.0 + x**2 / 6.0 - x**3 / 24.0
    return np.where(small, series, direct)


def _uniform_g_prime(x):
    """Derivative of (1 - exp(-x))/x, series branch near x = 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _UNIFORM_SERIES_CUTOFF
    xs = np.where(small, 1.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.exp(-xs) * (1.0 + xs) - 1.0) / xs**2
    series = -0.5 + x / 3.0 - x**2 / 8.0 + x**3 / 30.0
    return np.where(small, series, direct)


def _gamma_base(n: int, T: float, lam):
    base = 1.0 + np.asarray(lam, dtype=complex) * (T / n)
    if np.any(base == 0.0):
        raise KernelPoleError(f"Gamma transform pole at lam = {-n / T}")
    return base


def laplace(kernel: DelayKernel, lam):
    """Evaluate the kernel's Laplace transform at ``lam`` (scalar or array).

    All four families have entire or rational transforms, so evaluation is
    permitted anywhere except the Gamma-family pole at lam = -n/T.
    """
    lam = np.asarray(lam, dtype=complex)
    if isinstance(kernel, Dirac):
        out = np.exp(-lam * kernel.tau)
    elif isinstance(kernel, Uniform):
        out = np.exp(-kernel.a * lam) * _uniform_g(kernel.A * lam)
    elif isinstance(kernel, Gamma):
        out = _gamma_base(kernel.n, kernel.T, lam) ** (-kernel.n)
    elif isinstance(kernel, Exponential):
        out = _gamma_base(1, kernel.T, lam) ** (-1)
    else:
        raise TypeError(f"not a delay kernel: {kernel!r}")
    return out[()] if out.ndim == 0 else out


def laplace_derivative(kernel: DelayKernel, lam):
    """d/dlam of the transform, in closed form per family."""
    lam = np.asarray(lam, dtype=complex)
    if isinstance(kernel, Dirac):
        out = -kernel.tau * np.exp(-lam * kernel.tau)
    elif isinstance(kernel, Uniform):
        a, A = kernel.a, kernel.A
        g = _uniform_g(A * lam)
        gp = _uniform_g_prime(A * lam)
        out = np.exp(-a * lam) * (A * gp - a * g)
    elif isinstance(kernel, Gamma):
        base = _gamma_base(kernel.n, kernel.T, lam)
        out = -kernel.T * base ** (-kernel.n - 1)
    elif isinstance(kernel, Exponential):
        base = _gamma_base(1, kernel.T, lam)
        out = -kernel.T * base ** (-2)
    else:
        raise TypeError(f"not a delay kernel: {kernel!r}")
    return out[()] if out.ndim == 0 else out


def kernel_to_dict(kernel: DelayKernel) -> dict:
    if isinstance(kernel, Dirac):
        return {"kind": "dirac", "tau": kernel.tau}
    if isinstance(kernel, Uniform):
        return {"kind": "uniform", "a": kernel.a, "A": kernel.A}
    if isinstance(kernel, Gamma):
        return {"kind": "gamma", "n": int(kernel.n), "T": kernel.T}
    if isinstance(kernel, Exponential):
        return {"kind": "exponential", "T": kernel.T}
    raise TypeError(f"not a delay kernel: {kernel!r}")


def kernel_from_dict(d: dict) -> DelayKernel:
    kind = d.get("kind")
    if kind == "dirac":
        return Dirac(tau=float(d["tau"]))
    if kind == "uniform":
        return Uniform(a=float(d["a"]), A=float(d["A"]))
    if kind == "gamma":
        return Gamma(n=int(d["n"]), T=float(d["T"]))
    if kind == "exponential":
        return Exponential(T=float(d["T"]))
    raise ValueError(f"unknown kernel kind: {kind!r}")
