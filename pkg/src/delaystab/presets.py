"""Ready-made characteristic functions for the systems studied here.

Each factory returns a CharFun for one of the model families: scalar
systems with a discrete or Gamma-distributed delay, the pure-coupling
consensus mode of the car-following network, the second-order agent mode
under delayed PD coupling, and the linearized order-parameter dynamics of
the controlled oscillator population.
"""

from __future__ import annotations

from .charfun import CharFun, ComplexPoly, L_VAR, build_charfun
from .kernels import DelayKernel, Dirac, Exponential, Gamma

__all__ = [
    "scalar_discrete",
    "scalar_gamma",
    "coupling_mode",
    "pd_agent_mode",
    "oscillator_mode",
    "growth_with_feedback",
    "drift_difference_coupling",
    "preset_charfun",
]


def scalar_discrete(a: float, d: float, tau: float) -> CharFun:
    """zdot = (a + i d) z + L z(t - tau)."""
    return build_charfun([[complex(a, d)]], [[L_VAR]], Dirac(tau))


def scalar_gamma(a: float, n: int, T: float) -> CharFun:
    """zdot = a z + L * (Gamma(n, T)-distributed delay of z)."""
    return build_charfun([[complex(a)]], [[L_VAR]], Gamma(n, T))


def coupling_mode(kernel: DelayKernel) -> CharFun:
    """zdot = L * (kernel-distributed delay of z): a pure coupling mode.

    This is the per-eigenvalue mode of the velocity-matching vehicle
    network after diagonalizing the coupling matrix.
    """
    return build_charfun([[0.0]], [[L_VAR]], kernel)


def pd_agent_mode(a: float, b: float, k1: float, k2: float, T: float) -> CharFun:
    """Second-order agent with exponentially distributed PD coupling delay.

    Per-eigenvalue mode of xdot = v, vdot = a v + b x + u with
    u = L * (k1 x + k2 v) filtered through an exponential delay of mean T.
    T = 0 degenerates to undelayed coupling (unit transform).
    """
    Q = [[0.0, 1.0], [complex(b), complex(a)]]
    B = [[0.0, 0.0], [k1 * L_VAR, k2 * L_VAR]]
    kernel: DelayKernel = Exponential(T) if T > 0 else Dirac(0.0)
    return build_charfun(Q, B, kernel)


def oscillator_mode(K: float, d: float, kernel: DelayKernel) -> CharFun:
    """Linearized order-parameter dynamics near incoherence.

    rdot = (K/2 - 1 + i d) r + L * (kernel-distributed delay of r).
    """
    return build_charfun([[complex(K / 2.0 - 1.0, d)]], [[L_VAR]], kernel)


def growth_with_feedback() -> CharFun:
    """zdot = z + L z(t - 1/2): the unstable scalar benchmark."""
    return scalar_discrete(1.0, 0.0, 0.5)


def drift_difference_coupling() -> CharFun:
    """zdot = 0.1(1+i) z + L (z(t-1) - z): complex drift, difference coupling."""
    drift = ComplexPoly((complex(0.1, 0.1),))
    return build_charfun([[drift - L_VAR]], [[L_VAR]], Dirac(1.0))


# CLI-facing names.
_PRESETS = {
    "growth-feedback": (growth_with_feedback, ()),
    "drift-difference": (drift_difference_coupling, ()),
    "scalar-discrete": (scalar_discrete, ("a", "d", "tau")),
    "scalar-gamma": (scalar_gamma, ("a", "n", "T")),
    "pd-agent": (pd_agent_mode, ("a", "b", "k1", "k2", "T")),
}


def preset_charfun(name: str, params: dict) -> CharFun:
    """Build a CharFun from a preset name and its parameter dict."""
    if name == "coupling-mode":
        from .kernels import kernel_from_dict

        return coupling_mode(kernel_from_dict(params["kernel"]))
    if name == "oscillator-mode":
        from .kernels import kernel_from_dict

        return oscillator_mode(params["K"], params["d"], kernel_from_dict(params["kernel"]))
    if name not in _PRESETS:
        raise ValueError(f"unknown preset: {name!r}")
    factory, arg_names = _PRESETS[name]
    missing = [k for k in arg_names if k not in params]
    if missing:
        raise ValueError(f"preset {name!r} missing parameters: {missing}")
    extra = [k for k in params if k not in arg_names]
    if extra:
        raise ValueError(f"preset {name!r} got unknown parameters: {extra}")
    return factory(**{k: params[k] for k in arg_names})
