"""Expression catalog: named functions of position for V, b, ψ and j.

Every expression maps an array of points of shape (..., d) to values of
shape (...). The catalog also holds the holomorphic functions used by the
complex-variable example family.
"""

from __future__ import annotations

import logging
from typing import Any, Callable

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import RegularGridInterpolator

from mfg_exit.errors import ConfigurationError
from mfg_exit.models import ExpressionSpec

logger = logging.getLogger(__name__)

Expression = Callable[[np.ndarray], np.ndarray]
ComplexMap = Callable[[np.ndarray], np.ndarray]


def _required(params: dict[str, Any], kind: str, name: str) -> Any:
    if name not in params:
        raise ConfigurationError(f"expression '{kind}' needs parameter '{name}'")
    return params[name]


def _constant(params: dict[str, Any]) -> Expression:
    value = float(_required(params, "constant", "value"))
    return lambda x: np.full(x.shape[:-1], value)


def _sine(params: dict[str, Any]) -> Expression:
    amplitude = float(params.get("amplitude", 1.0))
    frequency = float(params.get("frequency", 1.0))
    phase = float(params.get("phase", 0.0))
    offset = float(params.get("offset", 0.0))
    axis = int(params.get("axis", 0))
    return lambda x: amplitude * np.sin(2 * np.pi * frequency * x[..., axis] + phase) + offset


def _gaussian_bump(params: dict[str, Any]) -> Expression:
    amplitude = float(params.get("amplitude", 1.0))
    center = np.asarray(params.get("center", [0.5]), dtype=float)
    width = float(params.get("width", 0.1))
    offset = float(params.get("offset", 0.0))
    if width <= 0:
        raise ConfigurationError("gaussian_bump width must be positive")

    def bump(x: np.ndarray) -> np.ndarray:
        r2 = np.sum((x - center[: x.shape[-1]]) ** 2, axis=-1)
        return amplitude * np.exp(-r2 / (2 * width**2)) + offset

    return bump


def _polynomial(params: dict[str, Any]) -> Expression:
    coefficients = np.asarray(_required(params, "polynomial", "coefficients"), dtype=float)
    axis = int(params.get("axis", 0))
    return lambda x: P.polyval(x[..., axis], coefficients)


def _ramp(params: dict[str, Any]) -> Expression:
    slope = float(params.get("slope", 1.0))
    x0 = float(params.get("x0", 0.0))
    offset = float(params.get("offset", 0.0))
    axis = int(params.get("axis", 0))
    return lambda x: slope * np.maximum(x[..., axis] - x0, 0.0) + offset


def _tabulated(params: dict[str, Any]) -> Expression:
    xs = np.asarray(_required(params, "tabulated", "x"), dtype=float)
    values = np.asarray(_required(params, "tabulated", "values"), dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ConfigurationError("tabulated x knots must be strictly increasing")

    if "y" not in params:
        if values.shape != xs.shape:
            raise ConfigurationError(f"tabulated values need {xs.size} entries, got {values.size}")
        return lambda x: np.interp(x[..., 0], xs, values)

    ys = np.asarray(params["y"], dtype=float)
    if values.shape != (xs.size, ys.size):
        raise ConfigurationError(f"tabulated values need shape ({xs.size}, {ys.size}), got {values.shape}")
    # fill_value=None extrapolates linearly from the edge cells
    table = RegularGridInterpolator((xs, ys), values, bounds_error=False, fill_value=None)

    def bilinear(x: np.ndarray) -> np.ndarray:
        return table(x.reshape(-1, 2)).reshape(x.shape[:-1])

    return bilinear


def _sin_norm_sq(params: dict[str, Any]) -> Expression:
    return lambda x: np.sin(np.sum(x**2, axis=-1))


# --- 2D exponential-trigonometric example ---


def _exp_trig_potential(params: dict[str, Any]) -> Expression:
    def potential(x: np.ndarray) -> np.ndarray:
        px, py = x[..., 0], x[..., 1]
        return 3 * np.exp(-np.pi * px) * np.cos(np.pi * py) - 0.5 * np.pi**2 * np.exp(-2 * np.pi * px)

    return potential


def _exp_trig_exit_cost(params: dict[str, Any]) -> Expression:
    return lambda x: np.exp(-np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])


def _exp_trig_influx(params: dict[str, Any]) -> Expression:
    return lambda x: 1.5 * np.pi * np.maximum(np.sin(2 * np.pi * x[..., 1]), 0.0)


# --- Complex-variable family ---


def _polynomial_map(coefficients: Any) -> tuple[ComplexMap, ComplexMap]:
    if not coefficients:
        raise ConfigurationError("polynomial holomorphic function needs coefficients")
    c = np.array([complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in coefficients])
    dc = P.polyder(c)
    return (lambda z: P.polyval(z, c)), (lambda z: P.polyval(z, dc))


# name → builder(coefficients) -> (f, f')
HOLOMORPHIC_FUNCTIONS: dict[str, Callable[[Any], tuple[ComplexMap, ComplexMap]]] = {
    "identity": lambda _: ((lambda z: z), (lambda z: np.ones_like(z))),
    "square": lambda _: ((lambda z: z**2), (lambda z: 2 * z)),
    "cube": lambda _: ((lambda z: z**3), (lambda z: 3 * z**2)),
    "exp_trig": lambda _: ((lambda z: 1j * np.exp(-np.pi * z)), (lambda z: -1j * np.pi * np.exp(-np.pi * z))),
    "polynomial": _polynomial_map,
}


def holomorphic_function(name: str, coefficients: Any = None) -> tuple[ComplexMap, ComplexMap]:
    """Return (f, f') for a catalog entry.

    Polynomial coefficients are ascending; each entry is a real number or a
    [re, im] pair.
    """
    builder = HOLOMORPHIC_FUNCTIONS.get(name)
    if builder is None:
        raise ConfigurationError(
            f"unknown holomorphic function '{name}' (expected one of {sorted(HOLOMORPHIC_FUNCTIONS)})"
        )
    return builder(coefficients)


def _holomorphic_potential(params: dict[str, Any]) -> Expression:
    f, fprime = holomorphic_function(
        str(_required(params, "holomorphic_potential", "function")),
        params.get("coefficients"),
    )
    q = float(params.get("q", 1.0))
    m_scale = float(params.get("m_scale", 1.0))
    if q <= 0:
        raise ConfigurationError("holomorphic_potential q must be positive")

    def potential(x: np.ndarray) -> np.ndarray:
        z = x[..., 0] + 1j * x[..., 1]
        m_tilde = np.maximum(m_scale * np.imag(f(z)), 0.0)
        # |∇u|² = |f'(z)|² by Cauchy–Riemann
        return m_tilde ** (1.0 / q) - 0.5 * np.abs(fprime(z)) ** 2

    return potential


# kind → builder(params) -> Expression
EXPRESSION_BUILDERS: dict[str, Callable[[dict[str, Any]], Expression]] = {
    "constant": _constant,
    "sine": _sine,
    "gaussian_bump": _gaussian_bump,
    "polynomial": _polynomial,
    "ramp": _ramp,
    "tabulated": _tabulated,
    "sin_norm_sq": _sin_norm_sq,
    "exp_trig_potential": _exp_trig_potential,
    "exp_trig_exit_cost": _exp_trig_exit_cost,
    "exp_trig_influx": _exp_trig_influx,
    "holomorphic_potential": _holomorphic_potential,
}

# Kinds that read the second coordinate
PLANAR_KINDS = {"exp_trig_potential", "exp_trig_exit_cost", "exp_trig_influx", "holomorphic_potential"}


def build_expression(spec: ExpressionSpec) -> Expression:
    """Resolve a spec to a vectorized callable."""
    builder = EXPRESSION_BUILDERS.get(spec.kind)
    if builder is None:
        raise ConfigurationError(f"unknown expression kind '{spec.kind}'")
    try:
        return builder(spec.params)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"bad parameters for expression '{spec.kind}': {e}") from e


def evaluate_expression(spec: ExpressionSpec, points: Any) -> np.ndarray:
    """Evaluate on points of shape (..., d)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1)
    if spec.kind in PLANAR_KINDS and pts.shape[-1] < 2:
        raise ConfigurationError(f"expression '{spec.kind}' is only defined in 2D")
    return np.asarray(build_expression(spec)(pts), dtype=float)
