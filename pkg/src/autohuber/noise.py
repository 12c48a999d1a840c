"""Standardized noise laws for simulation and for the population oracle.

Every law is delivered in standardized form: the raw distribution is shifted
and scaled by its closed-form mean and standard deviation so that the
standardized variable eps has mean 0 and variance 1.  Observations are then
``mu_true + sigma * eps``, which makes sigma the true standard deviation for
every law.

Supported laws and parameters:

``gaussian``
    Standard normal, no parameters.
``student_t``
    ``df`` > 2 degrees of freedom (variance must be finite).
``pareto``
    ``shape`` > 2, minimum 1 (the raw variable lives on [1, inf)).
``lognormal``
    ``meanlog`` (default 0) and ``sdlog`` > 0 (default 1) of the underlying
    normal.
``two_point``
    Symmetric +/-1 coin flips, no parameters.
``contaminated_gaussian``
    Mixture (1-eps) N(0,1) + eps N(0, scale^2); ``eps`` in (0,1) (default
    0.1), ``scale`` > 1 (default 5).

The CLI grammar is ``law`` or ``law:key=value,key=value``, for example
``student_t:df=3`` or ``contaminated_gaussian:eps=0.05,scale=10``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LAWS = (
    "gaussian",
    "student_t",
    "pareto",
    "lognormal",
    "two_point",
    "contaminated_gaussian",
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class NoiseModel:
    """A noise law plus the constants that standardize it.

    ``shift`` and ``scale`` satisfy eps = (raw - shift) / scale where raw is
    the textbook-parameterized variable; they are closed-form moments, never
    estimated.
    """

    law: str
    params: dict = field(default_factory=dict)
    shift: float = 0.0
    scale: float = 1.0


def standardize(law: str, **params) -> NoiseModel:
    """Build a ``NoiseModel`` with closed-form standardization constants.

    Raises ValueError for unknown laws, unknown or missing parameters, and
    parameter values outside the finite-variance model class.
    """
    if law not in LAWS:
        raise ValueError(f"unknown noise law {law!r}; expected one of {', '.join(LAWS)}")
    if law == "gaussian":
        _reject_extras(law, params, ())
        return NoiseModel(law, {}, 0.0, 1.0)
    if law == "student_t":
        _reject_extras(law, params, ("df",))
        df = _require(law, params, "df")
        if df <= 2.0:
            raise ValueError(
                f"student_t df={df:g}: infinite variance outside model class (need df > 2)"
            )
        return NoiseModel(law, {"df": df}, 0.0, math.sqrt(df / (df - 2.0)))
    if law == "pareto":
        _reject_extras(law, params, ("shape",))
        shape = _require(law, params, "shape")
        if shape <= 2.0:
            raise ValueError(
                f"pareto shape={shape:g}: infinite variance outside model class (need shape > 2)"
            )
        mean = shape / (shape - 1.0)
        var = shape / ((shape - 1.0) ** 2 * (shape - 2.0))
        return NoiseModel(law, {"shape": shape}, mean, math.sqrt(var))
    if law == "lognormal":
        _reject_extras(law, params, ("meanlog", "sdlog"))
        meanlog = float(params.get("meanlog", 0.0))
        sdlog = float(params.get("sdlog", 1.0))
        if not (math.isfinite(meanlog) and math.isfinite(sdlog) and sdlog > 0.0):
            raise ValueError(f"lognormal needs finite meanlog and sdlog > 0, got {params!r}")
        mean = math.exp(meanlog + 0.5 * sdlog**2)
        var = (math.exp(sdlog**2) - 1.0) * math.exp(2.0 * meanlog + sdlog**2)
        return NoiseModel(law, {"meanlog": meanlog, "sdlog": sdlog}, mean, math.sqrt(var))
    if law == "two_point":
        _reject_extras(law, params, ())
        return NoiseModel(law, {}, 0.0, 1.0)
    # contaminated_gaussian
    _reject_extras(law, params, ("eps", "scale"))
    eps = float(params.get("eps", 0.1))
    scale = float(params.get("scale", 5.0))
    if not (0.0 < eps < 1.0):
        raise ValueError(f"contaminated_gaussian eps must lie in (0, 1), got {eps!r}")
    if not (math.isfinite(scale) and scale > 1.0):
        raise ValueError(f"contaminated_gaussian scale must exceed 1, got {scale!r}")
    std = math.sqrt((1.0 - eps) + eps * scale**2)
    return NoiseModel(law, {"eps": eps, "scale": scale}, 0.0, std)


def _require(law, params, key) -> float:
    if key not in params:
        raise ValueError(f"{law} requires parameter {key!r}")
    value = float(params[key])
    if not math.isfinite(value):
        raise ValueError(f"{law} parameter {key}={params[key]!r} must be finite")
    return value


def _reject_extras(law, params, allowed):
    extras = set(params) - set(allowed)
    if extras:
        raise ValueError(f"{law} got unknown parameter(s): {', '.join(sorted(extras))}")


def parse_noise(text: str) -> NoiseModel:
    """Parse the CLI grammar ``law[:key=value[,key=value...]]``."""
    text = text.strip()
    if not text:
        raise ValueError("empty noise specification")
    law, _, tail = text.partition(":")
    law = law.strip()
    params = {}
    if tail.strip():
        for item in tail.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"noise parameter {item!r} is not of the form key=value")
            key = key.strip()
            try:
                params[key] = float(value.strip())
            except ValueError:
                raise ValueError(
                    f"noise parameter {key!r} has non-numeric value {value.strip()!r}"
                ) from None
    return standardize(law, **params)


def law_label(model: NoiseModel) -> str:
    """Inverse of ``parse_noise``, for reports."""
    if not model.params:
        return model.law
    inner = ",".join(f"{k}={model.params[k]:g}" for k in sorted(model.params))
    return f"{model.law}:{inner}"


def sample(model: NoiseModel, sigma, n, mu_true, seed) -> np.ndarray:
    """Draw ``n`` observations mu_true + sigma * eps, deterministically in seed."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if not (math.isfinite(sigma) and sigma >= 0.0):
        raise ValueError(f"sigma must be nonnegative and finite, got {sigma!r}")
    if not math.isfinite(mu_true):
        raise ValueError(f"mu_true must be finite, got {mu_true!r}")
    rng = np.random.default_rng(seed)
    eps = _draw_standardized(model, rng, n)
    return mu_true + sigma * eps


def _draw_standardized(model: NoiseModel, rng: np.random.Generator, n: int) -> np.ndarray:
    law = model.law
    if law == "gaussian":
        return rng.standard_normal(n)
    if law == "student_t":
        return rng.standard_t(model.params["df"], n) / model.scale
    if law == "pareto":
        # Generator.pareto draws the Lomax form on [0, inf); add 1 to get the
        # classical minimum-1 variable
        raw = 1.0 + rng.pareto(model.params["shape"], n)
        return (raw - model.shift) / model.scale
    if law == "lognormal":
        raw = rng.lognormal(model.params["meanlog"], model.params["sdlog"], n)
        return (raw - model.shift) / model.scale
    if law == "two_point":
        return rng.integers(0, 2, n).astype(np.float64) * 2.0 - 1.0
    # contaminated_gaussian: one normal stream, one uniform stream
    eps = model.params["eps"]
    wide = model.params["scale"]
    normals = rng.standard_normal(n)
    mask = rng.random(n) < eps
    raw = np.where(mask, wide * normals, normals)
    return raw / model.scale


# ---------------------------------------------------------------------------
# densities and supports of the standardized laws, used by the oracle.
# Hand-coded textbook formulas: quadrature calls these millions of times and
# frozen scipy.stats distributions are ~100x slower per scalar call.


def atoms(model: NoiseModel):
    """(value, probability) pairs for purely discrete laws, else None."""
    if model.law == "two_point":
        return ((-1.0, 0.5), (1.0, 0.5))
    return None


def standardized_support(model: NoiseModel) -> tuple[float, float]:
    """Interval carrying the standardized law (endpoints may be infinite)."""
    if model.law in ("gaussian", "student_t", "contaminated_gaussian"):
        return (-math.inf, math.inf)
    if model.law == "pareto":
        return ((1.0 - model.shift) / model.scale, math.inf)
    if model.law == "lognormal":
        return ((0.0 - model.shift) / model.scale, math.inf)
    if model.law == "two_point":
        return (-1.0, 1.0)
    raise ValueError(f"unknown noise law {model.law!r}")


def standardized_pdf(model: NoiseModel):
    """Scalar density e -> f(e) of the standardized law.

    Returns a plain Python callable; discrete laws have no density and raise
    ValueError (use ``atoms`` instead).
    """
    law = model.law
    s = model.scale
    m = model.shift
    if law == "gaussian":
        def pdf(e):
            return math.exp(-0.5 * e * e) / _SQRT_2PI
        return pdf
    if law == "student_t":
        df = model.params["df"]
        log_norm = (
            math.lgamma(0.5 * (df + 1.0))
            - math.lgamma(0.5 * df)
            - 0.5 * math.log(df * math.pi)
        )
        norm_const = math.exp(log_norm) * s
        expo = -0.5 * (df + 1.0)
        def pdf(e):
            x = s * e
            return norm_const * (1.0 + x * x / df) ** expo
        return pdf
    if law == "pareto":
        shape = model.params["shape"]
        def pdf(e):
            x = m + s * e
            if x < 1.0:
                return 0.0
            return s * shape * x ** (-shape - 1.0)
        return pdf
    if law == "lognormal":
        meanlog = model.params["meanlog"]
        sdlog = model.params["sdlog"]
        def pdf(e):
            x = m + s * e
            if x <= 0.0:
                return 0.0
            t = (math.log(x) - meanlog) / sdlog
            return s * math.exp(-0.5 * t * t) / (x * sdlog * _SQRT_2PI)
        return pdf
    if law == "contaminated_gaussian":
        eps = model.params["eps"]
        wide = model.params["scale"]
        def pdf(e):
            x = s * e
            narrow_part = (1.0 - eps) * math.exp(-0.5 * x * x) / _SQRT_2PI
            wide_part = eps * math.exp(-0.5 * (x / wide) ** 2) / (wide * _SQRT_2PI)
            return s * (narrow_part + wide_part)
        return pdf
    raise ValueError(f"law {law!r} has no density (discrete); use atoms()")
