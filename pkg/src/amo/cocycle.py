"""Almost Mathieu transfer matrices, scaled products, Lyapunov estimators.

The one-step matrix at phase theta is [[E - 2*lambda*cos(2*pi*theta), -1],
[1, 0]]; n-step products are accumulated with a per-step Hilbert-Schmidt
rescaling so that couplings above 1 and lengths up to 1e6+ never overflow.
The extracted scalar is tracked as a natural log with compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

from .sl2 import Mat2R

__all__ = [
    "CocycleParams",
    "ScaledProduct",
    "step_matrix",
    "product",
    "lyapunov_avg",
    "lyapunov_sup",
]

FrequencyLike = Union[float, Fraction, Tuple[int, int]]


def _as_frequency(alpha: FrequencyLike) -> Tuple[float, Optional[Fraction]]:
    """Float value plus the exact fraction when the input is rational."""
    if isinstance(alpha, Fraction):
        return float(alpha), alpha
    if isinstance(alpha, tuple):
        p, q = alpha
        return p / q, Fraction(p, q)
    # ContinuedFraction exposes .fraction(); duck-typed to avoid an import cycle
    frac = getattr(alpha, "fraction", None)
    if frac is not None:
        f = frac()
        return float(f), f
    return float(alpha), None


@dataclass(frozen=True)
class CocycleParams:
    """Coupling, frequency and energy of one transfer cocycle.

    `alpha` may be a float, an exact Fraction, a (p, q) pair, or a
    continued-fraction object; rational input is reduced automatically.
    """

    lam: float
    alpha: FrequencyLike
    E: float

    @property
    def alpha_value(self) -> float:
        return _as_frequency(self.alpha)[0]

    @property
    def alpha_fraction(self) -> Optional[Fraction]:
        return _as_frequency(self.alpha)[1]


@dataclass(frozen=True)
class ScaledProduct:
    """Product matrix rescaled to moderate norm, plus the log of the scale.

    exp(log_scale) * mat reconstructs the true product; mat itself is not
    unimodular unless log_scale is 0.
    """

    mat: np.ndarray
    log_scale: float

    @property
    def hs_norm_log(self) -> float:
        """ln of the Hilbert-Schmidt norm of the true product."""
        return self.log_scale + 0.5 * math.log(float(np.sum(self.mat * self.mat)))

    @property
    def trace(self) -> float:
        """Trace of the true product; +-inf if it overflows a double."""
        t = float(self.mat[0, 0] + self.mat[1, 1])
        if t == 0.0:
            return 0.0
        m = self.log_scale + math.log(abs(t))
        if m > 709.0:
            return math.inf if t > 0 else -math.inf
        return math.copysign(math.exp(m), t)

    @property
    def det_deviation(self) -> float:
        """|det - 1| of the reconstructed product, computed in log space.

        Returns nan when the scaled matrix is numerically rank-one (long
        hyperbolic products push det(mat) below double range, so the second
        singular value is unmeasurable in this representation).
        """
        det = float(self.mat[0, 0] * self.mat[1, 1] - self.mat[0, 1] * self.mat[1, 0])
        if det <= 1e-300:
            return math.nan
        return abs(math.expm1(math.log(det) + 2.0 * self.log_scale))

    def to_mat2r(self) -> Mat2R:
        """Renormalized unimodular matrix (drops the scale)."""
        m = self.mat
        return Mat2R.normalized(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))


def step_matrix(params: CocycleParams, theta: float) -> Mat2R:
    """One-step transfer matrix at phase theta; det = 1 exactly."""
    t = params.E - 2.0 * params.lam * math.cos(2.0 * math.pi * theta)
    return Mat2R(t, -1.0, 1.0, 0.0)


def _phases(params: CocycleParams, theta: float, n: int):
    """Phases theta + k*alpha, k = 0..n-1, with exact rational part.

    For rational alpha = p/q the k*alpha part is reduced mod 1 in integer
    arithmetic, so long products do not accumulate phase rounding; the
    irrational (float) remainder enters as an exact small drift.
    """
    frac = _as_frequency(params.alpha)[1]
    if frac is not None:
        p, q = frac.numerator, frac.denominator
        for k in range(n):
            yield theta + ((k * p) % q) / q
    else:
        alpha = float(params.alpha)
        for k in range(n):
            yield math.fmod(theta + k * alpha, 1.0)


def product(params: CocycleParams, theta: float, n: int) -> ScaledProduct:
    """Ordered n-step product with leftmost factor at theta + (n-1)*alpha."""
    if n < 0:
        raise ValueError("n must be >= 0")
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    log_scale = 0.0
    comp = 0.0  # Kahan compensation for log_scale
    lam2 = 2.0 * params.lam
    E = params.E
    two_pi = 2.0 * math.pi
    for ph in _phases(params, theta, n):
        t = E - lam2 * math.cos(two_pi * ph)
        # left-multiply by [[t, -1], [1, 0]]
        a, b, c, d = t * a - c, t * b - d, a, b
        s = math.sqrt(a * a + b * b + c * c + d * d)
        a, b, c, d = a / s, b / s, c / s, d / s
        y = math.log(s) - comp
        tmp = log_scale + y
        comp = (tmp - log_scale) - y
        log_scale = tmp
    return ScaledProduct(np.array([[a, b], [c, d]]), log_scale)


def _grid_product(lam, alpha_value, E, thetas, n: int, alpha_fraction=None):
    """Vectorized n-step products over a theta grid (E may broadcast).

    Returns (entries, log_scales) where entries is (4, m) rows a, b, c, d of
    the rescaled products. Reductions are plain accumulation in grid order,
    so results are bit-reproducible for fixed inputs.
    """
    thetas = np.asarray(thetas, dtype=float)
    E = np.broadcast_to(np.asarray(E, dtype=float), thetas.shape)
    m = thetas.shape
    a = np.ones(m)
    b = np.zeros(m)
    c = np.zeros(m)
    d = np.ones(m)
    log_scale = np.zeros(m)
    comp = np.zeros(m)
    two_pi = 2.0 * math.pi
    lam2 = 2.0 * lam
    for k in range(n):
        if alpha_fraction is not None:
            p, q = alpha_fraction.numerator, alpha_fraction.denominator
            shift = ((k * p) % q) / q
        else:
            shift = math.fmod(k * alpha_value, 1.0)
        t = E - lam2 * np.cos(two_pi * (thetas + shift))
        a, b, c, d = t * a - c, t * b - d, a, b
        s = np.sqrt(a * a + b * b + c * c + d * d)
        a /= s
        b /= s
        c /= s
        d /= s
        y = np.log(s) - comp
        tmp = log_scale + y
        comp = (tmp - log_scale) - y
        log_scale = tmp
    return np.stack([a, b, c, d]), log_scale


def _norm_logs(params: CocycleParams, n: int, m_samples: int):
    val, frac = _as_frequency(params.alpha)
    thetas = np.arange(m_samples) / m_samples
    entries, log_scale = _grid_product(params.lam, val, params.E, thetas, n, frac)
    return log_scale + 0.5 * np.log(np.sum(entries * entries, axis=0))


def lyapunov_avg(params: CocycleParams, n: int, m_samples: int) -> float:
    """(1/n) * mean over an equispaced theta grid of ln ||A_n(theta)||."""
    if n < 1 or m_samples < 1:
        raise ValueError("n and m_samples must be >= 1")
    return float(np.sum(_norm_logs(params, n, m_samples))) / (n * m_samples)


def lyapunov_sup(params: CocycleParams, n: int, m_samples: int) -> float:
    """(1/n) * max over an equispaced theta grid of ln ||A_n(theta)||."""
    if n < 1 or m_samples < 1:
        raise ValueError("n and m_samples must be >= 1")
    return float(np.max(_norm_logs(params, n, m_samples))) / n
