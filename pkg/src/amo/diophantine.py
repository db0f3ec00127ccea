"""Continued fractions, Liouville-type frequencies, and the sets P_q and X.

P_q collects rotation numbers rho in [1/q, 1/2 - 1/q] admitting positive
integers a odd and b in the window (e^{cq/4}, e^{cq/2}) with |4 b rho - a|
< 10/b; X pulls P_q back through the monotone map E -> rho_bar(E) inside
each sigma component. Windows are capped so that membership is always
decided above the floating-point noise floor, never silently approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

from .intervals import IntervalSet
from .periodic import BandSpectrum, _a0_batch, _g_rho

__all__ = [
    "ContinuedFraction",
    "PqWindow",
    "PrecisionExhausted",
    "BigOverflow",
    "WindowTooLarge",
    "cf_expand",
    "beta_estimate",
    "build_liouville",
    "pq_member",
    "pq_intervals",
    "pq_measure",
    "build_X",
]

_B_CAP = 10**6  # largest window edge decidable in double precision
_INTERVAL_CAP = 5 * 10**6
_SLACK = 10.0


class PrecisionExhausted(ValueError):
    """Continued fraction of a float pushed past its trustworthy depth."""


class BigOverflow(OverflowError):
    """Construction would push a convergent denominator past 64 bits."""


class WindowTooLarge(ValueError):
    """P_q window not decidable/enumerable exactly at this scale."""


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients [0; a_1, a_2, ...] with convergents p_n/q_n."""

    quotients: Tuple[int, ...]
    convergents: Tuple[Tuple[int, int], ...]
    exact: Optional[Fraction] = None

    def fraction(self) -> Fraction:
        """Exact value of the (finite) expansion."""
        if self.exact is not None:
            return self.exact
        p, q = self.convergents[-1]
        return Fraction(p, q)

    def value(self) -> float:
        return float(self.fraction())

    def __len__(self) -> int:
        return len(self.quotients)


def _convergents(quotients) -> Tuple[Tuple[int, int], ...]:
    p_prev, q_prev = 1, 0
    p_cur, q_cur = 0, 1
    out = []
    for a in quotients:
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        out.append((p_cur, q_cur))
    return tuple(out)


def cf_expand(x: Union[float, Fraction], n_terms: int) -> ContinuedFraction:
    """Continued fraction of x in (0, 1) via the Euclidean algorithm.

    Floats are expanded through their exact binary rational; the expansion
    stops with PrecisionExhausted once q_n^2 exceeds 1/ulp(x), where further
    quotients would reflect rounding rather than x. Fraction input expands
    exactly and simply terminates early.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    exact_input = isinstance(x, Fraction)
    frac = x if exact_input else Fraction(float(x))
    if not (0 < frac < 1):
        raise ValueError(f"x must be in (0, 1), got {x!r}")
    horizon = None if exact_input else 1.0 / math.ulp(float(x))
    big, small = frac.denominator, frac.numerator  # Euclid on (den, num)
    quotients = []
    q_prev, q_cur = 0, 1  # q_{-1}, q_0
    while len(quotients) < n_terms and small != 0:
        a, rem = divmod(big, small)
        q_next = a * q_cur + q_prev
        if horizon is not None and float(q_next) ** 2 > horizon:
            raise PrecisionExhausted(
                f"denominator {q_next} exceeds the float trust horizon of {x!r}"
            )
        quotients.append(int(a))
        q_prev, q_cur = q_cur, q_next
        big, small = small, rem
    return ContinuedFraction(
        quotients=tuple(quotients),
        convergents=_convergents(quotients),
        exact=frac if small == 0 else None,
    )


def beta_estimate(cf: ContinuedFraction) -> float:
    """Finite-sample estimate of limsup ln(q_{n+1}) / q_n over the tail half.

    An estimate, not a limit: the max is taken over the second half of the
    available convergent pairs.
    """
    if len(cf.convergents) < 3:
        raise ValueError("need at least 3 convergents for a beta estimate")
    qs = [q for _, q in cf.convergents]
    pairs = [(qs[i], qs[i + 1]) for i in range(len(qs) - 1)]
    tail = pairs[len(pairs) // 2 :]
    return max(math.log(qn1) / qn for qn, qn1 in tail)


def build_liouville(beta_target: float, n_terms: int) -> ContinuedFraction:
    """Frequency with prescribed Liouville exponent: a_{n+1} = ceil(e^{beta q_n}/q_n).

    Raises BigOverflow before a denominator would leave 64-bit range.
    """
    if not (0.0 < beta_target <= 50.0):
        raise ValueError("beta_target must be in (0, 50]")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    limit = 2**63 - 1
    quotients = [1]
    q_prev, q_cur = 1, 1  # q_0 = 1, q_1 = a_1 = 1
    while len(quotients) < n_terms:
        if beta_target * q_cur > math.log(limit):
            raise BigOverflow(
                f"next denominator would exceed 64 bits at q_n={q_cur}"
            )
        a = max(1, math.ceil(math.exp(beta_target * q_cur) / q_cur))
        q_next = a * q_cur + q_prev
        if q_next > limit:
            raise BigOverflow(f"denominator {q_next} exceeds 64 bits")
        quotients.append(int(a))
        q_prev, q_cur = q_cur, q_next
    return ContinuedFraction(quotients=tuple(quotients), convergents=_convergents(quotients))


# ---------------------------------------------------------------------------
# the set P_q


@dataclass(frozen=True)
class PqWindow:
    """Denominator window (e^{cq/4}, e^{cq/2}) for the P_q membership test."""

    q: int
    c: float
    slack: float = _SLACK
    b_lo: int = field(init=False)
    b_hi: int = field(init=False)

    def __post_init__(self):
        if self.q < 1 or self.c <= 0.0:
            raise ValueError("need q >= 1 and c > 0")
        arg = self.c * self.q / 2.0
        if arg > math.log(10.0 * _B_CAP):
            raise WindowTooLarge(
                f"e^(cq/2) ~ e^{arg:.1f} exceeds the double-precision cap {_B_CAP}"
            )
        object.__setattr__(self, "b_lo", int(math.floor(math.exp(self.c * self.q / 4.0))) + 1)
        object.__setattr__(self, "b_hi", int(math.ceil(math.exp(arg))) - 1)

    @property
    def domain(self) -> Tuple[float, float]:
        """[1/q, 1/2 - 1/q]; empty when q <= 4."""
        return 1.0 / self.q, 0.5 - 1.0 / self.q

    @property
    def empty(self) -> bool:
        lo, hi = self.domain
        return self.b_lo > self.b_hi or lo > hi


def _nearest_odd(x: np.ndarray) -> np.ndarray:
    return 2.0 * np.floor(0.5 * (x - 1.0) + 0.5) + 1.0


def pq_member(rho: float, w: PqWindow):
    """Membership of rho in P_q, with an (a, b) witness when true.

    Convergent denominators of 4*rho (and their small multiples) are
    scanned first; a miss falls back to the exhaustive vectorized b-scan,
    which is what makes a False answer exact. Windows too large for the
    scan raise WindowTooLarge rather than guessing.
    """
    lo, hi = w.domain
    if not (lo <= rho <= hi) or w.empty:
        return False, 0, 0
    if w.b_hi > _B_CAP:
        raise WindowTooLarge(f"b_hi={w.b_hi} above the precision cap {_B_CAP}")

    def check(b: int):
        a = _nearest_odd(np.array([4.0 * b * rho]))[0]
        if a >= 1.0 and abs(4.0 * b * rho - a) < w.slack / b:
            return int(a)
        return None

    # good b come from convergent denominators of the fractional part of
    # 4*rho (adding an integer shifts a, not b)
    x = 4.0 * rho - math.floor(4.0 * rho)
    if 0.0 < x < 1.0:
        try:
            cf = cf_expand(x, 40)
        except PrecisionExhausted:
            cf = None
        if cf is not None:
            for _, d in cf.convergents:
                for mult in range(1, 65):
                    b = d * mult
                    if b > w.b_hi:
                        break
                    if b >= w.b_lo:
                        a = check(b)
                        if a is not None:
                            return True, a, b
    # exhaustive scan (exact); vectorized in chunks
    for start in range(w.b_lo, w.b_hi + 1, _B_CAP):
        b = np.arange(start, min(start + _B_CAP, w.b_hi + 1), dtype=float)
        a = _nearest_odd(4.0 * b * rho)
        ok = (a >= 1.0) & (np.abs(4.0 * b * rho - a) < w.slack / b)
        hit = np.flatnonzero(ok)
        if hit.size:
            i = int(hit[0])
            return True, int(a[i]), int(b[i])
    return False, 0, 0


def pq_intervals(w: PqWindow) -> IntervalSet:
    """Exact P_q as a union of intervals |rho - a/(4b)| < slack/(4 b^2),
    clipped to [1/q, 1/2 - 1/q]. Raises WindowTooLarge past the enumeration cap."""
    if w.empty:
        return IntervalSet.empty()
    if w.b_hi > _B_CAP:
        raise WindowTooLarge(f"b_hi={w.b_hi} above the precision cap {_B_CAP}")
    lo, hi = w.domain
    bs = np.arange(w.b_lo, w.b_hi + 1, dtype=float)
    # odd numerators with center a/(4b) near the domain; widened by one odd
    # step each side so intervals merely overlapping the edges are kept
    a_min = _nearest_odd(4.0 * bs * lo) - 2.0
    a_max = _nearest_odd(4.0 * bs * hi) + 2.0
    counts = np.maximum((a_max - a_min) / 2.0 + 1.0, 0.0).astype(int)
    total = int(counts.sum())
    if total > _INTERVAL_CAP:
        raise WindowTooLarge(f"{total} intervals exceed the enumeration cap {_INTERVAL_CAP}")
    if total == 0:
        return IntervalSet.empty()
    rows = np.repeat(np.arange(bs.size), counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    a = a_min[rows] + 2.0 * offs
    b = bs[rows]
    centers = a / (4.0 * b)
    radius = w.slack / (4.0 * b * b)
    keep = a >= 1.0
    return IntervalSet(centers[keep] - radius[keep], centers[keep] + radius[keep]).clip(lo, hi)


def pq_measure(w: PqWindow, n_samples: int = 0, method: str = "auto") -> float:
    """Lebesgue measure of P_q: exact interval-union measure when the
    enumeration is feasible, else a midpoint-sampling estimate of [0, 1/2]."""
    if method not in ("auto", "exact", "sample"):
        raise ValueError(f"unknown method {method!r}")
    if w.empty:
        return 0.0
    if method in ("auto", "exact"):
        try:
            return pq_intervals(w).measure
        except WindowTooLarge:
            if method == "exact":
                raise
    if n_samples < 1:
        raise ValueError("sampling estimate needs n_samples >= 1")
    xs = 0.5 * (np.arange(n_samples) + 0.5) / n_samples
    hits = sum(1 for x in xs if pq_member(float(x), w)[0])
    return 0.5 * hits / n_samples


# ---------------------------------------------------------------------------
# the energy set X


def build_X(
    spec: BandSpectrum,
    c: float,
    rho_tol: float = 1e-9,
    validate: bool = True,
) -> IntervalSet:
    """Pull P_q back through E -> rho_bar(E) on every sigma component.

    The average rotation number depends on E only through a_0 (Chambers),
    and is strictly decreasing in a_0; each P_q interval endpoint is mapped
    to an a_0 target by bisection, then to an energy inside each band by a
    second bisection on the strictly monotone a_0(E).
    """
    q = spec.q
    w = PqWindow(q=q, c=c)
    if 4.0 * w.b_hi * rho_tol > 0.1 * w.slack / max(w.b_hi, 1):
        raise WindowTooLarge(
            f"rho_bar noise {4.0 * w.b_hi * rho_tol:.2e} would drown the "
            f"membership threshold at b_hi={w.b_hi}"
        )
    pq = pq_intervals(w)
    if not pq:
        return IntervalSet.empty()
    lamq = spec.lamq
    small = 2.0 - 2.0 * lamq
    # rho_bar range over a sigma component (same for every band)
    rho_min = float(_g_rho(np.array([small]), lamq, tol=rho_tol)[0])
    rho_max = float(_g_rho(np.array([-small]), lamq, tol=rho_tol)[0])
    pq = pq.clip(rho_min, rho_max)
    if not pq:
        return IntervalSet.empty()

    targets_rho = np.concatenate([pq.lo, pq.hi])
    targets_a0 = _invert_g(targets_rho, lamq, small, rho_tol)

    pieces_lo = []
    pieces_hi = []
    n = len(pq)
    for band in spec.bands:
        e_of_a0 = _invert_a0_in_band(spec, band, targets_a0)
        lo_e = e_of_a0[:n]
        hi_e = e_of_a0[n:]
        if band.parity == 1:
            # a_0 decreases across the band, so rho_bar increases with E
            pieces_lo.append(lo_e)
            pieces_hi.append(hi_e)
        else:
            pieces_lo.append(hi_e)
            pieces_hi.append(lo_e)
    out = IntervalSet(np.concatenate(pieces_lo), np.concatenate(pieces_hi))
    out = out.intersect(spec.inner_intervals())
    if validate and out:
        mids = 0.5 * (out.lo + out.hi)
        sel = mids[:: max(1, mids.size // 64)]
        a0_mid = _a0_batch(spec.lam, spec.p, spec.q, sel)[0]
        rho_mid = _g_rho(a0_mid, lamq, tol=rho_tol)
        dlo, dhi = w.domain
        margin = 100.0 * rho_tol
        for r in rho_mid:
            r = float(r)
            # clipped slivers can put a midpoint within quadrature noise of
            # a domain or sigma-range boundary; skip those
            if min(r - dlo, dhi - r, r - rho_min, rho_max - r) < margin:
                continue
            ok, _, _ = pq_member(r, w)
            if not ok:
                raise ArithmeticError(
                    f"pullback midpoint rho={r} failed the P_q membership check"
                )
    return out


def _invert_g(rho_targets: np.ndarray, lamq: float, small: float, tol: float) -> np.ndarray:
    """Solve rho_bar(a_0) = target on [-small, small] (g is strictly decreasing)."""
    lo = np.full(rho_targets.shape, -small)
    hi = np.full(rho_targets.shape, small)
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        val = _g_rho(mid, lamq, tol=0.25 * tol)
        too_high = val > rho_targets  # g decreasing: need larger a_0
        lo = np.where(too_high, mid, lo)
        hi = np.where(too_high, hi, mid)
    return 0.5 * (lo + hi)


def _invert_a0_in_band(spec: BandSpectrum, band, a0_targets: np.ndarray) -> np.ndarray:
    """Solve a_0(E) = target inside one band (a_0 strictly monotone there)."""
    sign = -band.parity  # +1 when a_0 increases with E
    lo = np.full(a0_targets.shape, band.sigma_lo)
    hi = np.full(a0_targets.shape, band.sigma_hi)
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        val = _a0_batch(spec.lam, spec.p, spec.q, mid)[0]
        go_right = (val - a0_targets) * sign < 0.0
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)
