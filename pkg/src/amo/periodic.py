"""Rational-frequency machinery for the almost Mathieu operator.

For frequency p/q the trace of the q-step transfer matrix obeys the Chambers
formula Tr A_q(theta) = -2 lambda^q cos(2 pi q theta) + a_0(E), so the union
spectrum Sigma is {|a_0| <= 2 + 2 lambda^q} and the intersection spectrum
sigma is {|a_0| <= 2 - 2 lambda^q}. Band edges are eigenvalues of q x q
periodic / antiperiodic discretizations at potential phases 0 and 1/(2q),
polished by bisection on a_0. Inside a band the integrated density of states
is driven by the theta-averaged rotation number, and its derivative by the
phi functional of the elliptic fixed-point field m(theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from . import jacobi
from .cocycle import CocycleParams, _grid_product, product, step_matrix
from .intervals import IntervalSet
from .sl2 import HPoint, NotElliptic, elliptic_data, transport_to

__all__ = [
    "Band",
    "BandSpectrum",
    "DegenerateQ",
    "NonReduced",
    "OutsideSpectrum",
    "chambers_a0",
    "band_spectrum",
    "cached_band_spectrum",
    "rho_of_theta",
    "rho_bar",
    "ids",
    "ids_batch",
    "ids_density",
    "fixed_point_field",
    "n_measure",
    "gauge_rotation_psi",
]

_TWO_PI = 2.0 * math.pi
_QUAD_CAP = 1 << 20
_LAMQ_FLUSH = 1e-300


class DegenerateQ(ValueError):
    """q beyond the supported cap (or lambda^q overflows)."""


class NonReduced(ValueError):
    """p/q is not in lowest terms."""


class OutsideSpectrum(ValueError):
    """Energy outside the interior of the union spectrum."""


# ---------------------------------------------------------------------------
# Chambers formula


def _lam_pow_q(lam: float, q: int) -> float:
    if lam == 0.0:
        return 0.0
    log = q * math.log(lam)
    if log > 709.0:
        raise DegenerateQ(f"lambda^q overflows a double (lambda={lam}, q={q})")
    val = math.exp(log)
    return 0.0 if val < _LAMQ_FLUSH else val


def _a0_batch(lam: float, p: int, q: int, E: np.ndarray, theta0: Optional[float] = None):
    """a_0 at an energy array, via the scaled transfer product at cos(2 pi q theta0)=0.

    Returns (a0, norm_log); entries that overflow a double come back as +-inf.
    """
    E = np.asarray(E, dtype=float)
    th = 1.0 / (4.0 * q) if theta0 is None else theta0
    thetas = np.full(E.shape, th)
    entries, ls = _grid_product(lam, p / q, E, thetas, q, Fraction(p, q))
    tr = entries[0] + entries[3]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        mag = ls + np.log(np.abs(tr))
        a0 = np.where(
            mag > 709.0,
            np.where(tr > 0, np.inf, -np.inf),
            np.sign(tr) * np.exp(np.minimum(mag, 709.0)),
        )
        a0 = np.where(tr == 0.0, 0.0, a0)
    norm_log = ls + 0.5 * np.log(np.sum(entries * entries, axis=0))
    return a0, norm_log


def chambers_a0(lam: float, p: int, q: int, E: float, check: bool = True) -> float:
    """a_0(lambda, p/q, E): the theta-free part of Tr A_q(theta).

    Evaluated at theta = 1/(4q); with check=True the value is cross-checked
    at theta = 3/(4q), the two must agree to 1e-9 relative.
    """
    _validate_pq(p, q)
    e_arr = np.array([float(E)])
    a0 = float(_a0_batch(lam, p, q, e_arr)[0][0])
    if check:
        a0_alt = float(_a0_batch(lam, p, q, e_arr, theta0=3.0 / (4.0 * q))[0][0])
        if not (abs(a0 - a0_alt) <= 1e-9 * max(1.0, abs(a0))):
            raise ArithmeticError(
                f"a_0 disagrees between theta anchors: {a0!r} vs {a0_alt!r}"
            )
    return a0


def _validate_pq(p: int, q: int):
    if q < 1 or int(q) != q or int(p) != p:
        raise NonReduced(f"need integers with q >= 1, got p={p}, q={q}")
    if math.gcd(int(p), int(q)) != 1:
        raise NonReduced(f"{p}/{q} is not reduced")


# ---------------------------------------------------------------------------
# theta-averaged rotation number as a function of a_0 (exact by Chambers)


def _refine(eval_fn: Callable[[np.ndarray, int], np.ndarray], size: int, tol: float, m0: int, cap: int):
    """Doubling refinement with per-element convergence freezing."""
    idx = np.arange(size)
    m = m0
    vals = eval_fn(idx, m)
    out = vals.copy()
    while 2 * m <= cap and idx.size:
        m *= 2
        new = eval_fn(idx, m)
        delta = np.abs(new - out[idx])
        out[idx] = new
        keep = delta > tol
        idx = idx[keep]
    return out


def _chunked(fn, idx: np.ndarray, m: int, budget: int = 1 << 24):
    """Evaluate fn(sub_idx, m) in chunks so temporaries stay bounded."""
    per = max(1, budget // max(m, 1))
    if idx.size <= per:
        return fn(idx, m)
    parts = [fn(idx[i : i + per], m) for i in range(0, idx.size, per)]
    return np.concatenate(parts)


def _g_rho(a0, lamq: float, tol: float = 1e-9, m0: int = 64, cap: int = _QUAD_CAP):
    """theta-average of the rotation number, as a function of a_0.

    rho(theta) = arccos(clamp(Tr/2)) / 2 pi with the clipping rho=0 above
    trace 2 and rho=1/2 below trace -2; the average over theta reduces by
    periodicity to one period of the Chambers cosine.
    """
    a0 = np.atleast_1d(np.asarray(a0, dtype=float))
    if lamq == 0.0:
        return np.arccos(np.clip(0.5 * a0, -1.0, 1.0)) / _TWO_PI

    u1 = (a0 - 2.0) / (2.0 * lamq)
    u2 = (a0 + 2.0) / (2.0 * lamq)
    out = 0.5 * np.arccos(np.clip(u2, -1.0, 1.0)) / math.pi  # Tr < -2 region
    c1 = np.clip(u1, -1.0, 1.0)
    c2 = np.clip(u2, -1.0, 1.0)
    t1 = np.arccos(c1) / _TWO_PI
    t2 = np.arccos(c2) / _TWO_PI
    full = (u1 <= -1.0) & (u2 >= 1.0)
    arc = ~full & (t1 - t2 > 0.0)

    if np.any(full):
        sub = a0[full]

        def eval_full(idx, m):
            def body(ii, mm):
                t = (np.arange(mm) + 0.5) / mm
                arg = (sub[ii, None] - 2.0 * lamq * np.cos(_TWO_PI * t)) / 2.0
                return np.mean(np.arccos(np.clip(arg, -1.0, 1.0)), axis=1)

            return _chunked(body, idx, m)

        out[full] = _refine(eval_full, sub.size, tol * _TWO_PI, m0, cap) / _TWO_PI

    if np.any(arc):
        sub = a0[arc]
        mid = 0.5 * (t1[arc] + t2[arc])
        half = 0.5 * (t1[arc] - t2[arc])

        def eval_arc(idx, m):
            def body(ii, mm):
                xi = -0.5 * math.pi + math.pi * (np.arange(mm) + 0.5) / mm
                t = mid[ii, None] + half[ii, None] * np.sin(xi)
                arg = (sub[ii, None] - 2.0 * lamq * np.cos(_TWO_PI * t)) / 2.0
                f = np.arccos(np.clip(arg, -1.0, 1.0)) * np.cos(xi)
                return (math.pi / mm) * half[ii] * np.sum(f, axis=1)

            return _chunked(body, idx, m)

        integral = _refine(eval_arc, sub.size, tol * math.pi, m0, cap)
        # both mirror arcs contribute equally (the trace depends on theta
        # only through cos)
        out[arc] += 2.0 * integral / _TWO_PI
    return out


# ---------------------------------------------------------------------------
# band spectrum


@dataclass(frozen=True)
class Band:
    """One band of the union spectrum with its nested sigma component."""

    k: int
    sigma_lo: float
    inner_lo: float
    inner_hi: float
    sigma_hi: float
    parity: int  # (-1)^(q+k-1); -1 means a_0 increases across the band


@dataclass(frozen=True)
class BandSpectrum:
    """All q bands of Sigma_{lambda, p/q} with sigma components and a_0 access."""

    lam: float
    p: int
    q: int
    lamq: float
    bands: Tuple[Band, ...]

    def a0(self, E) -> np.ndarray:
        return _a0_batch(self.lam, self.p, self.q, np.asarray(E, dtype=float))[0]

    @property
    def sigma_edges(self) -> np.ndarray:
        """Flattened [lo_1, hi_1, lo_2, hi_2, ...] band edges."""
        out = np.empty(2 * self.q)
        out[0::2] = [b.sigma_lo for b in self.bands]
        out[1::2] = [b.sigma_hi for b in self.bands]
        return out

    def sigma_intervals(self) -> IntervalSet:
        """The union spectrum Sigma as an interval set (touching bands merge)."""
        return IntervalSet.from_pairs([(b.sigma_lo, b.sigma_hi) for b in self.bands])

    def inner_intervals(self) -> IntervalSet:
        """The intersection spectrum sigma; empty for lambda > 1."""
        if self.lam > 1.0:
            return IntervalSet.empty()
        return IntervalSet.from_pairs([(b.inner_lo, b.inner_hi) for b in self.bands])

    @property
    def sigma_measure(self) -> float:
        return float(sum(b.sigma_hi - b.sigma_lo for b in self.bands))

    @property
    def inner_measure(self) -> float:
        if self.lam > 1.0:
            return 0.0
        return float(sum(b.inner_hi - b.inner_lo for b in self.bands))

    @property
    def gap_measure(self) -> float:
        """|Sigma without sigma|."""
        return self.sigma_measure - self.inner_measure

    def band_index(self, E) -> np.ndarray:
        """Vectorized band locator: k in 1..q inside band k (left band at a
        touching edge), -k in a gap above band k, 0 below, -q above."""
        E = np.asarray(E, dtype=float)
        idx = np.searchsorted(self.sigma_edges, E, side="left")
        k = np.where(idx % 2 == 1, (idx + 1) // 2, -(idx // 2))
        return k


def _bc_matrices(lam: float, p: int, q: int) -> np.ndarray:
    """Stack of the 4 boundary matrices: (theta, bc) in {0, 1/2q} x {+1, -1}."""
    mats = np.zeros((4, q, q))
    i = 0
    for theta in (0.0, 1.0 / (2.0 * q)):
        v = 2.0 * lam * np.cos(_TWO_PI * (theta + np.arange(q) * (p % q) / q))
        for bc in (1.0, -1.0):
            m = np.zeros((q, q))
            np.fill_diagonal(m, v)
            if q == 1:
                m[0, 0] += 2.0 * bc
            elif q == 2:
                m[0, 1] = m[1, 0] = 1.0 + bc
            else:
                ii = np.arange(q - 1)
                m[ii, ii + 1] = 1.0
                m[ii + 1, ii] = 1.0
                m[0, q - 1] = bc
                m[q - 1, 0] = bc
            mats[i] = m
            i += 1
    return mats


def _polish_roots(lam, p, q, cand: np.ndarray, targets: np.ndarray, norm_scale_tol=1e-10):
    """Bisection polish of a_0(E) = target around eigenvalue candidates.

    Tangent roots (touching bands) yield no sign change; the eigenvalue is
    kept there, where the residual is quadratically small anyway.
    """

    def f(E):
        return _a0_batch(lam, p, q, E)[0] - targets

    scale = np.maximum(1.0, np.abs(cand))
    delta = 1e-9 * scale
    lo = cand - delta
    hi = cand + delta
    flo = f(lo)
    fhi = f(hi)
    bracket = flo * fhi <= 0.0
    for _ in range(10):
        need = ~bracket & (delta < 1e-4 * scale)
        if not np.any(need):
            break
        delta = np.where(need, delta * 4.0, delta)
        lo = np.where(need, cand - delta, lo)
        hi = np.where(need, cand + delta, hi)
        flo = np.where(need, f(lo), flo)
        fhi = np.where(need, f(hi), fhi)
        bracket = flo * fhi <= 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        go_left = (fm * flo <= 0.0) & bracket
        hi = np.where(bracket & go_left, mid, hi)
        fhi = np.where(bracket & go_left, fm, fhi)
        lo = np.where(bracket & ~go_left, mid, lo)
        flo = np.where(bracket & ~go_left, fm, flo)
    roots = np.where(bracket, 0.5 * (lo + hi), cand)
    a0_val, norm_log = _a0_batch(lam, p, q, roots)
    resid = np.abs(a0_val - targets)
    # conditioning of the degree-q evaluation: the larger of the measured
    # product norm and the |E|^q polynomial scale
    log_cond = np.maximum(norm_log, q * np.log(np.maximum(1.0, np.abs(roots))))
    res_scale = np.exp(np.minimum(np.maximum(log_cond, 0.0), 700.0))
    bad = bracket & (resid > norm_scale_tol * res_scale)
    if np.any(bad):
        raise ArithmeticError("band edge polish failed to reach target residual")
    return roots


def band_spectrum(lam: float, p: int, q: int, q_max: int = 2000) -> BandSpectrum:
    """Compute the q bands of Sigma and the nested sigma components.

    Sigma edges solve a_0 = +-(2 + 2 lambda^q); sigma edges solve
    a_0 = +-(2 - 2 lambda^q). For lambda > 1 sigma is empty and the inner
    edges are NaN. lambda^q below double range flushes to 0, making Sigma
    and sigma numerically coincide.
    """
    _validate_pq(p, q)
    if lam < 0.0:
        raise ValueError("coupling must be >= 0 (use the E -> -E symmetry)")
    if q > q_max:
        raise DegenerateQ(f"q={q} exceeds cap {q_max}")
    lamq = _lam_pow_q(lam, q)
    big = 2.0 + 2.0 * lamq
    small = 2.0 - 2.0 * lamq

    cand = jacobi.sym_eigvals_stack(_bc_matrices(lam, p, q))
    # source order: (theta=0, per) -> +big; (0, anti) -> -small;
    #               (1/2q, per) -> +small; (1/2q, anti) -> -big
    sigma_cand = np.concatenate([cand[0], cand[3]])
    sigma_targets = np.concatenate([np.full(q, big), np.full(q, -big)])

    with_sigma_inner = lam <= 1.0 and lamq > 0.0
    if with_sigma_inner:
        inner_cand = np.concatenate([cand[2], cand[1]])
        inner_targets = np.concatenate([np.full(q, small), np.full(q, -small)])
        all_cand = np.concatenate([sigma_cand, inner_cand])
        all_targets = np.concatenate([sigma_targets, inner_targets])
    else:
        all_cand = sigma_cand
        all_targets = sigma_targets

    roots = _polish_roots(lam, p, q, all_cand, all_targets)
    sigma_roots = np.sort(roots[: 2 * q])
    if with_sigma_inner:
        inner_roots = np.sort(roots[2 * q :])
    elif lamq == 0.0:
        inner_roots = sigma_roots  # flushed: sigma and Sigma coincide
    else:
        inner_roots = np.full(2 * q, math.nan)

    bands = []
    for k in range(1, q + 1):
        s_lo, s_hi = sigma_roots[2 * k - 2], sigma_roots[2 * k - 1]
        i_lo, i_hi = inner_roots[2 * k - 2], inner_roots[2 * k - 1]
        if with_sigma_inner or lamq == 0.0:
            if not (s_lo <= i_lo + 1e-7 and i_hi <= s_hi + 1e-7):
                raise ArithmeticError(
                    f"sigma component {k} not nested in its band: "
                    f"[{s_lo}, {s_hi}] vs [{i_lo}, {i_hi}]"
                )
            # ties at vanishing lambda^q: enforce the nesting invariant exactly
            i_lo = min(max(i_lo, s_lo), s_hi)
            i_hi = min(max(i_hi, s_lo), s_hi)
        parity = -1 if (q + k) % 2 == 0 else 1
        bands.append(
            Band(k=k, sigma_lo=float(s_lo), inner_lo=float(i_lo), inner_hi=float(i_hi), sigma_hi=float(s_hi), parity=parity)
        )
    return BandSpectrum(lam=lam, p=int(p % q) if q > 1 else 0, q=int(q), lamq=lamq, bands=tuple(bands))


@lru_cache(maxsize=256)
def cached_band_spectrum(lam: float, p: int, q: int) -> BandSpectrum:
    return band_spectrum(lam, p, q)


# ---------------------------------------------------------------------------
# rotation number and IDS


def rho_of_theta(lam: float, p: int, q: int, E: float, theta: float) -> float:
    """Rotation number of A_q(theta): arccos(clamp(Tr/2))/2pi with the
    clipping 0 above trace 2 and 1/2 below trace -2."""
    _validate_pq(p, q)
    tr = product(CocycleParams(lam, (p, q), E), theta, q).trace
    return math.acos(max(-1.0, min(1.0, 0.5 * tr))) / _TWO_PI


def rho_bar(lam: float, p: int, q: int, E: float, m_samples: int = 64, tol: float = 1e-8) -> float:
    """theta-average of rho_of_theta over one period [0, 1/q).

    Computed through the Chambers factorization: the average depends on E
    only through a_0(E), and the window integral is refined by doubling
    until the change is below tol (square-root substitution at window
    edges keeps the integrand smooth).
    """
    if m_samples < 16:
        raise ValueError("m_samples must be >= 16")
    a0 = _a0_batch(lam, p, q, np.array([float(E)]))[0]
    lamq = _lam_pow_q(lam, q)
    return float(_g_rho(a0, lamq, tol=tol, m0=m_samples)[0])


def _ids_from_band(k: np.ndarray, rho: np.ndarray, q: int) -> np.ndarray:
    parity = np.where((q + k) % 2 == 0, -1.0, 1.0)
    return ((k - 1) + parity * 2.0 * rho + 0.5 * (1.0 - parity)) / q


def ids_batch(spec: BandSpectrum, E, tol: float = 1e-9) -> np.ndarray:
    """Vectorized integrated density of states for one band spectrum."""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    loc = spec.band_index(E)
    out = np.empty(E.shape)
    below = loc == 0
    above = loc == -spec.q
    gap = (loc < 0) & ~above
    out[below] = 0.0
    out[above] = 1.0
    out[gap] = -loc[gap] / spec.q
    inside = loc > 0
    if np.any(inside):
        a0 = spec.a0(E[inside])
        rho = _g_rho(a0, spec.lamq, tol=tol)
        out[inside] = _ids_from_band(loc[inside].astype(float), rho, spec.q)
    return out


def ids(lam: float, p: int, q: int, E: float, tol: float = 1e-9) -> float:
    """Integrated density of states N(E); k/q in gap k, 0 below, 1 above."""
    spec = cached_band_spectrum(lam, p, q)
    return float(ids_batch(spec, E, tol=tol)[0])


def n_measure(spec: BandSpectrum, s: IntervalSet, m_samples: int = 64, tol: float = 1e-9) -> float:
    """N-measure of an interval set: sum of N(hi) - N(lo) over components."""
    if not s:
        return 0.0
    n_hi = ids_batch(spec, s.hi, tol=tol)
    n_lo = ids_batch(spec, s.lo, tol=tol)
    return float(np.sum(n_hi - n_lo))


# ---------------------------------------------------------------------------
# fixed-point field and the IDS density


def _transfer_entries(lam, p, q, E, thetas):
    """True (unscaled) entries of A_q(theta) over a theta grid."""
    entries, ls = _grid_product(lam, p / q, np.full(thetas.shape, float(E)), thetas, q, Fraction(p, q))
    return entries * np.exp(ls)


def _phi_m_batch(lam, p, q, E, thetas) -> np.ndarray:
    """phi(m(theta)) over a theta grid; requires |Tr| < 2 at every node."""
    a, b, c, d = _transfer_entries(lam, p, q, E, thetas)
    tr = a + d
    disc_sq = 4.0 - tr * tr
    if np.any(disc_sq <= 0.0):
        raise NotElliptic("trace reached |Tr| >= 2 inside the window")
    disc = np.sqrt(disc_sq)
    x = (a - d) / (2.0 * c)
    y = np.abs(disc / (2.0 * c))
    return (1.0 + x * x + y * y) / (2.0 * y)


def fixed_point_field(lam: float, p: int, q: int, E: float, theta: float) -> HPoint:
    """Fixed point m(theta) of A_q(theta) in H; equivariant under
    A(theta) m(theta) = m(theta + p/q)."""
    _validate_pq(p, q)
    sp = product(CocycleParams(lam, (p, q), E), theta, q)
    return elliptic_data(sp.to_mat2r()).fixed_point


def _window_times(a0: float, lamq: float):
    """Per-period window {t in [0,1): |Tr| < 2} as (t2, t1) with the mirror
    arc (1-t1, 1-t2); full period when t2=0, t1=1/2."""
    u1 = (a0 - 2.0) / (2.0 * lamq)
    u2 = (a0 + 2.0) / (2.0 * lamq)
    c1 = max(-1.0, min(1.0, u1))
    c2 = max(-1.0, min(1.0, u2))
    t1 = math.acos(c1) / _TWO_PI
    t2 = math.acos(c2) / _TWO_PI
    return t2, t1


def ids_density(lam: float, p: int, q: int, E: float, m_samples: int = 64, tol: float = 1e-8) -> float:
    """dN/dE = (1/2pi) * integral of phi(m(theta)) over {|Tr A_q| < 2}.

    For E interior to sigma the window is the whole circle and a periodic
    midpoint rule is used; otherwise each window arc is integrated with a
    square-root substitution absorbing the integrable edge singularity.
    """
    spec = cached_band_spectrum(lam, p, q)
    loc = int(spec.band_index(np.array([float(E)]))[0])
    if loc <= 0:
        raise OutsideSpectrum(f"E={E} is not inside a band")
    band = spec.bands[loc - 1]
    if E <= band.sigma_lo or E >= band.sigma_hi:
        raise OutsideSpectrum(f"E={E} is on a band edge")
    lamq = spec.lamq
    interior_sigma = (
        lam <= 1.0
        and not math.isnan(band.inner_lo)
        and band.inner_lo < E < band.inner_hi
    )

    if interior_sigma or lamq == 0.0:

        def eval_circle(_idx, m):
            thetas = (np.arange(m) + 0.5) / m
            return np.array([np.mean(_phi_m_batch(lam, p, q, E, thetas))])

        val = _refine(eval_circle, 1, tol, max(m_samples, 32 * q), _QUAD_CAP)[0]
        return float(val) / _TWO_PI

    a0 = float(spec.a0(np.array([float(E)]))[0])
    t2, t1 = _window_times(a0, lamq)
    if not t1 - t2 > 0.0:
        raise OutsideSpectrum(f"E={E} has an empty trace window")
    j = np.arange(q)
    starts = np.concatenate([(j + t2) / q, (j + 1.0 - t1) / q])
    ends = np.concatenate([(j + t1) / q, (j + 1.0 - t2) / q])
    mid = 0.5 * (starts + ends)
    half = 0.5 * (ends - starts)

    def eval_arcs(_idx, m):
        xi = -0.5 * math.pi + math.pi * (np.arange(m) + 0.5) / m
        th = mid[:, None] + half[:, None] * np.sin(xi)
        f = _phi_m_batch(lam, p, q, E, th.ravel()).reshape(th.shape)
        contrib = half * (math.pi / m) * np.sum(f * np.cos(xi), axis=1)
        return np.array([np.sum(contrib)])

    val = _refine(eval_arcs, 1, tol, max(m_samples, 32), _QUAD_CAP // max(2 * q, 1))[0]
    return float(val) / _TWO_PI


def gauge_rotation_psi(lam: float, p: int, q: int, E: float, theta: float) -> float:
    """Rotation angle psi(theta) (turns, mod 1) in the gauge factorization
    A(theta) = B(theta + p/q) R_psi B(theta)^-1 with B = transport to m."""
    m0 = fixed_point_field(lam, p, q, E, theta)
    m1 = fixed_point_field(lam, p, q, E, theta + p / q)
    params = CocycleParams(lam, (p, q), E)
    rot = transport_to(m1).inverse() @ step_matrix(params, theta) @ transport_to(m0)
    psi = math.atan2(rot.c, rot.a) / _TWO_PI
    return psi % 1.0
