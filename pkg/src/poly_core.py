"""
Polynomial Core

This module holds the two polynomial representations used everywhere else:

1. RootForm  - n roots plus a leading coefficient (exact factored form)
2. CoeffForm - ascending coefficients about an expansion point (default 0)

and the operations on them: expansion, magnitude-safe evaluation, shifted
expansions, derivatives at a point, and derivative roots (critical points).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from src.errors import IllConditioned

logger = logging.getLogger(__name__)

# Residual bound |p'(zeta)| / (|leading| * max(1, |zeta|)^(n-1))
CRITICAL_TOL = 1e-9

# Coincident critical points: shifted coefficients a_1..a_m must vanish to
# this fraction of the absolute-value expansion
CLUSTER_RTOL = 1e-11

# Candidate clusters are linked below this fraction of the root-set diameter
CLUSTER_LINK = 2e-2

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

_EPS = np.finfo(float).eps
_LOG_MAX = math.log(np.finfo(float).max)


def _frozen_array(values):
    arr = np.array(values, dtype=complex).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RootForm:
    """Polynomial leading * prod(z - roots[i])."""

    roots: np.ndarray
    leading: complex = 1.0

    def __post_init__(self):
        roots = _frozen_array(self.roots)
        if roots.size < 1:
            raise ValueError("RootForm needs at least one root")
        if not np.all(np.isfinite(roots)):
            raise ValueError("RootForm roots must be finite")
        leading = complex(self.leading)
        if leading == 0:
            raise ValueError("RootForm leading coefficient must be nonzero")
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "leading", leading)

    @property
    def degree(self):
        return int(self.roots.size)

    def scaled(self, c):
        """c * p"""
        return RootForm(self.roots, self.leading * complex(c))

    def affine(self, a, b):
        """p(a z + b), whose roots are (z_i - b) / a."""
        a = complex(a)
        if a == 0:
            raise ValueError("affine map needs a nonzero scale")
        return RootForm((self.roots - complex(b)) / a, self.leading * a**self.degree)


@dataclass(frozen=True, eq=False)
class CoeffForm:
    """Polynomial sum(coeffs[k] * (z - center)^k), ascending degree."""

    coeffs: np.ndarray
    center: complex = 0.0

    def __post_init__(self):
        coeffs = _frozen_array(self.coeffs)
        if coeffs.size < 1:
            raise ValueError("CoeffForm needs at least one coefficient")
        if coeffs[-1] == 0:
            raise ValueError("highest-index coefficient must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "center", complex(self.center))

    @property
    def degree(self):
        return int(self.coeffs.size - 1)

    @property
    def leading(self):
        return complex(self.coeffs[-1])

    @property
    def is_finite(self):
        """False when the expansion overflowed."""
        return bool(np.all(np.isfinite(self.coeffs)))

    def derivative(self, k=1):
        """k-th derivative by exact term-by-term differentiation."""
        if not 0 <= k <= self.degree:
            raise ValueError(f"derivative order {k} outside [0, {self.degree}]")
        if k == 0:
            return self
        return CoeffForm(P.polyder(np.asarray(self.coeffs), k), self.center)


@dataclass(frozen=True, eq=False)
class CriticalSet:
    zetas: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "zetas", _frozen_array(self.zetas))
        residuals = np.array(self.residuals, dtype=float).ravel()
        residuals.setflags(write=False)
        object.__setattr__(self, "residuals", residuals)

    def __len__(self):
        return int(self.zetas.size)

    def __iter__(self):
        return iter(self.zetas.tolist())


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------


def _expand(roots):
    """Ascending coefficients of the monic prod(z - r)."""
    coeffs = np.ones(1, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for r in np.asarray(roots, dtype=complex):
            coeffs = np.convolve(coeffs, np.array([-r, 1.0], dtype=complex))
    return coeffs


def roots_to_coeffs(p):
    """Expand leading * prod(z - z_i) into the monomial basis."""
    with np.errstate(over="ignore", invalid="ignore"):
        coeffs = _expand(p.roots) * p.leading
    result = CoeffForm(coeffs)
    if not result.is_finite:
        logger.warning("[WARNING] Coefficient expansion overflowed for degree %d", p.degree)
    return result


def shifted_coeffs(p, shift):
    """Coefficients of q(z) = p(z + shift), expanded from the shifted factors."""
    with np.errstate(over="ignore", invalid="ignore"):
        coeffs = _expand(p.roots - complex(shift)) * p.leading
    return CoeffForm(coeffs)


def scaled_shift(p, shift):
    """
    Magnitude-safe variant of shifted_coeffs.

    Returns (b, s) with p(z + shift) = leading * s^n * sum(b_k (z/s)^k), where
    s = max |z_i - shift|, so the b_k stay bounded by binomial coefficients.
    """
    u = p.roots - complex(shift)
    s = float(np.max(np.abs(u)))
    if s == 0.0:
        b = np.zeros(p.degree + 1, dtype=complex)
        b[-1] = 1.0
        return b, 1.0
    return _expand(u / s), s


def abs_scaled_shift(p, shift, s):
    """Coefficients of prod(z + |z_i - shift| / s): rounding scale of scaled_shift."""
    u = np.abs(p.roots - complex(shift)) / s
    return np.abs(_expand(-u))


def recenter(p, center):
    """Re-expand a CoeffForm about a new center by repeated synthetic division."""
    center = complex(center)
    delta = center - p.center
    b = [complex(c) for c in p.coeffs]
    n = len(b) - 1
    if delta != 0:
        for i in range(n):
            for j in range(n - 1, i - 1, -1):
                b[j] += delta * b[j + 1]
    return CoeffForm(b, center)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _log_product(leading, diffs):
    """log-magnitude and phase of leading * prod(diffs)."""
    logmag = math.log(abs(leading)) + float(np.sum(np.log(np.abs(diffs))))
    phase = cmath.phase(leading) + float(np.sum(np.angle(diffs)))
    return logmag, phase


def _from_log(logmag, phase):
    if logmag == -math.inf:
        return 0j
    mag = math.exp(logmag) if logmag < _LOG_MAX else math.inf
    return complex(mag * math.cos(phase), mag * math.sin(phase))


def evaluate(p, z):
    """
    Value of p at z.

    CoeffForm uses Horner's rule in the local variable z - center (z may be an
    array). RootForm accumulates the product in log-magnitude plus phase, so
    high-degree products neither overflow nor underflow.
    """
    if isinstance(p, CoeffForm):
        local = np.asarray(z, dtype=complex) - p.center
        value = P.polyval(local, np.asarray(p.coeffs))
        return complex(value) if np.ndim(value) == 0 else value
    z = complex(z)
    diffs = z - p.roots
    if np.any(diffs == 0):
        return 0j
    return _from_log(*_log_product(p.leading, diffs))


def log_abs_value(p, z):
    """log |p(z)| for a RootForm (-inf at a root)."""
    diffs = complex(z) - p.roots
    if np.any(diffs == 0):
        return -math.inf
    return _log_product(p.leading, diffs)[0]


def _log_derivative(p, z):
    """(log |p'(z)|, phase) for a RootForm, from p' = p * sum 1/(z - z_i)."""
    diffs = complex(z) - p.roots
    at_root = diffs == 0
    hits = int(np.count_nonzero(at_root))
    if hits >= 2:
        return -math.inf, 0.0
    if hits == 1:
        # p'(z_i) = leading * prod_{j != i} (z_i - z_j)
        return _log_product(p.leading, diffs[~at_root])
    s1 = complex(np.sum(1.0 / diffs))
    if s1 == 0:
        return -math.inf, 0.0
    logmag, phase = _log_product(p.leading, diffs)
    return logmag + math.log(abs(s1)), phase + cmath.phase(s1)


def derivative_value(p, z):
    """p'(z) for a RootForm, computed in log-magnitude space."""
    return _from_log(*_log_derivative(p, z))


def critical_residual(p, z):
    """|p'(z)| / (|leading| * max(1, |z|)^(n-1))."""
    logmag, _ = _log_derivative(p, z)
    if logmag == -math.inf:
        return 0.0
    norm = math.log(abs(p.leading)) + (p.degree - 1) * math.log(max(1.0, abs(z)))
    return math.exp(min(logmag - norm, _LOG_MAX))


def derivative_at(p, shift, k):
    """p^(k)(shift) = k! * [z^k] p(z + shift)."""
    if not 0 <= k <= p.degree:
        raise ValueError(f"derivative order {k} outside [0, {p.degree}]")
    return complex(math.factorial(k) * shifted_coeffs(p, shift).coeffs[k])


# ---------------------------------------------------------------------------
# Critical points
# ---------------------------------------------------------------------------


def single_linkage(points, tol, relative=False):
    """
    Group points whose chained pairwise distance is within tol.

    With relative=True the pair threshold is tol * max(1, |a|, |b|). Groups come
    back as index arrays ordered by their first member.
    """
    points = np.asarray(points, dtype=complex)
    count = points.size
    parent = list(range(count))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if count > 1:
        dist = np.abs(points[:, None] - points[None, :])
        limit = np.full_like(dist, tol)
        if relative:
            mags = np.maximum(1.0, np.abs(points))
            limit = tol * np.maximum(mags[:, None], mags[None, :])
        rows, cols = np.nonzero(np.triu(dist <= limit, k=1))
        for i, j in zip(rows.tolist(), cols.tolist()):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    groups = {}
    for i in range(count):
        groups.setdefault(find(i), []).append(i)
    return [np.array(idx, dtype=int) for idx in groups.values()]


def _group_exact(roots):
    """Distinct root values (first-appearance order) with their multiplicities."""
    counts = {}
    for r in roots.tolist():
        counts[r] = counts.get(r, 0) + 1
    values = np.array(list(counts), dtype=complex)
    mult = np.array(list(counts.values()), dtype=float)
    return values, mult


def _diameter(points):
    if points.size < 2:
        return 0.0
    return float(np.max(np.abs(points[:, None] - points[None, :])))


def _initial_guesses(w, diam):
    """Midpoints of angularly adjacent roots, minus the widest gap, nudged apart."""
    g = w.mean()
    ws = w[np.argsort(np.angle(w - g), kind="stable")]
    nxt = np.roll(ws, -1)
    mids = 0.5 * (ws + nxt)
    keep = np.ones(ws.size, dtype=bool)
    keep[int(np.argmax(np.abs(nxt - ws)))] = False
    mids = mids[keep]
    k = np.arange(mids.size)
    return mids + 1e-3 * diam * np.exp(1j * (GOLDEN_ANGLE * k + 0.5))


def _secular_newton(w, mult, z):
    """Newton corrections h / h' at each z; 0 where the correction is undefined."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 1.0 / (z[:, None] - w[None, :])
        s1 = inv @ mult
        s2 = (inv * inv) @ mult
        t = inv @ (mult - 1.0)
        newton = 1.0 / ((s1 * s1 - s2) / s1 - t)
    newton[~np.isfinite(newton)] = 0.0
    return newton


def _aberth(w, mult, z0, scale, max_iter):
    """
    Simultaneous Aberth iteration for the zeros of h = p' / prod (z - w_i)^(m_i - 1).

    With s_k = sum m_i (z - w_i)^-k: p'/p = s_1, p''/p = s_1^2 - s_2, hence
    h'/h = (s_1^2 - s_2) / s_1 - sum (m_i - 1)/(z - w_i).
    """
    z = np.array(z0, dtype=complex)
    frozen = np.zeros(z.size, dtype=bool)
    prev = np.full(z.size, np.inf)
    for it in range(max_iter):
        diffs = z[:, None] - w[None, :]
        hit = np.any(diffs == 0, axis=1)
        if hit.any():
            z[hit] += 1e-9 * scale * np.exp(1j * GOLDEN_ANGLE * (it + 1))
            continue
        newton = _secular_newton(w, mult, z)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            pair = z[:, None] - z[None, :]
            np.fill_diagonal(pair, 1.0)
            inv_pair = 1.0 / pair
            np.fill_diagonal(inv_pair, 0.0)
            repulsion = inv_pair.sum(axis=1)

            delta = newton / (1.0 - newton * repulsion)
        bad = ~np.isfinite(delta)
        delta[bad] = newton[bad]
        delta[frozen] = 0.0
        z = z - delta

        step = np.abs(delta)
        floor = 4 * _EPS * np.maximum(scale, np.abs(z))
        stalled = (step <= 1e-12 * scale) & (step >= 0.5 * prev)
        frozen |= (step <= floor) | stalled
        prev = np.where(frozen, prev, step)
        if frozen.all():
            logger.debug("Aberth converged after %d sweeps", it + 1)
            break
    return z


def polish_critical_points(p, zetas, tol=CRITICAL_TOL, steps=8):
    """
    Plain Newton on the secular function for every zeta with residual above tol.

    Each point keeps the iterate with the smallest residual, so a point never
    comes back worse than it went in.
    """
    out = np.array(zetas, dtype=complex)
    values, mult = _group_exact(p.roots)
    res = np.array([critical_residual(p, z) for z in out.tolist()])
    todo = np.flatnonzero(res > tol)
    if todo.size == 0 or values.size < 2:
        return out
    z = out[todo]
    best = res[todo]
    for _ in range(steps):
        z = z - _secular_newton(values, mult, z)
        r = np.array([critical_residual(p, x) for x in z.tolist()])
        better = r < best
        out[todo[better]] = z[better]
        best = np.where(better, r, best)
    logger.debug("Polished %d of %d critical points below %.1e", int(np.count_nonzero(best <= tol)), todo.size, tol)
    return out


def _refine_cluster(p, center, m):
    """
    Snap a group of m nearly coincident critical points onto one m-fold point.

    An m-fold root of p' is a simple root of p^(m); Newton on p^(m) from the
    group mean finds it. Accepted only if a_1..a_m of p(z + c) vanish to
    CLUSTER_RTOL of their absolute-value expansion.
    """
    c = complex(center)
    for _ in range(8):
        b, s = scaled_shift(p, c)
        if b[m + 1] == 0:
            return None
        step = s * b[m] / ((m + 1) * b[m + 1])
        c -= step
        if abs(step) <= 4 * _EPS * max(1.0, abs(c)):
            break
    b, s = scaled_shift(p, c)
    bound = abs_scaled_shift(p, c, s)
    if np.all(np.abs(b[1 : m + 1]) <= CLUSTER_RTOL * bound[1 : m + 1]):
        return c
    return None


def _merge_clusters(p, zetas, diam):
    if zetas.size < 2:
        return zetas
    merged = []
    for idx in single_linkage(zetas, CLUSTER_LINK * diam):
        pts = zetas[idx]
        if idx.size > 1:
            center = _refine_cluster(p, pts.mean(), int(idx.size))
            if center is not None:
                logger.debug("Merged %d critical points at %s", idx.size, center)
                pts = np.full(idx.size, center, dtype=complex)
        merged.append(pts)
    return np.concatenate(merged)


def critical_points(p, tol=CRITICAL_TOL, max_iter=200, restarts=3, seed=0):
    """
    Derivative roots of a RootForm, with multiplicity.

    An m-fold root of p contributes m - 1 exact copies of itself; the remaining
    critical points solve the secular equation sum m_i / (zeta - w_i) = 0 over
    the distinct roots w_i, by Aberth iteration seeded between adjacent roots,
    with seeded random restarts when the residuals stay high.

    Raises IllConditioned if a residual stays above tol.
    """
    n = p.degree
    if n < 2:
        raise ValueError("critical_points needs degree >= 2")

    values, mult = _group_exact(p.roots)
    repeated = np.repeat(values, (mult - 1).astype(int))

    free = np.empty(0, dtype=complex)
    if values.size > 1:
        diam = _diameter(values)
        guesses = _initial_guesses(values, diam)
        rng = np.random.default_rng(seed)
        best, best_worst = None, math.inf
        for attempt in range(restarts + 1):
            z = polish_critical_points(p, _aberth(values, mult, guesses, diam, max_iter), tol)
            worst = max(critical_residual(p, zeta) for zeta in z.tolist())
            if worst < best_worst:
                best, best_worst = z, worst
            if worst <= tol:
                break
            logger.debug("Secular iteration stagnated (residual %.3e), restart %d", worst, attempt + 1)
            weights = rng.dirichlet(np.ones(values.size), size=values.size - 1)
            guesses = weights @ values
        free = _merge_clusters(p, best, diam)
        free = free[np.lexsort((free.imag, free.real))]

    zetas = np.concatenate([repeated, free])
    residuals = np.array([critical_residual(p, zeta) for zeta in zetas.tolist()])
    if np.any(residuals > tol):
        raise IllConditioned(
            f"critical-point residual {residuals.max():.3e} above {tol:.1e} (degree {n})",
            residuals=residuals,
        )
    return CriticalSet(zetas, residuals)
