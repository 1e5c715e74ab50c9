"""
Cascade Solver

Finds all roots of a CoeffForm by walking down the derivative chain
p^(n-1), p^(n-2), ..., p. The roots of p^(m+1) are the derivative roots of
p^(m); Newton on p^(m), started on the DR-circles around them, finds the roots
of p^(m). Each level's disk is handled in a Taylor expansion about its center.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.dr_geometry import rho_from_taylor
from src.errors import BadRoot, LevelIncomplete, ResidualBoundExceeded
from src.poly_core import GOLDEN_ANGLE, CoeffForm, recenter, single_linkage

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

# Extra circle radii, as multiples of rho, sampled on retries
RETRY_RADII = (1.0, 0.66, 1.33)

_WEIGHT_FLOOR = math.sqrt(np.finfo(float).tiny)


class CascadeConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    samples_per_circle_factor: int = Field(10, gt=0, description="Newton starts per circle = factor * level degree")
    newton_tol: float = Field(1e-12, gt=0)
    max_newton_steps: int = Field(100, gt=0)
    dedupe_tol: float = Field(1e-9, gt=0, description="Relative distance below which two roots are one")
    deflate_mode: bool = False
    residual_bound: float = Field(1e-8, gt=0)
    max_retries: int = Field(3, ge=0)

    @model_validator(mode="after")
    def _dedupe_above_newton(self):
        if self.dedupe_tol < self.newton_tol:
            raise ValueError("dedupe_tol must be >= newton_tol")
        return self


@dataclass(frozen=True, eq=False)
class CascadeResult:
    roots: np.ndarray
    residuals: np.ndarray
    cluster_flags: np.ndarray
    per_level_iterations: tuple
    per_level_starts: tuple


class SolveReport(BaseModel):
    """JSON form of a CascadeResult, written by `drroots solve --out`."""

    schema_version: str = SCHEMA_VERSION
    degree: int
    roots: list[tuple[float, float]]
    residuals: list[float]
    cluster_flags: list[bool]
    per_level_iterations: list[int]
    per_level_starts: list[int]
    config: CascadeConfig


@dataclass(frozen=True, eq=False)
class _Disk:
    center: complex
    rho: float
    local: CoeffForm


def solve_report(result, cfg):
    return SolveReport(
        degree=int(result.roots.size),
        roots=[(float(z.real), float(z.imag)) for z in result.roots],
        residuals=[float(r) for r in result.residuals],
        cluster_flags=[bool(f) for f in result.cluster_flags],
        per_level_iterations=list(result.per_level_iterations),
        per_level_starts=list(result.per_level_starts),
        config=cfg,
    )


def residuals(f, points):
    """|f(z)| / (|leading| * max(1, |z - center|)^degree), vectorised."""
    local = np.asarray(points, dtype=complex) - f.center
    value = np.abs(P.polyval(local, np.asarray(f.coeffs)))
    with np.errstate(over="ignore"):
        scale = abs(f.leading) * np.maximum(1.0, np.abs(local)) ** f.degree
    return value / scale


def deflate(p, root, bound=1e-8):
    """Synthetic division p(z) / (z - root); BadRoot if the remainder is above bound."""
    if p.degree < 1:
        raise ValueError("cannot deflate a constant")
    local = complex(root) - p.center
    a = p.coeffs
    n = p.degree
    b = np.empty(n, dtype=complex)
    b[n - 1] = a[n]
    for k in range(n - 1, 0, -1):
        b[k - 1] = a[k] + local * b[k]
    remainder = a[0] + local * b[0]
    scale = abs(p.leading) * max(1.0, abs(local)) ** n
    if abs(remainder) > bound * scale:
        raise BadRoot(f"deflation remainder {abs(remainder):.3e} at {complex(root)}", remainder=remainder)
    return CoeffForm(b, p.center)


# ---------------------------------------------------------------------------
# One level
# ---------------------------------------------------------------------------


def _distinct(points):
    seen = []
    for z in points.tolist():
        if z not in seen:
            seen.append(z)
    return seen


def _build_disks(f, prev):
    disks = []
    for c in _distinct(prev):
        local = recenter(f, c)
        disks.append(_Disk(c, rho_from_taylor(local.coeffs), local))
    return disks


def _scale(local, center):
    return np.maximum(1.0, np.abs(local + center))


def _newton_on_circle(g, radius, count, phase, cfg):
    """
    Vectorised Newton on a local CoeffForm from `count` points on |x| = radius.

    Returns the converged points (local coordinates) and the iterations spent.
    """
    if not math.isfinite(radius):
        return np.empty(0, dtype=complex), 0
    coeffs = np.asarray(g.coeffs)
    dcoeffs = P.polyder(coeffs)
    theta = phase + 2.0 * math.pi * np.arange(count) / count
    x = radius * np.exp(1j * theta)
    active = np.ones(count, dtype=bool)
    done = np.zeros(count, dtype=bool)
    update = np.full(count, np.inf)
    iterations = 0
    for _ in range(cfg.max_newton_steps):
        if not active.any():
            break
        xa = x[active]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = P.polyval(xa, coeffs) / P.polyval(xa, dcoeffs)
            nxt = xa - step
        iterations += int(xa.size)
        idx = np.flatnonzero(active)
        bad = ~np.isfinite(nxt)
        active[idx[bad]] = False
        good = idx[~bad]
        x[good] = nxt[~bad]
        update[good] = np.abs(step[~bad])
        hit = update[good] <= cfg.newton_tol * _scale(x[good], g.center)
        done[good[hit]] = True
        active[good[hit]] = False

    # stalled at the rounding floor but with a small residual
    stalled = active & (update <= cfg.dedupe_tol * _scale(x, g.center))
    if stalled.any():
        ok = residuals(g, x[stalled] + g.center) <= cfg.residual_bound
        done[np.flatnonzero(stalled)[ok]] = True
    return x[done], iterations


def _dedupe(f, points, cfg):
    """Merge points closer than dedupe_tol; each group is replaced by its residual-weighted mean."""
    if points.size == 0:
        return points
    # bucket near-identical Newton limits first so the linkage pass stays small
    q = cfg.dedupe_tol * max(1.0, float(np.max(np.abs(points))))
    keys = np.stack([np.round(points.real / q), np.round(points.imag / q)], axis=1)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    groups = single_linkage(points[first], 2.0 * cfg.dedupe_tol, relative=True)
    labels = np.empty(first.size, dtype=int)
    for g, members in enumerate(groups):
        labels[members] = g
    point_labels = labels[inverse]

    weights = 1.0 / (residuals(f, points) + _WEIGHT_FLOOR)
    reps = np.empty(len(groups), dtype=complex)
    for g in range(len(groups)):
        mask = point_labels == g
        reps[g] = np.sum(points[mask] * weights[mask]) / np.sum(weights[mask])
    return reps


def _polish_all(f, points, cfg):
    """Newton on f itself from every point; a point keeps its polished value only if the residual dropped."""
    if points.size == 0:
        return points
    coeffs = np.asarray(f.coeffs)
    dcoeffs = P.polyder(coeffs)
    x = points - f.center
    active = np.ones(x.size, dtype=bool)
    for _ in range(cfg.max_newton_steps):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = P.polyval(x[idx], coeffs) / P.polyval(x[idx], dcoeffs)
        ok = np.isfinite(step)
        x[idx[ok]] -= step[ok]
        stop = ~ok
        stop[ok] = np.abs(step[ok]) <= cfg.newton_tol * _scale(x[idx[ok]], f.center)
        active[idx[stop]] = False
    polished = x + f.center
    return np.where(residuals(f, polished) <= residuals(f, points), polished, points)


def _captured(f, points, c, multiplicity, cfg):
    """
    Points whose Newton correction on f points back at c.

    Near a root of multiplicity m the correction f/f' is about (x - c)/m, so a
    limit that stalled there satisfies |x - c| <= 4 m |f/f'|. A polished simple
    root nearby has a correction at the rounding floor and is left alone.
    """
    local = points - f.center
    coeffs = np.asarray(f.coeffs)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        correction = np.abs(P.polyval(local, coeffs) / P.polyval(local, P.polyder(coeffs)))
    correction = np.where(np.isfinite(correction), correction, 0.0)
    return np.abs(points - c) <= 4 * multiplicity * correction + cfg.dedupe_tol * max(1.0, abs(c))


def _assemble(f, candidates, prev, cfg, level):
    """
    Distinct roots of f and their cluster flags from raw Newton limits.

    Limits are polished on f and merged. A previous-level root c where f vanishes
    is a root of f of multiplicity 1 + (copies of c among the previous roots);
    the limits stalled around it are absorbed and c is returned that many times.
    More distinct roots than the degree raises LevelIncomplete.
    """
    pts = _dedupe(f, _polish_all(f, _dedupe(f, candidates, cfg), cfg), cfg)
    free = np.ones(pts.size, dtype=bool)
    multiple = []
    for c in _distinct(prev):
        if not free.any():
            break
        if residuals(f, [c])[0] > cfg.residual_bound:
            continue
        multiplicity = 1 + int(np.count_nonzero(np.abs(prev - c) <= cfg.dedupe_tol * max(1.0, abs(c))))
        hit = free & _captured(f, pts, c, multiplicity, cfg)
        if not hit.any():
            continue
        free &= ~hit
        multiple.extend([c] * multiplicity)
        logger.info("Level %d: root of multiplicity %d at %s", level, multiplicity, c)

    roots = np.concatenate([pts[free], np.array(multiple, dtype=complex)])
    flags = np.concatenate([np.zeros(int(np.count_nonzero(free)), dtype=bool), np.ones(len(multiple), dtype=bool)])
    if roots.size > f.degree:
        raise LevelIncomplete(
            f"level {level}: {roots.size} distinct roots for degree {f.degree}",
            level=level,
            found=int(roots.size),
            expected=f.degree,
        )
    return roots, flags


def _attribute_clusters(f, found, flags, prev, disks, cfg, level):
    """
    Fill a deficit with DR-disk centers: a center whose residual is within the
    bound is a root of multiplicity 1 + (number of previous-level roots nearby).
    """
    deficit = f.degree - found.size
    extra = []
    for disk in sorted(disks, key=lambda d: d.rho):
        if deficit == 0:
            break
        c = disk.center
        if residuals(f, [c])[0] > cfg.residual_bound:
            continue
        reach = max(disk.rho, cfg.dedupe_tol * max(1.0, abs(c)))
        multiplicity = 1 + int(np.count_nonzero(np.abs(prev - c) <= reach))
        present = int(np.count_nonzero(np.abs(found - c) <= reach)) + extra.count(c)
        add = min(multiplicity - present, deficit)
        if add > 0:
            extra.extend([c] * add)
            deficit -= add
            logger.info("Level %d: cluster of %d at %s", level, multiplicity, c)
    if deficit:
        raise LevelIncomplete(
            f"level {level}: found {f.degree - deficit} of {f.degree} roots",
            level=level,
            found=f.degree - deficit,
            expected=f.degree,
        )
    roots = np.concatenate([found, np.array(extra, dtype=complex)])
    return roots, np.concatenate([flags, np.ones(len(extra), dtype=bool)])


def _sweepable(disks):
    """Disks with a usable circle; rho = 0 marks a multiple root at the center."""
    return [disk for disk in disks if 0 < disk.rho < math.inf]


def _sweep(disks, d, attempt, cfg):
    """(disk, radius, count, phase) for every circle of one attempt."""
    count = cfg.samples_per_circle_factor * d * 2**attempt
    radii = RETRY_RADII if attempt else RETRY_RADII[:1]
    for j, disk in enumerate(disks):
        for r in radii:
            yield disk, disk.rho * r, count, GOLDEN_ANGLE * (j + 1)


def _solve_level(f, prev, cfg, level):
    d = f.degree
    disks = _build_disks(f, prev)
    sweepable = _sweepable(disks)
    found = roots = np.empty(0, dtype=complex)
    flags = np.empty(0, dtype=bool)
    iterations = starts = 0
    for attempt in range(cfg.max_retries + 1):
        if not sweepable:
            break
        batches = [found]
        for disk, radius, count, phase in _sweep(sweepable, d, attempt, cfg):
            pts, its = _newton_on_circle(disk.local, radius, count, phase, cfg)
            batches.append(pts + disk.center)
            iterations += its
            starts += count
        found = _dedupe(f, np.concatenate(batches), cfg)
        roots, flags = _assemble(f, found, prev, cfg, level)
        if roots.size == d:
            break
        logger.info("Level %d: %d of %d roots after attempt %d", level, roots.size, d, attempt + 1)
    if roots.size < d:
        roots, flags = _attribute_clusters(f, roots, flags, prev, disks, cfg, level)
    return roots, flags, iterations, starts


def _solve_level_deflating(f, prev, cfg, level):
    """One root per circle pass; the working polynomial is deflated after each."""
    d = f.degree
    disks = _build_disks(f, prev)
    sweepable = _sweepable(disks)
    work = f
    found = []
    iterations = starts = 0
    attempt = 0
    while len(found) < d and attempt <= cfg.max_retries and sweepable:
        progress = False
        for disk, radius, count, phase in _sweep(sweepable, d, attempt, cfg):
            g = recenter(work, disk.center)
            pts, its = _newton_on_circle(g, radius, count, phase, cfg)
            iterations += its
            starts += count
            if pts.size == 0:
                continue
            pts = pts + disk.center
            candidate = pts[np.argmin(residuals(work, pts))]
            root = _polish_all(f, np.array([candidate]), cfg)[0]
            try:
                work = deflate(work, root, bound=cfg.residual_bound)
            except BadRoot as exc:
                logger.debug("Level %d: %s", level, exc)
                continue
            found.append(root)
            progress = True
            break
        if not progress:
            attempt += 1
    roots, flags = _assemble(f, np.array(found, dtype=complex), prev, cfg, level)
    if roots.size < d:
        roots, flags = _attribute_clusters(f, roots, flags, prev, disks, cfg, level)
    return roots, flags, iterations, starts


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def cascade_solve(p, cfg=None):
    """
    All n roots of p, with multiplicity.

    Raises LevelIncomplete when a level keeps missing roots after the retries
    and the cluster fallback, or finds more distinct roots than its degree.
    Raises ResidualBoundExceeded when a returned root misses residual_bound on p.
    """
    cfg = cfg or CascadeConfig()
    n = p.degree
    if n < 1:
        raise ValueError("cascade_solve needs degree >= 1")
    if not p.is_finite:
        raise ValueError("coefficients must be finite")

    linear = p.derivative(n - 1).coeffs
    roots = np.array([p.center - linear[0] / linear[1]], dtype=complex)
    flags = np.zeros(1, dtype=bool)
    iterations, starts = [], []
    level_solver = _solve_level_deflating if cfg.deflate_mode else _solve_level
    for m in range(n - 2, -1, -1):
        roots, flags, its, st = level_solver(p.derivative(m), roots, cfg, m)
        iterations.append(its)
        starts.append(st)
        logger.debug("Level %d: %d roots, %d Newton iterations from %d starts", m, roots.size, its, st)

    order = np.lexsort((roots.imag, roots.real))
    roots, flags = roots[order], flags[order]
    res = residuals(p, roots)
    bad = int(np.count_nonzero(res > cfg.residual_bound))
    if bad:
        raise ResidualBoundExceeded(
            f"{bad} of {n} roots above residual bound {cfg.residual_bound:.1e} (worst {res.max():.3e})",
            residuals=res,
        )
    return CascadeResult(roots, res, flags, tuple(iterations), tuple(starts))
