"""
Newton Iteration

Single Newton steps on both polynomial forms, a generic iteration driver that
records its trace, and the fast-basin test: x0 is in the fast basin of a root
x* when every iterate satisfies |x_k - x*| <= (1/sqrt 2)^(2^k - 1) |x0 - x*|.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from src.errors import DerivativeZero
from src.poly_core import evaluate

logger = logging.getLogger(__name__)

# |sum 1/(z - z_i)| below this fraction of sum |1/(z - z_i)| counts as a zero derivative
RECIPROCAL_FLOOR = 1e-14

# Fast-basin convergence: |x_k - x*| <= BASIN_TOL * max(1, |x*|) is success
BASIN_TOL = 1e-13

DEFAULT_K_MAX = 64

_LOG_CONTRACTION = 0.5 * math.log(0.5)


@dataclass(frozen=True)
class NewtonTrace:
    """x0 first; converged_to is None when the run did not converge."""

    iterates: tuple
    converged_to: Optional[complex] = None
    error: Optional[str] = None

    @property
    def steps(self):
        return len(self.iterates) - 1


@dataclass(frozen=True)
class BasinVerdict:
    in_basin: bool
    failing_step: Optional[int] = None

    def __post_init__(self):
        if self.in_basin == (self.failing_step is not None):
            raise ValueError("failing_step is set exactly when the start is outside the basin")


def newton_step_rootform(p, z):
    """z - 1 / sum 1/(z - z_i); a root maps to itself."""
    z = complex(z)
    diffs = z - p.roots
    if np.any(diffs == 0):
        return z
    inv = 1.0 / diffs
    # numpy arithmetic throughout, so fast_basin_targets reproduces it bit for bit
    s = np.sum(inv)
    if np.abs(s) <= RECIPROCAL_FLOOR * np.sum(np.abs(inv)):
        raise DerivativeZero(f"reciprocal sum vanished at {z}")
    return complex(np.complex128(z) - 1.0 / s)


def newton_step_coeffform(p, pprime, z):
    """z - p(z) / p'(z), both by Horner."""
    z = complex(z)
    value = evaluate(p, z)
    slope = evaluate(pprime, z)
    if abs(slope) <= np.finfo(float).tiny:
        raise DerivativeZero(f"derivative vanished at {z}")
    step = value / slope
    if not cmath.isfinite(step):
        raise DerivativeZero(f"non-finite Newton update at {z}")
    return z - step


def rootform_stepper(p):
    return partial(newton_step_rootform, p)


def coeffform_stepper(p, pprime=None):
    return partial(newton_step_coeffform, p, pprime if pprime is not None else p.derivative())


def run_newton(stepper, x0, max_steps=50, tol=1e-12):
    """
    Iterate until |update| <= tol * max(1, |x|), the step budget runs out, or
    the stepper raises DerivativeZero. Iterates that do not move are not
    recorded, so a fixed point yields a trace with zero steps.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    x = complex(x0)
    iterates = [x]
    for _ in range(max_steps):
        try:
            nxt = complex(stepper(x))
        except DerivativeZero as exc:
            logger.debug("Newton stopped: %s", exc)
            return NewtonTrace(tuple(iterates), None, "derivative_zero")
        if not cmath.isfinite(nxt):
            return NewtonTrace(tuple(iterates), None, "diverged")
        if nxt != x:
            iterates.append(nxt)
        if abs(nxt - x) <= tol * max(1.0, abs(x)):
            return NewtonTrace(tuple(iterates), nxt)
        x = nxt
    return NewtonTrace(tuple(iterates), None)


def basin_bound_factor(k):
    """(1/sqrt 2)^(2^k - 1), underflowing cleanly to 0."""
    return math.exp(math.ldexp(1.0, k) * _LOG_CONTRACTION - _LOG_CONTRACTION)


def in_fast_basin(p, target_root, x0, k_max=DEFAULT_K_MAX):
    """
    Fast-basin test for one start point against one root of a RootForm.

    At each k: converged within BASIN_TOL is success; an error above the
    bound (or NaN) fails at step k. A vanishing derivative fails at the step
    it would have produced. Surviving k_max steps counts as success.
    """
    target = complex(target_root)
    x = complex(x0)
    e0 = abs(x - target)
    tol = BASIN_TOL * max(1.0, abs(target))
    for k in range(k_max + 1):
        e = abs(x - target)
        if e <= tol:
            return BasinVerdict(True)
        if not e <= e0 * basin_bound_factor(k):
            return BasinVerdict(False, k)
        if k == k_max:
            break
        try:
            x = newton_step_rootform(p, x)
        except DerivativeZero:
            return BasinVerdict(False, k + 1)
    return BasinVerdict(True)


def _vector_step(roots, x):
    """Newton on a RootForm for many points at once; NaN marks a vanished derivative."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        diffs = x[:, None] - roots[None, :]
        at_root = np.any(diffs == 0, axis=1)
        inv = 1.0 / diffs
        s = inv.sum(axis=1)
        vanished = np.abs(s) <= RECIPROCAL_FLOOR * np.abs(inv).sum(axis=1)
        nxt = x - 1.0 / s
    nxt[at_root] = x[at_root]
    nxt[vanished & ~at_root] = np.nan
    return nxt


def fast_basin_targets(p, starts, k_max=DEFAULT_K_MAX):
    """
    For each start, the index of the root whose fast basin contains it, or -1.

    Runs one shared Newton orbit per start and checks it against every root,
    so the verdicts match in_fast_basin(p, roots[i], start) for each pair.
    """
    roots = np.asarray(p.roots)
    x = np.array(starts, dtype=complex).ravel()
    tol = BASIN_TOL * np.maximum(1.0, np.abs(roots))[:, None]
    e0 = np.abs(x[None, :] - roots[:, None])
    # 0 undecided, 1 in basin, -1 out
    status = np.zeros(e0.shape, dtype=np.int8)
    for k in range(k_max + 1):
        e = np.abs(x[None, :] - roots[:, None])
        open_ = status == 0
        hit = open_ & (e <= tol)
        status[hit] = 1
        open_ &= ~hit
        with np.errstate(invalid="ignore"):
            status[open_ & ~(e <= e0 * basin_bound_factor(k))] = -1
        if not np.any(status == 0) or k == k_max:
            break
        x = _vector_step(roots, x)
    status[status == 0] = 1

    inside = status == 1
    targets = np.where(inside.any(axis=0), inside.argmax(axis=0), -1)
    return targets.astype(int)
