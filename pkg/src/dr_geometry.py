"""
DR Geometry

Radii rho_j around the derivative roots, DR-disks, the scaled annuli
[iota1 * rho_j, iota2 * rho_j], and per-root quotients |z_i - zeta_j| / rho_j.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.poly_core import critical_points, scaled_shift

logger = logging.getLogger(__name__)

# Relative slack when testing a root against an annulus boundary
CONTAINMENT_RTOL = 1e-9


@dataclass(frozen=True)
class DrDisk:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"DR-disk radius must be non-negative, got {self.radius}")

    @property
    def infinite(self):
        return math.isinf(self.radius)


@dataclass(frozen=True)
class Annulus:
    center: complex
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner <= self.outer:
            raise ValueError(f"annulus needs 0 <= inner <= outer, got {self.inner}, {self.outer}")

    def contains(self, z, rtol=CONTAINMENT_RTOL):
        dist = abs(complex(z) - self.center)
        return self.inner * (1.0 - rtol) <= dist <= self.outer * (1.0 + rtol)


@dataclass(frozen=True)
class IotaRecord:
    root: complex
    circle_index: int
    quotient: float


def _term(log_b0, bk, k, scale):
    """scale * |b0 / b_k|^(1/k) in log space; None flags an infinite term."""
    if bk == 0:
        return None
    return scale * math.exp((log_b0 - math.log(bk)) / k)


def rho_terms(p, zeta):
    """
    The terms |p(zeta) k! / p^(k)(zeta)|^(1/k) for k = 2..n.

    Built from the scaled expansion of p(z + zeta), where p^(k)(zeta) / k! is the
    k-th coefficient. A None entry is an infinite term (p^(k)(zeta) = 0).
    """
    b, s = scaled_shift(p, zeta)
    b0 = abs(b[0])
    if b0 == 0:
        return [0.0] * (p.degree - 1)
    log_b0 = math.log(b0)
    return [_term(log_b0, abs(b[k]), k, s) for k in range(2, p.degree + 1)]


def rho_from_taylor(coeffs):
    """rho from Taylor coefficients a_k = f^(k)(c) / k! about the disk center."""
    a = np.abs(np.asarray(coeffs, dtype=complex))
    if a[0] == 0:
        return 0.0
    log_a0 = math.log(a[0])
    terms = [_term(log_a0, a[k], k, 1.0) for k in range(2, a.size)]
    finite = [t for t in terms if t is not None]
    return min(finite) if finite else math.inf


def rho(p, zeta):
    """rho_j = min_{k=2..n} |p(zeta) k! / p^(k)(zeta)|^(1/k); 0 at a root of p."""
    zeta = complex(zeta)
    if np.any(p.roots == zeta):
        return 0.0
    finite = [t for t in rho_terms(p, zeta) if t is not None]
    # p^(n) is a nonzero constant, so at least one term is finite
    return min(finite) if finite else math.inf


def dr_disks(p, critical=None):
    """One DR-disk per critical point, in CriticalSet order."""
    if p.degree < 2:
        raise ValueError("DR-disks need degree >= 2")
    if critical is None:
        critical = critical_points(p)
    return [DrDisk(zeta, rho(p, zeta)) for zeta in critical.zetas.tolist()]


def annuli(p, iota1, iota2, disks=None):
    _check_scalars(iota1, iota2)
    if disks is None:
        disks = dr_disks(p)
    return [Annulus(d.center, iota1 * d.radius, iota2 * d.radius) for d in disks]


def quotient(z, disk):
    """|z - zeta| / rho, with the coincident-root convention at rho = 0."""
    dist = abs(complex(z) - disk.center)
    if disk.radius == 0:
        return 1.0 if dist == 0 else math.inf
    if disk.infinite:
        return 0.0
    return dist / disk.radius


def iota_for_root(z, disks):
    """The disk whose quotient is closest to 1 on the multiplicative scale."""
    if not disks:
        raise ValueError("iota_for_root needs at least one disk")
    best_index, best_q, best_score = 0, None, math.inf
    for j, disk in enumerate(disks):
        q = quotient(z, disk)
        score = abs(math.log(q)) if 0 < q < math.inf else math.inf
        if best_q is None or score < best_score:
            best_index, best_q, best_score = j, q, score
    return IotaRecord(complex(z), best_index, best_q)


def iota_records(p, disks=None):
    if disks is None:
        disks = dr_disks(p)
    return [iota_for_root(z, disks) for z in p.roots.tolist()]


def containment_check(p, iota1, iota2, rtol=CONTAINMENT_RTOL, disks=None):
    """Per root: does it lie in at least one annulus A_j?"""
    rings = annuli(p, iota1, iota2, disks=disks)
    inside = np.array([any(a.contains(z, rtol) for a in rings) for z in p.roots.tolist()])
    missing = int(np.count_nonzero(~inside))
    if missing:
        logger.info("%d of %d roots outside the annulus union (iota1=%g, iota2=%g)", missing, p.degree, iota1, iota2)
    return inside


def _check_scalars(iota1, iota2):
    if not (0 < iota1 <= 1 <= iota2):
        raise ValueError(f"need 0 < iota1 <= 1 <= iota2, got iota1={iota1}, iota2={iota2}")
