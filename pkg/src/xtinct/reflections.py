"""Reciprocal-lattice geometry, peak positions, and the extinction test.

Peak positions come from the quadratic form

    Q(hkl) = h^2 a*^2 + k^2 b*^2 + l^2 c*^2
             + 2 k l b* c* cos(alpha*) + 2 h l a* c* cos(beta*)
             + 2 h k a* b* cos(gamma*)

with Q = 1/d^2.  A reflection is systematically absent exactly when some
operation (R, t) of the group fixes it as a row vector (h.R = h) while
h.t is not an integer; the test runs on exact twelfth-integer translations.

Powder patterns cannot separate reflections that share a position for
every lattice of the crystal system, so reflections are grouped by exact
integer position invariants (e.g. h^2+k^2+l^2 for cubic) before any
floating-point work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .symmetry.registry import SpaceGroup
from .symmetry.systems import LatticeError, LatticeParams

__all__ = [
    "ReciprocalLattice",
    "PeakPosition",
    "ReflectionError",
    "OutOfSphereError",
    "reciprocal",
    "q_of",
    "two_theta",
    "q_from_two_theta",
    "is_extinct",
    "extinction_mask",
    "position_invariant",
    "position_table",
    "enumerate_peaks",
    "DEFAULT_WAVELENGTH",
    "DEFAULT_H_MAX",
    "Q_MERGE_TOL",
]

DEFAULT_WAVELENGTH = 1.5406  # Cu K-alpha1, Angstrom
DEFAULT_H_MAX = 10
Q_MERGE_TOL = 1e-9  # Angstrom^-2


class ReflectionError(ValueError):
    """Invalid reflection-engine input."""


class OutOfSphereError(ReflectionError):
    """Q too large for the wavelength: the reflection is unobservable."""


@dataclass(frozen=True)
class ReciprocalLattice:
    """Reciprocal-cell quantities entering the quadratic form."""

    a_star: float
    b_star: float
    c_star: float
    cos_alpha_star: float
    cos_beta_star: float
    cos_gamma_star: float

    def __post_init__(self):
        for name in ("a_star", "b_star", "c_star"):
            if not getattr(self, name) > 0:
                raise ReflectionError(f"{name} must be > 0")
        for name in ("cos_alpha_star", "cos_beta_star", "cos_gamma_star"):
            v = getattr(self, name)
            if not -1.0 < v < 1.0:
                raise ReflectionError(f"{name}={v} outside (-1, 1)")


@dataclass(frozen=True)
class PeakPosition:
    """One powder-observable position with the reflections that land on it."""

    q: float
    two_theta: float
    contributors: frozenset[tuple[int, int, int]]
    allowed: bool


def reciprocal(lat: LatticeParams) -> ReciprocalLattice:
    """Reciprocal parameters from the inverse of the direct metric tensor."""
    g = lat.metric_tensor()
    det = float(np.linalg.det(g))
    if det <= 1e-18:
        raise LatticeError("degenerate cell: cannot invert metric tensor")
    gstar = np.linalg.inv(g)
    a_s = math.sqrt(gstar[0, 0])
    b_s = math.sqrt(gstar[1, 1])
    c_s = math.sqrt(gstar[2, 2])
    return ReciprocalLattice(
        a_star=a_s,
        b_star=b_s,
        c_star=c_s,
        cos_alpha_star=float(gstar[1, 2]) / (b_s * c_s),
        cos_beta_star=float(gstar[0, 2]) / (a_s * c_s),
        cos_gamma_star=float(gstar[0, 1]) / (a_s * b_s),
    )


def q_of(rl: ReciprocalLattice, r) -> float:
    """Q in Angstrom^-2 for one reflection (equals 1/d^2)."""
    h, k, l = (int(v) for v in r)
    if h == 0 and k == 0 and l == 0:
        raise ReflectionError("(0,0,0) is not a reflection")
    return (
        h * h * rl.a_star**2
        + k * k * rl.b_star**2
        + l * l * rl.c_star**2
        + 2.0 * k * l * rl.b_star * rl.c_star * rl.cos_alpha_star
        + 2.0 * h * l * rl.a_star * rl.c_star * rl.cos_beta_star
        + 2.0 * h * k * rl.a_star * rl.b_star * rl.cos_gamma_star
    )


def two_theta(q: float, wavelength: float = DEFAULT_WAVELENGTH) -> float:
    """Scattering angle 2-theta in degrees for Q = 1/d^2 (Bragg's law)."""
    if not q > 0:
        raise ReflectionError(f"Q={q} must be > 0")
    if not wavelength > 0:
        raise ReflectionError(f"wavelength={wavelength} must be > 0")
    x = wavelength * math.sqrt(q) / 2.0
    if x > 1.0:
        raise OutOfSphereError(
            f"Q={q} unobservable at wavelength {wavelength} (sin(theta) = {x} > 1)"
        )
    return math.degrees(2.0 * math.asin(x))


def q_from_two_theta(tt: float, wavelength: float = DEFAULT_WAVELENGTH) -> float:
    """Inverse of two_theta: Q from a scattering angle in degrees."""
    if not 0.0 < tt <= 180.0:
        raise ReflectionError(f"two_theta={tt} outside (0, 180]")
    if not wavelength > 0:
        raise ReflectionError(f"wavelength={wavelength} must be > 0")
    s = 2.0 * math.sin(math.radians(tt) / 2.0) / wavelength
    return s * s


def is_extinct(g: SpaceGroup, r) -> bool:
    """True when every contribution to reflection r cancels by symmetry.

    Criterion: some op (R, t) satisfies h.R == h (row action) with h.t
    not an integer; evaluated exactly on twelfth-integer translations.
    """
    h = np.asarray(tuple(int(v) for v in r), dtype=np.int64)
    if not h.any():
        raise ReflectionError("(0,0,0) is not a reflection")
    rot = g.rotations.astype(np.int64)
    fixed = np.all(np.einsum("a,nab->nb", h, rot) == h, axis=1)
    if not fixed.any():
        return False
    phases = (g.t12[fixed].astype(np.int64) @ h) % 12
    return bool(np.any(phases != 0))


def extinction_mask(g: SpaceGroup, hkls: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Vectorized is_extinct over an (m, 3) integer array of reflections."""
    hkls = np.asarray(hkls, dtype=np.int64)
    rot = g.rotations.astype(np.int64)
    t12 = g.t12.astype(np.int64)
    out = np.empty(len(hkls), dtype=bool)
    for start in range(0, len(hkls), chunk):
        block = hkls[start : start + chunk]
        hr = np.einsum("ma,nab->mnb", block, rot)
        fixed = np.all(hr == block[:, None, :], axis=2)
        phases = (block @ t12.T) % 12
        out[start : start + chunk] = np.any(fixed & (phases != 0), axis=1)
    return out


# ------------------------------------------------------- position invariants

def position_invariant(system_name: str, r) -> tuple[int, ...]:
    """Exact integer key: two reflections share a powder position for every
    lattice of the system iff their keys are equal."""
    h, k, l = (int(v) for v in r)
    if system_name == "cubic":
        return (h * h + k * k + l * l,)
    if system_name == "tetragonal":
        return (h * h + k * k, l * l)
    if system_name in ("trigonal", "hexagonal"):
        return (h * h + h * k + k * k, l * l)
    if system_name == "orthorhombic":
        return (h * h, k * k, l * l)
    if system_name == "monoclinic":
        return (h * h, k * k, l * l, h * l)
    if system_name == "triclinic":
        return (h * h, k * k, l * l, k * l, h * l, h * k)
    raise ReflectionError(f"unknown crystal system {system_name!r}")


def _invariant_columns(system_name: str, hkls: np.ndarray) -> np.ndarray:
    h, k, l = hkls[:, 0], hkls[:, 1], hkls[:, 2]
    if system_name == "cubic":
        cols = [h * h + k * k + l * l]
    elif system_name == "tetragonal":
        cols = [h * h + k * k, l * l]
    elif system_name in ("trigonal", "hexagonal"):
        cols = [h * h + h * k + k * k, l * l]
    elif system_name == "orthorhombic":
        cols = [h * h, k * k, l * l]
    elif system_name == "monoclinic":
        cols = [h * h, k * k, l * l, h * l]
    elif system_name == "triclinic":
        cols = [h * h, k * k, l * l, k * l, h * l, h * k]
    else:
        raise ReflectionError(f"unknown crystal system {system_name!r}")
    return np.stack(cols, axis=1)


def q_from_invariant(system_name: str, key: tuple[int, ...], rl: ReciprocalLattice) -> float:
    """Q for a position key; exact counterpart of q_of on any member."""
    a2, b2, c2 = rl.a_star**2, rl.b_star**2, rl.c_star**2
    if system_name == "cubic":
        return key[0] * a2
    if system_name in ("tetragonal", "trigonal", "hexagonal"):
        return key[0] * a2 + key[1] * c2
    if system_name == "orthorhombic":
        return key[0] * a2 + key[1] * b2 + key[2] * c2
    if system_name == "monoclinic":
        return (
            key[0] * a2 + key[1] * b2 + key[2] * c2
            + 2.0 * key[3] * rl.a_star * rl.c_star * rl.cos_beta_star
        )
    if system_name == "triclinic":
        return (
            key[0] * a2 + key[1] * b2 + key[2] * c2
            + 2.0 * key[3] * rl.b_star * rl.c_star * rl.cos_alpha_star
            + 2.0 * key[4] * rl.a_star * rl.c_star * rl.cos_beta_star
            + 2.0 * key[5] * rl.a_star * rl.b_star * rl.cos_gamma_star
        )
    raise ReflectionError(f"unknown crystal system {system_name!r}")


@lru_cache(maxsize=64)
def _hkl_box(h_max: int) -> np.ndarray:
    rng = np.arange(-h_max, h_max + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    return grid[np.any(grid != 0, axis=1)]


@lru_cache(maxsize=64)
def position_table(
    g: SpaceGroup, h_max: int
) -> tuple[tuple[tuple[int, ...], bool, frozenset[tuple[int, int, int]]], ...]:
    """All position keys in the |h|,|k|,|l| <= h_max box for g's system.

    Returns (key, present, contributors) sorted by key; ``present`` is True
    when at least one contributor survives the extinction test.  Cached:
    extinction depends only on the group, not on lattice dimensions.
    """
    box = _hkl_box(h_max)
    cols = _invariant_columns(g.system.name, box)
    extinct = extinction_mask(g, box)
    keys, inverse = np.unique(cols, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    present = np.zeros(len(keys), dtype=bool)
    np.logical_or.at(present, inverse, ~extinct)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys)))
    bounds = np.append(bounds, len(inverse))
    table = []
    for i, key in enumerate(keys):
        members = box[order[bounds[i] : bounds[i + 1]]]
        table.append(
            (
                tuple(int(v) for v in key),
                bool(present[i]),
                frozenset(map(tuple, members.tolist())),
            )
        )
    return tuple(table)


def enumerate_peaks(
    g: SpaceGroup,
    lat: LatticeParams,
    window: tuple[float, float],
    wavelength: float = DEFAULT_WAVELENGTH,
    h_max: int = DEFAULT_H_MAX,
) -> list[PeakPosition]:
    """Allowed powder positions inside a 2-theta window, ascending.

    Scans every hkl with |h|,|k|,|l| <= h_max, merges reflections sharing a
    position (exact integer invariants, then a 1e-9 A^-2 tolerance for
    cross-key coincidences), and keeps positions with at least one
    non-extinct contributor.
    """
    lo, hi = window
    if not (0.0 < lo < hi <= 180.0):
        raise ReflectionError(f"invalid two-theta window {window}")
    if h_max < 1:
        raise ReflectionError(f"h_max={h_max} must be >= 1")
    if not g.system.check(lat):
        raise LatticeError(
            f"lattice {lat} violates {g.system.name} constraints of group {g.number}"
        )
    rl = reciprocal(lat)
    sysname = g.system.name
    entries = [
        (q_from_invariant(sysname, key, rl), key, present, members)
        for key, present, members in position_table(g, h_max)
    ]
    entries.sort(key=lambda e: e[0])
    # merge accidental cross-key coincidences
    merged: list[list] = []
    for q, _key, present, members in entries:
        if merged and q - merged[-1][0] < Q_MERGE_TOL:
            merged[-1][1] = merged[-1][1] or present
            merged[-1][2] = merged[-1][2] | members
        else:
            merged.append([q, present, members])
    q_lo = q_from_two_theta(lo, wavelength)
    q_hi = q_from_two_theta(hi, wavelength)
    peaks = []
    for q, present, members in merged:
        if not present or q < q_lo or q > q_hi:
            continue
        tt = two_theta(q, wavelength)
        if lo <= tt <= hi:
            peaks.append(
                PeakPosition(q=q, two_theta=tt, contributors=members, allowed=True)
            )
    return peaks
