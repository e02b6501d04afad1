"""The seven crystal systems and lattice-parameter handling.

Rhombohedral space groups are carried in hexagonal (obverse) axes, so the
trigonal system shares the hexagonal parameterization (a = b, gamma = 120).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "CrystalSystem",
    "LatticeParams",
    "LatticeError",
    "SYSTEMS",
    "system_by_name",
    "system_of",
    "lattice_from_free_params",
]

_PARAM_NAMES = ("a", "b", "c", "alpha", "beta", "gamma")


class LatticeError(ValueError):
    """Invalid lattice parameters or constraint violation."""


@dataclass(frozen=True)
class CrystalSystem:
    """One of the seven systems, with its space-group range and free cell parameters."""

    name: str
    sg_min: int
    sg_max: int
    free_params: tuple[str, ...]
    # (a, b, c, alpha, beta, gamma) as expressions over the free values
    _expand: tuple[str, ...]

    def expand(self, values: Sequence[float]) -> tuple[float, ...]:
        """Apply the system's fixed constraints to a free-parameter assignment."""
        if len(values) != len(self.free_params):
            raise LatticeError(
                f"{self.name} expects {len(self.free_params)} free parameters "
                f"{self.free_params}, got {len(values)}"
            )
        env = dict(zip(self.free_params, (float(v) for v in values)))
        return tuple(
            env[tok] if tok in env else float(tok) for tok in self._expand
        )

    def check(self, lat: "LatticeParams") -> bool:
        """True if the lattice satisfies this system's fixed constraints."""
        free = [getattr(lat, p) for p in self.free_params]
        expanded = self.expand(free)
        return all(
            math.isclose(getattr(lat, n), v, rel_tol=0.0, abs_tol=1e-9)
            for n, v in zip(_PARAM_NAMES, expanded)
        )


SYSTEMS: tuple[CrystalSystem, ...] = (
    CrystalSystem(
        "triclinic", 1, 2,
        ("a", "b", "c", "alpha", "beta", "gamma"),
        ("a", "b", "c", "alpha", "beta", "gamma"),
    ),
    CrystalSystem(
        "monoclinic", 3, 15,
        ("a", "b", "c", "beta"),
        ("a", "b", "c", "90", "beta", "90"),
    ),
    CrystalSystem(
        "orthorhombic", 16, 74,
        ("a", "b", "c"),
        ("a", "b", "c", "90", "90", "90"),
    ),
    CrystalSystem(
        "tetragonal", 75, 142,
        ("a", "c"),
        ("a", "a", "c", "90", "90", "90"),
    ),
    CrystalSystem(
        "trigonal", 143, 167,
        ("a", "c"),
        ("a", "a", "c", "90", "90", "120"),
    ),
    CrystalSystem(
        "hexagonal", 168, 194,
        ("a", "c"),
        ("a", "a", "c", "90", "90", "120"),
    ),
    CrystalSystem(
        "cubic", 195, 230,
        ("a",),
        ("a", "a", "a", "90", "90", "90"),
    ),
)

_BY_NAME = {s.name: s for s in SYSTEMS}


def system_by_name(name: str) -> CrystalSystem:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise LatticeError(f"unknown crystal system {name!r}") from None


def system_of(sg_number: int) -> CrystalSystem:
    """Crystal system owning a space-group number (1-230)."""
    for s in SYSTEMS:
        if s.sg_min <= sg_number <= s.sg_max:
            return s
    raise LatticeError(f"space group number {sg_number} outside 1-230")


@dataclass(frozen=True)
class LatticeParams:
    """Direct-cell parameters: lengths in Angstrom, angles in degrees."""

    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if not getattr(self, name) > 0:
                raise LatticeError(f"cell length {name}={getattr(self, name)} must be > 0")
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 180.0:
                raise LatticeError(f"cell angle {name}={v} must lie in (0, 180)")
        if self.metric_determinant() <= 0:
            raise LatticeError("degenerate cell: metric tensor is not positive definite")

    def metric_tensor(self) -> np.ndarray:
        """Direct metric tensor G, in Angstrom^2."""
        a, b, c = self.a, self.b, self.c
        ca = math.cos(math.radians(self.alpha))
        cb = math.cos(math.radians(self.beta))
        cg = math.cos(math.radians(self.gamma))
        return np.array(
            [
                [a * a, a * b * cg, a * c * cb],
                [a * b * cg, b * b, b * c * ca],
                [a * c * cb, b * c * ca, c * c],
            ]
        )

    def metric_determinant(self) -> float:
        return float(np.linalg.det(self.metric_tensor()))

    def volume(self) -> float:
        """Cell volume in Angstrom^3 (sqrt of the metric determinant)."""
        det = self.metric_determinant()
        if det <= 0:
            raise LatticeError("degenerate cell: nonpositive metric determinant")
        return math.sqrt(det)

    def free_values(self, system: CrystalSystem) -> tuple[float, ...]:
        return tuple(getattr(self, p) for p in system.free_params)


def lattice_from_free_params(
    system: CrystalSystem, values: Sequence[float]
) -> LatticeParams:
    """Build a full LatticeParams from a system's free parameters."""
    for v in values:
        if not float(v) > 0:
            raise LatticeError(f"free parameter value {v} must be > 0")
    full = system.expand(values)
    lat = LatticeParams(*full)
    return lat
