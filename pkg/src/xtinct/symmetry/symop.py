"""Symmetry operations and the coordinate-triplet grammar.

An operation maps a fractional coordinate column vector v to ``R @ v + t``.
Rotation entries are integers in {-1, 0, 1}; translations are exact rationals
with denominator dividing 12, stored reduced modulo 1.  Exactness matters:
the systematic-absence test downstream asks whether ``h . t`` is an integer,
which must never be answered through floating point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

__all__ = [
    "SymOp",
    "SymOpError",
    "SymOpParseError",
    "parse_symop",
    "format_symop",
]

_AXES = ("x", "y", "z")

_ATOM_RE = re.compile(r"([+-]?)(\d+/\d+|\d*\.\d+|\d+|[xyz])")

_IDENTITY_ROWS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


class SymOpError(ValueError):
    """An operation violates the symmetry-operation invariants."""


class SymOpParseError(SymOpError):
    """A coordinate triplet does not match the grammar."""


def _det3(m) -> int:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


@dataclass(frozen=True)
class SymOp:
    """One space-group operation ``v -> rotation @ v + translation``."""

    rotation: tuple[tuple[int, int, int], ...]
    translation: tuple[Fraction, Fraction, Fraction]

    def __post_init__(self):
        rot = tuple(tuple(int(e) for e in row) for row in self.rotation)
        if len(rot) != 3 or any(len(row) != 3 for row in rot):
            raise SymOpError("rotation must be a 3x3 matrix")
        for row in rot:
            for e in row:
                if e not in (-1, 0, 1):
                    raise SymOpError(f"rotation entry {e} outside {{-1,0,1}}")
        if _det3(rot) not in (-1, 1):
            raise SymOpError("rotation determinant must be +1 or -1")
        tra = tuple(Fraction(t) % 1 for t in self.translation)
        if len(tra) != 3:
            raise SymOpError("translation must have 3 components")
        for t in tra:
            if 12 % t.denominator != 0:
                raise SymOpError(f"translation {t} has denominator not dividing 12")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @classmethod
    def identity(cls) -> "SymOp":
        return cls(_IDENTITY_ROWS, (Fraction(0), Fraction(0), Fraction(0)))

    @classmethod
    def from_t12(cls, rotation, t12: Iterable[int]) -> "SymOp":
        """Construct from a translation given in twelfths of the cell."""
        return cls(rotation, tuple(Fraction(int(n) % 12, 12) for n in t12))

    @property
    def t12(self) -> tuple[int, int, int]:
        """Translation in twelfths, each component in 0..11."""
        t = self.translation
        return (int(t[0] * 12), int(t[1] * 12), int(t[2] * 12))

    def is_identity(self) -> bool:
        return self.rotation == _IDENTITY_ROWS and not any(self.translation)

    def apply(self, xyz) -> tuple[Fraction, Fraction, Fraction]:
        """Map a fractional coordinate, exactly if given Fractions."""
        x, y, z = xyz
        r, t = self.rotation, self.translation
        return tuple(
            r[i][0] * x + r[i][1] * y + r[i][2] * z + t[i] for i in range(3)
        )

    def compose(self, other: "SymOp") -> "SymOp":
        """self after other: ``(R1,t1) . (R2,t2) = (R1 R2, R1 t2 + t1)`` mod 1."""
        r1, r2 = self.rotation, other.rotation
        rot = tuple(
            tuple(sum(r1[i][k] * r2[k][j] for k in range(3)) for j in range(3))
            for i in range(3)
        )
        tra = tuple(
            sum(r1[i][k] * other.translation[k] for k in range(3)) + self.translation[i]
            for i in range(3)
        )
        return SymOp(rot, tra)

    def inverse(self) -> "SymOp":
        """Group inverse modulo lattice translations."""
        r = self.rotation
        det = _det3(r)
        # adjugate / det; entries stay in {-1,0,1} for crystallographic rotations
        inv = tuple(
            tuple(
                det
                * (
                    r[(j + 1) % 3][(i + 1) % 3] * r[(j + 2) % 3][(i + 2) % 3]
                    - r[(j + 1) % 3][(i + 2) % 3] * r[(j + 2) % 3][(i + 1) % 3]
                )
                for j in range(3)
            )
            for i in range(3)
        )
        tra = tuple(
            -sum(inv[i][k] * self.translation[k] for k in range(3)) for i in range(3)
        )
        return SymOp(inv, tra)

    def __str__(self) -> str:
        return format_symop(self)


def _parse_term(term: str, index: int):
    """Parse one triplet term into (coefficient row, translation Fraction)."""
    label = f"term {index + 1} {term!r}"
    compact = term.replace(" ", "")
    if not compact:
        raise SymOpParseError(f"{label}: empty term")
    coeffs = [0, 0, 0]
    const = None
    pos = 0
    first = True
    for m in _ATOM_RE.finditer(compact):
        if m.start() != pos:
            raise SymOpParseError(f"{label}: unexpected {compact[pos:m.start()]!r}")
        sign_s, atom = m.group(1), m.group(2)
        if not sign_s and not first:
            raise SymOpParseError(f"{label}: missing sign before {atom!r}")
        sign = -1 if sign_s == "-" else 1
        if atom in _AXES:
            coeffs[_AXES.index(atom)] += sign
        else:
            if const is not None:
                raise SymOpParseError(f"{label}: more than one constant")
            try:
                value = Fraction(atom)
            except (ValueError, ZeroDivisionError) as exc:
                raise SymOpParseError(f"{label}: bad constant {atom!r}") from exc
            const = sign * value
        pos = m.end()
        first = False
    if pos != len(compact):
        raise SymOpParseError(f"{label}: unexpected {compact[pos:]!r}")
    for c in coeffs:
        if c not in (-1, 0, 1):
            raise SymOpParseError(f"{label}: coefficient {c} outside {{-1,0,1}}")
    const = Fraction(0) if const is None else const
    if 12 % const.denominator != 0:
        raise SymOpParseError(
            f"{label}: denominator {const.denominator} does not divide 12"
        )
    return tuple(coeffs), const % 1


def parse_symop(text: str) -> SymOp:
    """Parse a coordinate triplet such as ``-y, x-y, z+1/2`` into a SymOp."""
    terms = text.split(",")
    if len(terms) != 3:
        raise SymOpParseError(
            f"expected 3 comma-separated terms, got {len(terms)} in {text!r}"
        )
    rows = []
    trans = []
    for i, term in enumerate(terms):
        row, const = _parse_term(term, i)
        rows.append(row)
        trans.append(const)
    try:
        return SymOp(tuple(rows), tuple(trans))
    except SymOpParseError:
        raise
    except SymOpError as exc:
        raise SymOpParseError(f"{text!r}: {exc}") from exc


def format_symop(op: SymOp) -> str:
    """Canonical triplet form; ``parse_symop`` is its left inverse."""
    terms = []
    for row, t in zip(op.rotation, op.translation):
        parts = []
        for coeff, axis in zip(row, _AXES):
            if coeff == 1:
                parts.append(f"+{axis}")
            elif coeff == -1:
                parts.append(f"-{axis}")
        if t:
            parts.append(f"+{t.numerator}/{t.denominator}")
        term = "".join(parts)
        terms.append(term.lstrip("+") if term.startswith("+") else term)
    return ", ".join(terms)
