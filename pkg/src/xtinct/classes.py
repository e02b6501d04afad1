"""Extinction-equivalence classes and theoretical top-k prediction ceilings.

Groups whose powder patterns show peaks at exactly the same set of
observable positions (over every lattice of the family) cannot be told
apart from positions alone.  The fingerprint of a group is the boolean
presence vector over position-invariant keys; families pool crystal
systems that share one lattice parameterization: cubic, tetragonal, and
trigonal+hexagonal (rhombohedral groups carried in hexagonal axes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .reflections import position_table
from .symmetry.registry import SpaceGroup, SpaceGroupRegistry

__all__ = [
    "Family",
    "FAMILIES",
    "family_by_name",
    "Fingerprint",
    "ExtinctionClass",
    "Partition",
    "ClassesError",
    "fingerprint",
    "compute_classes",
    "theoretical_topk",
    "relabel",
    "DEFAULT_CLASS_H_MAX",
]

DEFAULT_CLASS_H_MAX = 8


class ClassesError(ValueError):
    """Invalid family, incomplete registry, or foreign label."""


@dataclass(frozen=True)
class Family:
    """A pooled set of crystal systems sharing one lattice parameterization."""

    name: str
    sg_min: int
    sg_max: int
    free_params: tuple[str, ...]

    def numbers(self) -> range:
        return range(self.sg_min, self.sg_max + 1)

    def __contains__(self, sg_number: int) -> bool:
        return self.sg_min <= sg_number <= self.sg_max

    @property
    def size(self) -> int:
        return self.sg_max - self.sg_min + 1


FAMILIES: dict[str, Family] = {
    "cubic": Family("cubic", 195, 230, ("a",)),
    "tetragonal": Family("tetragonal", 75, 142, ("a", "c")),
    "trigonal+hexagonal": Family("trigonal+hexagonal", 143, 194, ("a", "c")),
}

_FAMILY_ALIASES = {
    "cubic": "cubic",
    "tetragonal": "tetragonal",
    "trigonal+hexagonal": "trigonal+hexagonal",
    "trigonal_hexagonal": "trigonal+hexagonal",
    "trigonal-hexagonal": "trigonal+hexagonal",
    "tri/hexagonal": "trigonal+hexagonal",
    "trihex": "trigonal+hexagonal",
}


def family_by_name(name: str) -> Family:
    try:
        return FAMILIES[_FAMILY_ALIASES[name.strip().lower()]]
    except KeyError:
        raise ClassesError(
            f"unknown family {name!r}; expected one of {sorted(FAMILIES)}"
        ) from None


@dataclass(frozen=True)
class Fingerprint:
    """Presence of every position key in a fixed enumeration box."""

    family: str
    cells: tuple[tuple[tuple[int, ...], bool], ...]


@dataclass(frozen=True)
class ExtinctionClass:
    members: tuple[int, ...]
    fingerprint: Fingerprint


@dataclass(frozen=True)
class Partition:
    family: str
    h_max: int
    classes: tuple[ExtinctionClass, ...]

    @property
    def n_groups(self) -> int:
        return sum(len(c.members) for c in self.classes)

    def class_map(self) -> dict[int, int]:
        """Space-group number -> class index (classes ranked by smallest member)."""
        return {
            number: index
            for index, cls in enumerate(self.classes)
            for number in cls.members
        }


def fingerprint(g: SpaceGroup, h_max: int = DEFAULT_CLASS_H_MAX) -> Fingerprint:
    """Powder-observable absence fingerprint of one group.

    A key is present when at least one reflection mapping to it survives
    the extinction test, scanning |h|,|k|,|l| <= h_max.
    """
    family = None
    for fam in FAMILIES.values():
        if g.number in fam:
            family = fam
            break
    if family is None:
        raise ClassesError(
            f"group {g.number} ({g.hm_symbol}) belongs to no supported family"
        )
    if h_max < 6:
        raise ClassesError(f"h_max={h_max} too small for a stable fingerprint")
    cells = tuple(
        (key, present) for key, present, _members in position_table(g, h_max)
    )
    return Fingerprint(family=family.name, cells=cells)


def compute_classes(
    family: Family | str,
    registry: SpaceGroupRegistry,
    h_max: int = DEFAULT_CLASS_H_MAX,
) -> Partition:
    """Partition a family into extinction classes by exact fingerprint equality."""
    fam = family_by_name(family) if isinstance(family, str) else family
    missing = registry.missing_in_range(fam.sg_min, fam.sg_max)
    if missing:
        raise ClassesError(
            f"registry does not cover family {fam.name}: missing groups {missing}"
        )
    by_fp: dict[Fingerprint, list[int]] = {}
    for number in fam.numbers():
        fp = fingerprint(registry[number], h_max)
        by_fp.setdefault(fp, []).append(number)
    classes = sorted(
        (ExtinctionClass(tuple(sorted(members)), fp) for fp, members in by_fp.items()),
        key=lambda c: c.members[0],
    )
    return Partition(family=fam.name, h_max=h_max, classes=tuple(classes))


def theoretical_topk(p: Partition, k: int) -> float:
    """Ceiling on top-k accuracy: a sample is recoverable iff its class has
    a free slot among the k guesses, so each class contributes min(k, size)."""
    if k < 1:
        raise ClassesError(f"k={k} must be >= 1")
    total = p.n_groups
    return sum(min(k, len(c.members)) for c in p.classes) / total


def relabel(labels: Sequence[int], p: Partition) -> list[int]:
    """Map space-group numbers to class indices (rank of smallest member)."""
    mapping = p.class_map()
    out = []
    for label in labels:
        if label not in mapping:
            raise ClassesError(
                f"label {label} does not belong to family {p.family}"
            )
        out.append(mapping[label])
    return out
