"""Space-group registry backed by a plain-text table of general positions.

Table format (UTF-8): blocks separated by blank lines.  First line of a
block is ``<number> <HM symbol>``; each following line is one coordinate
triplet.  ``#`` starts a comment.  All general positions are listed
explicitly, centering translations included, so ``len(ops)`` equals the
general-position multiplicity of the group.

The registry is immutable after loading and safe for concurrent reads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np

from .symop import SymOp, SymOpError, parse_symop
from .systems import CrystalSystem, system_of

__all__ = [
    "SpaceGroup",
    "SpaceGroupRegistry",
    "GroupValidationError",
    "TableLoadError",
    "validate_group",
    "load_spacegroup_table",
    "default_table_path",
    "load_default_registry",
    "SG_TABLE_ENV",
]

SG_TABLE_ENV = "XTINCT_SG_TABLE"


class GroupValidationError(ValueError):
    """A set of operations is not a group modulo lattice translations."""


class TableLoadError(ValueError):
    """The space-group table file is malformed or inconsistent."""


def _op_keys(rotations: np.ndarray, t12: np.ndarray) -> np.ndarray:
    """Encode (R, t) pairs as single int64 keys; exact and collision free."""
    rot_code = np.zeros(len(rotations), dtype=np.int64)
    flat = rotations.reshape(len(rotations), 9).astype(np.int64) + 1
    for k in range(9):
        rot_code = rot_code * 3 + flat[:, k]
    t_code = (
        t12[:, 0].astype(np.int64) * 144
        + t12[:, 1].astype(np.int64) * 12
        + t12[:, 2].astype(np.int64)
    )
    return rot_code * 1728 + t_code


@dataclass(frozen=True)
class SpaceGroup:
    """A space group: identity, crystal system, and all general positions."""

    number: int
    hm_symbol: str
    system: CrystalSystem
    ops: tuple[SymOp, ...]
    # dense copies of ops for vectorized work (rotations int8, translations
    # in twelfths int16); derived in __post_init__, excluded from equality
    rotations: np.ndarray = field(compare=False, repr=False, default=None)
    t12: np.ndarray = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if not 1 <= self.number <= 230:
            raise ValueError(f"space group number {self.number} outside 1-230")
        rot = np.array([op.rotation for op in self.ops], dtype=np.int8)
        t12 = np.array([op.t12 for op in self.ops], dtype=np.int16)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "t12", t12)

    def __hash__(self):
        return hash((self.number, self.hm_symbol, self.ops))

    @property
    def multiplicity(self) -> int:
        return len(self.ops)

    def centering_t12(self) -> np.ndarray:
        """Pure lattice translations (t in twelfths of ops with identity rotation)."""
        ident = np.all(
            self.rotations == np.eye(3, dtype=np.int8)[None, :, :], axis=(1, 2)
        )
        return np.unique(self.t12[ident], axis=0)


def validate_group(g: SpaceGroup) -> None:
    """Check identity membership, closure and inverses, all modulo Z^3.

    Raises GroupValidationError naming the first violation.
    """
    n = len(g.ops)
    if n == 0:
        raise GroupValidationError(f"group {g.number}: no operations")
    keys = _op_keys(g.rotations, g.t12)
    key_set = set(int(k) for k in keys)
    if len(key_set) != n:
        raise GroupValidationError(f"group {g.number}: duplicate operations")
    ident_key = int(
        _op_keys(
            np.eye(3, dtype=np.int8)[None, :, :], np.zeros((1, 3), dtype=np.int16)
        )[0]
    )
    if ident_key not in key_set:
        raise GroupValidationError(f"group {g.number}: identity not in operations")
    rot = g.rotations.astype(np.int64)
    t12 = g.t12.astype(np.int64)
    # all pairwise products a.b: rotations (i,j)->R_i R_j, translations R_i t_j + t_i
    prod_rot = np.einsum("iab,jbc->ijac", rot, rot)
    prod_t = (np.einsum("iab,jb->ija", rot, t12) + t12[:, None, :]) % 12
    prod_keys = _op_keys(
        prod_rot.reshape(-1, 3, 3), prod_t.reshape(-1, 3)
    ).reshape(n, n)
    member = np.isin(prod_keys, keys)
    if not member.all():
        i, j = np.argwhere(~member)[0]
        raise GroupValidationError(
            f"group {g.number}: closure violation: "
            f"({g.ops[i]}) . ({g.ops[j]}) not in group"
        )
    # closure + finiteness implies inverses, but check explicitly
    for i, op in enumerate(g.ops):
        try:
            inv = op.inverse()
        except SymOpError as exc:
            raise GroupValidationError(
                f"group {g.number}: op {op} has no crystallographic inverse: {exc}"
            ) from exc
        inv_key = int(
            _op_keys(
                np.array([inv.rotation], dtype=np.int8),
                np.array([inv.t12], dtype=np.int16),
            )[0]
        )
        if inv_key not in key_set:
            raise GroupValidationError(
                f"group {g.number}: inverse of {op} not in group"
            )


class SpaceGroupRegistry:
    """Immutable mapping of space-group number to SpaceGroup."""

    def __init__(self, groups: dict[int, SpaceGroup]):
        self._groups = dict(sorted(groups.items()))

    def __getitem__(self, number: int) -> SpaceGroup:
        try:
            return self._groups[number]
        except KeyError:
            raise KeyError(f"space group {number} not in registry") from None

    def __contains__(self, number: int) -> bool:
        return number in self._groups

    def __iter__(self) -> Iterator[SpaceGroup]:
        return iter(self._groups.values())

    def __len__(self) -> int:
        return len(self._groups)

    @property
    def numbers(self) -> tuple[int, ...]:
        return tuple(self._groups)

    def in_range(self, lo: int, hi: int) -> list[SpaceGroup]:
        return [g for n, g in self._groups.items() if lo <= n <= hi]

    def missing_in_range(self, lo: int, hi: int) -> list[int]:
        return [n for n in range(lo, hi + 1) if n not in self._groups]


def _iter_blocks(text: str):
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            if block:
                yield block
                block = []
            continue
        block.append((lineno, line))
    if block:
        yield block


def load_spacegroup_table(source: str | os.PathLike) -> SpaceGroupRegistry:
    """Parse and validate a space-group table file into a registry."""
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TableLoadError(f"cannot read space-group table {path}: {exc}") from exc
    groups: dict[int, SpaceGroup] = {}
    for block in _iter_blocks(text):
        lineno, header = block[0]
        fields = header.split(None, 1)
        try:
            number = int(fields[0])
        except ValueError:
            raise TableLoadError(
                f"{path}:{lineno}: block header must start with a group number, "
                f"got {header!r}"
            ) from None
        symbol = fields[1].strip() if len(fields) > 1 else ""
        if not symbol:
            raise TableLoadError(f"{path}:{lineno}: group {number} missing HM symbol")
        if number in groups:
            raise TableLoadError(f"{path}:{lineno}: duplicate group number {number}")
        ops = []
        for opno, line in block[1:]:
            try:
                ops.append(parse_symop(line))
            except SymOpError as exc:
                raise TableLoadError(
                    f"{path}:{opno}: group {number}: {exc}"
                ) from exc
        try:
            group = SpaceGroup(number, symbol, system_of(number), tuple(ops))
            validate_group(group)
        except (ValueError, GroupValidationError) as exc:
            raise TableLoadError(f"{path}: group {number}: {exc}") from exc
        groups[number] = group
    if not groups:
        raise TableLoadError(f"{path}: no space groups found")
    return SpaceGroupRegistry(groups)


def default_table_path() -> Path:
    """Shipped table, unless overridden through the XTINCT_SG_TABLE env var."""
    override = os.environ.get(SG_TABLE_ENV)
    if override:
        return Path(override)
    return Path(resources.files("xtinct.symmetry").joinpath("data/spacegroups.txt"))


@lru_cache(maxsize=4)
def _load_cached(path_str: str) -> SpaceGroupRegistry:
    return load_spacegroup_table(path_str)


def load_default_registry() -> SpaceGroupRegistry:
    """Load (and cache) the registry from the default table path."""
    return _load_cached(str(default_table_path()))
