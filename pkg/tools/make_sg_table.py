#!/usr/bin/env python3
"""Generate the shipped space-group general-position table.

Decodes concise (Hall) space-group symbols for the 230 standard settings
into full operator lists, validates them hard (group closure, expected
multiplicity per crystal class and centering, centering-translation
content), optionally cross-checks systematic absences against an
independent reflection-condition table, and writes the plain-text data
file consumed by xtinct.symmetry.registry.

Usage:
    python tools/make_sg_table.py --hall-source <symbols.py> \
        [--check-conditions <space_groups.py>] [--out <spacegroups.txt>]

The Hall-symbol table is read from a file containing a HALL_STR assignment
(classic concise-symbol listing, one "<number>[:<setting>] <hall>" pair per
line).  Standard settings chosen: unique axis b / cell choice 1 for
monoclinic, hexagonal (obverse) axes for rhombohedral groups, origin
choice 2 where two origins exist.
"""

from __future__ import annotations

import argparse
import ast
import importlib.util
import re
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from xtinct.symmetry.symop import SymOp, format_symop  # noqa: E402
from xtinct.symmetry.registry import (  # noqa: E402
    SpaceGroup,
    validate_group,
)
from xtinct.symmetry.systems import system_of  # noqa: E402

# ---------------------------------------------------------------- rotations

ID3 = ((1, 0, 0), (0, 1, 0), (0, 0, 1))

# Seitz rotation matrices for principal axes, keyed by (order, axis)
PRINCIPAL = {
    (1, "z"): ID3,
    (2, "z"): ((-1, 0, 0), (0, -1, 0), (0, 0, 1)),
    (3, "z"): ((0, -1, 0), (1, -1, 0), (0, 0, 1)),
    (4, "z"): ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    (6, "z"): ((1, -1, 0), (1, 0, 0), (0, 0, 1)),
    (2, "x"): ((1, 0, 0), (0, -1, 0), (0, 0, -1)),
    (3, "x"): ((1, 0, 0), (0, 0, -1), (0, 1, -1)),
    (4, "x"): ((1, 0, 0), (0, 0, -1), (0, 1, 0)),
    (6, "x"): ((1, 0, 0), (0, 1, -1), (0, 1, 0)),
    (2, "y"): ((-1, 0, 0), (0, 1, 0), (0, 0, -1)),
    (3, "y"): ((-1, 0, 1), (0, 1, 0), (-1, 0, 0)),
    (4, "y"): ((0, 0, 1), (0, 1, 0), (-1, 0, 0)),
    (6, "y"): ((0, 0, 1), (0, 1, 0), (-1, 0, 1)),
}

# Two-fold axes along face diagonals, relative to the preceding axis
DIAGONAL = {
    ("'", "z"): ((0, -1, 0), (-1, 0, 0), (0, 0, -1)),
    ('"', "z"): ((0, 1, 0), (1, 0, 0), (0, 0, -1)),
    ("'", "x"): ((-1, 0, 0), (0, 0, -1), (0, -1, 0)),
    ('"', "x"): ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    ("'", "y"): ((0, 0, -1), (0, -1, 0), (-1, 0, 0)),
    ('"', "y"): ((0, 0, 1), (0, -1, 0), (1, 0, 0)),
}

BODY_DIAGONAL = ((0, 0, 1), (1, 0, 0), (0, 1, 0))  # 3-fold about [111]

# translation letters, in twelfths
T_LETTERS = {
    "a": (6, 0, 0),
    "b": (0, 6, 0),
    "c": (0, 0, 6),
    "n": (6, 6, 6),
    "u": (3, 0, 0),
    "v": (0, 3, 0),
    "w": (0, 0, 3),
    "d": (3, 3, 3),
}

CENTERING = {
    "P": [(0, 0, 0)],
    "A": [(0, 0, 0), (0, 6, 6)],
    "B": [(0, 0, 0), (6, 0, 6)],
    "C": [(0, 0, 0), (6, 6, 0)],
    "I": [(0, 0, 0), (6, 6, 6)],
    "R": [(0, 0, 0), (8, 4, 4), (4, 8, 8)],
    "F": [(0, 0, 0), (0, 6, 6), (6, 0, 6), (6, 6, 0)],
}

CENTERING_FACTOR = {"P": 1, "A": 2, "B": 2, "C": 2, "I": 2, "R": 3, "F": 4}

# point-group order by space-group number range (crystal class)
_PG_ORDER_RANGES = [
    (1, 1, 1), (2, 2, 2), (3, 5, 2), (6, 9, 2), (10, 15, 4),
    (16, 24, 4), (25, 46, 4), (47, 74, 8),
    (75, 80, 4), (81, 82, 4), (83, 88, 8), (89, 98, 8), (99, 110, 8),
    (111, 122, 8), (123, 142, 16),
    (143, 146, 3), (147, 148, 6), (149, 155, 6), (156, 161, 6), (162, 167, 12),
    (168, 173, 6), (174, 174, 6), (175, 176, 12), (177, 182, 12),
    (183, 186, 12), (187, 190, 12), (191, 194, 24),
    (195, 199, 12), (200, 206, 24), (207, 214, 24), (215, 220, 24),
    (221, 230, 48),
]


def point_group_order(sgnum: int) -> int:
    for lo, hi, order in _PG_ORDER_RANGES:
        if lo <= sgnum <= hi:
            return order
    raise ValueError(sgnum)


def expected_multiplicity(sgnum: int, lattice_letter: str) -> int:
    return point_group_order(sgnum) * CENTERING_FACTOR[lattice_letter]


# ---------------------------------------------------------------- hall parse

TOKEN_RE = re.compile(r"^(-?)([1-6])([1-5]?)([xyz'\"*]?)([abcnuvwd]*)$")


def decode_hall(hall: str) -> tuple[str, list[SymOp]]:
    """Decode a Hall symbol into (lattice letter, full operator list)."""
    hall = hall.strip()
    shift = (0, 0, 0)
    m = re.search(r"\(([-\d ]+)\)\s*$", hall)
    if m:
        parts = m.group(1).split()
        if len(parts) != 3:
            raise ValueError(f"bad origin shift in {hall!r}")
        shift = tuple(int(p) for p in parts)
        hall = hall[: m.start()].strip()

    tokens = hall.split()
    latt = tokens.pop(0)
    centrosymmetric = latt.startswith("-")
    lattice_letter = latt.lstrip("-")
    if lattice_letter not in CENTERING:
        raise ValueError(f"unknown lattice symbol {latt!r} in {hall!r}")

    generators = [SymOp.identity()]
    prev_order = 0
    prev_axis = "z"
    for pos, tok in enumerate(tokens):
        tm = TOKEN_RE.match(tok)
        if not tm:
            raise ValueError(f"cannot parse rotation token {tok!r} in {hall!r}")
        improper = tm.group(1) == "-"
        order = int(tm.group(2))
        screw = int(tm.group(3)) if tm.group(3) else 0
        axis = tm.group(4)
        letters = tm.group(5)

        if not axis:
            if order == 1:
                axis = "z"  # irrelevant for the identity rotation
            elif pos == 0:
                axis = "z"
            elif pos == 1 and order == 2:
                axis = "x" if prev_order in (2, 4) else "'"
            elif pos == 2 and order == 3:
                axis = "*"
            else:
                raise ValueError(f"no default axis for token {tok!r} in {hall!r}")

        if order == 1:
            rot = ID3
        elif axis in ("'", '"'):
            if order != 2:
                raise ValueError(f"diagonal axis only valid for 2-folds: {tok!r}")
            rot = DIAGONAL[(axis, prev_axis)]
        elif axis == "*":
            if order != 3:
                raise ValueError(f"body diagonal only valid for 3-folds: {tok!r}")
            rot = BODY_DIAGONAL
        else:
            rot = PRINCIPAL[(order, axis)]

        if improper:
            rot = tuple(tuple(-e for e in row) for row in rot)

        t12 = [0, 0, 0]
        for letter in letters:
            vec = T_LETTERS[letter]
            t12 = [a + b for a, b in zip(t12, vec)]
        if screw:
            if axis not in ("x", "y", "z"):
                raise ValueError(f"screw subscript on non-principal axis: {tok!r}")
            step = 12 * screw // order
            idx = "xyz".index(axis)
            t12[idx] += step

        generators.append(SymOp.from_t12(rot, t12))
        if axis in ("x", "y", "z"):
            prev_axis = axis
        prev_order = order

    if centrosymmetric:
        inv = tuple(tuple(-e for e in row) for row in ID3)
        generators.append(SymOp.from_t12(inv, (0, 0, 0)))
    for cen in CENTERING[lattice_letter][1:]:
        generators.append(SymOp.from_t12(ID3, cen))

    if any(shift):
        # conjugate each generator by the origin shift: x' = x + v/12
        v = tuple(Fraction(s, 12) for s in shift)
        moved = []
        for g in generators:
            r = g.rotation
            rv = tuple(sum(r[i][k] * v[k] for k in range(3)) for i in range(3))
            t = tuple(g.translation[i] + v[i] - rv[i] for i in range(3))
            moved.append(SymOp(r, t))
        generators = moved

    ops = _close(generators)
    return lattice_letter, ops


def _close(generators: list[SymOp]) -> list[SymOp]:
    seen = {}
    for g in generators:
        seen[(g.rotation, g.translation)] = g
    frontier = list(seen.values())
    while frontier:
        new = []
        for a in list(seen.values()):
            for b in frontier:
                for prod in (a.compose(b), b.compose(a)):
                    key = (prod.rotation, prod.translation)
                    if key not in seen:
                        seen[key] = prod
                        new.append(prod)
        frontier = new
        if len(seen) > 230:
            raise ValueError("closure exploded; bad generators")
    ops = sorted(
        seen.values(),
        key=lambda o: (not o.is_identity(), o.rotation, o.t12),
    )
    return ops


# ---------------------------------------------------------------- sources

def load_assignment(path: Path, name: str):
    """Evaluate one top-level literal assignment from a python source file."""
    tree = ast.parse(path.read_text(encoding="utf-8", errors="replace"))
    for node in ast.walk(tree):
        if isinstance(node, ast.Assign):
            for target in node.targets:
                if isinstance(target, ast.Name) and target.id == name:
                    try:
                        return ast.literal_eval(node.value)
                    except ValueError:
                        continue
    raise KeyError(f"no literal assignment to {name} in {path}")


SETTING_PREFERENCE = ("", ":b", ":b1", ":h", ":2", ":1")


def pick_standard_settings(hall_str: str) -> dict[int, str]:
    """Choose one Hall symbol per group number from a concise-symbol listing."""
    entries: dict[str, str] = {}
    order: list[str] = []
    for line in hall_str.splitlines():
        line = line.strip()
        if not line:
            continue
        key, hall = line.split(None, 1)
        entries[key] = hall.strip()
        order.append(key)
    chosen: dict[int, str] = {}
    for num in range(1, 231):
        for suffix in SETTING_PREFERENCE:
            key = f"{num}{suffix}"
            if key in entries:
                chosen[num] = entries[key]
                break
        else:
            for key in order:
                if key.split(":")[0] == str(num):
                    chosen[num] = entries[key]
                    break
            else:
                raise KeyError(f"no Hall symbol for group {num}")
    return chosen


def modern_hm(num: int, raw: str) -> str:
    """Compact modern short HM symbol from a spaced listing entry."""
    fields = raw.split()
    if (200 <= num <= 206) or (221 <= num <= 230):
        # centrosymmetric cubic: secondary-direction 3 reads -3 post-1983
        assert fields[2] == "3", (num, raw)
        fields[2] = "-3"
    return "".join(fields)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hall-source", required=True, type=Path)
    ap.add_argument("--check-conditions", type=Path, default=None)
    ap.add_argument(
        "--out",
        type=Path,
        default=Path(__file__).resolve().parents[1]
        / "src/xtinct/symmetry/data/spacegroups.txt",
    )
    ap.add_argument("--hmax", type=int, default=4, help="box size for condition check")
    args = ap.parse_args()

    hall_str = load_assignment(args.hall_source, "HALL_STR")
    hm_list = load_assignment(args.hall_source, "pstr_spacegroup")
    # first 230 entries are groups 1-230; any extras are alternate settings
    hm_list = hm_list[:230]
    halls = pick_standard_settings(hall_str)

    groups: dict[int, SpaceGroup] = {}
    for num in range(1, 231):
        latt, ops = decode_hall(halls[num])
        hm = modern_hm(num, hm_list[num - 1])
        assert hm[0] == latt, (num, hm, latt)
        expect = expected_multiplicity(num, latt)
        if len(ops) != expect:
            raise SystemExit(
                f"group {num} ({hm}, hall {halls[num]!r}): got {len(ops)} ops, "
                f"expected {expect}"
            )
        g = SpaceGroup(num, hm, system_of(num), tuple(ops))
        validate_group(g)
        groups[num] = g
    print(f"decoded and validated {len(groups)} groups")

    if args.check_conditions:
        mismatches = check_reflection_conditions(groups, args.check_conditions, args.hmax)
        print(f"reflection-condition cross-check: {mismatches} disagreeing groups")

    lines = [
        "# Space-group general positions, standard settings.",
        "# Monoclinic: unique axis b, cell choice 1.  Rhombohedral groups:",
        "# hexagonal (obverse) axes.  Two-origin groups: origin choice 2.",
        "# Block: '<number> <HM symbol>' followed by one coordinate triplet",
        "# per line; all positions listed, centering included.",
        "",
    ]
    for num in range(1, 231):
        g = groups[num]
        lines.append(f"{g.number} {g.hm_symbol}")
        for op in g.ops:
            lines.append(format_symop(op))
        lines.append("")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(lines), encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def check_reflection_conditions(groups, conditions_path: Path, hmax: int) -> int:
    """Compare phase-criterion extinctions against an independent rule table."""
    spec = importlib.util.spec_from_file_location("refconds", conditions_path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    rc = mod.ReflectionCondition
    funcs = {}
    for name in dir(rc):
        m = re.match(r"group(\d+)_", name)
        if m:
            funcs[int(m.group(1))] = getattr(rc, name)

    from xtinct.reflections import is_extinct
    from xtinct.symmetry.systems import system_of as _so  # noqa: F401

    bad_groups = 0
    for num, g in groups.items():
        fn = funcs.get(num)
        if fn is None:
            continue
        validated = "validated" in (fn.__doc__ or "")
        diffs = []
        for h in range(-hmax, hmax + 1):
            for k in range(-hmax, hmax + 1):
                for l in range(-hmax, hmax + 1):
                    if h == k == l == 0:
                        continue
                    mine = not is_extinct(g, (h, k, l))
                    theirs = bool(fn(h, k, l))
                    if mine != theirs:
                        diffs.append(((h, k, l), mine, theirs))
        if diffs:
            bad_groups += 1
            tag = "VALIDATED" if validated else "unvalidated"
            print(
                f"  group {num} ({g.hm_symbol}) [{tag}]: {len(diffs)} differing hkl, "
                f"first {diffs[0]}"
            )
    return bad_groups


if __name__ == "__main__":
    raise SystemExit(main())
