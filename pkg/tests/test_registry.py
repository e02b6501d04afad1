import os

import pytest

from xtinct.symmetry import (
    GroupValidationError,
    SpaceGroup,
    TableLoadError,
    load_spacegroup_table,
    parse_symop,
    system_of,
    validate_group,
)

# general-position multiplicities from standard references
KNOWN_MULTIPLICITIES = {
    1: 1, 2: 2, 14: 4, 15: 8, 47: 8, 62: 8, 70: 32, 74: 16,
    88: 16, 96: 8, 136: 16, 139: 32, 141: 32, 142: 32,
    146: 9, 148: 18, 160: 18, 166: 36, 167: 36,
    168: 6, 186: 12, 191: 24, 194: 24,
    195: 12, 198: 12, 216: 96, 221: 48, 225: 192, 227: 192, 229: 96, 230: 96,
}


def test_full_coverage(registry):
    assert registry.numbers == tuple(range(1, 231))
    assert not registry.missing_in_range(75, 230)


def test_cubic_range_has_36_groups(registry):
    assert len(registry.in_range(195, 230)) == 36


@pytest.mark.parametrize("number,mult", sorted(KNOWN_MULTIPLICITIES.items()))
def test_known_multiplicities(registry, number, mult):
    assert registry[number].multiplicity == mult


def test_im3m_symbol_and_ops(registry):
    g = registry[229]
    assert g.hm_symbol == "Im-3m"
    assert g.multiplicity == 96


def test_every_group_contains_identity(registry):
    for g in registry:
        assert any(op.is_identity() for op in g.ops)


def test_validate_trivial_group():
    g = SpaceGroup(1, "P1", system_of(1), (parse_symop("x, y, z"),))
    validate_group(g)


def test_validate_fm3m(registry):
    g = registry[225]
    assert g.multiplicity == 192
    validate_group(g)


def test_closure_violation_detected(registry):
    g = registry[225]
    # drop a non-identity op: the set is no longer closed
    broken = SpaceGroup(225, g.hm_symbol, g.system, g.ops[:-1])
    with pytest.raises(GroupValidationError, match="closure"):
        validate_group(broken)


def test_missing_identity_detected(registry):
    g = registry[2]
    broken = SpaceGroup(2, g.hm_symbol, g.system, g.ops[1:])
    with pytest.raises(GroupValidationError):
        validate_group(broken)


def _write(tmp_path, text):
    p = tmp_path / "table.txt"
    p.write_text(text, encoding="utf-8")
    return p


def test_load_minimal_table(tmp_path):
    path = _write(tmp_path, "# comment\n1 P1\nx, y, z\n\n2 P-1\nx, y, z\n-x, -y, -z\n")
    reg = load_spacegroup_table(path)
    assert reg.numbers == (1, 2)
    assert reg[2].multiplicity == 2


def test_duplicate_number_rejected(tmp_path):
    path = _write(tmp_path, "1 P1\nx, y, z\n\n1 P1\nx, y, z\n")
    with pytest.raises(TableLoadError, match="duplicate"):
        load_spacegroup_table(path)


def test_unclosed_group_rejected(tmp_path):
    path = _write(tmp_path, "143 P3\nx, y, z\n-y, x-y, z\n")  # missing the inverse 3-fold
    with pytest.raises(TableLoadError, match="closure"):
        load_spacegroup_table(path)


def test_malformed_triplet_names_group(tmp_path):
    path = _write(tmp_path, "1 P1\nx, y, q\n")
    with pytest.raises(TableLoadError, match="group 1"):
        load_spacegroup_table(path)


def test_missing_file():
    with pytest.raises(TableLoadError):
        load_spacegroup_table("/no/such/table.txt")


def test_env_override(tmp_path, monkeypatch):
    from xtinct.symmetry import default_table_path

    path = _write(tmp_path, "1 P1\nx, y, z\n")
    monkeypatch.setenv("XTINCT_SG_TABLE", str(path))
    assert default_table_path() == path


def test_format_roundtrip_over_table(registry):
    # the canonical formatter must reproduce every shipped op exactly
    from xtinct.symmetry import format_symop

    for g in registry:
        for op in g.ops:
            assert parse_symop(format_symop(op)) == op
