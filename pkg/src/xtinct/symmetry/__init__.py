from .symop import SymOp, SymOpError, SymOpParseError, parse_symop, format_symop
from .systems import (
    SYSTEMS,
    CrystalSystem,
    LatticeError,
    LatticeParams,
    lattice_from_free_params,
    system_by_name,
    system_of,
)
from .registry import (
    SG_TABLE_ENV,
    GroupValidationError,
    SpaceGroup,
    SpaceGroupRegistry,
    TableLoadError,
    default_table_path,
    load_default_registry,
    load_spacegroup_table,
    validate_group,
)

__all__ = [
    "SymOp", "SymOpError", "SymOpParseError", "parse_symop", "format_symop",
    "SYSTEMS", "CrystalSystem", "LatticeError", "LatticeParams",
    "lattice_from_free_params", "system_by_name", "system_of",
    "SG_TABLE_ENV", "GroupValidationError", "SpaceGroup", "SpaceGroupRegistry",
    "TableLoadError", "default_table_path", "load_default_registry",
    "load_spacegroup_table", "validate_group",
]
