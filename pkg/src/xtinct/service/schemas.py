"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..reflections import DEFAULT_WAVELENGTH


class AxisModel(BaseModel):
    min: float
    max: float
    step: float


class PatternModel(BaseModel):
    wavelength: float = DEFAULT_WAVELENGTH
    two_theta_min: float = 10.0
    two_theta_max: float = 110.0
    n_points: int = 4000
    fwhm: float = 0.2
    intensity_law: str = "uniform"
    seed: int = 0


class SplitModel(BaseModel):
    train_parts: int = 5
    test_parts: int = 1
    unit: str = "replicate"
    seed: int = 0


class ClassesRequest(BaseModel):
    family: str
    h_max: int = 8


class ClassEntry(BaseModel):
    index: int
    members: list[int]


class ClassesReport(BaseModel):
    family: str
    h_max: int
    n_groups: int
    n_classes: int
    classes: list[ClassEntry]
    class_of: dict[str, int]
    theoretical_topk_pct: dict[str, float]


class GenerateRequest(BaseModel):
    family: str
    axes: dict[str, AxisModel]
    patterns_per_lattice: int = 1
    overrides: dict[str, dict[str, AxisModel]] = Field(default_factory=dict)
    imbalanced: bool = False
    pattern: PatternModel = Field(default_factory=PatternModel)
    split: SplitModel = Field(default_factory=SplitModel)
    out: str
    threads: int = 1


class GenerateResponse(BaseModel):
    train_path: str
    test_path: str
    n_train: int
    n_test: int
    per_group: dict[str, dict[str, int]]
    skipped_lattice_points: dict[str, list[int]]
    dropped_peaks: int = 0
    skipped_records: int = 0


class IngestRequest(BaseModel):
    path: str | None = None
    records: list[str] | None = None
    apply_lorentz: bool = False
    pattern: PatternModel = Field(default_factory=PatternModel)
    split: SplitModel = Field(default_factory=SplitModel)
    out: str


class EvaluateRequest(BaseModel):
    train: str
    test: str
    neighbors: int = 5
    relabel_by_class: bool = False
    h_max: int = 8
    max_k: int = 5


class HistogramRequest(BaseModel):
    meta: str
    bin_width: float = 0.2


class SpaceGroupSummary(BaseModel):
    number: int
    hm_symbol: str
    system: str
    multiplicity: int


class SpaceGroupDetail(SpaceGroupSummary):
    ops: list[str]


class HealthResponse(BaseModel):
    status: str
    version: str
    n_spacegroups: int
