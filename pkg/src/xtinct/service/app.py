"""HTTP service wrapping the core package.

One registry is loaded at startup and shared read-only across requests.
Domain validation failures map to 400; everything else surfaces as 500.
File-writing endpoints (generate, ingest) write on the server's
filesystem, which is the client's filesystem when the CLI drives the
service in-process.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
import numpy as np

from ..artifact import Dataset, DatasetFormatError, read_dataset, read_metadata
from ..builder import (
    AxisSpec,
    BuildError,
    GridSpec,
    SplitSpec,
    build_imbalanced,
    build_ulbd,
    ingest_line_patterns,
    lattice_histogram,
)
from ..classes import ClassesError, compute_classes, family_by_name, theoretical_topk
from ..evaluate import EvalError, evaluation_report, knn_classify
from ..patterns import PatternConfig, PatternError
from ..reflections import ReflectionError
from ..symmetry.registry import TableLoadError, load_default_registry, load_spacegroup_table
from ..symmetry.systems import LatticeError
from . import schemas

_DOMAIN_ERRORS = (
    BuildError,
    ClassesError,
    EvalError,
    PatternError,
    ReflectionError,
    LatticeError,
    DatasetFormatError,
    TableLoadError,
)


def _axis(spec: schemas.AxisModel) -> AxisSpec:
    return AxisSpec(spec.min, spec.max, spec.step)


def _pattern(cfg: schemas.PatternModel) -> PatternConfig:
    return PatternConfig(**cfg.model_dump())


def _split(cfg: schemas.SplitModel) -> SplitSpec:
    return SplitSpec(**cfg.model_dump())


def classes_report(registry, family: str, h_max: int) -> dict:
    partition = compute_classes(family, registry, h_max)
    return {
        "family": partition.family,
        "h_max": partition.h_max,
        "n_groups": partition.n_groups,
        "n_classes": len(partition.classes),
        "classes": [
            {"index": i, "members": list(c.members)}
            for i, c in enumerate(partition.classes)
        ],
        "class_of": {str(sg): idx for sg, idx in sorted(partition.class_map().items())},
        "theoretical_topk_pct": {
            str(k): 100.0 * theoretical_topk(partition, k) for k in range(1, 6)
        },
    }


def create_app(table_path: str | os.PathLike | None = None) -> FastAPI:
    app = FastAPI(title="xtinct", version=__version__)
    app.state.registry = (
        load_spacegroup_table(table_path) if table_path else load_default_registry()
    )

    @app.exception_handler(ValueError)
    async def _domain_error(request: Request, exc: ValueError):
        status = 400 if isinstance(exc, _DOMAIN_ERRORS) else 500
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(
            status="ok", version=__version__, n_spacegroups=len(app.state.registry)
        )

    @app.get("/spacegroups", response_model=list[schemas.SpaceGroupSummary])
    def spacegroups(family: str | None = None):
        registry = app.state.registry
        groups = list(registry)
        if family:
            fam = family_by_name(family)
            groups = [g for g in groups if g.number in fam]
        return [
            schemas.SpaceGroupSummary(
                number=g.number,
                hm_symbol=g.hm_symbol,
                system=g.system.name,
                multiplicity=g.multiplicity,
            )
            for g in groups
        ]

    @app.get("/spacegroups/{number}", response_model=schemas.SpaceGroupDetail)
    def spacegroup_detail(number: int):
        registry = app.state.registry
        if number not in registry:
            return JSONResponse(
                status_code=404, content={"detail": f"space group {number} not loaded"}
            )
        g = registry[number]
        return schemas.SpaceGroupDetail(
            number=g.number,
            hm_symbol=g.hm_symbol,
            system=g.system.name,
            multiplicity=g.multiplicity,
            ops=[str(op) for op in g.ops],
        )

    @app.post("/classes", response_model=schemas.ClassesReport)
    def classes(req: schemas.ClassesRequest):
        return classes_report(app.state.registry, req.family, req.h_max)

    @app.post("/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        grid = GridSpec(
            axes={p: _axis(a) for p, a in req.axes.items()},
            patterns_per_lattice=req.patterns_per_lattice,
            overrides={
                int(sg): {p: _axis(a) for p, a in ov.items()}
                for sg, ov in req.overrides.items()
            },
        )
        kwargs = dict(
            cfg=_pattern(req.pattern),
            split=_split(req.split),
            out=req.out,
            registry=app.state.registry,
            threads=req.threads,
        )
        if req.imbalanced:
            result = build_imbalanced(
                req.family, grid, grid.overrides, **kwargs
            )
        else:
            result = build_ulbd(req.family, grid, **kwargs)
        return result.as_dict()

    @app.post("/ingest", response_model=schemas.GenerateResponse)
    def ingest(req: schemas.IngestRequest):
        if (req.path is None) == (req.records is None):
            raise BuildError("provide exactly one of 'path' or 'records'")
        source = req.path if req.path is not None else req.records
        result = ingest_line_patterns(
            source, _pattern(req.pattern), req.apply_lorentz, _split(req.split), req.out
        )
        return result.as_dict()

    @app.post("/evaluate")
    def evaluate(req: schemas.EvaluateRequest):
        train = read_dataset(req.train)
        test = read_dataset(req.test)
        report = {"train": req.train, "test": req.test, "neighbors": req.neighbors}
        if req.relabel_by_class:
            # classify on class labels directly so votes pool within a class
            meta = read_metadata(req.train)
            family = meta.get("family")
            if not family:
                raise EvalError("relabel_by_class needs a dataset with family metadata")
            cmap = compute_classes(family, app.state.registry, req.h_max).class_map()

            def _relabeled(ds: Dataset) -> Dataset:
                try:
                    labels = np.array(
                        [cmap[int(l)] for l in ds.labels], dtype=np.uint16
                    )
                except KeyError as exc:
                    raise EvalError(
                        f"label {exc.args[0]} outside family {family}"
                    ) from None
                return Dataset(
                    labels=labels,
                    data=ds.data,
                    two_theta_min=ds.two_theta_min,
                    two_theta_max=ds.two_theta_max,
                )

            train, test = _relabeled(train), _relabeled(test)
            report["relabeled_by_class"] = {"family": family, "h_max": req.h_max}
        predictions = knn_classify(train, test, req.neighbors)
        report.update(evaluation_report(predictions, req.max_k))
        return report

    @app.post("/histogram")
    def histogram(req: schemas.HistogramRequest):
        meta = read_metadata(req.meta)
        return lattice_histogram(meta, req.bin_width)

    return app
