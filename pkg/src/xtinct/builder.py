"""Dataset construction: mesh-grid generation, splits, and ingestion.

Balanced generation walks a uniform lattice grid per space group, draws
``patterns_per_lattice`` intensity sets per surviving lattice point, and
renders each to a fixed-length vector.  The imbalanced variant gives every
group its own range.  Ingestion accepts externally computed line patterns
(JSON lines) and pushes them through the same Lorentz/normalize/render
tail.  All randomness is keyed by (seed, group, lattice index, replicate),
so artifacts are byte-identical regardless of worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import artifact
from .classes import Family, family_by_name
from .patterns import (
    PatternConfig,
    Provenance,
    line_from_peaks,
    make_line_pattern,
    render,
    sample_rng,
)
from .reflections import OutOfSphereError, enumerate_peaks, two_theta
from .symmetry.registry import SpaceGroupRegistry, load_default_registry
from .symmetry.systems import lattice_from_free_params, system_of

__all__ = [
    "AxisSpec",
    "GridSpec",
    "SplitSpec",
    "BuildError",
    "BuildResult",
    "build_ulbd",
    "build_imbalanced",
    "ingest_line_patterns",
    "lattice_histogram",
    "read_override_file",
]

_SPLIT_SALT = 0x53504C54  # "SPLT"


class BuildError(ValueError):
    """Invalid grid, split, override, or ingestion input."""


@dataclass(frozen=True)
class AxisSpec:
    """Arithmetic sequence min, min+step, ... <= max (inclusive)."""

    min: float
    max: float
    step: float

    def __post_init__(self):
        if not self.min < self.max:
            raise BuildError(f"axis min {self.min} must be < max {self.max}")
        if not self.step > 0:
            raise BuildError(f"axis step {self.step} must be > 0")

    @property
    def count(self) -> int:
        span = (self.max - self.min) / self.step
        return int(span * (1.0 + 1e-12) + 1e-9) + 1

    def values(self) -> list[float]:
        return [self.min + i * self.step for i in range(self.count)]

    def as_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "step": self.step}


@dataclass(frozen=True)
class GridSpec:
    """Lattice mesh recipe: one AxisSpec per free parameter, plus overrides."""

    axes: Mapping[str, AxisSpec]
    patterns_per_lattice: int = 1
    overrides: Mapping[int, Mapping[str, AxisSpec]] = field(default_factory=dict)

    def __post_init__(self):
        if self.patterns_per_lattice < 1:
            raise BuildError("patterns_per_lattice must be >= 1")
        object.__setattr__(self, "axes", dict(self.axes))
        object.__setattr__(
            self, "overrides", {int(k): dict(v) for k, v in self.overrides.items()}
        )

    def axes_for(self, sg_number: int, family: Family) -> dict[str, AxisSpec]:
        base = dict(self.axes)
        merged = {**base, **self.overrides.get(sg_number, {})}
        missing = [p for p in family.free_params if p not in merged]
        if missing:
            raise BuildError(
                f"grid for group {sg_number} missing axes {missing}; "
                f"family {family.name} needs {list(family.free_params)}"
            )
        return {p: merged[p] for p in family.free_params}


@dataclass(frozen=True)
class SplitSpec:
    """train:test ratio, the unit held out, and the shuffling seed."""

    train_parts: int = 5
    test_parts: int = 1
    unit: str = "replicate"
    seed: int = 0

    def __post_init__(self):
        if self.train_parts < 1 or self.test_parts < 0:
            raise BuildError("split parts must be positive (test may be 0)")
        if self.unit not in ("replicate", "lattice-point"):
            raise BuildError(f"unknown split unit {self.unit!r}")

    @property
    def total_parts(self) -> int:
        return self.train_parts + self.test_parts

    def as_dict(self) -> dict:
        return {
            "train_parts": self.train_parts,
            "test_parts": self.test_parts,
            "unit": self.unit,
            "seed": self.seed,
        }


@dataclass
class BuildResult:
    train_path: Path
    test_path: Path
    n_train: int
    n_test: int
    per_group: dict[int, dict[str, int]]
    skipped: dict[int, list[int]]
    dropped_peaks: int = 0
    skipped_records: int = 0

    def as_dict(self) -> dict:
        return {
            "train_path": str(self.train_path),
            "test_path": str(self.test_path),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "per_group": {str(k): v for k, v in sorted(self.per_group.items())},
            "skipped_lattice_points": {
                str(k): v for k, v in sorted(self.skipped.items()) if v
            },
            "dropped_peaks": self.dropped_peaks,
            "skipped_records": self.skipped_records,
        }


def _split_rng(seed: int, a: int, b: int) -> np.random.Generator:
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF, _SPLIT_SALT, int(a), int(b))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _bresenham_counts(n_units: int, index: int, frac_num: int, frac_den: int) -> int:
    """How many of `n_units` go to test at position `index` so that totals
    track floor(total * frac) without drift."""
    lo = (index * n_units * frac_num) // frac_den
    hi = ((index + 1) * n_units * frac_num) // frac_den
    return hi - lo


@dataclass
class _GroupPlan:
    sg: int
    axes: dict[str, AxisSpec]
    lattice_values: list[tuple[float, ...]]
    peaks: list[list]  # allowed two-theta positions per surviving point
    surviving: list[int]
    skipped: list[int]
    test_mask: dict[tuple[int, int], bool]  # (lattice_index, replicate) -> test?


def _plan_group(
    sg: int,
    family: Family,
    grid: GridSpec,
    cfg: PatternConfig,
    split: SplitSpec,
    registry: SpaceGroupRegistry,
) -> _GroupPlan:
    g = registry[sg]
    axes = grid.axes_for(sg, family)
    axis_values = [axes[p].values() for p in family.free_params]
    lattice_values: list[tuple[float, ...]] = []
    idx = [0] * len(axis_values)
    # row-major cartesian product in free-parameter order
    def _product(level, prefix):
        if level == len(axis_values):
            lattice_values.append(tuple(prefix))
            return
        for v in axis_values[level]:
            _product(level + 1, prefix + [v])

    _product(0, [])
    system = system_of(sg)
    peaks, surviving, skipped = [], [], []
    for i, values in enumerate(lattice_values):
        lat = lattice_from_free_params(system, values)
        positions = enumerate_peaks(g, lat, cfg.window, cfg.wavelength)
        if positions:
            surviving.append(i)
            peaks.append([p.two_theta for p in positions])
        else:
            skipped.append(i)

    r = grid.patterns_per_lattice
    test_mask: dict[tuple[int, int], bool] = {}
    if split.unit == "replicate":
        for pos, lattice_index in enumerate(surviving):
            n_test = _bresenham_counts(r, pos, split.test_parts, split.total_parts)
            perm = _split_rng(split.seed, sg, lattice_index).permutation(r)
            chosen = set(int(x) for x in perm[:n_test])
            for rep in range(r):
                test_mask[(lattice_index, rep)] = rep in chosen
    else:  # lattice-point
        n_test_points = len(surviving) * split.test_parts // split.total_parts
        perm = _split_rng(split.seed, sg, 0).permutation(len(surviving))
        test_points = {surviving[int(x)] for x in perm[:n_test_points]}
        for lattice_index in surviving:
            for rep in range(r):
                test_mask[(lattice_index, rep)] = lattice_index in test_points
    return _GroupPlan(sg, axes, lattice_values, peaks, surviving, skipped, test_mask)


def _render_group(plan: _GroupPlan, grid: GridSpec, cfg: PatternConfig):
    """All rendered samples of one group, canonical order; returns
    (is_test, label, vector f32, lattice_index, replicate) tuples."""
    out = []
    for pos_idx, lattice_index in enumerate(plan.surviving):
        positions = plan.peaks[pos_idx]
        values = plan.lattice_values[lattice_index]
        for rep in range(grid.patterns_per_lattice):
            rng = sample_rng(cfg.seed, plan.sg, lattice_index, rep)
            lp = make_line_pattern(
                positions, plan.sg, cfg, rng, Provenance(values, lattice_index, rep)
            )
            rendered = render(lp, cfg)
            out.append(
                (
                    plan.test_mask[(lattice_index, rep)],
                    plan.sg,
                    rendered.samples.astype(np.float32),
                    lattice_index,
                    rep,
                )
            )
    return out


def _base_metadata(kind, family, grid, cfg, split):
    meta = {
        "format": {"name": "ULBD", "version": artifact.FORMAT_VERSION},
        "kind": kind,
        "pattern": {
            "wavelength": cfg.wavelength,
            "two_theta_min": cfg.two_theta_min,
            "two_theta_max": cfg.two_theta_max,
            "n_points": cfg.n_points,
            "fwhm": cfg.fwhm,
            "intensity_law": cfg.intensity_law,
            "seed": cfg.seed,
        },
        "split": split.as_dict(),
    }
    if family is not None:
        meta["family"] = family.name
    if grid is not None:
        meta["grid"] = {
            "axes": {p: ax.as_dict() for p, ax in grid.axes.items()},
            "patterns_per_lattice": grid.patterns_per_lattice,
            "overrides": {
                str(sg): {p: ax.as_dict() for p, ax in ov.items()}
                for sg, ov in grid.overrides.items()
            },
        }
    return meta


def build_ulbd(
    family: Family | str,
    grid: GridSpec,
    cfg: PatternConfig,
    split: SplitSpec,
    out: str | Path,
    registry: SpaceGroupRegistry | None = None,
    threads: int = 1,
) -> BuildResult:
    """Generate a balanced mesh-grid dataset and write train/test artifacts.

    Output files: ``<out>_train.ulbd`` and ``<out>_test.ulbd`` with their
    ``.meta.json`` sidecars.
    """
    fam = family_by_name(family) if isinstance(family, str) else family
    registry = registry or load_default_registry()
    missing = registry.missing_in_range(fam.sg_min, fam.sg_max)
    if missing:
        raise BuildError(f"registry missing groups {missing} of family {fam.name}")
    numbers = list(fam.numbers())

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        plans = list(
            pool.map(
                lambda sg: _plan_group(sg, fam, grid, cfg, split, registry), numbers
            )
        )
        rendered = list(pool.map(lambda p: _render_group(p, grid, cfg), plans))

    n_train = n_test = 0
    per_group: dict[int, dict[str, int]] = {}
    skipped: dict[int, list[int]] = {}
    for plan, samples in zip(plans, rendered):
        t = sum(1 for s in samples if s[0])
        per_group[plan.sg] = {"train": len(samples) - t, "test": t}
        skipped[plan.sg] = plan.skipped
        n_train += len(samples) - t
        n_test += t

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": out.parent / f"{out.name}_train.ulbd",
        "test": out.parent / f"{out.name}_test.ulbd",
    }
    counts = {"train": n_train, "test": n_test}
    writers = {
        role: artifact.ArtifactWriter(
            paths[role], counts[role], cfg.n_points, cfg.two_theta_min, cfg.two_theta_max
        )
        for role in ("train", "test")
    }
    provenance = {"train": [], "test": []}
    for plan, samples in zip(plans, rendered):
        for is_test, label, vec, lattice_index, rep in samples:
            role = "test" if is_test else "train"
            writers[role].add(label, vec)
            provenance[role].append([label, lattice_index, rep])
    for role, writer in writers.items():
        writer.close()
        meta = _base_metadata("ulbd", fam, grid, cfg, split)
        meta["role"] = role
        meta["groups"] = {
            str(plan.sg): {
                "axes": {p: ax.as_dict() for p, ax in plan.axes.items()},
                "lattice_points": len(plan.lattice_values),
                "skipped": plan.skipped,
                "samples": per_group[plan.sg][role],
            }
            for plan in plans
        }
        meta["counts"] = {
            "n_samples": counts[role],
            "per_group": {str(sg): per_group[sg][role] for sg in per_group},
        }
        meta["samples"] = provenance[role]
        meta["sibling"] = {r: paths[r].name for r in paths}
        artifact.write_metadata(meta, paths[role])

    return BuildResult(
        train_path=paths["train"],
        test_path=paths["test"],
        n_train=n_train,
        n_test=n_test,
        per_group=per_group,
        skipped={k: v for k, v in skipped.items()},
    )


def build_imbalanced(
    family: Family | str,
    base: GridSpec,
    per_group: Mapping[int, Mapping[str, AxisSpec]],
    cfg: PatternConfig,
    split: SplitSpec,
    out: str | Path,
    registry: SpaceGroupRegistry | None = None,
    threads: int = 1,
) -> BuildResult:
    """build_ulbd with a mandatory per-group range override for every group."""
    fam = family_by_name(family) if isinstance(family, str) else family
    per_group = {int(k): dict(v) for k, v in per_group.items()}
    missing = [sg for sg in fam.numbers() if sg not in per_group]
    if missing:
        raise BuildError(
            f"imbalanced build needs an override for every group of {fam.name}; "
            f"missing {missing}"
        )
    grid = GridSpec(
        axes=base.axes,
        patterns_per_lattice=base.patterns_per_lattice,
        overrides=per_group,
    )
    return build_ulbd(fam, grid, cfg, split, out, registry, threads)


def read_override_file(path: str | Path) -> dict[int, dict[str, AxisSpec]]:
    """Per-group ranges, one ``sg_number param min max step`` per line."""
    overrides: dict[int, dict[str, AxisSpec]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise BuildError(
                f"{path}:{lineno}: expected 'sg_number param min max step', got {raw!r}"
            )
        try:
            sg = int(fields[0])
            param = fields[1]
            ax = AxisSpec(float(fields[2]), float(fields[3]), float(fields[4]))
        except ValueError as exc:
            raise BuildError(f"{path}:{lineno}: {exc}") from exc
        overrides.setdefault(sg, {})[param] = ax
    if not overrides:
        raise BuildError(f"{path}: no overrides found")
    return overrides


def ingest_line_patterns(
    source: str | Path | Iterable[str],
    cfg: PatternConfig,
    apply_lorentz: bool,
    split: SplitSpec,
    out: str | Path,
) -> BuildResult:
    """Render externally computed line patterns into a dataset artifact.

    ``source`` is a JSON-lines stream: one object per line with fields
    ``label`` (int), ``kind`` ("q" or "two_theta"), and ``peaks`` (array of
    [position, intensity] pairs).  Peaks outside the window are dropped
    with a warning count; records with no surviving peak are skipped.
    """
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)

    records = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            label = int(obj["label"])
            kind = obj["kind"]
            peaks = [(float(p), float(i)) for p, i in obj["peaks"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise BuildError(f"ingest line {lineno}: bad record: {exc}") from exc
        if kind not in ("q", "two_theta"):
            raise BuildError(f"ingest line {lineno}: kind must be 'q' or 'two_theta'")
        if not peaks:
            raise BuildError(f"ingest line {lineno}: empty peak list")
        records.append((lineno, label, kind, peaks))
    if not records:
        raise BuildError("ingest source contains no records")

    dropped_peaks = 0
    skipped_records = 0
    prepared = []  # (label, record_index, line pattern)
    for record_index, (lineno, label, kind, peaks) in enumerate(records):
        converted = []
        for pos, inten in peaks:
            if kind == "q":
                try:
                    tt = two_theta(pos, cfg.wavelength)
                except OutOfSphereError:
                    dropped_peaks += 1
                    continue
                except ValueError as exc:
                    raise BuildError(f"ingest line {lineno}: {exc}") from exc
            else:
                tt = pos
            if cfg.two_theta_min <= tt <= cfg.two_theta_max:
                converted.append((tt, inten))
            else:
                dropped_peaks += 1
        if not converted or not any(i > 0 for _t, i in converted):
            skipped_records += 1
            continue
        lp = line_from_peaks(
            converted, label, apply_lorentz, Provenance((), record_index, 0)
        )
        prepared.append((label, record_index, lp))

    if not prepared:
        raise BuildError("no ingested record has peaks inside the window")

    # stratified split per label over record order
    by_label: dict[int, list[int]] = {}
    for i, (label, _ri, _lp) in enumerate(prepared):
        by_label.setdefault(label, []).append(i)
    is_test = [False] * len(prepared)
    for label, indices in sorted(by_label.items()):
        n_test = len(indices) * split.test_parts // split.total_parts
        perm = _split_rng(split.seed, label, 0).permutation(len(indices))
        for x in perm[:n_test]:
            is_test[indices[int(x)]] = True

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": out.parent / f"{out.name}_train.ulbd",
        "test": out.parent / f"{out.name}_test.ulbd",
    }
    counts = {"train": is_test.count(False), "test": is_test.count(True)}
    writers = {
        role: artifact.ArtifactWriter(
            paths[role], counts[role], cfg.n_points, cfg.two_theta_min, cfg.two_theta_max
        )
        for role in ("train", "test")
    }
    provenance = {"train": [], "test": []}
    per_group: dict[int, dict[str, int]] = {}
    for i, (label, record_index, lp) in enumerate(prepared):
        role = "test" if is_test[i] else "train"
        rendered = render(lp, cfg)
        writers[role].add(label, rendered.samples.astype(np.float32))
        provenance[role].append([label, record_index])
        per_group.setdefault(label, {"train": 0, "test": 0})[role] += 1

    result = BuildResult(
        train_path=paths["train"],
        test_path=paths["test"],
        n_train=counts["train"],
        n_test=counts["test"],
        per_group=per_group,
        skipped={},
        dropped_peaks=dropped_peaks,
        skipped_records=skipped_records,
    )
    for role, writer in writers.items():
        writer.close()
        meta = _base_metadata("ingest", None, None, cfg, split)
        meta["role"] = role
        meta["apply_lorentz"] = bool(apply_lorentz)
        meta["counts"] = {
            "n_samples": counts[role],
            "per_group": {str(k): v[role] for k, v in sorted(per_group.items())},
        }
        meta["ingest"] = {
            "dropped_peaks": dropped_peaks,
            "skipped_records": skipped_records,
        }
        meta["samples"] = provenance[role]
        meta["sibling"] = {r: paths[r].name for r in paths}
        artifact.write_metadata(meta, paths[role])
    return result


def lattice_histogram(meta: dict, bin_width: float) -> dict:
    """Lattice-point counts per parameter bin per space group.

    Bins are [i*w, (i+1)*w) anchored at zero; counts cover surviving
    (non-skipped) lattice points recorded in the dataset metadata.
    """
    if not bin_width > 0:
        raise BuildError(f"bin_width={bin_width} must be > 0")
    groups = meta.get("groups")
    if not groups:
        raise BuildError("metadata contains no lattice provenance")
    out: dict[str, dict[str, list[list[float]]]] = {}
    for sg, info in sorted(groups.items(), key=lambda kv: int(kv[0])):
        axes = {p: AxisSpec(**ax) for p, ax in info["axes"].items()}
        skipped = set(info.get("skipped", []))
        params = list(axes)
        value_lists = [axes[p].values() for p in params]
        counts: dict[str, dict[int, int]] = {p: {} for p in params}
        sizes = [len(v) for v in value_lists]
        total = math.prod(sizes)
        for flat in range(total):
            if flat in skipped:
                continue
            rem = flat
            coords = []
            for size in reversed(sizes):
                coords.append(rem % size)
                rem //= size
            coords.reverse()
            for p, vlist, ci in zip(params, value_lists, coords):
                b = int((vlist[ci] + 1e-9) / bin_width)
                counts[p][b] = counts[p].get(b, 0) + 1
        out[sg] = {
            p: [[round(b * bin_width, 12), n] for b, n in sorted(c.items())]
            for p, c in counts.items()
        }
    return {"bin_width": bin_width, "groups": out}
