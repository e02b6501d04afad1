"""Line-pattern synthesis and rendering to fixed-length diffraction vectors.

A line pattern carries discrete (two-theta, intensity) peaks: intensities
are drawn per peak, multiplied by the powder Lorentz factor
1/(sin^2(theta) cos(theta)), and normalized so the strongest peak is 1.
Rendering convolves the peaks with a Gaussian of fixed FWHM onto a uniform
two-theta grid and rescales to a [0, 1] vector.

Every random draw comes from a stream derived from (seed, label,
lattice index, replicate index), so outputs do not depend on generation
order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .reflections import DEFAULT_WAVELENGTH, PeakPosition

__all__ = [
    "PatternConfig",
    "Provenance",
    "LinePattern",
    "RenderedPattern",
    "PatternError",
    "lorentz_factor",
    "sample_rng",
    "make_line_pattern",
    "line_from_peaks",
    "render",
]

# Gaussian support cutoff, in FWHM units; contributions beyond are below
# 2^-256 and invisible at any output precision
_SUPPORT_FWHM = 8.0

_FOUR_LN2 = 4.0 * math.log(2.0)


class PatternError(ValueError):
    """Invalid pattern configuration or peak data."""


@dataclass(frozen=True)
class PatternConfig:
    """Rendering recipe: window, sampling grid, peak width, intensity law."""

    wavelength: float = DEFAULT_WAVELENGTH
    two_theta_min: float = 10.0
    two_theta_max: float = 110.0
    n_points: int = 4000
    fwhm: float = 0.2
    intensity_law: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.two_theta_min < self.two_theta_max < 180.0:
            raise PatternError(
                f"window ({self.two_theta_min}, {self.two_theta_max}) must satisfy "
                "0 < min < max < 180"
            )
        if self.n_points < 2:
            raise PatternError(f"n_points={self.n_points} must be >= 2")
        if not self.fwhm > 0:
            raise PatternError(f"fwhm={self.fwhm} must be > 0")
        if not self.wavelength > 0:
            raise PatternError(f"wavelength={self.wavelength} must be > 0")
        if self.intensity_law != "uniform":
            raise PatternError(f"unsupported intensity law {self.intensity_law!r}")

    @property
    def window(self) -> tuple[float, float]:
        return (self.two_theta_min, self.two_theta_max)

    def grid(self) -> np.ndarray:
        return np.linspace(self.two_theta_min, self.two_theta_max, self.n_points)


@dataclass(frozen=True)
class Provenance:
    """Where a sample came from: lattice point and intensity replicate."""

    lattice_values: tuple[float, ...]
    lattice_index: int
    replicate: int


@dataclass(frozen=True)
class LinePattern:
    peaks: tuple[tuple[float, float], ...]  # (two_theta, intensity), ascending
    label: int
    provenance: Provenance


@dataclass(frozen=True)
class RenderedPattern:
    samples: np.ndarray  # float64, n_points values in [0, 1]
    label: int
    provenance: Provenance


def lorentz_factor(two_theta: float) -> float:
    """Powder Lorentz multiplier 1/(sin^2(theta) cos(theta)), theta = 2th/2."""
    if not 0.0 < two_theta < 180.0:
        raise PatternError(f"two_theta={two_theta} outside (0, 180)")
    theta = math.radians(two_theta) / 2.0
    denom = math.sin(theta) ** 2 * math.cos(theta)
    if denom <= 0.0:
        raise PatternError(f"Lorentz factor diverges at two_theta={two_theta}")
    return 1.0 / denom


def sample_rng(seed: int, label: int, lattice_index: int, replicate: int) -> np.random.Generator:
    """Per-sample random stream; parallel generation order cannot matter."""
    entropy = (int(seed) & 0xFFFFFFFFFFFFFFFF, int(label), int(lattice_index), int(replicate))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def make_line_pattern(
    positions: Sequence[PeakPosition] | Sequence[float],
    label: int,
    cfg: PatternConfig,
    rng: np.random.Generator,
    provenance: Provenance | None = None,
) -> LinePattern:
    """Draw one intensity per allowed position, apply Lorentz, normalize to 1."""
    tts = np.array(
        [p.two_theta if isinstance(p, PeakPosition) else float(p) for p in positions]
    )
    if tts.size == 0:
        raise PatternError("no peaks inside the window; skip this lattice point")
    if np.any(tts < cfg.two_theta_min) or np.any(tts > cfg.two_theta_max):
        raise PatternError("peak positions outside the configured window")
    draws = 1.0 - rng.random(tts.size)  # uniform on (0, 1]
    return _finish_line(tts, draws, label, provenance, apply_lorentz=True)


def line_from_peaks(
    peaks: Sequence[tuple[float, float]],
    label: int,
    apply_lorentz: bool,
    provenance: Provenance | None = None,
) -> LinePattern:
    """Line pattern from externally supplied (two_theta, intensity) pairs."""
    if not peaks:
        raise PatternError("empty peak list")
    tts = np.array([p[0] for p in peaks], dtype=float)
    intensities = np.array([p[1] for p in peaks], dtype=float)
    if np.any(intensities < 0):
        raise PatternError("negative peak intensity")
    if not np.any(intensities > 0):
        raise PatternError("all peak intensities are zero")
    return _finish_line(tts, intensities, label, provenance, apply_lorentz)


def _finish_line(tts, intensities, label, provenance, apply_lorentz):
    if apply_lorentz:
        theta = np.radians(tts) / 2.0
        intensities = intensities / (np.sin(theta) ** 2 * np.cos(theta))
    order = np.argsort(tts, kind="stable")
    tts, intensities = tts[order], intensities[order]
    intensities = intensities / intensities.max()
    if provenance is None:
        provenance = Provenance((), 0, 0)
    return LinePattern(
        peaks=tuple((float(t), float(i)) for t, i in zip(tts, intensities)),
        label=int(label),
        provenance=provenance,
    )


def render(lp: LinePattern, cfg: PatternConfig) -> RenderedPattern:
    """Gaussian-convolve a line pattern onto the uniform two-theta grid.

    samples[i] = sum over peaks of I * exp(-4 ln2 (grid[i] - pos)^2 / fwhm^2),
    rescaled so the largest sample is exactly 1 when any peak contributes.
    """
    grid = cfg.grid()
    samples = np.zeros(cfg.n_points)
    step = (cfg.two_theta_max - cfg.two_theta_min) / (cfg.n_points - 1)
    support = _SUPPORT_FWHM * cfg.fwhm
    inv_w2 = _FOUR_LN2 / (cfg.fwhm * cfg.fwhm)
    for pos, intensity in lp.peaks:
        lo = max(0, int(math.ceil((pos - support - cfg.two_theta_min) / step)))
        hi = min(cfg.n_points - 1, int(math.floor((pos + support - cfg.two_theta_min) / step)))
        if lo > hi:
            continue
        d = grid[lo : hi + 1] - pos
        samples[lo : hi + 1] += intensity * np.exp(-inv_w2 * d * d)
    peak = samples.max()
    if peak > 0.0:
        samples /= peak
    return RenderedPattern(samples=samples, label=lp.label, provenance=lp.provenance)
