"""Uniform grids, normalized joint distributions and coincidence-count ingestion.

Probabilities are stored per grid cell (already integrated over the cell),
never as densities.  Lengths are in mm and momenta in mm^-1 throughout; the
wavelength in file metadata is given in nm and converted on the way in.
"""

from __future__ import annotations

import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

NORM_TOL = 1e-9
UNIFORM_RTOL = 1e-6


class AxisKind(str, Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


class PlaneKind(str, Enum):
    """Detection plane of a coincidence scan."""

    NEAR = "near"
    FAR = "far"

    @property
    def axis_kind(self) -> AxisKind:
        return AxisKind.POSITION if self is PlaneKind.NEAR else AxisKind.MOMENTUM


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Axis:
    """Uniform axis of cell centers ``start + i*step`` for ``i < count``."""

    kind: AxisKind
    start: float
    step: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "kind", AxisKind(self.kind))
        if not (math.isfinite(self.start) and math.isfinite(self.step)):
            raise ValueError("axis start and step must be finite")
        if self.step <= 0:
            raise ValueError(f"axis step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"axis count must be a positive integer, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @property
    def coords(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        """Center of the last cell."""
        return self.start + self.step * (self.count - 1)

    @property
    def lower_edge(self) -> float:
        return self.start - 0.5 * self.step

    @property
    def upper_edge(self) -> float:
        return self.stop + 0.5 * self.step

    def shifted(self, offset: float) -> "Axis":
        return Axis(self.kind, self.start + offset, self.step, self.count)


@dataclass(frozen=True)
class OpticsConfig:
    """Detection optics: imaging magnification and Fourier-lens geometry.

    Defaults are the values of the reference two-photon slit experiment.
    ``flip`` negates far-field momenta for setups whose detector axis points
    against the momentum axis.
    """

    magnification: float = 3.6
    focal_mm: float = 300.0
    wavelength_nm: float = 810.0
    flip: bool = False

    def __post_init__(self):
        for name in ("magnification", "focal_mm", "wavelength_nm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and strictly positive, got {v}")

    @property
    def f_lambda_mm2(self) -> float:
        return self.focal_mm * self.wavelength_nm * 1e-6


def convert_detector_coords(rho, kind, optics: OpticsConfig):
    """Map detector displacement ``rho`` (mm) to x (mm) or p (mm^-1).

    Near field: ``x = rho / M``.  Far field: ``p = rho / (f * lambda)`` with
    lambda in mm.  Works elementwise on arrays.
    """
    kind = PlaneKind(kind)
    rho_arr = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho_arr)):
        raise ValueError("detector positions must be finite")
    if kind is PlaneKind.NEAR:
        out = rho_arr / optics.magnification
    else:
        out = rho_arr / optics.f_lambda_mm2
        if optics.flip:
            out = -out
    return float(out) if np.ndim(out) == 0 else out


def detector_coords_from(coord, kind, optics: OpticsConfig):
    """Inverse of :func:`convert_detector_coords`."""
    kind = PlaneKind(kind)
    c = np.asarray(coord, dtype=float)
    if kind is PlaneKind.NEAR:
        out = c * optics.magnification
    else:
        out = c * optics.f_lambda_mm2
        if optics.flip:
            out = -out
    return float(out) if np.ndim(out) == 0 else out


def _check_uniform(values: np.ndarray, name: str) -> None:
    if values.size < 2:
        raise ValueError(f"{name}: need at least 2 grid positions")
    diffs = np.diff(values)
    if np.any(diffs <= 0):
        raise ValueError(f"{name}: positions must be strictly increasing")
    mean = (values[-1] - values[0]) / (values.size - 1)
    if np.max(np.abs(diffs - mean)) > UNIFORM_RTOL * abs(mean):
        raise ValueError(f"{name}: positions are not uniformly spaced")


@dataclass(frozen=True, eq=False)
class CountsMap:
    """Two-dimensional coincidence-count scan in detector coordinates."""

    rho1: np.ndarray
    rho2: np.ndarray
    counts: np.ndarray
    kind: PlaneKind
    optics: OpticsConfig = field(default_factory=OpticsConfig)

    def __post_init__(self):
        object.__setattr__(self, "kind", PlaneKind(self.kind))
        rho1 = _frozen(self.rho1)
        rho2 = _frozen(self.rho2)
        counts = np.asarray(self.counts)
        if counts.dtype.kind == "f":
            if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
                raise ValueError("counts must be integers")
        counts = _frozen(counts, dtype=np.int64)
        if counts.shape != (rho1.size, rho2.size):
            raise ValueError(
                f"counts shape {counts.shape} does not match positions "
                f"({rho1.size}, {rho2.size})"
            )
        if np.any(counts < 0):
            raise ValueError("negative counts")
        if counts.sum() <= 0:
            raise ValueError("empty map")
        _check_uniform(rho1, "rho1")
        _check_uniform(rho2, "rho2")
        object.__setattr__(self, "rho1", rho1)
        object.__setattr__(self, "rho2", rho2)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def with_counts(self, counts) -> "CountsMap":
        return CountsMap(self.rho1, self.rho2, counts, self.kind, self.optics)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Cell probabilities over a pair of axes of the same kind."""

    axis1: Axis
    axis2: Axis
    probs: np.ndarray

    def __post_init__(self):
        if self.axis1.kind != self.axis2.kind:
            raise ValueError("joint axes must share a kind")
        probs = _frozen(self.probs)
        if probs.shape != (self.axis1.count, self.axis2.count):
            raise ValueError(
                f"probs shape {probs.shape} does not match axes "
                f"({self.axis1.count}, {self.axis2.count})"
            )
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, expected 1")
        object.__setattr__(self, "probs", probs)

    @property
    def kind(self) -> AxisKind:
        return self.axis1.kind

    @classmethod
    def from_weights(cls, axis1: Axis, axis2: Axis, weights) -> "JointDistribution":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights carry no mass")
        return cls(axis1, axis2, w / total)


@dataclass(frozen=True, eq=False)
class Density:
    """Per-bin probabilities on one axis."""

    axis: Axis
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.shape != (self.axis.count,):
            raise ValueError(f"probs length {probs.size} does not match axis count {self.axis.count}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, expected 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_weights(cls, axis: Axis, weights) -> "Density":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights carry no mass")
        return cls(axis, w / total)


def _axis_from_positions(coords: np.ndarray, kind: AxisKind) -> Axis:
    step = (coords[-1] - coords[0]) / (coords.size - 1)
    return Axis(kind, float(coords[0]), float(step), coords.size)


def normalize_counts(m: CountsMap) -> JointDistribution:
    """Divide counts by their total and convert both axes to x or p."""
    total = m.counts.sum()
    if total <= 0:
        raise ValueError("empty map")
    c1 = np.asarray(convert_detector_coords(m.rho1, m.kind, m.optics))
    c2 = np.asarray(convert_detector_coords(m.rho2, m.kind, m.optics))
    probs = m.counts / total
    if c1[-1] < c1[0]:
        c1, probs = c1[::-1], probs[::-1, :]
    if c2[-1] < c2[0]:
        c2, probs = c2[::-1], probs[:, ::-1]
    kind = m.kind.axis_kind
    return JointDistribution(
        _axis_from_positions(c1, kind), _axis_from_positions(c2, kind), probs
    )


def marginal(j: JointDistribution, which: str = "first") -> Density:
    if which == "first":
        return Density(j.axis1, j.probs.sum(axis=1))
    if which == "second":
        return Density(j.axis2, j.probs.sum(axis=0))
    raise ValueError(f"which must be 'first' or 'second', got {which!r}")


def variance_of(d: Density) -> float:
    """Variance over bin centers; the second moment is taken about the mean."""
    c = d.axis.coords
    mean = float(np.dot(d.probs, c))
    return float(np.dot(d.probs, (c - mean) ** 2))


def mean_of(d: Density) -> float:
    return float(np.dot(d.probs, d.axis.coords))


# --- coincidence CSV -----------------------------------------------------

_HEADER = ["rho1_mm", "rho2_mm", "counts"]
_FLOAT_KEYS = ("magnification", "focal_mm", "wavelength_nm")


def load_coincidence_csv(path) -> CountsMap:
    """Read a coincidence-count file.

    The file carries optional ``# key=value`` comment lines, a header
    ``rho1_mm,rho2_mm,counts`` and one row per grid cell.  The grid must be
    complete and rectangular.
    """
    meta: dict[str, str] = {}
    header_line = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if [h.strip() for h in text.split(",")] != _HEADER:
                raise ValueError(f"line {lineno}: expected header {','.join(_HEADER)}")
            header_line = lineno
            break
    if header_line is None:
        raise ValueError("missing header line")

    if "kind" not in meta:
        raise ValueError("missing metadata key: kind")
    kind = PlaneKind(meta["kind"])
    if meta.get("units", "mm") != "mm":
        raise ValueError(f"unsupported units {meta['units']!r}; only mm is accepted")
    required = ("magnification",) if kind is PlaneKind.NEAR else ("focal_mm", "wavelength_nm")
    missing = [k for k in required if k not in meta]
    if missing:
        raise ValueError(f"missing metadata keys: {', '.join(missing)}")
    defaults = OpticsConfig()
    optics = OpticsConfig(
        **{k: float(meta[k]) if k in meta else getattr(defaults, k) for k in _FLOAT_KEYS},
        flip=meta.get("flip", "false").lower() in ("1", "true", "yes"),
    )

    try:
        with warnings.catch_warnings():
            # an empty body is reported below as "no data rows"
            warnings.simplefilter("ignore", UserWarning)
            pos = np.loadtxt(path, delimiter=",", comments="#", skiprows=header_line,
                             usecols=(0, 1), dtype=float, ndmin=2)
            raw = np.loadtxt(path, delimiter=",", comments="#", skiprows=header_line,
                             usecols=(2,), dtype=str, ndmin=1)
        # integer parsing rejects fractional counts such as "1.5"
        ca = np.char.strip(raw).astype(np.int64)
    except ValueError as exc:
        raise ValueError(f"malformed data rows: {exc}") from None
    if ca.size == 0:
        raise ValueError("no data rows")
    r1a, r2a = pos[:, 0], pos[:, 1]
    if not (np.all(np.isfinite(r1a)) and np.all(np.isfinite(r2a))):
        raise ValueError("positions must be finite")
    if np.any(ca < 0):
        raise ValueError("negative counts")
    u1, i1 = np.unique(r1a, return_inverse=True)
    u2, i2 = np.unique(r2a, return_inverse=True)
    seen = np.zeros((u1.size, u2.size), dtype=np.int64)
    np.add.at(seen, (i1, i2), 1)
    if np.any(seen > 1):
        raise ValueError("duplicate grid cell")
    if np.any(seen == 0):
        raise ValueError("incomplete grid")
    counts = np.zeros((u1.size, u2.size), dtype=np.int64)
    counts[i1, i2] = ca
    return CountsMap(u1, u2, counts, kind, optics)


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def format_coincidence_csv(m: CountsMap) -> str:
    lines = [
        f"# kind={m.kind.value}",
        f"# magnification={m.optics.magnification!r}",
        f"# focal_mm={m.optics.focal_mm!r}",
        f"# wavelength_nm={m.optics.wavelength_nm!r}",
        "# units=mm",
    ]
    if m.optics.flip:
        lines.append("# flip=true")
    lines.append(",".join(_HEADER))
    r1 = [repr(float(v)) for v in m.rho1]
    r2 = [repr(float(v)) for v in m.rho2]
    for i, a in enumerate(r1):
        row = m.counts[i]
        lines.extend(f"{a},{b},{int(c)}" for b, c in zip(r2, row))
    return "\n".join(lines) + "\n"


def save_coincidence_csv(m: CountsMap, path) -> None:
    """Write ``m`` atomically in the format read by :func:`load_coincidence_csv`."""
    _atomic_write_text(path, format_coincidence_csv(m))


def joint_to_counts(
    j: JointDistribution,
    kind,
    optics: OpticsConfig | None = None,
    total: float = 1e9,
    rng: np.random.Generator | None = None,
) -> CountsMap:
    """Express a simulated joint as a detector-coordinate count map.

    Counts are the expected counts rounded to integers, or Poisson draws
    around them when ``rng`` is given.
    """
    optics = optics or OpticsConfig()
    kind = PlaneKind(kind)
    if kind.axis_kind != j.kind:
        raise ValueError(f"{kind.value} plane needs a {kind.axis_kind.value} grid")
    expected = j.probs * total
    counts = rng.poisson(expected) if rng is not None else np.rint(expected)
    rho1 = detector_coords_from(j.axis1.coords, kind, optics)
    rho2 = detector_coords_from(j.axis2.coords, kind, optics)
    if optics.flip and kind is PlaneKind.FAR:
        rho1, rho2 = rho1[::-1], rho2[::-1]
        counts = counts[::-1, ::-1]
    return CountsMap(rho1, rho2, counts.astype(np.int64), kind, optics)
