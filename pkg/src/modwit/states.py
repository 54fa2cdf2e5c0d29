"""Ideal D-slit two-photon distributions and separable test states.

Both photons pass through the same slit with equal amplitude ``1/sqrt(D)``.
Slits are top-hats of width ``a`` with centers on the lattice ``k*d``
(``k = j - (D-1)//2``), so the modular cells at ``ell = d`` hold exactly one
slit each.  A common translation of all slits only adds a global phase in
the far field, so the far-field pattern does not depend on this choice.

Far-field amplitudes use the kernel ``exp(2 pi i x p)``.  In ``comb`` mode
the single-slit envelope is taken constant; ``physical`` mode keeps the
``sin^2(pi a p) / (pi p)^2`` envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .griddist import Axis, AxisKind, Density, JointDistribution

FRINGE_CELLS = 4


class FarFieldMode(str, Enum):
    COMB = "comb"
    PHYSICAL = "physical"


@dataclass(frozen=True)
class SlitSpec:
    """``D`` slits of width ``a`` (mm) with center separation ``d`` (mm)."""

    D: int
    a: float
    d: float

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 2:
            raise ValueError(f"slit count must be an integer >= 2, got {self.D}")
        object.__setattr__(self, "D", int(self.D))
        if not (0 < self.a < self.d):
            raise ValueError(f"need 0 < a < d, got a={self.a}, d={self.d}")

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.D) - (self.D - 1) // 2) * self.d


# Aperture geometries of the reference experiment.
REFERENCE_SLITS = {
    2: SlitSpec(2, 0.08, 0.16),
    3: SlitSpec(3, 0.04, 0.125),
    4: SlitSpec(4, 0.08, 0.16),
}


def _cells_per_period(cells: int, periods: int, bins: int) -> int:
    return max(1, round(cells / periods / bins)) * bins


def position_axis(spec: SlitSpec, cells: int = 1024, bins: int = 64, margin: int = 1) -> Axis:
    """Near-field axis covering all slits plus ``margin`` periods each side.

    Cell edges fall on the modular boundaries of ``ell = d`` and each of the
    ``bins`` remainder bins receives the same whole number of cells.
    """
    periods = spec.D + 2 * margin
    cpp = _cells_per_period(cells, periods, bins)
    step = spec.d / cpp
    lo = spec.centers[0] - (margin + 0.5) * spec.d
    return Axis(AxisKind.POSITION, lo + 0.5 * step, step, periods * cpp)


def momentum_axis(spec: SlitSpec, cells: int = 1024, bins: int = 64, max_order: int = 4) -> Axis:
    """Far-field axis covering integer parts ``m`` in ``[-max_order, max_order]`` at ``ell = d``."""
    periods = 2 * max_order + 1
    cpp = _cells_per_period(cells, periods, bins)
    step = 1.0 / (spec.d * cpp)
    lo = -(max_order + 0.5) / spec.d
    return Axis(AxisKind.MOMENTUM, lo + 0.5 * step, step, periods * cpp)


def _slit_masks(spec: SlitSpec, axis: Axis) -> np.ndarray:
    if axis.kind is not AxisKind.POSITION:
        raise ValueError("near-field grids need a position axis")
    x = axis.coords
    lo = spec.centers[0] - 0.5 * spec.a
    hi = spec.centers[-1] + 0.5 * spec.a
    if axis.lower_edge > lo or axis.upper_edge < hi:
        raise ValueError("axis range does not cover the slits")
    masks = np.abs(x[None, :] - spec.centers[:, None]) < 0.5 * spec.a
    if not np.all(masks.any(axis=1)):
        raise ValueError("axis too coarse to sample every slit")
    return masks.astype(float)


def _check_far_axis(spec: SlitSpec, axis: Axis) -> None:
    if axis.kind is not AxisKind.MOMENTUM:
        raise ValueError("far-field grids need a momentum axis")
    fringe = 1.0 / (spec.D * spec.d)
    if axis.step * FRINGE_CELLS > fringe:
        raise ValueError(
            f"axis too coarse to resolve fringe period {fringe:g}: step {axis.step:g}"
        )


def envelope(p, a: float, mode=FarFieldMode.COMB) -> np.ndarray:
    """Single-slit far-field intensity, up to normalization."""
    p = np.asarray(p, dtype=float)
    if FarFieldMode(mode) is FarFieldMode.COMB:
        return np.ones_like(p)
    return (a * np.sinc(a * p)) ** 2


def ideal_near_field(spec: SlitSpec, axis: Axis) -> JointDistribution:
    masks = _slit_masks(spec, axis)
    weights = np.einsum("ji,jk->ik", masks, masks)
    return JointDistribution.from_weights(axis, axis, weights)


def ideal_far_field(spec: SlitSpec, axis: Axis, mode=FarFieldMode.COMB) -> JointDistribution:
    """``E(p1) E(p2) |sum_j exp(2 pi i x_j (p1 + p2))|^2`` normalized on the grid."""
    _check_far_axis(spec, axis)
    n = axis.count
    # p1 + p2 on a uniform grid only takes 2n - 1 distinct values
    total_p = 2 * axis.start + axis.step * np.arange(2 * n - 1)
    amp = np.exp(2j * np.pi * np.outer(total_p, spec.centers)).sum(axis=1)
    fringe = np.abs(amp) ** 2
    idx = np.arange(n)
    weights = fringe[idx[:, None] + idx[None, :]]
    env = envelope(axis.coords, spec.a, mode)
    weights = weights * np.outer(env, env)
    return JointDistribution.from_weights(axis, axis, weights)


def theory_variance_S_plus(D: int, ell: float = 1.0) -> float:
    """``ell^2 Var(S+)`` of the ideal comb-mode state at ``ell = d``."""
    if int(D) != D or D < 2:
        raise ValueError(f"D must be an integer >= 2, got {D}")
    tail = sum((D - j) / (D * j * j) for j in range(1, int(D)))
    return ell**2 / 6.0 - ell**2 / math.pi**2 * tail


def add_background(j: JointDistribution, eps: float) -> JointDistribution:
    """Mix in a fraction ``eps`` of uniform background over the grid window."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"background fraction must lie in [0, 1], got {eps}")
    uniform = 1.0 / j.probs.size
    return JointDistribution.from_weights(j.axis1, j.axis2, (1.0 - eps) * j.probs + eps * uniform)


# --- single-photon and separable states ----------------------------------


def _amplitudes(spec: SlitSpec, amps) -> np.ndarray:
    c = np.asarray(amps, dtype=complex)
    if c.shape != (spec.D,):
        raise ValueError(f"need {spec.D} slit amplitudes, got shape {c.shape}")
    norm = np.sum(np.abs(c) ** 2)
    if not norm > 0:
        raise ValueError("amplitudes are all zero")
    return c / math.sqrt(norm)


def single_photon_near(spec: SlitSpec, amps, axis: Axis) -> Density:
    """Position distribution of one photon in slit superposition ``amps``."""
    c = _amplitudes(spec, amps)
    masks = _slit_masks(spec, axis)
    per_slit = masks / masks.sum(axis=1, keepdims=True)
    return Density.from_weights(axis, (np.abs(c) ** 2) @ per_slit)


def single_photon_far(spec: SlitSpec, amps, axis: Axis, mode=FarFieldMode.COMB) -> Density:
    c = _amplitudes(spec, amps)
    _check_far_axis(spec, axis)
    p = axis.coords
    amp = np.exp(2j * np.pi * np.outer(p, spec.centers)) @ c
    return Density.from_weights(axis, np.abs(amp) ** 2 * envelope(p, spec.a, mode))


def product_joint(d1: Density, d2: Density) -> JointDistribution:
    return JointDistribution.from_weights(d1.axis, d2.axis, np.outer(d1.probs, d2.probs))


def mixture(joints, weights) -> JointDistribution:
    w = np.asarray(weights, dtype=float)
    if w.size != len(joints) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("mixture weights must be non-negative and match the components")
    w = w / w.sum()
    first = joints[0]
    acc = sum(wi * j.probs for wi, j in zip(w, joints))
    return JointDistribution.from_weights(first.axis1, first.axis2, acc)


def random_amplitudes(rng: np.random.Generator, D: int) -> np.ndarray:
    """Random slit superposition, a single slit about a third of the time."""
    if rng.random() < 1 / 3:
        c = np.zeros(D, dtype=complex)
        c[rng.integers(D)] = 1.0
        return c
    support = rng.random(D) < 0.7
    if not support.any():
        support[rng.integers(D)] = True
    c = (rng.normal(size=D) + 1j * rng.normal(size=D)) * support
    return c


def random_separable(
    rng: np.random.Generator,
    spec: SlitSpec,
    near_axis: Axis,
    far_axis: Axis,
    mode=FarFieldMode.COMB,
    max_terms: int = 3,
) -> tuple[JointDistribution, JointDistribution]:
    """Convex mixture of product pure states, as near- and far-field joints.

    Each mixture term uses the same product state in both planes, so the pair
    is the position and momentum data of one separable state.
    """
    terms = int(rng.integers(1, max_terms + 1))
    weights = rng.dirichlet(np.ones(terms))
    near, far = [], []
    for _ in range(terms):
        c1, c2 = random_amplitudes(rng, spec.D), random_amplitudes(rng, spec.D)
        near.append(
            product_joint(single_photon_near(spec, c1, near_axis), single_photon_near(spec, c2, near_axis))
        )
        far.append(
            product_joint(
                single_photon_far(spec, c1, far_axis, mode), single_photon_far(spec, c2, far_axis, mode)
            )
        )
    return mixture(near, weights), mixture(far, weights)
