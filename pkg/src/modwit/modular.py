"""Modular (integer + remainder) decomposition of positions and momenta.

A position splits as ``x = n*ell + r`` with ``r`` in ``[-ell/2, ell/2)`` and a
momentum as ``p = m/ell + s`` with ``s`` in ``[-1/(2 ell), 1/(2 ell))``.  The
boundary point is assigned to the lower edge.  Folding a joint grid gives
the integer joint, a binned remainder joint and the global combinations
``n1 +- n2`` and ``r1 +- r2`` (or ``m``/``s`` in the far field).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .griddist import Axis, AxisKind, Density, JointDistribution

DIVISIBILITY_TOL = 0.01


def _centered_mod(v, period):
    r = np.mod(v + 0.5 * period, period) - 0.5 * period
    # np.mod can round up to exactly `period` for tiny negative arguments
    r = np.where(r >= 0.5 * period, r - period, r)
    return r


def _check_finite(v, name):
    if not np.all(np.isfinite(np.asarray(v, dtype=float))):
        raise ValueError(f"{name} must be finite")


def _check_ell(ell):
    if not (math.isfinite(ell) and ell > 0):
        raise ValueError(f"ell must be finite and positive, got {ell}")


def decompose_position(x, ell: float):
    """Return ``(n, r)`` with ``x = n*ell + r`` and ``-ell/2 <= r < ell/2``."""
    _check_ell(ell)
    _check_finite(x, "x")
    x = np.asarray(x, dtype=float)
    r = _centered_mod(x, ell)
    n = np.rint((x - r) / ell).astype(np.int64)
    if n.ndim == 0:
        return int(n), float(r)
    return n, r


def decompose_momentum(p, ell: float):
    """Return ``(m, s)`` with ``p = m/ell + s`` and ``-1/(2 ell) <= s < 1/(2 ell)``."""
    _check_ell(ell)
    _check_finite(p, "p")
    p = np.asarray(p, dtype=float)
    s = _centered_mod(p, 1.0 / ell)
    m = np.rint((p - s) * ell).astype(np.int64)
    if m.ndim == 0:
        return int(m), float(s)
    return m, s


@dataclass(frozen=True)
class ModularConfig:
    ell: float
    bins: int = 64

    def __post_init__(self):
        _check_ell(self.ell)
        if int(self.bins) != self.bins or self.bins < 4:
            raise ValueError(f"bins must be an integer >= 4, got {self.bins}")
        object.__setattr__(self, "bins", int(self.bins))

    def period(self, kind) -> float:
        return self.ell if AxisKind(kind) is AxisKind.POSITION else 1.0 / self.ell


@dataclass(frozen=True, eq=False)
class ModularJoint:
    """Modular-variable distributions derived from one joint grid.

    ``combo_int`` and ``combo_rem`` are keyed by ``"+"`` and ``"-"``.  The
    remainder combinations are unwrapped sums on the doubled interval with
    ``2*bins - 1`` bins of width ``period/bins``.
    """

    kind: AxisKind
    ell: float
    bins: int
    integer_joint: JointDistribution
    remainder_joint: JointDistribution
    combo_int: dict
    combo_rem: dict

    @property
    def period(self) -> float:
        return self.ell if self.kind is AxisKind.POSITION else 1.0 / self.ell

    @property
    def bin_width(self) -> float:
        return self.period / self.bins


def _split_axis(axis: Axis, cfg: ModularConfig):
    coords = axis.coords
    if axis.kind is AxisKind.POSITION:
        n, r = decompose_position(coords, cfg.ell)
    else:
        n, r = decompose_momentum(coords, cfg.ell)
    n = np.atleast_1d(n)
    r = np.atleast_1d(r)
    period = cfg.period(axis.kind)
    b = np.floor((r + 0.5 * period) / period * cfg.bins).astype(np.int64)
    np.clip(b, 0, cfg.bins - 1, out=b)
    return n, b


def _pushforward_2d(probs, idx1, idx2, size1, size2):
    flat = (idx1[:, None] * size2 + idx2[None, :]).ravel()
    out = np.bincount(flat, weights=probs.ravel(), minlength=size1 * size2)
    return out.reshape(size1, size2)


def _combo(probs2d, sign):
    """Pushforward of a 2D index grid under ``i + j`` or ``i - j``."""
    k1, k2 = probs2d.shape
    i = np.arange(k1)[:, None]
    j = np.arange(k2)[None, :]
    if sign > 0:
        idx, size = i + j, k1 + k2 - 1
    else:
        idx, size = i - j + (k2 - 1), k1 + k2 - 1
    return np.bincount(idx.ravel(), weights=probs2d.ravel(), minlength=size)


def fold_joint(j: JointDistribution, cfg: ModularConfig) -> ModularJoint:
    """Assign every cell's probability to the modular bin of its center."""
    kind = j.kind
    period = cfg.period(kind)
    for axis in (j.axis1, j.axis2):
        if period < 2 * axis.step:
            raise ValueError("grid too coarse for period")
        ratio = period / axis.step
        if abs(ratio - round(ratio)) > DIVISIBILITY_TOL:
            warnings.warn(
                f"axis step {axis.step:g} does not divide the modular period "
                f"{period:g} (ratio {ratio:.4f}); cell-center binning may bias results",
                stacklevel=2,
            )

    n1, b1 = _split_axis(j.axis1, cfg)
    n2, b2 = _split_axis(j.axis2, cfg)
    lo1, lo2 = int(n1.min()), int(n2.min())
    size1, size2 = int(n1.max()) - lo1 + 1, int(n2.max()) - lo2 + 1
    int_probs = _pushforward_2d(j.probs, n1 - lo1, n2 - lo2, size1, size2)
    rem_probs = _pushforward_2d(j.probs, b1, b2, cfg.bins, cfg.bins)

    int_joint = JointDistribution(
        Axis(kind, float(lo1), 1.0, size1), Axis(kind, float(lo2), 1.0, size2), int_probs
    )
    w = period / cfg.bins
    rem_axis = Axis(kind, -0.5 * period + 0.5 * w, w, cfg.bins)
    rem_joint = JointDistribution(rem_axis, rem_axis, rem_probs)

    size_sum = size1 + size2 - 1
    combo_int = {
        "+": Density(Axis(kind, float(lo1 + lo2), 1.0, size_sum), _combo(int_probs, +1)),
        "-": Density(
            Axis(kind, float(lo1 - (lo2 + size2 - 1)), 1.0, size_sum), _combo(int_probs, -1)
        ),
    }
    nb = 2 * cfg.bins - 1
    combo_rem = {
        "+": Density(Axis(kind, -period + w, w, nb), _combo(rem_probs, +1)),
        "-": Density(Axis(kind, -(cfg.bins - 1) * w, w, nb), _combo(rem_probs, -1)),
    }
    return ModularJoint(kind, cfg.ell, cfg.bins, int_joint, rem_joint, combo_int, combo_rem)
