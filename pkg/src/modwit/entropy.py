"""Shannon entropies in nats, histogram plug-in estimators and convolutions.

Empty bins contribute zero.  No bias correction is applied to the plug-in
estimates; for count data the downward bias is roughly
``(nonzero bins) / (2 * total counts)``.
"""

from __future__ import annotations

import numpy as np

from .griddist import Axis, Density

NORM_TOL = 1e-9


def _as_probs(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if np.any(a < 0):
        raise ValueError("negative probabilities")
    if abs(a.sum() - 1.0) > NORM_TOL:
        raise ValueError(f"probabilities sum to {a.sum()!r}, expected 1")
    return a


def _plugin(a: np.ndarray) -> float:
    nz = a[a > 0]
    return float(-np.sum(nz * np.log(nz))) + 0.0


def shannon_discrete(p) -> float:
    """Discrete entropy ``-sum p ln p`` of a probability map of any shape."""
    return _plugin(_as_probs(p))


def differential_from_histogram(bins, width: float) -> float:
    """Plug-in differential entropy of a histogram with equal bin ``width``.

    Equals ``-sum P ln(P / width)``, i.e. the exact entropy of the
    piecewise-constant density the histogram describes.
    """
    if not width > 0:
        raise ValueError(f"bin width must be positive, got {width}")
    return shannon_discrete(bins) + float(np.log(width))


def _conditioning(joint: np.ndarray, given: int) -> np.ndarray:
    if joint.ndim != 2:
        raise ValueError("joint must be two-dimensional")
    if given not in (0, 1):
        raise ValueError("given must be 0 (rows) or 1 (columns)")
    return joint.sum(axis=1 - given)


def conditional_discrete(joint, given: int = 0) -> float:
    """``H(a|b) = H(a,b) - H(b)``.

    ``given`` selects the axis holding the conditioning variable ``b``
    (0: rows, 1: columns).  Outcomes of ``b`` with zero probability carry
    zero weight.
    """
    a = _as_probs(joint)
    return _plugin(a) - _plugin(_conditioning(a, given))


def conditional_differential(joint, width_a: float, width_b: float, given: int = 0) -> float:
    """``h(a|b) = h(a,b) - h(b)`` from a joint histogram of equal-width bins.

    When ``a`` is determined by ``b`` this returns ``ln(width_a)``, the
    resolution floor of the histogram.
    """
    if not (width_a > 0 and width_b > 0):
        raise ValueError("bin widths must be positive")
    a = _as_probs(joint)
    h_ab = _plugin(a) + np.log(width_a * width_b)
    h_b = _plugin(_conditioning(a, given)) + np.log(width_b)
    return float(h_ab - h_b)


def convolve_densities(p1: Density, p2: Density, sign: int = +1) -> Density:
    """Binned density of ``v1 + sign*v2`` for independent ``v1 ~ p1``, ``v2 ~ p2``.

    Bin masses combine by discrete convolution, so two ``B``-bin inputs give
    ``2B - 1`` output bins centered on the sums of input bin centers.
    """
    w1, w2 = p1.axis.step, p2.axis.step
    if not np.isclose(w1, w2, rtol=1e-9, atol=0.0):
        raise ValueError(f"mismatched bin widths {w1} and {w2}")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if sign > 0:
        probs = np.convolve(p1.probs, p2.probs)
        start = p1.axis.start + p2.axis.start
    else:
        probs = np.convolve(p1.probs, p2.probs[::-1])
        start = p1.axis.start - p2.axis.stop
    return Density(Axis(p1.axis.kind, start, w1, probs.size), probs)


def _segment_entropy(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``-integral_0^1 g ln g dt`` for ``g`` linear from ``u`` to ``v``."""

    def antiderivative(y):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * y * y * np.log(y) - 0.25 * y * y
        return np.where(y > 0, out, 0.0)

    same = np.isclose(u, v, rtol=1e-6, atol=1e-300)
    diff = np.where(same, 1.0, v - u)
    general = (antiderivative(v) - antiderivative(u)) / diff
    # second-order expansion around the midpoint for nearly equal endpoints
    mid = 0.5 * (u + v)
    safe = np.where(mid > 0, mid, 1.0)
    flat = np.where(mid > 0, mid * np.log(safe) + (v - u) ** 2 / (24.0 * safe), 0.0)
    return -np.where(same, flat, general)


def entropy_of_sum(p1: Density, p2: Density, sign: int = +1) -> float:
    """Exact differential entropy of ``v1 + sign*v2``.

    ``p1`` and ``p2`` are read as piecewise-constant densities on equal-width
    bins.  Their convolution is piecewise linear with knots every bin width,
    and its knot heights are the discrete convolution masses divided by the
    width, so the entropy integral has a closed form per segment.
    """
    conv = convolve_densities(p1, p2, sign)
    w = conv.axis.step
    heights = np.concatenate(([0.0], conv.probs / w, [0.0]))
    return float(w * _segment_entropy(heights[:-1], heights[1:]).sum())
