"""Entanglement and EPR-steering criteria on modular variables.

Every criterion reports ``violation = lhs - threshold``; a negative value
means the inequality is violated and the correlation is detected.

Steering criteria infer party 1 from party 2 by default.  Inferred variances
use the conditional mean as the estimator, which minimizes the inferred
variance for every conditioning outcome.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .entropy import conditional_differential, conditional_discrete, differential_from_histogram, shannon_discrete
from .griddist import AxisKind, CountsMap, JointDistribution, normalize_counts, variance_of
from .modular import ModularConfig, ModularJoint, fold_joint
from .spectral import default_c


class Criterion(str, Enum):
    VAR_ENT = "var_ent"
    ENT_ENT = "ent_ent"
    VAR_STEER = "var_steer"
    ENT_STEER = "ent_steer"
    COARSE_GRAINED = "coarse_grained"

    @classmethod
    def parse(cls, value) -> "Criterion":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "_")
        aliases = {"coarse": "coarse_grained"}
        return cls(aliases.get(text, text))


# (sign of N, sign of S); the other two sign choices hold for every state
PAIRINGS = {"N-S+": ("-", "+"), "N+S-": ("+", "-")}
DIRECTIONS = {"1|2": 1, "2|1": 0}


@dataclass(frozen=True)
class WitnessResult:
    criterion: Criterion
    pairing: str | None
    lhs: float
    threshold: float
    components: dict = field(default_factory=dict)
    sd: float | None = None
    violation: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion.parse(self.criterion))
        object.__setattr__(self, "lhs", float(self.lhs))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "violation", self.lhs - self.threshold)

    @property
    def detected(self) -> bool:
        return self.violation < 0

    def with_sd(self, sd: float) -> "WitnessResult":
        return WitnessResult(self.criterion, self.pairing, self.lhs, self.threshold, dict(self.components), sd)

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "pairing": self.pairing,
            "lhs": self.lhs,
            "threshold": self.threshold,
            "violation": self.violation,
            "sd": self.sd,
            "components": {k: _plain(v) for k, v in self.components.items()},
        }


def _plain(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v) + 0.0


@dataclass(frozen=True, eq=False)
class ScanCurve:
    ratios: np.ndarray
    violations: np.ndarray
    argmin_ratio: float
    bins: np.ndarray

    def to_dict(self) -> dict:
        return {
            "ratios": [float(r) for r in self.ratios],
            "violations": [float(v) for v in self.violations],
            "argmin_ratio": float(self.argmin_ratio),
            "bins": [int(b) for b in self.bins],
        }


def _check_pair(near: ModularJoint, far: ModularJoint, ell: float | None) -> float:
    if near.kind is not AxisKind.POSITION:
        raise ValueError("near-field input must be position-kind")
    if far.kind is not AxisKind.MOMENTUM:
        raise ValueError("far-field input must be momentum-kind")
    if not math.isclose(near.ell, far.ell, rel_tol=1e-12):
        raise ValueError(f"mismatched ell between inputs: {near.ell} vs {far.ell}")
    if ell is not None and not math.isclose(ell, near.ell, rel_tol=1e-12):
        raise ValueError(f"mismatched ell: inputs folded with {near.ell}, got {ell}")
    return near.ell


def _pairing(pairing: str) -> tuple[str, str]:
    try:
        return PAIRINGS[pairing]
    except KeyError:
        raise ValueError(f"pairing must be one of {sorted(PAIRINGS)}, got {pairing!r}") from None


def variance_entanglement(near, far, ell=None, C=None, pairing="N-S+") -> WitnessResult:
    """``Var(N+-) + ell^2 Var(S-+) >= 2C`` for separable states."""
    ell = _check_pair(near, far, ell)
    C = default_c() if C is None else C
    sn, ss = _pairing(pairing)
    var_n = variance_of(near.combo_int[sn])
    var_s = ell**2 * variance_of(far.combo_rem[ss])
    return WitnessResult(
        Criterion.VAR_ENT,
        pairing,
        var_n + var_s,
        2 * C,
        {f"var_N{sn}": var_n, f"ell2_var_S{ss}": var_s, "C": C},
    )


def entropic_entanglement(near, far, ell=None, pairing="N-S+") -> WitnessResult:
    """``H(N+-) + h(S-+) >= ln(sqrt(2)/ell)`` for separable states."""
    ell = _check_pair(near, far, ell)
    sn, ss = _pairing(pairing)
    h_n = shannon_discrete(near.combo_int[sn].probs)
    h_s = differential_from_histogram(far.combo_rem[ss].probs, far.bin_width)
    return WitnessResult(
        Criterion.ENT_ENT,
        pairing,
        h_n + h_s,
        math.log(math.sqrt(2) / ell),
        {f"H_N{sn}": h_n, f"h_S{ss}": h_s, "bins": far.bins},
    )


def inferred_variance(joint: JointDistribution, given: int = 1, estimates=None) -> float:
    """Mean squared error of estimating one variable from the other.

    ``given`` is the axis of the conditioning variable ``b``.  ``estimates``
    holds one estimate of ``a`` per ``b`` outcome; by default the conditional
    mean, which makes this the average conditional variance.
    """
    if given not in (0, 1):
        raise ValueError("given must be 0 or 1")
    probs = joint.probs if given == 1 else joint.probs.T
    a = (joint.axis1 if given == 1 else joint.axis2).coords
    p_b = probs.sum(axis=0)
    if estimates is None:
        with np.errstate(invalid="ignore", divide="ignore"):
            estimates = np.where(p_b > 0, (a @ probs) / np.where(p_b > 0, p_b, 1.0), 0.0)
    estimates = np.asarray(estimates, dtype=float)
    if estimates.shape != p_b.shape:
        raise ValueError(f"need {p_b.size} estimates, got shape {estimates.shape}")
    return float(np.sum(probs * (a[:, None] - estimates[None, :]) ** 2))


def _direction(direction: str) -> int:
    try:
        return DIRECTIONS[direction]
    except KeyError:
        raise ValueError(f"direction must be one of {sorted(DIRECTIONS)}, got {direction!r}") from None


def variance_steering(near, far, ell=None, C=None, direction="1|2") -> WitnessResult:
    """``Var_inf(n1) + ell^2 Var_inf(s1) >= C`` for non-steerable states."""
    ell = _check_pair(near, far, ell)
    C = default_c() if C is None else C
    given = _direction(direction)
    v_n = inferred_variance(near.integer_joint, given)
    v_s = ell**2 * inferred_variance(far.remainder_joint, given)
    return WitnessResult(
        Criterion.VAR_STEER,
        None,
        v_n + v_s,
        C,
        {"inf_var_n": v_n, "ell2_inf_var_s": v_s, "C": C},
    )


def entropic_steering(near, far, ell=None, direction="1|2") -> WitnessResult:
    """``H(n1|n2) + h(s1|s2) >= -ln ell`` for non-steerable states."""
    ell = _check_pair(near, far, ell)
    given = _direction(direction)
    h_n = conditional_discrete(near.integer_joint.probs, given=given)
    w = far.bin_width
    h_s = conditional_differential(far.remainder_joint.probs, w, w, given=given)
    return WitnessResult(
        Criterion.ENT_STEER,
        None,
        h_n + h_s,
        -math.log(ell),
        {"H_n_cond": h_n, "h_s_cond": h_s, "bins": far.bins},
    )


def coarse_grain_precision(ell: float, d: float) -> float:
    """Integer-part precision when the scale ``ell`` differs from the slit separation.

    Coarse graining hits the position integer part for ``ell > d`` and the
    momentum integer part for ``ell < d``; either way the bound is relaxed by
    the ratio, so the precision is ``max(ell/d, d/ell)``.
    """
    r = ell / d
    return max(r, 1.0 / r)


def coarse_grained_entropic(
    near, far, ell=None, d=None, delta_s=None, pairing="N-S+", delta_n=None
) -> WitnessResult:
    """``H(N+-) + H(S-+) >= ln(sqrt(2) / (delta_N delta_S ell))`` with both entropies discrete."""
    ell = _check_pair(near, far, ell)
    if d is None and delta_n is None:
        raise ValueError("need the slit separation d or an explicit delta_n")
    if d is not None and not d > 0:
        raise ValueError(f"slit separation must be positive, got {d}")
    delta_n = coarse_grain_precision(ell, d) if delta_n is None else delta_n
    delta_s = far.bin_width if delta_s is None else delta_s
    if not (delta_n > 0 and delta_s > 0):
        raise ValueError("coarse-graining precisions must be positive")
    sn, ss = _pairing(pairing)
    h_n = shannon_discrete(near.combo_int[sn].probs)
    h_s = shannon_discrete(far.combo_rem[ss].probs)
    return WitnessResult(
        Criterion.COARSE_GRAINED,
        pairing,
        h_n + h_s,
        math.log(math.sqrt(2) / (delta_n * delta_s * ell)),
        {f"H_N{sn}": h_n, f"H_S{ss}": h_s, "delta_N": delta_n, "delta_S": delta_s, "bins": far.bins},
    )


def evaluate(
    criterion,
    near: JointDistribution,
    far: JointDistribution,
    ell: float,
    bins: int = 64,
    *,
    pairing: str = "N-S+",
    d: float | None = None,
    C: float | None = None,
    direction: str = "1|2",
) -> WitnessResult:
    """Fold both grids at scale ``ell`` and evaluate one criterion."""
    criterion = Criterion.parse(criterion)
    cfg = ModularConfig(ell, bins)
    mn, mf = fold_joint(near, cfg), fold_joint(far, cfg)
    if criterion is Criterion.VAR_ENT:
        return variance_entanglement(mn, mf, ell, C, pairing)
    if criterion is Criterion.ENT_ENT:
        return entropic_entanglement(mn, mf, ell, pairing)
    if criterion is Criterion.VAR_STEER:
        return variance_steering(mn, mf, ell, C, direction)
    if criterion is Criterion.ENT_STEER:
        return entropic_steering(mn, mf, ell, direction)
    return coarse_grained_entropic(mn, mf, ell, d, pairing=pairing)


def scan_ell(
    near: JointDistribution,
    far: JointDistribution,
    d: float,
    ratios,
    bins: int = 64,
    pairing: str = "N-S+",
) -> ScanCurve:
    """Coarse-grained entropic violation as a function of ``ell/d``.

    The remainder bin count is capped at the number of far-field cells per
    period so that no bin is left empty by construction.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("empty ratio list")
    if np.any(ratios <= 0):
        raise ValueError("ratios must be positive")
    violations = np.empty(ratios.size)
    used = np.empty(ratios.size, dtype=np.int64)
    for i, r in enumerate(ratios):
        ell = r * d
        cells = int(math.floor((1.0 / ell) / far.axis1.step + 1e-9))
        b = max(4, min(bins, cells))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = evaluate(Criterion.COARSE_GRAINED, near, far, ell, b, pairing=pairing, d=d)
        violations[i] = res.violation
        used[i] = b
    return ScanCurve(ratios, violations, float(ratios[int(np.argmin(violations))]), used)


def _redraw(m: CountsMap, rng: np.random.Generator) -> JointDistribution:
    return normalize_counts(m.with_counts(rng.poisson(m.counts)))


def poisson_uncertainty(
    near_counts: CountsMap,
    far_counts: CountsMap,
    criterion,
    trials: int = 200,
    seed: int = 0,
    *,
    ell: float,
    bins: int = 64,
    **kwargs,
) -> tuple[float, float]:
    """Sample mean and SD of the violation under Poisson redraws of every cell.

    Each trial owns an independent counter-based stream spawned from
    ``seed``, so results do not depend on evaluation order.
    """
    if int(trials) != trials or trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    for m in (near_counts, far_counts):
        if m.total <= 0:
            raise ValueError("empty map")
    streams = np.random.SeedSequence(seed).spawn(int(trials))
    values = np.empty(int(trials))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for t, ss in enumerate(streams):
            rng = np.random.Generator(np.random.Philox(ss))
            near = _redraw(near_counts, rng)
            far = _redraw(far_counts, rng)
            values[t] = evaluate(criterion, near, far, ell, bins, **kwargs).violation
    return float(values.mean()), float(values.std(ddof=1))
