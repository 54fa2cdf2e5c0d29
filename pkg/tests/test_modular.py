import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import ideal_pair
from modwit.entropy import shannon_discrete
from modwit.griddist import Axis, AxisKind, JointDistribution
from modwit.modular import ModularConfig, decompose_momentum, decompose_position, fold_joint


@pytest.mark.parametrize(
    "x, ell, expected",
    [
        (0.0, 1.0, (0, 0.0)),
        (0.75, 1.0, (1, -0.25)),
        (-0.6, 1.0, (-1, 0.4)),
        (0.5, 1.0, (1, -0.5)),
        (-0.5, 1.0, (0, -0.5)),
    ],
)
def test_decompose_position(x, ell, expected):
    n, r = decompose_position(x, ell)
    assert n == expected[0]
    assert r == pytest.approx(expected[1], abs=1e-12)


@pytest.mark.parametrize(
    "p, ell, expected",
    [
        (0.0, 2.0, (0, 0.0)),
        (1.3, 2.0, (3, -0.2)),
        (0.24, 1.0, (0, 0.24)),
    ],
)
def test_decompose_momentum(p, ell, expected):
    m, s = decompose_momentum(p, ell)
    assert m == expected[0]
    assert s == pytest.approx(expected[1], abs=1e-12)


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_decompose_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        decompose_position(bad, 1.0)
    with pytest.raises(ValueError):
        decompose_momentum(bad, 1.0)


@pytest.mark.parametrize("ell", [0.0, -1.0, float("nan")])
def test_decompose_rejects_bad_ell(ell):
    with pytest.raises(ValueError):
        decompose_position(0.1, ell)


finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
scales = st.floats(1e-2, 1e2)


@given(finite, scales)
def test_position_reconstruction(x, ell):
    n, r = decompose_position(x, ell)
    assert isinstance(n, int)
    assert -ell / 2 <= r < ell / 2
    assert n * ell + r == pytest.approx(x, rel=1e-12, abs=1e-12 * max(ell, 1.0) * (1 + abs(n)))


@given(finite, scales)
def test_momentum_reconstruction(p, ell):
    m, s = decompose_momentum(p, ell)
    period = 1.0 / ell
    assert -period / 2 <= s < period / 2
    assert m / ell + s == pytest.approx(p, rel=1e-12, abs=1e-12 * max(period, 1.0) * (1 + abs(m)))


def test_decompose_vectorized_matches_scalar():
    x = np.linspace(-3.3, 3.3, 41)
    n, r = decompose_position(x, 0.7)
    for xi, ni, ri in zip(x, n, r):
        assert (ni, ri) == pytest.approx(decompose_position(float(xi), 0.7))


def test_config_validation():
    with pytest.raises(ValueError):
        ModularConfig(1.0, bins=3)
    with pytest.raises(ValueError):
        ModularConfig(0.0)
    assert ModularConfig(0.5).period("momentum") == 2.0


# --- folding ---------------------------------------------------------------


def _point_mass(x1, x2, step=0.05, kind=AxisKind.POSITION, count=80):
    start = -2.0
    ax = Axis(kind, start + step / 2, step, count)
    i = int(math.floor((x1 - start) / step))
    k = int(math.floor((x2 - start) / step))
    probs = np.zeros((count, count))
    probs[i, k] = 1.0
    return JointDistribution(ax, ax, probs), ax.coords[i], ax.coords[k]


def test_point_mass_fold():
    j, c1, c2 = _point_mass(0.75, -0.6)
    # cell centers 0.775 and -0.575 keep the same integer parts as 0.75, -0.6
    mj = fold_joint(j, ModularConfig(1.0, bins=20))
    n_minus = mj.combo_int["-"]
    assert n_minus.probs[np.argmax(n_minus.probs)] == 1.0
    assert n_minus.axis.coords[np.argmax(n_minus.probs)] == 2.0
    r_plus = mj.combo_rem["+"]
    k = int(np.argmax(r_plus.probs))
    center, w = r_plus.axis.coords[k], r_plus.axis.step
    assert r_plus.probs[k] == 1.0
    assert center - w / 2 <= 0.15 < center + w / 2 + 1e-12


def test_uniform_over_one_period_gives_flat_remainder():
    bins = 16
    step = 1.0 / 64
    ax1 = Axis(AxisKind.POSITION, -0.5 + step / 2, step, 64)
    ax2 = Axis(AxisKind.POSITION, -1.5 + step / 2, step, 192)
    rng = np.random.default_rng(2)
    q = rng.random(192)
    j = JointDistribution.from_weights(ax1, ax2, np.outer(np.ones(64), q))
    mj = fold_joint(j, ModularConfig(1.0, bins))
    np.testing.assert_allclose(mj.remainder_joint.probs.sum(axis=1), np.full(bins, 1 / bins), rtol=1e-12)


def _random_joint(rng, kind=AxisKind.POSITION, n1=37, n2=29):
    ax1 = Axis(kind, rng.uniform(-2, 0), 0.05, n1)
    ax2 = Axis(kind, rng.uniform(-2, 0), 0.05, n2)
    return JointDistribution.from_weights(ax1, ax2, rng.random((n1, n2)) ** 4)


@pytest.mark.parametrize("kind", [AxisKind.POSITION, AxisKind.MOMENTUM])
def test_combinations_match_brute_force(kind):
    rng = np.random.default_rng(5)
    j = _random_joint(rng, kind)
    ell = 0.4 if kind is AxisKind.POSITION else 2.5
    cfg = ModularConfig(ell, bins=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mj = fold_joint(j, cfg)
    split = decompose_position if kind is AxisKind.POSITION else decompose_momentum
    period = cfg.period(kind)
    w = period / cfg.bins
    combos = {("N", "+"): {}, ("N", "-"): {}, ("S", "+"): {}, ("S", "-"): {}}
    for a, x1 in enumerate(j.axis1.coords):
        n1, r1 = split(float(x1), ell)
        b1 = int(math.floor((r1 + period / 2) / w))
        for b, x2 in enumerate(j.axis2.coords):
            n2, r2 = split(float(x2), ell)
            b2 = int(math.floor((r2 + period / 2) / w))
            p = j.probs[a, b]
            for sign, f in (("+", 1), ("-", -1)):
                key_n = n1 + f * n2
                key_s = b1 + f * b2
                combos[("N", sign)][key_n] = combos[("N", sign)].get(key_n, 0.0) + p
                combos[("S", sign)][key_s] = combos[("S", sign)].get(key_s, 0.0) + p
    for sign in ("+", "-"):
        dens = mj.combo_int[sign]
        got = {int(round(c)): p for c, p in zip(dens.axis.coords, dens.probs) if p > 0}
        want = {k: v for k, v in combos[("N", sign)].items() if v > 0}
        assert got.keys() == want.keys()
        for k in want:
            assert got[k] == pytest.approx(want[k], rel=1e-12, abs=1e-15)
        dens = mj.combo_rem[sign]
        # bin-index sums map to centers (b1 + b2 + 1) w - period, differences to (b1 - b2) w
        offset = -period + w if sign == "+" else 0.0
        got = {int(round((c - offset) / w)): p for c, p in zip(dens.axis.coords, dens.probs) if p > 0}
        want = {k: v for k, v in combos[("S", sign)].items() if v > 0}
        assert got.keys() == want.keys()
        for k in want:
            assert got[k] == pytest.approx(want[k], rel=1e-12, abs=1e-15)


def test_combo_supports_span_doubled_interval():
    rng = np.random.default_rng(8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mj = fold_joint(_random_joint(rng), ModularConfig(0.4, bins=8))
    for sign in ("+", "-"):
        ax = mj.combo_rem[sign].axis
        assert ax.count == 15
        assert ax.lower_edge == pytest.approx(-0.4 + 0.025)
        assert ax.upper_edge == pytest.approx(0.4 - 0.025)


def test_mass_is_conserved():
    rng = np.random.default_rng(11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mj = fold_joint(_random_joint(rng), ModularConfig(0.35, bins=4))
    maps = [mj.integer_joint.probs, mj.remainder_joint.probs]
    maps += [d.probs for d in mj.combo_int.values()] + [d.probs for d in mj.combo_rem.values()]
    for m in maps:
        assert abs(m.sum() - 1.0) <= 1e-9


def test_too_coarse_grid():
    ax = Axis(AxisKind.POSITION, 0.0, 0.3, 10)
    j = JointDistribution.from_weights(ax, ax, np.ones((10, 10)))
    with pytest.raises(ValueError, match="grid too coarse for period"):
        fold_joint(j, ModularConfig(0.5))


def test_non_dividing_step_warns():
    ax = Axis(AxisKind.POSITION, 0.0, 0.03, 100)
    j = JointDistribution.from_weights(ax, ax, np.ones((100, 100)))
    with pytest.warns(UserWarning, match="does not divide"):
        fold_joint(j, ModularConfig(1.0, bins=8))


@pytest.mark.parametrize("D", [2, 3, 4])
def test_ideal_near_field_has_fixed_difference(D):
    spec, near, _ = ideal_pair(D)
    mj = fold_joint(near, ModularConfig(spec.d))
    n_minus = mj.combo_int["-"]
    assert n_minus.probs[np.isclose(n_minus.axis.coords, 0.0)].item() == pytest.approx(1.0, abs=1e-12)
    assert shannon_discrete(n_minus.probs) == pytest.approx(0.0, abs=1e-12)


def test_shift_by_ell_increments_integers():
    spec, near, _ = ideal_pair(2)
    cfg = ModularConfig(spec.d)
    shifted = JointDistribution(near.axis1.shifted(spec.d), near.axis2.shifted(spec.d), near.probs)
    base, moved = fold_joint(near, cfg), fold_joint(shifted, cfg)
    np.testing.assert_array_equal(moved.remainder_joint.probs, base.remainder_joint.probs)
    np.testing.assert_array_equal(moved.integer_joint.probs, base.integer_joint.probs)
    assert moved.integer_joint.axis1.start == base.integer_joint.axis1.start + 1
    assert moved.integer_joint.axis2.start == base.integer_joint.axis2.start + 1
