from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from fbqkd import keyrate
from fbqkd.link import CoincidenceMatrix
from fbqkd.qudit import Basis

# Root-finding oracle, written independently of the implementation: the
# threshold is where the privacy-amplification margin log2(d) - 2*H_d
# crosses zero (f = 1, equal error in both bases).


def _margin(d):
    def g(x):
        h = -x * np.log2(x / (d - 1)) - (1 - x) * np.log2(1 - x)
        return np.log2(d) - 2.0 * h

    return g


def _oracle_threshold(d):
    return brentq(_margin(d), 1e-9, (d - 1) / d - 1e-9, xtol=1e-12)


def test_thresholds_match_independent_root_finder():
    for d in (2, 3, 4, 5):
        assert keyrate.qber_threshold(d) == pytest.approx(
            _oracle_threshold(d), abs=2e-10
        )


def test_threshold_known_values():
    assert abs(keyrate.qber_threshold(2) - 0.1100) < 5e-4
    assert abs(keyrate.qber_threshold(3) - 0.1590) < 5e-4
    # frozen from the brentq oracle
    assert keyrate.qber_threshold(4) == pytest.approx(0.189289624915, abs=1e-9)
    assert keyrate.qber_threshold(5) == pytest.approx(0.209867411249, abs=1e-9)


def test_entropy_basics():
    assert keyrate.entropy_d(2, 0.5) == pytest.approx(1.0, abs=1e-12)
    assert keyrate.entropy_d(3, 0.0) == 0.0
    for d in (2, 3, 4, 5):
        peak = (d - 1) / d
        assert keyrate.entropy_d(d, peak) == pytest.approx(
            math.log2(d), abs=1e-9
        )


def test_entropy_half_log_identity():
    # H_3 at the d=3 threshold equals log2(3)/2 by construction
    t3 = keyrate.qber_threshold(3)
    assert keyrate.entropy_d(3, t3) == pytest.approx(math.log2(3) / 2, abs=1e-9)
    assert keyrate.entropy_d(3, 0.159) == pytest.approx(0.7925, abs=2e-3)


def test_entropy_domain_errors():
    with pytest.raises(ValueError):
        keyrate.entropy_d(2, -0.01)
    with pytest.raises(ValueError):
        keyrate.entropy_d(2, 1.0)
    with pytest.raises(ValueError):
        keyrate.entropy_d(1, 0.1)


@given(st.integers(min_value=2, max_value=5),
       st.floats(min_value=1e-6, max_value=0.999))
def test_entropy_concave_region_positive(d, frac):
    x = frac * (d - 1) / d
    assert 0.0 <= keyrate.entropy_d(d, x) <= math.log2(d) + 1e-12


def _matrix(basis, counts, tau=1.0):
    return CoincidenceMatrix(basis, np.asarray(counts, dtype=float), tau)


def test_qber_examples():
    assert keyrate.qber(_matrix(Basis.Z, np.diag([10.0, 20.0, 30.0]))) == 0.0
    m = _matrix(Basis.Z, [[450.0, 50.0], [50.0, 450.0]])
    assert keyrate.qber(m) == pytest.approx(0.10, abs=1e-12)
    for d in (2, 3, 4, 5):
        u = _matrix(Basis.X, np.ones((d, d)))
        assert keyrate.qber(u) == pytest.approx((d - 1) / d, abs=1e-12)


def test_qber_scale_invariant():
    rng = np.random.default_rng(3)
    counts = rng.random((3, 3)) + 0.01
    q1 = keyrate.qber(_matrix(Basis.Z, counts))
    q2 = keyrate.qber(_matrix(Basis.Z, counts * 173.5))
    assert q1 == pytest.approx(q2, rel=1e-12)


def test_qber_zero_total_rejected():
    with pytest.raises(ValueError):
        keyrate.qber(_matrix(Basis.Z, np.zeros((2, 2))))


def test_raw_rate_examples():
    mz = _matrix(Basis.Z, [[500.0, 0.0], [0.0, 500.0]])
    mx = _matrix(Basis.X, [[500.0, 0.0], [0.0, 500.0]])
    assert keyrate.raw_rate(mz, mx) == pytest.approx(1000.0)
    mz0 = _matrix(Basis.Z, np.zeros((2, 2)), tau=2.0)
    mx2 = _matrix(Basis.X, np.full((2, 2), 500.0), tau=2.0)
    assert keyrate.raw_rate(mz0, mx2) == pytest.approx(500.0)


def test_raw_rate_mismatched_tau_rejected():
    mz = _matrix(Basis.Z, np.ones((2, 2)), tau=1.0)
    mx = _matrix(Basis.X, np.ones((2, 2)), tau=2.0)
    with pytest.raises(ValueError):
        keyrate.raw_rate(mz, mx)


def test_skr_noiseless_identity():
    for d in (2, 3, 4, 5):
        rep = keyrate.skr(d, 1.0e4, 0.0, 0.0)
        assert rep.skr == pytest.approx(0.5 * 1.0e4 * math.log2(d), rel=1e-12)
        assert rep.secure
    assert keyrate.skr(2, 1.0e4, 0.0, 0.0).skr == pytest.approx(5000.0)


def test_skr_sign_change_at_threshold():
    for d in (2, 3):
        t = keyrate.qber_threshold(d)
        at = keyrate.skr(d, 1.0, t, t, f=1.0)
        assert abs(at.skr) < 1e-3  # |skr| < 1e-3 * raw at the root
        below = keyrate.skr(d, 1.0, t - 1e-4, t - 1e-4, f=1.0)
        above = keyrate.skr(d, 1.0, t + 1e-4, t + 1e-4, f=1.0)
        assert below.skr > 0.0 and below.secure
        assert above.skr == 0.0 and not above.secure


def test_skr_monotone_in_error():
    grid = np.linspace(0.0, keyrate.qber_threshold(3), 40)
    values = [keyrate.skr(3, 1000.0, e, e, f=1.0).skr for e in grid]
    assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))


def test_skr_clamps_and_flags():
    rep = keyrate.skr(2, 1000.0, 0.25, 0.25)
    assert rep.skr == 0.0
    assert not rep.secure
    with pytest.raises(ValueError):
        keyrate.skr(2, -1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        keyrate.skr(2, 1.0, 0.0, 0.0, f=0.9)


def test_report_round_trip_dict():
    rep = keyrate.skr(3, 4000.0, 0.05, 0.06)
    payload = rep.to_dict()
    assert payload["dimension"] == 3
    assert payload["secure"] is True
    assert payload["skr_bits_per_s"] == pytest.approx(rep.skr)
    assert payload["raw_rate_hz"] == pytest.approx(4000.0)
