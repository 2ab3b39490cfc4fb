from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbqkd.qudit import (
    Basis,
    BellStateSpec,
    MeasurementSetting,
    OutcomeCorrelation,
    default_correlation,
    intrinsic_error_rates,
    mub_vector,
    projection_probability,
    x_joint_distribution,
    z_joint_distribution,
)


def _flat_state(d, phases=None):
    return BellStateSpec(
        dimension=d,
        center_mode=40,
        mode_phases=tuple(phases) if phases is not None else (0.0,) * d,
    )


def test_mub_vectors_are_mutually_unbiased():
    for d in (2, 3, 4, 5):
        for j in range(d):
            zj = mub_vector(d, Basis.Z, j)
            assert np.linalg.norm(zj) == pytest.approx(1.0, abs=1e-12)
            for k in range(d):
                xk = mub_vector(d, Basis.X, k)
                overlap = abs(np.vdot(zj, xk)) ** 2
                assert overlap == pytest.approx(1.0 / d, abs=1e-12)


def test_mub_vector_rejects_bad_indices():
    with pytest.raises(ValueError):
        mub_vector(3, Basis.Z, 3)
    with pytest.raises(ValueError):
        mub_vector(3, Basis.X, -1)
    with pytest.raises(ValueError):
        mub_vector(1, Basis.Z, 0)


def test_z_distribution_is_diagonal_uniform():
    rng = np.random.default_rng(11)
    for d in (2, 3, 4, 5):
        state = _flat_state(d, rng.uniform(-math.pi, math.pi, size=d))
        pz = z_joint_distribution(state)
        assert pz.shape == (d, d)
        assert np.allclose(pz, np.eye(d) / d)


def test_ideal_x_support_is_anticorrelated():
    # zero spectral phase: X x X outcomes live on j + k = 0 (mod d)
    for d in (2, 3, 4, 5):
        px = x_joint_distribution(_flat_state(d))
        for j in range(d):
            for k in range(d):
                expect = 1.0 / d if (j + k) % d == 0 else 0.0
                assert px[j, k] == pytest.approx(expect, abs=1e-12)


def test_default_correlation_diagonalizes_ideal_x():
    for d in (2, 3, 4, 5):
        corr = default_correlation(d)
        px = x_joint_distribution(_flat_state(d))
        mapped = np.empty_like(px)
        for k in range(d):
            mapped[:, corr.apply(k)] = px[:, k]
        assert np.trace(mapped) == pytest.approx(1.0, abs=1e-12)


def test_correlation_must_be_bijective():
    OutcomeCorrelation(3, (0, 2, 1))  # fine
    with pytest.raises(ValueError):
        OutcomeCorrelation(3, (0, 0, 1))
    with pytest.raises(ValueError):
        OutcomeCorrelation(3, (0, 1))


@settings(max_examples=40, deadline=None)
@given(
    d=st.integers(min_value=2, max_value=5),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_x_distribution_normalized_under_random_phases(d, seed):
    rng = np.random.default_rng(seed)
    state = _flat_state(d, rng.uniform(-math.pi, math.pi, size=d))
    px = x_joint_distribution(state)
    assert px.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(px >= -1e-15)
    eps_z, _ = intrinsic_error_rates(state)
    assert eps_z == 0.0


def test_infidelity_mixes_toward_uniform():
    state = _flat_state(3)
    pure = x_joint_distribution(state)
    mixed = x_joint_distribution(state, infidelity=0.4)
    assert np.allclose(mixed, 0.6 * pure + 0.4 / 9.0)
    with pytest.raises(ValueError):
        x_joint_distribution(state, infidelity=1.0)
    with pytest.raises(ValueError):
        x_joint_distribution(state, infidelity=-0.1)


def _eps_x_oracle(d, slope, chi):
    """Independent route: explicit DFT matrix + einsum, then the key map."""
    if d % 2 == 1:
        offs = np.arange(-(d // 2), d // 2 + 1)
    else:
        offs = np.array([o for o in range(-(d // 2), d // 2 + 1) if o != 0])
    amps = np.exp(1j * slope * offs) / math.sqrt(d)
    grid = np.outer(np.arange(d), np.arange(d))
    dft = np.exp(2j * np.pi * grid / d) / math.sqrt(d)
    amp = np.einsum("jl,kl,l->jk", np.conj(dft), np.conj(dft), amps)
    px = np.abs(amp) ** 2
    px = (1 - chi) * px + chi / d**2
    mapped = np.empty_like(px)
    for k in range(d):
        mapped[:, (-k) % d] = px[:, k]
    return 1.0 - mapped.trace() / mapped.sum()


def test_intrinsic_errors_match_dft_oracle():
    # phases follow the calibrated comb slope; d >= 4 adds analyzer mixing
    slope = 0.065
    cases = {2: 0.0, 3: 0.0, 4: 0.08, 5: 0.20}
    frozen = {
        2: 0.004219053142605955,
        3: 0.0028136930983577724,
        4: 0.06968027469652838,
        5: 0.16673766572395288,
    }
    for d, chi in cases.items():
        if d % 2 == 1:
            offs = range(-(d // 2), d // 2 + 1)
        else:
            offs = [o for o in range(-(d // 2), d // 2 + 1) if o != 0]
        state = _flat_state(d, [slope * o for o in offs])
        eps_z, eps_x = intrinsic_error_rates(state, x_infidelity=chi)
        assert eps_z == 0.0
        assert eps_x == pytest.approx(_eps_x_oracle(d, slope, chi), abs=1e-12)
        assert eps_x == pytest.approx(frozen[d], abs=1e-12)


def test_analyzer_phase_error_raises_x_error():
    state = _flat_state(3)
    baseline = intrinsic_error_rates(state)[1]
    skewed = intrinsic_error_rates(
        state, alice_template=MeasurementSetting(Basis.X, 0, phase_error=0.15)
    )[1]
    assert baseline == pytest.approx(0.0, abs=1e-12)
    assert skewed > 0.01


def test_projection_probability_bounds():
    state = _flat_state(4, (0.1, -0.3, 0.7, 0.2))
    p = projection_probability(
        state,
        MeasurementSetting(Basis.Z, 1),
        MeasurementSetting(Basis.Z, 1),
    )
    assert p == pytest.approx(0.25, abs=1e-12)
    p = projection_probability(
        state,
        MeasurementSetting(Basis.Z, 1),
        MeasurementSetting(Basis.Z, 2),
    )
    assert p == pytest.approx(0.0, abs=1e-15)


def test_setting_vector_validation():
    with pytest.raises(ValueError):
        MeasurementSetting(Basis.Z, 5).vector(3)
    with pytest.raises(ValueError):
        MeasurementSetting(Basis.X, 0, amplitude_imbalance=(1.0, 1.0)).vector(3)
    with pytest.raises(ValueError):
        MeasurementSetting(Basis.X, 0, amplitude_imbalance=(0.0, 0.0, 0.0)).vector(3)
    with pytest.raises(ValueError):
        MeasurementSetting(Basis.X, 0, amplitude_imbalance=(-1.0, 1.0, 1.0)).vector(3)
    v = MeasurementSetting(Basis.X, 1, amplitude_imbalance=(2.0, 1.0, 1.0)).vector(3)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)


def test_state_validation():
    with pytest.raises(ValueError):
        BellStateSpec(dimension=1, center_mode=4, mode_phases=(0.0,))
    with pytest.raises(ValueError):
        BellStateSpec(dimension=3, center_mode=4, mode_phases=(0.0, 0.0))
    amps = _flat_state(5).amplitudes()
    assert np.linalg.norm(amps) == pytest.approx(1.0, abs=1e-12)
