"""Physical-layer model of an entangled-pair wavelength channel.

Source brightness with pump saturation, per-arm loss chains and detector
parameters, the Voigt temporal profile of the coincidence peak, expected
true/accidental rates, and assembly of expected coincidence matrices for
both measurement bases.

Default source/apparatus numbers are the frozen output of
``python -m fbqkd.calibrate`` (see that module for the fitting targets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import voigt_profile

from .qudit import Basis, BellStateSpec

__all__ = [
    "ApparatusParams",
    "CoincidenceMatrix",
    "LinkParams",
    "LinkRates",
    "SourceModel",
    "TemporalProfile",
    "channel_rates",
    "expected_matrix",
    "expected_rates",
    "heralded_g2",
    "pair_rate",
    "window_efficiency",
]

# --- Calibrated defaults (frozen by fbqkd.calibrate) -----------------------
# Effective per-mode brightness of the strongest comb channel, pairs/s/mW^2
# per GHz of resonance linewidth, including collection factors that are not
# modeled individually.
CALIBRATED_BRIGHTNESS = 1.57e7
# Pump power where two-photon absorption/free-carrier loss halves the
# quadratic pair-rate growth, and the empirical rolloff exponent.
CALIBRATED_SATURATION_MW = 5.5
CALIBRATED_SATURATION_EXPONENT = 2.0
# Fraction of wall time both analyzers spend in the matched Z basis; each of
# the d^2 X-setting pairs gets this divided by d^2.
CALIBRATED_DUTY_CYCLE = 0.31
# Multi-pair contamination convention factor of the three-fold heralded
# autocorrelation estimate (thermal per-mode statistics give ~2).
G2_CONVENTION_FACTOR = 2.2


@dataclass(frozen=True)
class SourceModel:
    """Spontaneous pair source pumped through a saturating cavity.

    Per-mode pair rate: brightness * linewidth * P^2 / (1 + (P/P_sat)^k).
    """

    brightness: float = CALIBRATED_BRIGHTNESS  # pairs/s/mW^2/GHz
    linewidth_ghz: float = 0.41
    saturation_power_mw: float = CALIBRATED_SATURATION_MW
    saturation_exponent: float = CALIBRATED_SATURATION_EXPONENT

    def __post_init__(self) -> None:
        if self.brightness < 0.0:
            raise ValueError(f"brightness must be non-negative, got {self.brightness}")
        if self.linewidth_ghz <= 0.0:
            raise ValueError(f"linewidth must be positive, got {self.linewidth_ghz}")
        if self.saturation_power_mw <= 0.0:
            raise ValueError(
                f"saturation power must be positive, got {self.saturation_power_mw}"
            )
        if self.saturation_exponent <= 0.0:
            raise ValueError(
                f"saturation exponent must be positive, got {self.saturation_exponent}"
            )


@dataclass(frozen=True)
class ApparatusParams:
    """Loss chain, detectors, and analyzer bookkeeping for both users.

    Losses are per user (symmetric arms). The X analyzer inserts
    ``x_basis_extra_loss_db`` additional loss per arm. ``duty_cycle`` is the
    matched-basis wall-time fraction (see module docstring).
    ``x_infidelity_d4/d5`` model the residual electro-optic mixing error of
    high-dimensional X projections under the modulation-index ceiling.
    """

    loss_per_user_db: float = 17.5
    x_basis_extra_loss_db: float = 3.0
    detector_efficiency: float = 0.76
    dark_count_rate_hz: float = 350.0
    rf_frequency_ghz: float = 21.23
    modulation_index: float = 1.2
    duty_cycle: float = CALIBRATED_DUTY_CYCLE
    x_infidelity_d4: float = 0.08
    x_infidelity_d5: float = 0.20

    def __post_init__(self) -> None:
        if self.loss_per_user_db < 0.0 or self.x_basis_extra_loss_db < 0.0:
            raise ValueError("losses must be non-negative")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ValueError(
                f"detector efficiency must lie in (0, 1], got {self.detector_efficiency}"
            )
        if self.dark_count_rate_hz < 0.0:
            raise ValueError(
                f"dark count rate must be non-negative, got {self.dark_count_rate_hz}"
            )
        if self.modulation_index > 1.2 + 1e-12:
            raise ValueError(
                f"modulation index above the 1.2 drive ceiling: {self.modulation_index}"
            )
        if not 0.0 < self.duty_cycle <= 0.5:
            raise ValueError(
                f"duty cycle must lie in (0, 0.5] so Z and X fit one dwell period, "
                f"got {self.duty_cycle}"
            )

    def x_projection_infidelity(self, dimension: int) -> float:
        """Residual X-basis mixing error for the given dimension."""
        if dimension <= 3:
            return 0.0
        if dimension == 4:
            return self.x_infidelity_d4
        return self.x_infidelity_d5


@dataclass(frozen=True)
class TemporalProfile:
    """Voigt-shaped coincidence-peak profile: Gaussian jitter (sigma) from the
    detectors convolved with the Lorentzian (gamma, HWHM) biphoton envelope.
    Widths in picoseconds."""

    gaussian_sigma_ps: float = 123.2
    lorentzian_gamma_ps: float = 99.3

    def __post_init__(self) -> None:
        if self.gaussian_sigma_ps < 0.0 or self.lorentzian_gamma_ps < 0.0:
            raise ValueError("profile widths must be non-negative")
        if self.gaussian_sigma_ps == 0.0 and self.lorentzian_gamma_ps == 0.0:
            raise ValueError("profile needs a nonzero width")

    def density(self, delay_ps: float | np.ndarray) -> float | np.ndarray:
        """Normalized arrival-time-difference density, 1/ps."""
        return voigt_profile(
            np.asarray(delay_ps, dtype=float),
            self.gaussian_sigma_ps,
            self.lorentzian_gamma_ps,
        )

    def fwhm_ps(self) -> float:
        """Full width at half maximum of the profile, by bisection."""
        peak = float(self.density(0.0))
        lo = 0.0
        hi = 2.0 * (self.gaussian_sigma_ps + self.lorentzian_gamma_ps) + 1.0
        while float(self.density(hi)) > 0.5 * peak:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if float(self.density(mid)) > 0.5 * peak:
                lo = mid
            else:
                hi = mid
        return lo + hi  # 2 * half-width


@dataclass(frozen=True)
class LinkParams:
    """Operating point of one channel of the link."""

    power_on_chip_mw: float = 3.5
    coincidence_window_ps: float = 250.0  # half-width: |dt| <= window counts
    applied_attenuation_db: float = 0.0  # split evenly between the two arms
    dimension: int = 3
    integration_time_s: float = 1.0

    def __post_init__(self) -> None:
        if self.power_on_chip_mw < 0.0:
            raise ValueError(f"power must be non-negative, got {self.power_on_chip_mw}")
        if self.coincidence_window_ps < 0.0:
            raise ValueError(
                f"coincidence window must be non-negative, got "
                f"{self.coincidence_window_ps}"
            )
        if self.applied_attenuation_db < 0.0:
            raise ValueError(
                f"attenuation must be non-negative, got {self.applied_attenuation_db}"
            )
        if not 2 <= self.dimension <= 5:
            raise ValueError(f"dimension must lie in 2..5, got {self.dimension}")
        if self.integration_time_s <= 0.0:
            raise ValueError(
                f"integration time must be positive, got {self.integration_time_s}"
            )


class LinkRates(NamedTuple):
    """Expected always-on rates at one operating point (all per second).

    ``true_rate`` is per matched mode pair as returned by
    :func:`expected_rates`; :func:`channel_rates` scales it to the channel
    total. Singles are per outcome detector; ``accidental_rate`` is per
    Alice-detector/Bob-detector pair.
    """

    true_rate: float
    singles_alice: float
    singles_bob: float
    accidental_rate: float


@dataclass(frozen=True)
class CoincidenceMatrix:
    """d x d key-mapped coincidence counts accumulated over one integration."""

    basis: Basis
    counts: np.ndarray
    integration_time_s: float

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"counts must be a square matrix, got {counts.shape}")
        if np.any(counts < 0.0):
            raise ValueError("counts must be non-negative")
        if self.integration_time_s <= 0.0:
            raise ValueError(
                f"integration time must be positive, got {self.integration_time_s}"
            )
        object.__setattr__(self, "counts", counts)

    @property
    def dimension(self) -> int:
        return self.counts.shape[0]

    def total(self) -> float:
        return float(self.counts.sum())


def pair_rate(src: SourceModel, power_mw: float) -> float:
    """Per-mode generated pair rate at the given on-chip pump power, 1/s."""
    if power_mw < 0.0:
        raise ValueError(f"power must be non-negative, got {power_mw}")
    quadratic = src.brightness * src.linewidth_ghz * power_mw**2
    rolloff = 1.0 + (power_mw / src.saturation_power_mw) ** src.saturation_exponent
    return quadratic / rolloff


@lru_cache(maxsize=4096)
def _window_efficiency_cached(sigma: float, gamma: float, window_ps: float) -> float:
    if math.isinf(window_ps):
        lo, hi = -math.inf, math.inf
    else:
        lo, hi = -window_ps, window_ps
    value, _ = quad(
        lambda t: voigt_profile(t, sigma, gamma), lo, hi, limit=200
    )
    return float(value)


def window_efficiency(profile: TemporalProfile, window_ps: float) -> float:
    """Fraction of true coincidences inside |dt| <= window_ps.

    Integral of the Voigt arrival-difference density over the acceptance
    window; 0 at zero width, -> 1 as the window opens.
    """
    if window_ps < 0.0:
        raise ValueError(f"window must be non-negative, got {window_ps}")
    if window_ps == 0.0:
        return 0.0
    return _window_efficiency_cached(
        profile.gaussian_sigma_ps, profile.lorentzian_gamma_ps, float(window_ps)
    )


def arm_transmission(
    app: ApparatusParams,
    attenuation_db: float = 0.0,
    basis: Basis = Basis.Z,
) -> float:
    """One arm's photon survival probability including detector efficiency."""
    loss_db = app.loss_per_user_db + attenuation_db / 2.0
    if basis is Basis.X:
        loss_db += app.x_basis_extra_loss_db
    return 10.0 ** (-loss_db / 10.0) * app.detector_efficiency


def expected_rates(
    src: SourceModel,
    app: ApparatusParams,
    lp: LinkParams,
    basis: Basis = Basis.Z,
    profile: TemporalProfile | None = None,
) -> LinkRates:
    """Expected always-on rates of one matched mode pair and its detectors.

    true_rate  = R_p * t_A * t_B * eta(window)          (per mode pair)
    singles    = R_p * t_arm + dark rate                (per outcome detector)
    accidental = singles_A * singles_B * 2*window       (per detector pair)

    with t_arm the arm transmission for the requested basis (the X analyzer
    adds its extra loss) and eta the Voigt window efficiency.
    """
    profile = profile or TemporalProfile()
    rp = pair_rate(src, lp.power_on_chip_mw)
    t_arm = arm_transmission(app, lp.applied_attenuation_db, basis)
    eta = window_efficiency(profile, lp.coincidence_window_ps)
    true = rp * t_arm * t_arm * eta
    singles = rp * t_arm + app.dark_count_rate_hz
    accidental = singles * singles * 2.0 * lp.coincidence_window_ps * 1e-12
    return LinkRates(
        true_rate=true,
        singles_alice=singles,
        singles_bob=singles,
        accidental_rate=accidental,
    )


def channel_rates(rates: LinkRates, dimension: int) -> LinkRates:
    """Scale per-mode true rate to the channel total over d matched pairs."""
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    return rates._replace(true_rate=rates.true_rate * dimension)


def expected_matrix(
    state: BellStateSpec,
    basis: Basis,
    rates: LinkRates,
    intrinsic_error: float,
    lp: LinkParams,
    duty_cycle: float = 1.0,
) -> CoincidenceMatrix:
    """Expected d x d key-mapped coincidence matrix for one basis.

    ``rates.true_rate`` is the channel-total true coincidence rate (use
    :func:`channel_rates` on the output of :func:`expected_rates`). True
    counts put fraction (1 - intrinsic_error) on the diagonal and spread the
    rest uniformly off-diagonal; accidentals add uniformly at
    ``rates.accidental_rate`` per cell. Z counts carry ``duty_cycle`` of the
    integration time, X counts ``duty_cycle / d^2`` (one of d^2 setting
    pairs active at a time).
    """
    if not 0.0 <= intrinsic_error < 1.0:
        raise ValueError(f"intrinsic error must lie in [0, 1), got {intrinsic_error}")
    if not 0.0 < duty_cycle <= 1.0:
        raise ValueError(f"duty cycle must lie in (0, 1], got {duty_cycle}")
    d = state.dimension
    if d != lp.dimension:
        raise ValueError(
            f"state dimension {d} does not match link dimension {lp.dimension}"
        )
    duty = duty_cycle if basis is Basis.Z else duty_cycle / (d * d)
    cell_rates = np.full((d, d), rates.accidental_rate, dtype=float)
    if d > 1:
        off_diag = intrinsic_error * rates.true_rate / (d * d - d)
        cell_rates += off_diag
        np.fill_diagonal(
            cell_rates,
            rates.accidental_rate + (1.0 - intrinsic_error) * rates.true_rate / d,
        )
    counts = cell_rates * duty * lp.integration_time_s
    return CoincidenceMatrix(
        basis=basis, counts=counts, integration_time_s=lp.integration_time_s
    )


def heralded_g2(
    src: SourceModel,
    lp: LinkParams,
    convention_factor: float = G2_CONVENTION_FACTOR,
) -> float:
    """Heralded zero-delay autocorrelation estimate of the source.

    Multi-pair contamination of the heralded photon within the coincidence
    window: g2 ~ convention * R_p * 2*window. The convention factor absorbs
    the detector arrangement of the three-fold estimate; per-mode thermal
    statistics put it near 2.
    """
    rp = pair_rate(src, lp.power_on_chip_mw)
    if rp <= 0.0:
        raise ValueError("heralded g2 undefined: zero heralding rate")
    return convention_factor * rp * 2.0 * lp.coincidence_window_ps * 1e-12
