"""Seeded time-domain simulator of the full signal chain.

Pipeline per internal step (running at ``sample_rate * oversample_factor``):

1. advance the laser phase: two independent Wiener processes (quantum with
   diffusion ``q/P``, classical with diffusion ``c``) merged into a single
   Gaussian increment stream;
2. form the interferometer phase difference ``dtheta(t) = theta(t) -
   theta(t - T_d)`` with a delay of ``L`` internal steps;
3. photocurrent ``~ P * sin(dtheta + quadrature_offset)``;
4. scale to volts and add white electronic noise;
5. single-pole low-pass at the TIA cutoff;
6. decimate to the ADC sample rate;
7. remove DC and quantise to ``adc_bits`` over ``+-range_sigmas * sigma``.

Gain bookkeeping
----------------
All variance coefficients are referred to the measurement plane (after the
TIA filter), because that is where the calibration fits them.  A single-pole
IIR with smoothing ``alpha`` transmits white-noise variance with factor
``g0 = alpha / (2 - alpha)`` and transmits the variance of an L-step
moving-sum (Wiener delay difference, triangular autocovariance) with factor

    kappa_d = g0 * (L + 2 * sum_{m=1}^{L-1} rho^m (L - m)) / L,   rho = 1 - alpha.

The signal amplitude is pre-compensated by ``1/sqrt(kappa_d)`` (plus the
delay-rounding correction ``sqrt(T_d / (L dt))``) and the electronic noise is
injected pre-filter with variance ``F / g0``, so the post-filter variance
matches ``AC P^2 + AQ P + F`` with AC, AQ, F exactly as configured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import lfilter

from . import entropy as _entropy
from .model import LaserNoiseModel, SampleBlock, SignalChainConfig, variance_coefficients

__all__ = [
    "SimulationRun",
    "DriftScenario",
    "StabilityPoint",
    "simulate",
    "simulate_fringe_scan",
    "simulate_stability",
    "derive_seed",
]

PILOT_SAMPLES = 100_000

# sub-stream namespaces for seed derivation
_NS_PILOT = 1
_NS_MAIN = 2
_NS_FRINGE = 3
_NS_STABILITY = 4


@dataclass(frozen=True)
class SimulationRun:
    model: LaserNoiseModel
    chain: SignalChainConfig
    duration: float
    oversample_factor: int = 8
    seed: int = 0
    rf_tones: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if int(self.oversample_factor) < 4:
            raise ValueError("oversample_factor must be >= 4")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        dt = 1.0 / (self.chain.sample_rate_hz * self.oversample_factor)
        if dt >= self.chain.delay_td:
            raise ValueError(
                "internal step must be shorter than the interferometer delay; "
                "raise oversample_factor or sample_rate"
            )


@dataclass(frozen=True)
class DriftScenario:
    """Slow environmental drift applied on top of a SimulationRun."""

    phase_drift_rate: float = 0.0
    power_drift: Callable[[float], float] | None = None
    recalibration_period: float | None = None

    def __post_init__(self) -> None:
        if self.recalibration_period is not None and self.recalibration_period <= 0:
            raise ValueError("recalibration_period must be > 0 when present")


class StabilityPoint(NamedTuple):
    time: float
    variance: float
    applied_phi2: float
    min_entropy: float


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit sub-seed for a named sub-stream."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0])


def _filter_gains(chain: SignalChainConfig, ovs: int) -> tuple[float, float, float, int]:
    """(alpha, g0, kappa_d, L) of the discrete single-pole TIA model."""
    dt = 1.0 / (chain.sample_rate_hz * ovs)
    alpha = 1.0 - math.exp(-2.0 * math.pi * chain.tia_cutoff_hz * dt)
    rho = 1.0 - alpha
    g0 = alpha / (1.0 + rho)
    L = max(1, round(chain.delay_td / dt))
    m = np.arange(1, L)
    kappa_d = g0 * (L + 2.0 * float(np.sum(rho**m * (L - m)))) / L
    return alpha, g0, kappa_d, L


def _analog_chain(
    model: LaserNoiseModel,
    chain: SignalChainConfig,
    n_samples: int,
    ovs: int,
    rng: np.random.Generator,
    rf_tones: tuple[tuple[float, float], ...] = (),
) -> np.ndarray:
    """Decimated analog voltage (volts), DC not yet removed."""
    dt = 1.0 / (chain.sample_rate_hz * ovs)
    alpha, g0, kappa_d, L = _filter_gains(chain, ovs)
    # warm up past the delay buffer and ~8 filter time constants
    n_settle = int(math.ceil(8.0 / (2.0 * math.pi * chain.tia_cutoff_hz * dt)))
    n_warm = L + n_settle
    n_steps = n_warm + n_samples * ovs

    if model.power_p > 0:
        # combined Wiener increments for the two independent phase processes
        diff_rate = (
            model.quantum_diffusion_q / model.power_p + model.classical_diffusion_c
        )
        inc = rng.normal(0.0, math.sqrt(diff_rate * dt), size=n_steps)
        theta = np.cumsum(inc)
        dtheta = theta[L:] - theta[:-L]
        del inc, theta
        dtheta += chain.quadrature_offset
        np.sin(dtheta, out=dtheta)
        # amplitude pre-compensation: delay-buffer rounding and filter
        # attenuation of the phase-difference spectrum (see module docstring)
        amp = (
            math.sqrt(chain.conversion_gain_a)
            * model.power_p
            * math.sqrt(chain.delay_td / (L * dt))
            / math.sqrt(kappa_d)
        )
        v = dtheta
        v *= amp
    else:
        v = np.zeros(n_steps - L)

    if chain.electronic_noise_f > 0:
        sigma_e = math.sqrt(chain.electronic_noise_f / g0)
        v += rng.normal(0.0, sigma_e, size=v.size)

    for freq, amplitude in rf_tones:
        t = (np.arange(v.size) + L) * dt
        v += amplitude * np.sin(2.0 * math.pi * freq * t)

    filtered = lfilter([alpha], [1.0, -(1.0 - alpha)], v)
    del v
    out = filtered[n_warm - L :][::ovs]
    return np.ascontiguousarray(out[:n_samples])


def simulate(run: SimulationRun) -> SampleBlock:
    """Produce one SampleBlock; bit-identical for identical runs."""
    chain = run.chain
    if run.duration < chain.delay_td:
        raise ValueError("duration too short to fill the delay buffer")
    n_samples = int(round(run.duration * chain.sample_rate_hz))
    if n_samples < 1:
        raise ValueError("duration shorter than one output sample")

    # pilot sub-run sets the ADC range the way a scope range would be chosen
    pilot_rng = np.random.default_rng(derive_seed(run.seed, _NS_PILOT))
    pilot = _analog_chain(
        run.model, chain, PILOT_SAMPLES, run.oversample_factor, pilot_rng, run.rf_tones
    )
    sigma_configured = float(np.std(pilot - pilot.mean()))
    del pilot
    if sigma_configured <= 0.0:
        raise ValueError("sigma_configured <= 0: the configured chain is silent")

    rng = np.random.default_rng(derive_seed(run.seed, _NS_MAIN))
    analog = _analog_chain(
        run.model, chain, n_samples, run.oversample_factor, rng, run.rf_tones
    )
    analog -= analog.mean()

    half_range = chain.adc_range_sigmas * sigma_configured
    n_codes = 1 << chain.adc_bits
    adc_scale = 2.0 * half_range / n_codes
    lo, hi = -(n_codes // 2), n_codes // 2 - 1
    codes = np.clip(np.rint(analog / adc_scale), lo, hi).astype(np.int16)

    return SampleBlock(
        samples=codes,
        adc_bits=chain.adc_bits,
        sample_rate_hz=chain.sample_rate_hz,
        adc_scale=adc_scale,
        origin="simulated",
        rng_seed=run.seed,
    )


def simulate_fringe_scan(
    run: SimulationRun, phi2_values: list[float]
) -> list[tuple[float, float]]:
    """Variance at each interferometer phase, one seeded sub-run per point."""
    if len(phi2_values) < 8:
        raise ValueError("need at least 8 fringe points")
    results = []
    for i, phi2 in enumerate(phi2_values):
        sub = replace(
            run,
            chain=replace(run.chain, quadrature_offset=phi2 - math.pi / 2.0),
            seed=derive_seed(run.seed, _NS_FRINGE, i),
        )
        block = simulate(sub)
        results.append((float(phi2), block.variance_volts()))
    return results


def _point_min_entropy(
    sigma_sq_meas: float,
    power: float,
    coeffs: tuple[float, float, float],
    chain: SignalChainConfig,
) -> float:
    """Min-entropy for one stability point, from the measured variance.

    The quadrature error is inferred from how far the measured variance sits
    below the calibrated maximum (cos^2 roll-off of both phase-noise terms);
    the electronic floor F is unaffected by the drift.
    """
    ac, aq, f = coeffs
    phase_var_max = aq * power + ac * power**2
    if phase_var_max <= 0 or sigma_sq_meas <= 0:
        return 0.0
    cos_sq = min(max((sigma_sq_meas - f) / phase_var_max, 0.0), 1.0)
    qcnr = aq * power * cos_sq / (ac * power**2 * cos_sq + f)
    if qcnr <= 0.0:
        return 0.0
    sigma_sq_q = _entropy.quantum_variance(sigma_sq_meas, qcnr)
    v_half = chain.adc_range_sigmas * math.sqrt(sigma_sq_meas)
    return _entropy.min_entropy_gaussian(
        math.sqrt(sigma_sq_q), (-v_half, v_half), chain.adc_bits
    )


def simulate_stability(
    run: SimulationRun,
    scenario: DriftScenario,
    total_time: float,
    report_interval: float,
) -> list[StabilityPoint]:
    """Drifted long-term run, one short measurement per report interval.

    The interferometer phase drifts at ``scenario.phase_drift_rate`` away
    from the operating point; when ``recalibration_period`` is set, each
    recalibration re-centres the phase (fringe-scan servo) before the first
    measurement that follows it.  Each report point carries the measured
    variance and the min-entropy recomputed from it.
    """
    if report_interval <= 0:
        raise ValueError("report_interval must be > 0")
    if total_time < 10.0 * report_interval:
        raise ValueError("total_time must cover at least 10 report intervals")

    coeffs = variance_coefficients(run.model, run.chain)
    n_points = int(math.floor(total_time / report_interval)) + 1
    points = []
    for k in range(n_points):
        t = k * report_interval
        if scenario.recalibration_period is not None:
            last_recal = math.floor(t / scenario.recalibration_period) * (
                scenario.recalibration_period
            )
        else:
            last_recal = 0.0
        delta = run.chain.quadrature_offset + scenario.phase_drift_rate * (
            t - last_recal
        )
        power = run.model.power_p
        if scenario.power_drift is not None:
            power = power * float(scenario.power_drift(t))
        sub = replace(
            run,
            model=replace(run.model, power_p=power),
            chain=replace(run.chain, quadrature_offset=delta),
            seed=derive_seed(run.seed, _NS_STABILITY, k),
        )
        block = simulate(sub)
        sigma_sq = block.variance_volts()
        h_min = _point_min_entropy(sigma_sq, power, coeffs, run.chain)
        points.append(
            StabilityPoint(
                time=t,
                variance=sigma_sq,
                applied_phi2=math.pi / 2.0 + delta,
                min_entropy=h_min,
            )
        )
    return points
