"""Min-entropy of the quantised signal and the safe extraction budget.

The measured voltage variance mixes quantum noise with classical and
electronic contributions.  Only the quantum part is credited:

    sigma_q^2 = sigma^2 / (1 + 1/QCNR)

The ADC maps ``[-R, R]`` (``R = range_sigmas * sigma_total``) onto ``2^n``
equal bins; a zero-mean Gaussian with std ``sigma_q`` is binned accordingly
(edge bins absorb the saturated tails) and the min-entropy per sample is

    H_inf = -log2(max_bin_probability)

The extractor output fraction follows the leftover hash lemma:
``H_inf/n  -  2*log2(1/eps)/n_in`` per raw bit, for extractor input blocks of
``n_in`` bits and statistical distance ``eps`` from uniform.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .model import EntropyReport

__all__ = [
    "quantum_variance",
    "gaussian_bin_probabilities",
    "min_entropy_gaussian",
    "extraction_ratio",
    "generation_rate",
    "entropy_report",
]

DEFAULT_SECURITY_EPS = 2.0**-50
DEFAULT_EXTRACTOR_N_IN = 4096


def quantum_variance(sigma_sq: float, qcnr: float) -> float:
    """Quantum share of a measured variance given the QCNR."""
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be >= 0")
    if qcnr <= 0:
        raise ValueError("qcnr must be > 0")
    return sigma_sq / (1.0 + 1.0 / qcnr)


def gaussian_bin_probabilities(
    sigma_q: float, v_range: tuple[float, float], n_bits: int
) -> np.ndarray:
    """Probability of each of the 2^n_bits ADC bins under N(0, sigma_q^2).

    The two edge bins absorb the tail mass beyond the range, mirroring a
    saturating quantiser.
    """
    v_min, v_max = v_range
    if sigma_q <= 0:
        raise ValueError("sigma_q must be > 0")
    if not v_max > v_min:
        raise ValueError("v_max must exceed v_min")
    if not 1 <= int(n_bits) <= 16:
        raise ValueError("n_bits must be in [1, 16]")
    edges = np.linspace(v_min, v_max, (1 << n_bits) + 1)
    cdf = ndtr(edges / sigma_q)
    probs = np.diff(cdf)
    probs[0] += cdf[0]
    probs[-1] += 1.0 - cdf[-1]
    return probs


def min_entropy_gaussian(
    sigma_q: float, v_range: tuple[float, float], n_bits: int
) -> float:
    """Min-entropy in bits/sample of the quantised Gaussian (Eq. H_inf)."""
    probs = gaussian_bin_probabilities(sigma_q, v_range, n_bits)
    return float(-np.log2(probs.max()))


def extraction_ratio(
    h_min: float,
    sample_bits: int,
    security_eps: float = DEFAULT_SECURITY_EPS,
    n_in: int = DEFAULT_EXTRACTOR_N_IN,
) -> float:
    """Leftover-hash output fraction per raw input bit.

    ``h_min/sample_bits`` minus the finite-block penalty
    ``2*log2(1/eps)/n_in``, clamped to (0, 1].  Raises if the penalty eats
    the whole budget.
    """
    if not 0 < h_min <= sample_bits:
        raise ValueError("h_min must lie in (0, sample_bits]")
    if not 0 < security_eps < 1:
        raise ValueError("security_eps must lie in (0, 1)")
    if n_in < 1:
        raise ValueError("n_in must be >= 1")
    penalty = 2.0 * math.log2(1.0 / security_eps) / n_in
    ratio = h_min / sample_bits - penalty
    if ratio <= 0:
        raise ValueError(
            f"block too small for requested security: ratio {ratio:.3e} <= 0 "
            f"(penalty {penalty:.3e} with n_in={n_in})"
        )
    return min(ratio, 1.0)


def generation_rate(h_min: float, sample_rate_hz: float) -> float:
    """Potential randomness rate in bits/second: H_inf * f_s."""
    if h_min < 0 or sample_rate_hz < 0:
        raise ValueError("inputs must be nonnegative")
    return h_min * sample_rate_hz


def entropy_report(
    sigma_sq_total: float,
    qcnr: float,
    *,
    adc_bits: int,
    range_sigmas: float = 5.0,
    security_eps: float = DEFAULT_SECURITY_EPS,
    n_in: int = DEFAULT_EXTRACTOR_N_IN,
    min_entropy_override: float | None = None,
) -> EntropyReport:
    """Assemble the full entropy accounting for one operating point.

    The binning distribution uses the quantum std only, while the ADC range
    is set from the total std (the range the digitiser actually sees).
    ``min_entropy_override`` substitutes an externally supplied estimate of
    H_inf (it must not exceed the recomputed value) for deriving the
    extraction budget; the recomputation is otherwise authoritative.
    """
    if sigma_sq_total <= 0:
        raise ValueError("sigma_sq_total must be > 0")
    sigma_sq_q = quantum_variance(sigma_sq_total, qcnr)
    sigma_total = math.sqrt(sigma_sq_total)
    v_half = range_sigmas * sigma_total
    h_min = min_entropy_gaussian(math.sqrt(sigma_sq_q), (-v_half, v_half), adc_bits)
    if min_entropy_override is not None:
        if min_entropy_override > h_min + 1e-9:
            raise ValueError(
                "min_entropy_override exceeds the recomputed min-entropy "
                f"({min_entropy_override:.4f} > {h_min:.4f})"
            )
        if min_entropy_override <= 0:
            raise ValueError("min_entropy_override must be > 0")
        h_min = float(min_entropy_override)
    ratio = extraction_ratio(h_min, adc_bits, security_eps, n_in)
    return EntropyReport(
        qcnr=qcnr,
        sigma_sq_total=sigma_sq_total,
        sigma_sq_quantum=sigma_sq_q,
        min_entropy_bits=h_min,
        samples_bits=adc_bits,
        extraction_ratio=ratio,
    )
