"""Statistical validation: autocorrelation, Welch PSD, NIST SP800-22 subset.

The implemented SP800-22 tests are Frequency (monobit), Block Frequency,
Runs, Longest Run of Ones, Cumulative Sums (forward and reverse), Spectral
(FFT), Serial (two p-values) and Approximate Entropy — the tests whose
statistics are self-contained.  Each test maps a 0/1 bit array to one or two
p-values; :func:`nist_subset` runs them over disjoint sequences and
aggregates the SP800-22 acceptance numbers: the pass rate (fraction of
sequences with p >= 0.01) and a 10-bin chi-squared uniformity p-value over
the per-sequence p-values.

References for the statistics are the standard SP800-22 formulas; the
long-run category tables below are the published constants for block sizes
M = 8, 128 and 10^4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import rfft
from scipy.signal import welch
from scipy.special import erfc, gammaincc, ndtr

from .model import BitStream

__all__ = [
    "TestReport",
    "autocorrelation",
    "psd_welch",
    "frequency_test",
    "block_frequency_test",
    "runs_test",
    "longest_run_test",
    "cumulative_sums_test",
    "spectral_test",
    "serial_test",
    "approximate_entropy_test",
    "nist_subset",
    "uniformity_pvalue",
    "pass_rate_band",
    "NIST_SUBSET_TESTS",
]


@dataclass(frozen=True)
class TestReport:
    test_name: str
    per_sequence_pvalues: tuple
    pass_rate: float
    uniformity_pvalue: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_sequence_pvalues", tuple(float(p) for p in self.per_sequence_pvalues)
        )
        for p in self.per_sequence_pvalues:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p-value {p} outside [0, 1]")
        if not 0.0 <= self.pass_rate <= 1.0:
            raise ValueError("pass_rate outside [0, 1]")
        if not 0.0 <= self.uniformity_pvalue <= 1.0:
            raise ValueError("uniformity_pvalue outside [0, 1]")


# ---------------------------------------------------------------------------
# raw-signal diagnostics
# ---------------------------------------------------------------------------

def autocorrelation(samples, max_lag: int) -> np.ndarray:
    """Biased normalised autocorrelation r(0..max_lag), r(0) = 1.

    r(k) = sum_i (x_i - xbar)(x_{i+k} - xbar) / sum_i (x_i - xbar)^2,
    computed with an FFT over the zero-padded sequence.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if x.size < 10 * max_lag:
        raise ValueError("need at least 10*max_lag samples")
    x = x - x.mean()
    denom = float(x @ x)
    if denom <= 0.0:
        raise ValueError("zero variance: autocorrelation undefined")
    nfft = 1 << int(np.ceil(np.log2(2 * x.size)))
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec))[: max_lag + 1]
    return acov / acov[0]


def psd_welch(samples, sample_rate_hz: float, segment_len: int):
    """One-sided Welch PSD (Hann window, 50% overlap).

    Returns ``(frequencies_hz, density)`` arrays.
    """
    x = np.asarray(samples, dtype=np.float64)
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ValueError("segment_len must be a power of two >= 2")
    if x.size < 2 * segment_len:
        raise ValueError("need at least 2 segments of data")
    if sample_rate_hz <= 0:
        raise ValueError("sample_rate_hz must be > 0")
    freqs, density = welch(
        x,
        fs=sample_rate_hz,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend="constant",
        return_onesided=True,
    )
    return freqs, density


# ---------------------------------------------------------------------------
# SP800-22 subset — each test takes a 0/1 uint8 array, returns p-value(s)
# ---------------------------------------------------------------------------

def _check_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("bits must be a nonempty one-dimensional 0/1 array")
    if arr.max() > 1:
        raise ValueError("bits must be 0/1")
    return arr


def frequency_test(bits) -> float:
    """Monobit test: p = erfc(|S_n|/sqrt(n) / sqrt(2))."""
    eps = _check_bits(bits)
    n = eps.size
    s = 2.0 * float(eps.sum()) - n
    s_obs = abs(s) / math.sqrt(n)
    return float(erfc(s_obs / math.sqrt(2.0)))


def block_frequency_test(bits, block_len: int = 128) -> float:
    eps = _check_bits(bits)
    n_blocks = eps.size // block_len
    if n_blocks < 1:
        raise ValueError("sequence shorter than one block")
    pi = eps[: n_blocks * block_len].reshape(n_blocks, block_len).mean(axis=1)
    chi_sq = 4.0 * block_len * float(np.sum((pi - 0.5) ** 2))
    return float(gammaincc(n_blocks / 2.0, chi_sq / 2.0))


def runs_test(bits) -> float:
    eps = _check_bits(bits)
    n = eps.size
    pi = float(eps.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v_obs = 1 + int(np.count_nonzero(eps[1:] != eps[:-1]))
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return float(erfc(num / den))


_LONGEST_RUN_TABLES = (
    # (min_n, block_len, categories, probabilities)
    (750_000, 10_000, (10, 11, 12, 13, 14, 15, 16),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6_272, 128, (4, 5, 6, 7, 8, 9),
     (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 2, 3, 4),
     (0.2148, 0.3672, 0.2305, 0.1875)),
)


def _longest_run_per_block(blocks: np.ndarray) -> np.ndarray:
    """Longest run of ones in each row of a 0/1 matrix."""
    n_blocks, m = blocks.shape
    idx = np.arange(m)
    # index of the most recent zero at or before each position (-1 if none)
    last_zero = np.maximum.accumulate(np.where(blocks == 0, idx, -1), axis=1)
    run_len = (idx - last_zero) * blocks
    return run_len.max(axis=1)


def longest_run_test(bits) -> float:
    """Longest-run-of-ones test; needs at least 128 bits."""
    eps = _check_bits(bits)
    n = eps.size
    if n < 128:
        raise ValueError("longest-run test needs at least 128 bits")
    for min_n, block_len, cats, probs in _LONGEST_RUN_TABLES:
        if n >= min_n:
            break
    n_blocks = n // block_len
    blocks = eps[: n_blocks * block_len].reshape(n_blocks, block_len)
    longest = _longest_run_per_block(blocks)
    clipped = np.clip(longest, cats[0], cats[-1])
    v = np.array([np.count_nonzero(clipped == c) for c in cats], dtype=np.float64)
    expected = n_blocks * np.asarray(probs)
    chi_sq = float(np.sum((v - expected) ** 2 / expected))
    k = len(cats) - 1
    return float(gammaincc(k / 2.0, chi_sq / 2.0))


def _cusum_pvalue(z: float, n: int) -> float:
    sqrt_n = math.sqrt(n)
    k_lo = int(math.floor((-n / z + 1.0) / 4.0))
    k_hi = int(math.floor((n / z - 1.0) / 4.0))
    k = np.arange(k_lo, k_hi + 1)
    term1 = float(np.sum(ndtr((4 * k + 1) * z / sqrt_n) - ndtr((4 * k - 1) * z / sqrt_n)))
    k_lo2 = int(math.floor((-n / z - 3.0) / 4.0))
    k2 = np.arange(k_lo2, k_hi + 1)
    term2 = float(np.sum(ndtr((4 * k2 + 3) * z / sqrt_n) - ndtr((4 * k2 + 1) * z / sqrt_n)))
    return min(max(1.0 - term1 + term2, 0.0), 1.0)


def cumulative_sums_test(bits) -> tuple[float, float]:
    """Cumulative-sums test, forward and reverse p-values."""
    eps = _check_bits(bits)
    n = eps.size
    x = 2.0 * eps.astype(np.float64) - 1.0
    z_fwd = float(np.abs(np.cumsum(x)).max())
    z_rev = float(np.abs(np.cumsum(x[::-1])).max())
    return _cusum_pvalue(z_fwd, n), _cusum_pvalue(z_rev, n)


def spectral_test(bits) -> float:
    """Discrete Fourier transform (spectral) test."""
    eps = _check_bits(bits)
    n = eps.size
    x = 2.0 * eps.astype(np.float64) - 1.0
    spectrum = np.abs(rfft(x))[: n // 2]
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = int(np.count_nonzero(spectrum < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return float(erfc(abs(d) / math.sqrt(2.0)))


def _pattern_counts(eps: np.ndarray, m: int) -> np.ndarray:
    """Counts of all overlapping m-bit patterns in the circular extension."""
    if m == 0:
        return np.array([eps.size], dtype=np.int64)
    ext = np.concatenate([eps, eps[: m - 1]])
    windows = np.lib.stride_tricks.sliding_window_view(ext, m)
    weights = 1 << np.arange(m - 1, -1, -1)
    values = windows @ weights
    return np.bincount(values, minlength=1 << m)


def _psi_sq(eps: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = _pattern_counts(eps, m).astype(np.float64)
    n = eps.size
    return float((1 << m) / n * np.sum(counts**2) - n)


def serial_test(bits, m: int = 8) -> tuple[float, float]:
    """Serial test: p-values for the first and second psi-square differences.

    For a statistically meaningful result keep m below log2(n) - 2; the hard
    requirement is only that m-bit windows fit the sequence.
    """
    eps = _check_bits(bits)
    if m < 2:
        raise ValueError("serial test needs m >= 2")
    if m >= eps.size:
        raise ValueError("pattern length m too large for the sequence")
    psi_m = _psi_sq(eps, m)
    psi_m1 = _psi_sq(eps, m - 1)
    psi_m2 = _psi_sq(eps, m - 2)
    d1 = psi_m - psi_m1
    d2 = psi_m - 2.0 * psi_m1 + psi_m2
    p1 = float(gammaincc(2 ** (m - 2), d1 / 2.0))
    p2 = float(gammaincc(2 ** (m - 3), d2 / 2.0))
    return p1, p2


def approximate_entropy_test(bits, m: int = 6) -> float:
    """Approximate-entropy test.

    Keep m below log2(n) - 5 for statistical validity; the hard requirement
    is only that (m+1)-bit windows fit the sequence.
    """
    eps = _check_bits(bits)
    n = eps.size
    if m < 1:
        raise ValueError("approximate-entropy test needs m >= 1")
    if m + 1 >= n:
        raise ValueError("pattern length m too large for the sequence")

    def phi(j: int) -> float:
        counts = _pattern_counts(eps, j).astype(np.float64)
        c = counts[counts > 0] / n
        return float(np.sum(c * np.log(c)))

    ap_en = phi(m) - phi(m + 1)
    chi_sq = 2.0 * n * (math.log(2.0) - ap_en)
    return float(gammaincc(2 ** (m - 1), chi_sq / 2.0))


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def uniformity_pvalue(pvalues) -> float:
    """10-bin chi-squared test that p-values are uniform on (0, 1)."""
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        raise ValueError("no p-values")
    bins = np.minimum((p * 10).astype(int), 9)
    counts = np.bincount(bins, minlength=10)
    expected = p.size / 10.0
    chi_sq = float(np.sum((counts - expected) ** 2 / expected))
    return float(gammaincc(9 / 2.0, chi_sq / 2.0))


def pass_rate_band(n_sequences: int, significance: float = 0.01) -> tuple[float, float]:
    """Three-sigma binomial band for the expected pass rate.

    With per-sequence significance alpha, pass rates are expected inside
    (1-alpha) +- 3 sqrt(alpha(1-alpha)/n).
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    p0 = 1.0 - significance
    delta = 3.0 * math.sqrt(p0 * significance / n_sequences)
    return max(0.0, p0 - delta), min(1.0, p0 + delta)


# (name, callable, number of p-values per sequence)
NIST_SUBSET_TESTS = (
    ("frequency", frequency_test, 1),
    ("block_frequency", block_frequency_test, 1),
    ("runs", runs_test, 1),
    ("longest_run", longest_run_test, 1),
    ("cumulative_sums", cumulative_sums_test, 2),
    ("spectral", spectral_test, 1),
    ("serial", serial_test, 2),
    ("approximate_entropy", approximate_entropy_test, 1),
)

_REPORT_NAMES = {
    "cumulative_sums": ("cumulative_sums_forward", "cumulative_sums_reverse"),
    "serial": ("serial_1", "serial_2"),
}


def nist_subset(
    bits: BitStream, n_sequences: int, seq_len_bits: int
) -> list[TestReport]:
    """Run the SP800-22 subset over disjoint sequences and aggregate.

    Tests yielding two p-values per sequence (cumulative sums, serial)
    produce two report rows.  ``seq_len_bits`` must be at least 128 so every
    test in the subset is applicable.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    if seq_len_bits < 128:
        raise ValueError("seq_len_bits must be >= 128")
    if bits.count < n_sequences * seq_len_bits:
        raise ValueError(
            f"insufficient bits: need {n_sequences * seq_len_bits}, "
            f"have {bits.count}"
        )
    arr = bits.as_bit_array()
    collected: dict[str, list[float]] = {}
    order: list[str] = []
    for name, func, n_p in NIST_SUBSET_TESTS:
        row_names = _REPORT_NAMES.get(name, (name,))
        for rn in row_names:
            collected[rn] = []
            order.append(rn)
    for s in range(n_sequences):
        seq = arr[s * seq_len_bits : (s + 1) * seq_len_bits]
        for name, func, n_p in NIST_SUBSET_TESTS:
            result = func(seq)
            row_names = _REPORT_NAMES.get(name, (name,))
            if n_p == 1:
                collected[row_names[0]].append(float(result))
            else:
                for rn, p in zip(row_names, result):
                    collected[rn].append(float(p))
    reports = []
    for rn in order:
        ps = collected[rn]
        reports.append(
            TestReport(
                test_name=rn,
                per_sequence_pvalues=tuple(ps),
                pass_rate=float(np.mean([p >= 0.01 for p in ps])),
                uniformity_pvalue=uniformity_pvalue(ps),
            )
        )
    return reports
