"""Signal diagnostics and the NIST SP800-22 subset.

The worked-example p-values below are the published examples from the
SP800-22 test descriptions (rev 1a), evaluated to full precision.  Where the
implementation is vectorised, a naive pure-Python oracle computes the same
statistic independently.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseqrng.model import BitStream
from phaseqrng.sim import SimulationRun, simulate
from phaseqrng.model import LaserNoiseModel, SignalChainConfig
from phaseqrng.stats import (
    NIST_SUBSET_TESTS,
    TestReport as StatsReport,
    _cusum_pvalue,
    _longest_run_per_block,
    _pattern_counts,
    approximate_entropy_test,
    autocorrelation,
    block_frequency_test,
    cumulative_sums_test,
    frequency_test,
    longest_run_test,
    nist_subset,
    pass_rate_band,
    psd_welch,
    runs_test,
    serial_test,
    spectral_test,
    uniformity_pvalue,
)


def _bits(s: str) -> np.ndarray:
    return np.array([int(c) for c in s], dtype=np.uint8)


# ---------------------------------------------------------------------------
# autocorrelation
# ---------------------------------------------------------------------------


def test_autocorrelation_r0_is_one():
    x = np.random.default_rng(0).standard_normal(1000)
    r = autocorrelation(x, max_lag=10)
    assert r[0] == pytest.approx(1.0, abs=1e-12)
    assert r.size == 11


def test_autocorrelation_matches_naive_oracle():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(400)
    r = autocorrelation(x, max_lag=20)
    xc = x - x.mean()
    denom = float(xc @ xc)
    for k in range(21):
        naive = float(xc[: len(xc) - k] @ xc[k:]) / denom
        assert r[k] == pytest.approx(naive, abs=1e-10)


def test_autocorrelation_detects_perfect_correlation():
    x = np.sin(np.linspace(0, 40 * np.pi, 4000))
    r = autocorrelation(x, max_lag=200)
    period = 200  # samples per sine period
    assert r[period] > 0.9
    assert r[period // 2] < -0.9  # anti-phase at half a period


def test_autocorrelation_iid_bound():
    x = np.random.default_rng(24680).standard_normal(100_000)
    r = autocorrelation(x, max_lag=50)
    assert np.abs(r[1:]).max() < 4.0 / math.sqrt(100_000)


@given(st.lists(st.floats(min_value=-100, max_value=100), min_size=50, max_size=300))
@settings(max_examples=40)
def test_autocorrelation_bounded_by_one(xs):
    x = np.asarray(xs)
    if float(np.var(x)) <= 1e-20:
        return  # constant inputs are rejected, covered below
    r = autocorrelation(x, max_lag=5)
    assert (np.abs(r) <= 1.0 + 1e-9).all()


def test_autocorrelation_validation():
    with pytest.raises(ValueError, match="zero variance"):
        autocorrelation(np.ones(100), max_lag=5)
    with pytest.raises(ValueError, match="10\\*max_lag"):
        autocorrelation(np.arange(40.0), max_lag=10)
    with pytest.raises(ValueError):
        autocorrelation(np.arange(100.0), max_lag=0)


# ---------------------------------------------------------------------------
# Welch PSD
# ---------------------------------------------------------------------------


def test_psd_parseval():
    x = np.random.default_rng(7).standard_normal(2**16)
    freqs, pxx = psd_welch(x, 1000.0, segment_len=1024)
    df = freqs[1] - freqs[0]
    assert float(np.sum(pxx) * df) == pytest.approx(float(np.var(x)), rel=0.05)


def test_psd_peak_at_tone_frequency():
    fs, f0 = 1000.0, 123.0
    t = np.arange(2**14) / fs
    x = np.sin(2 * np.pi * f0 * t) + 0.01 * np.random.default_rng(8).standard_normal(t.size)
    freqs, pxx = psd_welch(x, fs, segment_len=1024)
    assert abs(freqs[np.argmax(pxx)] - f0) <= freqs[1] - freqs[0]


def test_psd_white_noise_is_flat():
    x = np.random.default_rng(9).standard_normal(2**17)
    freqs, pxx = psd_welch(x, 1.0, segment_len=512)
    # average into coarse bands; a white spectrum stays within a factor ~1.5
    usable = pxx[1 : (len(pxx) - 1) // 16 * 16 + 1].reshape(16, -1).mean(axis=1)
    assert usable.max() / usable.min() < 1.5


def test_psd_of_simulated_chain_rolls_off_at_cutoff():
    # electronic noise through the single-pole TIA, sampled at 5 GS/s so the
    # 500 MHz corner is well inside Nyquist: the half-power crossing of the
    # measured PSD must sit within 20% of the configured cutoff
    chain = SignalChainConfig(
        delay_td=540e-12,
        conversion_gain_a=1.0,
        electronic_noise_f=1e-6,
        tia_cutoff_hz=500e6,
        adc_bits=8,
        adc_range_sigmas=5.0,
        sample_rate_hz=5e9,
    )
    run = SimulationRun(
        model=LaserNoiseModel(0.0, 0.0, 0.0),
        chain=chain,
        duration=8e-5,
        seed=99,
        oversample_factor=4,
    )
    block = simulate(run)
    freqs, pxx = psd_welch(block.volts(), 5e9, segment_len=4096)
    plateau = pxx[(freqs > 1e7) & (freqs < 1e8)].mean()
    half = plateau / 2.0
    nb = 100
    usable = len(freqs[1:]) // nb * nb
    f_band = freqs[1 : usable + 1].reshape(nb, -1).mean(axis=1)
    p_band = pxx[1 : usable + 1].reshape(nb, -1).mean(axis=1)
    below = np.nonzero(p_band < half)[0]
    i = below[below > 5][0]
    f1, f2, p1, p2 = f_band[i - 1], f_band[i], p_band[i - 1], p_band[i]
    f3db = f1 + (half - p1) * (f2 - f1) / (p2 - p1)
    assert f3db == pytest.approx(500e6, rel=0.20)


def test_psd_validation():
    x = np.random.default_rng(10).standard_normal(4096)
    with pytest.raises(ValueError, match="power of two"):
        psd_welch(x, 1.0, segment_len=1000)
    with pytest.raises(ValueError, match="2 segments"):
        psd_welch(x[:100], 1.0, segment_len=1024)
    with pytest.raises(ValueError):
        psd_welch(x, 0.0, segment_len=256)


# ---------------------------------------------------------------------------
# SP800-22 worked examples
# ---------------------------------------------------------------------------


def test_frequency_worked_example():
    assert frequency_test(_bits("1011010101")) == pytest.approx(
        0.5270892568655381, rel=1e-12
    )


def test_frequency_against_independent_formula():
    rng = np.random.default_rng(11)
    for _ in range(20):
        eps = rng.integers(0, 2, int(rng.integers(10, 2000)), dtype=np.uint8)
        n = eps.size
        s = abs(2.0 * int(eps.sum()) - n)
        expected = math.erfc(s / math.sqrt(n) / math.sqrt(2.0))
        assert frequency_test(eps) == pytest.approx(expected, abs=1e-12)


def test_block_frequency_worked_example():
    p = block_frequency_test(_bits("0110011010"), block_len=3)
    assert p == pytest.approx(0.8012519569012009, rel=1e-12)


def test_runs_worked_example():
    assert runs_test(_bits("1001101011")) == pytest.approx(
        0.14723225536366571, rel=1e-12
    )


def test_runs_prescreen_fails_biased_input():
    bits = np.ones(1000, dtype=np.uint8)
    bits[:10] = 0
    assert runs_test(bits) == 0.0


def test_spectral_worked_example():
    assert spectral_test(_bits("1001010011")) == pytest.approx(
        0.4681599098544281, rel=1e-12
    )


def test_serial_worked_example():
    p1, p2 = serial_test(_bits("0011011101"), m=3)
    assert p1 == pytest.approx(0.8087921354109989, rel=1e-12)
    assert p2 == pytest.approx(0.6703200460356398, rel=1e-12)


def test_approximate_entropy_worked_example():
    p = approximate_entropy_test(_bits("0100110101"), m=3)
    assert p == pytest.approx(0.2619611048816654, rel=1e-12)


def test_cumulative_sums_small_example():
    # forward statistic of 1011010111 is z = 4; the series is evaluated with
    # floor-convention summation bounds (checked against the naive oracle)
    p_fwd, p_rev = cumulative_sums_test(_bits("1011010111"))
    assert p_fwd == pytest.approx(0.4115847182525979, rel=1e-12)
    assert 0.0 <= p_rev <= 1.0


# ---------------------------------------------------------------------------
# naive dual-route oracles for the vectorised internals
# ---------------------------------------------------------------------------


def _naive_longest_run(row):
    best = cur = 0
    for b in row:
        cur = cur + 1 if b else 0
        best = max(best, cur)
    return best


def test_longest_run_per_block_matches_naive():
    rng = np.random.default_rng(13)
    blocks = rng.integers(0, 2, (50, 8), dtype=np.uint8)
    fast = _longest_run_per_block(blocks)
    slow = [_naive_longest_run(row) for row in blocks]
    np.testing.assert_array_equal(fast, slow)
    # edge rows
    np.testing.assert_array_equal(
        _longest_run_per_block(np.array([[0, 0, 0], [1, 1, 1], [1, 0, 1]], dtype=np.uint8)),
        [0, 3, 1],
    )


def _naive_pattern_counts(eps, m):
    from collections import Counter

    ext = list(eps) + list(eps[: m - 1])
    c = Counter(
        int("".join(str(b) for b in ext[i : i + m]), 2) for i in range(len(eps))
    )
    out = np.zeros(1 << m, dtype=np.int64)
    for v, k in c.items():
        out[v] = k
    return out


def test_pattern_counts_match_naive():
    rng = np.random.default_rng(14)
    for _ in range(10):
        eps = rng.integers(0, 2, int(rng.integers(16, 200)), dtype=np.uint8)
        m = int(rng.integers(1, 6))
        np.testing.assert_array_equal(
            _pattern_counts(eps, m), _naive_pattern_counts(eps, m)
        )
    # total count equals the (circular) sequence length
    eps = rng.integers(0, 2, 100, dtype=np.uint8)
    assert _pattern_counts(eps, 3).sum() == 100


def _naive_cusum_pvalue(z, n):
    from scipy.stats import norm

    total = 1.0
    for k in range(math.floor((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1):
        total -= norm.cdf((4 * k + 1) * z / math.sqrt(n)) - norm.cdf(
            (4 * k - 1) * z / math.sqrt(n)
        )
    for k in range(math.floor((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1):
        total += norm.cdf((4 * k + 3) * z / math.sqrt(n)) - norm.cdf(
            (4 * k + 1) * z / math.sqrt(n)
        )
    return total


def test_cusum_pvalue_matches_naive():
    rng = np.random.default_rng(15)
    for _ in range(20):
        n = int(rng.integers(50, 5000))
        z = float(rng.integers(3, int(math.sqrt(n) * 3)))
        assert _cusum_pvalue(z, n) == pytest.approx(_naive_cusum_pvalue(z, n), abs=1e-12)


def test_cusum_statistic_from_definition():
    rng = np.random.default_rng(16)
    eps = rng.integers(0, 2, 1000, dtype=np.uint8)
    x = 2.0 * eps - 1.0
    z = float(np.abs(np.cumsum(x)).max())
    p_fwd, _ = cumulative_sums_test(eps)
    assert p_fwd == pytest.approx(_cusum_pvalue(z, 1000), rel=1e-12)


# ---------------------------------------------------------------------------
# degenerate inputs
# ---------------------------------------------------------------------------


def test_all_ones_fails_every_test():
    bits = BitStream.from_bit_array(np.ones(10 * 256, dtype=np.uint8))
    reports = nist_subset(bits, n_sequences=10, seq_len_bits=256)
    assert len(reports) == 10
    for r in reports:
        assert r.pass_rate == 0.0, r.test_name


def test_alternating_bits_fail_serial_and_runs():
    eps = np.tile(np.array([0, 1], dtype=np.uint8), 512)
    assert runs_test(eps) < 1e-6  # twice the expected number of runs
    p1, _ = serial_test(eps, m=8)
    assert p1 < 1e-6
    # but the monobit count is perfectly balanced
    assert frequency_test(eps) == pytest.approx(1.0)


def test_bits_validation():
    with pytest.raises(ValueError):
        frequency_test(np.array([0, 1, 2], dtype=np.uint8))
    with pytest.raises(ValueError):
        frequency_test(np.zeros(0, dtype=np.uint8))
    with pytest.raises(ValueError, match="at least 128"):
        longest_run_test(np.ones(100, dtype=np.uint8) * 0)
    with pytest.raises(ValueError, match="m >= 2"):
        serial_test(_bits("0101"), m=1)
    with pytest.raises(ValueError, match="too large"):
        serial_test(_bits("0101"), m=4)
    with pytest.raises(ValueError, match="too large"):
        approximate_entropy_test(_bits("0101"), m=3)
    with pytest.raises(ValueError):
        block_frequency_test(_bits("0101"), block_len=8)


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def test_uniformity_pvalue_limits():
    perfect = np.repeat(np.linspace(0.05, 0.95, 10), 10)
    assert uniformity_pvalue(perfect) == pytest.approx(1.0, rel=1e-12)
    concentrated = np.full(100, 0.05)
    assert uniformity_pvalue(concentrated) < 1e-12
    with pytest.raises(ValueError):
        uniformity_pvalue([])


def test_uniformity_pvalue_binning_is_closed_at_one():
    # p = 1.0 exactly must land in the top bin, not out of range
    ps = list(np.linspace(0.05, 0.95, 10)) * 10
    ps[0] = 1.0
    assert 0.0 <= uniformity_pvalue(ps) <= 1.0


def test_pass_rate_band_reference():
    lo, hi = pass_rate_band(100)
    assert lo == pytest.approx(0.99 - 3 * math.sqrt(0.99 * 0.01 / 100), rel=1e-12)
    assert lo == pytest.approx(0.96015, abs=5e-6)
    assert hi == 1.0  # clamped
    lo2, _ = pass_rate_band(1000)
    assert lo2 > lo  # band tightens with more sequences
    with pytest.raises(ValueError):
        pass_rate_band(0)


def test_test_report_validation():
    with pytest.raises(ValueError):
        StatsReport("x", (1.5,), 0.5, 0.5)
    with pytest.raises(ValueError):
        StatsReport("x", (0.5,), 1.5, 0.5)


def test_nist_subset_row_names_and_order():
    rng = np.random.default_rng(17)
    bits = BitStream.from_bit_array(rng.integers(0, 2, 2 * 256, dtype=np.uint8))
    reports = nist_subset(bits, n_sequences=2, seq_len_bits=256)
    assert [r.test_name for r in reports] == [
        "frequency",
        "block_frequency",
        "runs",
        "longest_run",
        "cumulative_sums_forward",
        "cumulative_sums_reverse",
        "spectral",
        "serial_1",
        "serial_2",
        "approximate_entropy",
    ]
    assert all(len(r.per_sequence_pvalues) == 2 for r in reports)


def test_nist_subset_on_ideal_bits():
    rng = np.random.default_rng(13579)
    bits = BitStream.from_bit_array(rng.integers(0, 2, 20 * 2048, dtype=np.uint8))
    reports = nist_subset(bits, n_sequences=20, seq_len_bits=2048)
    lo, _ = pass_rate_band(20)
    for r in reports:
        assert r.pass_rate >= lo, r.test_name
        assert r.uniformity_pvalue >= 1e-4, r.test_name


def test_nist_subset_validation():
    rng = np.random.default_rng(18)
    bits = BitStream.from_bit_array(rng.integers(0, 2, 1000, dtype=np.uint8))
    with pytest.raises(ValueError, match="insufficient bits"):
        nist_subset(bits, n_sequences=10, seq_len_bits=256)
    with pytest.raises(ValueError, match=">= 128"):
        nist_subset(bits, n_sequences=2, seq_len_bits=100)
    with pytest.raises(ValueError):
        nist_subset(bits, n_sequences=0, seq_len_bits=256)


def test_meta_uniformity_of_frequency_test():
    # 50 independent batches of 100 ideal sequences: the 10-bin uniformity
    # p-value clears 1e-4 every time (expected true rate is well above 99%)
    ok = 0
    for k in range(50):
        g = np.random.default_rng(1000 + k)
        ps = [frequency_test(g.integers(0, 2, 256, dtype=np.uint8)) for _ in range(100)]
        if uniformity_pvalue(ps) >= 1e-4:
            ok += 1
    assert ok >= 49


def test_subset_registry_shape():
    names = [name for name, _, _ in NIST_SUBSET_TESTS]
    assert names == [
        "frequency",
        "block_frequency",
        "runs",
        "longest_run",
        "cumulative_sums",
        "spectral",
        "serial",
        "approximate_entropy",
    ]
    assert sum(n_p for _, _, n_p in NIST_SUBSET_TESTS) == 10
