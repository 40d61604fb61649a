"""Throughput benchmark for the FFT-based Toeplitz extractor.

Hashes the same 2^20-sample block (8 Mbit raw) at several extractor input
sizes and reports wall-clock throughput.  Larger blocks amortize the FFT
better but delay the first output bit; this table is how we picked the
4096-bit default.
"""

import time

import numpy as np

from phaseqrng import entropy, extract
from phaseqrng.model import SampleBlock

N_SAMPLES = 1 << 20
SIGMA_SQ = 1.2093541671e-05   # reference operating point
QCNR = 3.40


def main() -> None:
    rng = np.random.default_rng(4242)
    block = SampleBlock(
        samples=rng.integers(-128, 128, size=N_SAMPLES, dtype=np.int16),
        adc_bits=8,
        sample_rate_hz=500e6,
        adc_scale=2.7e-4,
        origin="imported",
    )
    raw_mbit = N_SAMPLES * 8 / 1e6

    print(f"{N_SAMPLES} samples ({raw_mbit:.0f} Mbit raw), best of 3 runs\n")
    print("n_in    n_out   ratio    time (s)   in Mbit/s   out Mbit/s")
    for n_in in (512, 1024, 4096, 16384, 65536):
        report = entropy.entropy_report(SIGMA_SQ, QCNR, adc_bits=8, n_in=n_in)
        n_out = max(1, int(report.extraction_ratio * n_in))
        seed = extract.ToeplitzSeed.generate(n_in, n_out, seed_rng=7)
        best = float("inf")
        for _ in range(3):
            t0 = time.perf_counter()
            bits = extract.extract_stream(block, report, seed)
            best = min(best, time.perf_counter() - t0)
        print(f"{n_in:<7} {n_out:<7} {n_out / n_in:<8.4f} {best:<10.3f} "
              f"{raw_mbit / best:<11.0f} {bits.count / 1e6 / best:.0f}")


if __name__ == "__main__":
    main()
