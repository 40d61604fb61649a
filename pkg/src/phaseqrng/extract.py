"""Toeplitz-hashing randomness extractor.

The extractor multiplies each ``n_in``-bit input block by a fixed binary
Toeplitz matrix ``T`` (``n_out x n_in``) over GF(2).  The matrix is described
by ``n_in + n_out - 1`` seed bits: the first column of ``T`` is
``seed[0 : n_out]`` (top to bottom) and the first row is
``seed[n_out - 1 : n_in + n_out - 1]`` (left to right); column and row share
the corner element ``seed[n_out - 1]``, i.e. ``T[i, j] = seed[n_out-1-i+j]``.

Because a Toeplitz matrix-vector product is a slice of a full convolution,
the production implementation hashes blocks with an FFT convolution in
O(n log n) instead of forming ``T``.  The convolution counts are small
integers (bounded by n_in), so rounding the FFT output to the nearest
integer before reducing mod 2 is exact.

Security note: the hash itself is deterministic and carries no entropy
accounting — choosing ``n_out`` within the leftover-hash budget (see
:func:`phaseqrng.entropy.extraction_ratio`) is what makes the output close
to uniform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .model import BitStream, EntropyReport, SampleBlock

__all__ = ["ToeplitzSeed", "toeplitz_hash", "toeplitz_matrix", "extract_stream"]


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits defining one Toeplitz matrix, plus the RNG seed that made them."""

    bits: np.ndarray
    n_in: int
    n_out: int
    seed_rng: int

    def __post_init__(self) -> None:
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError("n_in and n_out must be >= 1")
        if self.n_out > self.n_in:
            raise ValueError("n_out cannot exceed n_in")
        if bits.size != self.n_in + self.n_out - 1:
            raise ValueError(
                f"need exactly n_in + n_out - 1 = {self.n_in + self.n_out - 1} "
                f"seed bits, got {bits.size}"
            )
        if bits.size and bits.max() > 1:
            raise ValueError("seed bits must be 0/1")

    @classmethod
    def generate(cls, n_in: int, n_out: int, seed_rng: int) -> "ToeplitzSeed":
        """Draw the seed bits from a seeded PCG64 stream (reproducible)."""
        rng = np.random.default_rng(seed_rng)
        bits = rng.integers(0, 2, size=n_in + n_out - 1, dtype=np.uint8)
        return cls(bits=bits, n_in=n_in, n_out=n_out, seed_rng=seed_rng)

    def bits_sha256(self) -> str:
        return hashlib.sha256(self.bits.tobytes()).hexdigest()


def toeplitz_matrix(seed: ToeplitzSeed) -> np.ndarray:
    """Materialise the full Toeplitz matrix (oracle / debugging use only)."""
    i = np.arange(seed.n_out)[:, None]
    j = np.arange(seed.n_in)[None, :]
    return seed.bits[seed.n_out - 1 - i + j]


def _hash_blocks(seed: ToeplitzSeed, blocks: np.ndarray) -> np.ndarray:
    """Hash a (n_blocks, n_in) bit matrix; returns (n_blocks, n_out) bits.

    y[i] = sum_j seed[n_out-1-i+j] * x[j] is the full convolution of the
    reversed seed with x evaluated at lag n_in - 1 + i.
    """
    rev = seed.bits[::-1].astype(np.float64)
    conv = fftconvolve(blocks.astype(np.float64), rev[None, :], axes=1)
    counts = np.rint(conv[:, seed.n_in - 1 : seed.n_in - 1 + seed.n_out])
    return (counts.astype(np.int64) & 1).astype(np.uint8)


def toeplitz_hash(seed: ToeplitzSeed, block: np.ndarray) -> np.ndarray:
    """Hash one n_in-bit block to n_out bits over GF(2)."""
    block = np.asarray(block, dtype=np.uint8)
    if block.ndim != 1 or block.size != seed.n_in:
        raise ValueError(f"block must hold exactly n_in = {seed.n_in} bits")
    if block.size and block.max() > 1:
        raise ValueError("block bits must be 0/1")
    return _hash_blocks(seed, block[None, :])[0]


def samples_to_bits(block: SampleBlock) -> np.ndarray:
    """Serialise ADC codes to bits: two's complement, LSB first.

    The convention is fixed so that independently written tooling can agree
    bit-for-bit on the extractor input.
    """
    b = block.adc_bits
    codes = (block.samples.astype(np.int32) & ((1 << b) - 1)).astype("<u2")
    # unpack 16 bits LSB-first per sample, keep the low adc_bits of each
    as_bytes = codes.view(np.uint8).reshape(-1, 2)
    bits16 = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits16[:, :b].reshape(-1)


def extract_stream(
    samples: SampleBlock, report: EntropyReport, seed: ToeplitzSeed
) -> BitStream:
    """Run the extractor over a sample block.

    Samples are serialised to bits, split into n_in-bit blocks (the final
    partial block is discarded), each block is Toeplitz-hashed, and the
    outputs are concatenated in order.
    """
    ratio = seed.n_out / seed.n_in
    if ratio > report.extraction_ratio * (1 + 1e-12):
        raise ValueError(
            "extraction exceeds entropy budget: "
            f"n_out/n_in = {ratio:.6f} > extraction_ratio = "
            f"{report.extraction_ratio:.6f}"
        )
    if samples.adc_bits != report.samples_bits:
        raise ValueError(
            f"sample width {samples.adc_bits} does not match entropy report "
            f"({report.samples_bits} bits)"
        )
    raw_bits = samples_to_bits(samples)
    n_blocks = raw_bits.size // seed.n_in
    provenance = {
        "source_sha256": hashlib.sha256(samples.samples.tobytes()).hexdigest(),
        "seed_sha256": seed.bits_sha256(),
        "seed_rng": seed.seed_rng,
        "extraction_ratio": repr(report.extraction_ratio),
    }
    if n_blocks == 0:
        return BitStream.from_bit_array(np.zeros(0, dtype=np.uint8), provenance)
    blocks = raw_bits[: n_blocks * seed.n_in].reshape(n_blocks, seed.n_in)
    out = _hash_blocks(seed, blocks)
    return BitStream.from_bit_array(out.reshape(-1), provenance)
