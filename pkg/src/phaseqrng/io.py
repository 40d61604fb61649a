"""Bit-exact persistence for sample blocks, bit streams and reports.

Single container format, little-endian throughout:

    offset  size  field
    0       4     magic  b"QRNG"
    4       2     format version (currently 1)
    6       1     payload kind: 1=samples, 2=bits, 3=report
    7       4     metadata length in bytes
    11      8     payload length in bytes
    19      -     metadata: UTF-8 "key=value" lines
    ...     -     payload

Sample payloads are two's-complement signed integers at the declared ADC bit
width, padded to whole bytes (1 byte per sample up to 8 bits, 2 bytes up to
16).  Bit payloads are packed LSB-first within each byte.  Report payloads
are UTF-8 JSON.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .model import BitStream, SampleBlock

MAGIC = b"QRNG"
VERSION = 1

KIND_SAMPLES = 1
KIND_BITS = 2
KIND_REPORT = 3

_HEADER = struct.Struct("<4sHBIQ")


class FormatError(ValueError):
    """Base class for malformed container files."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


def _encode_metadata(meta: dict) -> bytes:
    lines = []
    for key, value in meta.items():
        key = str(key)
        if "=" in key or "\n" in key:
            raise ValueError(f"illegal metadata key {key!r}")
        value = str(value)
        if "\n" in value:
            raise ValueError(f"illegal metadata value for {key!r}")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode("utf-8")


def _decode_metadata(raw: bytes) -> dict[str, str]:
    meta: dict[str, str] = {}
    text = raw.decode("utf-8")
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"malformed metadata line {line!r}")
        meta[key] = value
    return meta


def _write_container(sink: BinaryIO, kind: int, meta: dict, payload: bytes) -> int:
    meta_bytes = _encode_metadata(meta)
    header = _HEADER.pack(MAGIC, VERSION, kind, len(meta_bytes), len(payload))
    sink.write(header)
    sink.write(meta_bytes)
    sink.write(payload)
    return len(header) + len(meta_bytes) + len(payload)


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"truncated file: expected {n} bytes of {what}")
    return data


def _read_container(source: BinaryIO, expect_kind: int) -> tuple[dict[str, str], bytes]:
    header = _read_exact(source, _HEADER.size, "header")
    magic, version, kind, meta_len, payload_len = _HEADER.unpack(header)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    if kind != expect_kind:
        raise FormatError(f"payload kind {kind}, expected {expect_kind}")
    meta = _decode_metadata(_read_exact(source, meta_len, "metadata"))
    payload = _read_exact(source, payload_len, "payload")
    return meta, payload


def _open_maybe(sink_or_path, mode: str):
    """Accept a path or an already-open binary file object."""
    if isinstance(sink_or_path, (str, Path)):
        return open(sink_or_path, mode), True
    return sink_or_path, False


def _sample_dtype(adc_bits: int) -> np.dtype:
    return np.dtype("<i1") if adc_bits <= 8 else np.dtype("<i2")


def write_samples(block: SampleBlock, sink) -> int:
    """Write a SampleBlock; returns the number of bytes written."""
    meta = {
        "sample_rate_hz": repr(block.sample_rate_hz),
        "adc_bits": block.adc_bits,
        "adc_scale": repr(block.adc_scale),
        "origin": block.origin,
        "n_samples": len(block),
    }
    if block.rng_seed is not None:
        meta["rng_seed"] = block.rng_seed
    payload = block.samples.astype(_sample_dtype(block.adc_bits)).tobytes()
    f, close = _open_maybe(sink, "wb")
    try:
        return _write_container(f, KIND_SAMPLES, meta, payload)
    finally:
        if close:
            f.close()


def read_samples(source) -> SampleBlock:
    f, close = _open_maybe(source, "rb")
    try:
        meta, payload = _read_container(f, KIND_SAMPLES)
    finally:
        if close:
            f.close()
    try:
        adc_bits = int(meta["adc_bits"])
        n_samples = int(meta["n_samples"])
        sample_rate = float(meta["sample_rate_hz"])
        adc_scale = float(meta["adc_scale"])
        origin = meta.get("origin", "imported")
    except KeyError as exc:
        raise FormatError(f"missing metadata key {exc}") from exc
    samples = np.frombuffer(payload, dtype=_sample_dtype(adc_bits))
    if samples.size != n_samples:
        raise TruncatedFileError(
            f"payload holds {samples.size} samples, header says {n_samples}"
        )
    seed = meta.get("rng_seed")
    return SampleBlock(
        samples=samples.astype(np.int16),
        adc_bits=adc_bits,
        sample_rate_hz=sample_rate,
        adc_scale=adc_scale,
        origin=origin,
        rng_seed=int(seed) if seed is not None else None,
    )


def write_bits(stream: BitStream, sink) -> int:
    """Write a BitStream; returns the number of bytes written."""
    meta = {"count": stream.count}
    for key, value in stream.provenance.items():
        meta[f"prov_{key}"] = value
    f, close = _open_maybe(sink, "wb")
    try:
        return _write_container(f, KIND_BITS, meta, stream.bits)
    finally:
        if close:
            f.close()


def read_bits(source) -> BitStream:
    f, close = _open_maybe(source, "rb")
    try:
        meta, payload = _read_container(f, KIND_BITS)
    finally:
        if close:
            f.close()
    try:
        count = int(meta["count"])
    except KeyError as exc:
        raise FormatError(f"missing metadata key {exc}") from exc
    if count > 8 * len(payload):
        raise TruncatedFileError(
            f"payload holds {8 * len(payload)} bits, header says {count}"
        )
    provenance = {
        key[len("prov_") :]: value
        for key, value in meta.items()
        if key.startswith("prov_")
    }
    return BitStream(bits=payload, count=count, provenance=provenance)


def export_bits_ascii(stream: BitStream, sink, per_line: int = 64) -> int:
    """Export bits as ASCII '0'/'1' characters for external test suites.

    Lines hold ``per_line`` characters; no trailing newline, so exporting the
    3-bit stream 1,0,1 yields exactly ``101``.  Returns bytes written.
    """
    bits = stream.as_bit_array()
    chars = np.array([ord("0"), ord("1")], dtype=np.uint8)[bits]
    chunks = [
        chars[i : i + per_line].tobytes()
        for i in range(0, len(chars), per_line)
    ]
    data = b"\n".join(chunks)
    f, close = _open_maybe(sink, "wb")
    try:
        f.write(data)
    finally:
        if close:
            f.close()
    return len(data)


def write_report(report: dict, sink) -> int:
    """Write a JSON-serialisable report dict under the container format."""
    payload = json.dumps(report, sort_keys=True, indent=2).encode("utf-8")
    f, close = _open_maybe(sink, "wb")
    try:
        return _write_container(f, KIND_REPORT, {"encoding": "json"}, payload)
    finally:
        if close:
            f.close()


def read_report(source) -> dict:
    f, close = _open_maybe(source, "rb")
    try:
        _, payload = _read_container(f, KIND_REPORT)
    finally:
        if close:
            f.close()
    return json.loads(payload.decode("utf-8"))
