"""WAV decoding and preprocessing: decode, mix to mono, resample.

The decoder handles RIFF/WAVE containers with 16-bit integer PCM or 32-bit
IEEE float payloads only; everything else is rejected so the whole decode
path stays auditable. Integer samples are scaled by 1/32768, which maps the
negative rail -32768 to -1.0 exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

MODEL_SAMPLE_RATE = 16_000
MAX_CLIP_SECONDS = 600.0  # service memory bound; longer uploads are rejected

INT16_SCALE = 32768.0


class MalformedFile(ValueError):
    """The byte stream is not a parseable RIFF/WAVE container."""


class UnsupportedFormat(ValueError):
    """Parseable WAV, but an encoding outside 16-bit PCM / 32-bit float."""


class NotMono(ValueError):
    """Operation requires a single-channel clip."""


class TooLong(ValueError):
    """Clip exceeds the duration bound."""


@dataclass(frozen=True)
class AudioClip:
    """Decoded PCM audio: ``channels`` is (n_channels, n_samples) float64 in
    [-1, 1], ``sample_rate`` in Hz."""

    channels: np.ndarray
    sample_rate: int

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2:
            raise ValueError("channels must be a 2-D (n_channels, n_samples) array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


def _read_chunks(data: bytes):
    """Yield (chunk_id, payload) pairs from the body of a RIFF container."""
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        payload = data[pos + 8 : pos + 8 + size]
        if len(payload) < size:
            raise MalformedFile(f"chunk {cid!r} declares {size} bytes, container holds {len(payload)}")
        yield cid, payload
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE byte string to an AudioClip.

    Raises MalformedFile for structural problems, UnsupportedFormat for
    encodings other than 16-bit PCM / 32-bit IEEE float, and TooLong for
    clips over 10 minutes.
    """
    if len(data) < 12:
        raise MalformedFile("shorter than a RIFF header")
    if data[0:4] != b"RIFF":
        raise MalformedFile(f"bad container magic {data[0:4]!r}")
    if data[8:12] != b"WAVE":
        raise MalformedFile(f"bad RIFF form type {data[8:12]!r}")

    fmt = None
    payload = None
    for cid, chunk in _read_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(chunk) < 16:
                raise MalformedFile("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", chunk, 0)
        elif cid == b"data":
            if fmt is None:
                raise MalformedFile("data chunk before fmt chunk")
            payload = chunk
            break
    if fmt is None:
        raise MalformedFile("missing fmt chunk")
    if payload is None:
        raise MalformedFile("missing data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, block_align, bits = fmt
    if n_channels < 1:
        raise MalformedFile("fmt declares zero channels")
    if sample_rate <= 0:
        raise MalformedFile("fmt declares non-positive sample rate")

    if audio_format == 1 and bits == 16:
        sample_dtype = "<i2"
    elif audio_format == 3 and bits == 32:
        sample_dtype = "<f4"
    else:
        raise UnsupportedFormat(f"format tag {audio_format} with {bits}-bit samples is not supported")

    bytes_per_frame = n_channels * bits // 8
    if block_align not in (0, bytes_per_frame):
        raise MalformedFile(f"block align {block_align} inconsistent with {bytes_per_frame}-byte frames")

    n_frames = len(payload) // bytes_per_frame
    if n_frames * bytes_per_frame != len(payload):
        raise MalformedFile("data chunk is not a whole number of frames")
    if n_frames / sample_rate > MAX_CLIP_SECONDS:
        raise TooLong(f"clip is {n_frames / sample_rate:.1f} s, limit is {MAX_CLIP_SECONDS:.0f} s")

    raw = np.frombuffer(payload, dtype=sample_dtype, count=n_frames * n_channels)
    interleaved = raw.reshape(n_frames, n_channels).T
    if sample_dtype == "<i2":
        samples = interleaved.astype(np.float64) / INT16_SCALE
    else:
        samples = np.clip(interleaved.astype(np.float64), -1.0, 1.0)
    return AudioClip(channels=samples, sample_rate=int(sample_rate))


def encode_wav(clip: AudioClip, bits: int = 16) -> bytes:
    """Serialize a clip back to RIFF/WAVE (16-bit PCM or 32-bit float).

    Inverse of decode_wav for in-range samples: 16-bit values that came out
    of the decoder re-quantize to the identical integers.
    """
    if bits == 16:
        fmt_tag, dtype = 1, "<i2"
        quantized = np.clip(np.rint(clip.channels * INT16_SCALE), -32768, 32767).astype(dtype)
    elif bits == 32:
        fmt_tag, dtype = 3, "<f4"
        quantized = clip.channels.astype(dtype)
    else:
        raise UnsupportedFormat(f"{bits}-bit encoding is not supported")

    frames = quantized.T.tobytes()
    n_channels = clip.n_channels
    block_align = n_channels * bits // 8
    fmt_chunk = struct.pack(
        "<HHIIHH", fmt_tag, n_channels, clip.sample_rate,
        clip.sample_rate * block_align, block_align, bits,
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    body += b"data" + struct.pack("<I", len(frames)) + frames
    if len(frames) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def to_mono(clip: AudioClip) -> AudioClip:
    """Average all channels into one. Mono input is returned unchanged."""
    if clip.n_channels == 1:
        return clip
    mixed = clip.channels.mean(axis=0, keepdims=True)
    return AudioClip(channels=mixed, sample_rate=clip.sample_rate)


# Resampler kernel: Kaiser-windowed sinc, beta 8.6, 32 zero crossings per
# side. Rational-ratio polyphase realized as zero-stuff -> FIR -> decimate,
# which is the same arithmetic as an explicit per-phase filter bank.
KAISER_BETA = 8.6
ZERO_CROSSINGS = 32


def _lowpass_kernel(up: int, down: int) -> tuple[np.ndarray, int]:
    """Design the anti-imaging/anti-aliasing FIR for an up/down ratio.

    Returns (taps, half_len); taps has odd length 2*half_len + 1, unit DC
    gain before the factor `up` that compensates zero-stuffing loss.
    """
    max_rate = max(up, down)
    cutoff = 1.0 / max_rate  # fraction of the upsampled Nyquist
    half_len = ZERO_CROSSINGS * max_rate
    n = np.arange(-half_len, half_len + 1, dtype=np.float64)
    taps = cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half_len + 1, KAISER_BETA)
    taps /= taps.sum()
    return taps * up, half_len


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited resampling of a mono clip to target_rate.

    Tones below min(input, target) Nyquist survive; images/aliases are
    suppressed by the Kaiser-windowed sinc lowpass.
    """
    if clip.n_channels != 1:
        raise NotMono(f"resample needs mono input, got {clip.n_channels} channels")
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return clip

    g = math.gcd(clip.sample_rate, target_rate)
    up, down = target_rate // g, clip.sample_rate // g
    x = clip.channels[0]
    n_in = x.shape[0]
    n_out = -(-n_in * up // down)  # ceil

    taps, half_len = _lowpass_kernel(up, down)
    # Output j sits at upsampled index j*down; only every up-th tap meets a
    # real sample there, so convolve with each phase's decimated taps
    # instead of materializing the zero-stuffed signal.
    out = np.zeros(n_out, dtype=np.float64)
    for j0 in range(min(up, n_out)):
        phase = (j0 * down + half_len) % up
        per_phase = np.convolve(x, taps[phase::up])
        js = np.arange(j0, n_out, up)
        centers = (js * down + half_len - phase) // up
        valid = centers < per_phase.shape[0]
        out[js[valid]] = per_phase[centers[valid]]
    return AudioClip(channels=out[np.newaxis, :], sample_rate=int(target_rate))
