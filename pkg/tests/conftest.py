import struct

import numpy as np
import pytest

from comfeat.audio_io import AudioClip


def build_wav(frames: np.ndarray, sample_rate: int, fmt_tag: int = 1, bits: int = 16,
              magic: bytes = b"RIFF", form: bytes = b"WAVE") -> bytes:
    """Hand-assemble WAV bytes (independent of the package encoder).

    frames: (n_frames, n_channels) of int16 values for PCM or floats for
    IEEE float format.
    """
    n_frames, n_channels = frames.shape
    if fmt_tag == 1:
        payload = frames.astype("<i2").tobytes()
    else:
        payload = frames.astype("<f4").tobytes()
    block_align = n_channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, n_channels, sample_rate,
                      sample_rate * block_align, block_align, bits)
    body = form
    body += b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return magic + struct.pack("<I", len(body)) + body


def tone_clip(freq: float, sample_rate: int, seconds: float = 1.0,
              amplitude: float = 0.5, hann: bool = False) -> AudioClip:
    n = int(round(sample_rate * seconds))
    t = np.arange(n) / sample_rate
    x = amplitude * np.sin(2 * np.pi * freq * t)
    if hann:
        x = x * (0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1)))
    return AudioClip(channels=x[np.newaxis, :], sample_rate=sample_rate)


@pytest.fixture
def silence_16k() -> AudioClip:
    return AudioClip(channels=np.zeros((1, 16000)), sample_rate=16000)
