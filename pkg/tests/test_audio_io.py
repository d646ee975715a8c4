import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comfeat import audio_io
from comfeat.audio_io import (
    AudioClip,
    MalformedFile,
    NotMono,
    TooLong,
    UnsupportedFormat,
    decode_wav,
    encode_wav,
    resample,
    to_mono,
)

from conftest import build_wav, tone_clip


class TestDecodeWav:
    def test_int16_scaling(self):
        data = build_wav(np.array([[0], [16384], [-32768]]), 16000)
        clip = decode_wav(data)
        assert clip.sample_rate == 16000
        np.testing.assert_array_equal(clip.channels, [[0.0, 0.5, -1.0]])

    def test_stereo_shape(self):
        data = build_wav(np.array([[1, 2], [3, 4]]), 44100)
        clip = decode_wav(data)
        assert clip.n_channels == 2
        assert clip.n_samples == 2

    def test_float32_payload(self):
        data = build_wav(np.array([[0.25], [-0.75]]), 8000, fmt_tag=3, bits=32)
        clip = decode_wav(data)
        np.testing.assert_allclose(clip.channels, [[0.25, -0.75]])

    def test_float32_clamped_to_unit_range(self):
        data = build_wav(np.array([[1.5], [-2.0]]), 8000, fmt_tag=3, bits=32)
        clip = decode_wav(data)
        np.testing.assert_array_equal(clip.channels, [[1.0, -1.0]])

    def test_rifx_magic_rejected(self):
        data = build_wav(np.array([[0]]), 16000, magic=b"RIFX")
        with pytest.raises(MalformedFile):
            decode_wav(data)

    def test_not_wave_form(self):
        data = build_wav(np.array([[0]]), 16000, form=b"AVI ")
        with pytest.raises(MalformedFile):
            decode_wav(data)

    def test_truncated_data_chunk(self):
        data = build_wav(np.array([[1], [2], [3]]), 16000)
        with pytest.raises(MalformedFile):
            decode_wav(data[:-3])

    def test_missing_data_chunk(self):
        fmt = struct.pack("<HHIIHH", 1, 1, 16000, 32000, 2, 16)
        body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        with pytest.raises(MalformedFile):
            decode_wav(b"RIFF" + struct.pack("<I", len(body)) + body)

    def test_8bit_pcm_unsupported(self):
        data = build_wav(np.array([[0]]), 16000)
        # patch bits-per-sample to 8 inside the fmt chunk
        data = data[:34] + struct.pack("<H", 8) + data[36:]
        with pytest.raises(UnsupportedFormat):
            decode_wav(data)

    def test_compressed_format_unsupported(self):
        data = build_wav(np.array([[0]]), 16000)
        data = data[:20] + struct.pack("<H", 85) + data[22:]  # MP3 tag
        with pytest.raises(UnsupportedFormat):
            decode_wav(data)

    def test_too_long_rejected(self):
        # header promises > 10 min of frames
        payload_frames = 601 * 8000
        fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
        body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        body += b"data" + struct.pack("<I", payload_frames * 2) + b"\x00" * (payload_frames * 2)
        with pytest.raises(TooLong):
            decode_wav(b"RIFF" + struct.pack("<I", len(body)) + body)

    @given(st.lists(st.integers(min_value=-32768, max_value=32767), min_size=1, max_size=200))
    def test_decode_encode_roundtrip_exact(self, values):
        original = build_wav(np.array(values)[:, np.newaxis], 16000)
        clip = decode_wav(original)
        again = decode_wav(encode_wav(clip, bits=16))
        np.testing.assert_array_equal(clip.channels, again.channels)


class TestToMono:
    def test_mono_unchanged(self):
        clip = AudioClip(channels=np.array([[0.1, 0.2]]), sample_rate=16000)
        assert to_mono(clip) is clip

    def test_mean_across_channels(self):
        clip = AudioClip(channels=np.array([[0.5, 1.0], [-0.5, 0.0]]), sample_rate=16000)
        out = to_mono(clip)
        np.testing.assert_array_equal(out.channels, [[0.0, 0.5]])
        assert out.sample_rate == 16000

    @given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=50),
           st.integers(min_value=0, max_value=2**32 - 1))
    def test_idempotent(self, n_channels, n_samples, seed):
        rng = np.random.default_rng(seed)
        clip = AudioClip(channels=rng.uniform(-1, 1, (n_channels, n_samples)),
                         sample_rate=16000)
        once = to_mono(clip)
        twice = to_mono(once)
        np.testing.assert_array_equal(once.channels, twice.channels)


class TestResample:
    def test_identity_at_same_rate(self):
        clip = tone_clip(440, 16000)
        assert resample(clip, 16000) is clip

    def test_rejects_multichannel(self):
        clip = AudioClip(channels=np.zeros((2, 100)), sample_rate=16000)
        with pytest.raises(NotMono):
            resample(clip, 8000)

    def test_downsample_preserves_tone_location(self):
        # oracle: DFT of the output; 1 s at 16 kHz puts bin k at k Hz
        out = resample(tone_clip(440, 48000), 16000)
        assert abs(out.n_samples - 16000) <= 1
        spectrum = np.abs(np.fft.rfft(out.channels[0], 16000))
        assert abs(int(spectrum.argmax()) - 440) <= 1

    def test_upsample_image_suppression(self):
        out = resample(tone_clip(440, 8000), 16000)
        assert abs(out.n_samples - 16000) <= 1
        power = np.abs(np.fft.rfft(out.channels[0])) ** 2
        freqs = np.fft.rfftfreq(out.n_samples, 1 / 16000)
        stop = power[freqs > 4000].sum()
        passband = power[freqs <= 4000].sum()
        assert 10 * np.log10(stop / passband) < -60.0

    def test_round_trip_16k_48k_16k(self):
        clip = tone_clip(440, 16000, hann=True, amplitude=0.7)
        back = resample(resample(clip, 48000), 16000)
        assert back.n_samples == clip.n_samples
        assert np.abs(back.channels[0] - clip.channels[0]).max() < 1e-3

    @pytest.mark.parametrize("in_rate,out_rate,n", [
        (48000, 16000, 48000), (8000, 16000, 8000), (44100, 16000, 22050),
        (16000, 22050, 4000), (11025, 16000, 11025),
    ])
    def test_duration_preserved(self, in_rate, out_rate, n):
        clip = AudioClip(channels=np.zeros((1, n)), sample_rate=in_rate)
        out = resample(clip, out_rate)
        drift = abs(out.n_samples / out_rate - n / in_rate)
        assert drift < 1.0 / min(in_rate, out_rate)


class TestAudioClipInvariants:
    def test_rejects_ragged_input(self):
        with pytest.raises(ValueError):
            AudioClip(channels=np.zeros(5), sample_rate=16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            AudioClip(channels=np.zeros((1, 5)), sample_rate=0)
