import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_logmel
from tdsv.errors import ClipTooShortError, UnsupportedAudioError, WavFormatError
from tdsv.features import (
    AudioClip,
    FeatureConfig,
    FrameMatrix,
    crop_frames,
    frame_count,
    hz_to_mel,
    logmel_frames,
    mel_to_hz,
    read_wav,
    stft_frames,
    write_wav,
)

SR = 16000
CFG = FeatureConfig()


def _write_pcm(path, pcm, channels=1, width=2, rate=SR):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(pcm).astype(f"<i{width}").tobytes())


def _float_wav_bytes(n=10):
    data = np.zeros(n, dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, 1, SR, SR * 4, 4, 32)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", len(body)) + body


class TestReadWav:
    def test_silence(self, tmp_path):
        _write_pcm(tmp_path / "a.wav", np.zeros(SR, dtype=int))
        clip = read_wav(tmp_path / "a.wav")
        assert clip.sample_rate == SR
        assert clip.samples.shape == (16000,)
        assert np.all(clip.samples == 0.0)

    def test_negative_full_scale(self, tmp_path):
        _write_pcm(tmp_path / "a.wav", [-32768, 0, 16384])
        np.testing.assert_array_equal(read_wav(tmp_path / "a.wav").samples, [-1.0, 0.0, 0.5])

    def test_stereo_rejected(self, tmp_path):
        _write_pcm(tmp_path / "a.wav", np.zeros(20, dtype=int), channels=2)
        with pytest.raises(UnsupportedAudioError, match="unsupported channel count"):
            read_wav(tmp_path / "a.wav")

    def test_8bit_rejected(self, tmp_path):
        with wave.open(str(tmp_path / "a.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(1)
            wf.setframerate(SR)
            wf.writeframes(bytes(10))
        with pytest.raises(UnsupportedAudioError, match="sample width"):
            read_wav(tmp_path / "a.wav")

    def test_float_encoding_rejected(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(_float_wav_bytes())
        with pytest.raises(UnsupportedAudioError, match="encoding"):
            read_wav(tmp_path / "a.wav")

    @pytest.mark.parametrize("payload", [b"", b"RIFX0000", b"not a wav file at all, just text"])
    def test_malformed_header(self, tmp_path, payload):
        (tmp_path / "a.wav").write_bytes(payload)
        with pytest.raises(WavFormatError):
            read_wav(tmp_path / "a.wav")

    def test_roundtrip(self, tmp_path, rng):
        clip = AudioClip(rng.integers(-32768, 32767, 500) / 32768.0, SR)
        write_wav(tmp_path / "a.wav", clip)
        np.testing.assert_array_equal(read_wav(tmp_path / "a.wav").samples, clip.samples)


class TestFrameCount:
    def test_one_second(self):
        assert frame_count(16000, CFG, SR) == 99

    def test_single_window(self):
        assert frame_count(320, CFG, SR) == 1

    def test_two_frames(self):
        assert frame_count(480, CFG, SR) == 2

    def test_too_short(self):
        with pytest.raises(ClipTooShortError):
            frame_count(319, CFG, SR)


class TestStft:
    def test_bin_count(self, rng):
        fm = stft_frames(AudioClip(rng.uniform(-1, 1, 4000), SR), CFG)
        assert fm.dim == 257
        assert fm.feature_kind == "stft_mag"

    def test_silence(self):
        fm = stft_frames(AudioClip(np.zeros(1600), SR), CFG)
        assert np.all(fm.data == 0.0)

    def test_too_short(self):
        with pytest.raises(ClipTooShortError):
            stft_frames(AudioClip(np.zeros(100), SR), CFG)

    @pytest.mark.parametrize("k", [10, 37, 128, 200])
    def test_bin_center_sinusoid(self, k):
        n = np.arange(3200)
        x = 0.5 * np.sin(2 * np.pi * k * SR / CFG.n_fft * n / SR)
        fm = stft_frames(AudioClip(x, SR), CFG)
        assert np.all(np.argmax(fm.data, axis=1) == k)

        # Direct DFT of each windowed frame, evaluated only at bin k.
        win, hop = 320, 160
        w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(win) / win)
        phasor = np.exp(-2j * np.pi * k * np.arange(win) / CFG.n_fft)
        direct = [abs(np.sum(w * x[t * hop:t * hop + win] * phasor)) for t in range(fm.n_frames)]
        np.testing.assert_allclose(fm.data[:, k], direct, rtol=1e-9)



class TestLogmel:
    def test_default_dim(self, rng):
        fm = logmel_frames(AudioClip(rng.uniform(-1, 1, 4000), SR))
        assert fm.dim == 64
        assert fm.feature_kind == "logmel"

    def test_silence_is_floor(self):
        fm = logmel_frames(AudioClip(np.zeros(3200), SR), CFG)
        np.testing.assert_array_equal(fm.data, np.log(1e-10))

    def test_white_noise_matches_naive(self, rng):
        x = rng.uniform(-0.5, 0.5, 2400)
        got = logmel_frames(AudioClip(x, SR), CFG).data
        np.testing.assert_allclose(got, naive_logmel(x, SR, CFG), rtol=1e-6)

    def test_mel_scale_roundtrip(self):
        f = np.array([0.0, 700.0, 1000.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)
        assert hz_to_mel(700.0) == pytest.approx(2595.0 * np.log10(2.0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(320, 4000), st.floats(1.01, 50.0), st.integers(0, 2**31))
    def test_gain_monotone(self, n, gain, seed):
        x = np.random.default_rng(seed).uniform(-0.02, 0.02, n)
        base = logmel_frames(AudioClip(x, SR), CFG).data
        louder = logmel_frames(AudioClip(x * gain, SR), CFG).data
        assert np.all(louder >= base)


@settings(max_examples=40, deadline=None)
@given(st.integers(320, 5000), st.sampled_from([8000, 16000]))
def test_row_counts_match_frame_count(n, sr):
    clip = AudioClip(np.random.default_rng(n).standard_normal(max(n, 320)) * 0.1, sr)
    expected = frame_count(clip.samples.size, CFG, sr)
    assert stft_frames(clip, CFG).n_frames == expected
    assert logmel_frames(clip, CFG).n_frames == expected


def test_outputs_finite_and_deterministic(rng):
    x = rng.standard_normal(8000) * 1e-6
    x[:1000] = 0.0
    a = logmel_frames(AudioClip(x, SR), CFG).data
    b = logmel_frames(AudioClip(x.copy(), SR), CFG).data
    assert np.all(np.isfinite(a))
    assert a.tobytes() == b.tobytes()
    s1 = stft_frames(AudioClip(x, SR), CFG).data
    assert s1.tobytes() == stft_frames(AudioClip(x, SR), CFG).data.tobytes()


class TestCrop:
    def test_long_input(self, rng):
        data = rng.standard_normal((500, 4))
        out = crop_frames(FrameMatrix(data), 200, 300, seed=3)
        assert 200 <= out.n_frames <= 300
        # contiguous slice of the input
        starts = [i for i in range(500 - out.n_frames + 1) if np.array_equal(data[i], out.data[0])]
        assert len(starts) == 1
        np.testing.assert_array_equal(data[starts[0]:starts[0] + out.n_frames], out.data)

    def test_short_input_wraps(self, rng):
        data = rng.standard_normal((100, 3))
        out = crop_frames(FrameMatrix(data), 200, 300, seed=0)
        assert out.n_frames == 200
        np.testing.assert_array_equal(out.data, np.concatenate([data, data]))

    def test_deterministic(self, rng):
        fm = FrameMatrix(rng.standard_normal((500, 2)))
        assert np.array_equal(crop_frames(fm, 200, 300, 9).data, crop_frames(fm, 200, 300, 9).data)

    def test_lengths_cover_range(self, rng):
        fm = FrameMatrix(rng.standard_normal((500, 1)))
        lengths = {crop_frames(fm, 200, 205, s).n_frames for s in range(200)}
        assert lengths == set(range(200, 206))

    def test_max_clamped_to_input(self, rng):
        fm = FrameMatrix(rng.standard_normal((250, 1)))
        assert all(200 <= crop_frames(fm, 200, 300, s).n_frames <= 250 for s in range(50))
