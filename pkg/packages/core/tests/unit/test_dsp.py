"""Tests for waveforms, log-mel spectrograms, framing and the OPSG cache."""

import math

import numpy as np
import pytest

from opera_forge.core.exceptions import (
    ArchiveError,
    ConfigError,
    ContractError,
    DataIOError,
    InvalidInputError,
)
from opera_forge.core.types import PadPolicy
from opera_forge.dsp.audio import (
    WaveForm,
    mix_mono,
    read_wav,
    resample,
    trim_silence,
    write_wav,
)
from opera_forge.dsp.cache import (
    decode_spectrogram,
    encode_spectrogram,
    read_spectrogram,
    write_spectrogram,
)
from opera_forge.dsp.framing import (
    pad,
    pad_to_multiple,
    random_crop,
    segment_frames,
    segment_starts,
)
from opera_forge.dsp.spectrogram import (
    DspConfig,
    Spectrogram,
    build_filterbank,
    hz_to_mel,
    log_mel,
    mel_to_hz,
)


class TestWaveForm:
    """Tests for the WaveForm container."""

    def test_mono_vector_becomes_column(self):
        """Test 1-D samples are stored as one channel."""
        wave = WaveForm(samples=np.zeros(100), sample_rate=8000)
        assert wave.samples.shape == (100, 1)
        assert wave.samples.dtype == np.float32
        assert wave.duration_s == pytest.approx(100 / 8000)

    def test_non_finite_rejected(self):
        """Test NaN samples are rejected."""
        with pytest.raises(InvalidInputError):
            WaveForm(samples=np.array([0.0, np.nan]), sample_rate=8000)

    def test_bad_rate_rejected(self):
        """Test a zero sample rate is rejected."""
        with pytest.raises(InvalidInputError):
            WaveForm(samples=np.zeros(4), sample_rate=0)

    def test_mix_mono_averages_channels(self):
        """Test stereo is averaged into one channel."""
        stereo = WaveForm(
            samples=np.stack([np.ones(10), -np.ones(10) * 0.5], axis=1),
            sample_rate=100,
        )
        mono = mix_mono(stereo)
        assert mono.channels == 1
        np.testing.assert_allclose(mono.mono(), 0.25)


class TestWavIO:
    """Tests for reading and writing WAV files."""

    def test_write_then_read(self, tmp_path, tone):
        """Test a 16-bit file reads back within quantization error."""
        path = tmp_path / "tone.wav"
        write_wav(path, tone)
        back = read_wav(path)
        assert back.sample_rate == 16000
        assert back.n_samples == tone.n_samples
        np.testing.assert_allclose(back.mono(), tone.mono(), atol=1e-4)

    def test_missing_file(self, tmp_path):
        """Test an unreadable path raises DataIOError."""
        with pytest.raises(DataIOError):
            read_wav(tmp_path / "absent.wav")


class TestResample:
    """Tests for polyphase resampling."""

    def test_output_length(self):
        """Test 44.1 kHz to 16 kHz keeps the duration."""
        wave = WaveForm(samples=np.zeros(44100), sample_rate=44100)
        out = resample(wave, 16000)
        assert out.sample_rate == 16000
        assert out.n_samples == 16000

    def test_same_rate_is_copy(self, tone):
        """Test resampling to the same rate returns equal samples."""
        out = resample(tone, 16000)
        np.testing.assert_array_equal(out.samples, tone.samples)

    def test_tone_survives_downsampling(self):
        """Test a 1 kHz tone keeps its frequency at 16 kHz."""
        t = np.arange(48000) / 48000.0
        wave = WaveForm(samples=np.sin(2 * np.pi * 1000.0 * t), sample_rate=48000)
        out = resample(wave, 16000).mono()
        spectrum = np.abs(np.fft.rfft(out))
        peak_hz = np.argmax(spectrum) * 16000 / out.size
        assert peak_hz == pytest.approx(1000.0, abs=2.0)

    def test_invalid_target(self, tone):
        """Test a non-positive target rate is rejected."""
        with pytest.raises(InvalidInputError):
            resample(tone, 0)


class TestTrimSilence:
    """Tests for leading and trailing silence removal."""

    def test_trims_both_ends(self):
        """Test silent padding around a burst is removed."""
        burst = np.concatenate([np.zeros(800), np.ones(1600) * 0.5, np.zeros(800)])
        wave = WaveForm(samples=burst, sample_rate=16000)
        trimmed, start, end = trim_silence(wave)
        assert (start, end) == (800, 2400)
        assert trimmed.n_samples == 1600

    def test_idempotent(self):
        """Test trimming a trimmed clip changes nothing."""
        rng = np.random.default_rng(0)
        x = np.concatenate([np.zeros(1000), rng.normal(size=3000), np.zeros(500)])
        once, _, _ = trim_silence(WaveForm(samples=x, sample_rate=16000))
        twice, start, end = trim_silence(once)
        assert (start, end) == (0, once.n_samples)
        np.testing.assert_array_equal(twice.samples, once.samples)

    def test_all_silent(self):
        """Test a silent clip trims to nothing."""
        trimmed, start, end = trim_silence(
            WaveForm(samples=np.zeros(1600), sample_rate=16000)
        )
        assert trimmed.n_samples == 0
        assert start == end == 0


class TestDspConfig:
    """Tests for preprocessing constants."""

    def test_derived_sizes(self, dsp_cfg):
        """Test the 64 ms window and 32 ms hop at 16 kHz."""
        assert dsp_cfg.n_fft == 1024
        assert dsp_cfg.hop_length == 512
        assert dsp_cfg.upper_hz == 8000.0

    def test_eight_seconds_is_251_frames(self, dsp_cfg):
        """Test the frame count of an eight-second clip."""
        assert dsp_cfg.frames_for_seconds(8.0) == 251

    def test_silence_value(self, dsp_cfg):
        """Test digital silence maps to log of the offset."""
        assert dsp_cfg.silence_value == pytest.approx(math.log(1e-6))

    def test_hop_longer_than_window(self):
        """Test a hop longer than the window is rejected."""
        with pytest.raises(ValueError, match="hop_ms"):
            DspConfig(window_ms=32.0, hop_ms=64.0)

    def test_fmax_above_nyquist(self):
        """Test fmax beyond Nyquist is rejected."""
        with pytest.raises(ValueError, match="fmax"):
            DspConfig(fmax=9000.0)


class TestMelScale:
    """Tests for the HTK mel scale and filterbank."""

    def test_scale_inverts(self):
        """Test mel_to_hz undoes hz_to_mel."""
        hz = np.array([0.0, 440.0, 1000.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(hz)), hz, atol=1e-9)

    def test_thousand_hz(self):
        """Test the HTK formula at 1 kHz."""
        assert float(hz_to_mel(1000.0)) == pytest.approx(999.99, abs=0.05)

    def test_filters_peak_at_one(self, dsp_cfg):
        """Test every filter is normalized to unit peak."""
        fb = build_filterbank(dsp_cfg)
        assert fb.weights.shape == (64, 513)
        np.testing.assert_allclose(fb.weights.max(axis=1), 1.0)
        assert np.all(np.diff(fb.center_hz) > 0)

    def test_too_many_mels(self):
        """Test filters narrower than an FFT bin are rejected."""
        with pytest.raises(ConfigError):
            build_filterbank(DspConfig(n_mels=400))


class TestLogMel:
    """Tests for the log-mel transform."""

    def test_frame_count(self, tone, dsp_cfg):
        """Test centred framing yields L // hop + 1 frames."""
        spec = log_mel(tone, dsp_cfg, source_id="tone")
        assert spec.values.shape == (16000 // 512 + 1, 64)
        assert spec.source_id == "tone"
        assert spec.floor == pytest.approx(dsp_cfg.silence_value)

    def test_tone_peaks_near_its_frequency(self, tone, dsp_cfg):
        """Test the loudest mel band is centred near 1 kHz."""
        spec = log_mel(tone, dsp_cfg)
        fb = build_filterbank(dsp_cfg)
        band = int(np.argmax(spec.values.mean(axis=0)))
        assert fb.center_hz[band] == pytest.approx(1000.0, rel=0.1)

    def test_normalization_constants(self, tone, dsp_cfg):
        """Test mean and std are applied after the log."""
        raw = log_mel(tone, dsp_cfg).values
        shifted = log_mel(
            tone, dsp_cfg.model_copy(update={"norm_mean": 1.0, "norm_std": 2.0})
        ).values
        np.testing.assert_allclose(shifted, (raw - 1.0) / 2.0, rtol=1e-5, atol=1e-5)

    def test_wrong_rate(self, dsp_cfg):
        """Test input at another rate is rejected."""
        wave = WaveForm(samples=np.zeros(8000), sample_rate=8000)
        with pytest.raises(InvalidInputError):
            log_mel(wave, dsp_cfg)

    def test_shorter_than_hop(self, dsp_cfg):
        """Test a clip shorter than one hop is rejected."""
        wave = WaveForm(samples=np.ones(100), sample_rate=16000)
        with pytest.raises(InvalidInputError, match="hop"):
            log_mel(wave, dsp_cfg)


class TestSpectrogram:
    """Tests for the Spectrogram container."""

    def test_empty_rejected(self):
        """Test a spectrogram needs at least one frame."""
        with pytest.raises(InvalidInputError):
            Spectrogram(values=np.zeros((0, 8)))

    def test_non_finite_rejected(self):
        """Test inf values are rejected."""
        values = np.zeros((2, 2))
        values[0, 0] = np.inf
        with pytest.raises(InvalidInputError):
            Spectrogram(values=values)


class TestFraming:
    """Tests for padding, cropping and segmentation."""

    def test_repeat_pad_tiles(self, make_spec):
        """Test repeat padding follows out[i] = values[i % n]."""
        spec = make_spec(3)
        out = pad(spec, 8, PadPolicy.REPEAT)
        assert out.n_frames == 8
        np.testing.assert_array_equal(out.values, spec.values[np.arange(8) % 3])

    def test_zero_pad_uses_floor(self, make_spec):
        """Test zero padding fills with the spectrogram's silence value."""
        out = pad(make_spec(3), 5, PadPolicy.ZERO)
        np.testing.assert_array_equal(out.values[3:], -3.0)

    def test_long_input_unchanged(self, make_spec):
        """Test padding never truncates."""
        spec = make_spec(10)
        assert pad(spec, 4, PadPolicy.REPEAT) is spec

    def test_pad_waveform(self):
        """Test waveforms are padded along samples."""
        wave = WaveForm(samples=np.ones(3), sample_rate=10)
        out = pad(wave, 5, PadPolicy.ZERO)
        np.testing.assert_array_equal(out.mono(), [1, 1, 1, 0, 0])

    def test_unsupported_type(self):
        """Test padding an unknown type raises TypeError."""
        with pytest.raises(TypeError):
            pad([1, 2, 3], 5, PadPolicy.ZERO)

    def test_random_crop_is_contiguous(self, make_spec):
        """Test a crop is a window of the original frames."""
        spec = make_spec(20)
        crop = random_crop(spec, 5, np.random.default_rng(3))
        starts = [
            s
            for s in range(16)
            if np.array_equal(spec.values[s : s + 5], crop.values)
        ]
        assert len(starts) == 1

    def test_random_crop_too_long(self, make_spec):
        """Test a crop longer than the input is a contract violation."""
        with pytest.raises(ContractError):
            random_crop(make_spec(4), 5, np.random.default_rng(0))

    def test_segment_starts(self):
        """Test a right-aligned tail segment is added only when needed."""
        assert segment_starts(10, 4, 3) == [0, 3, 6]
        assert segment_starts(11, 4, 3) == [0, 3, 6, 7]
        assert segment_starts(3, 4, 3) == [0]

    def test_segment_short_clip(self, make_spec):
        """Test a clip shorter than one window gives one padded segment."""
        segments = segment_frames(make_spec(3), 8, 4)
        assert len(segments) == 1
        assert segments[0].n_frames == 8

    def test_pad_to_multiple_uses_floor(self, make_spec):
        """Test patch padding appends silence rows, not zeros."""
        spec = make_spec(10)
        out = pad_to_multiple(spec, 4)
        assert out.n_frames == 12
        np.testing.assert_array_equal(out.values[:10], spec.values)
        np.testing.assert_array_equal(out.values[10:], spec.floor)
        assert pad_to_multiple(make_spec(8), 4).n_frames == 8

    def test_pad_to_multiple_bad_multiple(self, make_spec):
        """Test the multiple must be positive."""
        with pytest.raises(ContractError):
            pad_to_multiple(make_spec(3), 0)


class TestSpectrogramCache:
    """Tests for the OPSG binary format."""

    def test_file_round_trip(self, tmp_path, make_spec):
        """Test values survive a write and read."""
        spec = make_spec(5, source_id="clip-1")
        path = tmp_path / "cache" / "clip-1.opsg"
        write_spectrogram(path, spec)
        back = read_spectrogram(path, floor=-2.0)
        np.testing.assert_array_equal(back.values, spec.values)
        assert back.source_id == "clip-1"
        assert back.floor == -2.0

    def test_header_layout(self):
        """Test the little-endian header fields."""
        payload = encode_spectrogram(np.zeros((3, 2), dtype=np.float32))
        assert payload[:4] == b"OPSG"
        assert int.from_bytes(payload[4:8], "little") == 1
        assert int.from_bytes(payload[8:12], "little") == 3
        assert int.from_bytes(payload[12:16], "little") == 2
        assert len(payload) == 16 + 4 * 6

    def test_bad_magic(self):
        """Test a foreign payload is rejected."""
        payload = b"XXXX" + encode_spectrogram(np.zeros((1, 1)))[4:]
        with pytest.raises(ArchiveError, match="magic"):
            decode_spectrogram(payload)

    def test_truncated(self):
        """Test a short payload is rejected."""
        payload = encode_spectrogram(np.zeros((2, 2)))[:-1]
        with pytest.raises(ArchiveError):
            decode_spectrogram(payload)
