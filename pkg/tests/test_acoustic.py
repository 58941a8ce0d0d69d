import wave

import numpy as np
import pytest
from pytest import approx

from speechscore.acoustic import (ACOUSTIC_FEATURES, AudioBuffer, PeriodTrack,
                                  acoustic_features, pitch_track, read_wav,
                                  write_wav)


def sine(freq, seconds=1.0, sr=16000, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), sr)


class TestReadWav:
    def test_silence(self, tmp_path):
        path = tmp_path / "s.wav"
        write_wav(path, AudioBuffer(np.zeros(16000), 16000))
        audio = read_wav(path)
        assert audio.sample_rate == 16000
        assert audio.samples.size == 16000
        assert np.all(audio.samples == 0.0)

    def test_full_scale_square_wave(self, tmp_path):
        path = tmp_path / "sq.wav"
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(8000)
            fh.writeframes(np.full(100, 32767, dtype="<i2").tobytes())
        audio = read_wav(path)
        assert np.all(audio.samples == approx(32767 / 32768))

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"RIFF\x00\x00")
        with pytest.raises(ValueError, match="malformed"):
            read_wav(path)

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "st.wav"
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(2)
            fh.setsampwidth(2)
            fh.setframerate(8000)
            fh.writeframes(np.zeros(400, dtype="<i2").tobytes())
        with pytest.raises(ValueError, match="mono"):
            read_wav(path)


class TestPitchTrack:
    def test_pure_tone_period(self):
        audio = sine(100.0)
        track = pitch_track(audio)
        assert track.periods.size > 50
        assert np.all(np.abs(track.periods - 0.010) <= 1.0 / 16000 + 1e-12)

    def test_low_noise_mostly_unvoiced(self):
        rng = np.random.default_rng(0)
        audio = AudioBuffer(0.01 * rng.standard_normal(16000), 16000)
        track = pitch_track(audio)
        n_frames = (16000 - 640) // 160 + 1
        assert track.periods.size <= 0.1 * n_frames

    def test_too_short(self):
        with pytest.raises(ValueError):
            pitch_track(AudioBuffer(np.zeros(320), 16000))

    def test_silence_floor(self):
        audio = sine(100.0, amp=1e-6)
        assert pitch_track(audio).periods.size == 0


class TestAcousticFeatures:
    def test_pure_tone_stability(self):
        audio = sine(100.0, seconds=2.0)
        f = acoustic_features(audio, pitch_track(audio))
        for name in ("rapJitter", "ppq5Jitter", "ddpJitter", "localShimmer",
                     "apq3Shimmer", "aqpq5Shimmer", "ddaShimmer"):
            assert f[name] < 1e-3, name
        assert f["mean_pitch"] == approx(100.0, abs=1.0)
        assert f["total_duration"] == approx(2.0)

    def test_identities(self):
        rng = np.random.default_rng(1)
        periods = 0.01 * (1 + 0.03 * rng.standard_normal(40))
        amps = 0.5 * (1 + 0.2 * rng.random(40))
        track = PeriodTrack(periods, amps)
        f = acoustic_features(sine(100.0), track)
        assert f["ddpJitter"] == 3.0 * f["rapJitter"]
        assert f["ddaShimmer"] == 3.0 * f["apq3Shimmer"]
        assert all(f[n] >= 0 for n in ACOUSTIC_FEATURES)

    def test_shimmer_by_hand(self):
        # constant periods, amplitudes alternating 0.5/1.0
        track = PeriodTrack(np.full(6, 0.01), np.tile([0.5, 1.0], 3))
        f = acoustic_features(sine(100.0), track)
        assert f["localShimmer"] == approx(0.5 / 0.75)

    def test_zero_crossing_rate(self):
        audio = AudioBuffer(np.array([1.0, -1.0, 1.0, -1.0]), 16000)
        track = PeriodTrack(np.zeros(0), np.zeros(0))
        f = acoustic_features(audio, track, flags=set())
        assert f["zero_crossing_rate"] == 1.0

    def test_scale_invariance(self):
        audio = sine(120.0, seconds=1.5)
        scaled = AudioBuffer(audio.samples * 0.35, audio.sample_rate)
        f1 = acoustic_features(audio, pitch_track(audio))
        f2 = acoustic_features(scaled, pitch_track(scaled))
        for name in ("rapJitter", "ppq5Jitter", "ddpJitter", "localShimmer",
                     "apq3Shimmer", "aqpq5Shimmer", "ddaShimmer"):
            assert f2[name] == approx(f1[name], abs=1e-12)

    def test_empty_track_flagged(self):
        flags = set()
        f = acoustic_features(sine(100.0), PeriodTrack(np.zeros(0), np.zeros(0)),
                              flags=flags)
        assert "acoustic_no_voiced_frames" in flags
        assert f["mean_pitch"] == 0.0 and f["rapJitter"] == 0.0

    def test_emits_all_features(self):
        audio = sine(100.0)
        f = acoustic_features(audio, pitch_track(audio))
        assert set(f) == set(ACOUSTIC_FEATURES)
        assert f["spectral_centroid"] > 0
        assert f["energy_entropy"] > 0


def perturbed_tone(p, seconds=2.0, sr=16000, base=0.01, seed=4):
    """Cycle-by-cycle sine whose periods are jittered by +-p percent."""
    rng = np.random.default_rng(seed)
    samples = []
    t = 0.0
    while t < seconds:
        period = base * (1 + p * (2 * rng.random() - 1))
        n = max(8, int(round(period * sr)))
        samples.append(0.5 * np.sin(2 * np.pi * np.arange(n) / n))
        t += n / sr
    return AudioBuffer(np.concatenate(samples), sr)


def test_jitter_monotone_in_perturbation():
    values = []
    for p in (0.0, 0.01, 0.02, 0.05):
        audio = perturbed_tone(p)
        f = acoustic_features(audio, pitch_track(audio))
        values.append(f["rapJitter"])
    assert values == sorted(values), values
    assert values[-1] > values[0]
