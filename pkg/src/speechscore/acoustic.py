"""Acoustic features from raw audio: pitch and energy statistics, spectral
shape, and cycle-to-cycle voice-quality measures (jitter, shimmer).

The pitch tracker is a frame-based normalized autocorrelation: per frame it
picks the lag with the highest normalized correlation inside the
[1/fmax, 1/fmin] band and rejects frames whose peak correlation falls below
the voicing threshold or whose RMS sits under the silence floor. This is an
approximation of point-process pulse extraction, sufficient for the
instability measures computed here.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ACOUSTIC_FEATURES = (
    "mean_pitch",
    "stdev_pitch",
    "range_pitch",
    "stdev_energy",
    "zero_crossing_rate",
    "energy_entropy",
    "spectral_centroid",
    "rapJitter",
    "ppq5Jitter",
    "ddpJitter",
    "localShimmer",
    "apq3Shimmer",
    "aqpq5Shimmer",
    "ddaShimmer",
    "total_duration",
)


@dataclass
class AudioBuffer:
    samples: np.ndarray      # float64 in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.samples.size == 0:
            raise ValueError("empty audio buffer")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class PeriodTrack:
    periods: np.ndarray      # seconds, one per voiced frame
    amplitudes: np.ndarray   # peak |sample| of the same frames

    def __post_init__(self):
        self.periods = np.asarray(self.periods, dtype=np.float64)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.periods.shape != self.amplitudes.shape:
            raise ValueError("periods and amplitudes must align")
        if np.any(self.periods <= 0) or np.any(self.amplitudes < 0):
            raise ValueError("invalid period track")


def read_wav(path: str | Path) -> AudioBuffer:
    """Read 16-bit PCM mono WAV, scaling samples to [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1:
                raise ValueError(f"{path}: expected mono, got {fh.getnchannels()} channels")
            if fh.getsampwidth() != 2:
                raise ValueError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
            if fh.getcomptype() != "NONE":
                raise ValueError(f"{path}: compressed WAV not supported")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ValueError(f"{path}: malformed WAV ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise ValueError(f"{path}: no samples")
    return AudioBuffer(samples=samples, sample_rate=rate)


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    scaled = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(audio.sample_rate)
        fh.writeframes(scaled.tobytes())


def _frames(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n = (samples.size - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return samples[idx]


def pitch_track(audio: AudioBuffer, fmin: float = 75.0, fmax: float = 500.0,
                frame: float = 0.040, hop: float = 0.010,
                voicing_threshold: float = 0.5,
                silence_floor: float = 1e-4) -> PeriodTrack:
    """Fundamental periods and peak amplitudes of the voiced frames."""
    sr = audio.sample_rate
    frame_len = int(round(frame * sr))
    hop_len = max(1, int(round(hop * sr)))
    if audio.samples.size < frame_len:
        raise ValueError("audio shorter than one analysis frame")
    lag_min = max(1, int(np.ceil(sr / fmax)))
    lag_max = min(frame_len - 1, int(np.floor(sr / fmin)))
    if lag_max <= lag_min:
        raise ValueError("frame too short for the requested pitch band")

    frames = _frames(audio.samples, frame_len, hop_len)
    rms = np.sqrt((frames ** 2).mean(axis=1))
    peak = np.abs(frames).max(axis=1)

    centered = frames - frames.mean(axis=1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(2 * frame_len)))
    spectrum = np.fft.rfft(centered, n=nfft, axis=1)
    acorr = np.fft.irfft(spectrum * np.conj(spectrum), n=nfft, axis=1)[:, :frame_len]

    energy = np.cumsum(centered ** 2, axis=1)
    total = energy[:, -1:]
    lags = np.arange(lag_min, lag_max + 1)
    # prefix energy of x[0 : N-lag] and suffix energy of x[lag : N]
    e_pre = energy[:, frame_len - lags - 1]
    e_suf = total - np.where(lags[None, :] > 0, energy[:, lags - 1], 0.0)
    denom = np.sqrt(np.maximum(e_pre * e_suf, 1e-300))
    corr = acorr[:, lag_min:lag_max + 1] / denom

    best = np.argmax(corr, axis=1)
    rows = np.arange(frames.shape[0])
    voiced = (corr[rows, best] >= voicing_threshold) & (rms >= silence_floor)
    periods = (lags[best[voiced]]) / sr
    return PeriodTrack(periods=periods, amplitudes=peak[voiced])


def _neighborhood_instability(values: np.ndarray, window: int) -> float:
    """Mean |v_i - mean(window around i)| / mean(v), the Praat ppq/apq form."""
    n = values.size
    half = window // 2
    if n < window:
        return 0.0
    diffs = [abs(values[i] - values[i - half:i + half + 1].mean())
             for i in range(half, n - half)]
    return float(np.mean(diffs) / values.mean())


def _local_instability(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.abs(np.diff(values)).mean() / values.mean())


def acoustic_features(audio: AudioBuffer, track: PeriodTrack,
                      frame: float = 0.040, hop: float = 0.010,
                      flags: set[str] | None = None) -> dict[str, float]:
    """The 15 acoustic features keyed by their printed names.

    Pitch statistics run over 1/period of the voiced frames; jitter and
    shimmer follow the standard cycle-to-cycle definitions with ddp = 3*rap
    and dda = 3*apq3 as exact identities.
    """
    sr = audio.sample_rate
    frame_len = int(round(frame * sr))
    hop_len = max(1, int(round(hop * sr)))
    features = dict.fromkeys(ACOUSTIC_FEATURES, 0.0)
    features["total_duration"] = audio.duration

    x = audio.samples
    sign_flip = (x[:-1] * x[1:]) < 0
    features["zero_crossing_rate"] = float(sign_flip.sum() / (x.size - 1)) if x.size > 1 else 0.0

    if x.size >= frame_len:
        frames = _frames(x, frame_len, hop_len)
        rms = np.sqrt((frames ** 2).mean(axis=1))
        features["stdev_energy"] = float(rms.std())

        sub = frame_len // 10
        if sub >= 1:
            trimmed = frames[:, :10 * sub].reshape(frames.shape[0], 10, sub)
            bins = (trimmed ** 2).sum(axis=(0, 2))
            total = bins.sum()
            if total > 0:
                p = bins / total
                p = p[p > 0]
                features["energy_entropy"] = float(-(p * np.log2(p)).sum())

        spectrum = np.abs(np.fft.rfft(frames, axis=1))
        freqs = np.fft.rfftfreq(frame_len, d=1.0 / sr)
        mass = spectrum.sum(axis=1)
        nonzero = mass > 0
        if nonzero.any():
            centroids = (spectrum[nonzero] * freqs).sum(axis=1) / mass[nonzero]
            features["spectral_centroid"] = float(centroids.mean())

    periods = track.periods
    amps = track.amplitudes
    if periods.size == 0:
        if flags is not None:
            flags.add("acoustic_no_voiced_frames")
        return features

    pitch = 1.0 / periods
    features["mean_pitch"] = float(pitch.mean())
    features["stdev_pitch"] = float(pitch.std())
    features["range_pitch"] = float(pitch.max() - pitch.min())

    if periods.size >= 3:
        rap = _neighborhood_instability(periods, 3)
        features["rapJitter"] = rap
        features["ddpJitter"] = 3.0 * rap
    elif flags is not None:
        flags.add("acoustic_too_few_periods")
    if periods.size >= 5:
        features["ppq5Jitter"] = _neighborhood_instability(periods, 5)
    elif flags is not None:
        flags.add("acoustic_too_few_periods_ppq5")

    if amps.size >= 2 and amps.mean() > 0:
        features["localShimmer"] = _local_instability(amps)
        if amps.size >= 3:
            apq3 = _neighborhood_instability(amps, 3)
            features["apq3Shimmer"] = apq3
            features["ddaShimmer"] = 3.0 * apq3
        if amps.size >= 5:
            features["aqpq5Shimmer"] = _neighborhood_instability(amps, 5)
    return features


def extract_acoustic(audio: AudioBuffer, fmin: float = 75.0, fmax: float = 500.0,
                     frame: float = 0.040, hop: float = 0.010,
                     flags: set[str] | None = None) -> dict[str, float]:
    track = pitch_track(audio, fmin=fmin, fmax=fmax, frame=frame, hop=hop)
    return acoustic_features(audio, track, frame=frame, hop=hop, flags=flags)
