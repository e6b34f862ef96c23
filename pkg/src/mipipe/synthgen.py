"""Deterministic synthetic motor-imagery EEG generator.

Two narrowband rhythm sources whose amplitudes drop class-conditionally
during the imagery period (ERD), one slow class-signed drift source (LRP),
mixed into channels by a seeded full-rank matrix that optionally rotates
from session to session, plus white sensor noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Trial, TrialSet
from .errors import ConfigError
from .preprocess import bandpass_array, lowpass_array

IMAGERY_ONSET_S = 0.5
RHYTHM_AMPLITUDE_UV = 10.0


@dataclass(frozen=True)
class SynthConfig:
    n_channels: int = 5
    n_sessions: int = 1
    trials_per_session: int = 40
    fs_hz: float = 100.0
    trial_duration_s: float = 5.0
    rhythm_band_hz: tuple[float, float] = (13.0, 2.0)  # (center, width)
    erd_depth: float = 0.6
    lrp_slope_uv_per_s: float = 0.0
    noise_sigma_uv: float = 1.0
    session_drift: float = 0.0  # radians of mixing rotation per session
    seed: int = 0

    def __post_init__(self):
        if self.n_channels < 3:
            raise ConfigError("n_channels must be >= 3 (three latent sources)")
        if self.n_sessions < 1:
            raise ConfigError("n_sessions must be >= 1")
        if self.trials_per_session < 2 or self.trials_per_session % 2:
            raise ConfigError("trials_per_session must be even and >= 2")
        if not 0 <= self.erd_depth <= 1:
            raise ConfigError("erd_depth must be in [0, 1]")
        center, width = self.rhythm_band_hz
        if not 0 < center - width / 2 < center + width / 2 < self.fs_hz / 2:
            raise ConfigError("rhythm band must lie strictly below Nyquist")
        if self.noise_sigma_uv < 0:
            raise ConfigError("noise_sigma_uv must be >= 0")
        if self.session_drift < 0:
            raise ConfigError("session_drift must be >= 0")
        if self.fs_hz <= 0 or self.trial_duration_s <= 0:
            raise ConfigError("fs_hz and trial_duration_s must be positive")


def _rotation(n: int, theta: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotation by theta in the plane spanned by orthonormal u, v."""
    eye = np.eye(n)
    return (
        eye
        + (np.cos(theta) - 1) * (np.outer(u, u) + np.outer(v, v))
        + np.sin(theta) * (np.outer(v, u) - np.outer(u, v))
    )


def _rhythm_source(rng, n, fs, lo, hi):
    band = bandpass_array(rng.normal(size=n), fs, lo, hi)
    band /= max(band.std(), 1e-12)
    # slow positive envelope keeps the source amplitude-modulated noise
    env_cut = min(1.0, fs / 4)
    envelope = 1.0 + 0.4 * lowpass_array(rng.normal(size=n), fs, env_cut)
    return band * np.clip(envelope, 0.2, None)


def generate(config: SynthConfig) -> TrialSet:
    """Build a labeled multi-session TrialSet; bitwise deterministic in seed."""
    rng = np.random.default_rng(config.seed)
    n_ch = config.n_channels
    fs = config.fs_hz
    n = round(config.trial_duration_s * fs)
    t = np.arange(n) / fs
    imagery = t >= IMAGERY_ONSET_S

    mixing = rng.normal(size=(n_ch, 3))
    mixing /= np.linalg.norm(mixing, axis=0, keepdims=True)
    # plane for the session-drift rotation, fixed by the seed
    basis = rng.normal(size=(n_ch, 2))
    q, _ = np.linalg.qr(basis)
    u, v = q[:, 0], q[:, 1]

    center, width = config.rhythm_band_hz
    lo, hi = center - width / 2, center + width / 2

    trials = []
    for session in range(1, config.n_sessions + 1):
        rot = _rotation(n_ch, config.session_drift * (session - 1), u, v)
        session_mixing = rot @ mixing
        for index in range(config.trials_per_session):
            label = -1 if index % 2 == 0 else 1
            src = np.empty((3, n))
            for i in (0, 1):
                src[i] = RHYTHM_AMPLITUDE_UV * _rhythm_source(rng, n, fs, lo, hi)
                attenuated = (i == 0 and label == -1) or (i == 1 and label == 1)
                if attenuated:
                    src[i, imagery] *= 1.0 - config.erd_depth
            src[2] = label * config.lrp_slope_uv_per_s * np.clip(
                t - IMAGERY_ONSET_S, 0.0, None
            )
            data = session_mixing @ src
            if config.noise_sigma_uv > 0:
                data = data + config.noise_sigma_uv * rng.normal(size=(n_ch, n))
            trials.append(Trial(data, label, session, index))

    labels = tuple(f"ch{i}" for i in range(n_ch))
    return TrialSet(tuple(trials), fs, labels)


def synth_config_from_dict(doc: dict) -> SynthConfig:
    known = {f for f in SynthConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown synth config fields: {sorted(unknown)}")
    kwargs = dict(doc)
    for key in ("rhythm_band_hz",):
        if key in kwargs:
            kwargs[key] = tuple(float(x) for x in kwargs[key])
    try:
        return SynthConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid synth config: {exc}") from exc
