"""Sensory payloads and matching.

Images are 32x32 HSL with 3/2/3-bit channels; matching compares lightness
only. Audio is 800 ms of signed 8-bit PCM at 16 kHz; indexing and matching
both run on summary attributes (variance of amplitude, mean cross rate).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import FocusOutOfBoundsError, MalformedPayloadError

IMAGE_SIDE = 32
IMAGE_PIXELS = IMAGE_SIDE * IMAGE_SIDE
AUDIO_RATE = 16000
AUDIO_SECONDS = 0.8
AUDIO_SAMPLES = int(AUDIO_RATE * AUDIO_SECONDS)  # 12800

# channel bit depths: H=3, S=2, L=3 on top of 8-bit source channels
_CH_DIV = np.array([32, 64, 32], dtype=np.int64)
_CH_MAX = np.array([7, 3, 7], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ImageData:
    hsl: np.ndarray  # (32, 32, 3) uint8, channels bounded (0-7, 0-3, 0-7)

    def __post_init__(self):
        arr = np.asarray(self.hsl)
        if arr.shape != (IMAGE_SIDE, IMAGE_SIDE, 3):
            raise MalformedPayloadError(f"image must be {IMAGE_SIDE}x{IMAGE_SIDE}x3, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise MalformedPayloadError("image channels must be uint8")
        if (arr > _CH_MAX.reshape(1, 1, 3)).any():
            raise MalformedPayloadError("image channel out of bit range")
        object.__setattr__(self, "hsl", arr)

    @property
    def lightness(self) -> np.ndarray:
        return self.hsl[:, :, 2]

    def equals(self, other: "ImageData") -> bool:
        return np.array_equal(self.hsl, other.hsl)

    def to_hsl8(self) -> np.ndarray:
        """Render to 8-bit HSL bucket centers (re-encoding is the identity)."""
        return (self.hsl.astype(np.int64) * _CH_DIV + _CH_DIV // 2).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ImageMergedData:
    """Interpolated image with a per-pixel deviation mask.

    center_hsl holds fractional channel means on the quantized scale;
    matching only consults pixels with must_match set, allowing |dL| up to
    l_tol there. Provenance keeps the source pixel grids so re-merging
    recomputes centers and tolerances stably.
    """

    center_hsl: np.ndarray          # (32, 32, 3) float32
    l_tol: np.ndarray               # (32, 32) float32, >= 0
    must_match: np.ndarray          # (32, 32) bool
    provenance: tuple = ()          # ((NodeId | None, (32,32,3) uint8), ...)

    def __post_init__(self):
        c = np.asarray(self.center_hsl, dtype=np.float32)
        t = np.asarray(self.l_tol, dtype=np.float32)
        m = np.asarray(self.must_match, dtype=bool)
        if c.shape != (IMAGE_SIDE, IMAGE_SIDE, 3) or t.shape != (IMAGE_SIDE, IMAGE_SIDE) or m.shape != t.shape:
            raise MalformedPayloadError("merged image grids have wrong shape")
        if (t < 0).any():
            raise MalformedPayloadError("l_tol must be >= 0")
        object.__setattr__(self, "center_hsl", c)
        object.__setattr__(self, "l_tol", t)
        object.__setattr__(self, "must_match", m)

    def to_image(self) -> ImageData:
        q = np.rint(self.center_hsl).astype(np.int64)
        q = np.clip(q, 0, _CH_MAX.reshape(1, 1, 3))
        return ImageData(q.astype(np.uint8))


@dataclass(frozen=True, eq=False)
class AudioData:
    samples: np.ndarray  # (12800,) int8

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.shape != (AUDIO_SAMPLES,):
            raise MalformedPayloadError(f"audio must hold {AUDIO_SAMPLES} samples, got {arr.shape}")
        if arr.dtype != np.int8:
            raise MalformedPayloadError("audio samples must be int8")
        object.__setattr__(self, "samples", arr)

    def equals(self, other: "AudioData") -> bool:
        return np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class AudioMergedData:
    """Summary-space audio merge: per-attribute centers and tolerances."""

    center: dict  # attribute -> float
    tol: dict     # attribute -> float, >= 0
    provenance: tuple = ()  # ((NodeId | None, (12800,) int8), ...)

    def __post_init__(self):
        if set(self.center) != set(self.tol):
            raise MalformedPayloadError("merged audio centers/tolerances must share attributes")
        if any(v < 0 for v in self.tol.values()):
            raise MalformedPayloadError("tolerances must be >= 0")

    def waveform(self) -> Optional[np.ndarray]:
        """Playable waveform: the first provenance sample set, if any."""
        if self.provenance:
            return self.provenance[0][1]
        return None


ImageLike = Union[ImageData, ImageMergedData]
AudioLike = Union[AudioData, AudioMergedData]


# --- encoding ---------------------------------------------------------------

def rgb_to_hsl8(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSL, all channels scaled to 0..255."""
    arr = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    cmax = arr.max(axis=-1)
    cmin = arr.min(axis=-1)
    delta = cmax - cmin
    light = (cmax + cmin) / 2.0

    sat = np.zeros_like(light)
    nz = delta > 0
    denom = 1.0 - np.abs(2.0 * light - 1.0)
    sat[nz] = delta[nz] / np.maximum(denom[nz], 1e-12)

    hue = np.zeros_like(light)
    with np.errstate(invalid="ignore", divide="ignore"):
        rmax = nz & (cmax == r)
        gmax = nz & (cmax == g) & ~rmax
        bmax = nz & ~rmax & ~gmax
        hue[rmax] = ((g[rmax] - b[rmax]) / delta[rmax]) % 6.0
        hue[gmax] = (b[gmax] - r[gmax]) / delta[gmax] + 2.0
        hue[bmax] = (r[bmax] - g[bmax]) / delta[bmax] + 4.0
    hue = hue / 6.0  # 0..1

    out = np.stack([hue, np.clip(sat, 0, 1), np.clip(light, 0, 1)], axis=-1)
    return np.clip(np.floor(out * 256.0), 0, 255).astype(np.uint8)


def hsl8_to_rgb8(hsl: np.ndarray) -> np.ndarray:
    """Inverse conversion used for display/export."""
    arr = np.asarray(hsl, dtype=np.float64) / 255.0
    h, s, light = arr[..., 0], arr[..., 1], arr[..., 2]
    c = (1.0 - np.abs(2.0 * light - 1.0)) * s
    hp = h * 6.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    zeros = np.zeros_like(c)
    sector = np.floor(hp).astype(int) % 6
    r = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4, sector == 5],
                  [c, x, zeros, zeros, x, c])
    g = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4, sector == 5],
                  [x, c, c, x, zeros, zeros])
    b = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4, sector == 5],
                  [zeros, zeros, x, c, c, x])
    m = light - c / 2.0
    rgb = np.stack([r + m, g + m, b + m], axis=-1)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def encode_image(source_hsl8: np.ndarray, focus: tuple[int, int, int]) -> ImageData:
    """Crop the focus square, box-average down to 32x32, quantize to 3/2/3 bits.

    `focus` is (cx, cy, side) with (cx, cy) the top-left corner in source
    pixels. Quantization is floor(channel / 2^(8-bits)); all arithmetic is
    integer-exact.
    """
    arr = np.asarray(source_hsl8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise MalformedPayloadError("source raster must be HxWx3")
    cx, cy, side = focus
    h, w = arr.shape[:2]
    if side <= 0 or cx < 0 or cy < 0 or cx + side > w or cy + side > h:
        raise FocusOutOfBoundsError(f"focus {focus} outside {w}x{h} raster")
    crop = arr[cy:cy + side, cx:cx + side, :].astype(np.int64)

    if side == IMAGE_SIDE:
        sums = crop
        area = 1
    elif side < IMAGE_SIDE:
        # upsample by nearest pixel; focus squares this small are edge cases
        idx = np.minimum((np.arange(IMAGE_SIDE) * side) // IMAGE_SIDE, side - 1)
        sums = crop[np.ix_(idx, idx)]
        area = 1
    elif side % IMAGE_SIDE == 0:
        f = side // IMAGE_SIDE
        sums = crop.reshape(IMAGE_SIDE, f, IMAGE_SIDE, f, 3).sum(axis=(1, 3))
        area = f * f
    else:
        edges = (np.arange(IMAGE_SIDE + 1) * side) // IMAGE_SIDE
        integral = np.zeros((side + 1, side + 1, 3), dtype=np.int64)
        integral[1:, 1:, :] = crop.cumsum(axis=0).cumsum(axis=1)
        lo, hi = edges[:-1], edges[1:]
        sums = (integral[hi[:, None], hi[None, :], :]
                - integral[lo[:, None], hi[None, :], :]
                - integral[hi[:, None], lo[None, :], :]
                + integral[lo[:, None], lo[None, :], :])
        spans = hi - lo
        area = (spans[:, None] * spans[None, :])[:, :, None]

    quantized = np.minimum(sums // (_CH_DIV.reshape(1, 1, 3) * area), _CH_MAX.reshape(1, 1, 3))
    return ImageData(quantized.astype(np.uint8))


# --- summary attributes ------------------------------------------------------

IMAGE_ATTRIBUTES = ("mean_lightness", "var_lightness")
AUDIO_ATTRIBUTES = ("var_amplitude", "mean_cross_rate")


def image_summary(img: ImageLike) -> dict:
    """Mean and population variance of the 1024 lightness values."""
    if isinstance(img, ImageMergedData):
        light = img.center_hsl[:, :, 2].astype(np.float64)
    else:
        light = img.lightness.astype(np.float64)
    mean = float(light.mean())
    var = float(((light - mean) ** 2).mean())
    return {"mean_lightness": mean, "var_lightness": var}


def audio_summary(audio: AudioLike) -> dict:
    if isinstance(audio, AudioMergedData):
        return dict(audio.center)
    samples = audio.samples.astype(np.float64)
    mean = float(samples.mean())
    var = float(((samples - mean) ** 2).mean())
    neg = audio.samples < 0
    crossings = int(np.count_nonzero(neg[1:] != neg[:-1]))
    return {"var_amplitude": var, "mean_cross_rate": crossings / AUDIO_SECONDS}


# --- matching ----------------------------------------------------------------

def image_distance(a: ImageData, b: ImageData) -> float:
    """Mean absolute lightness difference over all 1024 pixels."""
    diff = np.abs(a.lightness.astype(np.int64) - b.lightness.astype(np.int64))
    return float(diff.sum()) / IMAGE_PIXELS


def match_image(probe: ImageData, candidate: ImageData, threshold: float) -> tuple[bool, float]:
    dist = image_distance(probe, candidate)
    return dist <= threshold, dist


def match_image_masked(probe: ImageData, merged: ImageMergedData) -> bool:
    """Match iff every must_match pixel deviates by at most its l_tol."""
    mask = merged.must_match
    if not mask.any():
        return True
    diff = np.abs(probe.lightness.astype(np.float64) - merged.center_hsl[:, :, 2])
    return bool((diff[mask] <= merged.l_tol[mask]).all())


def masked_distance(probe: ImageData, merged: ImageMergedData) -> float:
    """Mean |dL| over must_match pixels; 0 when the mask is empty."""
    mask = merged.must_match
    if not mask.any():
        return 0.0
    diff = np.abs(probe.lightness.astype(np.float64) - merged.center_hsl[:, :, 2])
    return float(diff[mask].mean())


def _relative_diff(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale <= 0.0:
        return 0.0
    return abs(a - b) / scale


def match_audio(probe: AudioData, candidate: AudioData, tolerances: dict) -> bool:
    """Match iff every summary attribute differs by at most its relative tolerance."""
    pa, ca = audio_summary(probe), audio_summary(candidate)
    return all(_relative_diff(pa[k], ca[k]) <= tolerances[k] for k in AUDIO_ATTRIBUTES)


def audio_distance(probe: AudioData, candidate: AudioData, tolerances: dict) -> float:
    """Max tolerance-normalized attribute difference; <= 1 means match."""
    pa, ca = audio_summary(probe), audio_summary(candidate)
    return max(_relative_diff(pa[k], ca[k]) / max(tolerances[k], 1e-12) for k in AUDIO_ATTRIBUTES)


def match_audio_masked(probe: AudioData, merged: AudioMergedData) -> bool:
    pa = audio_summary(probe)
    return all(abs(pa[k] - merged.center[k]) <= merged.tol[k] for k in merged.center)


def audio_masked_distance(probe: AudioData, merged: AudioMergedData) -> float:
    pa = audio_summary(probe)
    return max(
        _relative_diff(pa[k], merged.center[k]) for k in merged.center
    )


def payload_summary(payload: object) -> Optional[dict]:
    """Summary attributes for indexable sensory payloads, else None."""
    if isinstance(payload, (ImageData, ImageMergedData)):
        return image_summary(payload)
    if isinstance(payload, (AudioData, AudioMergedData)):
        return audio_summary(payload)
    return None


def silence() -> AudioData:
    return AudioData(np.zeros(AUDIO_SAMPLES, dtype=np.int8))


def sine_wave(freq: float, amplitude: float = 0.5) -> AudioData:
    t = np.arange(AUDIO_SAMPLES, dtype=np.float64) / AUDIO_RATE
    wave = np.sin(2.0 * np.pi * freq * t) * amplitude * 127.0
    return AudioData(np.clip(np.rint(wave), -128, 127).astype(np.int8))


def noise_wave(seed: int, amplitude: float = 0.5) -> AudioData:
    rng = np.random.default_rng(seed)
    wave = rng.uniform(-1.0, 1.0, AUDIO_SAMPLES) * amplitude * 127.0
    return AudioData(np.clip(np.rint(wave), -128, 127).astype(np.int8))
