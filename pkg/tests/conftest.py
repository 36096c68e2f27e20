import numpy as np
import pytest

from rtop.config import SessionConfig
from rtop.kb import KnowledgeBase
from rtop.percepts import AUDIO_SAMPLES, IMAGE_SIDE, AudioData, ImageData


def image_of(lightness, hue=0, sat=0) -> ImageData:
    """ImageData with a scalar or (32,32) lightness field on the 0-7 scale."""
    grid = np.zeros((IMAGE_SIDE, IMAGE_SIDE, 3), dtype=np.uint8)
    grid[:, :, 0] = hue
    grid[:, :, 1] = sat
    grid[:, :, 2] = np.asarray(lightness, dtype=np.uint8)
    return ImageData(grid)


def raster_of(l8, side=64, hue=0, sat=0) -> np.ndarray:
    """8-bit HSL raster with a scalar or (side,side) lightness field."""
    out = np.zeros((side, side, 3), dtype=np.uint8)
    out[:, :, 0] = hue
    out[:, :, 1] = sat
    out[:, :, 2] = np.asarray(l8, dtype=np.uint8)
    return out


def audio_of(samples) -> AudioData:
    arr = np.zeros(AUDIO_SAMPLES, dtype=np.int8)
    samples = np.asarray(samples)
    arr[: len(samples)] = samples
    return AudioData(arr)


def square_wave(amplitude: int) -> AudioData:
    """Alternating +-amplitude samples: zero mean, variance amplitude^2."""
    arr = np.empty(AUDIO_SAMPLES, dtype=np.int8)
    arr[0::2] = amplitude
    arr[1::2] = -amplitude
    return AudioData(arr)


@pytest.fixture
def config() -> SessionConfig:
    return SessionConfig(seed=11, hunger_interval_ticks=0)


@pytest.fixture
def kb(config) -> KnowledgeBase:
    return KnowledgeBase(config)
