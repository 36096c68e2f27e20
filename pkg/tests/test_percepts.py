import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import audio_of, image_of, raster_of, square_wave
from rtop.errors import FocusOutOfBoundsError, MalformedPayloadError
from rtop.percepts import (
    AUDIO_SAMPLES,
    IMAGE_SIDE,
    AudioData,
    ImageData,
    ImageMergedData,
    audio_summary,
    encode_image,
    image_distance,
    image_summary,
    match_audio,
    match_image,
    match_image_masked,
    masked_distance,
    silence,
    sine_wave,
)

DEFAULT_TOLS = {"var_amplitude": 0.15, "mean_cross_rate": 0.10}


def encode_oracle(source, focus):
    """Independent scalar reimplementation of crop + box average + quantize."""
    cx, cy, side = focus
    out = np.zeros((IMAGE_SIDE, IMAGE_SIDE, 3), dtype=np.uint8)
    divs = (32, 64, 32)
    for oy in range(IMAGE_SIDE):
        for ox in range(IMAGE_SIDE):
            y0, y1 = (oy * side) // IMAGE_SIDE, ((oy + 1) * side) // IMAGE_SIDE
            x0, x1 = (ox * side) // IMAGE_SIDE, ((ox + 1) * side) // IMAGE_SIDE
            for ch in range(3):
                total = 0
                for y in range(y0, y1):
                    for x in range(x0, x1):
                        total += int(source[cy + y, cx + x, ch])
                area = (y1 - y0) * (x1 - x0)
                out[oy, ox, ch] = min(total // (area * divs[ch]), (7, 3, 7)[ch])
    return out


class TestEncodeImage:
    def test_uniform_mid_gray(self):
        source = raster_of(128, side=32)
        img = encode_image(source, (0, 0, 32))
        assert (img.lightness == 4).all()
        assert (img.hsl[:, :, 1] == 0).all()

    def test_identity_crop_is_pure_quantization(self):
        rng = np.random.default_rng(0)
        source = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        img = encode_image(source, (0, 0, 32))
        assert np.array_equal(img.hsl, encode_oracle(source, (0, 0, 32)))

    def test_checkerboard_box_average(self):
        source = np.zeros((64, 64, 3), dtype=np.uint8)
        ys, xs = np.indices((64, 64))
        source[:, :, 2] = np.where((ys + xs) % 2 == 0, 0, 255)
        img = encode_image(source, (0, 0, 64))
        # every output pixel averages a 2x2 block: (0+255+255+0)/4 = 127.5 -> bucket 3
        assert np.array_equal(img.hsl, encode_oracle(source, (0, 0, 64)))
        assert (img.lightness == 3).all()

    def test_non_divisible_side_matches_oracle(self):
        rng = np.random.default_rng(1)
        source = rng.integers(0, 256, size=(80, 80, 3), dtype=np.uint8)
        img = encode_image(source, (10, 5, 48))
        assert np.array_equal(img.hsl, encode_oracle(source, (10, 5, 48)))

    def test_focus_out_of_bounds(self):
        source = raster_of(10, side=40)
        with pytest.raises(FocusOutOfBoundsError):
            encode_image(source, (16, 0, 32))

    def test_quantization_idempotence(self):
        rng = np.random.default_rng(2)
        img = ImageData(
            np.stack(
                [
                    rng.integers(0, 8, (32, 32)),
                    rng.integers(0, 4, (32, 32)),
                    rng.integers(0, 8, (32, 32)),
                ],
                axis=-1,
            ).astype(np.uint8)
        )
        again = encode_image(img.to_hsl8(), (0, 0, 32))
        assert np.array_equal(again.hsl, img.hsl)

    def test_malformed_dimensions(self):
        with pytest.raises(MalformedPayloadError):
            ImageData(np.zeros((31, 32, 3), dtype=np.uint8))


class TestImageSummary:
    def test_uniform(self):
        s = image_summary(image_of(5))
        assert s["mean_lightness"] == 5.0
        assert s["var_lightness"] == 0.0

    def test_two_point(self):
        light = np.zeros((32, 32), dtype=np.uint8)
        light[:16] = 0
        light[16:] = 7
        s = image_summary(image_of(light))
        assert s["mean_lightness"] == 3.5
        assert s["var_lightness"] == 12.25

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(3)
        light = rng.integers(0, 8, (32, 32))
        s = image_summary(image_of(light))
        values = [int(v) for v in light.ravel()]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        assert s["mean_lightness"] == mean
        assert s["var_lightness"] == var


class TestMatchImage:
    def test_identity(self):
        img = image_of(3)
        ok, dist = match_image(img, img, 0.0)
        assert ok and dist == 0.0

    def test_full_contrast(self):
        ok, dist = match_image(image_of(0), image_of(7), 0.5)
        assert not ok and dist == 7.0

    def test_single_pixel(self):
        light = np.zeros((32, 32), dtype=np.uint8)
        a = image_of(light)
        light2 = light.copy()
        light2[0, 0] = 7
        b = image_of(light2)
        _, dist = match_image(a, b, 0.5)
        assert dist == 7 / 1024

    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 7.0))
    @settings(max_examples=25, deadline=None)
    def test_symmetry(self, seed, threshold):
        rng = np.random.default_rng(seed)
        a = image_of(rng.integers(0, 8, (32, 32)))
        b = image_of(rng.integers(0, 8, (32, 32)))
        assert match_image(a, b, threshold) == match_image(b, a, threshold)

    def test_monotonicity(self):
        rng = np.random.default_rng(4)
        a = image_of(rng.integers(0, 8, (32, 32)))
        b = image_of(rng.integers(0, 8, (32, 32)))
        _, dist = match_image(a, b, 0.0)
        for t in (dist, dist + 0.1, dist + 2.0):
            ok, _ = match_image(a, b, t)
            assert ok


class TestMaskedMatch:
    def _merged(self, center_l, must, tol=0.5):
        center = np.zeros((32, 32, 3), dtype=np.float32)
        center[:, :, 2] = center_l
        return ImageMergedData(
            center_hsl=center,
            l_tol=np.full((32, 32), tol, dtype=np.float32),
            must_match=must,
        )

    def test_empty_mask_matches_anything(self):
        merged = self._merged(3.0, np.zeros((32, 32), dtype=bool))
        assert match_image_masked(image_of(0), merged)
        assert match_image_masked(image_of(7), merged)
        assert masked_distance(image_of(7), merged) == 0.0

    def test_must_match_pixels_only(self):
        must = np.zeros((32, 32), dtype=bool)
        must[:, :16] = True
        merged = self._merged(2.0, must)
        light = np.full((32, 32), 2, dtype=np.uint8)
        light[:, 16:] = 7  # arbitrary outside the mask
        assert match_image_masked(image_of(light), merged)
        light[:, :16] = 5
        assert not match_image_masked(image_of(light), merged)


class TestAudio:
    def test_identity_match_at_zero_tolerance(self):
        tone = sine_wave(440, 0.5)
        assert match_audio(tone, tone, {"var_amplitude": 0.0, "mean_cross_rate": 0.0})

    def test_silence_vs_tone(self):
        assert not match_audio(silence(), sine_wave(440, 0.8), DEFAULT_TOLS)

    def test_sine_cross_rate_is_twice_frequency(self):
        s = audio_summary(sine_wave(440, 0.5))
        assert s["mean_cross_rate"] == pytest.approx(880, rel=0.01)

    def test_phase_shift_matches(self):
        t = np.arange(AUDIO_SAMPLES) / 16000.0
        a = AudioData(np.clip(np.rint(np.sin(2 * np.pi * 440 * t) * 63), -128, 127).astype(np.int8))
        b = AudioData(
            np.clip(np.rint(np.sin(2 * np.pi * 440 * t + np.pi / 3) * 63), -128, 127).astype(np.int8)
        )
        sa, sb = audio_summary(a), audio_summary(b)
        # derived expectation: equal rates, near-equal variance
        assert abs(sa["mean_cross_rate"] - sb["mean_cross_rate"]) / sa["mean_cross_rate"] < 0.01
        assert abs(sa["var_amplitude"] - sb["var_amplitude"]) / sa["var_amplitude"] < 0.05
        assert match_audio(a, b, DEFAULT_TOLS)

    def test_square_wave_variance_is_exact(self):
        assert audio_summary(square_wave(10))["var_amplitude"] == 100.0

    def test_sample_count_contract(self):
        with pytest.raises(MalformedPayloadError):
            AudioData(np.zeros(100, dtype=np.int8))

    def test_silence_has_zero_crossings(self):
        s = audio_summary(silence())
        assert s["mean_cross_rate"] == 0.0
        assert s["var_amplitude"] == 0.0


def test_image_distance_matches_manual_oracle():
    rng = np.random.default_rng(5)
    a = image_of(rng.integers(0, 8, (32, 32)))
    b = image_of(rng.integers(0, 8, (32, 32)))
    manual = sum(
        abs(int(a.lightness[y, x]) - int(b.lightness[y, x]))
        for y in range(32)
        for x in range(32)
    ) / 1024
    assert image_distance(a, b) == manual
