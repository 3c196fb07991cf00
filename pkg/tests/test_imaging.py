import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from PIL import Image

from errors import DataError, InvalidInputError
from imaging import BinaryImage, GrayImage, binarize, downscale_to_max_pixels, load_image, to_grayscale


class TestGrayscale:
    def test_gray_pixel_is_a_fixed_point(self):
        rgb = np.full((1, 1, 3), 0.3)
        assert_allclose(to_grayscale(rgb).data, [[0.3]], atol=1e-12)

    def test_white_stays_white(self):
        assert_allclose(to_grayscale(np.ones((2, 2, 3))).data, 1.0, atol=1e-12)

    def test_pure_red_uses_the_red_weight(self):
        rgb = np.zeros((1, 1, 3))
        rgb[0, 0, 0] = 1.0
        assert to_grayscale(rgb).data[0, 0] == pytest.approx(0.299)

    def test_empty_image_is_rejected(self):
        with pytest.raises(InvalidInputError):
            to_grayscale(np.zeros((0, 0, 3)))

    def test_intensities_outside_unit_range_are_rejected(self):
        with pytest.raises(InvalidInputError):
            GrayImage(np.array([[1.5]]))


class TestBinarize:
    def test_bright_pixel_is_white(self):
        assert not binarize(GrayImage(np.array([[0.6]])), 0.5).black[0, 0]

    def test_threshold_value_counts_as_white(self):
        assert not binarize(GrayImage(np.array([[0.5]])), 0.5).black[0, 0]

    def test_all_zero_image_is_all_black(self):
        assert binarize(GrayImage(np.zeros((3, 4)))).black.all()

    def test_threshold_must_be_inside_the_unit_interval(self):
        with pytest.raises(InvalidInputError):
            binarize(GrayImage(np.zeros((2, 2))), 1.0)


class TestDownscale:
    def test_halves_a_square_page(self):
        out = downscale_to_max_pixels(GrayImage(np.full((1000, 1000), 0.5)), 250_000)
        assert (out.width, out.height) == (500, 500)

    def test_small_page_is_returned_unchanged(self):
        img = GrayImage(np.full((400, 400), 0.5))
        assert downscale_to_max_pixels(img, 250_000) is img

    def test_keeps_the_aspect_ratio(self):
        out = downscale_to_max_pixels(GrayImage(np.full((500, 1000), 0.5)), 125_000)
        assert (out.width, out.height) == (500, 250)

    def test_result_never_exceeds_the_budget(self):
        out = downscale_to_max_pixels(GrayImage(np.zeros((7, 3001))), 1000)
        assert out.width * out.height <= 1000

    def test_binary_page_stays_binary(self, rng):
        page = BinaryImage(rng.random((300, 200)) < 0.2)
        out = downscale_to_max_pixels(page, 10_000)
        assert isinstance(out, BinaryImage)
        assert out.width * out.height <= 10_000

    def test_constant_page_keeps_its_value(self):
        out = downscale_to_max_pixels(GrayImage(np.full((800, 600), 0.25)), 20_000)
        assert_allclose(out.data, 0.25, atol=1e-6)


class TestLoadImage:
    def test_8_bit_grayscale(self, tmp_path):
        pixels = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        Image.fromarray(pixels).save(tmp_path / "page.png")
        assert_array_equal(load_image(tmp_path / "page.png").data, pixels / 255.0)

    def test_16_bit_grayscale_uses_the_full_depth(self, tmp_path):
        pixels = np.array([[0, 65535], [32768, 65535]], dtype=np.uint16)
        Image.fromarray(pixels).save(tmp_path / "page16.png")
        assert_allclose(load_image(tmp_path / "page16.png").data, pixels / 65535.0, atol=1e-12)

    def test_rgb_is_converted_by_luminance(self, tmp_path):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 1] = 255
        Image.fromarray(rgb).save(tmp_path / "green.png")
        assert_allclose(load_image(tmp_path / "green.png").data, 0.587, atol=1e-12)

    def test_bilevel_png(self, tmp_path):
        Image.fromarray(np.array([[0, 255]], dtype=np.uint8)).convert("1").save(tmp_path / "bw.png")
        assert_array_equal(load_image(tmp_path / "bw.png").data, [[0.0, 1.0]])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_image(tmp_path / "nope.png")

    def test_garbage_bytes(self, tmp_path):
        (tmp_path / "broken.png").write_bytes(b"definitely not a png")
        with pytest.raises(DataError):
            load_image(tmp_path / "broken.png")
