import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from errors import InvalidInputError
from imaging import GrayImage
from patchdesc import (
    SIFT_DIM, Patch, PatchConfig, dense_grid, extract_local_descriptors, fit_descriptor_pca,
    normalize_sift, project_augment, project_augment_batch, sift128,
)


class TestDenseGrid:
    def test_one_patch_fills_the_page(self):
        patches = dense_grid(96, 96, (96,), 8)
        assert patches == [Patch(48.0, 48.0, 96)]

    def test_wider_page_gets_a_second_column(self):
        patches = dense_grid(104, 96, (96,), 8)
        assert [p.center_x for p in patches] == [48.0, 56.0]

    def test_scale_larger_than_the_page_is_skipped(self):
        assert dense_grid(20, 20, (24,)) == []

    def test_order_is_scale_then_rows_then_columns(self):
        patches = dense_grid(40, 40, (16, 32), 12)
        sizes = [p.size for p in patches]
        assert sizes == sorted(sizes)
        small = [(p.center_y, p.center_x) for p in patches if p.size == 16]
        assert small == sorted(small)

    def test_patches_stay_inside(self):
        for p in dense_grid(70, 50, (24, 34, 48), 8):
            assert p.left >= 0 and p.top >= 0
            assert p.left + p.size <= 70 and p.top + p.size <= 50


class TestSift:
    def test_constant_patch_is_zero(self):
        gray = GrayImage(np.full((32, 32), 0.7))
        assert not sift128(gray, Patch(16, 16, 24)).any()

    def test_textured_patch_has_unit_norm(self, rng):
        gray = GrayImage(rng.random((40, 40)))
        desc = sift128(gray, Patch(20, 20, 24))
        assert desc.shape == (SIFT_DIM,)
        assert np.linalg.norm(desc) == pytest.approx(1.0, abs=1e-6)

    def test_vertical_step_votes_only_in_the_horizontal_gradient_bin(self):
        data = np.zeros((24, 24))
        data[:, 12:] = 1.0
        desc = sift128(GrayImage(data), Patch(12, 12, 24)).reshape(4, 4, 8)
        assert desc[..., 0].sum() > 0
        assert not desc[..., 1:].any()

    def test_dark_to_bright_reversed_uses_the_opposite_bin(self):
        data = np.ones((24, 24))
        data[:, 12:] = 0.0
        desc = sift128(GrayImage(data), Patch(12, 12, 24)).reshape(4, 4, 8)
        assert desc[..., 4].sum() / desc.sum() > 0.999

    def test_brightness_offset_does_not_change_the_descriptor(self, rng):
        data = 0.5 * rng.random((40, 40))
        patch = Patch(20, 20, 24)
        assert_allclose(sift128(GrayImage(data + 0.4), patch), sift128(GrayImage(data), patch), atol=1e-12)

    def test_normalization_clamps_then_renormalizes(self, rng):
        raw = rng.random((5, SIFT_DIM)) ** 8
        unit = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        clamped = np.minimum(unit, 0.2)
        assert_allclose(normalize_sift(raw), clamped / np.linalg.norm(clamped, axis=1, keepdims=True))

    def test_zero_rows_stay_zero(self):
        assert not normalize_sift(np.zeros((2, SIFT_DIM))).any()

    def test_patch_outside_the_page(self):
        with pytest.raises(InvalidInputError):
            sift128(GrayImage(np.zeros((20, 20))), Patch(16, 16, 24))


class TestExtraction:
    def test_page_extraction_matches_single_patches(self, rng):
        gray = GrayImage(rng.random((50, 60)))
        config = PatchConfig(scales=(16, 24), stride=10, min_energy=0.0)
        descriptors, geometry = extract_local_descriptors(gray, config)
        patches = dense_grid(60, 50, config.scales, config.stride)
        assert descriptors.shape == (len(patches), SIFT_DIM)
        expected = np.array([sift128(gray, p) for p in patches])
        assert_allclose(descriptors, expected, atol=1e-10)
        assert_array_equal(geometry, [[p.center_x, p.center_y, p.size] for p in patches])

    def test_blank_page_yields_nothing(self):
        descriptors, geometry = extract_local_descriptors(GrayImage(np.ones((64, 64))), PatchConfig(scales=(24,)))
        assert descriptors.shape == (0, SIFT_DIM)
        assert geometry.shape == (0, 3)

    def test_page_smaller_than_every_scale(self, rng):
        descriptors, _ = extract_local_descriptors(GrayImage(rng.random((20, 20))))
        assert descriptors.shape == (0, SIFT_DIM)

    def test_low_energy_patches_are_dropped(self):
        data = np.ones((48, 96))
        data[10:30, 10:14] = 0.0  # ink only in the left half
        config = PatchConfig(scales=(24,), stride=24)
        descriptors, geometry = extract_local_descriptors(GrayImage(data), config)
        assert descriptors.shape[0] == 2
        assert np.all(geometry[:, 0] < 48)


class TestProjectAugment:
    @pytest.fixture
    def pca(self, rng):
        return fit_descriptor_pca(rng.random((60, SIFT_DIM)), 5)

    def test_center_patch_at_smallest_scale(self, pca):
        local = project_augment(pca.mean, Patch(100, 100, 24), 200, 200, pca, (24, 96))
        assert (local.norm_x, local.norm_y, local.norm_s) == (0.5, 0.5, 0.0)
        assert local.values.shape == (8,)

    def test_largest_scale_maps_to_one(self, pca):
        local = project_augment(pca.mean, Patch(100, 100, 96), 200, 200, pca, (24, 34, 48, 68, 96))
        assert local.norm_s == pytest.approx(1.0)

    def test_mean_descriptor_projects_to_zero(self, pca):
        local = project_augment(pca.mean, Patch(100, 100, 24), 200, 200, pca, (24, 96))
        assert_allclose(local.values[:5], 0.0, atol=1e-12)

    def test_batch_matches_single(self, pca, rng):
        descriptors = rng.random((3, SIFT_DIM))
        geometry = np.array([[20.0, 30.0, 24.0], [50.0, 60.0, 48.0], [100.0, 100.0, 96.0]])
        batch = project_augment_batch(descriptors, geometry, 200, 150, pca, (24, 48, 96))
        for row, desc, (x, y, s) in zip(batch, descriptors, geometry):
            single = project_augment(desc, Patch(x, y, int(s)), 200, 150, pca, (24, 48, 96))
            assert_allclose(row, single.values)

    def test_empty_batch(self, pca):
        out = project_augment_batch(np.empty((0, SIFT_DIM)), np.empty((0, 3)), 10, 10, pca)
        assert out.shape == (0, 8)

    def test_pca_needs_enough_nonzero_descriptors(self, rng):
        sample = np.vstack([rng.random((5, SIFT_DIM)), np.zeros((50, SIFT_DIM))])
        with pytest.raises(InvalidInputError):
            fit_descriptor_pca(sample, 5)
