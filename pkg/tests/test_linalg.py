import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import InvalidInputError
from linalg import fit_pca, l2_normalize, pca_project, power_normalize


class TestFitPCA:
    def test_points_on_a_line(self):
        t = np.arange(10.0)
        data = np.column_stack([t, 2 * t])
        model = fit_pca(data, 1)
        assert_allclose(model.components[0], np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-12)
        assert model.explained_variances[0] == pytest.approx(5 * np.var(t, ddof=1))

    def test_rank_deficient_request_names_the_rank(self):
        t = np.arange(10.0)
        with pytest.raises(InvalidInputError, match="rank 1"):
            fit_pca(np.column_stack([t, 2 * t]), 2)

    def test_full_rank_reconstruction(self, rng):
        data = rng.normal(size=(20, 4))
        model = fit_pca(data, 4)
        assert_allclose(pca_project(data, model) @ model.components, data - data.mean(axis=0), atol=1e-8)

    def test_variances_match_covariance_eigenvalues(self, rng):
        data = rng.normal(size=(50, 10)) * np.arange(1, 11)
        model = fit_pca(data, 10)
        expected = np.sort(np.linalg.eigvalsh(np.cov(data, rowvar=False)))[::-1]
        assert_allclose(model.explained_variances, expected, atol=1e-8)

    def test_fewer_samples_than_dimensions(self, rng):
        data = rng.normal(size=(6, 20))
        model = fit_pca(data, 4)
        assert_allclose(model.components @ model.components.T, np.eye(4), atol=1e-10)
        expected = np.sort(np.linalg.eigvalsh(np.cov(data, rowvar=False)))[::-1][:4]
        assert_allclose(model.explained_variances, expected, atol=1e-8)

    def test_components_are_signed_by_largest_entry(self, rng):
        model = fit_pca(rng.normal(size=(30, 5)), 3)
        pivots = np.argmax(np.abs(model.components), axis=1)
        assert np.all(model.components[np.arange(3), pivots] > 0)

    def test_projected_variance_matches_the_explained_variance(self, rng):
        data = rng.normal(size=(60, 6)) @ rng.normal(size=(6, 6))
        model = fit_pca(data, 4)
        assert_allclose(np.var(pca_project(data, model), axis=0, ddof=1), model.explained_variances, rtol=1e-8)

    def test_out_dim_above_sample_count(self, rng):
        with pytest.raises(InvalidInputError):
            fit_pca(rng.normal(size=(3, 5)), 3)


class TestProject:
    def test_mean_maps_to_zero(self, rng):
        model = fit_pca(rng.normal(size=(30, 5)), 3)
        assert_allclose(pca_project(model.mean, model), 0.0, atol=1e-12)

    def test_first_component_maps_to_first_axis(self, rng):
        model = fit_pca(rng.normal(size=(30, 5)), 3)
        assert_allclose(pca_project(model.mean + model.components[0], model), [1.0, 0.0, 0.0], atol=1e-12)

    def test_projection_is_linear_around_the_mean(self, rng):
        model = fit_pca(rng.normal(size=(30, 5)), 3)
        u, v = rng.normal(size=5), rng.normal(size=5)
        combined = pca_project(model.mean + u + v, model)
        assert_allclose(combined, pca_project(model.mean + u, model) + pca_project(model.mean + v, model), atol=1e-10)

    def test_wrong_dimension(self, rng):
        model = fit_pca(rng.normal(size=(30, 5)), 3)
        with pytest.raises(InvalidInputError):
            pca_project(np.zeros(4), model)


def test_l2_normalize():
    assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])


def test_l2_normalize_keeps_zero():
    assert not l2_normalize(np.zeros(3)).any()


def test_l2_normalize_rows():
    out = l2_normalize(np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]]))
    assert_allclose(out, [[0.6, 0.8], [0.0, 0.0], [1.0, 0.0]])


def test_power_normalize_is_signed():
    assert power_normalize(-4.0) == -2.0


def test_power_then_l2():
    assert_allclose(l2_normalize(power_normalize(np.ones(4))), [0.5, 0.5, 0.5, 0.5])
