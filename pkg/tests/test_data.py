"""
Tests for datasets, IDX files, synthetic generators, rotation and the risk
matrix presets.
"""

import gzip
import struct

import numpy as np
import pytest

from data.dataset import Dataset
from data.idx import load_idx, read_idx_images, write_idx_images, write_idx_labels
from data.risk_matrices import cifar10_risk_matrix, grouped_risk_matrix, mnist_risk_matrix, resolve_risk_matrix
from data.synthetic import SyntheticSpec, blob_centers, noise_images, synth, synth_ood
from data.transforms import rotate
from utils.errors import ConfigError, DataError, IdxFormatError, RiskMatrixError


class TestDataset:
    def test_sample_label_count_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2)), [0, 1], 2)

    def test_labels_out_of_range(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 2)), [0, 2], 2)

    def test_select_classes_relabels(self):
        data = Dataset(np.arange(6, dtype=float)[:, None], [0, 1, 2, 3, 4, 5], 6)
        picked = data.select_classes([4, 1])
        assert picked.num_classes == 2
        assert picked.label_ids == (4, 1)
        np.testing.assert_array_equal(picked.labels, [1, 0])
        np.testing.assert_array_equal(picked.samples[:, 0], [1.0, 4.0])

    def test_select_classes_rejects_duplicates(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 1)), [0, 1], 3).select_classes([1, 1])

    def test_subset_and_batches(self):
        data = Dataset(np.zeros((10, 2)), np.arange(10) % 2, 2)
        assert len(data.subset(4)) == 4
        sizes = [len(batch) for batch in data.batches(4, np.random.default_rng(0))]
        assert sizes == [4, 4, 2]

    def test_first_of_class(self):
        data = Dataset(np.zeros((4, 2)), [1, 0, 2, 0], 3)
        assert data.first_of_class(0) == 1
        with pytest.raises(DataError):
            data.subset([0]).first_of_class(2)


class TestIdx:
    def test_two_image_round_trip(self, tmp_path):
        images = np.arange(2 * 28 * 28, dtype=np.uint64).reshape(2, 28, 28) % 256
        write_idx_images(tmp_path / 'img', images)
        write_idx_labels(tmp_path / 'lbl', [3, 7])
        data = load_idx(tmp_path / 'img', tmp_path / 'lbl')
        assert data.samples.shape == (2, 28, 28, 1)
        np.testing.assert_array_equal(data.samples[..., 0], images / 255.0)
        np.testing.assert_array_equal(data.labels, [3, 7])

    def test_gzip(self, tmp_path, idx_files):
        images_path, labels_path = idx_files
        packed = tmp_path / 'images.gz'
        packed.write_bytes(gzip.compress(images_path.read_bytes()))
        np.testing.assert_array_equal(read_idx_images(packed), read_idx_images(images_path))

    def test_limit(self, idx_files):
        assert len(load_idx(*idx_files, limit=5)) == 5

    def test_wrong_magic(self, tmp_path, idx_files):
        images_path, labels_path = idx_files
        with pytest.raises(IdxFormatError, match='magic'):
            load_idx(labels_path, labels_path)

    def test_count_mismatch(self, tmp_path, idx_files):
        images_path, _ = idx_files
        write_idx_labels(tmp_path / 'short', np.zeros(3))
        with pytest.raises(IdxFormatError, match='count mismatch'):
            load_idx(images_path, tmp_path / 'short')

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / 'cut'
        path.write_bytes(struct.pack('>IIII', 2051, 2, 28, 28) + bytes(100))
        with pytest.raises(IdxFormatError, match='truncated'):
            read_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / 'tiny'
        path.write_bytes(b'\x00\x00\x08')
        with pytest.raises(IdxFormatError, match='truncated'):
            read_idx_images(path)

    def test_label_out_of_range(self, tmp_path, idx_files):
        images_path, _ = idx_files
        write_idx_labels(tmp_path / 'bad', np.full(40, 12))
        with pytest.raises(IdxFormatError):
            load_idx(images_path, tmp_path / 'bad')

    def test_missing_file(self, tmp_path):
        with pytest.raises(IdxFormatError):
            read_idx_images(tmp_path / 'absent')


class TestSynthetic:
    def test_parse(self):
        spec = SyntheticSpec.parse('blobs:K=4,n=10,sigma=0.2', seed=3)
        assert (spec.num_classes, spec.per_class, spec.sigma, spec.seed) == (4, 10, 0.2, 3)

    @pytest.mark.parametrize('text', ['spiral:K=2', 'blobs:K=x', 'blobs:q=1', 'moons:K=3'])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            SyntheticSpec.parse(text)

    def test_zero_noise_sits_on_centers(self):
        spec = SyntheticSpec('blobs', 3, 5, sigma=0.0)
        data = synth(spec)
        np.testing.assert_allclose(data.samples, blob_centers(spec)[data.labels])

    def test_fixed_seed(self):
        spec = SyntheticSpec('moons', 2, 50, sigma=0.1, seed=4)
        first, second = synth(spec), synth(spec)
        np.testing.assert_array_equal(first.samples, second.samples)
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_nearest_centroid_is_perfect(self):
        spec = SyntheticSpec('blobs', 3, 100, sigma=0.1)
        data = synth(spec)
        distances = np.linalg.norm(data.samples[:, None, :] - blob_centers(spec)[None], axis=2)
        assert np.mean(np.argmin(distances, axis=1) == data.labels) == 1.0

    @pytest.mark.parametrize('sigma', [0.1, 0.5])
    def test_ood_far_from_centers(self, sigma):
        spec = SyntheticSpec('blobs', 3, 10, sigma=sigma)
        ood = synth_ood(spec, 200)
        distances = np.linalg.norm(ood.samples[:, None, :] - blob_centers(spec)[None], axis=2)
        assert distances.min() >= 10 * sigma

    def test_noise_images_in_unit_range(self):
        data = noise_images(5, shape=(8, 8, 1))
        assert data.is_image and data.samples.min() >= 0 and data.samples.max() <= 1


class TestRotate:
    def test_zero_degrees_is_identity(self, rng):
        image = rng.uniform(size=(9, 9))
        np.testing.assert_array_equal(rotate(image, 0), image)

    def test_quarter_turn_matches_rot90(self, rng):
        image = rng.uniform(size=(7, 7))
        np.testing.assert_allclose(rotate(image, 90), np.rot90(image), atol=1e-9)

    def test_bright_pixel_lands_on_mapped_coordinate(self):
        image = np.zeros((5, 5))
        image[1, 2] = 1.0
        rotated = rotate(image, 90)
        assert np.unravel_index(np.argmax(rotated), rotated.shape) == (2, 1)
        assert rotated[2, 1] == pytest.approx(1.0)

    def test_channel_axis_kept(self, rng):
        assert rotate(rng.uniform(size=(6, 6, 1)), 30).shape == (6, 6, 1)

    def test_output_in_unit_range(self, rng):
        rotated = rotate(rng.uniform(size=(10, 10)), 37)
        assert rotated.min() >= 0 and rotated.max() <= 1

    def test_non_square_rejected(self):
        with pytest.raises(DataError):
            rotate(np.zeros((4, 5)), 10)


class TestRiskPresets:
    def test_mnist_entries(self):
        R = mnist_risk_matrix()
        assert R.cost(0, 5) == 25 and R.cost(5, 0) == 5
        assert np.all(np.diag(R.values) == 0)

    def test_cifar10_groups(self):
        R = cifar10_risk_matrix()
        assert R.cost(3, 0) == 10
        assert R.cost(0, 3) == 50
        assert R.cost(2, 3) == 1 and R.cost(0, 1) == 1

    def test_grouped_needs_partition(self):
        with pytest.raises(RiskMatrixError):
            grouped_risk_matrix([[0, 1], [1, 2]], {(0, 1): 1.0, (1, 0): 1.0})

    def test_grouped_rejects_negative(self):
        with pytest.raises(RiskMatrixError):
            grouped_risk_matrix([[0], [1]], {(0, 1): -1.0, (1, 0): 1.0})

    def test_resolve(self, tmp_path):
        assert resolve_risk_matrix(None, 3) is None
        assert resolve_risk_matrix('zero', 4).K == 4
        with pytest.raises(RiskMatrixError):
            resolve_risk_matrix('cifar10', 5)
        path = tmp_path / 'r.csv'
        mnist_risk_matrix(3).to_csv(path)
        with pytest.raises(RiskMatrixError):
            resolve_risk_matrix(str(path), 4)
