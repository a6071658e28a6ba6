import gzip
import struct

import numpy as np
import pytest

from convae import ConfigError, IngestionError, load_idx
from convae.data import batches, epoch_batches, epoch_order

from corpus import IMAGE_MAGIC, LABEL_MAGIC, make_digit_images, write_idx_images, write_idx_labels


class TestLoadIdx:
    def test_loads_normalized_pixels(self, train_handle, corpus_paths):
        assert train_handle.count == 600
        assert train_handle.images.shape == (600, 1, 28, 28)
        data = train_handle.images.data
        assert data.min() >= 0.0 and data.max() <= 1.0
        assert train_handle.labels.min() >= 0 and train_handle.labels.max() <= 9

    def test_round_trip_to_source_bytes(self, tmp_path):
        images, labels = make_digit_images(40, seed=5)
        ip = write_idx_images(tmp_path / "imgs.idx", images)
        lp = write_idx_labels(tmp_path / "labs.idx", labels)
        handle = load_idx(ip, lp)
        rebuilt = np.round(handle.images.data * 255.0).astype(np.uint8)
        assert np.array_equal(rebuilt.reshape(images.shape), images)
        assert np.array_equal(handle.labels, labels)

    def test_gzip_transparent(self, tmp_path):
        images, labels = make_digit_images(10, seed=6)
        ip = write_idx_images(tmp_path / "imgs.idx.gz", images, compress=True)
        lp = write_idx_labels(tmp_path / "labs.idx.gz", labels, compress=True)
        handle = load_idx(ip, lp)
        assert handle.count == 10
        assert np.array_equal(np.round(handle.images.data * 255).astype(np.uint8).reshape(images.shape), images)

    def test_zero_items_is_valid(self, tmp_path):
        ip = tmp_path / "empty.idx"
        ip.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 0, 28, 28))
        lp = tmp_path / "empty_labels.idx"
        lp.write_bytes(struct.pack(">II", LABEL_MAGIC, 0))
        handle = load_idx(ip, lp)
        assert handle.count == 0

    def test_bad_image_magic(self, tmp_path):
        ip = tmp_path / "bad.idx"
        ip.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + b"\x00" * 4)
        lp = write_idx_labels(tmp_path / "l.idx", np.zeros(1, dtype=np.uint8))
        with pytest.raises(IngestionError, match="magic"):
            load_idx(ip, lp)

    def test_truncated_payload_names_file_and_offset(self, tmp_path):
        ip = tmp_path / "short.idx"
        ip.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 2, 28, 28) + b"\x00" * 100)
        lp = write_idx_labels(tmp_path / "l.idx", np.zeros(2, dtype=np.uint8))
        with pytest.raises(IngestionError, match="short.idx"):
            load_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        images, _ = make_digit_images(4, seed=1)
        ip = write_idx_images(tmp_path / "i.idx", images)
        lp = write_idx_labels(tmp_path / "l.idx", np.zeros(5, dtype=np.uint8))
        with pytest.raises(IngestionError, match="count"):
            load_idx(ip, lp)

    def test_label_out_of_range(self, tmp_path):
        images, _ = make_digit_images(3, seed=2)
        ip = write_idx_images(tmp_path / "i.idx", images)
        lp = tmp_path / "l.idx"
        lp.write_bytes(struct.pack(">II", LABEL_MAGIC, 3) + bytes([1, 10, 3]))
        with pytest.raises(IngestionError, match="10"):
            load_idx(ip, lp)


class TestBatches:
    def test_batch_count_arithmetic(self, train_handle):
        got = list(epoch_batches(train_handle, 10, run_seed=1, epoch=0))
        assert len(got) == 60  # 600 / 10

    def test_partial_final_batch_dropped(self, train_handle):
        got = list(epoch_batches(train_handle, 70, run_seed=1, epoch=0))
        assert len(got) == 8  # floor(600 / 70)
        assert all(b.shape[0] == 70 for b, _ in got)

    def test_same_seed_same_order(self, train_handle):
        a = [b.data.copy() for b, _ in epoch_batches(train_handle, 50, 9, 0)]
        b = [b.data.copy() for b, _ in epoch_batches(train_handle, 50, 9, 0)]
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_epochs_reshuffle(self, train_handle):
        e0 = epoch_order(train_handle.count, 9, 0)
        e1 = epoch_order(train_handle.count, 9, 1)
        assert not np.array_equal(e0, e1)
        assert np.array_equal(np.sort(e0), np.sort(e1))

    def test_every_sample_once_per_epoch(self, train_handle):
        # batch elements across one epoch sum to the whole dataset's pixels
        seen = 0.0
        count = 0
        for b, _ in epoch_batches(train_handle, 100, 3, 0):
            seen += b.data.sum()
            count += b.size
        assert count == 600 * 784
        assert abs(seen - train_handle.images.data.sum()) < 1e-9

    def test_target_aliases_input(self, train_handle):
        batch, target = next(iter(epoch_batches(train_handle, 10, 0, 0)))
        assert batch is target

    def test_oversized_batch_rejected(self, train_handle):
        with pytest.raises(ConfigError):
            list(epoch_batches(train_handle, 601, 0, 0))

    def test_infinite_stream_crosses_epochs(self, train_handle):
        stream = batches(train_handle, 200, 4)
        seen = [next(stream)[0] for _ in range(5)]  # 3 per epoch
        assert len(seen) == 5
