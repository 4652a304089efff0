import numpy as np
import pytest

from jgan.datasets import (
    CorruptLabelError,
    DatasetFormatError,
    EpochSampler,
    LabeledDataset,
    MixtureSpec,
    cifar_record_bytes,
    load_cifar10,
    load_cifar100,
    load_dataset,
    load_stl,
    make_mixture,
    resize_bilinear,
    ring_mixture,
    save_dataset,
    to_onehot,
)


def cifar10_record(label, pixels):
    return bytes([label]) + bytes(pixels)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_cifar10_single_record(tmp_path, rng):
    pixels = rng.integers(0, 256, 3072, dtype=np.uint8)
    pixels[0], pixels[1] = 0, 255
    rec = cifar10_record(7, pixels)
    assert len(rec) == 3073
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(rec)
    ds = load_cifar10(tmp_path)
    assert ds.images.shape == (1, 32, 32, 3)
    assert ds.labels.tolist() == [7]
    assert ds.K == 10
    # first byte is R at row 0 col 0, second is R at row 0 col 1
    assert ds.images[0, 0, 0, 0] == -1.0
    assert ds.images[0, 0, 1, 0] == 1.0
    # green plane starts at byte 1024
    assert ds.images[0, 0, 0, 1] == pytest.approx(pixels[1024] / 127.5 - 1)


def test_cifar10_roundtrip_bytes(tmp_path, rng):
    recs = b"".join(cifar10_record(int(l), rng.integers(0, 256, 3072, dtype=np.uint8)) for l in [3, 9, 0])
    (tmp_path / "data_batch_1.bin").write_bytes(recs)
    ds = load_cifar10(tmp_path)
    again = b"".join(cifar_record_bytes(img, int(l)) for img, l in zip(ds.images, ds.labels))
    assert again == recs
    assert ds.images.min() >= -1 and ds.images.max() <= 1


def test_cifar10_explicit_file_list(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    a.write_bytes(cifar10_record(1, [0] * 3072))
    b.write_bytes(cifar10_record(2, [255] * 3072))
    ds = load_cifar10([a, b])
    assert ds.labels.tolist() == [1, 2]


def test_cifar10_truncated(tmp_path):
    (tmp_path / "data_batch_1.bin").write_bytes(cifar10_record(1, [0] * 3072) + b"\x01\x02")
    with pytest.raises(DatasetFormatError, match="offset 3073"):
        load_cifar10(tmp_path)


def test_cifar10_bad_label(tmp_path):
    (tmp_path / "data_batch_1.bin").write_bytes(cifar10_record(10, [0] * 3072))
    with pytest.raises(CorruptLabelError):
        load_cifar10(tmp_path)


@pytest.mark.parametrize("coarse", [0, 19, 255])
def test_cifar100_fine_label(tmp_path, coarse):
    (tmp_path / "train.bin").write_bytes(bytes([coarse, 42]) + bytes(3072))
    ds = load_cifar100(tmp_path)
    assert ds.labels.tolist() == [42]
    assert ds.K == 100
    assert np.all(ds.images == -1.0)


def test_cifar100_record_size(tmp_path):
    (tmp_path / "train.bin").write_bytes(bytes([0, 1]) + bytes(3072) + bytes([0]))
    with pytest.raises(DatasetFormatError):
        load_cifar100(tmp_path)


def stl_bytes(images_hwc):
    # channel-major, column-major within channel
    return np.asarray(images_hwc, np.uint8).transpose(0, 3, 2, 1).tobytes()


def test_stl_constant_and_shape(tmp_path):
    img = np.full((2, 96, 96, 3), 200, np.uint8)
    (tmp_path / "unlabeled_X.bin").write_bytes(stl_bytes(img))
    ds = load_stl(tmp_path, 48, split="unlabeled")
    assert ds.images.shape == (2, 48, 48, 3)
    assert np.allclose(ds.images, 200 / 127.5 - 1, atol=1e-6)
    assert ds.labels is None and ds.K == 0


def test_stl_layout_and_labels(tmp_path, rng):
    img = rng.integers(0, 256, (1, 96, 96, 3), dtype=np.uint8)
    (tmp_path / "train_X.bin").write_bytes(stl_bytes(img))
    (tmp_path / "train_y.bin").write_bytes(bytes([10]))
    ds = load_stl(tmp_path, 48)
    assert ds.labels.tolist() == [9]
    # factor-2 half-pixel bilinear is the mean of each 2x2 block
    block = img[0, 2:4, 6:8, 1].astype(float).mean()
    assert ds.images[0, 1, 3, 1] == pytest.approx(block / 127.5 - 1, abs=1e-6)


def test_stl_size_mismatch(tmp_path):
    (tmp_path / "train_X.bin").write_bytes(bytes(96 * 96 * 3 - 1))
    with pytest.raises(DatasetFormatError):
        load_stl(tmp_path)


def test_bilinear_block_midpoint():
    block = np.array([[0, 0], [255, 255]], float).reshape(1, 2, 2, 1)
    assert resize_bilinear(block, 1)[0, 0, 0, 0] == pytest.approx(127.5)


def test_mixture_zero_spread():
    spec = ring_mixture(8, 2.0, 1e-15, seed=3)
    ds = make_mixture(spec, 500)
    assert np.allclose(ds.images, spec.means[ds.labels], atol=1e-6)


def test_mixture_deterministic():
    spec = ring_mixture(seed=11)
    a, b = make_mixture(spec, 1000), make_mixture(spec, 1000)
    assert a.images.tobytes() == b.images.tobytes()
    assert np.array_equal(a.labels, b.labels)


def test_mixture_label_marginal():
    ds = make_mixture(ring_mixture(8, seed=5), 10_000)
    counts = np.bincount(ds.labels, minlength=8)
    assert 0.5 * np.abs(counts / 10_000 - 1 / 8).sum() < 0.03


def test_mixture_spec_validation():
    with pytest.raises(ValueError):
        MixtureSpec(np.zeros((2, 2)), 0.1, np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        MixtureSpec(np.zeros((2, 2)), 0.0, np.array([0.5, 0.5]))


def test_onehot():
    assert to_onehot([0], 3).tolist() == [[1, 0, 0]]
    assert to_onehot([2], 3)[0, -1] == 1
    labels = np.arange(10) % 7
    assert np.array_equal(to_onehot(labels, 7).argmax(1), labels)
    with pytest.raises(ValueError):
        to_onehot([3], 3)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 4, 4, 3), np.float32), np.array([0]), 2)
    with pytest.raises(ValueError):
        LabeledDataset(np.full((1, 4, 4, 3), 2.0, np.float32), np.array([0]), 2)
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((1, 4, 4, 3), np.float32), np.array([2]), 2)


def test_epoch_sampler_reproducible():
    a = EpochSampler(10, 3, seed=4)
    b = EpochSampler(10, 3, seed=4)
    ia, ib = iter(a), iter(b)
    first = [next(ia) for _ in range(7)]
    assert all(np.array_equal(x, next(ib)) for x in first)
    # one epoch covers three distinct batches
    assert len(set(np.concatenate(first[:3]).tolist())) == 9


def test_dataset_dir_roundtrip(tmp_path):
    ds = make_mixture(ring_mixture(), 20)
    save_dataset(ds, tmp_path / "d")
    back = load_dataset(tmp_path / "d")
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)
    assert back.K == 8 and back.name == "mixture"
