import numpy as np
import pytest

from jcmspl.archive import (
    FORMAT_VERSION,
    MAGIC,
    fingerprint_dataset,
    load_model,
    save_model,
)
from jcmspl.dataset import SynthSpec, synth_generate
from jcmspl.errors import ArchiveError
from jcmspl.recognizer import eval_standard
from jcmspl.trainer import Hyperparams, JcmsplModel, fit


def small_dataset():
    return synth_generate(SynthSpec(m=16, d=8, k=12, num_seen_classes=4,
                                    num_unseen_classes=2, samples_per_class=8))


def trained_model(variant="full"):
    ds, _ = small_dataset()
    k = 1 if variant == "fpl" else 6
    model, _ = fit(ds, Hyperparams(k=k, t_max=10, seed=0, variant=variant))
    return ds, model


def test_round_trip_is_bit_exact(tmp_path):
    ds, model = trained_model()
    path = tmp_path / "model.bin"
    save_model(path, model, fingerprint_dataset(ds))
    loaded = load_model(path)
    assert loaded.model.variant == model.variant
    assert loaded.model.hyper == model.hyper
    assert np.array_equal(loaded.model.A, model.A)
    assert np.array_equal(loaded.model.B, model.B)
    assert np.array_equal(loaded.model.C, model.C)
    assert loaded.fingerprint == fingerprint_dataset(ds)


def test_round_trip_fpl_omits_b_and_c(tmp_path):
    ds, model = trained_model("fpl")
    path = tmp_path / "fpl.bin"
    save_model(path, model, fingerprint_dataset(ds))
    loaded = load_model(path)
    assert loaded.model.B is None and loaded.model.C is None
    assert np.array_equal(loaded.model.A, model.A)


def test_saved_file_is_deterministic(tmp_path):
    ds, model = trained_model()
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_model(p1, model, fingerprint_dataset(ds))
    save_model(p2, model, fingerprint_dataset(ds))
    assert p1.read_bytes() == p2.read_bytes()


def test_evaluation_identical_after_round_trip(tmp_path):
    ds, model = trained_model()
    path = tmp_path / "model.bin"
    save_model(path, model, fingerprint_dataset(ds))
    loaded = load_model(path).model
    before = eval_standard(model, ds, "v2s", "cosine")
    after = eval_standard(loaded, ds, "v2s", "cosine")
    assert before == after


def test_fingerprint_tracks_content():
    ds, _ = small_dataset()
    fp1 = fingerprint_dataset(ds)
    fp2 = fingerprint_dataset(ds)
    assert fp1.sha256 == fp2.sha256
    other, _ = synth_generate(SynthSpec(m=16, d=8, k=12, num_seen_classes=4,
                                        num_unseen_classes=2, samples_per_class=8,
                                        seed=99))
    assert fingerprint_dataset(other).sha256 != fp1.sha256
    payload = fp1.to_dict()
    assert payload["sha256"] == fp1.sha256
    assert payload["n_seen"] == ds.n_seen and payload["n_unseen"] == ds.n_unseen


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + b"\x00" * 64)
    with pytest.raises(ArchiveError):
        load_model(path)


def test_rejects_bad_version(tmp_path):
    ds, model = trained_model()
    path = tmp_path / "model.bin"
    save_model(path, model, fingerprint_dataset(ds))
    raw = bytearray(path.read_bytes())
    version_field = np.array([FORMAT_VERSION + 1], dtype="<u4").tobytes()
    raw[len(MAGIC):len(MAGIC) + 4] = version_field
    path.write_bytes(bytes(raw))
    with pytest.raises(ArchiveError):
        load_model(path)


def test_rejects_truncation(tmp_path):
    ds, model = trained_model()
    path = tmp_path / "model.bin"
    save_model(path, model, fingerprint_dataset(ds))
    raw = path.read_bytes()
    for cut in (len(raw) // 3, len(raw) - 5):
        clipped = tmp_path / f"cut_{cut}.bin"
        clipped.write_bytes(raw[:cut])
        with pytest.raises(ArchiveError):
            load_model(clipped)
