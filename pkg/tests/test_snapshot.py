import json
import struct

import numpy as np
import pytest

from lsparse.data import make_gmm_data, make_lda_corpus
from lsparse.expfam import CategoricalDirichlet, GaussianWishart
from lsparse.mixture import global_step, summary_step
from lsparse.seeding import init_lda
from lsparse.snapshot import MAGIC, SnapshotError, load_snapshot, read_snapshot, save_snapshot


def gauss_state():
    rng = np.random.default_rng(0)
    X = make_gmm_data(100, 3, 2, rng)[0]
    fam = GaussianWishart.default_prior(X)
    return global_step(summary_step(X, rng.dirichlet(np.ones(4), size=100), fam), 10.0, fam)


def cat_state():
    rng = np.random.default_rng(1)
    fam = CategoricalDirichlet(0.1, 5)
    x = rng.integers(0, 5, size=40)
    return global_step(summary_step(x, rng.dirichlet(np.ones(3), size=40), fam), 1.0, fam)


def lda_state():
    corpus, _ = make_lda_corpus(3, 15, 20, 30, np.random.default_rng(2))
    return init_lda(corpus, 3, 0.5, 0.1, np.random.default_rng(0))[0]


def test_gauss_round_trip_bit_exact(tmp_path):
    g = gauss_state()
    save_snapshot(tmp_path / "g.snap", g, {"K": 4, "seed": 3})
    h, header = load_snapshot(tmp_path / "g.snap")
    assert header["family"] == "gauss" and header["K"] == 4 and header["D"] == 3
    assert header["config"] == {"K": 4, "seed": 3}
    assert h.theta.lam.tobytes() == g.theta.lam.tobytes()
    assert h.alpha == g.alpha
    for a, b in zip(h.obs, g.obs):
        assert a.nu == b.nu and a.scale_inv.tobytes() == b.scale_inv.tobytes()
    assert h.family.nu_bar == g.family.nu_bar
    assert h.family.prior_scale_inv.tobytes() == g.family.prior_scale_inv.tobytes()
    save_snapshot(tmp_path / "h.snap", h, {"K": 4, "seed": 3})
    assert (tmp_path / "g.snap").read_bytes() == (tmp_path / "h.snap").read_bytes()


def test_cat_round_trip_bit_exact(tmp_path):
    g = cat_state()
    save_snapshot(tmp_path / "c.snap", g)
    h, header = load_snapshot(tmp_path / "c.snap")
    assert header["family"] == "cat" and header["V"] == 5
    assert h.obs.lam.tobytes() == g.obs.lam.tobytes()
    assert h.family.lambda_bar == g.family.lambda_bar


def test_lda_round_trip_bit_exact(tmp_path):
    g = lda_state()
    save_snapshot(tmp_path / "l.snap", g)
    h, header = load_snapshot(tmp_path / "l.snap")
    assert header["family"] == "lda" and header["V"] == 15
    assert h.topics.lam.tobytes() == g.topics.lam.tobytes()
    assert (h.alpha, h.lambda_bar) == (g.alpha, g.lambda_bar)
    np.testing.assert_array_equal(h.C, g.C)


def test_layout(tmp_path):
    g = lda_state()
    save_snapshot(tmp_path / "l.snap", g)
    raw = (tmp_path / "l.snap").read_bytes()
    assert raw[:8] == MAGIC == b"LSPSNAP1"
    (n,) = struct.unpack_from("<I", raw, 8)
    header = json.loads(raw[12:12 + n])
    assert header["arrays"] == [["lam", [3, 15]], ["prior_lambda", [1]]]
    lam = np.frombuffer(raw, "<f8", count=45, offset=12 + n).reshape(3, 15)
    np.testing.assert_array_equal(lam, g.topics.lam)
    assert len(raw) == 12 + n + 8 * 46


@pytest.mark.parametrize("mutate, match", [
    (lambda raw: b"NOTASNAP" + raw[8:], "bad magic"),
    (lambda raw: raw[:-4], "truncated"),
    (lambda raw: raw + b"\0" * 8, "trailing"),
    (lambda raw: raw[:12] + b"}" + raw[13:], "corrupt header"),
])
def test_corrupt_files(tmp_path, mutate, match):
    save_snapshot(tmp_path / "g.snap", gauss_state())
    p = tmp_path / "bad.snap"
    p.write_bytes(mutate((tmp_path / "g.snap").read_bytes()))
    with pytest.raises(SnapshotError, match=match):
        read_snapshot(p)


def test_unknown_family(tmp_path):
    blob = json.dumps({"family": "hmm", "alpha": 1.0, "arrays": [], "config": {}}).encode()
    p = tmp_path / "x.snap"
    p.write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob)
    with pytest.raises(SnapshotError, match="hmm"):
        load_snapshot(p)


def test_rejects_unknown_state(tmp_path):
    with pytest.raises(TypeError):
        save_snapshot(tmp_path / "x.snap", object())
