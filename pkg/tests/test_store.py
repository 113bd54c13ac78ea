import numpy as np

from fksle import store


def test_configs_roundtrip(tmp_path):
    bits = np.random.default_rng(0).random((5, 13)) < 0.5
    store.save_configs(tmp_path / "c.bin", bits, {"bc": "wired"})
    back, meta = store.load_configs(tmp_path / "c.bin")
    assert np.array_equal(back, bits) and meta["bc"] == "wired" and meta["edges"] == 13


def test_path_roundtrip(tmp_path):
    pts = np.array([[1, 0], [2, 1], [3, 0]])
    store.save_path(tmp_path / "p.csv", pts, {"mesh": 0.5})
    back, meta = store.load_path(tmp_path / "p.csv")
    assert np.array_equal(back, pts) and meta["mesh"] == 0.5
    # lattice paths read as curves are scaled from doubled coordinates by the mesh
    z = store.load_curve(tmp_path / "p.csv")
    assert np.allclose(z, (pts[:, 0] + 1j * pts[:, 1]) * 0.25)


def test_curve_and_driver_roundtrip(tmp_path):
    z = np.array([0, 0.1 + 0.3j, -0.2 + 1j / 3])
    store.save_curve(tmp_path / "z.csv", z)
    assert np.array_equal(store.load_curve(tmp_path / "z.csv"), z)
    t, W, V = np.array([0, 0.5]), np.array([0.0, -0.1]), np.array([0.0, 1 / 3])
    store.save_driver(tmp_path / "d.csv", t, W, V)
    t2, W2, V2 = store.load_driver(tmp_path / "d.csv")
    assert np.array_equal(t2, t) and np.array_equal(W2, W) and np.array_equal(V2, V)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "t,W,V,theta"


def test_excursion_table(tmp_path):
    store.save_excursions(tmp_path / "e.csv", [("r0", 0, 0.1, 0.2, 0.5, 0.1), ("r0", 1, 0.3, None, 0.4, 0.2)])
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "run_id,k,T_k,S_k,max,duration"
    assert lines[2].split(",")[3] == ""


def test_json_numpy_types(tmp_path):
    store.write_json(tmp_path / "a.json", {"x": np.float64(1.5), "n": np.int64(2), "v": np.arange(2), "b": np.bool_(True)})
    assert store.read_json(tmp_path / "a.json") == {"x": 1.5, "n": 2, "v": [0, 1], "b": True}


def test_svg_is_deterministic(tmp_path):
    series = [("a", [1, 2, 3], [1, 4, 9], "line"), ("b", [1, 2], [2, 3], "dots")]
    store.svg_plot(tmp_path / "1.svg", series, title="t", loglog=True)
    store.svg_plot(tmp_path / "2.svg", series, title="t", loglog=True)
    assert store.sha256_file(tmp_path / "1.svg") == store.sha256_file(tmp_path / "2.svg")
