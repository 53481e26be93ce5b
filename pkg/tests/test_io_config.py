import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vortexflow import config as cf
from vortexflow import fields as fl
from vortexflow import flow
from vortexflow import io
from vortexflow.exceptions import ConfigError
from vortexflow.lattice import TorusGrid

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def _snap(a, u):
    head = {"grid": {"nx": 4, "ny": 5, "lx": 1.0, "ly": 2.0}, "t": 0.1 + 0.2}
    return io.Snapshot(head, {"a": a, "u": u})


@pytest.mark.parametrize("fmt", ["binary", "csv"])
@given(a=arrays(np.float64, (1, 2, 4, 5), elements=finite),
       re=arrays(np.float64, (2, 4, 5), elements=finite), im=arrays(np.float64, (2, 4, 5), elements=finite))
def test_snapshot_roundtrip_is_bit_exact(tmp_path_factory, fmt, a, re, im):
    path = tmp_path_factory.mktemp("snap") / "s.dat"
    snap = _snap(a, re + 1j * im)
    io.write_snapshot(path, snap, fmt)
    assert io.read_snapshot(path) == snap


def test_snapshot_format_errors(tmp_path):
    snap = _snap(np.zeros((1, 2, 4, 5)), np.zeros((2, 4, 5), complex))
    with pytest.raises(ValueError):
        io.write_snapshot(tmp_path / "x", snap, "hdf5")
    bad = tmp_path / "bad.csv"
    bad.write_text("i,j\n0,0\n")
    with pytest.raises(ValueError):
        io.read_snapshot(bad)
    p = tmp_path / "s.vfs"
    io.write_snapshot(p, snap)
    data = bytearray(p.read_bytes())
    data[6] = 99  # schema version
    p.write_bytes(bytes(data))
    with pytest.raises(ValueError):
        io.read_snapshot(p)
    ragged = io.Snapshot({}, {"a": np.zeros((2, 3)), "b": np.zeros((3, 3))})
    with pytest.raises(ValueError):
        io.write_snapshot(tmp_path / "r.csv", ragged, "csv")


def test_binary_layout_is_little_endian(tmp_path):
    snap = io.Snapshot({"t": 1.0}, {"x": np.array([[1.0, 2.0], [3.0, 4.0]])})
    p = tmp_path / "x.vfs"
    io.write_snapshot(p, snap)
    raw = p.read_bytes()
    assert raw[:6] == b"VFSNAP" and raw[6:8] == (1).to_bytes(2, "little")
    assert raw[-8:] == np.float64(4.0).astype("<f8").tobytes()


def test_state_roundtrip(tmp_path):
    g = TorusGrid(8, 8)
    spec = fl.ActionSpec([[1, 1], [0, 1]], [7.0, 1.0], [1, 0])
    A, u = fl.holomorphic_pair(g, spec, np.random.default_rng(0))
    snaps = []
    flow.run_flow(A, u, flow.FlowConfig(t_max=0.3, snapshot_every=0.1, raise_on_tmax=False),
                  on_snapshot=snaps.append)
    st_ = snaps[-1]
    for fmt in ("binary", "csv"):
        p = tmp_path / f"c.{fmt}"
        io.write_snapshot(p, io.state_to_snapshot(st_), fmt)
        back = io.snapshot_to_state(io.read_snapshot(p))
        assert back.t == st_.t and back.dt == st_.dt
        for x, y in ((back.A.a, st_.A.a), (back.u.u, st_.u.u), (back.s, st_.s), (back.u0.u, st_.u0.u)):
            assert np.array_equal(x, y)
        assert np.array_equal(back.A.spec.weights, spec.weights)
    B, v = io.snapshot_to_pair(io.pair_to_snapshot(A, u, 2.0))
    assert np.array_equal(B.a, A.a) and np.array_equal(v.u, u.u)


def test_timeseries_roundtrip(tmp_path):
    p = tmp_path / "ts.csv"
    rows = [{c: 0.1 * k + j for j, c in enumerate(flow.SERIES_COLUMNS)} for k in range(5)]
    with io.TimeSeriesWriter(p) as w:
        for r in rows[:3]:
            w(r)
    with io.TimeSeriesWriter(p, append=True) as w:
        for r in rows[3:]:
            w(r)
    data = io.read_timeseries(p)
    assert list(data) == list(flow.SERIES_COLUMNS)
    assert np.array_equal(data["ymh"], np.array([r["ymh"] for r in rows]))


# ---- configuration --------------------------------------------------------------

def test_defaults_need_a_seed():
    with pytest.raises(ConfigError, match="seed"):
        cf.validate({})
    cfg = cf.validate({"init": {"seed": 1}})
    assert cfg["grid"]["nx"] == 32 and cfg["flow"]["scheme"] == "semi-implicit"


@pytest.mark.parametrize("raw,msg", [
    ({"grids": {}}, "unknown section"),
    ({"grid": {"nz": 3}}, "unknown key grid.nz"),
    ({"grid": {"nx": "big"}}, "grid.nx"),
    ({"grid": {"nx": 2}}, "at least 4"),
    ({"grid": {"lx": -1.0}}, "positive"),
    ({"group": {"weights": [[0.5]]}}, "integers"),
    ({"group": {"k": 2}}, "group.k"),
    ({"group": {"tau": [1.0, 2.0]}}, "group.tau"),
    ({"init": {"kind": "magic"}}, "init.kind"),
    ({"init": {"kind": "file"}}, "init.path"),
    ({"flow": {"scheme": "leapfrog"}}, "flow.scheme"),
    ({"flow": {"dt0": 0}}, "flow.dt0"),
    ({"flow": {"record_every": 0}}, "record_every"),
    ({"output": {"snapshot_format": "xml"}}, "snapshot_format"),
    ({"analysis": {"rays": [{"direction": 1}]}}, "rays"),
    ([1, 2], "mapping"),
    ({"grid": [1]}, "mapping"),
])
def test_schema_rejections(raw, msg):
    if isinstance(raw, dict):
        raw = {"init": {"seed": 0}, **raw} if "init" not in raw else raw
    with pytest.raises(ConfigError, match=msg):
        cf.validate(raw)


def test_overrides():
    raw = cf.apply_overrides({"grid": {"nx": 8}}, ["--grid.nx", "16", "--group.tau=[1.5]", "--init.seed", "4"])
    assert raw == {"grid": {"nx": 16}, "group": {"tau": [1.5]}, "init": {"seed": 4}}
    for bad in (["grid.nx", "3"], ["--grid.nx"], ["--nx", "3"]):
        with pytest.raises(ConfigError):
            cf.apply_overrides({}, bad)


def test_load_config_parse_error(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("grid: {nx: [\n")
    with pytest.raises(ConfigError):
        cf.load_config(p)


def test_initial_data_kinds(tmp_path):
    base = {"grid": {"nx": 8, "ny": 8}, "group": {"weights": [[1]], "tau": [5.0], "degrees": [1]}}
    A, u = cf.build_initial(cf.validate({**base, "init": {"kind": "random", "seed": 3}}))
    A2, u2 = cf.build_initial(cf.validate({**base, "init": {"kind": "random", "seed": 3}}))
    assert np.array_equal(u.u, u2.u) and np.array_equal(A.a, A2.a)
    _, v = cf.build_initial(cf.validate({**base, "init": {"kind": "vortex-ansatz"}}))
    assert np.all(A.a.shape == (1, 2, 8, 8)) and np.abs(v.u).max() > 0
    cst = {"grid": {"nx": 8, "ny": 8}, "group": {"weights": [[1, 2]], "tau": [5.0], "degrees": [0]},
           "init": {"kind": "constant", "value": [0.5, 1.5]}}
    _, c = cf.build_initial(cf.validate(cst))
    assert np.all(c.u[1] == 1.5)
    with pytest.raises(ConfigError):
        cf.build_initial(cf.validate({**cst, "init": {"kind": "constant", "value": [1, 2, 3]}}))
    p = tmp_path / "pair.vfs"
    io.write_snapshot(p, io.pair_to_snapshot(A, u))
    A3, u3 = cf.build_initial(cf.validate({**base, "init": {"kind": "file", "path": str(p)}}))
    assert np.array_equal(u3.u, u.u)
    with pytest.raises(OSError):
        cf.build_initial(cf.validate({**base, "init": {"kind": "file", "path": str(tmp_path / "nope")}}))


def test_philox_stream_is_fixed():
    # pin the generator so seeds mean the same thing across numpy versions
    assert cf.make_rng(0).integers(0, 2**32, 3).tolist() == np.random.Generator(
        np.random.Philox(0)).integers(0, 2**32, 3).tolist()
    assert type(cf.make_rng(1).bit_generator).__name__ == "Philox"
