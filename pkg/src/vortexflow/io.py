"""Snapshot, checkpoint and time-series files.

Binary snapshots are little-endian: the magic ``VFSNAP``, a two-byte schema
version, a ``uint32`` header length, a UTF-8 JSON header, then the raw arrays in
header order (``<f8`` for real, ``<c16`` for complex). CSV snapshots carry the
same JSON header on ``#`` lines and one row per site with ``repr`` floats, so
both formats round-trip bit-exactly.
"""
import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import fields as fl
from .flow import SERIES_COLUMNS, FlowState
from .lattice import TorusGrid

__all__ = [
    "SCHEMA_VERSION",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
    "state_to_snapshot",
    "snapshot_to_state",
    "snapshot_to_pair",
    "pair_to_snapshot",
    "TimeSeriesWriter",
    "read_timeseries",
]

SCHEMA_VERSION = 1
MAGIC = b"VFSNAP"


@dataclass
class Snapshot:
    header: dict
    arrays: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, Snapshot) or self.header != other.header:
            return False
        if self.arrays.keys() != other.arrays.keys():
            return False
        return all(
            a.dtype == other.arrays[k].dtype and a.shape == other.arrays[k].shape
            and a.tobytes() == other.arrays[k].tobytes()
            for k, a in self.arrays.items()
        )


def _layout(arrays):
    return [
        {"name": k, "dtype": "c16" if np.iscomplexobj(v) else "f8", "shape": list(v.shape)}
        for k, v in arrays.items()
    ]


def _full_header(snap):
    head = dict(snap.header)
    head["schema_version"] = SCHEMA_VERSION
    head["arrays"] = _layout(snap.arrays)
    return head


def _write_binary(path, snap):
    head = json.dumps(_full_header(snap), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", SCHEMA_VERSION, len(head)))
        fh.write(head)
        for arr in snap.arrays.values():
            dt = "<c16" if np.iscomplexobj(arr) else "<f8"
            fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def _read_binary(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<HI", data, off)
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {version}")
    off += struct.calcsize("<HI")
    head = json.loads(data[off: off + hlen].decode("utf-8"))
    off += hlen
    arrays = {}
    for item in head.pop("arrays"):
        dt = np.dtype("<c16" if item["dtype"] == "c16" else "<f8")
        count = int(np.prod(item["shape"], dtype=int))
        arr = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(item["shape"])
        arrays[item["name"]] = arr.astype(dt.newbyteorder("="))
        off += count * dt.itemsize
    head.pop("schema_version", None)
    return Snapshot(head, arrays)


def _site_columns(name, arr):
    lead = arr.shape[:-2]
    cols = []
    for idx in np.ndindex(*lead):
        tag = name + "".join(f"[{i}]" for i in idx)
        if np.iscomplexobj(arr):
            cols += [(tag + ".re", idx, "re"), (tag + ".im", idx, "im")]
        else:
            cols.append((tag, idx, None))
    return cols


def _write_csv(path, snap):
    head = _full_header(snap)
    shape = None
    cols = []
    for name, arr in snap.arrays.items():
        if shape is None:
            shape = arr.shape[-2:]
        elif arr.shape[-2:] != shape:
            raise ValueError("CSV snapshots need all arrays on the same site grid")
        cols += [(name, c) for c in _site_columns(name, arr)]
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(head, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j"] + [c[1][0] for c in cols])
        for i in range(shape[0]):
            for j in range(shape[1]):
                row = [i, j]
                for name, (_, idx, part) in cols:
                    v = snap.arrays[name][idx + (i, j)]
                    if part == "re":
                        v = v.real
                    elif part == "im":
                        v = v.imag
                    row.append(repr(float(v)))
                w.writerow(row)


def _read_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing snapshot header")
        head = json.loads(first[2:])
        rows = list(csv.reader(fh))
    version = head.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {version}")
    names = rows[0]
    body = np.array([[float(x) for x in r] for r in rows[1:]])
    col = {n: k for k, n in enumerate(names)}
    arrays = {}
    for item in head.pop("arrays"):
        shape = tuple(item["shape"])
        cplx = item["dtype"] == "c16"
        arr = np.zeros(shape, complex if cplx else float)
        ii = body[:, 0].astype(int)
        jj = body[:, 1].astype(int)
        for tag, idx, part in _site_columns(item["name"], arr):
            vals = body[:, col[tag]]
            if part == "im":
                arr[idx + (ii, jj)] += 1j * vals
            else:
                arr[idx + (ii, jj)] = vals
        arrays[item["name"]] = arr
    return Snapshot(head, arrays)


def write_snapshot(path, snap: Snapshot, fmt="binary"):
    if fmt == "binary":
        _write_binary(path, snap)
    elif fmt == "csv":
        _write_csv(path, snap)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        lead = fh.read(len(MAGIC))
    return _read_binary(path) if lead == MAGIC else _read_csv(path)


def _pair_header(A, t):
    return {"grid": A.grid.to_dict(), "group": A.spec.to_dict(), "t": float(t)}


def pair_to_snapshot(A, u, t=0.0) -> Snapshot:
    return Snapshot(_pair_header(A, t), {"a": A.a, "u": u.u})


def state_to_snapshot(state: FlowState) -> Snapshot:
    """Checkpoint: current and base pairs, tracked gauge and the step size."""
    head = _pair_header(state.A, state.t)
    head["dt"] = float(state.dt)
    arrays = {"a": state.A.a, "u": state.u.u, "s": state.s, "a0": state.A0.a, "u0": state.u0.u}
    return Snapshot(head, arrays)


def _spec_grid(head):
    g = head["grid"]
    grp = head["group"]
    grid = TorusGrid(g["nx"], g["ny"], g["lx"], g["ly"])
    spec = fl.ActionSpec(grp["weights"], grp["tau"], grp["degrees"])
    return grid, spec


def snapshot_to_pair(snap: Snapshot):
    grid, spec = _spec_grid(snap.header)
    return fl.Connection(grid, spec, snap.arrays["a"]), fl.Section(grid, spec, snap.arrays["u"])


def snapshot_to_state(snap: Snapshot) -> FlowState:
    grid, spec = _spec_grid(snap.header)
    arr = snap.arrays
    A = fl.Connection(grid, spec, arr["a"])
    u = fl.Section(grid, spec, arr["u"])
    A0 = fl.Connection(grid, spec, arr.get("a0", arr["a"]))
    u0 = fl.Section(grid, spec, arr.get("u0", arr["u"]))
    s = arr.get("s", np.zeros((spec.k,) + grid.shape))
    return FlowState(float(snap.header["t"]), A, u, np.array(s), float(snap.header.get("dt", 1e-2)), A0, u0)


class TimeSeriesWriter:
    """Single-writer CSV sink for flow rows; floats are written with ``repr``."""

    def __init__(self, path, columns=SERIES_COLUMNS, append=False):
        self.columns = tuple(columns)
        self._fh = open(path, "a" if append else "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        if not append:
            self._w.writerow(self.columns)

    def __call__(self, row):
        self._w.writerow([repr(float(row[c])) for c in self.columns])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_timeseries(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(names))
    return {n: data[:, k] for k, n in enumerate(names)}
