"""Binary model bundles.

Layout: the 8-byte magic ``IRISBNDL``, a little-endian uint32 header length,
a UTF-8 JSON header, then the arrays as little-endian float64 in header
order. The header records the format version, the bundle kind, free-form
metadata, each array's name and shape, and the SHA-256 of the payload.
"""
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .classify import MLP
from .errors import CorruptBundle, VersionMismatch
from .reduce import KernelSpec, KpcaModel

MAGIC = b"IRISBNDL"
VERSION = 1


def _pack(kind, arrays, meta):
    names = list(arrays)
    payload = b"".join(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes() for k in names)
    header = {
        "version": VERSION,
        "kind": kind,
        "meta": meta,
        "arrays": [[k, list(np.shape(arrays[k]))] for k in names],
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    hb = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<I", len(hb)) + hb + payload


def _unpack(raw):
    if len(raw) < 12 or raw[:8] != MAGIC:
        raise CorruptBundle("missing bundle magic")
    (hlen,) = struct.unpack("<I", raw[8:12])
    try:
        header = json.loads(raw[12:12 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptBundle(f"unreadable header: {exc}") from None
    if header.get("version") != VERSION:
        raise VersionMismatch(f"bundle version {header.get('version')}, expected {VERSION}")
    payload = raw[12 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CorruptBundle("payload checksum mismatch")
    arrays = {}
    pos = 0
    for name, shape in header["arrays"]:
        n = int(np.prod(shape, dtype=np.int64)) * 8
        if pos + n > len(payload):
            raise CorruptBundle("payload shorter than declared arrays")
        arrays[name] = np.frombuffer(payload, dtype="<f8", count=n // 8, offset=pos).reshape(shape).astype(np.float64)
        pos += n
    if pos != len(payload):
        raise CorruptBundle("trailing bytes after declared arrays")
    return header["kind"], header["meta"], arrays


def save_bundle(path, obj):
    """Persist an ``MLP`` or a ``KpcaModel``."""
    if isinstance(obj, MLP):
        arrays = {f"p{i}": p for i, p in enumerate(obj.parameters())}
        meta = {"layer_sizes": obj.layer_sizes, "dropout": obj.dropout, "seed": obj.seed}
        raw = _pack("mlp", arrays, meta)
    elif isinstance(obj, KpcaModel):
        arrays = {"mean": obj.mean, "scale": obj.scale, "train": obj.train,
                  "eigenvalues": obj.eigenvalues, "coef": obj.coef,
                  "k_col_mean": obj.k_col_mean, "k_grand_mean": np.array([obj.k_grand_mean])}
        raw = _pack("kpca", arrays, {"kernel": obj.kernel.to_dict()})
    else:
        raise TypeError(f"cannot bundle {type(obj).__name__}")
    Path(path).write_bytes(raw)


def load_bundle(path):
    kind, meta, a = _unpack(Path(path).read_bytes())
    if kind == "mlp":
        model = MLP(meta["layer_sizes"], meta["dropout"], meta["seed"], zero_output=True)
        model.set_parameters([a[f"p{i}"] for i in range(len(a))])
        return model
    if kind == "kpca":
        return KpcaModel(KernelSpec(**meta["kernel"]), a["mean"], a["scale"], a["train"],
                         a["eigenvalues"], a["coef"], a["k_col_mean"], float(a["k_grand_mean"][0]))
    raise CorruptBundle(f"unknown bundle kind {kind!r}")
