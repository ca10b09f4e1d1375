"""On-disk formats: dataset containers, model checkpoints, CSV tables.

A dataset container is a directory holding ``manifest.json``, ``inputs.f64``
(row-major little-endian float64), one ``targets_<name>.f64`` per target
vector, and an optional ``meta.csv`` of per-row ground truth.

A checkpoint is a single file: one line of JSON header, then a raw block of
little-endian float64 values whose sections are listed in the header.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dkl import DklModel
from .errors import LoadFailure
from .gp import KernelHyper, gp_fit
from .ndcore import MlpParams, mlp_forward, param_count
from .vae import VaeModel

SCHEMA_VERSION = 1
F64 = np.dtype("<f8")


@dataclass
class DatasetContainer:
    inputs: np.ndarray
    targets: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    seed: int = 0
    source: str = ""

    @property
    def n_rows(self):
        return self.inputs.shape[0]

    @property
    def n_cols(self):
        return self.inputs.shape[1]


def _write_f64(path, arr):
    np.ascontiguousarray(arr, dtype=F64).tofile(path)


def write_csv(path, columns, rows_or_cols):
    """Write a CSV; ``rows_or_cols`` is a dict of equal-length columns."""
    names = list(columns)
    cols = [rows_or_cols[c] for c in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*cols):
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def read_csv(path):
    """Read a CSV into a dict of columns; numeric columns become arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for k, name in enumerate(header):
        raw = [r[k] for r in rows]
        try:
            vals = [int(v) for v in raw]
            out[name] = np.array(vals, dtype=np.int64)
        except ValueError:
            try:
                out[name] = np.array([float(v) for v in raw])
            except ValueError:
                out[name] = raw
    return out


def save_dataset(path, container):
    os.makedirs(path, exist_ok=True)
    x = np.asarray(container.inputs, dtype=np.float64)
    _write_f64(os.path.join(path, "inputs.f64"), x)
    for name, vec in container.targets.items():
        vec = np.asarray(vec, dtype=np.float64).ravel()
        if vec.size != x.shape[0]:
            raise ValueError(f"target {name!r} has {vec.size} rows, inputs have {x.shape[0]}")
        _write_f64(os.path.join(path, f"targets_{name}.f64"), vec)
    meta_cols = list(container.meta)
    if meta_cols:
        write_csv(os.path.join(path, "meta.csv"), ["index", *meta_cols],
                  {"index": np.arange(x.shape[0]), **container.meta})
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "n_rows": int(x.shape[0]),
        "n_cols": int(x.shape[1]),
        "dtype": "f64le",
        "seed": int(container.seed),
        "source": container.source,
        "targets": list(container.targets),
        "meta_columns": meta_cols,
    }
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_f64(path, expected, what):
    if not os.path.exists(path):
        raise LoadFailure(f"{what}: missing file {os.path.basename(path)}")
    size = os.path.getsize(path)
    if size != 8 * expected:
        raise LoadFailure(
            f"{what}: size mismatch, {os.path.basename(path)} has {size} bytes, "
            f"manifest implies {8 * expected}"
        )
    return np.fromfile(path, dtype=F64).astype(np.float64)


def load_dataset(path):
    mpath = os.path.join(path, "manifest.json")
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise LoadFailure(f"no manifest.json in {path}") from None
    except json.JSONDecodeError as exc:
        raise LoadFailure(f"corrupt manifest {mpath}: {exc}") from None
    for key in ("schema_version", "n_rows", "n_cols", "dtype"):
        if key not in manifest:
            raise LoadFailure(f"manifest field {key!r} missing")
    if manifest["schema_version"] != SCHEMA_VERSION:
        raise LoadFailure(f"manifest field 'schema_version': unsupported {manifest['schema_version']}")
    if manifest["dtype"] != "f64le":
        raise LoadFailure(f"manifest field 'dtype': unsupported {manifest['dtype']!r}")
    n, d = int(manifest["n_rows"]), int(manifest["n_cols"])
    x = _read_f64(os.path.join(path, "inputs.f64"), n * d, "manifest field 'n_rows'/'n_cols'")
    targets = {
        name: _read_f64(os.path.join(path, f"targets_{name}.f64"), n, f"target {name!r}")
        for name in manifest.get("targets", [])
    }
    meta = {}
    if manifest.get("meta_columns"):
        table = read_csv(os.path.join(path, "meta.csv"))
        if len(table.get("index", [])) != n:
            raise LoadFailure("meta.csv row count does not match manifest field 'n_rows'")
        meta = {c: table[c] for c in manifest["meta_columns"]}
    return DatasetContainer(x.reshape(n, d), targets, meta, manifest.get("seed", 0),
                            manifest.get("source", ""))


def write_checkpoint(path, header, sections):
    """``sections`` is an ordered list of ``(name, array)``; shapes go in the header."""
    header = dict(header)
    header["format"] = "latent-forge-checkpoint"
    header["schema_version"] = SCHEMA_VERSION
    header["sections"] = [[name, list(np.shape(arr))] for name, arr in sections]
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, arr in sections:
            fh.write(np.ascontiguousarray(arr, dtype=F64).tobytes())


def read_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            blob = fh.read()
    except (OSError, ValueError) as exc:
        raise LoadFailure(f"cannot read checkpoint {path}: {exc}") from None
    if header.get("format") != "latent-forge-checkpoint":
        raise LoadFailure("checkpoint field 'format' is wrong")
    sections = {}
    offset = 0
    for name, shape in header["sections"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(blob):
            raise LoadFailure(f"checkpoint section {name!r} is truncated")
        sections[name] = np.frombuffer(blob, dtype=F64, count=count, offset=offset).astype(
            np.float64).reshape(shape)
        offset += nbytes
    if offset != len(blob):
        raise LoadFailure("checkpoint has trailing bytes after the declared sections")
    return header, sections


def save_dkl(path, model):
    header = {
        "kind": "dkl",
        "layer_sizes": list(model.encoder.layer_sizes),
        "hyper": {"amplitude": model.hyper.amplitude, "lengthscale": model.hyper.lengthscale,
                  "noise": model.hyper.noise},
        "y_mean": model.y_mean,
        "y_std": model.y_std,
        "seed": int(model.seed),
        "steps": model.steps,
    }
    write_checkpoint(path, header, [
        ("encoder", model.encoder.flat),
        ("hyper", model.hyper.as_array()),
        ("standardization", np.array([model.y_mean, model.y_std])),
        ("train_inputs", model.train_inputs),
        ("train_targets", model.fit.train_targets * model.y_std + model.y_mean),
        ("train_targets_std", model.fit.train_targets),
        ("objective_trace", np.asarray(model.objective_trace, dtype=np.float64)),
    ])


def load_dkl(path):
    header, s = read_checkpoint(path)
    if header.get("kind") != "dkl":
        raise LoadFailure("checkpoint field 'kind' is not 'dkl'")
    layer_sizes = tuple(header["layer_sizes"])
    if s["encoder"].size != param_count(layer_sizes):
        raise LoadFailure("checkpoint field 'layer_sizes' does not match the encoder block")
    encoder = MlpParams(layer_sizes, s["encoder"].copy())
    hyper = KernelHyper.from_array(s["hyper"])
    y_mean, y_std = (float(v) for v in s["standardization"])
    x = s["train_inputs"]
    fit = gp_fit(mlp_forward(encoder, x), s["train_targets_std"], hyper)
    return DklModel(encoder, hyper, fit, x, y_mean, y_std, header["seed"],
                    list(s["objective_trace"]))


def save_vae(path, model):
    header = {
        "kind": "vae",
        "encoder_sizes": list(model.encoder.layer_sizes),
        "decoder_sizes": list(model.decoder.layer_sizes),
        "beta": model.beta,
        "seed": int(model.seed),
    }
    trace = np.asarray(model.loss_trace, dtype=np.float64).reshape(-1, 3)
    write_checkpoint(path, header, [
        ("encoder", model.encoder.flat),
        ("decoder", model.decoder.flat),
        ("loss_trace", trace),
    ])


def load_vae(path):
    header, s = read_checkpoint(path)
    if header.get("kind") != "vae":
        raise LoadFailure("checkpoint field 'kind' is not 'vae'")
    enc = MlpParams(tuple(header["encoder_sizes"]), s["encoder"].copy())
    dec = MlpParams(tuple(header["decoder_sizes"]), s["decoder"].copy())
    trace = [tuple(row) for row in s["loss_trace"].tolist()]
    return VaeModel(enc, dec, header["beta"], header["seed"], trace)
