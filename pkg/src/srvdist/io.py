"""File formats: curve files, curve-set and pair manifests, network checkpoints,
and resumable labeling progress.

Curve files are text: a header ``# d=<d> topology=<open|closed>`` followed by
one point per line with ``d`` comma-separated values written with 17
significant digits, so a write/parse round trip is bitwise exact.  Manifests
are JSON.  Checkpoints are ``.npz`` archives of little-endian float64 tensors
plus a JSON header, written with fixed zip timestamps so identical runs give
identical bytes.
"""

from __future__ import annotations

import hashlib
import io as _io
import json
import math
import os
import re
import zipfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .curves import Curve
from .datagen import PairDataset, PairRecord, build_labeled_dataset
from .nn.model import FORMAT_VERSION, NetworkParams

CURVE_SET_FORMAT = "srvdist-curves/1"
PAIRS_FORMAT = "srvdist-pairs/1"
PROGRESS_FORMAT = "srvdist-progress/1"
HEADER_KEY = "__header__"
PROGRESS_EVERY = 256

_HEADER_RE = re.compile(r"#\s*d=(\d+)\s+topology=(open|closed)\s*$")
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class FormatError(ValueError):
    """Malformed input file; the message names the file and, where known, the line."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---- curve files ---------------------------------------------------------

def format_curve(curve: Curve) -> str:
    lines = [f"# d={curve.d} topology={curve.topology}"]
    lines += [",".join(_fmt(v) for v in row) for row in curve.points]
    return "\n".join(lines) + "\n"


def write_curve_file(curve: Curve, path) -> None:
    write_text(path, format_curve(curve))


def parse_curve_text(text: str, name: str = "<string>") -> Curve:
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{name}: empty file")
    m = _HEADER_RE.match(lines[0].strip())
    if m is None:
        raise FormatError(f"{name}, line 1: bad header {lines[0]!r}; "
                          f"expected '# d=<d> topology=<open|closed>'")
    d, topology = int(m.group(1)), m.group(2)
    if d < 1:
        raise FormatError(f"{name}, line 1: dimension must be positive")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != d:
            raise FormatError(f"{name}, line {lineno}: expected {d} values, found {len(fields)}")
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise FormatError(f"{name}, line {lineno}: not a number in {line!r}") from None
        if not all(math.isfinite(v) for v in row):
            raise FormatError(f"{name}, line {lineno}: non-finite value")
        rows.append(row)
    try:
        return Curve(np.array(rows, dtype=np.float64).reshape(len(rows), d), topology == "closed")
    except ValueError as exc:
        raise FormatError(f"{name}: {exc}") from None


def parse_curve_file(path) -> Curve:
    return parse_curve_text(Path(path).read_text(), str(path))


# ---- manifests -----------------------------------------------------------

def write_text(path, text: str) -> None:
    """Write ``text`` to ``path``, creating missing parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_json(obj, path) -> None:
    write_text(path, json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


def _load_json(path, fmt: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}, line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        found = doc.get("format") if isinstance(doc, dict) else None
        raise FormatError(f"{path}: unrecognized format {found!r}, expected {fmt!r}")
    return doc


def write_curve_set(curves: Sequence[Curve], directory, meta: Optional[dict] = None,
                    command: Optional[list] = None, extra: Optional[list] = None) -> Path:
    """Write ``curves/NNNNNN.crv`` files and a ``curves.json`` manifest into ``directory``.

    ``extra`` optionally attaches one JSON object per curve (class labels and such).
    """
    directory = Path(directory)
    (directory / "curves").mkdir(parents=True, exist_ok=True)
    names = []
    for k, c in enumerate(curves):
        name = f"curves/{k:06d}.crv"
        write_curve_file(c, directory / name)
        names.append(name)
    entries = [{"file": f} for f in names]
    if extra is not None:
        for e, x in zip(entries, extra):
            e.update(x)
    doc = {"format": CURVE_SET_FORMAT, "command": list(command or []), "meta": dict(meta or {}),
           "count": len(entries), "curves": entries}
    path = directory / "curves.json"
    _dump_json(doc, path)
    return path


def read_curve_set(path) -> tuple[list, dict]:
    """Curves and the manifest document of a ``curves.json`` file (or its directory)."""
    path = Path(path)
    if path.is_dir():
        path = path / "curves.json"
    doc = _load_json(path, CURVE_SET_FORMAT)
    entries = doc.get("curves", [])
    if doc.get("count") != len(entries):
        raise FormatError(f"{path}: header count {doc.get('count')} but {len(entries)} curves listed")
    return [parse_curve_file(path.parent / e["file"]) for e in entries], doc


def _curve_ref(c: Curve, index: int, files):
    if files is not None and index >= 0:
        return files[index]
    return {"topology": c.topology, "points": c.points.tolist()}


def _curve_from_ref(ref, base: Path, cache: dict, where: str) -> Curve:
    if isinstance(ref, str):
        if ref not in cache:
            cache[ref] = parse_curve_file(base / ref)
        return cache[ref]
    try:
        pts = np.array([[float(v) for v in row] for row in ref["points"]], dtype=np.float64)
        return Curve(pts, ref.get("topology", "open") == "closed")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: bad inline curve ({exc})") from None


def write_pair_manifest(ds: PairDataset, path, command: Optional[list] = None,
                        curve_files: Optional[list] = None, predictions=None) -> None:
    """Write a labeled pair dataset as JSON.

    With ``curve_files`` (paths relative to the manifest, indexed like the
    records' ``ia``/``ib``) records reference curve files; otherwise curves are
    stored inline.  ``predictions`` adds a per-record ``prediction`` column.
    """
    records = []
    for k, r in enumerate(ds.records):
        row = {"a": _curve_ref(r.curve_a, r.ia, curve_files), "b": _curve_ref(r.curve_b, r.ib, curve_files),
               "ia": int(r.ia), "ib": int(r.ib), "label": float(r.label)}
        if predictions is not None:
            row["prediction"] = float(predictions[k])
        records.append(row)
    meta = json.loads(json.dumps(ds.meta, default=_json_default))
    doc = {"format": PAIRS_FORMAT, "command": list(command or []), "meta": meta,
           "count": len(records), "records": records}
    _dump_json(doc, path)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_pair_manifest(path) -> tuple[PairDataset, dict]:
    """The dataset and the raw manifest document."""
    path = Path(path)
    doc = _load_json(path, PAIRS_FORMAT)
    rows = doc.get("records", [])
    if doc.get("count") != len(rows):
        raise FormatError(f"{path}: header count {doc.get('count')} but {len(rows)} records")
    meta = dict(doc.get("meta", {}))
    labeler = meta.get("labeler", "exact")
    cache: dict = {}
    records = []
    for k, row in enumerate(rows):
        where = f"{path}, record {k}"
        label = row.get("label")
        if not isinstance(label, (int, float)) or not math.isfinite(label) or label < 0:
            raise FormatError(f"{where}: label must be finite and >= 0, got {label!r}")
        a = _curve_from_ref(row["a"], path.parent, cache, where)
        b = _curve_from_ref(row["b"], path.parent, cache, where)
        records.append(PairRecord(a, b, float(label), labeler, int(row.get("ia", -1)), int(row.get("ib", -1))))
    try:
        return PairDataset(records, meta), doc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# ---- checkpoints ---------------------------------------------------------

def _zip_add(zf: zipfile.ZipFile, name: str, arr: np.ndarray) -> None:
    buf = _io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, buf.getvalue())


def save_checkpoint(params: NetworkParams, path, history=None, command: Optional[list] = None,
                    extra: Optional[dict] = None) -> None:
    """Store parameter tensors and batch-norm statistics as ``<f8`` arrays plus a JSON header."""
    header = {"version": params.version, "arch": params.arch, "config": params.config,
              "command": list(command or []), "tensors": sorted(params.tensors),
              "bn_stats": sorted(params.bn_stats)}
    if history is not None:
        header["history"] = {"train_mse": list(map(float, history.train_mse)),
                             "test_mse": [None if not math.isfinite(v) else float(v) for v in history.test_mse]}
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True, default=_json_default).encode()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w") as zf:
        _zip_add(zf, HEADER_KEY, np.frombuffer(blob, dtype=np.uint8))
        for k in sorted(params.tensors):
            _zip_add(zf, "t/" + k, params.tensors[k].astype("<f8"))
        for k in sorted(params.bn_stats):
            _zip_add(zf, "s/" + k, params.bn_stats[k].astype("<f8"))


def load_checkpoint(path) -> tuple[NetworkParams, dict]:
    """Inverse of :func:`save_checkpoint`; returns ``(params, header)``."""
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise FormatError(f"{path}: not a checkpoint ({exc})") from None
    with z:
        if HEADER_KEY not in z.files:
            raise FormatError(f"{path}: checkpoint header missing")
        header = json.loads(z[HEADER_KEY].tobytes().decode())
        if header.get("version") != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        tensors = {k: z["t/" + k].astype(np.float64) for k in header["tensors"]}
        stats = {k: z["s/" + k].astype(np.float64) for k in header["bn_stats"]}
    return NetworkParams(header["arch"], tensors, stats, header["version"], header.get("config", {})), header


# ---- resumable labeling --------------------------------------------------

def label_resumable(curves: Sequence[Curve], pairs, labeler: str, progress_path, workers=None,
                    meta: Optional[dict] = None, every: int = PROGRESS_EVERY, **opts) -> PairDataset:
    """Label pairs while appending finished labels to ``progress_path`` (JSON lines).

    If the file exists from an interrupted run with the same pairs, labeler
    and options, finished labels are reused and only the rest is computed.
    The file is removed once labeling completes.
    """
    progress_path = Path(progress_path)
    pairs = [(int(i), int(j)) for i, j in pairs]
    key = {"format": PROGRESS_FORMAT, "labeler": labeler, "pairs": len(pairs),
           "opts": json.loads(json.dumps(opts, sort_keys=True, default=_json_default)),
           "pair_digest": _digest(pairs), "curve_digest": _digest([c.points.tobytes().hex() for c in curves])}
    known = {}
    if progress_path.exists():
        lines = progress_path.read_text().splitlines()
        try:
            head = json.loads(lines[0]) if lines else None
        except json.JSONDecodeError:
            head = None
        if head != key:
            raise FormatError(f"{progress_path}: progress file belongs to a different labeling job; "
                              f"delete it to start over")
        for lineno, line in enumerate(lines[1:], start=2):
            try:
                row = json.loads(line)
                known[int(row["k"])] = row["label"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                # a torn final line from an interrupted write is recomputed
                if lineno != len(lines):
                    raise FormatError(f"{progress_path}, line {lineno}: corrupt progress record") from None
    else:
        progress_path.write_text(json.dumps(key, sort_keys=True) + "\n")

    pending: list = []

    def flush():
        if pending:
            with open(progress_path, "a") as fh:
                fh.writelines(json.dumps({"k": k, "label": v}) + "\n" for k, v in pending)
                fh.flush()
                os.fsync(fh.fileno())
            pending.clear()

    def on_chunk(results):
        pending.extend(results)
        if len(pending) >= every:
            flush()

    ds = build_labeled_dataset(curves, pairs, labeler=labeler, workers=workers, meta=meta,
                               known=known, on_chunk=on_chunk, **opts)
    flush()
    progress_path.unlink()
    return ds


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj).encode()).hexdigest()[:16]
