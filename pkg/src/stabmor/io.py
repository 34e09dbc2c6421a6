"""Matrix Market files, system manifests, CSV tables and run records.

The Matrix Market reader is written out here rather than delegated to
``scipy.io.mmread`` so that malformed files are reported with a line
number.

A manifest is a flat ``key = value`` text file::

    name = spring200
    E = spring200_E.mtx
    A = spring200_A.mtx
    B = spring200_B.mtx
    C = spring200_C.mtx
    n = 200
    n_in = 1
    n_out = 1
    kind = ode
    s0 = 0.5

Paths are relative to the manifest. ``kind = reduced`` loads the four
matrices densely as a :class:`~stabmor.system.ReducedModel`. Unknown keys
are kept in ``SystemManifest.extra``.
"""

import csv
import datetime
import io as _io
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import HeaderMismatch, ManifestError, ParseError
from .system import ReducedModel, SparseSystem

__all__ = [
    "load_matrix_market", "load_dense_matrix_market", "write_matrix_market",
    "SystemManifest", "load_manifest", "write_manifest", "load_system",
    "save_system", "RunRecord", "write_csv", "csv_body", "format_value",
]

_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "complex", "integer", "pattern", "double")
_SYMMETRY = ("general", "symmetric", "skew-symmetric", "hermitian")


def _read_header(lines, path):
    if not lines:
        raise ParseError("empty file", 1, path)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise ParseError("missing '%%MatrixMarket matrix' banner", 1, path)
    fmt, fld, sym = (h.lower() for h in head[2:])
    if fmt not in _FORMATS:
        raise ParseError(f"unsupported format {fmt!r}", 1, path)
    if fld not in _FIELDS:
        raise ParseError(f"unsupported field {fld!r}", 1, path)
    if sym not in _SYMMETRY:
        raise ParseError(f"unsupported symmetry {sym!r}", 1, path)
    if fmt == "array" and fld == "pattern":
        raise ParseError("pattern field is not allowed with array format", 1, path)
    return fmt, fld, sym


def _data_lines(lines):
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if text and not text.startswith("%"):
            yield lineno, text.split()


def _parse_number(tokens, fld, lineno, path):
    try:
        if fld == "complex":
            if len(tokens) != 2:
                raise ValueError
            return complex(float(tokens[0]), float(tokens[1]))
        if fld == "pattern":
            if tokens:
                raise ValueError
            return 1.0
        if len(tokens) != 1:
            raise ValueError
        return float(tokens[0])
    except ValueError:
        raise ParseError(f"malformed {fld} value {' '.join(tokens)!r}", lineno, path) from None


def _read_entries(path):
    path = os.fspath(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    fmt, fld, sym = _read_header(lines, path)
    body = _data_lines(lines)
    try:
        lineno, size = next(body)
    except StopIteration:
        raise ParseError("missing size line", len(lines) + 1, path) from None
    try:
        dims = [int(t) for t in size]
    except ValueError:
        raise ParseError(f"malformed size line {' '.join(size)!r}", lineno, path) from None
    expected = 3 if fmt == "coordinate" else 2
    if len(dims) != expected or min(dims) < 0:
        raise ParseError(f"size line must have {expected} non-negative integers", lineno, path)
    nrows, ncols = dims[0], dims[1]
    if sym != "general" and nrows != ncols:
        raise HeaderMismatch(f"{sym} matrix must be square, got {nrows}x{ncols}", lineno, path)
    rows, cols, vals = [], [], []
    if fmt == "coordinate":
        nnz = dims[2]
        count = 0
        for lineno, tokens in body:
            count += 1
            if count > nnz:
                raise HeaderMismatch(f"more entries than the declared {nnz}", lineno, path)
            if len(tokens) < 2:
                raise ParseError("entry needs row and column indices", lineno, path)
            try:
                i, j = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(f"malformed indices {tokens[0]!r} {tokens[1]!r}", lineno, path) from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise HeaderMismatch(f"index ({i}, {j}) outside {nrows}x{ncols}", lineno, path)
            if sym != "general" and i < j:
                raise ParseError(f"{sym} storage expects the lower triangle, got ({i}, {j})",
                                 lineno, path)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(_parse_number(tokens[2:], fld, lineno, path))
        if count != nnz:
            raise HeaderMismatch(f"declared {nnz} entries, found {count}", len(lines), path)
    else:
        # column-major; symmetric variants store the lower triangle only
        positions = [(i, j) for j in range(ncols) for i in range(nrows)
                     if sym == "general" or i > j or (i == j and sym != "skew-symmetric")]
        count = 0
        for lineno, tokens in body:
            if count >= len(positions):
                raise HeaderMismatch(f"more values than the declared {nrows}x{ncols} array",
                                     lineno, path)
            i, j = positions[count]
            rows.append(i)
            cols.append(j)
            vals.append(_parse_number(tokens, fld, lineno, path))
            count += 1
        if count != len(positions):
            raise HeaderMismatch(f"expected {len(positions)} values, found {count}",
                                 len(lines), path)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=complex if fld == "complex" else float)
    if sym != "general":
        off = rows != cols
        mirror = vals[off]
        if sym == "skew-symmetric":
            mirror = -mirror
        elif sym == "hermitian":
            mirror = np.conj(mirror)
        rows, cols = np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])
        vals = np.concatenate([vals, mirror])
    return fmt, (nrows, ncols), rows, cols, vals


def load_matrix_market(path):
    """Read a Matrix Market file (coordinate or array) into a CSC array.

    Symmetric, skew-symmetric and Hermitian storage is expanded to the full
    matrix; duplicate coordinates are summed.

    Raises
    ------
    ParseError
        Malformed content, with the offending line number.
    HeaderMismatch
        Entry counts or indices inconsistent with the size line.
    """
    _, shape, rows, cols, vals = _read_entries(path)
    M = sp.csc_array((vals, (rows, cols)), shape=shape)
    M.sum_duplicates()
    M.sort_indices()
    return M


def load_dense_matrix_market(path):
    """Read a Matrix Market file into a dense ndarray."""
    _, shape, rows, cols, vals = _read_entries(path)
    out = np.zeros(shape, dtype=vals.dtype if vals.size else float)
    np.add.at(out, (rows, cols), vals)
    return out


def format_value(x):
    """Shortest round-trip decimal for floats (at most 17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_matrix_market(path, M, comment=""):
    """Write ``M``: sparse input as coordinate, dense input as array format."""
    path = os.fspath(path)
    is_sparse = sp.issparse(M)
    data = M if is_sparse else np.atleast_2d(np.asarray(M))
    cplx = np.iscomplexobj(data.data if is_sparse else data)
    fld = "complex" if cplx else "real"

    def fmt(v):
        if cplx:
            return f"{format_value(float(v.real))} {format_value(float(v.imag))}"
        return format_value(float(v))

    lines = []
    if is_sparse:
        C = sp.coo_array(data)
        C.sum_duplicates()
        order = np.lexsort((C.row, C.col))
        lines.append(f"%%MatrixMarket matrix coordinate {fld} general")
        lines.extend(f"% {c}" for c in comment.splitlines() if c)
        lines.append(f"{C.shape[0]} {C.shape[1]} {C.nnz}")
        lines.extend(f"{C.row[k] + 1} {C.col[k] + 1} {fmt(C.data[k])}" for k in order)
    else:
        lines.append(f"%%MatrixMarket matrix array {fld} general")
        lines.extend(f"% {c}" for c in comment.splitlines() if c)
        lines.append(f"{data.shape[0]} {data.shape[1]}")
        lines.extend(fmt(v) for v in data.ravel(order="F"))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SystemManifest:
    name: str
    paths: dict
    n: int
    n_in: int
    n_out: int
    kind: str = "unknown"
    s0: complex = None
    extra: dict = field(default_factory=dict)
    source: str = ""


_REQUIRED = ("E", "A", "B", "C", "n", "n_in", "n_out")


def load_manifest(path):
    """Parse a ``key = value`` manifest; referenced files must exist."""
    path = Path(os.fspath(path))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    items = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if key in items:
            raise ManifestError(f"{path}:{lineno}: duplicate key {key!r}")
        items[key] = value
    missing = [k for k in _REQUIRED if k not in items]
    if missing:
        raise ManifestError(f"{path}: missing keys {', '.join(missing)}")
    base = path.parent
    paths = {}
    for key in ("E", "A", "B", "C"):
        p = base / items.pop(key)
        if not p.is_file():
            raise ManifestError(f"{path}: file for {key} not found: {p}")
        paths[key] = p
    try:
        n, n_in, n_out = (int(items.pop(k)) for k in ("n", "n_in", "n_out"))
    except ValueError:
        raise ManifestError(f"{path}: n, n_in and n_out must be integers") from None
    s0 = items.pop("s0", None)
    if s0 is not None:
        try:
            s0 = complex(s0.replace(" ", ""))
        except ValueError:
            raise ManifestError(f"{path}: malformed s0 {s0!r}") from None
    kind = items.pop("kind", "unknown")
    name = items.pop("name", path.stem)
    return SystemManifest(name, paths, n, n_in, n_out, kind, s0, items, str(path))


def _check_dims(manifest, shapes):
    n, ni, no = manifest.n, manifest.n_in, manifest.n_out
    want = {"E": (n, n), "A": (n, n), "B": (n, ni), "C": (no, n)}
    for key, shape in shapes.items():
        if tuple(shape) != want[key]:
            raise ManifestError(
                f"{manifest.source or manifest.name}: {key} is {shape[0]}x{shape[1]}, "
                f"manifest declares {want[key][0]}x{want[key][1]}")


def load_system(manifest):
    """Load the matrices named by a manifest; dimension mismatches are fatal."""
    if not isinstance(manifest, SystemManifest):
        manifest = load_manifest(manifest)
    if manifest.kind == "reduced":
        mats = {k: load_dense_matrix_market(p) for k, p in manifest.paths.items()}
        _check_dims(manifest, {k: m.shape for k, m in mats.items()})
        return ReducedModel(mats["E"].real, mats["A"].real, mats["B"].real, mats["C"].real,
                            {"method": "loaded", "name": manifest.name})
    mats = {k: load_matrix_market(p) for k, p in manifest.paths.items()}
    _check_dims(manifest, {k: m.shape for k, m in mats.items()})
    kind = manifest.kind if manifest.kind in ("ode", "dae") else None
    return SparseSystem.from_matrices(mats["E"], mats["A"], mats["B"], mats["C"],
                                      kind=kind, name=manifest.name)


def write_manifest(path, name, files, n, n_in, n_out, kind="unknown", s0=None, **extra):
    path = Path(os.fspath(path))
    lines = [f"name = {name}"]
    lines += [f"{k} = {files[k]}" for k in ("E", "A", "B", "C")]
    lines += [f"n = {n}", f"n_in = {n_in}", f"n_out = {n_out}", f"kind = {kind}"]
    if s0 is not None:
        s0 = complex(s0)
        lines.append(f"s0 = {format_value(s0.real)}" if s0.imag == 0 else f"s0 = {s0}")
    for key, value in extra.items():
        if isinstance(value, (list, tuple)):
            value = " ".join(format_value(v) for v in value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_system(directory, sys, name=None, s0=None, **extra):
    """Write a SparseSystem or ReducedModel as four .mtx files plus a manifest."""
    directory = Path(os.fspath(directory))
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(sys, ReducedModel):
        name = name or "rom"
        mats = {"E": sys.Ebar, "A": sys.Abar, "B": sys.Bbar, "C": sys.Cbar}
        kind, n = "reduced", sys.r
    else:
        name = name or sys.name or "system"
        mats = {"E": sys.E, "A": sys.A, "B": sys.B, "C": sys.C}
        kind, n = sys.kind, sys.n
    files = {}
    for key, M in mats.items():
        files[key] = f"{name}_{key}.mtx"
        write_matrix_market(directory / files[key], M)
    manifest = directory / f"{name}.manifest"
    write_manifest(manifest, name, files, n, sys.n_in, sys.n_out, kind, s0, **extra)
    return manifest


@dataclass
class RunRecord:
    """What a CLI run did; ``results`` holds the numeric payload."""

    command: str
    parameters: dict
    timings: dict = field(default_factory=dict)
    node_counts: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    def write(self, path):
        Path(os.fspath(path)).write_text(self.to_json() + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def csv_body(columns, rows):
    """CSV text (column line + rows) with full-precision numbers."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path_or_file, columns, rows, version=""):
    """Write a CSV table preceded by one ``#`` provenance line.

    The provenance line carries the version and a timestamp; everything
    after it is deterministic for identical inputs.
    """
    stamp = datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    text = f"# stabmor {version} {stamp}\n" + csv_body(columns, rows)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        Path(os.fspath(path_or_file)).write_text(text, encoding="utf-8")
    return text
