"""Loading, validation, and report serialization for embedding data.

Embedding matrices travel in a fixed binary interchange format (magic
``EMB1``, little-endian u32 header ``n, d``, then ``n*d`` little-endian
float32 values, row-major) or as headerless CSV. Internal computation is
always float64.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

import numpy as np

MAGIC = b"EMB1"
HEADER_SIZE = len(MAGIC) + 8  # magic + u32 n + u32 d


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingMatrix:
    """One modality's encoder outputs, one row per dataset sample.

    Row order is the ground-truth correspondence: row i of every modality
    describes the same underlying sample.
    """

    data: np.ndarray
    modality_tag: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {data.shape}")
        n, d = data.shape
        if n < 2 or d < 1:
            raise ValueError(f"embedding matrix needs n >= 2 points and d >= 1 dims, got {n}x{d}")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            r, c = bad[0]
            raise ValueError(f"non-finite entry at row {r}, column {c} of embedding matrix")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def n_points(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AnchorSet:
    """Supervision pairs (source_index, target_index) with known correspondence."""

    pairs: np.ndarray  # |S| x 2 int array
    seed: int | None = None

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] == 0:
            raise ValueError(f"anchor pairs must be a non-empty |S|x2 array, got shape {pairs.shape}")
        for side, name in ((pairs[:, 0], "source"), (pairs[:, 1], "target")):
            uniq, counts = np.unique(side, return_counts=True)
            if np.any(counts > 1):
                raise ValueError(f"duplicate {name} index {uniq[counts > 1][0]} in anchor set")
        pairs = np.ascontiguousarray(pairs)
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    @property
    def budget(self) -> int:
        return self.pairs.shape[0]

    @property
    def source(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def target(self) -> np.ndarray:
        return self.pairs[:, 1]

    def validate_range(self, n_points: int) -> "AnchorSet":
        if self.pairs.min() < 0 or self.pairs.max() >= n_points:
            bad = self.pairs[(self.pairs < 0).any(1) | (self.pairs >= n_points).any(1)][0]
            raise ValueError(f"anchor pair {tuple(bad)} out of range for n_points={n_points}")
        return self


@dataclass(frozen=True)
class PipelineConfig:
    """Hyperparameters for the full spectral alignment pipeline."""

    knn_k: int = 15
    spectral_dim: int = 50
    zoomout_start: int = 50
    zoomout_max: int = 100
    zoomout_steps: int = 5
    lambda_comm: float = 0.1
    lambda_tik: float = 0.001
    probe_smoothing: float = 0.1
    hks_num_scales: int = 100
    recall_cutoffs: tuple[int, ...] = (1, 5, 10)
    seed: int = 0

    def __post_init__(self):
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.spectral_dim < 1:
            raise ValueError("spectral_dim must be >= 1")
        if not (0 < self.zoomout_start <= self.zoomout_max):
            raise ValueError("need 0 < zoomout_start <= zoomout_max")
        if self.zoomout_steps < 1:
            raise ValueError("zoomout_steps must be >= 1")
        if self.lambda_comm < 0 or self.lambda_tik < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.probe_smoothing < 0:
            raise ValueError("probe_smoothing must be nonnegative")
        if self.hks_num_scales < 2:
            raise ValueError("hks_num_scales must be >= 2")
        if any(k < 1 for k in self.recall_cutoffs):
            raise ValueError("recall cutoffs must be >= 1")
        object.__setattr__(self, "recall_cutoffs", tuple(int(k) for k in self.recall_cutoffs))

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


# ---------------------------------------------------------------------------
# embedding I/O


def write_matrix(a: np.ndarray, path: str | Path) -> None:
    """Write a raw 2-D array in the binary interchange format (float32 payload)."""
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"can only serialize 2-D matrices, got shape {a.shape}")
    n, d = a.shape
    payload = np.ascontiguousarray(a, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(payload.tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    """Load a raw 2-D array from the binary interchange format (as float64)."""
    raw = Path(path).read_bytes()
    if len(raw) == 0:
        raise ValueError(f"{path}: empty file")
    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise ValueError(f"{path}: missing {MAGIC!r} header")
    n, d = struct.unpack("<II", raw[4:12])
    expected = HEADER_SIZE + 4 * n * d
    if len(raw) != expected:
        raise ValueError(
            f"{path}: payload length mismatch, header declares {n}x{d} "
            f"({expected} bytes) but file has {len(raw)} bytes"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE)
    return values.astype(np.float64).reshape(n, d)


def _load_csv_matrix(path: str | Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} values, found {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed value ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: empty file")
    return np.asarray(rows, dtype=np.float64)


def load_embeddings(path: str | Path, format: str = "binary", modality_tag: str = "") -> EmbeddingMatrix:
    """Load and validate one modality's embedding matrix.

    Args:
        path: input file.
        format: "binary" (EMB1 interchange) or "csv" (headerless, comma-separated).
        modality_tag: free-form label attached to the result.
    """
    if format == "binary":
        data = load_matrix(path)
    elif format == "csv":
        data = _load_csv_matrix(path)
    else:
        raise ValueError(f"unknown embedding format {format!r} (expected 'binary' or 'csv')")
    try:
        return EmbeddingMatrix(data, modality_tag=modality_tag or Path(path).stem)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_embeddings(emb: EmbeddingMatrix, path: str | Path) -> None:
    write_matrix(emb.data, path)


# ---------------------------------------------------------------------------
# anchors


def sample_anchors(n_points: int, budget: int, seed: int) -> AnchorSet:
    """Sample ``budget`` distinct indices uniformly; pairs are (i, i) by row order."""
    if budget > n_points:
        raise ValueError(f"anchor budget {budget} exceeds n_points {n_points}")
    if budget < 1:
        raise ValueError("anchor budget must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n_points, size=budget, replace=False)
    return AnchorSet(np.stack([idx, idx], axis=1), seed=seed)


def load_anchor_set(path: str | Path, n_points: int) -> AnchorSet:
    """Load "src,dst" integer pairs, one per line, validating against ``n_points``."""
    pairs: list[tuple[int, int]] = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src,dst', got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer index in {line!r}") from None
    if not pairs:
        raise ValueError(f"{path}: empty anchor file")
    try:
        return AnchorSet(np.asarray(pairs, dtype=np.int64)).validate_range(n_points)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# reports


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def atomic_write_json(doc: dict[str, Any], path: str | Path) -> None:
    """Write JSON via a temp file + rename so failures leave no partial report.

    Floats go through Python's shortest round-trip repr, which is lossless
    for float64 and therefore reload-exact.
    """
    path = Path(path)
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
            fh.write("\n")
        os.replace(tmp, path)
    except OSError:
        if tmp.exists():
            tmp.unlink()
        raise


def write_report(report: Any, path: str | Path, config: PipelineConfig | None = None) -> None:
    """Serialize a diagnostics report or recall table(s) as a JSON document.

    The document has a "config" echo plus a "diagnostics" and/or "recall"
    object depending on the report type.
    """
    doc: dict[str, Any] = {"config": config.to_dict() if config is not None else None}
    payload = report_payload(report)
    doc.update(payload)
    atomic_write_json(doc, path)


def report_payload(report: Any) -> dict[str, Any]:
    # DiagnosticsReport and RecallTable both expose to_dict(); lists of
    # recall tables are folded into one per-protocol, per-direction object.
    from .diagnostics import DiagnosticsReport
    from .retrieval import RecallTable, recall_tables_to_dict

    if isinstance(report, DiagnosticsReport):
        return {"diagnostics": report.to_dict()}
    if isinstance(report, RecallTable):
        return {"recall": recall_tables_to_dict([report])}
    if isinstance(report, Iterable) and all(isinstance(t, RecallTable) for t in report):
        return {"recall": recall_tables_to_dict(list(report))}
    raise TypeError(f"cannot serialize report of type {type(report).__name__}")


def load_report(path: str | Path) -> dict[str, Any]:
    with open(path, "r") as fh:
        return json.load(fh)
