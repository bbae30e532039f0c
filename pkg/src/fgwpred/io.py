"""On-disk datasets, candidate sets and key=value configs.

A dataset directory holds one ``.fgwg`` document per graph and a
tab-separated ``manifest.tsv``::

    input<TAB>graph_path
    2.5<TAB>graphs/000000.fgwg

``input`` is a whitespace-separated vector (full ``repr`` precision) and
``graph_path`` is relative to the manifest.  Candidate sets live in
``candidates.tsv`` with columns ``input_id`` (row index in the manifest)
and ``graph_path``.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .graph import GRAPH_SUFFIX, read_graph, write_graph

MANIFEST = "manifest.tsv"
CANDIDATES = "candidates.tsv"


def format_vector(x) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(x))


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split()])
    except ValueError as exc:
        raise ParseError(f"bad input vector {text!r}") from exc


def write_dataset(out_dir, X, graphs, candidates=None) -> Path:
    """Write graphs, the manifest, and optionally per-input candidate lists."""
    out = Path(out_dir)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    with open(out / MANIFEST, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["input", "graph_path"])
        for i, (x, g) in enumerate(zip(X, graphs)):
            rel = f"graphs/{i:06d}{GRAPH_SUFFIX}"
            write_graph(out / rel, g)
            w.writerow([format_vector(x), rel])
    if candidates is not None:
        (out / "candidates").mkdir(exist_ok=True)
        with open(out / CANDIDATES, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["input_id", "graph_path"])
            for i, cands in enumerate(candidates):
                for c, g in enumerate(cands):
                    rel = f"candidates/{i:06d}_{c:03d}{GRAPH_SUFFIX}"
                    write_graph(out / rel, g)
                    w.writerow([i, rel])
    return out / MANIFEST


def _rows(path: Path, header: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows or rows[0] != header:
        raise ParseError(f"{path}: expected header {header}")
    return rows[1:]


def read_dataset(path) -> tuple[np.ndarray, list, list | None]:
    """Load ``(X, graphs, candidates)`` from a dataset directory or manifest path."""
    path = Path(path)
    manifest = path / MANIFEST if path.is_dir() else path
    root = manifest.parent
    rows = _rows(manifest, ["input", "graph_path"])
    X = np.array([parse_vector(r[0]) for r in rows]) if rows else np.empty((0, 1))
    graphs = [read_graph(root / r[1]) for r in rows]
    candidates = None
    if (root / CANDIDATES).exists():
        candidates = [[] for _ in rows]
        for input_id, rel in _rows(root / CANDIDATES, ["input_id", "graph_path"]):
            candidates[int(input_id)].append(read_graph(root / rel))
    return X, graphs, candidates


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_csv(path, header: list[str], rows, cfg_hash: str) -> None:
    """CSV with a ``# config_hash=...`` line followed by the header row."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
