"""Output manifest with per-file checksums."""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

MANIFEST = "manifest.json"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def versions() -> dict:
    import numba
    import numpy
    import scipy

    from tcclock import __version__

    return {"python": platform.python_version(), "numpy": numpy.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "tcclock": __version__}


def write_manifest(outdir, config: dict, wall_time: float, extra: dict | None = None) -> Path:
    """Checksum every file under ``outdir`` (except the manifest) and write the manifest."""
    outdir = Path(outdir)
    files = {}
    for p in sorted(outdir.rglob("*")):
        if p.is_file() and p.name != MANIFEST:
            files[p.relative_to(outdir).as_posix()] = sha256(p)
    doc = {"config": config, "versions": versions(), "wall_time_s": wall_time, "files": files}
    if extra:
        doc.update(extra)
    path = outdir / MANIFEST
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def verify_manifest(outdir) -> list[str]:
    """Problems found: missing, altered or unlisted files (empty list when intact)."""
    outdir = Path(outdir)
    doc = json.loads((outdir / MANIFEST).read_text(encoding="utf-8"))
    problems = []
    for name, digest in doc["files"].items():
        p = outdir / name
        if not p.is_file():
            problems.append(f"missing: {name}")
        elif sha256(p) != digest:
            problems.append(f"checksum mismatch: {name}")
    listed = set(doc["files"])
    for p in outdir.rglob("*"):
        rel = p.relative_to(outdir).as_posix()
        if p.is_file() and p.name != MANIFEST and rel not in listed:
            problems.append(f"unlisted: {rel}")
    return problems
