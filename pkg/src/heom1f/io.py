"""Deterministic CSV and manifest output.

Floats are written with ``repr`` (shortest round-trip form), rows end in
``\\n`` and the manifest carries no timestamps, so repeated runs with the
same configuration produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

from . import __version__


def _cell(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def write_result(result, out_dir, cfg=None, command="run", extra=None):
    """Write every table and text of a :class:`RunResult` plus ``manifest.json``.

    Returns the manifest as a dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name in sorted(result.tables):
        header, rows = result.tables[name]
        data = csv_text(header, rows).encode()
        (out / f"{name}.csv").write_bytes(data)
        files[f"{name}.csv"] = sha256_bytes(data)
    for name in sorted(result.texts):
        data = result.texts[name].encode()
        (out / f"{name}.txt").write_bytes(data)
        files[f"{name}.txt"] = sha256_bytes(data)
    manifest = {"package": "heom1f", "version": __version__, "command": command, "files": files}
    if cfg is not None:
        manifest["experiment"] = cfg.experiment
        manifest["config_sha256"] = cfg.digest()
        manifest["solver"] = cfg.solver
        manifest["advisories"] = list(cfg.advisories)
    meta = dict(result.meta)
    noise = meta.get("noise", {})
    cert = meta.get("certified_error", noise.get("certified_error") if isinstance(noise, dict) else None)
    manifest["certified_decomposition_error"] = cert
    manifest["meta"] = meta
    if extra:
        manifest.update(extra)
    text = json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n"
    (out / "manifest.json").write_text(text)
    return manifest
