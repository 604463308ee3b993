"""Output helpers: deterministic CSV, provenance sidecars and run manifests."""

import csv
import hashlib
import json
import os
import platform
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "tammkit run manifest",
    "type": "object",
    "required": ["tool", "version", "command", "config", "inputs", "outputs", "status"],
    "properties": {
        "tool": {"const": "tammkit"},
        "version": {"type": "string"},
        "command": {"type": "array", "items": {"type": "string"}},
        "config": {"type": "object"},
        "inputs": {"type": "object", "additionalProperties": {"type": "string"}},
        "outputs": {"type": "object", "additionalProperties": {"type": "string"}},
        "status": {"type": "object", "required": ["exit_code"],
                   "properties": {"exit_code": {"type": "integer"},
                                  "error": {"type": ["string", "null"]}}},
        "python": {"type": "string"},
        "created": {"type": "string"},
    },
}


def fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, complex):
        return f"{v.real:.9g}{v.imag:+.9g}j"
    try:
        return f"{float(v):.9g}"
    except (TypeError, ValueError):
        return str(v)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class OutputSet:
    """Collects the files written by one run and their provenance."""

    def __init__(self, directory, provenance=None):
        self.directory = directory
        self.provenance = dict(provenance or {})
        self.files = {}
        os.makedirs(directory, exist_ok=True)

    def path(self, name):
        return os.path.join(self.directory, name)

    def _register(self, name, meta):
        p = self.path(name)
        self.files[name] = sha256(p)
        side = {"file": name, "tool": "tammkit", "version": __version__, **self.provenance, **(meta or {})}
        with open(p + ".meta.json", "w") as fh:
            json.dump(side, fh, indent=2, sort_keys=True, default=str)
        return p

    def csv(self, name, header, rows, meta=None):
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        return self._register(name, meta)

    def text(self, name, content, meta=None):
        with open(self.path(name), "w") as fh:
            fh.write(content)
        return self._register(name, meta)

    def json(self, name, doc, meta=None):
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        return self._register(name, meta)

    def adopt(self, name, meta=None):
        """Register a file some other writer has already produced."""
        return self._register(name, meta)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def write_manifest(directory, argv, config, inputs, outputs, exit_code, error=None, summary=None):
    doc = {
        "tool": "tammkit",
        "version": __version__,
        "command": list(argv),
        "config": config,
        "inputs": {p: sha256(p) for p in inputs if os.path.isfile(p)},
        "outputs": dict(sorted(outputs.items())),
        "status": {"exit_code": int(exit_code), "error": error},
        "python": f"{sys.version.split()[0]} ({platform.machine()})",
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if summary is not None:
        doc["summary"] = summary
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
    return doc


def validate_manifest(doc, schema=MANIFEST_SCHEMA):
    """Minimal structural check against :data:`MANIFEST_SCHEMA`; returns a list of problems."""
    problems = []
    for key in schema["required"]:
        if key not in doc:
            problems.append(f"missing {key}")
    props = schema["properties"]
    type_map = {"string": str, "object": dict, "array": list, "integer": int}
    for key, spec in props.items():
        if key not in doc:
            continue
        if "const" in spec and doc[key] != spec["const"]:
            problems.append(f"{key} must be {spec['const']!r}")
        t = spec.get("type")
        if isinstance(t, str) and not isinstance(doc[key], type_map[t]):
            problems.append(f"{key} must be of type {t}")
    status = doc.get("status", {})
    if isinstance(status, dict) and not isinstance(status.get("exit_code"), int):
        problems.append("status.exit_code must be an integer")
    return problems
