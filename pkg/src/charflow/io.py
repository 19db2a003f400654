"""JSON persistence for orbit databases, dossiers and verdict reports.

Every file carries ``"schema": "v1"`` and the hash of the surface config it
was produced from.  Writes go to a temporary file in the target directory and
are renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .errors import ConfigError, StaleDatabaseError
from .identities import OrbitDossier

SCHEMA = "v1"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_json(path: str | os.PathLike, obj) -> str:
    """Atomically write ``obj`` as JSON; returns the sha256 of the bytes written."""
    path = Path(path)
    text = dumps(obj)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(text.encode()).hexdigest()


def read_json(path: str | os.PathLike):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def file_hash(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _expect(doc, kind: str, path) -> dict:
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA or doc.get("kind") != kind:
        raise ConfigError(f"{path}: not a {SCHEMA} {kind} file")
    return doc


def check_hash(doc: dict, expected: str, path) -> None:
    if doc.get("surface_hash") != expected:
        raise StaleDatabaseError(
            f"{path}: surface hash {str(doc.get('surface_hash'))[:12]} does not match config {expected[:12]}")


def database_doc(surface_hash: str, records: list[dict], coverage: dict, families: list[dict]) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "orbit-database",
        "surface_hash": surface_hash,
        "survey": {**coverage, "families": families},
        "orbits": [{**r, "surface_hash": surface_hash} for r in records],
    }


def load_database(path, surface_hash: str) -> dict:
    doc = _expect(read_json(path), "orbit-database", path)
    check_hash(doc, surface_hash, path)
    for rec in doc["orbits"]:
        if rec.get("surface_hash") != surface_hash:
            raise StaleDatabaseError(f"{path}: orbit {rec.get('prime_id')} belongs to another surface")
    return doc


def dossier_doc(surface_hash: str, database_hash: str, dossiers: list[OrbitDossier],
                survey: dict | None, m_max: int) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "dossiers",
        "surface_hash": surface_hash,
        "database_hash": database_hash,
        "m_max": m_max,
        "survey": survey,
        "dossiers": [d.to_dict() for d in dossiers],
    }


def load_dossiers(path, surface_hash: str | None = None) -> tuple[dict, list[OrbitDossier]]:
    doc = _expect(read_json(path), "dossiers", path)
    if surface_hash is not None:
        check_hash(doc, surface_hash, path)
    return doc, [OrbitDossier.from_dict(d) for d in doc["dossiers"]]
