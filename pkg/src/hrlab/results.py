"""Result envelopes, deterministic JSON/CSV emission and the on-disk cache."""
from __future__ import annotations

import csv
import fcntl
import hashlib
import io
import json
import logging
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA = 1
log = logging.getLogger("hrlab")


def _version() -> str:
    from . import __version__
    return __version__


# -- JSON with 17 significant digits ----------------------------------------------------
def _plain(obj):
    """Convert numpy scalars/arrays and tuples to plain JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _emit(obj, out: list, indent: int, level: int):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(k) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            out.append(("," if i else "") + pad)
            _emit(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _float(v: float) -> str:
    """17 significant digits; integral values keep a '.0' so they read back as floats."""
    s = format(v, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return "null"
        return _float(v)
    if isinstance(v, int):
        return str(v)
    return json.dumps(v, ensure_ascii=False)


def dumps(obj, indent: int = 1) -> str:
    """JSON text with every float written to 17 significant digits."""
    out: list[str] = []
    _emit(_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


# -- verdicts and envelopes ------------------------------------------------------------------
PASS, FAIL, REPORT = "PASS", "FAIL", "REPORT"


@dataclass
class Verdict:
    name: str
    status: str
    value: object = None
    tol: object = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"name": self.name, "status": self.status, "value": self.value, "tol": self.tol}
        if self.note:
            d["note"] = self.note
        return d


def check(name: str, passed: bool, value=None, tol=None, note: str = "") -> Verdict:
    return Verdict(name, PASS if passed else FAIL, value, tol, note)


@dataclass
class ResultEnvelope:
    command: str
    config_hash: str
    metric: str
    payload: dict
    verdicts: list = field(default_factory=list)
    wall_clock: float = 0.0
    version: str = field(default_factory=_version)

    @property
    def failed(self) -> bool:
        return any(v.status == FAIL for v in self.verdicts)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "command": self.command, "config_hash": self.config_hash,
                "version": self.version, "wall_clock": self.wall_clock, "metric": self.metric,
                "payload": self.payload, "verdicts": [v.to_dict() for v in self.verdicts]}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultEnvelope":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        vs = [Verdict(v["name"], v["status"], v.get("value"), v.get("tol"), v.get("note", ""))
              for v in d["verdicts"]]
        return cls(d["command"], d["config_hash"], d["metric"], d["payload"], vs, d["wall_clock"], d["version"])

    def payload_json(self) -> str:
        return dumps(self.payload)


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_float(v) if isinstance(v, float) else v for v in r])
    path.write_text(buf.getvalue())


# -- cache -----------------------------------------------------------------------------------
def cache_dir() -> Path:
    root = os.environ.get("HRLAB_CACHE_DIR")
    return Path(root) if root else Path.home() / ".cache" / "hrlab"


def cache_key(command: str, config_hash: str) -> str:
    return hashlib.sha256(f"{command}:{config_hash}:{_version()}".encode()).hexdigest()[:32]


@contextmanager
def _locked(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path.with_suffix(".lock"), "w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def cache_load(command: str, config_hash: str) -> ResultEnvelope | None:
    path = cache_dir() / f"{cache_key(command, config_hash)}.json"
    if not path.exists():
        return None
    with _locked(path):
        try:
            env = ResultEnvelope.from_dict(json.loads(path.read_text()))
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("corrupt cache entry %s (%s); recomputing", path.name, exc)
            return None
    if env.command != command or env.config_hash != config_hash:
        log.warning("cache entry %s does not match the request; recomputing", path.name)
        return None
    return env


def cache_store(env: ResultEnvelope) -> Path:
    path = cache_dir() / f"{cache_key(env.command, env.config_hash)}.json"
    with _locked(path):
        tmp = path.with_suffix(".tmp")
        tmp.write_text(dumps(env.to_dict()))
        tmp.replace(path)
    return path
