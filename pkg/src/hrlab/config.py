"""Experiment manifests: a small line-oriented ``[section]`` / ``key = value`` format.

Grammar (one construct per line)::

    line     := blank | comment | header | entry
    comment  := ('#' | ';') text
    header   := '[' name ']'
    entry    := name '=' value [comment]
    value    := scalar | '[' [scalar (',' scalar)*] ']'
    scalar   := int | float | 'true' | 'false' | 'none' | quoted | bare
    name     := [A-Za-z_][A-Za-z0-9_.-]*

Quoted strings use double quotes with backslash escapes; bare words run to
the end of the value.  Entries before the first header belong to section
``main``.  Duplicate sections or keys are errors.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
_INT = re.compile(r"[+-]?\d+")
_FLOAT = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?|[+-]?(inf|nan)")


class _Cursor:
    def __init__(self, text: str, line: int, col: int = 0):
        self.text, self.line, self.pos, self.base = text, line, col, col

    def error(self, msg: str):
        raise ConfigError(msg, self.line, self.pos + 1)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text) or self.text[self.pos] in "#;"


def _scalar(cur: _Cursor, in_list: bool):
    cur.skip()
    if cur.peek() == '"':
        out, cur.pos = [], cur.pos + 1
        while True:
            ch = cur.peek()
            if ch == "":
                cur.error("unterminated string")
            cur.pos += 1
            if ch == '"':
                return "".join(out)
            if ch == "\\":
                nxt = cur.peek()
                if nxt == "":
                    cur.error("dangling escape")
                out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
                cur.pos += 1
            else:
                out.append(ch)
    start = cur.pos
    stop = ",]#;" if in_list else "#;"
    while cur.pos < len(cur.text) and cur.text[cur.pos] not in stop:
        cur.pos += 1
    raw = cur.text[start:cur.pos].strip()
    if not raw:
        cur.pos = start
        cur.error("missing value")
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    if _INT.fullmatch(raw):
        return int(raw)
    if _FLOAT.fullmatch(low):
        return float(raw)
    if in_list and raw.startswith("["):
        cur.pos = start
        cur.error("nested lists are not supported")
    return raw


def _value(cur: _Cursor):
    cur.skip()
    if cur.peek() != "[":
        return _scalar(cur, False)
    cur.pos += 1
    items = []
    cur.skip()
    if cur.peek() == "]":
        cur.pos += 1
        return items
    while True:
        items.append(_scalar(cur, True))
        cur.skip()
        ch = cur.peek()
        if ch == ",":
            cur.pos += 1
            continue
        if ch == "]":
            cur.pos += 1
            return items
        cur.error("expected ',' or ']' in list")


def parse(text: str) -> dict[str, dict]:
    """Parse manifest text into ``{section: {key: value}}``."""
    out: dict[str, dict] = {}
    section = "main"
    for lineno, line in enumerate(text.splitlines(), start=1):
        cur = _Cursor(line, lineno)
        if cur.at_end():
            continue
        if cur.peek() == "[":
            cur.pos += 1
            cur.skip()
            m = _NAME.match(line, cur.pos)
            if not m:
                cur.error("expected section name")
            cur.pos = m.end()
            cur.skip()
            if cur.peek() != "]":
                cur.error("expected ']'")
            cur.pos += 1
            if not cur.at_end():
                cur.error("unexpected text after section header")
            section = m.group(0)
            if section in out:
                cur.pos = line.index(section)
                cur.error(f"duplicate section [{section}]")
            out[section] = {}
            continue
        m = _NAME.match(line, cur.pos)
        if not m:
            cur.error("expected key")
        key = m.group(0)
        cur.pos = m.end()
        cur.skip()
        if cur.peek() != "=":
            cur.error("expected '='")
        cur.pos += 1
        val = _value(cur)
        if not cur.at_end():
            cur.error("unexpected text after value")
        sec = out.setdefault(section, {})
        if key in sec:
            cur.pos = m.start()
            cur.error(f"duplicate key {key!r} in [{section}]")
        sec[key] = val
    return out


def _fmt_scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    s = str(v)
    if s == "" or s != s.strip() or any(c in s for c in ',[]#;"\\') or s.lower() in ("true", "false", "none") \
            or _FLOAT.fullmatch(s.lower()) or s.startswith("["):
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'
    return s


def serialize(data: dict[str, dict]) -> str:
    """Canonical text: sections and keys sorted."""
    lines = []
    for sec in sorted(data):
        if lines:
            lines.append("")
        lines.append(f"[{sec}]")
        for key in sorted(data[sec]):
            v = data[sec][key]
            if isinstance(v, (list, tuple)):
                body = "[" + ", ".join(_fmt_scalar(x) for x in v) + "]"
            else:
                body = _fmt_scalar(v)
            lines.append(f"{key} = {body}")
    return "\n".join(lines) + "\n"


def config_hash(data: dict[str, dict]) -> str:
    """SHA-256 of the canonical JSON form; independent of field order."""
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class ExperimentManifest:
    """Parsed manifest with typed access and defaults."""

    data: dict[str, dict]
    source: str | None = None
    _defaults: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "ExperimentManifest":
        return cls(parse(text), source)

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc.strerror}") from exc
        return cls.from_text(text, str(p))

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def serialize(self) -> str:
        return serialize(self.data)

    def section(self, name: str) -> dict:
        return dict(self.data.get(name, {}))

    def get(self, section: str, key: str, default=None, kind=None):
        v = self.data.get(section, {}).get(key, default)
        if kind is None or v is None:
            return v
        try:
            if kind is float and isinstance(v, bool):
                raise TypeError
            return [kind(x) for x in v] if isinstance(v, list) and kind is not list else kind(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key}: expected {kind.__name__}, got {v!r}") from exc

    @property
    def seed(self) -> int:
        return int(self.get("main", "seed", 0))

    def tolerance(self, name: str, default: float) -> float:
        return float(self.get("tolerances", name, default))
