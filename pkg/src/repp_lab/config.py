"""Run configuration: flat INI-style blocks with line-numbered errors.

Grammar::

    file    := (comment | blank | header | entry)*
    header  := "[" name "]"
    entry   := key "=" value            # '#' starts a comment
    cell    := "cell" "=" a "," b ["|" band+]
    band    := "(" lo "," hi "]"

Blocks: ``[system]``, ``[observable]``, ``[run]``, ``[law]``, ``[output]``
and any number of ``[family NAME]`` blocks holding ``cell`` entries. Keys
other than ``cell`` may appear once per block.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .empirical import Cell, RectangleFamily, band
from .errors import ConfigError, ReppError
from .limits import LimitLaw, Window
from .observables import ObservableSpec
from .systems import SystemSpec, parse_scalar

_HEADER = re.compile(r"^\[\s*([A-Za-z_][\w-]*)(?:\s+([\w.-]+))?\s*\]$")
_BAND = re.compile(r"\(\s*([^,()\]]+?)\s*,\s*([^,()\]]+?)\s*\]")
BLOCKS = ("system", "observable", "run", "law", "output", "family")
RUN_KEYS = ("n", "M", "seed", "horizon", "tau_max", "lookahead", "records", "radius", "mode", "suite")


@dataclass
class Block:
    name: str
    label: str | None
    line: int
    entries: list = field(default_factory=list)  # (key, value, line)

    def mapping(self):
        out, lines = {}, {}
        for k, v, ln in self.entries:
            if k == "cell":
                continue
            if k in out:
                raise ConfigError(f"duplicate key {k!r} in [{self.name}]", ln)
            out[k] = v
            lines[k] = ln
        return out, lines


def parse_blocks(text: str) -> list:
    blocks = []
    cur = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            name, label = m.group(1), m.group(2)
            if name not in BLOCKS:
                raise ConfigError(f"unknown block [{name}]", i)
            if name == "family" and not label:
                raise ConfigError("family blocks need a name: [family NAME]", i)
            if name != "family" and any(b.name == name for b in blocks):
                raise ConfigError(f"block [{name}] appears twice", i)
            cur = Block(name, label, i)
            blocks.append(cur)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", i)
        if cur is None:
            raise ConfigError("entry before any [block] header", i)
        k, v = line.split("=", 1)
        cur.entries.append((k.strip(), v.strip(), i))
    return blocks


def parse_int(text: str) -> int:
    t = text.replace("_", "").strip()
    m = re.fullmatch(r"(\d+)\s*\^\s*(\d+)", t)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    m = re.fullmatch(r"(\d+)[eE](\d+)", t)
    if m:
        return int(m.group(1)) * 10 ** int(m.group(2))
    return int(t)


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_cell(text: str) -> Cell:
    times, _, marks = text.partition("|")
    parts = [p.strip() for p in times.split(",")]
    if len(parts) != 2:
        raise ValueError("cell needs 'a, b' before the optional '|' mark bands")
    a, b = (float(parse_scalar(p)) for p in parts)
    marks = marks.strip()
    if not marks:
        return Cell(a, b)
    pairs = [(float(parse_scalar(lo)), float(parse_scalar(hi))) for lo, hi in _BAND.findall(marks)]
    if not pairs or _BAND.sub("", marks).strip():
        raise ValueError(f"bad mark bands {marks!r}; write (lo, hi] ...")
    return Cell(a, b, band(*pairs))


@dataclass
class RunConfig:
    system: SystemSpec | None = None
    observable: ObservableSpec | None = None
    n_ladder: tuple = (10**4,)
    M: int = 10
    seed: int | None = None
    horizon: float = 1.0
    tau_max: float = 10.0
    lookahead: int = 8
    records: bool = False
    radius: float = 3.0
    mode: str = "explore"
    suite: str | None = None
    families: dict = field(default_factory=dict)
    law: LimitLaw | None = None
    out: str | None = None
    text: str = ""

    @property
    def n(self) -> int:
        return self.n_ladder[-1]

    @property
    def window(self) -> Window:
        return Window(self.horizon, self.tau_max, self.radius)

    def config_hash(self) -> str:
        canon = "\n".join(ln.split("#", 1)[0].strip() for ln in self.text.splitlines())
        canon = "\n".join(ln for ln in canon.splitlines() if ln)
        return hashlib.sha256(canon.encode()).hexdigest()

    def require_seed(self):
        if self.seed is None:
            raise ConfigError("a seed is required (set [run] seed or pass --seed); wall-clock seeding is disabled")


def load_config(text: str) -> RunConfig:
    cfg = RunConfig(text=text)
    for blk in parse_blocks(text):
        kv, lines = blk.mapping()
        try:
            if blk.name == "system":
                cfg.system = SystemSpec.from_mapping(kv)
            elif blk.name == "observable":
                cfg.observable = ObservableSpec.from_mapping(kv)
            elif blk.name == "run":
                _load_run(cfg, kv, lines)
            elif blk.name == "law":
                if "spec" not in kv:
                    raise ConfigError("[law] needs spec = VARIANT:key=value,...", blk.line)
                cfg.law = LimitLaw.parse(kv["spec"])
            elif blk.name == "output":
                cfg.out = kv.get("dir")
            elif blk.name == "family":
                cells = []
                for k, v, ln in blk.entries:
                    if k != "cell":
                        raise ConfigError(f"family blocks hold only 'cell' entries, got {k!r}", ln)
                    try:
                        cells.append(parse_cell(v))
                    except (ValueError, ReppError) as exc:
                        raise ConfigError(str(exc), ln) from None
                if not cells:
                    raise ConfigError(f"family {blk.label!r} has no cells", blk.line)
                try:
                    cfg.families[blk.label] = RectangleFamily(tuple(cells))
                except ReppError as exc:
                    raise ConfigError(str(exc), blk.entries[0][2]) from None
        except ConfigError:
            raise
        except (ValueError, ReppError) as exc:
            raise ConfigError(f"[{blk.name}] {exc}", _blame(exc, lines, blk.line)) from None
    return cfg


def _blame(exc, lines, default):
    msg = str(exc)
    for k, ln in lines.items():
        if repr(k) in msg or f"{k} " in msg or msg.startswith(k):
            return ln
    return default


def _load_run(cfg, kv, lines):
    for k in kv:
        if k not in RUN_KEYS:
            raise ConfigError(f"unknown [run] key {k!r}", lines[k])

    def conv(key, fn):
        try:
            return fn(kv[key])
        except (ValueError, ReppError) as exc:
            raise ConfigError(f"{key}: {exc}", lines[key]) from None

    if "n" in kv:
        cfg.n_ladder = tuple(conv("n", lambda v: [parse_int(x) for x in v.split(",")]))
    if "M" in kv:
        cfg.M = conv("M", parse_int)
    if "seed" in kv:
        cfg.seed = conv("seed", parse_int)
        if not 0 <= cfg.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", lines["seed"])
    for key, fn in (("horizon", float), ("tau_max", float), ("radius", float)):
        if key in kv:
            setattr(cfg, key, conv(key, fn))
    if "lookahead" in kv:
        cfg.lookahead = conv("lookahead", parse_int)
    if "records" in kv:
        cfg.records = conv("records", parse_bool)
    if "mode" in kv:
        if kv["mode"] not in ("explore", "acceptance"):
            raise ConfigError("mode must be 'explore' or 'acceptance'", lines["mode"])
        cfg.mode = kv["mode"]
    if "suite" in kv:
        cfg.suite = kv["suite"]
    if any(n < 1 for n in cfg.n_ladder) or cfg.M < 1:
        raise ConfigError("n and M must be positive", lines.get("n", lines.get("M")))
