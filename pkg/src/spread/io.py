"""JSON model files and CSV output.

A model file is a JSON object::

    {"kind": "topological" | "random",
     "types": [...], "explicit_types": [...],
     "m": 1, "patterns": [[label, [children...]], ...],          # topological
     "distribution": {type: [{"offspring": {type: n}, "prob": "p/q"}]},  # random
     "block_code": {"k": 0, "map": {"<canonical pattern or type>": explicit}},
     "mean_matrix": [["p/q", ...], ...],   # optional, random only, k = 0
     "start": "<hidden type>",             # optional
     "name": "...", "note": "..."}         # optional, informational

Unknown fields are rejected.  Rationals are strings, never floats.
"""
from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .branching import SpreadDistribution
from .errors import ModelFormatError, ModelValidationError
from .spectral import NonnegMatrix
from .topo import BlockCode, MSpreadModel, TypeSet
from .trees import from_nested, parse_pattern, serialize, to_nested

_COMMON = {"kind", "types", "explicit_types", "block_code", "start", "name", "note"}
_FIELDS = {
    "topological": _COMMON | {"m", "patterns"},
    "random": _COMMON | {"distribution", "mean_matrix"},
}
_REQUIRED = {
    "topological": {"kind", "types", "explicit_types", "block_code", "m", "patterns"},
    "random": {"kind", "types", "explicit_types", "block_code", "distribution"},
}


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model file: the hidden model, its block code and run hints."""

    kind: str
    types: tuple[str, ...]
    explicit: tuple[str, ...]
    code: BlockCode
    model: MSpreadModel | None = None
    dist: SpreadDistribution | None = None
    mean_matrix: NonnegMatrix | None = None
    start: str | None = None
    name: str | None = None
    note: str | None = None
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def default_start(self) -> str:
        if self.start is not None:
            return self.start
        if self.kind == "topological":
            return self.model.patterns[0].label
        return self.types[0]


def _rational(x, where: str) -> Fraction:
    if isinstance(x, bool) or isinstance(x, float):
        raise ModelFormatError(f"{where}: rationals must be integers or 'p/q' strings, got {x!r}")
    try:
        return Fraction(x)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ModelFormatError(f"{where}: cannot read rational {x!r}") from None


def _need(cond, msg):
    if not cond:
        raise ModelFormatError(msg)


def _str_list(obj, key) -> tuple[str, ...]:
    val = obj.get(key)
    _need(isinstance(val, list) and all(isinstance(s, str) for s in val), f"'{key}' must be a list of strings")
    return tuple(val)


def parse_model(obj) -> ModelSpec:
    """Build a ModelSpec from decoded JSON.

    Format problems raise ModelFormatError; semantic ones (bad
    probabilities, code images outside the explicit types) raise
    ModelValidationError.  Spread-model extension checks are left to
    :func:`spread.topo.validate`.
    """
    _need(isinstance(obj, dict), "model file must hold a JSON object")
    kind = obj.get("kind")
    _need(kind in _FIELDS, f"'kind' must be 'topological' or 'random', got {kind!r}")
    unknown = set(obj) - _FIELDS[kind]
    _need(not unknown, f"unknown fields for a {kind} model: {sorted(unknown)}")
    missing = _REQUIRED[kind] - set(obj)
    _need(not missing, f"missing fields: {sorted(missing)}")
    types = _str_list(obj, "types")
    explicit = _str_list(obj, "explicit_types")
    try:
        TypeSet(types)
        TypeSet(explicit, role="explicit")
    except ValueError as e:
        raise ModelValidationError(str(e)) from None

    bc = obj["block_code"]
    _need(isinstance(bc, dict) and set(bc) == {"k", "map"}, "'block_code' must have exactly 'k' and 'map'")
    k = bc["k"]
    _need(isinstance(k, int) and not isinstance(k, bool) and k >= 0, "'block_code.k' must be an integer >= 0")
    _need(isinstance(bc["map"], dict), "'block_code.map' must be an object")
    mapping = {}
    for key, a in bc["map"].items():
        _need(isinstance(a, str), f"code image for {key!r} must be a string")
        try:
            pat = parse_pattern(key)
        except ValueError as e:
            raise ModelFormatError(f"block_code key {key!r}: {e}") from None
        if pat in mapping:
            raise ModelValidationError(f"block_code lists {serialize(pat)} twice")
        mapping[pat] = a
    try:
        code = BlockCode(k, mapping, explicit)
    except ValueError as e:
        raise ModelValidationError(str(e)) from None

    start = obj.get("start")
    _need(start is None or start in types, f"'start' must be one of {list(types)}")
    common = dict(kind=kind, types=types, explicit=explicit, code=code, start=start,
                  name=obj.get("name"), note=obj.get("note"))

    if kind == "topological":
        m = obj["m"]
        _need(isinstance(m, int) and not isinstance(m, bool), "'m' must be an integer")
        _need(isinstance(obj["patterns"], list) and obj["patterns"], "'patterns' must be a nonempty list")
        try:
            pats = tuple(from_nested(p) for p in obj["patterns"])
        except ValueError as e:
            raise ModelFormatError(f"patterns: {e}") from None
        return ModelSpec(model=MSpreadModel(m, TypeSet(types), pats), **common)

    law_obj = obj["distribution"]
    _need(isinstance(law_obj, dict), "'distribution' must be an object keyed by type")
    law = {}
    for b, entries in law_obj.items():
        _need(isinstance(entries, list), f"distribution[{b!r}] must be a list")
        rows = []
        for i, e in enumerate(entries):
            where = f"distribution[{b!r}][{i}]"
            _need(isinstance(e, dict) and set(e) == {"offspring", "prob"},
                  f"{where} must have exactly 'offspring' and 'prob'")
            off = e["offspring"]
            _need(isinstance(off, dict), f"{where}.offspring must be an object")
            bad = set(off) - set(types)
            if bad:
                raise ModelValidationError(f"{where}: unknown offspring types {sorted(bad)}")
            for t, n in off.items():
                _need(isinstance(n, int) and not isinstance(n, bool) and n >= 0,
                      f"{where}.offspring[{t!r}] must be a nonnegative integer")
            rows.append((tuple(off.get(t, 0) for t in types), _rational(e["prob"], where)))
        law[b] = tuple(rows)
    dist = SpreadDistribution(types, law)
    mean = None
    if "mean_matrix" in obj:
        rows = obj["mean_matrix"]
        _need(isinstance(rows, list) and len(rows) == len(types)
              and all(isinstance(r, list) and len(r) == len(types) for r in rows),
              f"'mean_matrix' must be {len(types)}x{len(types)}")
        _need(k == 0, "'mean_matrix' is only meaningful with a 0-block code")
        mean = NonnegMatrix(types, tuple(tuple(_rational(x, "mean_matrix") for x in r) for r in rows))
    return ModelSpec(dist=dist, mean_matrix=mean, **common)


def loads_model(text: str) -> ModelSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"malformed JSON: {e.msg} (line {e.lineno}, column {e.colno})",
                               line=e.lineno, column=e.colno) from None
    return parse_model(obj)


def load_model(path) -> ModelSpec:
    return loads_model(Path(path).read_text())


def _frac_str(x) -> str:
    return str(Fraction(x))


def dump_model(spec: ModelSpec) -> dict:
    """Canonical JSON object: sorted child order, reduced rationals."""
    out = {"kind": spec.kind}
    if spec.name is not None:
        out["name"] = spec.name
    if spec.note is not None:
        out["note"] = spec.note
    out["types"] = list(spec.types)
    out["explicit_types"] = list(spec.explicit)
    if spec.kind == "topological":
        out["m"] = spec.model.m
        out["patterns"] = [to_nested(p) for p in spec.model.patterns]
    else:
        out["distribution"] = {
            b: [{"offspring": {t: n for t, n in zip(spec.types, v) if n}, "prob": _frac_str(p)}
                for v, p in spec.dist.law[b]]
            for b in spec.types
        }
        if spec.mean_matrix is not None:
            out["mean_matrix"] = [[_frac_str(x) for x in r] for r in spec.mean_matrix.entries]
    key = (lambda p: p.label) if spec.code.k == 0 else serialize
    out["block_code"] = {"k": spec.code.k, "map": {key(p): a for p, a in spec.code.mapping.items()}}
    if spec.start is not None:
        out["start"] = spec.start
    return out


def dumps_model(spec: ModelSpec) -> str:
    return json.dumps(dump_model(spec), indent=2, ensure_ascii=False) + "\n"


# --- CSV -----------------------------------------------------------------------


def fmt(x) -> str:
    """12 significant digits; empty for undefined values."""
    x = float(x)
    if np.isnan(x):
        return ""
    return f"{x:.12g}"


def csv_text(header: Sequence[str], rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else (str(c) if isinstance(c, (int, np.integer)) else fmt(c)) for c in r])
    return buf.getvalue()


def read_csv(path_or_text) -> tuple[list[str], list[list[str]]]:
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    rows = list(csv.reader(_io.StringIO(text)))
    return rows[0], rows[1:]
