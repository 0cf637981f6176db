"""Deterministic (topological) spread models and their projections.

An m-spread model is a finite set of m-patterns such that every level-1
node of every pattern has exactly one pattern in the model extending its
(m-1)-subpattern.  Expanding a pattern therefore yields a unique infinite
labeled tree; a k-block code relabels each node by the k-pattern rooted
there.  Spread rates come from reducing the pair (model, code) to a
1-spread model with a 0-block code and taking its Perron left vector.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    CoverageError,
    ModelValidationError,
    ResourceLimitError,
)
from .spectral import NonnegMatrix, PerronPair, perron
from .trees import (
    LevelWindow,
    Pattern,
    WindowSequence,
    count_by_label,
    leaf,
    serialize,
    subpattern_at,
    symbol_name,
    truncate,
)

DEFAULT_NODE_CAP = 5_000_000


@dataclass(frozen=True)
class TypeSet:
    symbols: tuple[str, ...]
    role: str = "hidden"

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("type set must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"duplicate symbols in type set {self.symbols}")

    def __iter__(self):
        return iter(self.symbols)

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, s):
        return s in self.symbols

    def index(self, s) -> int:
        return self.symbols.index(s)


@dataclass(frozen=True)
class BlockCode:
    """Map from k-patterns (bare types when k = 0) to explicit symbols."""

    k: int
    mapping: Mapping[Pattern, str]
    explicit: tuple[str, ...]

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("block depth must be >= 0")
        bad = [p for p in self.mapping if p.depth > self.k]
        if bad:
            raise ValueError(f"code keys deeper than k={self.k}: {[serialize(p) for p in bad]}")
        stray = set(self.mapping.values()) - set(self.explicit)
        if stray:
            raise ValueError(f"code images {sorted(stray)} not in explicit types {self.explicit}")

    @classmethod
    def from_types(cls, mapping: Mapping[str, str], explicit: Sequence[str] | None = None) -> "BlockCode":
        explicit = tuple(explicit) if explicit is not None else tuple(dict.fromkeys(mapping.values()))
        return cls(0, {leaf(b): a for b, a in mapping.items()}, explicit)

    @classmethod
    def from_patterns(cls, k: int, mapping: Mapping[Pattern, str], explicit: Sequence[str] | None = None) -> "BlockCode":
        explicit = tuple(explicit) if explicit is not None else tuple(dict.fromkeys(mapping.values()))
        return cls(k, dict(mapping), explicit)

    def __call__(self, pat: Pattern | str) -> str:
        if isinstance(pat, str):
            pat = leaf(pat)
        try:
            return self.mapping[pat]
        except KeyError:
            raise CoverageError(f"block code undefined on {serialize(pat)}", key=pat) from None

    def preimage(self, a: str) -> list[Pattern]:
        return [p for p, x in self.mapping.items() if x == a]


@dataclass(frozen=True)
class Violation:
    kind: str  # depth | unknown-type | missing-extension | ambiguous-extension | ambiguous-root
    pattern: int | None
    node: tuple | None
    detail: str

    def __str__(self):
        where = "" if self.pattern is None else f"pattern {self.pattern}"
        if self.node is not None:
            where += f" node {self.node}"
        return f"{self.kind}: {where}: {self.detail}".replace(":  :", ":")


@dataclass(frozen=True)
class MSpreadModel:
    m: int
    types: TypeSet
    patterns: tuple[Pattern, ...]

    @classmethod
    def build(cls, patterns: Sequence[Pattern], m: int | None = None, types: Sequence[str] | None = None) -> "MSpreadModel":
        patterns = tuple(patterns)
        if m is None:
            m = max(p.depth for p in patterns)
        if types is None:
            seen = {}
            for p in patterns:
                for lvl in p.level_counts():
                    for t in sorted(lvl):
                        seen.setdefault(t, None)
            types = sorted(seen)
        return cls(int(m), TypeSet(tuple(types)), patterns)

    @property
    def d(self) -> int:
        return max(p.arity for p in self.patterns)

    def root_restriction(self, i: int) -> Pattern:
        return truncate(self.patterns[i], self.m - 1)

    def pattern_index(self, start) -> int:
        """Resolve a start spec: pattern index, Pattern, or a hidden type with a unique pattern."""
        if isinstance(start, (int, np.integer)) and not isinstance(start, bool):
            if not 0 <= start < len(self.patterns):
                raise IndexError(f"no pattern {start}")
            return int(start)
        if isinstance(start, Pattern):
            for i, p in enumerate(self.patterns):
                if p == start:
                    return i
            raise KeyError(f"pattern {serialize(start)} not in model")
        hits = [i for i, p in enumerate(self.patterns) if p.label == start]
        if not hits:
            raise KeyError(f"no pattern rooted at {start!r}")
        if len(hits) > 1:
            raise KeyError(f"{len(hits)} patterns rooted at {start!r}; pass a pattern or index")
        return hits[0]


def _violations(model: MSpreadModel) -> tuple[list[Violation], list[list[int]] | None]:
    out: list[Violation] = []
    m = model.m
    if m < 1:
        return [Violation("depth", None, None, f"m must be >= 1, got {m}")], None
    for i, p in enumerate(model.patterns):
        if p.depth != m:
            out.append(Violation("depth", i, None, f"depth {p.depth} != m = {m}"))
        for lvl in p.level_counts():
            for t in lvl:
                if t not in model.types:
                    out.append(Violation("unknown-type", i, None, f"type {t!r} not in {model.types.symbols}"))
    roots: dict[Pattern, list[int]] = {}
    for i in range(len(model.patterns)):
        roots.setdefault(model.root_restriction(i), []).append(i)
    for r, idx in roots.items():
        if len(idx) > 1:
            out.append(Violation("ambiguous-root", idx[1], None,
                                 f"patterns {idx} share root {symbol_name(r)}"))
    succ: list[list[int]] = []
    for i, p in enumerate(model.patterns):
        row = []
        for j, child in enumerate(p.children):
            want = truncate(child, m - 1)
            hits = roots.get(want, [])
            if not hits:
                out.append(Violation("missing-extension", i, (j,),
                                     f"no pattern extends {symbol_name(want)}"))
            elif len(hits) > 1:
                out.append(Violation("ambiguous-extension", i, (j,),
                                     f"{len(hits)} patterns extend {symbol_name(want)}"))
            else:
                row.append(hits[0])
        succ.append(row)
    return out, (None if out else succ)


def validate(model: MSpreadModel) -> list[Violation]:
    """Empty list iff the model is a valid m-spread model."""
    return _violations(model)[0]


def successors(model: MSpreadModel) -> list[list[int]]:
    """For each pattern, the model patterns rooted at its level-1 nodes (canonical order)."""
    violations, succ = _violations(model)
    if violations:
        raise ModelValidationError(
            "invalid spread model: " + "; ".join(map(str, violations)), violations)
    return succ


def xi_matrix(model: MSpreadModel) -> NonnegMatrix:
    """Entry (b, c) counts the c-children in the pattern rooted at b (m = 1)."""
    if model.m != 1:
        raise ValueError("xi_matrix needs a 1-spread model; reduce with induce() first")
    successors(model)
    by_root = {p.label: p for p in model.patterns}
    labels = [t for t in model.types if t in by_root]
    rows = []
    for b in labels:
        counts = Counter(c.label for c in by_root[b].children)
        rows.append([counts.get(c, 0) for c in labels])
    return NonnegMatrix.from_rows(labels, rows)


def _state_matrix(succ: list[list[int]]) -> np.ndarray:
    n = len(succ)
    S = np.zeros((n, n), dtype=object)
    S[:, :] = 0
    for i, row in enumerate(succ):
        for j in row:
            S[i, j] += 1
    return S


def expansion_size(model: MSpreadModel, start, n: int) -> int:
    """Number of nodes of the depth-n expansion, computed without building it."""
    succ = successors(model)
    i = model.pattern_index(start)
    S = _state_matrix(succ)
    v = np.zeros(len(succ), dtype=object)
    v[:] = 0
    v[i] = 1
    total = 1
    for _ in range(n):
        v = v @ S
        total += int(v.sum())
    return total


def _node_cap(cap: int | None) -> int:
    import os

    if cap is not None:
        return int(cap)
    env = os.environ.get("SPREAD_NODE_CAP")
    return int(env) if env else DEFAULT_NODE_CAP


def expand(model: MSpreadModel, start, n: int, node_cap: int | None = None) -> Pattern:
    """The depth-n pattern generated from ``start`` (type, index or pattern).

    Identical subtrees are shared, so memory grows with ``n * len(model)``
    rather than with the node count; the cap still applies to the logical
    node count.
    """
    if n < 0:
        raise ValueError("depth must be >= 0")
    succ = successors(model)
    i = model.pattern_index(start)
    cap = _node_cap(node_cap)
    size = expansion_size(model, i, n)
    if size > cap:
        raise ResourceLimitError(f"expansion to depth {n} has {size} nodes, over the cap of {cap}",
                                 cap=cap, reached=size)
    memo: dict[tuple[int, int], Pattern] = {}

    def grow(j: int, depth: int) -> Pattern:
        key = (j, depth)
        hit = memo.get(key)
        if hit is None:
            label = model.patterns[j].label
            kids = [grow(s, depth - 1) for s in succ[j]] if depth > 0 else []
            hit = memo[key] = Pattern(label, kids)
        return hit

    return grow(i, n)


def project(pat: Pattern, code: BlockCode) -> Pattern:
    """Relabel every node whose depth-k subtree is complete by the code of that subtree."""
    k = code.k
    if pat.depth < k:
        raise ValueError(f"pattern depth {pat.depth} < block depth {k}")
    memo: dict[tuple[int, int], Pattern] = {}
    trunc_memo: dict = {}

    def relabel(node: Pattern, remaining: int) -> Pattern:
        key = (id(node), remaining)
        hit = memo.get(key)
        if hit is None:
            label = code(truncate(node, k, trunc_memo))
            kids = [relabel(c, remaining - 1) for c in node.children] if remaining > 0 else []
            hit = memo[key] = Pattern(label, kids)
        return hit

    return relabel(pat, pat.depth - k)


@dataclass(frozen=True)
class ReducedModel:
    """A 1-spread model over derived symbols plus the 0-block code it inherits.

    ``provenance[s]`` is ``(pattern over the hidden types, root hidden type)``
    for every derived symbol ``s``; grouping symbols by root type gives the
    sets theta_b.
    """

    alphabet: tuple[str, ...]
    one_spread: MSpreadModel
    zero_code: dict[str, str]
    provenance: dict[str, tuple[Pattern, str]]
    explicit: tuple[str, ...]
    case: str

    def theta(self, b: str) -> list[str]:
        return [s for s in self.alphabet if self.provenance[s][1] == b]

    def symbol_of(self, pattern_index: int) -> str:
        """Derived symbol that plays the role of original pattern ``pattern_index``."""
        return self.alphabet[pattern_index]

    def xi(self) -> NonnegMatrix:
        return xi_matrix(self.one_spread)


def _higher_block(model: MSpreadModel, succ, K: int):
    """Alphabet {tau_q^K}, one symbol per model pattern (K >= m - 1)."""
    memo: dict[tuple[int, int], Pattern] = {}

    def grow(j, depth):
        key = (j, depth)
        if key not in memo:
            kids = [grow(s, depth - 1) for s in succ[j]] if depth > 0 else []
            memo[key] = Pattern(model.patterns[j].label, kids)
        return memo[key]

    pats = [grow(j, K) for j in range(len(model.patterns))]
    names = [symbol_name(p) for p in pats]
    one = [Pattern(names[j], [leaf(names[s]) for s in succ[j]]) for j in range(len(pats))]
    return pats, names, one


def _reduce_m_spread(model: MSpreadModel, succ):
    """(m-1)-pattern alphabet and its 1-spread model, m >= 2."""
    pats = [model.root_restriction(j) for j in range(len(model.patterns))]
    names = [symbol_name(p) for p in pats]
    one = [Pattern(names[j], [leaf(names[s]) for s in succ[j]]) for j in range(len(pats))]
    return pats, names, one


def induce(model: MSpreadModel, code: BlockCode) -> ReducedModel:
    """Reduce (model, code) to a 1-spread model with a 0-block code.

    k >= m - 1: symbols are the k-patterns tau_q^k of the model patterns.
    m - 1 > k:  relabel each pattern by its k-subpatterns to get an
    (m-k)-spread model over those, then collapse it to (m-k-1)-patterns.
    In every case symbol j stands for model pattern j.
    """
    succ = successors(model)
    m, k = model.m, code.k
    if k >= m - 1:
        pats, names, one = _higher_block(model, succ, k)
        zero = {}
        for name, p in zip(names, pats):
            zero[name] = code(p)
        prov = {name: (p, p.label) for name, p in zip(names, pats)}
        case = "m-1=k" if k == m - 1 else "m-1<k"
    elif k == 0:
        pats, names, one = _reduce_m_spread(model, succ)
        zero = {name: code(p.label) for name, p in zip(names, pats)}
        prov = {name: (p, p.label) for name, p in zip(names, pats)}
        case = "m-1>k"
    else:
        tmemo: dict = {}
        block_of: dict[str, Pattern] = {}

        def relabel(node: Pattern, remaining: int) -> Pattern:
            blk = truncate(node, k, tmemo)
            name = symbol_name(blk)
            block_of[name] = blk
            kids = [relabel(c, remaining - 1) for c in node.children] if remaining > 0 else []
            return Pattern(name, kids)

        lifted = [relabel(p, m - k) for p in model.patterns]
        inner = MSpreadModel(m - k, TypeSet(tuple(sorted(block_of))), tuple(lifted))
        inner_succ = successors(inner)
        if inner_succ != succ:
            raise AssertionError("lifted model must keep the extension structure")
        _, names, one = _reduce_m_spread(inner, inner_succ)
        zero = {name: code(block_of[p.label]) for name, p in zip(names, lifted)}
        prov = {name: (model.root_restriction(j), model.patterns[j].label) for j, name in enumerate(names)}
        case = "m-1>k"
    if len(set(names)) != len(names):
        raise AssertionError("derived symbols must be distinct")
    one_model = MSpreadModel(1, TypeSet(tuple(names), role="derived"), tuple(one))
    bad = validate(one_model)
    if bad:
        raise AssertionError(f"reduction produced an invalid 1-spread model: {bad}")
    return ReducedModel(tuple(names), one_model, zero, prov, code.explicit, case)


def gamma_set(model: MSpreadModel, code: BlockCode, a: str) -> list[str]:
    """Hidden types c whose k-pattern tau_q^k (q rooted at c) is coded to a; m = 1."""
    if model.m != 1:
        raise ValueError("gamma_set is defined for 1-spread models")
    red = induce(model, code)
    return [red.provenance[s][1] for s in red.alphabet if red.zero_code[s] == a]


@dataclass(frozen=True)
class RateReport:
    rates: dict[str, float]
    perron: PerronPair
    reduced: ReducedModel = field(repr=False)

    def __getitem__(self, a):
        return self.rates[a]


def closed_form_rates(model: MSpreadModel, code: BlockCode, start=None, tol: float | None = None) -> RateReport:
    """Spread rate of every explicit type: Perron left vector of the reduced
    xi-matrix summed over each code preimage.

    ``start`` is only checked for validity; the limit does not depend on it.
    """
    red = induce(model, code)
    if start is not None:
        model.pattern_index(start)
    kw = {} if tol is None else {"tol": tol}
    pair = perron(red.xi(), **kw)
    rates = {a: 0.0 for a in code.explicit}
    for s in red.alphabet:
        rates[red.zero_code[s]] += pair.component(s)
    return RateReport(rates, pair, red)


def closed_form_rate(model: MSpreadModel, code: BlockCode, a: str, start=None) -> float:
    if a not in code.explicit:
        raise KeyError(f"{a!r} is not an explicit type")
    return closed_form_rates(model, code, start).rates[a]


@dataclass(frozen=True)
class RateSeries:
    """Windowed ratios of explicit types, one row per window."""

    explicit: tuple[str, ...]
    windows: tuple[LevelWindow, ...]
    counts: np.ndarray  # (n_windows, n_explicit) occurrence counts
    ratios: np.ndarray  # counts / window support size

    def series(self, a: str) -> np.ndarray:
        return self.ratios[:, self.explicit.index(a)]

    def final(self) -> dict[str, float]:
        return {a: float(x) for a, x in zip(self.explicit, self.ratios[-1])}


def empirical_rate(model: MSpreadModel, code: BlockCode, start, ws: WindowSequence, N: int,
                   node_cap: int | None = None) -> RateSeries:
    """Ratios O_a / |window| read off the explicit expansion to depth N after projection.

    Only windows lying inside the labelable levels 0..N-k are reported.
    """
    tree = expand(model, start, N, node_cap)
    shown = project(tree, code)
    wins = ws.windows_upto(N - code.k)
    if not wins:
        raise ValueError(f"no window fits below level {N - code.k}")
    counts = np.zeros((len(wins), len(code.explicit)), dtype=np.int64)
    for r, w in enumerate(wins):
        c = count_by_label(shown, w)
        counts[r] = [c.get(a, 0) for a in code.explicit]
    totals = counts.sum(axis=1, keepdims=True)
    return RateSeries(tuple(code.explicit), tuple(wins), counts, counts / totals)
