"""Labeled rooted trees on the d-tree: patterns, level windows, occurrence counts.

A k-pattern occupies levels 0..k (the root plus k generations).  Node
addresses are tuples of child indices into the canonical child order, so
the root is ``()`` and ``len(g)`` is the level of ``g``.

Patterns are immutable and canonical: children are kept sorted by their
recursive sort key, so two patterns that differ only in drawing order
compare (and hash) equal.  Identical subtrees may be shared between
patterns, which is what keeps deterministic expansions cheap.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import InsufficientDepthError, MissingNodeError, WindowRangeError

NodeAddress = tuple  # tuple[int, ...]


class Pattern:
    """Finite rooted tree whose nodes carry string labels."""

    __slots__ = ("label", "children", "key", "depth", "size", "_hash", "_levels")

    def __init__(self, label: str, children: Iterable["Pattern"] = ()):
        kids = tuple(sorted(children, key=_sort_key))
        object.__setattr__(self, "label", str(label))
        object.__setattr__(self, "children", kids)
        object.__setattr__(self, "key", (self.label, tuple(c.key for c in kids)))
        object.__setattr__(self, "depth", 1 + max(c.depth for c in kids) if kids else 0)
        object.__setattr__(self, "size", 1 + sum(c.size for c in kids))
        object.__setattr__(self, "_hash", hash((self.label, tuple(c._hash for c in kids))))
        object.__setattr__(self, "_levels", None)

    def __setattr__(self, name, value):
        raise AttributeError("Pattern is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Pattern):
            return NotImplemented
        return self._hash == other._hash and self.key == other.key

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"Pattern({serialize(self)})"

    @property
    def arity(self) -> int:
        """Largest number of children at any node."""
        own = len(self.children)
        return max([own] + [c.arity for c in self.children])

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def node(self, g: Sequence[int]) -> "Pattern":
        cur = self
        for depth, i in enumerate(g):
            if not 0 <= i < len(cur.children):
                raise MissingNodeError(f"node {tuple(g)} not in pattern (fails at level {depth + 1})")
            cur = cur.children[i]
        return cur

    def label_at(self, g: Sequence[int]) -> str:
        return self.node(g).label

    def support(self) -> Iterator[NodeAddress]:
        """Node addresses in breadth-first order."""
        frontier = [((), self)]
        while frontier:
            nxt = []
            for addr, p in frontier:
                yield addr
                nxt.extend((addr + (i,), c) for i, c in enumerate(p.children))
            frontier = nxt

    def level_counts(self) -> tuple:
        """Per-level label counts; entry ``l`` is a Counter for level ``l``.

        Cached on the instance and computed through shared subtrees, so
        it is linear in the number of distinct subtrees, not nodes.
        """
        if self._levels is None:
            levels = [Counter({self.label: 1})]
            for child in self.children:
                for lvl, counts in enumerate(child.level_counts(), start=1):
                    if lvl == len(levels):
                        levels.append(Counter())
                    levels[lvl].update(counts)
            object.__setattr__(self, "_levels", tuple(levels))
        return self._levels

    def level_sizes(self) -> list[int]:
        return [sum(c.values()) for c in self.level_counts()]


def _sort_key(p: Pattern):
    return p.key


def leaf(label: str) -> Pattern:
    return Pattern(label)


def truncate(pat: Pattern, k: int, _memo=None) -> Pattern:
    """Restriction of ``pat`` to levels 0..k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if pat.depth <= k:
        return pat
    if k == 0:
        return Pattern(pat.label)
    memo = {} if _memo is None else _memo
    key = (id(pat), k)
    hit = memo.get(key)
    if hit is None:
        hit = Pattern(pat.label, [truncate(c, k - 1, memo) for c in pat.children])
        memo[key] = hit
    return hit


def subpattern_at(pat: Pattern, g: Sequence[int], k: int) -> Pattern:
    """The k-pattern rooted at node ``g`` of ``pat``.

    The subtree below ``g`` must be present to depth k, i.e.
    ``len(g) + k <= pat.depth``.
    """
    node = pat.node(g)
    if len(g) + k > pat.depth:
        raise InsufficientDepthError(
            f"node {tuple(g)} at level {len(g)} has no complete depth-{k} subtree "
            f"in a pattern of depth {pat.depth}"
        )
    return truncate(node, k)


@dataclass(frozen=True)
class LevelWindow:
    """Levels ``lo+1 .. hi`` (lo exclusive, hi inclusive)."""

    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty window ({self.lo}, {self.hi}]")

    def levels(self) -> range:
        return range(max(self.lo + 1, 0), self.hi + 1)

    def __str__(self):
        return f"({self.lo}, {self.hi}]"


@dataclass(frozen=True)
class WindowSequence:
    """Window lengths k_1, k_2, ...; either constant or an explicit finite list."""

    constant: int | None = None
    explicit: tuple[int, ...] = ()

    def __post_init__(self):
        if self.constant is None and not self.explicit:
            raise ValueError("window sequence needs a constant or an explicit list")
        if self.constant is not None and self.explicit:
            raise ValueError("window sequence is either constant or explicit, not both")
        if self.constant is not None and self.constant < 1:
            raise ValueError("window length must be >= 1")
        if any(k < 1 for k in self.explicit):
            raise ValueError("window lengths must be >= 1")

    @classmethod
    def const(cls, k: int) -> "WindowSequence":
        return cls(constant=int(k))

    @classmethod
    def of(cls, lengths: Iterable[int]) -> "WindowSequence":
        return cls(explicit=tuple(int(k) for k in lengths))

    @classmethod
    def parse(cls, text: str) -> "WindowSequence":
        """``"const:k"`` or a comma-separated list of lengths."""
        text = text.strip()
        if text.startswith("const:"):
            return cls.const(int(text[len("const:"):]))
        return cls.of(int(t) for t in text.split(",") if t.strip())

    @property
    def nondecreasing(self) -> bool:
        """Whether an explicit list may stand in for a k_n -> infinity sequence."""
        if self.constant is not None:
            return True
        return all(a <= b for a, b in zip(self.explicit, self.explicit[1:]))

    def length(self, n: int) -> int:
        """k_n for n >= 1."""
        if n < 1:
            raise IndexError("window lengths are indexed from 1")
        if self.constant is not None:
            return self.constant
        if n > len(self.explicit):
            raise IndexError(f"explicit window list has only {len(self.explicit)} entries")
        return self.explicit[n - 1]

    def partial_sum(self, n: int) -> int:
        """s_n = k_1 + ... + k_n, with s_0 = 0."""
        if n < 0:
            raise IndexError("n must be >= 0")
        if self.constant is not None:
            return self.constant * n
        if n > len(self.explicit):
            raise IndexError(f"explicit window list has only {len(self.explicit)} entries")
        return sum(self.explicit[:n])

    def window(self, n: int) -> LevelWindow:
        return LevelWindow(self.partial_sum(n), self.partial_sum(n + 1))

    def windows_upto(self, max_level: int) -> list[LevelWindow]:
        """All windows (s_n, s_{n+1}] with s_{n+1} <= max_level, from n = 0."""
        out = []
        n = 0
        while True:
            try:
                w = self.window(n)
            except IndexError:
                break
            if w.hi > max_level:
                break
            out.append(w)
            n += 1
        return out

    def __str__(self):
        if self.constant is not None:
            return f"const:{self.constant}"
        return ",".join(map(str, self.explicit))


def windows(ws: WindowSequence, n: int) -> LevelWindow:
    """The n-th window (s_n, s_{n+1}]."""
    return ws.window(n)


def count_occurrences(pat: Pattern, window: LevelWindow, t: str | None = None) -> int:
    """Number of nodes labeled ``t`` at levels lo < l <= hi (all labels if ``t`` is None)."""
    if window.hi > pat.depth:
        raise WindowRangeError(f"window {window} exceeds pattern depth {pat.depth}")
    levels = pat.level_counts()
    total = 0
    for lvl in window.levels():
        counts = levels[lvl]
        total += sum(counts.values()) if t is None else counts.get(t, 0)
    return total


def count_by_label(pat: Pattern, window: LevelWindow) -> Counter:
    if window.hi > pat.depth:
        raise WindowRangeError(f"window {window} exceeds pattern depth {pat.depth}")
    out = Counter()
    levels = pat.level_counts()
    for lvl in window.levels():
        out.update(levels[lvl])
    return out


# --- canonical text form -------------------------------------------------------

_RESERVED = set("();,")


def serialize(pat: Pattern) -> str:
    """Canonical bracket form, e.g. ``(b1;(b1),(b2))``."""
    if not pat.children:
        return f"({pat.label})"
    return f"({pat.label};" + ",".join(serialize(c) for c in pat.children) + ")"


def symbol_name(pat: Pattern) -> str:
    """Name used for a pattern acting as a derived type: bare label for leaves."""
    return pat.label if pat.is_leaf else serialize(pat)


def parse_pattern(text: str) -> Pattern:
    """Inverse of :func:`serialize`; whitespace is ignored.  A bare label is a leaf."""
    s = "".join(text.split())
    if s and s[0] != "(":
        if _RESERVED & set(s):
            raise ValueError(f"bad pattern text {text!r}")
        return Pattern(s)
    pat, pos = _parse_at(s, 0)
    if pos != len(s):
        raise ValueError(f"trailing characters in pattern text {text!r} at {pos}")
    return pat


def _parse_at(s: str, pos: int):
    if pos >= len(s) or s[pos] != "(":
        raise ValueError(f"expected '(' at {pos} in {s!r}")
    pos += 1
    start = pos
    while pos < len(s) and s[pos] not in _RESERVED:
        pos += 1
    label = s[start:pos]
    if not label:
        raise ValueError(f"empty label at {start} in {s!r}")
    children = []
    if pos < len(s) and s[pos] == ";":
        pos += 1
        while True:
            child, pos = _parse_at(s, pos)
            children.append(child)
            if pos < len(s) and s[pos] == ",":
                pos += 1
                continue
            break
    if pos >= len(s) or s[pos] != ")":
        raise ValueError(f"expected ')' at {pos} in {s!r}")
    return Pattern(label, children), pos + 1


def from_nested(obj) -> Pattern:
    """Build from ``[label, [children...]]`` arrays; a bare string is a leaf."""
    if isinstance(obj, str):
        return Pattern(obj)
    if isinstance(obj, (list, tuple)) and len(obj) in (1, 2) and isinstance(obj[0], str):
        kids = obj[1] if len(obj) == 2 else []
        if not isinstance(kids, (list, tuple)):
            raise ValueError(f"children of {obj[0]!r} must be a list")
        return Pattern(obj[0], [from_nested(c) for c in kids])
    raise ValueError(f"cannot read pattern from {obj!r}")


def to_nested(pat: Pattern) -> list:
    return [pat.label, [to_nested(c) for c in pat.children]]


def one_pattern(root: str, *children: str) -> Pattern:
    """Shorthand for the 1-pattern (root; c1, ..., cn)."""
    return Pattern(root, [Pattern(c) for c in children])
