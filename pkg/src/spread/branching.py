"""Random spread models: multi-type Galton-Watson processes and their projections.

Probabilities and mean matrices are exact ``Fraction`` values.  Floating
point enters only in sampling, in the Perron iteration and in ratio series.

Sampling scheme (shared by ``simulate_counts`` and ``simulate_tree`` so that
both consume the same draws): generation by generation, for each type in
type order, draw one uniform per individual of that type and pick the
support entry whose cumulative probability interval contains it.
"""
from __future__ import annotations

import itertools
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    CoverageError,
    EstimationError,
    ModelValidationError,
    RegimeError,
    ResourceLimitError,
)
from .spectral import NonnegMatrix, PerronPair, perron
from .topo import BlockCode
from .trees import LevelWindow, Pattern, WindowSequence, leaf, symbol_name, truncate

RNG_ALGORITHM = "numpy.PCG64/SeedSequence([master_seed, trial])"
DEFAULT_POPULATION_CAP = 10_000_000
DEFAULT_PATTERN_CAP = 100_000


def make_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Per-trial generator; depends only on (master_seed, trial)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), int(trial)])))


def _frac(x) -> Fraction:
    if isinstance(x, float):
        raise TypeError(f"probabilities must be exact (int, Fraction or 'p/q' string), got float {x!r}")
    return Fraction(x)


@dataclass(frozen=True)
class SpreadDistribution:
    """Offspring law ``p^(b)(j_1..j_K)`` for each hidden type ``b``.

    ``law[b]`` lists ``(offspring vector, probability)`` pairs; the order of
    the list fixes the sampling order.  Repeated vectors are merged.
    """

    types: tuple[str, ...]
    law: Mapping[str, tuple[tuple[tuple[int, ...], Fraction], ...]]

    def __post_init__(self):
        types = tuple(self.types)
        if not types or len(set(types)) != len(types):
            raise ModelValidationError(f"types must be distinct and nonempty: {types}")
        problems = []
        clean = {}
        for b in types:
            if b not in self.law:
                problems.append(f"no offspring law for type {b!r}")
                continue
            merged: dict[tuple[int, ...], Fraction] = {}
            for vec, p in self.law[b]:
                vec = tuple(int(x) for x in vec)
                p = _frac(p)
                if len(vec) != len(types):
                    problems.append(f"type {b!r}: offspring vector {vec} has length {len(vec)}, expected {len(types)}")
                    continue
                if any(x < 0 for x in vec):
                    problems.append(f"type {b!r}: negative offspring count in {vec}")
                if p <= 0:
                    problems.append(f"type {b!r}: nonpositive probability {p} for {vec}")
                merged[vec] = merged.get(vec, Fraction(0)) + p
            total = sum(merged.values(), Fraction(0))
            if total != 1:
                problems.append(f"type {b!r}: probabilities sum to {total}, not 1")
            clean[b] = tuple(merged.items())
        extra = set(self.law) - set(types)
        if extra:
            problems.append(f"offspring laws for unknown types {sorted(extra)}")
        if not problems and all(sum(v) == 1 for b in types for v, _ in clean[b]):
            problems.append("singular model: every individual has exactly one child")
        if problems:
            raise ModelValidationError("invalid spread distribution: " + "; ".join(problems), problems)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "law", clean)

    @classmethod
    def from_counts(cls, types: Sequence[str], law: Mapping[str, Sequence[tuple[Mapping[str, int], object]]]):
        """Build from ``{type: [({child type: count}, prob), ...]}``."""
        types = tuple(types)
        out = {}
        for b, entries in law.items():
            rows = []
            for counts, p in entries:
                unknown = set(counts) - set(types)
                if unknown:
                    raise ModelValidationError(f"type {b!r}: unknown offspring types {sorted(unknown)}")
                rows.append((tuple(counts.get(t, 0) for t in types), p))
            out[b] = tuple(rows)
        return cls(types, out)

    @property
    def K(self) -> int:
        return len(self.types)

    @property
    def d(self) -> int:
        return max(sum(v) for b in self.types for v, _ in self.law[b])

    def entries(self, b: str):
        return self.law[b]

    @cached_property
    def _tables(self):
        """Per type: float cdf over entries and the offspring matrix."""
        out = []
        for b in self.types:
            probs = np.array([float(p) for _, p in self.law[b]])
            cdf = np.cumsum(probs)
            cdf[-1] = 1.0
            out.append((cdf, np.array([v for v, _ in self.law[b]], dtype=np.int64)))
        return out


def mean_matrix(dist: SpreadDistribution) -> NonnegMatrix:
    """m_ij = E[number of j-children of an i-individual], exact."""
    rows = []
    for b in dist.types:
        row = [Fraction(0)] * dist.K
        for vec, p in dist.law[b]:
            for j, x in enumerate(vec):
                row[j] += p * x
        rows.append(row)
    return NonnegMatrix(dist.types, tuple(tuple(r) for r in rows))


# --- simulation ---------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Per-generation type counts ``counts[n, i]`` for n = 0..N."""

    types: tuple[str, ...]
    counts: np.ndarray
    trial: int | None = None

    @property
    def N(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def extinct(self) -> bool:
        return bool(self.totals[-1] == 0)

    def window_ratios(self, ws: WindowSequence) -> tuple[list[LevelWindow], np.ndarray]:
        """Per window, counts summed over its levels divided by the total; NaN if empty."""
        wins = ws.windows_upto(self.N)
        out = np.full((len(wins), len(self.types)), np.nan)
        for r, w in enumerate(wins):
            s = self.counts[w.lo + 1: w.hi + 1].sum(axis=0)
            tot = s.sum()
            if tot > 0:
                out[r] = s / tot
        return wins, out


def _initial_counts(types: Sequence[str], start) -> np.ndarray:
    z = np.zeros(len(types), dtype=np.int64)
    if isinstance(start, str):
        if start not in types:
            raise KeyError(f"unknown start type {start!r}")
        z[list(types).index(start)] = 1
    else:
        z[:] = np.asarray(start, dtype=np.int64)
        if (z < 0).any():
            raise ValueError("initial counts must be nonnegative")
    return z


def _step(dist: SpreadDistribution, z: np.ndarray, rng: np.random.Generator, want_choices=False):
    nxt = np.zeros(dist.K, dtype=np.int64)
    choices = []
    for i, (cdf, offspring) in enumerate(dist._tables):
        c = int(z[i])
        if c == 0:
            choices.append(None)
            continue
        idx = np.searchsorted(cdf, rng.random(c), side="right")
        np.minimum(idx, len(cdf) - 1, out=idx)
        nxt += np.bincount(idx, minlength=len(cdf)) @ offspring
        choices.append(idx if want_choices else None)
    return nxt, choices


def resolve_cap(cap: int | None = None) -> int:
    """Explicit cap, else ``SPREAD_NODE_CAP`` from the environment, else the default."""
    if cap is not None:
        return int(cap)
    env = os.environ.get("SPREAD_NODE_CAP")
    return int(env) if env else DEFAULT_POPULATION_CAP


def _check_cap(total: int, cap: int, n: int):
    if total > cap:
        raise ResourceLimitError(
            f"population {total} at generation {n} exceeds the cap of {cap}", cap=cap, reached=n)


def simulate_counts(dist: SpreadDistribution, start, N: int, seed=None, rng: np.random.Generator | None = None,
                    population_cap: int | None = None, trial: int | None = None) -> Trajectory:
    """Type counts Z_0..Z_N of one realization.

    ``start`` is a type name or an initial count vector.  Pass either an
    integer ``seed`` or a ready generator ``rng``.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    cap = resolve_cap(population_cap)
    z = _initial_counts(dist.types, start)
    out = np.zeros((N + 1, dist.K), dtype=np.int64)
    out[0] = z
    for n in range(1, N + 1):
        _check_cap(int(z.sum()), cap, n - 1)
        z, _ = _step(dist, z, rng)
        out[n] = z
    _check_cap(int(z.sum()), cap, N)
    return Trajectory(dist.types, out, trial)


def simulate_tree(dist: SpreadDistribution, start: str, N: int, seed=None, rng: np.random.Generator | None = None,
                  node_cap: int | None = None) -> Pattern:
    """Full labeled realization to depth N, using the same draws as ``simulate_counts``."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    if start not in dist.types:
        raise KeyError(f"unknown start type {start!r}")
    node_cap = resolve_cap(node_cap)
    # each level: list of (type index, children list) in creation order
    root = (dist.types.index(start), [])
    level = [root]
    size = 1
    for n in range(1, N + 1):
        by_type = [[] for _ in dist.types]
        for node in level:
            by_type[node[0]].append(node)
        z = np.array([len(g) for g in by_type], dtype=np.int64)
        _, choices = _step(dist, z, rng, want_choices=True)
        nxt = []
        for i, group in enumerate(by_type):
            if not group:
                continue
            offspring = dist._tables[i][1]
            for node, e in zip(group, choices[i]):
                for j, cnt in enumerate(offspring[e]):
                    for _ in range(int(cnt)):
                        child = (j, [])
                        node[1].append(child)
                        nxt.append(child)
        size += len(nxt)
        if size > node_cap:
            raise ResourceLimitError(f"realization exceeds the node cap of {node_cap} at generation {n}",
                                     cap=node_cap, reached=n)
        level = nxt
        if not level:
            break

    def build(node):
        return Pattern(dist.types[node[0]], [build(c) for c in node[1]])

    return build(root)


# --- potential patterns and the induced chain -----------------------------------


@dataclass(frozen=True)
class PotentialPatternSet:
    """Potential k-patterns per root type, with exact occurrence probabilities.

    ``patterns`` is the global index b_1..b_{K#}: roots in type order, and
    within a root the enumeration order described in
    :func:`enumerate_potential_patterns`.
    """

    k: int
    types: tuple[str, ...]
    by_root: Mapping[str, tuple[tuple[Pattern, Fraction], ...]]

    @cached_property
    def patterns(self) -> tuple[Pattern, ...]:
        return tuple(p for b in self.types for p, _ in self.by_root[b])

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(symbol_name(p) for p in self.patterns)

    @cached_property
    def prob(self) -> dict[Pattern, Fraction]:
        return {p: q for b in self.types for p, q in self.by_root[b]}

    def __len__(self):
        return len(self.patterns)

    def index(self, pat: Pattern) -> int:
        return self.patterns.index(pat)


def _child_options(groups, options_for):
    """Joint choices for children grouped by type, first group varying slowest.

    Identical-type children are an unordered multiset, so each group ranges
    over combinations with replacement weighted by the multinomial count.
    """
    per_group = []
    for t, count in groups:
        opts = options_for(t)
        choices = []
        for combo in itertools.combinations_with_replacement(range(len(opts)), count):
            mult = math.factorial(count)
            for c in Counter(combo).values():
                mult //= math.factorial(c)
            p = Fraction(mult)
            pats = []
            for i in combo:
                pats.append(opts[i][0])
                p *= opts[i][1]
            choices.append((pats, p))
        per_group.append(choices)
    for combo in itertools.product(*per_group):
        pats, p = [], Fraction(1)
        for ps, q in combo:
            pats.extend(ps)
            p *= q
        yield pats, p


def enumerate_potential_patterns(dist: SpreadDistribution, k: int, cap: int = DEFAULT_PATTERN_CAP) -> PotentialPatternSet:
    """All k-patterns with positive probability, per root type.

    Order: support entries in listed order, then joint child choices with
    the first child type varying slowest; colliding patterns are merged in
    first-occurrence position with probabilities summed.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    layer = {b: ((leaf(b), Fraction(1)),) for b in dist.types}
    for depth in range(1, k + 1):
        prev = layer
        layer = {}
        total = 0
        for b in dist.types:
            acc: dict[Pattern, Fraction] = {}
            for vec, p in dist.law[b]:
                groups = [(t, c) for t, c in zip(dist.types, vec) if c]
                for kids, q in _child_options(groups, lambda t: prev[t]):
                    pat = Pattern(b, kids)
                    acc[pat] = acc.get(pat, Fraction(0)) + p * q
                    if len(acc) + total > cap:
                        raise ResourceLimitError(
                            f"more than {cap} potential {depth}-patterns", cap=cap, reached=len(acc) + total)
            layer[b] = tuple(acc.items())
            total += len(acc)
    return PotentialPatternSet(k, dist.types, layer)


@dataclass(frozen=True)
class InducedModel:
    """Branching process on potential k-patterns derived from a base law."""

    k: int
    alphabet: PotentialPatternSet
    dist: SpreadDistribution
    initial: Mapping[str, tuple[Fraction, ...]]
    mean: NonnegMatrix

    @property
    def names(self) -> tuple[str, ...]:
        return self.dist.types

    def initial_law(self, b: str) -> tuple[Fraction, ...]:
        return self.initial[b]


def _convolve(options: list[list[tuple[int, Fraction]]], size: int):
    """Law of the count vector when child i independently picks symbol j w.p. options[i]."""
    acc: dict[tuple[int, ...], Fraction] = {(0,) * size: Fraction(1)}
    # fold one child at a time so equal count vectors merge early
    for opts in options:
        nxt: dict[tuple[int, ...], Fraction] = {}
        for vec, p in acc.items():
            for j, q in opts:
                key = vec[:j] + (vec[j] + 1,) + vec[j + 1:]
                nxt[key] = nxt.get(key, Fraction(0)) + p * q
        acc = nxt
    return tuple(acc.items())


def induce(dist: SpreadDistribution, k: int, cap: int = DEFAULT_PATTERN_CAP) -> InducedModel:
    """Offspring law of the chain whose states are the k-patterns rooted at each node.

    Given a node's k-pattern q, child i (with (k-1)-subtree s_i in q) has
    k-pattern r with probability P(r) / P(s_i), independently across
    children, where P is the occurrence probability for the child's type.
    """
    pots = enumerate_potential_patterns(dist, k, cap)
    if k == 0:
        initial = {b: tuple(Fraction(int(b == c)) for c in dist.types) for b in dist.types}
        model = InducedModel(0, pots, dist, initial, mean_matrix(dist))
        return model
    lower = enumerate_potential_patterns(dist, k - 1, cap)
    names = pots.names
    index = {p: i for i, p in enumerate(pots.patterns)}
    extensions: dict[Pattern, list[tuple[int, Fraction]]] = {}
    for r in pots.patterns:
        s = truncate(r, k - 1)
        extensions.setdefault(s, []).append((index[r], pots.prob[r] / lower.prob[s]))
    law = {}
    for r in pots.patterns:
        opts = [extensions[c] for c in r.children]
        law[symbol_name(r)] = _convolve(opts, len(names))
    idist = SpreadDistribution(names, law)
    initial = {}
    for b in dist.types:
        vec = [Fraction(0)] * len(names)
        for p, q in pots.by_root[b]:
            vec[index[p]] = q
        initial[b] = tuple(vec)
    # mean from the children's conditional laws, cross-checked against the induced law
    rows = []
    for r in pots.patterns:
        row = [Fraction(0)] * len(names)
        for c in r.children:
            for j, q in extensions[c]:
                row[j] += q
        rows.append(tuple(row))
    direct = NonnegMatrix(names, tuple(rows))
    M = mean_matrix(idist)
    if M.entries != direct.entries:
        raise AssertionError("induced mean matrix disagrees with the direct expectation")
    return InducedModel(k, pots, idist, initial, M)


# --- projection and rates -------------------------------------------------------


def _code_columns(symbols: Sequence[str], patterns: Sequence[Pattern], code: BlockCode) -> np.ndarray:
    cols = np.empty(len(symbols), dtype=np.int64)
    for i, p in enumerate(patterns):
        a = code(p)
        cols[i] = code.explicit.index(a)
    return cols


def project_counts(counts, symbols: Sequence[str], code: BlockCode, patterns: Sequence[Pattern] | None = None) -> np.ndarray:
    """Sum counts over code preimages; works on a vector or an (n, K) array."""
    if patterns is None:
        from .trees import parse_pattern

        patterns = [parse_pattern(s) for s in symbols]
    cols = _code_columns(symbols, patterns, code)
    arr = np.asarray(counts)
    out = np.zeros(arr.shape[:-1] + (len(code.explicit),), dtype=arr.dtype)
    for i, j in enumerate(cols):
        out[..., j] += arr[..., i]
    return out


@dataclass(frozen=True)
class TheoreticalRates:
    rates: dict[str, float]
    perron: PerronPair
    induced: InducedModel = field(repr=False)

    def __getitem__(self, a):
        return self.rates[a]


def theoretical_rates(dist: SpreadDistribution, code: BlockCode, mean: NonnegMatrix | None = None,
                      tol: float | None = None) -> TheoreticalRates:
    """Perron left vector of the (induced) mean matrix summed over code preimages.

    ``mean`` substitutes a given matrix for the one derived from ``dist``
    (only meaningful for k = 0, e.g. to evaluate a published matrix).
    """
    ind = induce(dist, code.k)
    M = ind.mean if mean is None else mean
    if tuple(M.labels) != tuple(ind.names):
        raise ValueError(f"matrix labels {M.labels} do not match the alphabet {ind.names}")
    kw = {} if tol is None else {"tol": tol}
    pair = perron(M, **kw)
    if pair.rho <= 1 + 1e-12:
        raise RegimeError(f"process is not supercritical (rho = {pair.rho:.12g})")
    rates = {a: 0.0 for a in code.explicit}
    cols = _code_columns(ind.names, ind.alphabet.patterns, code)
    for i, j in enumerate(cols):
        rates[code.explicit[j]] += float(pair.w[i])
    return TheoreticalRates(rates, pair, ind)


def theoretical_rate(dist: SpreadDistribution, code: BlockCode, a: str) -> float:
    if a not in code.explicit:
        raise KeyError(f"{a!r} is not an explicit type")
    return theoretical_rates(dist, code).rates[a]


def _pick(rng: np.random.Generator, probs: Sequence[Fraction]) -> int:
    cdf = np.cumsum([float(p) for p in probs])
    cdf[-1] = 1.0
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), len(cdf) - 1))


@dataclass(frozen=True)
class McResult:
    """Monte Carlo windowed ratios of explicit types.

    ``per_trial[t, n, j]`` is trial t's ratio for explicit type j in window
    n (NaN when the window is empty); ``mean`` averages the trials alive at
    the horizon.  ``counts[t]`` holds trial t's projected per-generation
    counts.
    """

    explicit: tuple[str, ...]
    windows: tuple[LevelWindow, ...]
    mean: np.ndarray
    per_trial: np.ndarray
    alive: np.ndarray
    counts: np.ndarray
    totals: np.ndarray = field(repr=False)

    @property
    def trials(self) -> int:
        return len(self.alive)

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    @property
    def n_extinct(self) -> int:
        return self.trials - self.n_alive

    def final(self) -> dict[str, float]:
        return {a: float(x) for a, x in zip(self.explicit, self.mean[-1])}

    def alive_by_window(self) -> np.ndarray:
        return (~np.isnan(self.per_trial[:, :, 0])).sum(axis=0)


def _run_trial(ind: InducedModel, cols, n_explicit, start, N, master_seed, trial, population_cap):
    rng = make_rng(master_seed, trial)
    if ind.k == 0:
        z0 = start
    else:
        z0 = np.zeros(len(ind.names), dtype=np.int64)
        z0[_pick(rng, ind.initial_law(start))] = 1
    traj = simulate_counts(ind.dist, z0, N, rng=rng, population_cap=population_cap, trial=trial)
    proj = np.zeros((N + 1, n_explicit), dtype=np.int64)
    for i, j in enumerate(cols):
        proj[:, j] += traj.counts[:, i]
    return proj, traj.totals


def mc_rate(dist: SpreadDistribution, code: BlockCode, start: str, N: int, trials: int,
            ws: WindowSequence, seed: int, workers: int = 1,
            population_cap: int | None = None) -> McResult:
    """Windowed explicit-type ratios averaged over independent trials.

    For k >= 1 the chain on potential k-patterns is simulated directly, its
    root drawn from the initial law of ``start``.  Trials extinct at the
    horizon are excluded from the mean.  Trial t draws only from
    ``make_rng(seed, t)``, so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if start not in dist.types:
        raise KeyError(f"unknown start type {start!r}")
    ind = induce(dist, code.k)
    cols = _code_columns(ind.names, ind.alphabet.patterns, code)
    K2 = len(code.explicit)
    wins = ws.windows_upto(N)

    def job(t):
        return _run_trial(ind, cols, K2, start, N, seed, t, population_cap)

    if workers <= 1:
        results = [job(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(trials)))
    counts = np.stack([r[0] for r in results])
    totals = np.stack([r[1] for r in results])
    alive = totals[:, -1] > 0
    per_trial = np.full((trials, len(wins), K2), np.nan)
    for n, w in enumerate(wins):
        s = counts[:, w.lo + 1: w.hi + 1].sum(axis=1)
        tot = s.sum(axis=1)
        ok = tot > 0
        per_trial[ok, n] = s[ok] / tot[ok, None]
    if not alive.any():
        raise EstimationError(f"all {trials} trials went extinct by generation {N}")
    mean = per_trial[alive].mean(axis=0) if wins else np.zeros((0, K2))
    return McResult(tuple(code.explicit), tuple(wins), mean, per_trial, alive, counts, totals)


def w_diagnostic(traj: Trajectory, rho: float) -> np.ndarray:
    """Total population over rho^n, generation by generation."""
    if rho <= 1:
        raise RegimeError(f"diagnostic needs rho > 1, got {rho}")
    n = np.arange(traj.N + 1)
    return traj.totals / np.power(float(rho), n)
