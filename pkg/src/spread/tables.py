"""Rates and CSV tables for a parsed model file."""
from __future__ import annotations

from . import branching, topo
from .io import ModelSpec, csv_text
from .trees import WindowSequence, count_by_label


def model_rates(spec: ModelSpec):
    """(rates by explicit type, Perron pair) for either kind of model."""
    if spec.kind == "topological":
        rep = topo.closed_form_rates(spec.model, spec.code)
    else:
        rep = branching.theoretical_rates(spec.dist, spec.code, mean=spec.mean_matrix)
    return rep.rates, rep.perron


def simulate_tables(spec: ModelSpec, ws: WindowSequence, gens: int, trials: int, seed: int,
                    workers: int = 1, start: str | None = None):
    """CSV texts (ratios, counts, w) for a model file's simulation.

    Row n = 0 holds the level-0 composition; later rows are the windows,
    indexed by their last level.
    """
    start = start or spec.default_start
    header = ["n", *spec.explicit, "trials_alive"]
    if spec.kind == "topological":
        tree = topo.project(topo.expand(spec.model, start, gens), spec.code)
        rows = [[0, *[1.0 if a == tree.label else 0.0 for a in spec.explicit], 1]]
        for w in ws.windows_upto(tree.depth):
            c = count_by_label(tree, w)
            tot = sum(c.values())
            rows.append([w.hi, *[c.get(a, 0) / tot for a in spec.explicit], 1])
        counts_rows = [[lvl, 0, *[tree.level_counts()[lvl].get(a, 0) for a in spec.explicit], 1]
                       for lvl in range(tree.depth + 1)]
        return csv_text(header, rows), csv_text(["n", "trial", *spec.explicit, "alive"], counts_rows), None
    res = branching.mc_rate(spec.dist, spec.code, start, gens, trials, ws, seed, workers=workers)
    alive = res.alive
    init = res.counts[:, 0, :].astype(float)
    init = init / init.sum(axis=1, keepdims=True)
    rows = [[0, *init[alive].mean(axis=0), res.n_alive]]
    rows += [[w.hi, *m, res.n_alive] for w, m in zip(res.windows, res.mean)]
    counts_rows = []
    for t in range(res.trials):
        for n in range(gens + 1):
            counts_rows.append([n, t, *(int(x) for x in res.counts[t, n]), int(res.totals[t, n] > 0)])
    counts = csv_text(["n", "trial", *spec.explicit, "alive"], counts_rows)
    rho = branching.theoretical_rates(spec.dist, spec.code).perron.rho
    wrows = []
    for t in range(res.trials):
        traj = branching.Trajectory(spec.explicit, res.counts[t], t)
        for n, x in enumerate(branching.w_diagnostic(traj, rho)):
            wrows.append([n, t, x])
    wtext = csv_text(["n", "trial", "total_over_rho_n"], wrows)
    return csv_text(header, rows), counts, wtext
