"""Mamdani fuzzy inference with trapezoidal sets, batched over controller pages.

A *page* is one complete controller (its own membership functions) paired
with one input row.  ``evaluate_batch`` runs ``N_p`` pages in a single numpy
pass; ``evaluate_scalar`` is a loop-based reference used to check it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_N_DIS = 101


class FisConfigError(ValueError):
    """Raised for an inconsistent rule table or partition."""


class GenomeDomainError(ValueError):
    """Raised when a membership-function genome is malformed."""


class DimensionError(ValueError):
    """Raised when page counts of inputs and controllers disagree."""


@dataclass(frozen=True)
class TrapezoidSet:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise FisConfigError(f"trapezoid corners not ordered: {self.corners}")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def membership(self, x: float) -> float:
        a, b, c, d = self.corners
        if b <= x <= c:
            return 1.0
        if a <= x < b:
            return (x - a) / (b - a)
        if c < x <= d:
            return (d - x) / (d - c)
        return 0.0


@dataclass(frozen=True)
class VariablePartition:
    """Ordered linguistic sets covering one variable's universe."""

    universe_min: float
    universe_max: float
    sets: tuple[TrapezoidSet, ...]
    name: str = ""
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "labels", tuple(self.labels))
        lo, hi = self.universe_min, self.universe_max
        if not lo < hi:
            raise FisConfigError(f"{self.name or 'variable'}: empty universe [{lo}, {hi}]")
        if not self.sets:
            raise FisConfigError(f"{self.name or 'variable'}: no sets")
        if self.labels and len(self.labels) != len(self.sets):
            raise FisConfigError(f"{self.name}: {len(self.labels)} labels for {len(self.sets)} sets")
        for s in self.sets:
            if s.a < lo or s.d > hi:
                raise FisConfigError(f"{self.name}: set {s.corners} leaves universe [{lo}, {hi}]")
        for left, right in zip(self.sets, self.sets[1:]):
            if left.b > right.b:
                raise FisConfigError(f"{self.name}: set plateaus out of order")
        if not self._covers_universe():
            raise FisConfigError(f"{self.name}: sets leave part of the universe uncovered")

    def _covers_universe(self) -> bool:
        # Membership is positive strictly inside every support (a, d), so the
        # supports must tile the universe and each support end must be covered
        # by some set.
        reach = self.universe_min
        for s in sorted(self.sets, key=lambda s: s.a):
            if s.a > reach:
                return False
            reach = max(reach, s.d)
        if reach < self.universe_max:
            return False
        probes = {self.universe_min, self.universe_max}
        probes.update(p for s in self.sets for p in (s.a, s.d))
        return all(any(s.membership(p) > 0.0 for s in self.sets) for p in probes)

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    def corner_array(self) -> np.ndarray:
        return np.array([s.corners for s in self.sets], dtype=float)


@dataclass(frozen=True)
class RuleTable:
    """Rule matrix: one row per rule, antecedent indexes then the consequent.

    Indexes are 1-based linguistic indexes, smallest set first.
    """

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64, copy=True)
        if rows.ndim != 2 or rows.shape[1] < 2 or rows.shape[0] == 0:
            raise FisConfigError(f"rule matrix must be 2-D with >= 2 columns, got {rows.shape}")
        antecedents = {tuple(r) for r in rows[:, :-1].tolist()}
        if len(antecedents) != rows.shape[0]:
            raise FisConfigError("duplicate antecedent rows in rule table")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rules(self) -> int:
        return self.rows.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.rows.shape[1] - 1

    def __eq__(self, other):
        return isinstance(other, RuleTable) and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash(self.rows.tobytes())


@dataclass(frozen=True)
class FisSpec:
    input_partitions: tuple[VariablePartition, ...]
    output_partition: VariablePartition
    rules: RuleTable
    n_dis: int = DEFAULT_N_DIS

    def __post_init__(self):
        object.__setattr__(self, "input_partitions", tuple(self.input_partitions))
        if self.n_dis < 2:
            raise FisConfigError(f"n_dis must be >= 2, got {self.n_dis}")
        if self.rules.n_inputs != len(self.input_partitions):
            raise FisConfigError(
                f"rule table has {self.rules.n_inputs} antecedent columns "
                f"for {len(self.input_partitions)} inputs"
            )
        counts = [p.n_sets for p in self.input_partitions] + [self.output_partition.n_sets]
        for k, n in enumerate(counts):
            col = self.rules.rows[:, k]
            if col.min() < 1 or col.max() > n:
                raise FisConfigError(f"rule column {k} has index outside [1, {n}]")

    @property
    def n_inputs(self) -> int:
        return len(self.input_partitions)

    def to_dict(self) -> dict:
        def part(p: VariablePartition) -> dict:
            out = {
                "name": p.name,
                "universe": [p.universe_min, p.universe_max],
                "sets": [list(s.corners) for s in p.sets],
            }
            if p.labels:
                out["labels"] = list(p.labels)
            return out

        return {
            "inputs": [part(p) for p in self.input_partitions],
            "output": part(self.output_partition),
            "rules": self.rules.rows.tolist(),
            "n_dis": self.n_dis,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FisSpec:
        def part(d: dict) -> VariablePartition:
            lo, hi = d["universe"]
            return VariablePartition(
                float(lo),
                float(hi),
                tuple(TrapezoidSet(*map(float, s)) for s in d["sets"]),
                name=d.get("name", ""),
                labels=tuple(d.get("labels", ())),
            )

        return cls(
            tuple(part(p) for p in data["inputs"]),
            part(data["output"]),
            RuleTable(np.asarray(data["rules"], dtype=np.int64)),
            int(data.get("n_dis", DEFAULT_N_DIS)),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> FisSpec:
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Genome encoding
#
# Each partition pins its outer shoulders to the universe ends.  Adjacent sets
# j and j+1 share their overlap corners: c_j = a_{j+1} and d_j = b_{j+1}.  The
# free corners, 2 * (n_sets - 1) per variable, are the genes, scaled to [0, 1]
# over the variable's universe.


def genes_per_partition(n_sets: int) -> int:
    return 2 * (n_sets - 1)


def genome_length(template: FisSpec) -> int:
    parts = (*template.input_partitions, template.output_partition)
    return sum(genes_per_partition(p.n_sets) for p in parts)


def uniform_genome(template: FisSpec) -> np.ndarray:
    """Genes placing every variable's corners at even spacing."""
    chunks = []
    for p in (*template.input_partitions, template.output_partition):
        n = genes_per_partition(p.n_sets)
        chunks.append(np.arange(1, n + 1) / (n + 1))
    return np.concatenate(chunks)


def _check_genomes(genomes: np.ndarray, n_genes: int) -> np.ndarray:
    g = np.asarray(genomes, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.ndim != 2 or g.shape[1] != n_genes:
        raise GenomeDomainError(f"genome must have exactly {n_genes} genes, got shape {np.shape(genomes)}")
    if not np.all(np.isfinite(g)) or g.min(initial=0.0) < 0.0 or g.max(initial=0.0) > 1.0:
        raise GenomeDomainError("genes must lie in the normalized range [0, 1]")
    return g


def _corners_from_genes(genes: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Sorted gene block (N_p, 2(n-1)) -> corners (N_p, n, 4)."""
    n_p, n_g = genes.shape
    n_sets = n_g // 2 + 1
    pts = lo + np.sort(genes, axis=1) * (hi - lo)
    padded = np.concatenate(
        [np.full((n_p, 2), lo), pts, np.full((n_p, 2), hi)], axis=1
    )
    idx = 2 * np.arange(n_sets)[:, None] + np.arange(4)[None, :]
    return padded[:, idx]


def decode_genome(genome: Sequence[float], template: FisSpec) -> FisSpec:
    """Build the controller encoded by ``genome`` on ``template``'s rules and universes.

    Corner genes are sorted within each variable, so swapped genes decode to
    the same partition.
    """
    return PagedFis.from_genomes(genome, template).page(0)


# ---------------------------------------------------------------------------
# Batched representation


@dataclass(frozen=True)
class PagedFis:
    """``N_p`` controllers sharing a rule table and universes.

    ``input_corners[k]`` has shape (N_p, N_ti_k, 4); ``output_corners`` has
    shape (N_p, N_to, 4).
    """

    input_corners: tuple[np.ndarray, ...]
    output_corners: np.ndarray
    input_universes: tuple[tuple[float, float], ...]
    output_universe: tuple[float, float]
    rules: RuleTable
    n_dis: int = DEFAULT_N_DIS
    names: tuple[str, ...] = ()
    labels: tuple[tuple[str, ...], ...] = ()
    _grid_membership: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        counts = {c.shape[0] for c in self.input_corners} | {self.output_corners.shape[0]}
        if len(counts) != 1:
            raise DimensionError(f"pages disagree on count: {sorted(counts)}")
        oc = self.output_corners
        mu = trapezoid_membership(
            self.output_grid()[None, None, :], oc[..., 0:1], oc[..., 1:2], oc[..., 2:3], oc[..., 3:4]
        )
        object.__setattr__(self, "_grid_membership", np.ascontiguousarray(mu))

    @property
    def n_pages(self) -> int:
        return self.output_corners.shape[0]

    def output_grid(self) -> np.ndarray:
        lo, hi = self.output_universe
        return np.linspace(lo, hi, self.n_dis)

    @classmethod
    def from_specs(cls, specs: Sequence[FisSpec]) -> PagedFis:
        specs = list(specs)
        if not specs:
            raise DimensionError("no controller pages given")
        first = specs[0]
        for s in specs[1:]:
            if s.rules != first.rules or s.n_dis != first.n_dis:
                raise FisConfigError("pages must share one rule table and n_dis")
            same_universe = all(
                (p.universe_min, p.universe_max) == (q.universe_min, q.universe_max)
                for p, q in zip(
                    (*s.input_partitions, s.output_partition),
                    (*first.input_partitions, first.output_partition),
                )
            )
            if not same_universe:
                raise FisConfigError("pages must share universes")
        n_inp = first.n_inputs
        return cls(
            tuple(np.stack([s.input_partitions[k].corner_array() for s in specs]) for k in range(n_inp)),
            np.stack([s.output_partition.corner_array() for s in specs]),
            tuple((p.universe_min, p.universe_max) for p in first.input_partitions),
            (first.output_partition.universe_min, first.output_partition.universe_max),
            first.rules,
            first.n_dis,
            tuple(p.name for p in (*first.input_partitions, first.output_partition)),
            tuple(p.labels for p in (*first.input_partitions, first.output_partition)),
        )

    @classmethod
    def from_genomes(cls, genomes, template: FisSpec) -> PagedFis:
        parts = (*template.input_partitions, template.output_partition)
        g = _check_genomes(genomes, genome_length(template))
        corners, start = [], 0
        for p in parts:
            n = genes_per_partition(p.n_sets)
            corners.append(_corners_from_genes(g[:, start:start + n], p.universe_min, p.universe_max))
            start += n
        return cls(
            tuple(corners[:-1]),
            corners[-1],
            tuple((p.universe_min, p.universe_max) for p in template.input_partitions),
            (template.output_partition.universe_min, template.output_partition.universe_max),
            template.rules,
            template.n_dis,
            tuple(p.name for p in parts),
            tuple(p.labels for p in parts),
        )

    def page(self, i: int) -> FisSpec:
        names = self.names or ("",) * (len(self.input_corners) + 1)
        labels = self.labels or ((),) * (len(self.input_corners) + 1)

        def part(corners, universe, k):
            return VariablePartition(
                float(universe[0]),
                float(universe[1]),
                tuple(TrapezoidSet(*map(float, row)) for row in corners[i]),
                name=names[k],
                labels=labels[k],
            )

        inputs = tuple(
            part(c, u, k) for k, (c, u) in enumerate(zip(self.input_corners, self.input_universes))
        )
        return FisSpec(inputs, part(self.output_corners, self.output_universe, len(inputs)),
                       self.rules, self.n_dis)


def _as_paged(spec) -> PagedFis:
    if isinstance(spec, PagedFis):
        return spec
    if isinstance(spec, FisSpec):
        return PagedFis.from_specs([spec])
    return PagedFis.from_specs(spec)


def trapezoid_membership(x, a, b, c, d):
    """Elementwise trapezoid membership; degenerate edges (a == b, c == d) are crisp."""
    x, a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, a, b, c, d)))
    rising = (a <= x) & (x < b)
    falling = (c < x) & (x <= d)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where((b <= x) & (x <= c), 1.0, 0.0)
        mu = np.where(rising, (x - a) / np.where(rising, b - a, 1.0), mu)
        mu = np.where(falling, (d - x) / np.where(falling, d - c, 1.0), mu)
    return mu


# ---------------------------------------------------------------------------
# Batched pipeline


def fuzzify_batch(X, spec) -> list[np.ndarray]:
    """Membership of each input column in each of its sets.

    Returns one (N_p, N_ti_k) array per input.  Inputs outside a universe are
    clamped to its bounds first.
    """
    paged = _as_paged(spec)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(paged.input_corners):
        raise DimensionError(f"expected {len(paged.input_corners)} input columns, got {X.shape[1]}")
    out = []
    for k, (corners, (lo, hi)) in enumerate(zip(paged.input_corners, paged.input_universes)):
        x = np.clip(X[:, k], lo, hi)[:, None]
        out.append(trapezoid_membership(x, corners[..., 0], corners[..., 1], corners[..., 2], corners[..., 3]))
    return out


def infer_batch(U: Sequence[np.ndarray], spec) -> np.ndarray:
    """Mamdani inference: AND by min, aggregation per output set by max.

    Follows the index-matching scheme: for every input, a (sets x rules)
    boolean mask picks the membership each rule refers to; the masked
    memberships are unioned over sets, intersected over inputs, and finally
    routed to output sets through a (rules x output sets) mask.
    """
    paged = _as_paged(spec)
    rows = paged.rules.rows
    if len(U) != rows.shape[1] - 1:
        raise FisConfigError(f"{len(U)} membership arrays for {rows.shape[1] - 1} rule inputs")
    firing = None
    for k, mu in enumerate(U):
        n_sets = mu.shape[1]
        col = rows[:, k]
        if col.max() > n_sets or col.min() < 1:
            raise FisConfigError(f"rule column {k} indexes beyond {n_sets} sets")
        match = np.arange(1, n_sets + 1)[:, None] == col[None, :]
        effective = np.where(match[None, :, :], mu[:, :, None], 0.0)
        u_in = effective.max(axis=1)
        firing = u_in if firing is None else np.minimum(firing, u_in)

    n_to = paged.output_corners.shape[1]
    out_col = rows[:, -1]
    if out_col.max() > n_to or out_col.min() < 1:
        raise FisConfigError(f"rule consequents index beyond {n_to} output sets")
    match_o = out_col[:, None] == np.arange(1, n_to + 1)[None, :]
    effective_o = np.where(match_o[None, :, :], firing[:, :, None], 0.0)
    return effective_o.max(axis=1)


def defuzzify_batch(activations, spec) -> np.ndarray:
    """Discrete centre-of-gravity over ``n_dis`` evenly spaced output points.

    Pages whose aggregate membership is zero everywhere return the midpoint
    of the output universe.
    """
    paged = _as_paged(spec)
    act = np.atleast_2d(np.asarray(activations, dtype=float))
    grid = paged.output_grid()
    clipped = np.minimum(paged._grid_membership, act[:, :, None])
    aggregate = clipped.max(axis=1)
    den = aggregate.sum(axis=1)
    num = (aggregate * grid).sum(axis=1)
    lo, hi = paged.output_universe
    mid = 0.5 * (lo + hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), mid)
    return np.clip(y, lo, hi)


def evaluate_batch(X, specs) -> np.ndarray:
    """Crisp outputs of ``N_p`` controllers, one input row per controller."""
    paged = _as_paged(specs)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != paged.n_pages:
        raise DimensionError(f"{X.shape[0]} input rows for {paged.n_pages} controller pages")
    return defuzzify_batch(infer_batch(fuzzify_batch(X, paged), paged), paged)


def evaluate_scalar(x: Sequence[float], spec: FisSpec) -> float:
    """Loop-based Mamdani evaluation of a single controller."""
    if len(x) != spec.n_inputs:
        raise DimensionError(f"expected {spec.n_inputs} inputs, got {len(x)}")
    memberships = []
    for xk, part in zip(x, spec.input_partitions):
        xk = min(max(float(xk), part.universe_min), part.universe_max)
        memberships.append([s.membership(xk) for s in part.sets])

    out_sets = spec.output_partition.sets
    activation = [0.0] * len(out_sets)
    for row in spec.rules.rows.tolist():
        strength = 1.0
        for k, idx in enumerate(row[:-1]):
            strength = min(strength, memberships[k][idx - 1])
        j = row[-1] - 1
        activation[j] = max(activation[j], strength)

    lo, hi = spec.output_partition.universe_min, spec.output_partition.universe_max
    step = (hi - lo) / (spec.n_dis - 1)
    num = den = 0.0
    for i in range(spec.n_dis):
        xo = hi if i == spec.n_dis - 1 else lo + i * step
        mu = 0.0
        for s, act in zip(out_sets, activation):
            mu = max(mu, min(s.membership(xo), act))
        num += xo * mu
        den += mu
    if den == 0.0:
        return 0.5 * (lo + hi)
    return min(max(num / den, lo), hi)


# ---------------------------------------------------------------------------
# Default controller: inputs (SOC, SOE, demand power), output SC power share.

SOC_LABELS = ("S", "M", "B")
SOE_LABELS = ("S", "M", "B")
POWER_LABELS = ("NB", "NM", "NS", "PS", "PM", "PB")


def _default_consequent(soc: int, soe: int, p: int) -> int:
    if p <= 3:
        # Regeneration: the SC absorbs unless it is nearly full.
        return min(p + 1, 3) if soe == 3 else p
    if soe == 3:
        out = p
    elif soe == 2:
        out = max(p - 1, 4)
    else:
        # Low SC energy: keep the request small, never recharge from the battery.
        out = max(p - 2, 4)
    if soc == 1 and soe > 1:
        out = min(out + 1, 6)
    return out


def default_rules() -> RuleTable:
    rows = [
        (soc, soe, p, _default_consequent(soc, soe, p))
        for soc in range(1, 4)
        for soe in range(1, 4)
        for p in range(1, 7)
    ]
    return RuleTable(np.array(rows))


def default_template(n_dis: int = DEFAULT_N_DIS) -> FisSpec:
    """Rule table plus evenly spaced partitions (the uniform genome)."""

    def even(n_sets, lo, hi, name, labels):
        g = np.arange(1, genes_per_partition(n_sets) + 1) / (genes_per_partition(n_sets) + 1)
        corners = _corners_from_genes(g[None, :], lo, hi)[0]
        return VariablePartition(lo, hi, tuple(TrapezoidSet(*map(float, c)) for c in corners), name, labels)

    return FisSpec(
        (
            even(3, 0.0, 1.0, "soc", SOC_LABELS),
            even(3, 0.0, 1.0, "soe", SOE_LABELS),
            even(6, -1.0, 1.0, "p_dem", POWER_LABELS),
        ),
        even(6, -1.0, 1.0, "p_sc", POWER_LABELS),
        default_rules(),
        n_dis,
    )
