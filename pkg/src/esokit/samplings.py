"""Coordinate samplings: random subsets of {0, ..., n-1}.

A sampling is described declaratively by a :class:`SamplingSpec` (kind plus
parameters) and can be drawn from, enumerated exactly (small supports), or
combined with other samplings (mixtures, independent intersections,
restrictions to a fixed index set).

All indices are 0-based throughout the library. Probability vectors must sum
to one within ``config.PROB_SUM_TOL``; nothing is ever renormalized silently.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import config
from .errors import CapacityError, ValidationError

KIND_ELEMENTARY = "elementary"
KIND_SERIAL = "serial"
KIND_TAU_NICE = "tau_nice"
KIND_CTAU = "ctau_distributed"
KIND_DOUBLY_UNIFORM = "doubly_uniform"
KIND_PRODUCT = "product"
KIND_GRAPH = "graph"
KIND_CONVEX = "convex_combination"
KIND_INTERSECTION = "intersection"
KIND_RESTRICTION = "restriction"
KIND_EXPLICIT = "explicit"

ALL_KINDS = (
    KIND_ELEMENTARY,
    KIND_SERIAL,
    KIND_TAU_NICE,
    KIND_CTAU,
    KIND_DOUBLY_UNIFORM,
    KIND_PRODUCT,
    KIND_GRAPH,
    KIND_CONVEX,
    KIND_INTERSECTION,
    KIND_RESTRICTION,
    KIND_EXPLICIT,
)

# Kinds whose support is explicit in the parameters (enumerable at any n).
_POLY_SUPPORT_KINDS = {KIND_ELEMENTARY, KIND_SERIAL, KIND_PRODUCT, KIND_GRAPH, KIND_EXPLICIT}


def _as_index_tuple(items: Iterable[int], n: int, field_name: str) -> tuple[int, ...]:
    out = tuple(sorted(int(i) for i in items))
    if len(set(out)) != len(out):
        raise ValidationError(field_name, "duplicate indices")
    if out and (out[0] < 0 or out[-1] >= n):
        raise ValidationError(field_name, f"indices must lie in [0, {n})")
    return out


@dataclass(frozen=True)
class ConflictGraph:
    """Undirected graph on n vertices; an edge joins coordinates that co-occur
    in some row support of a data matrix."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n <= 0:
            raise ValidationError("n", "must be positive")
        normalized = set()
        for (a, b) in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValidationError("edges", f"self-loop at {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValidationError("edges", f"edge ({a},{b}) out of range")
            normalized.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    def is_independent(self, subset: Iterable[int]) -> bool:
        s = set(subset)
        return not any(a in s and b in s for (a, b) in self.edges)


@dataclass(frozen=True)
class SamplingSpec:
    """Declarative description of a sampling distribution.

    Only the fields relevant to ``kind`` are set; see the factory functions
    (:func:`tau_nice`, :func:`serial`, ...) for the per-kind payloads.
    """

    n: int
    kind: str
    set: tuple[int, ...] | None = None
    q: tuple[float, ...] | None = None
    tau: int | None = None
    partition: tuple[tuple[int, ...], ...] | None = None
    blocks: tuple[tuple[int, ...], ...] | None = None
    members: tuple[tuple[int, ...], ...] | None = None
    weights: tuple[float, ...] | None = None
    components: tuple["SamplingSpec", ...] | None = None
    graph: ConflictGraph | None = field(default=None, compare=False)

    def validate(self) -> "SamplingSpec":
        validate_spec(self)
        return self

    def to_dict(self) -> dict:
        return spec_to_dict(self)

    @staticmethod
    def from_dict(payload: dict) -> "SamplingSpec":
        return spec_from_dict(payload)


# ---------------------------------------------------------------------------
# Factories


def elementary(n: int, s: Iterable[int]) -> SamplingSpec:
    """Deterministic sampling that always returns the set ``s``."""
    return SamplingSpec(n=n, kind=KIND_ELEMENTARY, set=_as_index_tuple(s, n, "set")).validate()


def serial(q: Sequence[float]) -> SamplingSpec:
    """Singleton sampling: {i} is drawn with probability q[i]."""
    return SamplingSpec(n=len(q), kind=KIND_SERIAL, q=tuple(float(x) for x in q)).validate()


def tau_nice(n: int, tau: int) -> SamplingSpec:
    """Uniform law over all subsets of cardinality tau (tau = 0 is nil)."""
    return SamplingSpec(n=n, kind=KIND_TAU_NICE, tau=int(tau)).validate()


def ctau_distributed(partition: Sequence[Iterable[int]], tau: int) -> SamplingSpec:
    """Union of independent tau-nice draws on c equal-size blocks of a partition."""
    blocks = tuple(tuple(sorted(int(i) for i in b)) for b in partition)
    n = sum(len(b) for b in blocks)
    return SamplingSpec(n=n, kind=KIND_CTAU, partition=blocks, tau=int(tau)).validate()


def doubly_uniform(q: Sequence[float]) -> SamplingSpec:
    """Cardinality-distribution sampling: draw tau ~ q then a uniform tau-subset."""
    return SamplingSpec(n=len(q) - 1, kind=KIND_DOUBLY_UNIFORM, q=tuple(float(x) for x in q)).validate()


def product_sampling(blocks: Sequence[Iterable[int]]) -> SamplingSpec:
    """One uniformly chosen element per block of a partition (blocks may differ in size)."""
    blk = tuple(tuple(sorted(int(i) for i in b)) for b in blocks)
    n = sum(len(b) for b in blk)
    return SamplingSpec(n=n, kind=KIND_PRODUCT, blocks=blk).validate()


def graph_sampling(
    n: int,
    members: Sequence[Iterable[int]],
    weights: Sequence[float],
    graph: ConflictGraph,
) -> SamplingSpec:
    """Weighted support over independent sets of a conflict graph.

    The distribution is supplied, never synthesized; validation checks that
    every member set is independent in ``graph``.
    """
    mem = tuple(_as_index_tuple(s, n, "members") for s in members)
    return SamplingSpec(
        n=n,
        kind=KIND_GRAPH,
        members=mem,
        weights=tuple(float(w) for w in weights),
        graph=graph,
    ).validate()


def convex_combination(
    weights: Sequence[float], components: Sequence[SamplingSpec]
) -> SamplingSpec:
    """Mixture sampling: pick component t with probability weights[t], then draw from it."""
    comps = tuple(components)
    n = comps[0].n if comps else 0
    return SamplingSpec(
        n=n,
        kind=KIND_CONVEX,
        weights=tuple(float(w) for w in weights),
        components=comps,
    ).validate()


def intersection(first: SamplingSpec, second: SamplingSpec) -> SamplingSpec:
    """Intersection of two samplings drawn independently."""
    return SamplingSpec(n=first.n, kind=KIND_INTERSECTION, components=(first, second)).validate()


def restriction(spec: SamplingSpec, j: Iterable[int]) -> SamplingSpec:
    """Sampling whose draws are intersections of ``spec`` draws with the fixed set ``j``."""
    return SamplingSpec(
        n=spec.n,
        kind=KIND_RESTRICTION,
        components=(spec,),
        set=_as_index_tuple(j, spec.n, "set"),
    ).validate()


def explicit(n: int, members: Sequence[Iterable[int]], weights: Sequence[float]) -> SamplingSpec:
    """Fully explicit distribution: list of (set, probability) pairs."""
    mem = tuple(_as_index_tuple(s, n, "members") for s in members)
    return SamplingSpec(
        n=n, kind=KIND_EXPLICIT, members=mem, weights=tuple(float(w) for w in weights)
    ).validate()


# ---------------------------------------------------------------------------
# Validation


def _check_prob_vector(q: Sequence[float], field_name: str) -> None:
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(field_name, "must be a vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(field_name, "contains non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(field_name, "negative probability")
    if abs(float(arr.sum()) - 1.0) > config.PROB_SUM_TOL:
        raise ValidationError(field_name, f"probabilities sum to {arr.sum()!r}, not 1")


def _check_partition(blocks: Sequence[tuple[int, ...]], n: int, field_name: str) -> None:
    seen: set[int] = set()
    for b in blocks:
        if len(b) == 0:
            raise ValidationError(field_name, "empty block")
        for i in b:
            if not (0 <= i < n):
                raise ValidationError(field_name, f"index {i} out of range")
            if i in seen:
                raise ValidationError(field_name, f"index {i} appears in two blocks")
            seen.add(i)
    if len(seen) != n:
        raise ValidationError(field_name, "blocks do not cover the ground set")


def validate_spec(spec: SamplingSpec) -> None:
    """Check all invariants of ``spec``, raising ValidationError with the field name."""
    if spec.n <= 0:
        raise ValidationError("n", "must be positive")
    if spec.kind not in ALL_KINDS:
        raise ValidationError("kind", f"unknown kind {spec.kind!r}")

    k = spec.kind
    if k == KIND_ELEMENTARY:
        if spec.set is None:
            raise ValidationError("set", "required for elementary sampling")
        _as_index_tuple(spec.set, spec.n, "set")
    elif k == KIND_SERIAL:
        if spec.q is None or len(spec.q) != spec.n:
            raise ValidationError("q", "must have length n")
        _check_prob_vector(spec.q, "q")
    elif k == KIND_TAU_NICE:
        if spec.tau is None or not (0 <= spec.tau <= spec.n):
            raise ValidationError("tau", "must lie in {0, ..., n}")
    elif k == KIND_CTAU:
        if spec.partition is None or not spec.partition:
            raise ValidationError("partition", "required")
        _check_partition(spec.partition, spec.n, "partition")
        sizes = {len(b) for b in spec.partition}
        if len(sizes) != 1:
            raise ValidationError("partition", "blocks must all have equal size")
        s = sizes.pop()
        if spec.tau is None or not (0 <= spec.tau <= s):
            raise ValidationError("tau", f"must lie in {{0, ..., {s}}}")
    elif k == KIND_DOUBLY_UNIFORM:
        if spec.q is None or len(spec.q) != spec.n + 1:
            raise ValidationError("q", "must have length n + 1 (one weight per cardinality)")
        _check_prob_vector(spec.q, "q")
    elif k == KIND_PRODUCT:
        if spec.blocks is None or not spec.blocks:
            raise ValidationError("blocks", "required")
        _check_partition(spec.blocks, spec.n, "blocks")
    elif k in (KIND_GRAPH, KIND_EXPLICIT):
        if spec.members is None or spec.weights is None:
            raise ValidationError("members", "members and weights required")
        if len(spec.members) != len(spec.weights):
            raise ValidationError("weights", "length mismatch with members")
        for s in spec.members:
            _as_index_tuple(s, spec.n, "members")
        _check_prob_vector(spec.weights, "weights")
        if k == KIND_GRAPH:
            if spec.graph is None:
                raise ValidationError("graph", "conflict graph required")
            if spec.graph.n != spec.n:
                raise ValidationError("graph", "graph size differs from n")
            for s in spec.members:
                if not spec.graph.is_independent(s):
                    raise ValidationError("members", f"set {s} is not independent in the conflict graph")
    elif k == KIND_CONVEX:
        if spec.components is None or spec.weights is None or not spec.components:
            raise ValidationError("components", "components and weights required")
        if len(spec.components) != len(spec.weights):
            raise ValidationError("weights", "length mismatch with components")
        _check_prob_vector(spec.weights, "weights")
        for c in spec.components:
            if c.n != spec.n:
                raise ValidationError("components", "all components must share n")
            validate_spec(c)
    elif k == KIND_INTERSECTION:
        if spec.components is None or len(spec.components) != 2:
            raise ValidationError("components", "exactly two components required")
        for c in spec.components:
            if c.n != spec.n:
                raise ValidationError("components", "components must share n")
            validate_spec(c)
    elif k == KIND_RESTRICTION:
        if spec.components is None or len(spec.components) != 1:
            raise ValidationError("components", "exactly one component required")
        if spec.set is None:
            raise ValidationError("set", "restriction set required")
        _as_index_tuple(spec.set, spec.n, "set")
        if spec.components[0].n != spec.n:
            raise ValidationError("components", "component must share n")
        validate_spec(spec.components[0])


# ---------------------------------------------------------------------------
# JSON round trip


def spec_to_dict(spec: SamplingSpec) -> dict:
    out: dict = {"n": spec.n, "kind": spec.kind}
    if spec.set is not None:
        out["set"] = list(spec.set)
    if spec.q is not None:
        out["q"] = list(spec.q)
    if spec.tau is not None:
        out["tau"] = spec.tau
    if spec.partition is not None:
        out["partition"] = [list(b) for b in spec.partition]
    if spec.blocks is not None:
        out["blocks"] = [list(b) for b in spec.blocks]
    if spec.members is not None:
        out["members"] = [list(s) for s in spec.members]
    if spec.weights is not None:
        out["weights"] = list(spec.weights)
    if spec.components is not None:
        out["components"] = [spec_to_dict(c) for c in spec.components]
    if spec.graph is not None:
        out["graph_edges"] = [list(e) for e in spec.graph.edges]
    return out


def spec_from_dict(payload: dict) -> SamplingSpec:
    try:
        n = int(payload["n"])
        kind = str(payload["kind"])
    except KeyError as e:
        raise ValidationError(str(e.args[0]), "missing required key") from e
    graph = None
    if "graph_edges" in payload:
        graph = ConflictGraph(n=n, edges=tuple((int(a), int(b)) for a, b in payload["graph_edges"]))
    spec = SamplingSpec(
        n=n,
        kind=kind,
        set=tuple(sorted(int(i) for i in payload["set"])) if "set" in payload else None,
        q=tuple(float(x) for x in payload["q"]) if "q" in payload else None,
        tau=int(payload["tau"]) if "tau" in payload else None,
        partition=tuple(tuple(sorted(int(i) for i in b)) for b in payload["partition"])
        if "partition" in payload
        else None,
        blocks=tuple(tuple(sorted(int(i) for i in b)) for b in payload["blocks"])
        if "blocks" in payload
        else None,
        members=tuple(tuple(sorted(int(i) for i in s)) for s in payload["members"])
        if "members" in payload
        else None,
        weights=tuple(float(w) for w in payload["weights"]) if "weights" in payload else None,
        components=tuple(spec_from_dict(c) for c in payload["components"])
        if "components" in payload
        else None,
        graph=graph,
    )
    return spec.validate()


# ---------------------------------------------------------------------------
# Drawing


def _partial_fisher_yates(pool: np.ndarray, tau: int, rng: np.random.Generator) -> np.ndarray:
    # Exact uniform tau-subset in O(len(pool)) memory, O(tau) swaps.
    arr = pool.copy()
    n = len(arr)
    for k in range(tau):
        j = int(rng.integers(k, n))
        arr[k], arr[j] = arr[j], arr[k]
    return arr[:tau]


def _draw(spec: SamplingSpec, rng: np.random.Generator) -> frozenset[int]:
    k = spec.kind
    if k == KIND_ELEMENTARY:
        return frozenset(spec.set)
    if k == KIND_SERIAL:
        i = int(rng.choice(spec.n, p=np.asarray(spec.q)))
        return frozenset((i,))
    if k == KIND_TAU_NICE:
        picked = _partial_fisher_yates(np.arange(spec.n), spec.tau, rng)
        return frozenset(int(i) for i in picked)
    if k == KIND_CTAU:
        out: set[int] = set()
        for block in spec.partition:
            picked = _partial_fisher_yates(np.asarray(block), spec.tau, rng)
            out.update(int(i) for i in picked)
        return frozenset(out)
    if k == KIND_DOUBLY_UNIFORM:
        tau = int(rng.choice(spec.n + 1, p=np.asarray(spec.q)))
        picked = _partial_fisher_yates(np.arange(spec.n), tau, rng)
        return frozenset(int(i) for i in picked)
    if k == KIND_PRODUCT:
        return frozenset(int(b[int(rng.integers(len(b)))]) for b in spec.blocks)
    if k in (KIND_GRAPH, KIND_EXPLICIT):
        idx = int(rng.choice(len(spec.members), p=np.asarray(spec.weights)))
        return frozenset(spec.members[idx])
    if k == KIND_CONVEX:
        t = int(rng.choice(len(spec.components), p=np.asarray(spec.weights)))
        return _draw(spec.components[t], rng)
    if k == KIND_INTERSECTION:
        first = _draw(spec.components[0], rng)
        second = _draw(spec.components[1], rng)
        return first & second
    if k == KIND_RESTRICTION:
        return _draw(spec.components[0], rng) & frozenset(spec.set)
    raise ValidationError("kind", f"unknown kind {k!r}")


def draw(spec: SamplingSpec, rng_seed: int, stream_index: int = 0) -> frozenset[int]:
    """Draw one realization of the sampling.

    The result is a pure function of (spec, rng_seed, stream_index); replicas
    running in parallel use distinct stream indices.
    """
    validate_spec(spec)
    return _draw(spec, config.rng_for_stream(rng_seed, stream_index))


# ---------------------------------------------------------------------------
# Exact enumeration


def _merge(into: dict[tuple[int, ...], float], key: tuple[int, ...], prob: float) -> None:
    if prob != 0.0:
        into[key] = into.get(key, 0.0) + prob


def enumerate_support(
    spec: SamplingSpec, cap: int = config.ENUMERATION_CAP
) -> list[tuple[tuple[int, ...], float]]:
    """Exact distribution of the sampling as a sorted list of (set, probability).

    Kinds with exponential support require n <= cap; kinds whose support is
    explicit in the parameters enumerate at any n (subject to the global
    support-size guard). Raises CapacityError when enumeration is infeasible;
    the Monte-Carlo paths remain available in that case.
    """
    validate_spec(spec)
    dist = _enumerate(spec, cap)
    total = math.fsum(dist.values())
    if abs(total - 1.0) > 10 * config.PROB_SUM_TOL:
        raise ValidationError("weights", f"enumerated mass {total!r} differs from 1")
    return sorted(dist.items(), key=lambda kv: (len(kv[0]), kv[0]))


def _require_cap(spec: SamplingSpec, cap: int) -> None:
    if spec.n > cap:
        raise CapacityError(
            f"{spec.kind} with n={spec.n} exceeds the enumeration cap {cap}; "
            "use the Monte-Carlo path instead"
        )


def _guard_support(size: int) -> None:
    if size > config.MAX_ENUM_SUPPORT:
        raise CapacityError(
            f"support of {size} sets exceeds the {config.MAX_ENUM_SUPPORT} ceiling; "
            "use the Monte-Carlo path instead"
        )


def _enumerate(spec: SamplingSpec, cap: int) -> dict[tuple[int, ...], float]:
    k = spec.kind
    out: dict[tuple[int, ...], float] = {}
    if k == KIND_ELEMENTARY:
        out[spec.set] = 1.0
    elif k == KIND_SERIAL:
        for i, qi in enumerate(spec.q):
            _merge(out, (i,), qi)
    elif k == KIND_TAU_NICE:
        _require_cap(spec, cap)
        count = math.comb(spec.n, spec.tau)
        _guard_support(count)
        prob = 1.0 / count
        for s in itertools.combinations(range(spec.n), spec.tau):
            out[s] = prob
    elif k == KIND_CTAU:
        _require_cap(spec, cap)
        per_block = [list(itertools.combinations(b, spec.tau)) for b in spec.partition]
        size = math.prod(len(ch) for ch in per_block)
        _guard_support(size)
        prob = 1.0 / size
        for combo in itertools.product(*per_block):
            s = tuple(sorted(i for part in combo for i in part))
            out[s] = prob
    elif k == KIND_DOUBLY_UNIFORM:
        _require_cap(spec, cap)
        _guard_support(sum(math.comb(spec.n, t) for t, qt in enumerate(spec.q) if qt > 0))
        for t, qt in enumerate(spec.q):
            if qt == 0.0:
                continue
            prob = qt / math.comb(spec.n, t)
            for s in itertools.combinations(range(spec.n), t):
                _merge(out, s, prob)
    elif k == KIND_PRODUCT:
        size = math.prod(len(b) for b in spec.blocks)
        _guard_support(size)
        prob = 1.0 / size
        for combo in itertools.product(*spec.blocks):
            out[tuple(sorted(combo))] = prob
    elif k in (KIND_GRAPH, KIND_EXPLICIT):
        for s, w in zip(spec.members, spec.weights):
            _merge(out, s, w)
    elif k == KIND_CONVEX:
        for w, comp in zip(spec.weights, spec.components):
            if w == 0.0:
                continue
            for s, p in _enumerate(comp, cap).items():
                _merge(out, s, w * p)
            _guard_support(len(out))
    elif k == KIND_INTERSECTION:
        first = _enumerate(spec.components[0], cap)
        second = _enumerate(spec.components[1], cap)
        _guard_support(len(first) * len(second))
        for s1, p1 in first.items():
            set1 = set(s1)
            for s2, p2 in second.items():
                _merge(out, tuple(sorted(set1.intersection(s2))), p1 * p2)
    elif k == KIND_RESTRICTION:
        j = set(spec.set)
        for s, p in _enumerate(spec.components[0], cap).items():
            _merge(out, tuple(sorted(j.intersection(s))), p)
    else:
        raise ValidationError("kind", f"unknown kind {k!r}")
    return out


# ---------------------------------------------------------------------------
# Marginals, predicates, moments


def marginals(spec: SamplingSpec) -> np.ndarray:
    """Inclusion probabilities p_i = Prob(i in S-hat), exact for every kind."""
    validate_spec(spec)
    return _marginals(spec)


def _marginals(spec: SamplingSpec) -> np.ndarray:
    k = spec.kind
    n = spec.n
    if k == KIND_ELEMENTARY:
        p = np.zeros(n)
        p[list(spec.set)] = 1.0
        return p
    if k == KIND_SERIAL:
        return np.asarray(spec.q, dtype=float)
    if k == KIND_TAU_NICE:
        return np.full(n, spec.tau / n)
    if k == KIND_CTAU:
        s = len(spec.partition[0])
        return np.full(n, spec.tau / s)
    if k == KIND_DOUBLY_UNIFORM:
        mean_card = float(np.dot(spec.q, np.arange(n + 1)))
        return np.full(n, mean_card / n)
    if k == KIND_PRODUCT:
        p = np.zeros(n)
        for b in spec.blocks:
            p[list(b)] = 1.0 / len(b)
        return p
    if k in (KIND_GRAPH, KIND_EXPLICIT):
        p = np.zeros(n)
        for s, w in zip(spec.members, spec.weights):
            p[list(s)] += w
        return p
    if k == KIND_CONVEX:
        p = np.zeros(n)
        for w, comp in zip(spec.weights, spec.components):
            p += w * _marginals(comp)
        return p
    if k == KIND_INTERSECTION:
        return _marginals(spec.components[0]) * _marginals(spec.components[1])
    if k == KIND_RESTRICTION:
        p = _marginals(spec.components[0]).copy()
        mask = np.zeros(n, dtype=bool)
        mask[list(spec.set)] = True
        p[~mask] = 0.0
        return p
    raise ValidationError("kind", f"unknown kind {k!r}")


def is_proper(spec: SamplingSpec) -> bool:
    """True when every coordinate has positive inclusion probability."""
    return bool(np.all(marginals(spec) > 0.0))


def is_nil(spec: SamplingSpec) -> bool:
    """True when the sampling draws the empty set with probability one."""
    # All marginals zero forces |S-hat| = 0 almost surely, and conversely.
    return bool(np.all(marginals(spec) == 0.0))


@dataclass(frozen=True)
class Moments:
    """First and second moment of the sampling cardinality |S-hat|."""

    first: float
    second: float
    method: str  # closed_form | enumerated | monte_carlo
    stderr_first: float = 0.0
    stderr_second: float = 0.0

    def __iter__(self):
        return iter((self.first, self.second))


def cardinality_moments(
    spec: SamplingSpec,
    mc_samples: int = 100_000,
    rng_seed: int = 0,
    cap: int = config.ENUMERATION_CAP,
) -> Moments:
    """(E|S-hat|, E|S-hat|^2), exact via closed form or enumeration when
    feasible, otherwise Monte-Carlo with reported standard errors."""
    validate_spec(spec)
    closed = _closed_form_moments(spec)
    if closed is not None:
        return closed
    try:
        support = enumerate_support(spec, cap)
    except CapacityError:
        rng = config.rng_for_stream(rng_seed, 0)
        sizes = np.fromiter(
            (len(_draw(spec, rng)) for _ in range(mc_samples)), dtype=float, count=mc_samples
        )
        sq = sizes**2
        root = math.sqrt(mc_samples)
        return Moments(
            float(sizes.mean()),
            float(sq.mean()),
            "monte_carlo",
            float(sizes.std(ddof=1) / root),
            float(sq.std(ddof=1) / root),
        )
    first = math.fsum(len(s) * p for s, p in support)
    second = math.fsum(len(s) ** 2 * p for s, p in support)
    return Moments(first, second, "enumerated")


def _closed_form_moments(spec: SamplingSpec) -> Moments | None:
    k = spec.kind
    if k == KIND_ELEMENTARY:
        c = float(len(spec.set))
        return Moments(c, c * c, "closed_form")
    if k == KIND_SERIAL:
        return Moments(1.0, 1.0, "closed_form")
    if k == KIND_TAU_NICE:
        return Moments(float(spec.tau), float(spec.tau) ** 2, "closed_form")
    if k == KIND_CTAU:
        c = float(spec.tau * len(spec.partition))
        return Moments(c, c * c, "closed_form")
    if k == KIND_DOUBLY_UNIFORM:
        taus = np.arange(spec.n + 1, dtype=float)
        q = np.asarray(spec.q)
        return Moments(float(q @ taus), float(q @ taus**2), "closed_form")
    if k == KIND_PRODUCT:
        c = float(len(spec.blocks))
        return Moments(c, c * c, "closed_form")
    if k in (KIND_GRAPH, KIND_EXPLICIT):
        sizes = np.array([len(s) for s in spec.members], dtype=float)
        w = np.asarray(spec.weights)
        return Moments(float(w @ sizes), float(w @ sizes**2), "closed_form")
    if k == KIND_CONVEX:
        parts = [_closed_form_moments(c) for c in spec.components]
        if any(p is None for p in parts):
            return None
        first = sum(w * p.first for w, p in zip(spec.weights, parts))
        second = sum(w * p.second for w, p in zip(spec.weights, parts))
        return Moments(float(first), float(second), "closed_form")
    # Intersections and restrictions need the joint pairwise law; handled by
    # enumeration or Monte-Carlo in cardinality_moments.
    return None


def cardinality_cap(spec: SamplingSpec) -> int:
    """Smallest structural tau with |S-hat| <= tau surely (certified, exact)."""
    k = spec.kind
    if k == KIND_ELEMENTARY:
        return len(spec.set)
    if k == KIND_SERIAL:
        return 1
    if k == KIND_TAU_NICE:
        return spec.tau
    if k == KIND_CTAU:
        return spec.tau * len(spec.partition)
    if k == KIND_DOUBLY_UNIFORM:
        positive = [t for t, qt in enumerate(spec.q) if qt > 0]
        return max(positive) if positive else 0
    if k == KIND_PRODUCT:
        return len(spec.blocks)
    if k in (KIND_GRAPH, KIND_EXPLICIT):
        sizes = [len(s) for s, w in zip(spec.members, spec.weights) if w > 0]
        return max(sizes) if sizes else 0
    if k == KIND_CONVEX:
        caps = [cardinality_cap(c) for c, w in zip(spec.components, spec.weights) if w > 0]
        return max(caps) if caps else 0
    if k == KIND_INTERSECTION:
        return min(cardinality_cap(spec.components[0]), cardinality_cap(spec.components[1]))
    if k == KIND_RESTRICTION:
        return min(cardinality_cap(spec.components[0]), len(spec.set))
    raise ValidationError("kind", f"unknown kind {k!r}")


def is_certified_uniform(spec: SamplingSpec) -> bool:
    """Kinds whose marginals are structurally constant (tau-nice, doubly
    uniform, equal-block (c,tau)-distributed)."""
    return spec.kind in (KIND_TAU_NICE, KIND_DOUBLY_UNIFORM, KIND_CTAU)


# ---------------------------------------------------------------------------
# Conflict graph from data


def build_conflict_graph(data) -> ConflictGraph:
    """Graph joining coordinate pairs that co-occur in some row support of
    ``data`` (any object exposing ``n`` and ``row_supports``)."""
    edges: set[tuple[int, int]] = set()
    for support in data.row_supports:
        items = sorted(int(i) for i in support)
        for a_idx in range(len(items)):
            for b_idx in range(a_idx + 1, len(items)):
                edges.add((items[a_idx], items[b_idx]))
    return ConflictGraph(n=data.n, edges=tuple(sorted(edges)))


# ---------------------------------------------------------------------------
# Random spec generation (verification batteries and tests)


def random_spec(
    rng: np.random.Generator,
    n: int,
    max_depth: int = 2,
    require_nonnil: bool = False,
) -> SamplingSpec:
    """Random enumerable spec over [n], mixing every kind; used by the
    identity battery and the property-test corpora."""
    for _ in range(200):
        spec = _random_spec(rng, n, max_depth)
        if require_nonnil and is_nil(spec):
            continue
        return spec
    raise RuntimeError("failed to generate a non-nil spec")


def _random_partition(rng: np.random.Generator, n: int, parts: int) -> list[list[int]]:
    order = rng.permutation(n)
    cuts = sorted(rng.choice(np.arange(1, n), size=parts - 1, replace=False)) if parts > 1 else []
    blocks, start = [], 0
    for c in list(cuts) + [n]:
        blocks.append(sorted(int(i) for i in order[start:c]))
        start = c
    return blocks


def _random_spec(rng: np.random.Generator, n: int, depth: int) -> SamplingSpec:
    leaf_kinds = ["elementary", "serial", "tau_nice", "doubly_uniform", "explicit", "product"]
    if n >= 2:
        leaf_kinds.append("ctau")
    kinds = leaf_kinds + (["convex", "intersection", "restriction"] if depth > 0 else [])
    k = kinds[int(rng.integers(len(kinds)))]
    if k == "elementary":
        mask = rng.random(n) < 0.5
        return elementary(n, np.flatnonzero(mask))
    if k == "serial":
        q = rng.dirichlet(np.ones(n))
        return serial(q / q.sum())
    if k == "tau_nice":
        return tau_nice(n, int(rng.integers(0, n + 1)))
    if k == "doubly_uniform":
        q = rng.dirichlet(np.ones(n + 1))
        return doubly_uniform(q / q.sum())
    if k == "explicit":
        count = int(rng.integers(1, 6))
        members = []
        for _ in range(count):
            mask = rng.random(n) < 0.5
            members.append(tuple(int(i) for i in np.flatnonzero(mask)))
        w = rng.dirichlet(np.ones(count))
        return explicit(n, members, w / w.sum())
    if k == "product":
        parts = int(rng.integers(1, n + 1))
        return product_sampling(_random_partition(rng, n, parts))
    if k == "ctau":
        divisors = [c for c in range(1, n + 1) if n % c == 0]
        c = divisors[int(rng.integers(len(divisors)))]
        s = n // c
        return ctau_distributed(_random_partition_equal(rng, n, c), int(rng.integers(0, s + 1)))
    if k == "convex":
        count = int(rng.integers(2, 4))
        comps = [_random_spec(rng, n, depth - 1) for _ in range(count)]
        w = rng.dirichlet(np.ones(count))
        return convex_combination(w / w.sum(), comps)
    if k == "intersection":
        return intersection(_random_spec(rng, n, depth - 1), _random_spec(rng, n, depth - 1))
    if k == "restriction":
        mask = rng.random(n) < 0.7
        j = np.flatnonzero(mask)
        if len(j) == 0:
            j = np.array([int(rng.integers(n))])
        return restriction(_random_spec(rng, n, depth - 1), j)
    raise AssertionError(k)


def _random_partition_equal(rng: np.random.Generator, n: int, c: int) -> list[list[int]]:
    order = rng.permutation(n)
    s = n // c
    return [sorted(int(i) for i in order[l * s : (l + 1) * s]) for l in range(c)]
