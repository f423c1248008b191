"""Pairwise inclusion probability matrices P with P_ij = Prob({i,j} in S-hat).

P is the expectation of the 0/1 indicator matrix of the drawn set, so it is
symmetric, positive semidefinite, and carries the marginals on its diagonal.
Exact matrices come from per-kind closed forms or support enumeration;
Monte-Carlo estimates are tagged with their sample count and per-entry
standard errors and are never accepted as PSD certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config, samplings
from .errors import CapacityError, CertificateUnavailableError, UnsupportedMethodError, ValidationError
from .samplings import SamplingSpec

PROVENANCE_CLOSED = "closed_form"
PROVENANCE_ENUM = "enumerated"
PROVENANCE_MC = "monte_carlo"

_PROVENANCE_RANK = {PROVENANCE_CLOSED: 0, PROVENANCE_ENUM: 1, PROVENANCE_MC: 2}

_CLOSED_FORM_KINDS = (
    samplings.KIND_ELEMENTARY,
    samplings.KIND_SERIAL,
    samplings.KIND_TAU_NICE,
    samplings.KIND_CTAU,
    samplings.KIND_DOUBLY_UNIFORM,
    samplings.KIND_PRODUCT,
)


@dataclass(frozen=True)
class ProbMatrix:
    """Symmetric n-by-n matrix of pairwise inclusion probabilities."""

    n: int
    entries: np.ndarray
    provenance: str
    mc_samples: int | None = None
    stderr: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        if entries.shape != (self.n, self.n):
            raise ValidationError("entries", f"expected shape ({self.n},{self.n})")
        if self.provenance not in _PROVENANCE_RANK:
            raise ValidationError("provenance", f"unknown tag {self.provenance!r}")
        slack = 1e-12 + (3.0 * self.max_stderr if self.provenance == PROVENANCE_MC else 0.0)
        if not np.allclose(entries, entries.T, atol=1e-12, rtol=0.0):
            raise ValidationError("entries", "matrix is not symmetric")
        if entries.size and (entries.min() < -slack or entries.max() > 1.0 + slack):
            raise ValidationError("entries", "entries outside [0, 1]")
        diag = np.diag(entries)
        cap = np.minimum.outer(diag, diag)
        if entries.size and np.max(entries - cap) > slack:
            raise ValidationError("entries", "off-diagonal exceeds min of its diagonal pair")

    @property
    def max_stderr(self) -> float:
        return float(self.stderr.max()) if self.stderr is not None and self.stderr.size else 0.0

    @property
    def is_exact(self) -> bool:
        return self.provenance != PROVENANCE_MC

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def check_psd(self, tol: float = config.PSD_TOL) -> bool:
        slack = tol + (3.0 * self.max_stderr if self.provenance == PROVENANCE_MC else 0.0)
        return self.min_eigenvalue() >= -slack

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "provenance": self.provenance,
            "entries": self.entries.tolist(),
        }
        if self.mc_samples is not None:
            out["mc_samples"] = self.mc_samples
            out["max_stderr"] = self.max_stderr
        return out

    @staticmethod
    def from_dict(payload: dict) -> "ProbMatrix":
        return ProbMatrix(
            n=int(payload["n"]),
            entries=np.asarray(payload["entries"], dtype=float),
            provenance=str(payload["provenance"]),
            mc_samples=payload.get("mc_samples"),
        )


def _worst_provenance(tags) -> str:
    return max(tags, key=lambda t: _PROVENANCE_RANK[t])


# ---------------------------------------------------------------------------
# Construction


def prob_matrix(
    spec: SamplingSpec,
    method: str = "auto",
    mc_samples: int = 100_000,
    rng_seed: int = 0,
    streams: int = 1,
    cap: int = config.ENUMERATION_CAP,
) -> ProbMatrix:
    """Probability matrix of a sampling.

    method:
      * ``auto`` - exact structural path (closed forms on leaves, enumeration
        where supports are explicit, combination rules on composites), falling
        back to enumeration and finally Monte-Carlo when exactness is out of
        reach.
      * ``closed_form`` - per-kind closed form; only elementary, serial,
        tau-nice, (c,tau)-distributed, doubly-uniform and product kinds.
      * ``enumerate`` - exact expectation over the enumerated support.
      * ``monte_carlo`` - empirical mean of indicator matrices over
        ``mc_samples`` draws split across ``streams`` replica streams.
    """
    samplings.validate_spec(spec)
    if method == "closed_form":
        if spec.kind not in _CLOSED_FORM_KINDS:
            raise UnsupportedMethodError(f"no closed-form probability matrix for kind {spec.kind!r}")
        return ProbMatrix(spec.n, _closed_form(spec), PROVENANCE_CLOSED)
    if method == "enumerate":
        return _from_enumeration(spec, cap)
    if method == "monte_carlo":
        return _monte_carlo(spec, mc_samples, rng_seed, streams)
    if method == "auto":
        try:
            entries, tag = _exact_entries(spec, cap)
            return ProbMatrix(spec.n, entries, tag)
        except CapacityError:
            return _monte_carlo(spec, mc_samples, rng_seed, streams)
    raise UnsupportedMethodError(f"unknown method {method!r}")


def _closed_form(spec: SamplingSpec) -> np.ndarray:
    n = spec.n
    k = spec.kind
    if k == samplings.KIND_ELEMENTARY:
        ind = np.zeros(n)
        ind[list(spec.set)] = 1.0
        return np.outer(ind, ind)
    if k == samplings.KIND_SERIAL:
        return np.diag(np.asarray(spec.q, dtype=float))
    if k == samplings.KIND_TAU_NICE:
        tau = spec.tau
        if tau == 0:
            return np.zeros((n, n))
        beta = (tau - 1) / max(n - 1, 1)
        return (tau / n) * ((1.0 - beta) * np.eye(n) + beta * np.ones((n, n)))
    if k == samplings.KIND_CTAU:
        s = len(spec.partition[0])
        tau = spec.tau
        if tau == 0:
            return np.zeros((n, n))
        s1 = max(s - 1, 1)
        out = np.full((n, n), (tau / s) ** 2)
        for block in spec.partition:
            idx = list(block)
            out[np.ix_(idx, idx)] = tau * (tau - 1) / (s * s1)
        np.fill_diagonal(out, tau / s)
        return out
    if k == samplings.KIND_DOUBLY_UNIFORM:
        first, second = samplings.cardinality_moments(spec)
        if first == 0.0:
            return np.zeros((n, n))
        beta = (second / first - 1.0) / max(n - 1, 1)
        return (first / n) * ((1.0 - beta) * np.eye(n) + beta * np.ones((n, n)))
    if k == samplings.KIND_PRODUCT:
        p = samplings.marginals(spec)
        out = np.outer(p, p)
        for block in spec.blocks:
            idx = list(block)
            out[np.ix_(idx, idx)] = 0.0
        np.fill_diagonal(out, p)
        return out
    raise UnsupportedMethodError(f"no closed form for kind {k!r}")


def _exact_entries(spec: SamplingSpec, cap: int) -> tuple[np.ndarray, str]:
    k = spec.kind
    if k in _CLOSED_FORM_KINDS:
        return _closed_form(spec), PROVENANCE_CLOSED
    if k == samplings.KIND_CONVEX:
        total = np.zeros((spec.n, spec.n))
        tags = [PROVENANCE_CLOSED]
        for w, comp in zip(spec.weights, spec.components):
            if w == 0.0:
                continue
            entries, tag = _exact_entries(comp, cap)
            total += w * entries
            tags.append(tag)
        return total, _worst_provenance(tags)
    if k == samplings.KIND_INTERSECTION:
        e1, t1 = _exact_entries(spec.components[0], cap)
        e2, t2 = _exact_entries(spec.components[1], cap)
        return e1 * e2, _worst_provenance([t1, t2])
    if k == samplings.KIND_RESTRICTION:
        entries, tag = _exact_entries(spec.components[0], cap)
        mask = np.zeros(spec.n)
        mask[list(spec.set)] = 1.0
        return entries * np.outer(mask, mask), tag
    # graph / explicit: support is explicit in the parameters.
    return _from_enumeration(spec, cap).entries, PROVENANCE_ENUM


def _from_enumeration(spec: SamplingSpec, cap: int) -> ProbMatrix:
    out = np.zeros((spec.n, spec.n))
    for s, p in samplings.enumerate_support(spec, cap):
        idx = list(s)
        out[np.ix_(idx, idx)] += p
    return ProbMatrix(spec.n, out, PROVENANCE_ENUM)


def _monte_carlo(spec: SamplingSpec, samples: int, rng_seed: int, streams: int) -> ProbMatrix:
    if samples < 1:
        raise ValidationError("mc_samples", "must be positive")
    streams = max(1, int(streams))
    counts = np.zeros((spec.n, spec.n))
    per_stream = [samples // streams] * streams
    for r in range(samples % streams):
        per_stream[r] += 1
    # Per-stream sums merged in stream order: deterministic under parallel eval.
    for stream_index, count in enumerate(per_stream):
        rng = config.rng_for_stream(rng_seed, stream_index)
        local = np.zeros_like(counts)
        for _ in range(count):
            idx = sorted(samplings._draw(spec, rng))
            local[np.ix_(idx, idx)] += 1.0
        counts += local
    mean = counts / samples
    mean = np.clip(0.5 * (mean + mean.T), 0.0, 1.0)
    stderr = np.sqrt(np.clip(mean * (1.0 - mean), 0.0, None) / samples)
    return ProbMatrix(spec.n, mean, PROVENANCE_MC, mc_samples=samples, stderr=stderr)


# ---------------------------------------------------------------------------
# Operations


def combine_convex(parts: list[tuple[float, ProbMatrix]]) -> ProbMatrix:
    """Weighted sum of probability matrices (mixture sampling)."""
    if not parts:
        raise ValidationError("parts", "empty combination")
    weights = np.array([w for w, _ in parts], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > config.PROB_SUM_TOL:
        raise ValidationError("weights", "must be nonnegative and sum to 1")
    n = parts[0][1].n
    if any(p.n != n for _, p in parts):
        raise ValidationError("parts", "dimension mismatch")
    entries = sum(w * p.entries for w, p in parts)
    stderr = None
    if any(p.provenance == PROVENANCE_MC for _, p in parts):
        stderr = sum(
            w * (p.stderr if p.stderr is not None else np.zeros((n, n))) for w, p in parts
        )
    return ProbMatrix(
        n,
        entries,
        _worst_provenance([p.provenance for _, p in parts]),
        mc_samples=min(
            (p.mc_samples for _, p in parts if p.mc_samples is not None), default=None
        ),
        stderr=stderr,
    )


def intersect(first: ProbMatrix, second: ProbMatrix) -> ProbMatrix:
    """Hadamard product; valid when the underlying samplings are independent
    (caller's responsibility)."""
    if first.n != second.n:
        raise ValidationError("entries", "dimension mismatch")
    entries = first.entries * second.entries
    stderr = None
    if first.provenance == PROVENANCE_MC or second.provenance == PROVENANCE_MC:
        se1 = first.stderr if first.stderr is not None else np.zeros_like(entries)
        se2 = second.stderr if second.stderr is not None else np.zeros_like(entries)
        stderr = np.abs(first.entries) * se2 + np.abs(second.entries) * se1
    return ProbMatrix(
        first.n,
        entries,
        _worst_provenance([first.provenance, second.provenance]),
        mc_samples=min(
            (p.mc_samples for p in (first, second) if p.mc_samples is not None), default=None
        ),
        stderr=stderr,
    )


def restrict(matrix: ProbMatrix, j) -> ProbMatrix:
    """Zero all rows and columns outside the index set ``j``."""
    idx = sorted(int(i) for i in j)
    if idx and (idx[0] < 0 or idx[-1] >= matrix.n):
        raise ValidationError("set", f"indices must lie in [0, {matrix.n})")
    mask = np.zeros(matrix.n)
    mask[idx] = 1.0
    outer = np.outer(mask, mask)
    return ProbMatrix(
        matrix.n,
        matrix.entries * outer,
        matrix.provenance,
        mc_samples=matrix.mc_samples,
        stderr=matrix.stderr * outer if matrix.stderr is not None else None,
    )


# ---------------------------------------------------------------------------
# Identity checks


@dataclass(frozen=True)
class IdentityReport:
    """Left/right values and discrepancies for the six expectation identities
    linking P to moments of the sampling."""

    mode: str  # exact | monte_carlo
    trials: int
    results: dict  # name -> {"lhs": float|None, "rhs": float|None, "discrepancy": float}

    @property
    def max_discrepancy(self) -> float:
        return max(r["discrepancy"] for r in self.results.values())

    def to_dict(self) -> dict:
        return {"mode": self.mode, "trials": self.trials, "results": self.results}


IDENTITY_NAMES = (
    "hadamard_matrix",
    "quadratic_form",
    "square_of_sum",
    "diagonal_linear",
    "second_moment",
    "first_moment",
)


def check_identities(
    spec: SamplingSpec,
    m_matrix: np.ndarray,
    h: np.ndarray,
    trials: int = 0,
    rng_seed: int = 0,
    cap: int = config.ENUMERATION_CAP,
) -> IdentityReport:
    """Verify the six identities tying P(S-hat) to expectations over draws.

    With ``trials == 0`` the expectations are computed exactly by summing over
    the enumerated support; otherwise they are Monte-Carlo averages over
    ``trials`` draws (requires trials >= 1000). Discrepancies are data, not
    errors.
    """
    samplings.validate_spec(spec)
    m_matrix = np.asarray(m_matrix, dtype=float)
    h = np.asarray(h, dtype=float)
    n = spec.n
    if m_matrix.shape != (n, n):
        raise ValidationError("m_matrix", f"expected shape ({n},{n})")
    if h.shape != (n,):
        raise ValidationError("h", f"expected shape ({n},)")

    pm = prob_matrix(spec, "auto", cap=cap)
    p_entries = pm.entries
    e = np.ones(n)

    if trials == 0:
        support = samplings.enumerate_support(spec, cap)
        draws = [(np.asarray(s, dtype=int), w) for s, w in support]
        mode = "exact"
    else:
        if trials < 1000:
            raise ValidationError("trials", "Monte-Carlo mode requires trials >= 1000")
        rng = config.rng_for_stream(rng_seed, 0)
        w = 1.0 / trials
        draws = [
            (np.asarray(sorted(samplings._draw(spec, rng)), dtype=int), w) for _ in range(trials)
        ]
        mode = "monte_carlo"

    exp_hadamard = np.zeros((n, n))
    exp_quad = 0.0
    exp_sq_sum = 0.0
    exp_lin = 0.0
    exp_card2 = 0.0
    exp_card = 0.0
    for idx, w in draws:
        if idx.size:
            sub = m_matrix[np.ix_(idx, idx)]
            hs = h[idx]
            exp_hadamard[np.ix_(idx, idx)] += w * sub
            exp_quad += w * float(hs @ sub @ hs)
            total = float(hs.sum())
            exp_sq_sum += w * total * total
            exp_lin += w * total
            exp_card2 += w * float(idx.size) ** 2
            exp_card += w * float(idx.size)

    lhs_quad = float(h @ (p_entries * m_matrix) @ h)
    lhs_sq = float(h @ p_entries @ h)
    lhs_lin = float(np.diag(p_entries) @ h)
    lhs_card2 = float(e @ p_entries @ e)
    lhs_card = float(np.trace(p_entries))

    results = {
        "hadamard_matrix": {
            "lhs": None,
            "rhs": None,
            "discrepancy": float(np.max(np.abs(p_entries * m_matrix - exp_hadamard))),
        },
        "quadratic_form": {
            "lhs": lhs_quad,
            "rhs": exp_quad,
            "discrepancy": abs(lhs_quad - exp_quad),
        },
        "square_of_sum": {"lhs": lhs_sq, "rhs": exp_sq_sum, "discrepancy": abs(lhs_sq - exp_sq_sum)},
        "diagonal_linear": {"lhs": lhs_lin, "rhs": exp_lin, "discrepancy": abs(lhs_lin - exp_lin)},
        "second_moment": {"lhs": lhs_card2, "rhs": exp_card2, "discrepancy": abs(lhs_card2 - exp_card2)},
        "first_moment": {"lhs": lhs_card, "rhs": exp_card, "discrepancy": abs(lhs_card - exp_card)},
    }
    return IdentityReport(mode=mode, trials=trials, results=results)


# ---------------------------------------------------------------------------
# Persistence


def write_csv(matrix: ProbMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# prob_matrix n={matrix.n} provenance={matrix.provenance}\n")
        for row in matrix.entries:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_csv(path) -> ProbMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# prob_matrix"):
            raise ValidationError("header", "missing prob_matrix header")
        fields = dict(part.split("=", 1) for part in header.split()[2:])
        n = int(fields["n"])
        provenance = fields.get("provenance", PROVENANCE_ENUM)
        rows = [
            [float(x) for x in line.strip().split(",")] for line in fh if line.strip()
        ]
    entries = np.asarray(rows, dtype=float)
    if entries.shape != (n, n):
        raise ValidationError("entries", f"expected {n} rows of {n} entries")
    return ProbMatrix(n, entries, provenance)


def require_exact(matrix: ProbMatrix, purpose: str) -> ProbMatrix:
    """Reject Monte-Carlo matrices where a deterministic certificate is needed."""
    if not matrix.is_exact:
        raise CertificateUnavailableError(
            f"{purpose} needs an exact probability matrix; this one is a Monte-Carlo "
            f"estimate ({matrix.mc_samples} samples)"
        )
    return matrix
