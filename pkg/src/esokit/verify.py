"""Empirical and exhaustive validation of the overapproximation inequality.

The quadratic check evaluates, for f(x) = 0.5 ||Ax||^2, the full three-term
inequality

    E[f(x + h_S)] <= f(x) + sum_i p_i grad_i f(x) h_i + 0.5 sum_i p_i v_i h_i^2

over the enumerated support (exact) or over seeded draws (statistical, with a
one-sided z-slack). The matrix-form check re-exports the PSD certificate and
produces a violating direction when the margin is negative. The identity
battery sweeps random samplings and matrices against brute-force expectation
oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from . import config, probability, samplings
from .datamatrix import DataMatrix
from .errors import ValidationError
from .samplings import SamplingSpec

EXHAUSTIVE_TOL = 1e-10


@dataclass(frozen=True)
class EsoCheckReport:
    """Worst-point summary of the quadratic inequality check."""

    mode: str  # exhaustive | monte_carlo
    trials: int
    lhs_mean: float
    lhs_stderr: float
    rhs: float
    slack: float
    passed: bool
    points_tested: int
    details: tuple[dict, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "trials": self.trials,
            "lhs_mean": self.lhs_mean,
            "lhs_stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "points_tested": self.points_tested,
            "details": [dict(d) for d in self.details],
        }


def canonical_points(
    data: DataMatrix, spec: SamplingSpec, v: np.ndarray, rng_seed: int = 0
) -> list[tuple[np.ndarray, np.ndarray, str]]:
    """The canonical (x, h) grid: x in {0, ones, random unit}, h in the basis
    vectors, ones, a random unit vector, and the certificate's bottom
    eigenvector when an exact certificate exists."""
    n = data.n
    rng = config.rng_for_stream(rng_seed, 0)
    x_rand = rng.standard_normal(n)
    x_rand /= np.linalg.norm(x_rand)
    h_rand = rng.standard_normal(n)
    h_rand /= np.linalg.norm(h_rand)

    hs: list[tuple[np.ndarray, str]] = [(np.eye(n)[i], f"e{i}") for i in range(n)]
    hs.append((np.ones(n), "ones"))
    hs.append((h_rand, "random_unit"))
    pm = probability.prob_matrix(spec, "auto")
    if pm.is_exact and n <= config.DENSE_EIG_CAP:
        certificate = np.diag(np.asarray(v) * samplings.marginals(spec)) - pm.entries * data.gram()
        _, vecs = np.linalg.eigh(certificate)
        hs.append((vecs[:, 0], "certificate_bottom"))

    xs = [(np.zeros(n), "zero"), (np.ones(n), "ones"), (x_rand, "random_unit")]
    return [(x, h, f"x={xl},h={hl}") for x, xl in xs for h, hl in hs]


def check_eso_quadratic(
    data: DataMatrix,
    spec: SamplingSpec,
    v: np.ndarray,
    points: list[tuple[np.ndarray, np.ndarray]] | None = None,
    mode: str = "exhaustive",
    trials: int = 100_000,
    rng_seed: int = 0,
    streams: int = 1,
    cap: int = config.ENUMERATION_CAP,
) -> EsoCheckReport:
    """Check the three-term inequality at each point; the report summarizes
    the worst point and carries per-point details."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValidationError("v", "stepsize parameters must be positive")
    if points is None:
        labelled = canonical_points(data, spec, v, rng_seed)
    else:
        labelled = [(np.asarray(x, float), np.asarray(h, float), f"point{i}") for i, (x, h) in enumerate(points)]
    for x, h, _ in labelled:
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h))):
            raise ValidationError("points", "points must be finite")

    p = samplings.marginals(spec)
    a_dense = data.to_dense()
    gram = a_dense.T @ a_dense

    if mode == "exhaustive":
        support = samplings.enumerate_support(spec, cap)
        masks = np.zeros((len(support), data.n))
        weights = np.empty(len(support))
        for row, (s, prob) in enumerate(support):
            masks[row, list(s)] = 1.0
            weights[row] = prob
        trials_used = 0
    elif mode == "monte_carlo":
        if trials < 1:
            raise ValidationError("trials", "must be positive")
        masks = _draw_masks(spec, trials, rng_seed, streams)
        weights = np.full(masks.shape[0], 1.0 / masks.shape[0])
        trials_used = masks.shape[0]
    else:
        raise ValidationError("mode", f"unknown mode {mode!r}")

    details = []
    for x, h, label in labelled:
        fx = 0.5 * float(np.dot(a_dense @ x, a_dense @ x))
        grad = gram @ x
        rhs = fx + float(np.sum(p * grad * h)) + 0.5 * float(np.sum(p * v * h * h))
        # f(x + h_S) for every S at once: rows of masks select coordinates.
        shifted = a_dense @ (x[None, :] + masks * h[None, :]).T
        values = 0.5 * np.sum(shifted * shifted, axis=0)
        lhs = float(weights @ values)
        if mode == "exhaustive":
            stderr = 0.0
            ok = (rhs - lhs) >= -EXHAUSTIVE_TOL
        else:
            stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
            ok = (rhs - lhs) >= -3.0 * stderr
        details.append(
            {
                "label": label,
                "lhs": lhs,
                "rhs": rhs,
                "slack": rhs - lhs,
                "stderr": stderr,
                "pass": bool(ok),
            }
        )

    worst = min(details, key=lambda d: d["slack"])
    return EsoCheckReport(
        mode=mode,
        trials=trials_used,
        lhs_mean=worst["lhs"],
        lhs_stderr=worst["stderr"],
        rhs=worst["rhs"],
        slack=worst["slack"],
        passed=all(d["pass"] for d in details),
        points_tested=len(details),
        details=tuple(details),
    )


def _draw_masks(spec: SamplingSpec, trials: int, rng_seed: int, streams: int) -> np.ndarray:
    streams = max(1, int(streams))
    per_stream = [trials // streams] * streams
    for r in range(trials % streams):
        per_stream[r] += 1
    chunks = []
    for stream_index, count in enumerate(per_stream):
        rng = config.rng_for_stream(rng_seed, stream_index)
        chunk = np.zeros((count, spec.n))
        for row in range(count):
            chunk[row, sorted(samplings._draw(spec, rng))] = 1.0
        chunks.append(chunk)
    return np.vstack(chunks)


# ---------------------------------------------------------------------------
# Matrix-form check with witness


@dataclass(frozen=True)
class MatrixFormReport:
    margin: float
    passed: bool
    witness: np.ndarray | None
    witness_gap: float | None

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "pass": self.passed,
            "witness": self.witness.tolist() if self.witness is not None else None,
            "witness_gap": self.witness_gap,
        }


def check_eso_matrix_form(
    data: DataMatrix, spec: SamplingSpec, v: np.ndarray, tol: float = 1e-8
) -> MatrixFormReport:
    """PSD certificate with a violating direction when the margin is negative."""
    v = np.asarray(v, dtype=float)
    pm = probability.prob_matrix(spec, "auto")
    probability.require_exact(pm, "the matrix-form check")
    p = samplings.marginals(spec)
    certificate = np.diag(v * p) - pm.entries * data.gram()
    eigvals, eigvecs = np.linalg.eigh(certificate)
    margin = float(eigvals[0])
    if margin < -tol:
        witness = eigvecs[:, 0]
        gap = float(witness @ certificate @ witness)
        return MatrixFormReport(margin, False, witness, gap)
    return MatrixFormReport(margin, True, None, None)


# ---------------------------------------------------------------------------
# Identity battery


@dataclass(frozen=True)
class BatteryReport:
    """Max discrepancy per structural check across a random corpus."""

    checks: dict  # name -> {"max_discrepancy": float, "cases": int, "pass": bool}
    tolerance: float
    seed: int
    sizes: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "checks": {k: dict(c) for k, c in self.checks.items()},
            "tolerance": self.tolerance,
            "seed": self.seed,
            "sizes": list(self.sizes),
            "pass": self.passed,
        }


def run_identity_battery(
    rng_seed: int = 0,
    sizes: tuple[int, ...] = (3, 4, 5),
    specs_per_size: int = 20,
    pairs_per_spec: int = 3,
    tolerance: float = EXHAUSTIVE_TOL,
) -> BatteryReport:
    """Exercise the expectation identities, the doubly-uniform decomposition
    and the mixture/intersection/restriction rules against enumeration
    oracles over random samplings and matrices."""
    rng = config.rng_for_stream(rng_seed, 0)
    tracker: dict[str, float] = {}
    counts: dict[str, int] = {}

    def record(name: str, discrepancy: float) -> None:
        tracker[name] = max(tracker.get(name, 0.0), float(discrepancy))
        counts[name] = counts.get(name, 0) + 1

    for n in sizes:
        for _ in range(specs_per_size):
            spec = samplings.random_spec(rng, n)
            for _ in range(pairs_per_spec):
                m_matrix = rng.standard_normal((n, n))
                h = rng.standard_normal(n)
                report = probability.check_identities(spec, m_matrix, h)
                for name, res in report.results.items():
                    record(f"identity:{name}", res["discrepancy"])

            # Doubly-uniform = cardinality-weighted mixture of tau-nice laws.
            q = rng.dirichlet(np.ones(n + 1))
            q = q / q.sum()
            du = samplings.doubly_uniform(q)
            mix = samplings.convex_combination(
                q, [samplings.tau_nice(n, t) for t in range(n + 1)]
            )
            record(
                "doubly_uniform_decomposition",
                _support_distance(samplings.enumerate_support(du), samplings.enumerate_support(mix)),
            )

            # Mixture rule for probability matrices.
            comps = [samplings.random_spec(rng, n) for _ in range(2)]
            w = rng.dirichlet(np.ones(2))
            w = w / w.sum()
            mixture = samplings.convex_combination(w, comps)
            lhs = probability.prob_matrix(mixture, "enumerate").entries
            rhs = sum(
                wi * probability.prob_matrix(c, "enumerate").entries for wi, c in zip(w, comps)
            )
            record("convex_combination_rule", np.max(np.abs(lhs - rhs)))

            # Intersection rule: enumerate the joint law vs Hadamard product.
            pair = (samplings.random_spec(rng, n), samplings.random_spec(rng, n))
            joint = samplings.intersection(*pair)
            lhs = probability.prob_matrix(joint, "enumerate").entries
            rhs = (
                probability.prob_matrix(pair[0], "enumerate").entries
                * probability.prob_matrix(pair[1], "enumerate").entries
            )
            record("intersection_rule", np.max(np.abs(lhs - rhs)))

            # Restriction distributes over mixtures.
            j = np.flatnonzero(rng.random(n) < 0.6)
            if j.size == 0:
                j = np.array([int(rng.integers(n))])
            restricted_mix = probability.restrict(
                probability.prob_matrix(mixture, "enumerate"), j
            ).entries
            mix_restricted = sum(
                wi * probability.restrict(probability.prob_matrix(c, "enumerate"), j).entries
                for wi, c in zip(w, comps)
            )
            record("restriction_chain", np.max(np.abs(restricted_mix - mix_restricted)))

    checks = {
        name: {
            "max_discrepancy": tracker[name],
            "cases": counts[name],
            "pass": tracker[name] <= tolerance,
        }
        for name in sorted(tracker)
    }
    return BatteryReport(checks=checks, tolerance=tolerance, seed=rng_seed, sizes=tuple(sizes))


def _support_distance(first, second) -> float:
    lhs = dict(first)
    rhs = dict(second)
    keys = set(lhs) | set(rhs)
    return max(abs(lhs.get(k, 0.0) - rhs.get(k, 0.0)) for k in keys)


def write_junit(report: BatteryReport, path) -> None:
    """Minimal junit-style summary for CI consumption."""
    failures = sum(0 if c["pass"] else 1 for c in report.checks.values())
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<testsuite name="identity_battery" tests="{len(report.checks)}" failures="{failures}">',
    ]
    for name, check in report.checks.items():
        lines.append(
            f'  <testcase name="{escape(name)}" classname="identity_battery">'
            + (
                ""
                if check["pass"]
                else f'<failure message="max discrepancy {check["max_discrepancy"]:.3e} '
                f'exceeds {report.tolerance:.1e}"/>'
            )
            + "</testcase>"
        )
    lines.append("</testsuite>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
