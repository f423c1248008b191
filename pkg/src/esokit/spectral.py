"""Largest and diagonally-normalized largest eigenvalues of PSD matrices.

``lambda_max(M)`` maximizes h'Mh over the unit ball; ``lambda_prime(M)``
maximizes it subject to h'Diag(M)h <= 1 and equals the top eigenvalue of
D^{-1/2} M D^{-1/2} on the support of the diagonal. For probability matrices
of samplings these quantities drive every stepsize formula, and cheap
structural bounds on them (cardinality caps, moment ratios, restriction
propositions) substitute for eigen-solves on large problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config, probability, samplings
from .errors import UnsupportedMethodError, ValidationError
from .probability import ProbMatrix
from .samplings import SamplingSpec

METHOD_DENSE = "dense_exact"
METHOD_POWER = "power_method"
METHOD_FORMULA = "closed_form"
METHOD_BOUND = "bound"


@dataclass(frozen=True)
class EigenEstimate:
    """A (possibly safeguarded or bounded) eigenvalue estimate.

    ``residual`` is the relative eigenpair residual in dense mode and the
    last-two-iterate relative gap in power mode; formula values carry 0.0 and
    pure bounds carry None.
    """

    value: float
    method: str
    residual: float | None = 0.0
    iterations: int | None = None
    safeguard: float | None = None
    bound_source: str | None = None
    candidates: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "method": self.method,
            "residual": self.residual,
            "bound_source": self.bound_source,
        }
        if self.iterations is not None:
            out["iterations"] = self.iterations
        if self.safeguard is not None:
            out["safeguard"] = self.safeguard
        if self.candidates:
            out["candidates"] = dict(self.candidates)
        return out


def _check_square_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("matrix", "must be square")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix", "contains NaN or infinite entries")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if m.size and np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise ValidationError("matrix", "not symmetric within 1e-10")
    return 0.5 * (m + m.T)


def _dense_top_eigenpair(m: np.ndarray) -> tuple[float, np.ndarray, float]:
    eigvals, eigvecs = np.linalg.eigh(m)
    value = float(eigvals[-1])
    vector = eigvecs[:, -1]
    residual = float(np.linalg.norm(m @ vector - value * vector))
    return value, vector, residual


def lambda_max(
    m: np.ndarray,
    method: str = METHOD_DENSE,
    power_iterations: int = config.POWER_ITERATIONS,
    safeguard: float = config.POWER_SAFEGUARD,
) -> EigenEstimate:
    """Largest eigenvalue of a symmetric PSD matrix."""
    m = _check_square_symmetric(m)
    if m.size == 0 or not np.any(m):
        return EigenEstimate(0.0, method, 0.0)
    if method == METHOD_DENSE:
        value, _, residual = _dense_top_eigenpair(m)
        return EigenEstimate(max(value, 0.0), METHOD_DENSE, residual)
    if method == METHOD_POWER:
        return _power_method(m, power_iterations, safeguard)
    raise UnsupportedMethodError(f"unknown eigenvalue method {method!r}")


def _power_method(m: np.ndarray, iterations: int, safeguard: float) -> EigenEstimate:
    n = m.shape[0]
    x = np.ones(n) / np.sqrt(n)
    y = m @ x
    if np.linalg.norm(y) <= 1e-300:
        # All-ones start is (numerically) in the kernel: perturb deterministically.
        x = 1.0 + np.arange(n) / max(n, 1)
        x /= np.linalg.norm(x)
        y = m @ x
        if np.linalg.norm(y) <= 1e-300:
            return EigenEstimate(0.0, METHOD_POWER, 0.0, iterations, safeguard)
    rayleigh_prev = float(x @ y)
    rayleigh = rayleigh_prev
    for _ in range(iterations):
        norm = np.linalg.norm(y)
        if norm <= 1e-300:
            break
        x = y / norm
        y = m @ x
        rayleigh_prev = rayleigh
        rayleigh = float(x @ y)
    gap = abs(rayleigh - rayleigh_prev) / max(abs(rayleigh), 1e-300)
    return EigenEstimate(
        max(rayleigh, 0.0) * safeguard, METHOD_POWER, gap, iterations, safeguard
    )


def lambda_prime(
    m: np.ndarray,
    method: str = METHOD_DENSE,
    power_iterations: int = config.POWER_ITERATIONS,
    safeguard: float = config.POWER_SAFEGUARD,
) -> EigenEstimate:
    """Diagonally normalized largest eigenvalue.

    Computed on the support {i : M_ii > 0}; the zero matrix maps to 0 by
    convention. A zero diagonal entry with a nonzero row violates positive
    semidefiniteness and is rejected.
    """
    m = _check_square_symmetric(m)
    diag = np.diag(m)
    if np.any(diag < -1e-12 * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)):
        raise ValidationError("matrix", "negative diagonal entry; not PSD")
    support = np.flatnonzero(diag > 0.0)
    off_support = np.flatnonzero(diag <= 0.0)
    if off_support.size:
        atol = 1e-12 * max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m[off_support, :])) > atol:
            raise ValidationError(
                "matrix", "zero diagonal entry with nonzero row; not positive semidefinite"
            )
    if support.size == 0:
        return EigenEstimate(0.0, method, 0.0)
    sub = m[np.ix_(support, support)]
    scale = 1.0 / np.sqrt(diag[support])
    normalized = sub * np.outer(scale, scale)
    return lambda_max(normalized, method, power_iterations, safeguard)


# ---------------------------------------------------------------------------
# Bounds for sampling eigenvalues


@dataclass(frozen=True)
class BoundsReport:
    """Structural bounds on lambda(P) and lambda'(P) for a sampling."""

    lambda_prime_lower: float | None
    lambda_prime_upper: float
    lambda_lower: float
    lambda_upper: float
    tau: int
    uniform_sharpened: bool
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "lambda_prime_lower": self.lambda_prime_lower,
            "lambda_prime_upper": self.lambda_prime_upper,
            "lambda_lower": self.lambda_lower,
            "lambda_upper": self.lambda_upper,
            "tau": self.tau,
            "uniform_sharpened": self.uniform_sharpened,
            "notes": list(self.notes),
        }


def lambda_bounds(spec: SamplingSpec, tau_cap: int | None = None) -> BoundsReport:
    """Moment-based sandwich bounds on the sampling eigenvalues.

    The lower bound on lambda' is the second-to-first cardinality moment
    ratio (undefined for nil samplings - reported, not raised); the upper
    bound is the certified cardinality cap. lambda is sandwiched between
    E|S|^2/n and E|S|, with the sharper E|S| tau/n upper bound applied for
    structurally uniform kinds.
    """
    samplings.validate_spec(spec)
    first, second = samplings.cardinality_moments(spec)
    tau = int(tau_cap) if tau_cap is not None else samplings.cardinality_cap(spec)
    notes: list[str] = []
    if first == 0.0:
        lp_lower = None
        notes.append("nil sampling: lambda' lower bound undefined")
    else:
        lp_lower = second / first
    uniform = samplings.is_certified_uniform(spec)
    lam_upper = first * tau / spec.n if uniform else first
    return BoundsReport(
        lambda_prime_lower=lp_lower,
        lambda_prime_upper=float(tau),
        lambda_lower=second / spec.n,
        lambda_upper=lam_upper,
        tau=tau,
        uniform_sharpened=uniform,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Restricted samplings


def tau_nice_restricted_value(n: int, tau: int, j_size: int) -> float:
    """Exact lambda'(J intersect S-hat) for the tau-nice sampling."""
    if tau == 0:
        return 0.0
    return 1.0 + (j_size - 1) * (tau - 1) / max(n - 1, 1)


def lambda_prime_restricted(
    spec: SamplingSpec,
    j,
    method: str = "exact",
    power_iterations: int = config.POWER_ITERATIONS,
    safeguard: float = config.POWER_SAFEGUARD,
    precomputed: ProbMatrix | None = None,
    cap: int = config.ENUMERATION_CAP,
) -> EigenEstimate:
    """lambda' of the restriction of a sampling to the nonempty set ``j``.

    * ``exact``  - eigen-solve on the restricted probability matrix.
    * ``power``  - safeguarded power iteration on the same matrix.
    * ``formula``- tau-nice closed form (an equality, not a bound).
    * ``bound``  - tightest applicable structural upper bound; the winning
      proposition is recorded in ``bound_source`` and all candidates in
      ``candidates``.
    """
    samplings.validate_spec(spec)
    j_idx = sorted(int(i) for i in j)
    if not j_idx:
        raise ValidationError("set", "restriction set must be nonempty")
    if j_idx[0] < 0 or j_idx[-1] >= spec.n:
        raise ValidationError("set", f"indices must lie in [0, {spec.n})")

    if method in ("exact", "power"):
        pm = precomputed if precomputed is not None else probability.prob_matrix(spec, "auto", cap=cap)
        sub = pm.entries[np.ix_(j_idx, j_idx)]
        eig_method = METHOD_DENSE if method == "exact" else METHOD_POWER
        return lambda_prime(sub, eig_method, power_iterations, safeguard)

    if method == "formula":
        if spec.kind != samplings.KIND_TAU_NICE:
            raise UnsupportedMethodError(
                f"restricted closed form only exists for tau-nice samplings, not {spec.kind!r}"
            )
        value = tau_nice_restricted_value(spec.n, spec.tau, len(j_idx))
        return EigenEstimate(value, METHOD_FORMULA, 0.0, bound_source="tau_nice_restriction")

    if method == "bound":
        candidates = _restriction_bound_candidates(spec, j_idx)
        source = min(candidates, key=candidates.get)
        return EigenEstimate(
            candidates[source],
            METHOD_BOUND,
            None,
            bound_source=source,
            candidates=candidates,
        )

    raise UnsupportedMethodError(f"unknown restricted-eigenvalue method {method!r}")


def _restriction_bound_candidates(spec: SamplingSpec, j_idx: list[int]) -> dict[str, float]:
    j_size = len(j_idx)
    candidates: dict[str, float] = {
        "generic_cardinality": float(min(j_size, samplings.cardinality_cap(spec)))
    }
    k = spec.kind
    if k == samplings.KIND_TAU_NICE:
        candidates["tau_nice_restriction"] = tau_nice_restricted_value(spec.n, spec.tau, j_size)
    elif k == samplings.KIND_CTAU:
        candidates["ctau_restriction"] = ctau_restricted_bound(spec, j_idx)
    elif k == samplings.KIND_DOUBLY_UNIFORM:
        first, second = samplings.cardinality_moments(spec)
        if first > 0.0:
            candidates["doubly_uniform_restriction"] = 1.0 + (j_size - 1) * (
                second / first - 1.0
            ) / max(spec.n - 1, 1)
    return candidates


def ctau_restricted_bound(spec: SamplingSpec, j_idx) -> float:
    """Restriction bound for the (c,tau)-distributed sampling; tight when the
    blocks hit by J each contribute at most one coordinate."""
    if spec.kind != samplings.KIND_CTAU:
        raise UnsupportedMethodError("requires a (c,tau)-distributed sampling")
    tau = spec.tau
    if tau == 0:
        return 0.0
    s = len(spec.partition[0])
    s1 = max(s - 1, 1)
    j_set = set(int(i) for i in j_idx)
    omega = sum(1 for block in spec.partition if j_set.intersection(block))
    j_size = len(j_set)
    return (
        1.0
        + (j_size - 1) * (tau - 1) / s1
        + j_size * (tau / s - (tau - 1) / s1) * (omega - 1) / omega
    )
