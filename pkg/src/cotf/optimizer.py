"""Optimal channel combination via a regularized Rayleigh quotient.

Given the stacked channel matrix T, a focal mask f and its complement g,
the optimal coefficient vector maximizes

    c^T A c / c^T B c,   A = T^T diag(f) T,   B = T^T diag(g) T,

i.e. the ratio of squared combined weight inside the focal region to the
squared weight outside it.  Regularization truncates the SVD of T: only
singular directions within ``threshold_db`` decibels of the largest
singular value are retained, and the quotient is maximized inside that
subspace.  The reduced symmetric-definite eigenproblem is solved by
Cholesky reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .otf import OtfStack
from .regions import RegionMask

POWER = "power"
AMPLITUDE = "amplitude"

#: decibel-to-ratio divisor per convention: threshold = 10**(-db/divisor)
_DB_DIVISOR = {POWER: 10.0, AMPLITUDE: 20.0}


class NumericalError(RuntimeError):
    """Raised when a linear-algebra step fails beyond recovery."""


@dataclass(frozen=True)
class TruncationPolicy:
    """SVD truncation threshold in decibels; ``None`` disables truncation.

    ``convention`` fixes how decibels map to a singular-value ratio:
    "power" keeps sigma >= sigma_max * 10**(-db/10), "amplitude" uses
    10**(-db/20).  Power is the package default.
    """

    threshold_db: float | None = None
    convention: str = POWER

    def __post_init__(self):
        if self.threshold_db is not None and not self.threshold_db > 0:
            raise ValueError(f"threshold_db must be > 0 when present, got {self.threshold_db}")
        if self.convention not in _DB_DIVISOR:
            raise ValueError(f"unknown dB convention {self.convention!r}")

    def keep_mask(self, singular_values: np.ndarray) -> np.ndarray:
        if self.threshold_db is None:
            return np.ones(singular_values.size, dtype=bool)
        cutoff = singular_values[0] * 10.0 ** (-self.threshold_db / _DB_DIVISOR[self.convention])
        return singular_values >= cutoff


@dataclass(frozen=True)
class CombinationResult:
    coefficients: np.ndarray
    objective: float
    improvement_factor: float
    cotf: np.ndarray
    rank_used: int
    policy: TruncationPolicy
    pinhole_excluded: bool

    def to_json_dict(self) -> dict:
        return {
            "coefficients": [float(v) for v in self.coefficients],
            "objective": float(self.objective),
            "improvement_factor": float(self.improvement_factor),
            "rank_used": int(self.rank_used),
            "policy": {
                "threshold_db": self.policy.threshold_db,
                "convention": self.policy.convention,
            },
            "pinhole_excluded": bool(self.pinhole_excluded),
        }


def conventional_objective(stack: OtfStack, mask: RegionMask) -> float:
    """Rayleigh ratio of the bare pinhole channel (c = e0)."""
    _check_compatible(stack, mask)
    t0 = stack.columns[:, 0]
    f = mask.focal.astype(np.float64)
    g = mask.out_of_focus.astype(np.float64)
    num = float(np.sum((t0 * f) ** 2))
    den = float(np.sum((t0 * g) ** 2))
    if den == 0.0:
        raise NumericalError("conventional objective undefined: pinhole has no out-of-focus weight")
    if num == 0.0:
        raise NumericalError("conventional objective undefined: pinhole has no focal weight")
    return num / den


def solve(stack: OtfStack, mask: RegionMask, policy: TruncationPolicy | None = None) -> CombinationResult:
    """Maximize the focal/out-of-focus quotient inside the retained subspace."""
    if policy is None:
        policy = TruncationPolicy()
    prep = _prepare(stack, mask)
    return _solve_prepared(stack, prep, policy)


def truncation_sweep(stack: OtfStack, mask: RegionMask, thresholds) -> list:
    """Solve once untruncated, then once per threshold (shared factorization).

    ``thresholds`` runs from weakest to strongest truncation, i.e. strictly
    decreasing dB values.  Returns the untruncated result followed by one
    result per threshold in input order.
    """
    policies = []
    for t in thresholds:
        if t is None or (isinstance(t, TruncationPolicy) and t.threshold_db is None):
            raise ValueError(
                "sweep thresholds must be finite dB values; the untruncated solve is always included"
            )
        policies.append(t if isinstance(t, TruncationPolicy) else TruncationPolicy(threshold_db=float(t)))
    db_values = [p.threshold_db for p in policies]
    if any(db_values[i] <= db_values[i + 1] for i in range(len(db_values) - 1)):
        raise ValueError(
            "thresholds must be strictly ordered from weakest to strongest truncation "
            "(strictly decreasing dB)"
        )
    convention = _sweep_convention(policies)
    prep = _prepare(stack, mask)
    results = [_solve_prepared(stack, prep, TruncationPolicy(convention=convention))]
    for policy in policies:
        results.append(_solve_prepared(stack, prep, policy))
    untruncated = results[0].objective
    for res in results[1:]:
        if res.objective > untruncated * (1.0 + 1e-9):
            raise NumericalError(
                "nesting violated: a truncated objective exceeds the untruncated optimum"
            )
    return results


def _sweep_convention(policies) -> str:
    kinds = {p.convention for p in policies}
    if len(kinds) > 1:
        raise ValueError("mixed dB conventions in one sweep")
    return kinds.pop() if kinds else POWER


class _Prepared:
    """Shared factorization for repeated solves on one stack/mask pair."""

    __slots__ = ("singular_values", "vt", "a_full", "b_full", "conventional", "origin")

    def __init__(self, singular_values, vt, a_full, b_full, conventional, origin):
        self.singular_values = singular_values
        self.vt = vt
        self.a_full = a_full
        self.b_full = b_full
        self.conventional = conventional
        self.origin = origin


def _check_compatible(stack: OtfStack, mask: RegionMask) -> None:
    if stack.node_count != mask.node_count:
        raise ValueError(
            f"stack has {stack.node_count} nodes but mask has {mask.node_count}"
        )


def _prepare(stack: OtfStack, mask: RegionMask) -> _Prepared:
    _check_compatible(stack, mask)
    if stack.channel_count < 1:
        raise ValueError("stack must contain at least one channel")
    if mask.out_of_focus.sum() == 0:
        raise ValueError("out-of-focus region is empty")
    t = stack.columns
    f = mask.focal.astype(np.float64)
    g = mask.out_of_focus.astype(np.float64)
    singular_values, vt = _thin_svd(t)
    a_full = _symmetrize((t * f[:, None]).T @ t)
    b_full = _symmetrize((t * g[:, None]).T @ t)
    conventional = conventional_objective(stack, mask)
    return _Prepared(singular_values, vt, a_full, b_full, conventional, stack.origin_node())


def _thin_svd(t: np.ndarray):
    svd_result = sla.svd(t, full_matrices=False, overwrite_a=False)
    return svd_result[1], svd_result[2]


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _solve_prepared(stack: OtfStack, prep: _Prepared, policy: TruncationPolicy) -> CombinationResult:
    keep = policy.keep_mask(prep.singular_values)
    rank = int(keep.sum())
    if rank == 0:
        raise NumericalError("truncation removed every singular direction")
    basis = prep.vt.T[:, keep]  # N x r right-singular basis
    a_red = _symmetrize(basis.T @ prep.a_full @ basis)
    b_red = _symmetrize(basis.T @ prep.b_full @ basis)

    jitter = 1e-12 * np.trace(b_red) / rank
    eigs_b = sla.eigvalsh(b_red)
    if eigs_b[0] < jitter:
        b_red = b_red + jitter * np.eye(rank)
    try:
        chol = sla.cholesky(b_red, lower=True)
    except sla.LinAlgError as exc:
        raise NumericalError(
            f"out-of-focus Gram matrix not positive definite after jitter "
            f"(smallest eigenvalue {eigs_b[0]:.3e})"
        ) from exc
    # M = L^-1 A L^-T, symmetric; its top eigenpair solves the pencil.
    half = sla.solve_triangular(chol, a_red, lower=True)
    m = sla.solve_triangular(chol, half.T, lower=True)
    eigenvalues, eigenvectors = sla.eigh(_symmetrize(m))
    objective = float(eigenvalues[-1])
    y = sla.solve_triangular(chol.T, eigenvectors[:, -1], lower=False)

    coefficients = basis @ y
    coefficients = coefficients / np.linalg.norm(coefficients)
    cotf = stack.columns @ coefficients
    if cotf[prep.origin] < 0:
        coefficients = -coefficients
        cotf = -cotf

    e0_projection = float(np.linalg.norm(basis[0, :]))
    return CombinationResult(
        coefficients=coefficients,
        objective=objective,
        improvement_factor=objective / prep.conventional,
        cotf=cotf,
        rank_used=rank,
        policy=policy,
        pinhole_excluded=e0_projection < 1e-9,
    )
