"""Geometric certification of forward-reverse Brascamp-Lieb data.

A datum is geometric when the weighted output pullback ``Q^T Lambda_d Q``
sits below ``Lambda_c`` in the Loewner order and some positive semidefinite
``sigma`` over the input sum has identity diagonal blocks while ``Q sigma
Q^T`` has identity diagonal blocks as well.  The second condition is a
feasibility problem over the intersection of the PSD cone with an affine
subspace; it is attacked with Dykstra-style alternating projections, the
affine projection being exact through a precomputed pseudo-inverse.

Two matrix inequalities that geometric data satisfy (and that drive the
heat-flow preservation machinery) are exposed as direct numerical checks:
the adjoint contraction bound and the trace-domination implication.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .datum import FrblDatum, embed_blockdiag, lambda_maps
from .linalg import DEFAULT_LOEWNER_TOL, SymMatrix, psd_project

__all__ = [
    "AdjointContractionResult",
    "GeometricCertificate",
    "SigmaSearchResult",
    "TraceImplicationResult",
    "check_geometric",
    "check_loewner",
    "find_sigma",
    "marginal_residuals",
    "verify_adjoint_contraction",
    "verify_trace_implication",
]

log = logging.getLogger("frbl.geometry")

DEFAULT_FEASIBILITY_TOL = 1e-8
DEFAULT_MAX_ITER = 50_000

# Scaled slack for the trace-domination conclusion.
TRACE_CONCLUSION_TOL = 1e-10


def check_loewner(datum: FrblDatum, tol: float = DEFAULT_LOEWNER_TOL) -> tuple[bool, float]:
    """Check ``Q^T Lambda_d Q <= Lambda_c`` in the Loewner order.

    Returns the verdict together with the minimum eigenvalue of
    ``Lambda_c - Q^T Lambda_d Q`` (reported either way).
    """
    lam_c, lam_d = lambda_maps(datum)
    gap = lam_c.mat - datum.q.T @ lam_d.mat @ datum.q
    min_eig = float(np.linalg.eigvalsh(SymMatrix(gap).mat)[0])
    return min_eig >= -tol, min_eig


def marginal_residuals(datum: FrblDatum, sigma: np.ndarray) -> tuple[float, float]:
    """Max Frobenius deviation of the diagonal blocks of ``sigma`` and of
    ``Q sigma Q^T`` from identities."""
    layout = datum.layout
    r_in = 0.0
    for i in range(layout.k):
        sl = layout.in_slice(i)
        blk = sigma[sl, sl]
        r_in = max(r_in, float(np.linalg.norm(blk - np.eye(layout.in_dims[i]))))
    pushed = datum.q @ sigma @ datum.q.T
    r_out = 0.0
    for j in range(layout.m):
        sl = layout.out_slice(j)
        blk = pushed[sl, sl]
        r_out = max(r_out, float(np.linalg.norm(blk - np.eye(layout.out_dims[j]))))
    return r_in, r_out


class _SigmaConstraints:
    """The affine subspace of symmetric matrices whose diagonal blocks, and
    whose pushforward diagonal blocks under ``Q . Q^T``, are identities.

    Works on the vectorized symmetric space (scaled upper triangle, so the
    Frobenius inner product becomes Euclidean).  The projection uses a
    precomputed pseudo-inverse and is exact per call; a least-squares
    residual at setup detects an empty subspace.
    """

    def __init__(self, datum: FrblDatum):
        layout = datum.layout
        n = layout.dim_in
        pairs = [(p, r) for p in range(n) for r in range(p, n)]
        col = {pr: idx for idx, pr in enumerate(pairs)}
        sqrt2 = np.sqrt(2.0)

        rows: list[np.ndarray] = []
        rhs: list[float] = []
        for i in range(layout.k):
            sl = layout.in_slice(i)
            for a in range(sl.start, sl.stop):
                for b in range(a, sl.stop):
                    row = np.zeros(len(pairs))
                    row[col[(a, b)]] = 1.0 if a == b else 1.0 / sqrt2
                    rows.append(row)
                    rhs.append(1.0 if a == b else 0.0)
        q = datum.q
        for j in range(layout.m):
            sl = layout.out_slice(j)
            for r in range(sl.start, sl.stop):
                for s in range(r, sl.stop):
                    row = np.empty(len(pairs))
                    for idx, (p, t) in enumerate(pairs):
                        if p == t:
                            row[idx] = q[r, p] * q[s, p]
                        else:
                            row[idx] = (q[r, p] * q[s, t] + q[r, t] * q[s, p]) / sqrt2
                    rows.append(row)
                    rhs.append(1.0 if r == s else 0.0)

        self.n = n
        self.pairs = pairs
        self.a = np.array(rows)
        self.b = np.array(rhs)
        self.pinv = np.linalg.pinv(self.a)
        x_ls = self.pinv @ self.b
        self.lstsq_residual = float(np.linalg.norm(self.a @ x_ls - self.b))
        self.rhs_norm = float(np.linalg.norm(self.b))

    def svec(self, s: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.pairs))
        for idx, (p, r) in enumerate(self.pairs):
            out[idx] = s[p, r] if p == r else np.sqrt(2.0) * s[p, r]
        return out

    def smat(self, v: np.ndarray) -> np.ndarray:
        s = np.zeros((self.n, self.n))
        for idx, (p, r) in enumerate(self.pairs):
            if p == r:
                s[p, p] = v[idx]
            else:
                val = v[idx] / np.sqrt(2.0)
                s[p, r] = val
                s[r, p] = val
        return s

    def project(self, s: np.ndarray) -> np.ndarray:
        x = self.svec(s)
        x = x - self.pinv @ (self.a @ x - self.b)
        return self.smat(x)

    def distance(self, s: np.ndarray) -> float:
        return float(np.linalg.norm(self.project(s) - s))


@dataclass(frozen=True)
class SigmaSearchResult:
    """Outcome of the alternating-projection search for ``sigma``."""

    status: str  # "found" | "max-iter" | "affine-infeasible"
    sigma: SymMatrix | None
    sigma_min_eig: float
    residual_in: float
    residual_out: float
    iterations: int
    reason: str | None = None


def find_sigma(
    datum: FrblDatum,
    tol: float = DEFAULT_FEASIBILITY_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    debug: bool = False,
) -> SigmaSearchResult:
    """Search for a PSD ``sigma`` with identity diagonal blocks such that
    ``Q sigma Q^T`` also has identity diagonal blocks.

    Dykstra alternating projections between the PSD cone and the affine
    constraint subspace, started from the identity (which satisfies the
    input-side constraints by construction, making runs deterministic).
    Success requires both marginal residuals at or below ``tol`` and a
    minimum eigenvalue at or above ``-tol``.  Hitting ``max_iter`` is
    reported as not-found with the final residuals; alternating projections
    cannot certify that no ``sigma`` exists.  An empty affine subspace is
    detected up front via the least-squares residual and reported as
    ``affine-infeasible``.

    With ``debug=True`` the distance of the cone iterate to the affine
    subspace is asserted non-increasing (up to rounding slack) across
    iterations.
    """
    cons = _SigmaConstraints(datum)
    if cons.lstsq_residual > tol * (1.0 + cons.rhs_norm):
        x_ls = cons.smat(cons.pinv @ cons.b)
        r_in, r_out = marginal_residuals(datum, x_ls)
        min_eig = float(np.linalg.eigvalsh(SymMatrix(x_ls).mat)[0])
        log.debug("affine subspace infeasible, lstsq residual %.3e", cons.lstsq_residual)
        return SigmaSearchResult(
            "affine-infeasible", None, min_eig, r_in, r_out, 0, reason="affine-infeasible"
        )

    x = np.eye(datum.layout.dim_in)
    correction = np.zeros_like(x)
    prev_dist = np.inf
    r_in = r_out = np.inf
    min_eig = -np.inf
    for iteration in range(1, max_iter + 1):
        cone = psd_project(SymMatrix(x + correction)).mat
        correction = x + correction - cone
        if debug:
            dist = cons.distance(cone)
            assert dist <= prev_dist + 1e-12 * (1.0 + prev_dist), (
                f"distance to affine subspace increased: {prev_dist} -> {dist}"
            )
            prev_dist = dist
        x = SymMatrix(cons.project(cone)).mat
        r_in, r_out = marginal_residuals(datum, x)
        min_eig = float(np.linalg.eigvalsh(x)[0])
        if r_in <= tol and r_out <= tol and min_eig >= -tol:
            log.debug("sigma found after %d iterations", iteration)
            return SigmaSearchResult("found", SymMatrix(x), min_eig, r_in, r_out, iteration)
    return SigmaSearchResult("max-iter", None, min_eig, r_in, r_out, max_iter,
                             reason="max-iter")


@dataclass(frozen=True)
class GeometricCertificate:
    """Result of the full geometric check.

    ``verdict == "geometric"`` guarantees the Loewner condition holds, a
    ``sigma`` is present, both marginal residuals are at or below the
    feasibility tolerance and its minimum eigenvalue is at or above its
    negative.
    """

    verdict: str  # "geometric" | "not-geometric-loewner" | "sigma-not-found"
    loewner_ok: bool
    loewner_min_eig: float
    sigma: SymMatrix | None
    sigma_min_eig: float
    residual_in: float
    residual_out: float
    iterations: int
    reason: str | None = None

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict,
            "loewner_min_eig": self.loewner_min_eig,
            "sigma": None if self.sigma is None else self.sigma.mat.tolist(),
            "residual_in": self.residual_in,
            "residual_out": self.residual_out,
            "iterations": self.iterations,
        }
        if self.reason is not None:
            out["reason"] = self.reason
        return out


def check_geometric(
    datum: FrblDatum,
    tol: float = DEFAULT_FEASIBILITY_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GeometricCertificate:
    """Combine the Loewner check with the ``sigma`` search.

    Deterministic for a fixed tolerance and iteration budget.  The sigma
    search runs even when the Loewner condition fails so the certificate
    carries full information; the verdict then stays
    ``not-geometric-loewner``.
    """
    loewner_ok, min_eig = check_loewner(datum, tol)
    search = find_sigma(datum, tol, max_iter)
    if not loewner_ok:
        verdict = "not-geometric-loewner"
    elif search.status == "found":
        verdict = "geometric"
    else:
        verdict = "sigma-not-found"
    return GeometricCertificate(
        verdict=verdict,
        loewner_ok=loewner_ok,
        loewner_min_eig=min_eig,
        sigma=search.sigma,
        sigma_min_eig=search.sigma_min_eig,
        residual_in=search.residual_in,
        residual_out=search.residual_out,
        iterations=search.iterations,
        reason=search.reason,
    )


class AdjointContractionResult(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def verify_adjoint_contraction(
    datum: FrblDatum, v_blocks, tol: float = 1e-10
) -> AdjointContractionResult:
    """Evaluate the contraction bound satisfied by geometric data.

    For vectors ``v^j`` in the output factors, the weighted pullback energy
    ``sum_i (1/c_i) |sum_j d_j Q[j,i]^T v^j|^2`` must not exceed
    ``sum_j d_j |v^j|^2``.  Both sides are computed exactly as written;
    ``holds`` allows a scaled slack of ``tol * (1 + rhs)``.
    """
    layout = datum.layout
    vs = [np.atleast_1d(np.asarray(v, dtype=float)) for v in v_blocks]
    if len(vs) != layout.m:
        raise ValueError(f"expected {layout.m} output-factor vectors, got {len(vs)}")
    for j, v in enumerate(vs):
        if v.shape != (layout.out_dims[j],):
            raise ValueError(
                f"vector {j} has shape {v.shape}, expected ({layout.out_dims[j]},)"
            )
    lhs = 0.0
    for i in range(layout.k):
        acc = np.zeros(layout.in_dims[i])
        for j in range(layout.m):
            acc += datum.d[j] * datum.block(j, i).T @ vs[j]
        lhs += float(acc @ acc) / float(datum.c[i])
    rhs = float(sum(dj * float(v @ v) for dj, v in zip(datum.d, vs)))
    return AdjointContractionResult(lhs, rhs, lhs <= rhs + tol * (1.0 + rhs))


@dataclass(frozen=True)
class TraceImplicationResult:
    hypothesis_holds: bool
    hypothesis_min_eig: float
    conclusion_holds: bool | None
    lhs_trace: float
    rhs_trace: float

    @property
    def verdict(self) -> str:
        if not self.hypothesis_holds:
            return "hypothesis-not-met"
        if self.conclusion_holds:
            return "hypothesis-holds, conclusion-holds"
        return "hypothesis-holds, conclusion-fails"


def verify_trace_implication(
    datum: FrblDatum,
    x_blocks,
    y_blocks,
    sigma: SymMatrix,
    tol: float = DEFAULT_LOEWNER_TOL,
) -> TraceImplicationResult:
    """Check the trace-domination implication on a certified-geometric datum.

    Hypothesis: ``blockdiag(c_i X_i) <= Q^T blockdiag(d_j Y_j) Q`` in the
    Loewner order (within ``tol``).  When it holds, the weighted trace
    inequality ``sum c_i tr(X_i) <= sum d_j tr(Y_j)`` is evaluated with a
    scaled slack; when it fails the result is ``hypothesis-not-met`` and no
    claim is made.  ``sigma`` must be a marginal certificate for the datum
    (that is what makes the implication valid), which is enforced here.
    """
    layout = datum.layout
    xs = [np.asarray(x, dtype=float) for x in x_blocks]
    ys = [np.asarray(y, dtype=float) for y in y_blocks]
    if len(xs) != layout.k or len(ys) != layout.m:
        raise ValueError("block count does not match the datum layout")
    for i, x in enumerate(xs):
        if x.shape != (layout.in_dims[i], layout.in_dims[i]):
            raise ValueError(f"X block {i} has shape {x.shape}")
    for j, y in enumerate(ys):
        if y.shape != (layout.out_dims[j], layout.out_dims[j]):
            raise ValueError(f"Y block {j} has shape {y.shape}")
    r_in, r_out = marginal_residuals(datum, np.asarray(sigma))
    if max(r_in, r_out) > 1e-6 or sigma.min_eigenvalue() < -1e-6:
        raise ValueError("sigma is not a marginal certificate for this datum")

    lhs_mat = embed_blockdiag(layout.in_dims, [ci * x for ci, x in zip(datum.c, xs)])
    rhs_mat = datum.q.T @ embed_blockdiag(
        layout.out_dims, [dj * y for dj, y in zip(datum.d, ys)]
    ) @ datum.q
    hyp_min_eig = float(np.linalg.eigvalsh(SymMatrix(rhs_mat - lhs_mat).mat)[0])
    hypothesis_holds = hyp_min_eig >= -tol

    lhs_trace = float(sum(ci * np.trace(x) for ci, x in zip(datum.c, xs)))
    rhs_trace = float(sum(dj * np.trace(y) for dj, y in zip(datum.d, ys)))
    if not hypothesis_holds:
        return TraceImplicationResult(False, hyp_min_eig, None, lhs_trace, rhs_trace)
    scale = 1.0 + abs(lhs_trace) + abs(rhs_trace)
    conclusion = lhs_trace <= rhs_trace + TRACE_CONCLUSION_TOL * scale
    return TraceImplicationResult(True, hyp_min_eig, conclusion, lhs_trace, rhs_trace)
