"""Spectral-radius estimation, matrix classification, and method selection.

The spectral radius of an iteration matrix T is estimated by repeated
application of T to a fixed seed vector with renormalization after every
step.  The growth factors are averaged geometrically over a trailing
window of 32 steps, which makes the estimate insensitive to dominant
eigenvalues that come in +/- pairs or complex-conjugate pairs; a plain
Rayleigh or single-step ratio oscillates in those cases and never settles.

Classification checks each method's sufficient condition (diagonal
dominance for Jacobi, symmetric positive definite for Gauss-Seidel, SPD
plus tridiagonal for SOR), measures all three radii, and recommends the
method with the smallest one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergentMethodError
from .matrix_core import DenseMatrix, Matrix, _require_square
from .stationary_solvers import Method, iteration_matrix

__all__ = [
    "SpectralEstimate",
    "MatrixProfile",
    "spectral_radius",
    "optimal_omega",
    "estimate_iterations",
    "structure_flags",
    "classify",
    "select_method",
]

# Growth factors are averaged over this many trailing steps; the stability
# test compares estimates exactly one window apart.
_WINDOW = 32
# Consecutive stable comparisons required before the estimate is accepted.
_STABLE_RUNS = 8
# Classification needs radii near sqrt-shaped cusps (rho of SOR at omega
# just below the optimum), where the default public tolerance is too loose.
_CLASSIFY_TOL = 1e-10
# SOR weight used for profiling when the optimal-omega hypotheses fail.
_FALLBACK_OMEGA = 1.5
# Radii this close together are treated as tied during method selection.
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class SpectralEstimate:
    """Estimated spectral radius plus how the estimate was obtained."""

    rho: float
    iterations_used: int
    converged: bool
    tolerance: float


@dataclass(frozen=True)
class MatrixProfile:
    """Structure flags, per-method spectral radii, and a recommendation.

    The radius fields are None when a zero diagonal makes the iteration
    matrices undefined.  ``omega_star`` is present only when the optimal
    SOR weight's hypotheses hold (SPD, tridiagonal, rho_jacobi < 1);
    ``sor_omega`` always records the weight rho_sor was measured at, so
    ``omega_star is None`` with ``rho_sor`` present flags a non-optimal
    fallback profile.  ``predicted_iterations`` maps method tags to a
    priori counts; it stays None until a solve supplies a right-hand side.
    """

    is_symmetric: bool
    is_strictly_diag_dominant: bool
    is_weakly_diag_dominant: bool
    is_tridiagonal: bool
    is_positive_definite: bool
    has_zero_diagonal: bool
    rho_jacobi: float | None
    rho_gauss_seidel: float | None
    rho_sor: float | None
    omega_star: float | None
    sor_omega: float | None
    recommendation: Method | str
    predicted_iterations: dict[str, int] | None = None

    def __post_init__(self):
        if self.is_strictly_diag_dominant and not self.is_weakly_diag_dominant:
            raise ValueError("strict diagonal dominance implies weak dominance")
        if self.is_positive_definite and not self.is_symmetric:
            raise ValueError("positive definiteness is only asserted for symmetric matrices")
        if self.omega_star is not None and not (1.0 <= self.omega_star < 2.0):
            raise ValueError(f"omega_star={self.omega_star} outside [1, 2)")


def spectral_radius(t: Matrix, tol: float = 1e-6, max_steps: int = 50000) -> SpectralEstimate:
    """Estimate the spectral radius of a square matrix by power iteration.

    The seed vector is deterministic (entry i is 1 + 1e-3 * i, sign of the
    perturbation alternating) so repeated runs agree bit for bit.  Each
    step applies t once and renormalizes; the estimate is the geometric
    mean of the last 32 growth factors.  The run stops once the estimate
    agrees with its value from 32 steps earlier, to within
    ``tol * max(1, rho)``, for 8 consecutive steps.  Exhausting
    ``max_steps`` returns the last estimate with ``converged=False``;
    that happens for defective dominant eigenvalues, whose growth factors
    approach the radius only like 1 + O(1/k).
    """
    n = _require_square(t)
    if not (tol > 0.0):
        raise ValueError(f"tolerance must be positive, got {tol}")
    if max_steps < 1:
        raise ValueError(f"max_steps must be at least 1, got {max_steps}")
    dense = t if isinstance(t, DenseMatrix) else t.to_dense()
    if all(v == 0.0 for v in dense.entries):
        return SpectralEstimate(0.0, 0, True, tol)

    mat = np.array(dense.entries, dtype=np.float64).reshape(n, n)
    v = np.array([1.0 + 1e-3 * i * (-1.0) ** i for i in range(n)], dtype=np.float64)
    v /= np.linalg.norm(v)

    logs: deque[float] = deque(maxlen=_WINDOW)
    ests: deque[float] = deque(maxlen=_WINDOW + 1)
    est = None
    stable = 0
    for k in range(1, max_steps + 1):
        w = mat @ v
        g = float(np.linalg.norm(w))
        if g == 0.0:
            # The iterate collapsed exactly: t is nilpotent on the seed,
            # which only happens when the spectral radius is 0.
            return SpectralEstimate(0.0, k, True, tol)
        logs.append(math.log(g))
        v = w / g
        if k >= _WINDOW:
            est = math.exp(sum(logs) / _WINDOW)
            ests.append(est)
            if len(ests) == _WINDOW + 1:
                if abs(est - ests[0]) <= tol * max(1.0, est):
                    stable += 1
                    if stable >= _STABLE_RUNS:
                        return SpectralEstimate(est, k, True, tol)
                else:
                    stable = 0
    if est is None:
        est = math.exp(sum(logs) / len(logs)) if logs else 0.0
    return SpectralEstimate(est, max_steps, False, tol)


def optimal_omega(rho_j: float) -> float:
    """The SOR weight 2 / (1 + sqrt(1 - rho_j^2)) minimizing rho(T_omega).

    Valid when the matrix is positive definite and tridiagonal and rho_j
    is the Jacobi radius; the resulting SOR radius is omega - 1.
    """
    if not (0.0 <= rho_j < 1.0):
        raise ValueError(f"optimal omega requires 0 <= rho_j < 1, got {rho_j}")
    return 2.0 / (1.0 + math.sqrt(1.0 - rho_j * rho_j))


def estimate_iterations(eta: float, rho: float, norm_a: float, first_step: float) -> int:
    """A priori iteration count to push the solution error below eta.

    Uses the fixed-point error bound with the spectral radius standing in
    for the iteration-matrix norm: the smallest k with
    rho^k * norm_a * first_step / (1 - rho) < eta, where first_step is
    ||x1 - x0||.  Returns 1 when the bound already holds at k = 1 or the
    log argument reaches 1.
    """
    if rho >= 1.0:
        raise ValueError(f"no a-priori estimate: spectral radius {rho} is not below 1")
    if rho <= 0.0:
        raise ValueError(f"spectral radius must lie in (0, 1), got {rho}")
    if not (eta > 0.0):
        raise ValueError(f"eta must be positive, got {eta}")
    if not (norm_a > 0.0):
        raise ValueError(f"matrix norm must be positive, got {norm_a}")
    if not (first_step > 0.0):
        raise ValueError(f"first-step displacement must be positive, got {first_step}")
    arg = eta * (1.0 - rho) / (norm_a * first_step)
    if arg >= 1.0:
        return 1
    return max(1, math.ceil(math.log(arg) / math.log(rho)))


def structure_flags(a: Matrix) -> dict[str, bool]:
    """The six structure flags of a profile, by definitional checks.

    Symmetry, tridiagonality, and zero diagonals are exact comparisons;
    dominance compares each |A_ii| against its off-diagonal row sum;
    positive definiteness attempts a Cholesky factorization (only for
    symmetric matrices) and reports whether every pivot stays positive.
    """
    n = _require_square(a)
    rows = (a if isinstance(a, DenseMatrix) else a.to_dense()).to_rows()
    symmetric = all(rows[i][j] == rows[j][i] for i in range(n) for j in range(i + 1, n))
    strict = True
    weak = True
    for i in range(n):
        off = 0.0
        for j in range(n):
            if j != i:
                off += abs(rows[i][j])
        d = abs(rows[i][i])
        if not (d > off):
            strict = False
        if not (d >= off):
            weak = False
    tridiagonal = all(
        rows[i][j] == 0.0 for i in range(n) for j in range(n) if abs(i - j) > 1
    )
    zero_diag = any(rows[i][i] == 0.0 for i in range(n))
    return {
        "is_symmetric": symmetric,
        "is_strictly_diag_dominant": strict,
        "is_weakly_diag_dominant": weak,
        "is_tridiagonal": tridiagonal,
        "is_positive_definite": symmetric and _cholesky_succeeds(rows, n),
        "has_zero_diagonal": zero_diag,
    }


def _cholesky_succeeds(rows, n: int) -> bool:
    low = [[0.0] * n for _ in range(n)]
    for k in range(n):
        acc = rows[k][k]
        for j in range(k):
            acc -= low[k][j] * low[k][j]
        if not (acc > 0.0):
            return False
        low[k][k] = math.sqrt(acc)
        for i in range(k + 1, n):
            s = rows[i][k]
            for j in range(k):
                s -= low[i][j] * low[k][j]
            low[i][k] = s / low[k][k]
    return True


def _candidates(rho_j, rho_g, rho_s, sor_omega):
    # Tie-break preference order: Gauss-Seidel needs no weight, SOR beats
    # Jacobi when their radii agree.
    return (
        (Method.gauss_seidel(), rho_g),
        (Method.sor(sor_omega) if sor_omega is not None else None, rho_s),
        (Method.jacobi(), rho_j),
    )


def _best_method(rho_j, rho_g, rho_s, sor_omega):
    cands = [
        (m, r)
        for m, r in _candidates(rho_j, rho_g, rho_s, sor_omega)
        if m is not None and r is not None and r < 1.0
    ]
    if not cands:
        return None
    smallest = min(r for _, r in cands)
    for m, r in cands:
        if r <= smallest + _TIE_TOL:
            return m, r
    return None


def classify(a: Matrix) -> MatrixProfile:
    """Structure flags plus measured spectral radii for all three methods.

    Jacobi and Gauss-Seidel radii are always measured.  SOR is measured
    at the optimal weight when the matrix is SPD and tridiagonal with
    rho_jacobi < 1, otherwise at the fixed fallback weight 1.5 with
    ``omega_star`` left unset.  A zero diagonal leaves every radius unset
    and recommends nothing.  Radii are estimated at a tolerance of 1e-10,
    far below the public default: the recommended weight is fed back into
    a measured SOR radius, and near the optimum that radius has a
    square-root cusp that amplifies any error in rho_jacobi.
    """
    flags = structure_flags(a)
    if flags["has_zero_diagonal"]:
        return MatrixProfile(
            **flags,
            rho_jacobi=None,
            rho_gauss_seidel=None,
            rho_sor=None,
            omega_star=None,
            sor_omega=None,
            recommendation="none convergent",
        )
    rho_j = spectral_radius(iteration_matrix(a, Method.jacobi()).T, tol=_CLASSIFY_TOL).rho
    rho_g = spectral_radius(
        iteration_matrix(a, Method.gauss_seidel()).T, tol=_CLASSIFY_TOL
    ).rho
    if flags["is_positive_definite"] and flags["is_tridiagonal"] and rho_j < 1.0:
        omega_star = optimal_omega(rho_j)
        sor_omega = omega_star
    else:
        omega_star = None
        sor_omega = _FALLBACK_OMEGA
    rho_s = spectral_radius(
        iteration_matrix(a, Method.sor(sor_omega)).T, tol=_CLASSIFY_TOL
    ).rho
    pick = _best_method(rho_j, rho_g, rho_s, sor_omega)
    return MatrixProfile(
        **flags,
        rho_jacobi=rho_j,
        rho_gauss_seidel=rho_g,
        rho_sor=rho_s,
        omega_star=omega_star,
        sor_omega=sor_omega,
        recommendation=pick[0] if pick is not None else "none convergent",
    )


def _sufficient_condition_note(profile: MatrixProfile, method: Method) -> str:
    if method.tag == "jacobi" and profile.is_strictly_diag_dominant:
        return "the matrix is strictly diagonally dominant"
    if method.tag == "gauss-seidel" and profile.is_positive_definite:
        return "the matrix is symmetric positive definite"
    if method.tag == "sor" and profile.omega_star is not None:
        return "the weight is optimal for this symmetric positive definite tridiagonal matrix"
    return "no sufficient condition holds; convergent by spectral estimate alone"


def select_method(profile: MatrixProfile) -> tuple[Method, str]:
    """The method with the smallest measured radius, with a rationale.

    Ties within 1e-9 go to Gauss-Seidel, then SOR, then Jacobi.  Raises
    ``NoConvergentMethodError`` when no radius is below 1.
    """
    if profile.has_zero_diagonal:
        raise NoConvergentMethodError(
            "no convergent stationary method: a zero diagonal entry rules out every sweep"
        )
    pick = _best_method(
        profile.rho_jacobi, profile.rho_gauss_seidel, profile.rho_sor, profile.sor_omega
    )
    if pick is None:
        raise NoConvergentMethodError(
            "no convergent stationary method: every spectral radius estimate is at least 1"
        )
    method, rho = pick
    if method.tag == "sor":
        head = f"sor(omega={method.omega:.6f})"
    else:
        head = method.tag
    rationale = (
        f"{head} has the smallest spectral radius estimate {rho:.6f}; "
        f"{_sufficient_condition_note(profile, method)}"
    )
    return method, rationale
