"""Jacobi, Gauss-Seidel, and SOR sweeps with the full solve driver.

Each sweep is written element-wise over the A = D - L - U splitting.  The
SOR update is evaluated as ``(1 - omega) * old + omega * (acc / diag)`` so
that omega = 1 degenerates to the Gauss-Seidel update entry for entry.

The solve driver defers the first residual check until the predicted
iteration count (when a spectral-radius estimate below 1 is supplied) and
checks every iteration after that.  Residuals are always recomputed as
b - A x by a fresh matrix-vector product, never updated incrementally.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .errors import DivergenceError, ZeroDiagonalError
from .matrix_core import (
    DenseMatrix,
    Matrix,
    TriangularSplit,
    Vector,
    _matvec_list,
    _require_square,
    inf_norm,
    matvec,
    split_dlu,
)

__all__ = [
    "Method",
    "SolverConfig",
    "SolveReport",
    "IterationMatrix",
    "jacobi_sweep",
    "gauss_seidel_sweep",
    "sor_sweep",
    "iteration_matrix",
    "residual",
    "solve",
]

METHOD_TAGS = ("jacobi", "gauss-seidel", "sor")

# Iterates whose magnitude passes this bound abort the solve as divergent.
_DIVERGENCE_BOUND = 1e150


@dataclass(frozen=True)
class Method:
    """A stationary method tag plus, for SOR only, the relaxation weight."""

    tag: str
    omega: float | None = None

    def __post_init__(self):
        if self.tag not in METHOD_TAGS:
            raise ValueError(f"unknown method tag {self.tag!r}; expected one of {METHOD_TAGS}")
        if self.tag == "sor":
            if self.omega is None:
                raise ValueError("SOR requires a relaxation weight omega")
            if not (0.0 < self.omega < 2.0):
                raise ValueError(
                    f"omega={self.omega} violates the necessary condition "
                    "0 < omega < 2 for SOR convergence"
                )
        elif self.omega is not None:
            raise ValueError(f"omega only applies to SOR, not {self.tag!r}")

    @classmethod
    def jacobi(cls) -> "Method":
        return cls("jacobi")

    @classmethod
    def gauss_seidel(cls) -> "Method":
        return cls("gauss-seidel")

    @classmethod
    def sor(cls, omega: float) -> "Method":
        return cls("sor", float(omega))


@dataclass(frozen=True)
class SolverConfig:
    """Solve parameters.

    ``method=None`` means the caller wants automatic selection (resolved by
    the traffic pipeline or the CLI, never by ``solve`` itself).
    ``history_stride`` controls how often a residual norm is recorded; it
    never affects when convergence is checked.
    """

    method: Method | None = None
    eta: float = 1e-3
    max_iterations: int = 100000
    initial_guess: Vector | None = None
    history_stride: int = 1

    def __post_init__(self):
        if not (self.eta > 0.0):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.history_stride < 1:
            raise ValueError(f"history_stride must be at least 1, got {self.history_stride}")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of an iterative solve."""

    solution: Vector
    iterations_run: int
    predicted_iterations: int | None
    final_residual_norm: float
    residual_history: tuple[tuple[int, float], ...]
    converged: bool
    wall_time: float


@dataclass(frozen=True)
class IterationMatrix:
    """The fixed-point form x_new = T x_old + c of a stationary method."""

    T: DenseMatrix
    c: Vector
    method: Method

    def __post_init__(self):
        if self.T.rows != self.T.cols:
            raise ValueError(f"T is {self.T.rows}x{self.T.cols}, expected square")
        if len(self.c) != self.T.rows:
            raise ValueError(f"c has {len(self.c)} entries, expected {self.T.rows}")


def _split_parts(split: TriangularSplit):
    n = len(split.diag)
    lower = [list(split.strict_lower.row_items(i)) for i in range(n)]
    upper = [list(split.strict_upper.row_items(i)) for i in range(n)]
    return list(split.diag.entries), lower, upper


def _check_diag(diag) -> None:
    for i, d in enumerate(diag):
        if d == 0.0:
            raise ZeroDiagonalError(f"zero diagonal entry at row {i}")


def _check_lengths(split: TriangularSplit, x: Vector, b: Vector) -> None:
    n = len(split.diag)
    if len(x) != n or len(b) != n:
        raise ValueError(
            f"split is for {n} unknowns but x has {len(x)} and b has {len(b)} entries"
        )


def _jacobi_raw(d, lower, upper, xs, b) -> list[float]:
    out = []
    for i in range(len(d)):
        acc = b[i]
        for j, v in lower[i]:
            acc += v * xs[j]
        for j, v in upper[i]:
            acc += v * xs[j]
        out.append(acc / d[i])
    return out


def _gs_raw(d, lower, upper, xs, b) -> list[float]:
    out = list(xs)
    for i in range(len(d)):
        acc = b[i]
        for j, v in lower[i]:
            acc += v * out[j]
        for j, v in upper[i]:
            acc += v * out[j]
        out[i] = acc / d[i]
    return out


def _sor_raw(d, lower, upper, xs, b, omega) -> list[float]:
    out = list(xs)
    for i in range(len(d)):
        acc = b[i]
        for j, v in lower[i]:
            acc += v * out[j]
        for j, v in upper[i]:
            acc += v * out[j]
        out[i] = (1.0 - omega) * out[i] + omega * (acc / d[i])
    return out


def jacobi_sweep(split: TriangularSplit, x_prev: Vector, b: Vector) -> Vector:
    """One Jacobi sweep: x_i = (b_i - sum_{j != i} A_ij x_prev_j) / A_ii."""
    _check_lengths(split, x_prev, b)
    d, lower, upper = _split_parts(split)
    _check_diag(d)
    return Vector(tuple(_jacobi_raw(d, lower, upper, x_prev.entries, b.entries)))


def gauss_seidel_sweep(split: TriangularSplit, x_prev: Vector, b: Vector) -> Vector:
    """One Gauss-Seidel sweep; positions j < i read the current sweep's values."""
    _check_lengths(split, x_prev, b)
    d, lower, upper = _split_parts(split)
    _check_diag(d)
    return Vector(tuple(_gs_raw(d, lower, upper, x_prev.entries, b.entries)))


def sor_sweep(split: TriangularSplit, x_prev: Vector, b: Vector, omega: float) -> Vector:
    """One SOR sweep, blending the old value with the Gauss-Seidel update.

    The raw sweep accepts any omega so the weight's effect can be probed;
    the solve driver enforces 0 < omega < 2.
    """
    _check_lengths(split, x_prev, b)
    d, lower, upper = _split_parts(split)
    _check_diag(d)
    return Vector(tuple(_sor_raw(d, lower, upper, x_prev.entries, b.entries, float(omega))))


def iteration_matrix(a: Matrix, method: Method, b: Vector | None = None) -> IterationMatrix:
    """The dense fixed-point matrix T and offset c for a method.

    T_jacobi = D^-1 (L + U); T_gs = (D - L)^-1 U; and for SOR
    T_omega = (D - omega L)^-1 ((1 - omega) D + omega U).  Triangular
    inverses are applied by forward substitution per column; no general
    matrix is ever inverted.  With ``b`` omitted, c is the zero vector.
    """
    n = _require_square(a)
    if b is not None and len(b) != n:
        raise ValueError(f"matrix has {n} rows but vector has {len(b)} entries")
    split = split_dlu(a)
    d, lower, upper = _split_parts(split)
    _check_diag(d)
    upper_dense = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j, v in upper[i]:
            upper_dense[i][j] = v

    flat = [0.0] * (n * n)
    if method.tag == "jacobi":
        for i in range(n):
            for j, v in lower[i]:
                flat[i * n + j] = v / d[i]
            for j, v in upper[i]:
                flat[i * n + j] = v / d[i]
        c = [bi / di for bi, di in zip(b.entries, d)] if b is not None else [0.0] * n
    else:
        omega = 1.0 if method.tag == "gauss-seidel" else float(method.omega)
        # Columns of T solve (D - omega L) z = rhs by forward substitution,
        # where the stored lower part already carries the sign of L.
        for col in range(n):
            z = [0.0] * n
            for i in range(n):
                if method.tag == "gauss-seidel":
                    rhs = upper_dense[i][col]
                else:
                    rhs = (1.0 - omega) * d[i] if i == col else omega * upper_dense[i][col]
                acc = rhs
                for j, v in lower[i]:
                    acc += omega * v * z[j] if method.tag == "sor" else v * z[j]
                z[i] = acc / d[i]
            for i in range(n):
                flat[i * n + col] = z[i]
        c = [0.0] * n
        if b is not None:
            for i in range(n):
                acc = b[i] if method.tag == "gauss-seidel" else omega * b[i]
                for j, v in lower[i]:
                    acc += omega * v * c[j] if method.tag == "sor" else v * c[j]
                c[i] = acc / d[i]
    return IterationMatrix(DenseMatrix(n, n, tuple(flat)), Vector(tuple(c)), method)


def residual(a: Matrix, x: Vector, b: Vector) -> Vector:
    """The residual b - A x."""
    if a.rows != len(b):
        raise ValueError(f"matrix has {a.rows} rows but b has {len(b)} entries")
    y = matvec(a, x)
    return Vector(tuple(bi - yi for bi, yi in zip(b.entries, y.entries)))


def _residual_norm(a: Matrix, xs, b) -> float:
    y = _matvec_list(a, xs)
    acc = 0.0
    for bi, yi in zip(b, y):
        r = bi - yi
        acc += r * r
    return math.sqrt(acc)


def _profile_rho(profile, method: Method) -> float | None:
    if profile is None:
        return None
    if method.tag == "jacobi":
        return profile.rho_jacobi
    if method.tag == "gauss-seidel":
        return profile.rho_gauss_seidel
    # The profiled SOR radius only transfers when the weights match.
    if profile.rho_sor is not None and profile.sor_omega == method.omega:
        return profile.rho_sor
    return None


def solve(a: Matrix, b: Vector, config: SolverConfig, profile=None) -> SolveReport:
    """Run a stationary method until the residual norm drops below eta.

    When ``profile`` provides a spectral-radius estimate below 1 for the
    configured method, the predicted iteration count is computed from the
    first step and residual checks start only there; otherwise every
    iteration is checked.  Aborts with ``DivergenceError`` if an iterate
    exceeds 1e150 or stops being finite.
    """
    method = config.method
    if method is None:
        raise ValueError("solver configuration requires a concrete method, not auto")
    n = _require_square(a)
    if len(b) != n:
        raise ValueError(f"matrix has {n} rows but vector has {len(b)} entries")
    split = split_dlu(a)
    d, lower, upper = _split_parts(split)
    _check_diag(d)
    x0 = config.initial_guess if config.initial_guess is not None else Vector.zeros(n)
    if len(x0) != n:
        raise ValueError(f"initial guess has {len(x0)} entries, expected {n}")

    omega = method.omega
    if method.tag == "jacobi":
        step = lambda xs: _jacobi_raw(d, lower, upper, xs, b.entries)
    elif method.tag == "gauss-seidel":
        step = lambda xs: _gs_raw(d, lower, upper, xs, b.entries)
    else:
        step = lambda xs: _sor_raw(d, lower, upper, xs, b.entries, omega)

    rho = _profile_rho(profile, method)
    eta = config.eta
    stride = config.history_stride
    history: list[tuple[int, float]] = []

    t0 = time.perf_counter()
    xs = list(x0.entries)
    predicted: int | None = None
    first_check = 1
    converged = False
    # The last loop iteration always lands in the check branch, so both of
    # these are overwritten before the loop ends.
    final_k = 0
    final_rnorm = math.inf
    for k in range(1, config.max_iterations + 1):
        xn = step(xs)
        for v in xn:
            if not math.isfinite(v) or abs(v) > _DIVERGENCE_BOUND:
                raise DivergenceError(f"iterate diverged at iteration {k}")
        if k == 1 and rho is not None and 0.0 < rho < 1.0:
            acc = 0.0
            for new, old in zip(xn, xs):
                dv = new - old
                acc += dv * dv
            first_step = math.sqrt(acc)
            if first_step > 0.0:
                from .convergence_analysis import estimate_iterations

                predicted = min(
                    estimate_iterations(eta, rho, inf_norm(a), first_step),
                    config.max_iterations,
                )
                first_check = predicted
        xs = xn
        rnorm: float | None = None
        if k % stride == 0:
            rnorm = _residual_norm(a, xs, b.entries)
            history.append((k, rnorm))
        if k >= first_check or k == config.max_iterations:
            if rnorm is None:
                rnorm = _residual_norm(a, xs, b.entries)
            final_k, final_rnorm = k, rnorm
            if rnorm < eta:
                converged = True
                break
    wall = time.perf_counter() - t0

    if not history or history[-1][0] != final_k:
        history.append((final_k, final_rnorm))
    return SolveReport(
        solution=Vector(tuple(xs)),
        iterations_run=final_k,
        predicted_iterations=predicted,
        final_residual_norm=final_rnorm,
        residual_history=tuple(history),
        converged=converged,
        wall_time=wall,
    )
