"""Minimal solutions of the four quadratic matrix equations of a QBD.

For coefficients (B_-1, B_0, B_1), B_0 = A_0 - I, the equations are

    (1) B_-1 + B_0 X + B_1 X^2 = 0        minimal solution G
    (2) X^2 B_-1 + X B_0 + B_1 = 0        minimal solution R
    (3) B_-1 X^2 + B_0 X + B_1 = 0        minimal solution Ghat
    (4) B_-1 + X B_0 + X^2 B_1 = 0        minimal solution Rhat

Cyclic reduction is the primary solver: each sweep squares the spectral
ratio of the splitting roots, so convergence is quadratic whenever the
n-th and (n+1)-th roots of B(z) are separated, and degrades to linear
(rate 1/2) exactly at null recurrence. Equation (3) is equation (1) for
the reversed polynomial, which is how the hat pair is computed.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import kernel, model as model_mod

__all__ = [
    "CrOutcome",
    "SolutionSet",
    "compute_w",
    "cyclic_reduction",
    "derive_r_k",
    "equation_residuals",
    "hats_from_w",
    "residual_g",
    "residual_ghat",
    "residual_r",
    "residual_rhat",
    "solve_all",
    "solve_hat_pair",
    "solve_min_g",
    "solve_min_g_oracle",
]

CR_TOL = 1e-14
CR_MAX_ITER = 64
# Tolerance relaxed for unshifted null-recurrent solves, which stall at
# the double unit root.
CR_TOL_NULL = 1e-8
NEG_CLAMP = 1e-12


def residual_g(bm, b0, bp, x):
    return kernel.inf_norm(bm + b0 @ x + bp @ x @ x)


def residual_r(bm, b0, bp, x):
    return kernel.inf_norm(x @ x @ bm + x @ b0 + bp)


def residual_ghat(bm, b0, bp, x):
    return kernel.inf_norm(bm @ x @ x + b0 @ x + bp)


def residual_rhat(bm, b0, bp, x):
    return kernel.inf_norm(bm + x @ b0 + x @ x @ bp)


@dataclasses.dataclass(frozen=True)
class CrOutcome:
    """Full cyclic-reduction outcome (solve_min_g returns the short form)."""

    g: np.ndarray
    iterations: int
    converged: bool
    min_norm: float
    residual: float
    rate_estimate: float


def cyclic_reduction(b_minus, b_zero, b_plus, tol=CR_TOL, max_iter=CR_MAX_ITER):
    """Cyclic reduction for the minimal-spectral-radius solution of (1).

    Sweeps L <- -L D^-1 L, U <- -U D^-1 U, D <- D - L D^-1 U - U D^-1 L
    while accumulating Dh <- Dh - U D^-1 L, until min(||L||, ||U||) <= tol
    (the off-term that dies decides which splitting side converged);
    then G = -Dh^-1 B_-1. Dh converges to B_0 + B_1 G.
    """
    low = kernel.as_square(b_minus, "b_minus").copy()
    diag = kernel.as_square(b_zero, "b_zero").copy()
    up = kernel.as_square(b_plus, "b_plus").copy()
    diag_hat = diag.copy()

    def min_norm():
        return min(kernel.inf_norm(low), kernel.inf_norm(up))

    first = min_norm()
    history = [first]
    k = 0
    while history[-1] > tol and k < max_iter:
        try:
            inv = kernel.solve_linear(diag, np.eye(diag.shape[0]))
        except kernel.SingularMatrixError as exc:
            raise kernel.SingularMatrixError(
                f"singular pivot block at cyclic-reduction step {k}"
            ) from exc
        lxl = low @ inv @ low
        uxu = up @ inv @ up
        lxu = low @ inv @ up
        uxl = up @ inv @ low
        low = -lxl
        up = -uxu
        diag = diag - lxu - uxl
        diag_hat = diag_hat - uxl
        k += 1
        history.append(min_norm())
    g = -kernel.solve_linear(diag_hat, kernel.as_square(b_minus))
    res = residual_g(
        np.asarray(b_minus, float), np.asarray(b_zero, float), np.asarray(b_plus, float), g
    )
    steps = max(k, 1)
    rate = (history[-1] / first) ** (1.0 / steps) if first > 0 else 0.0
    return CrOutcome(
        g=g,
        iterations=k,
        converged=history[-1] <= tol,
        min_norm=history[-1],
        residual=res,
        rate_estimate=float(rate),
    )


def solve_min_g(b_minus, b_zero, b_plus, tol=CR_TOL, max_iter=CR_MAX_ITER,
                res_tol=None):
    """Minimal solution of (1) by cyclic reduction; returns (G, iterations).

    Raises ConvergenceError (with the trailing iterate attached) when the
    equation residual stays above res_tol (default: max(tol, 1e-12)); this
    is expected only for unshifted null-recurrent coefficients driven at a
    tolerance they cannot reach.
    """
    outcome = cyclic_reduction(b_minus, b_zero, b_plus, tol=tol, max_iter=max_iter)
    bound = res_tol if res_tol is not None else max(tol, 1e-12)
    if outcome.residual > bound:
        raise kernel.ConvergenceError(
            f"cyclic reduction stalled after {outcome.iterations} sweeps "
            f"(residual {outcome.residual:.3e} > {bound:.1e})",
            iterations=outcome.iterations,
            residual=outcome.residual,
            solution=outcome.g,
        )
    return outcome.g, outcome.iterations


def solve_min_g_oracle(b_minus, b_zero, b_plus, tol=1e-12, max_iter=2_000_000):
    """Independent oracle for (1): the natural fixed point

        X_0 = 0,   X_{k+1} = B_-1 + (B_0 + I) X_k + B_1 X_k^2,

    which for substochastic coefficients increases monotonically to the
    minimal nonnegative solution. Stops at entrywise increment <= tol.
    Linearly convergent, O(1/k) at a double unit root; returns
    (G, iterations).
    """
    bm = np.asarray(b_minus, dtype=float)
    a0 = np.asarray(b_zero, dtype=float) + np.eye(bm.shape[0])
    bp = np.asarray(b_plus, dtype=float)
    x = np.zeros_like(bm)
    for k in range(1, max_iter + 1):
        nxt = bm + a0 @ x + bp @ x @ x
        if np.max(np.abs(nxt - x)) <= tol:
            return nxt, k
        x = nxt
    raise kernel.ConvergenceError(
        f"fixed-point oracle did not converge in {max_iter} iterations",
        iterations=max_iter,
        solution=x,
    )


def derive_r_k(b_zero, b_plus, g, clamp=NEG_CLAMP, nonneg=True):
    """K = B_0 + B_1 G and R = -B_1 K^-1 from a solved G.

    With nonneg=True (original, unshifted problems) entries of R below
    -clamp raise and round-off negatives are clamped to zero; shifted
    problems pass nonneg=False since their minimal solutions may be
    genuinely signed.
    """
    b0 = np.asarray(b_zero, dtype=float)
    bp = np.asarray(b_plus, dtype=float)
    try:
        k = b0 + bp @ g
        r = -kernel.solve_linear(k.T, bp.T).T
    except kernel.SingularMatrixError as exc:
        raise kernel.SingularMatrixError(
            "K = B_0 + B_1 G is singular: G does not solve the equation "
            "(for a valid QBD, -K is a nonsingular M-matrix)"
        ) from exc
    if nonneg:
        if np.min(r) < -clamp:
            raise ValueError(f"R has an entry below -{clamp:g}: {np.min(r):.3e}")
        r = np.maximum(r, 0.0)
    return r, k


def solve_hat_pair(model, tol=CR_TOL, max_iter=CR_MAX_ITER, res_tol=None):
    """(Ghat, Rhat, Khat, iterations): minimal solutions of (3) and (4).

    Ghat is the minimal solution of (1) for the reversed polynomial;
    Khat = B_0 + A_-1 Ghat and Rhat = -A_-1 Khat^-1.
    """
    b0 = model.b_zero()
    ghat, iters = solve_min_g(
        model.a_plus, b0, model.a_minus, tol=tol, max_iter=max_iter, res_tol=res_tol
    )
    rhat, khat = derive_r_k(b0, model.a_minus, ghat)
    return ghat, rhat, khat, iters


def compute_w(g, k, r, ghat=None, tol=1e-10):
    """W = sum_i G^i K^-1 R^i via the Stein equation W - G W R = K^-1.

    Requires rho(G) rho(R) < 1 (not null recurrent). Postconditions
    checked here: W nonsingular; K (I - G Ghat) W = I when Ghat is given.
    ||W|| grows like the reciprocal spectral gap near null recurrence, so
    the identity check scales with ||K|| ||W||.
    """
    k_inv = kernel.solve_linear(k, np.eye(k.shape[0]))
    w = kernel.stein_solve(g, r, k_inv)
    kernel.solve_linear(w, np.eye(w.shape[0]))  # nonsingularity probe
    if ghat is not None:
        eye = np.eye(w.shape[0])
        res = kernel.inf_norm(k @ (eye - g @ ghat) @ w - eye)
        scale = max(1.0, kernel.inf_norm(k) * kernel.inf_norm(w))
        if res > tol * scale:
            raise kernel.ConvergenceError(
                f"W inverse identity K(I - G Ghat) W = I fails: {res:.3e} "
                f"(scale {scale:.2e})",
                residual=res,
            )
    return w


def hats_from_w(w, g, r):
    """(Ghat, Rhat) = (W R W^-1, W^-1 G W); raises on singular W."""
    w_inv = kernel.solve_linear(w, np.eye(w.shape[0]))
    return w @ r @ w_inv, w_inv @ g @ w


@dataclasses.dataclass(frozen=True)
class SolutionSet:
    """Minimal solutions with their coupling factors and solve metadata."""

    g: np.ndarray
    r: np.ndarray
    ghat: np.ndarray
    rhat: np.ndarray
    k: np.ndarray
    khat: np.ndarray
    w: np.ndarray | None
    iterations: dict
    residuals: dict


def equation_residuals(model, g, r, ghat, rhat):
    """Infinity-norm residuals of the four equations on a triple."""
    bm, b0, bp = model.a_minus, model.b_zero(), model.a_plus
    return {
        "G": residual_g(bm, b0, bp, g),
        "R": residual_r(bm, b0, bp, r),
        "Ghat": residual_ghat(bm, b0, bp, ghat),
        "Rhat": residual_rhat(bm, b0, bp, rhat),
    }


def solve_all(model, cls=None, tol=None, max_iter=CR_MAX_ITER, stall_res_tol=1e-10):
    """Direct solve of all four equations on one triple.

    Null-recurrent inputs run at the relaxed tolerance and may stall at
    the iteration cap; the trailing iterate is accepted as long as its
    equation residual is below stall_res_tol (forward accuracy is then
    ~1e-7; the shifted route recovers full accuracy).
    """
    if cls is None:
        cls = model_mod.classify(model)
    null = cls.kind is model_mod.Kind.NULL_RECURRENT
    cr_tol = tol if tol is not None else (CR_TOL_NULL if null else CR_TOL)
    bm, b0, bp = model.a_minus, model.b_zero(), model.a_plus

    def run(bminus, bplus):
        try:
            return solve_min_g(
                bminus, b0, bplus, tol=cr_tol, max_iter=max_iter,
                res_tol=stall_res_tol if null else None,
            )
        except kernel.ConvergenceError as exc:
            if null and exc.solution is not None and exc.residual <= stall_res_tol:
                return exc.solution, exc.iterations
            raise

    g, it_g = run(bm, bp)
    r, k = derive_r_k(b0, bp, g)
    ghat, it_gh = run(bp, bm)
    rhat, khat = derive_r_k(b0, bm, ghat)
    w = None
    if not null:
        w = compute_w(g, k, r, ghat=ghat)
    return SolutionSet(
        g=g,
        r=r,
        ghat=ghat,
        rhat=rhat,
        k=k,
        khat=khat,
        w=w,
        iterations={"G": it_g, "Ghat": it_gh},
        residuals=equation_residuals(model, g, r, ghat, rhat),
    )
