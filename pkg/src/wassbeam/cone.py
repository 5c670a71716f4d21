"""Dense solver for a quadratic objective under one second-order-cone constraint.

The problem class is::

    minimize    x^T P x
    subject to  ||A x||_2 <= b^T x - c

Every beamformer in this package is an instance (``P`` a lifted covariance,
``A = eps I`` or ``A = sqrt(2 eps) Gamma^{-1}``, ``b`` the mean lifted
steering vector, ``c = 1``).

Strategy: an exact feasibility test, a log-barrier path-following phase
started from a strictly feasible point, then Newton polishing of the KKT
system in ``(x, mu)``. The reported multiplier ``mu`` belongs to the cone
constraint in the Lagrangian ``x^T P x + mu (||Ax|| - b^T x + c)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-8
MAX_ITER = 200
REGULARIZATION = 1e-12

_BARRIER_DEGREE = 2.0
_T_FACTOR = 20.0
_BARRIER_GAP = 1e-6


@dataclass(frozen=True)
class ConeProblem:
    P: np.ndarray
    A: np.ndarray
    b: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = b.size
        if n < 1:
            raise ValueError("problem dimension must be at least 1")
        if P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}, got {P.shape}")
        if A.shape[1] != n:
            raise ValueError(f"A must have {n} columns, got {A.shape}")
        if np.max(np.abs(P - P.T)) > 1e-10:
            raise ValueError("P must be symmetric")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.b.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x)

    def constraint_gap(self, x) -> float:
        """``b^T x - c - ||Ax||``; nonnegative exactly on the feasible set."""
        x = np.asarray(x, dtype=float)
        return float(self.b @ x - self.c - np.linalg.norm(self.A @ x))


@dataclass(frozen=True)
class KktResiduals:
    primal_feas: float
    stationarity: float
    comp_slack: float

    def max(self) -> float:
        return max(self.primal_feas, self.stationarity, self.comp_slack)

    def to_dict(self) -> dict:
        return {
            "primal_feas": self.primal_feas,
            "stationarity": self.stationarity,
            "comp_slack": self.comp_slack,
        }


@dataclass(frozen=True)
class SolveReport:
    x_opt: np.ndarray | None
    objective: float
    multiplier: float
    status: str
    kkt: KktResiduals | None
    iterations: int
    regularized: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def to_dict(self) -> dict:
        return {
            "x_opt": None if self.x_opt is None else [float(v) for v in self.x_opt],
            "objective": self.objective,
            "multiplier": self.multiplier,
            "status": self.status,
            "kkt": None if self.kkt is None else self.kkt.to_dict(),
            "iterations": self.iterations,
            "regularized": self.regularized,
        }


def mvdr_closed_form(R, a) -> np.ndarray:
    """Real-valued MVDR weights ``R^{-1} a / (a^T R^{-1} a)``."""
    R = np.asarray(R, dtype=float)
    a = np.asarray(a, dtype=float).ravel()
    if np.linalg.eigvalsh(R).min() <= 1e-12:
        raise ValueError("covariance is singular (min eigenvalue <= 1e-12)")
    return mvdr_weights(R, a)


def mvdr_weights(R, a) -> np.ndarray:
    """MVDR weights without the singularity check, for already-regularized ``R``."""
    r_inv_a = np.linalg.solve(R, a)
    gain = a @ r_inv_a
    if not gain > 0:
        raise ValueError("a^T R^{-1} a must be positive")
    return r_inv_a / gain


def _min_residual_subgradient(P, A, b, x, mu) -> float:
    """min over ||v|| <= 1 of ||2Px - mu b + mu A^T v||, the subgradient case."""
    r = 2.0 * P @ x - mu * b
    if mu == 0 or not np.any(A):
        return float(np.linalg.norm(r))
    M = mu * A.T
    # trust-region subproblem via the SVD of M
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    beta = U.T @ (-r)
    perp = -r - U @ beta
    keep = s > s.max() * 1e-14
    v_free = Vt[keep].T @ (beta[keep] / s[keep])
    if np.linalg.norm(v_free) <= 1.0:
        return float(np.linalg.norm(r + M @ v_free))

    def v_of(gam):
        return Vt.T @ (s * beta / (s**2 + gam))

    lo, hi = 0.0, max(1.0, float(np.linalg.norm(M, 2) * np.linalg.norm(r)))
    while np.linalg.norm(v_of(hi)) > 1.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(v_of(mid)) > 1.0:
            lo = mid
        else:
            hi = mid
    v = v_of(hi)
    return float(np.linalg.norm(r + M @ v)) if perp.size else 0.0


def kkt_residuals(problem: ConeProblem, x, multiplier: float) -> KktResiduals:
    if multiplier < 0:
        raise ValueError("multiplier must be nonnegative")
    x = np.asarray(x, dtype=float).ravel()
    P, A, b, c = problem.P, problem.A, problem.b, problem.c
    Ax = A @ x
    norm_ax = float(np.linalg.norm(Ax))
    slack = float(b @ x - c - norm_ax)
    scale = np.linalg.norm(A) * np.linalg.norm(x)
    if norm_ax > 1e-14 * max(scale, 1e-300):
        grad = 2.0 * P @ x + multiplier * (A.T @ Ax / norm_ax - b)
        stationarity = float(np.linalg.norm(grad))
    else:
        stationarity = _min_residual_subgradient(P, A, b, x, multiplier)
    return KktResiduals(
        primal_feas=max(0.0, -slack),
        stationarity=stationarity,
        comp_slack=abs(multiplier * slack),
    )


def strictly_feasible_direction(A, b) -> np.ndarray | None:
    """Return ``u`` with ``b^T u > ||A u||``, or None if none exists.

    Such ``u`` exists iff ``b`` lies outside ``{A^T y : ||y|| <= 1}``, which is
    decided from the minimum-norm solution of ``A^T y = b``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    y, *_ = np.linalg.lstsq(A.T, b, rcond=None)
    resid = b - A.T @ y
    b_norm = max(float(np.linalg.norm(b)), 1e-300)
    if np.linalg.norm(resid) > 1e-12 * b_norm:
        # resid lies in null(A) and has positive inner product with b
        return resid
    if np.linalg.norm(y) > 1.0 + 1e-12:
        u, *_ = np.linalg.lstsq(A, y, rcond=None)
        return u
    return None


def _barrier_terms(P, A, b, c, x, t):
    s = b @ x - c
    Ax = A @ x
    D = s * s - Ax @ Ax
    if s <= 0 or D <= 0:
        return None
    f = t * (x @ P @ x) - np.log(D)
    gD = 2.0 * s * b - 2.0 * A.T @ Ax
    grad = 2.0 * t * P @ x - gD / D
    hess = 2.0 * t * P + np.outer(gD, gD) / D**2 - (2.0 * np.outer(b, b) - 2.0 * A.T @ A) / D
    return f, grad, hess, s, D


def _polish(P, A, b, c, x, mu, budget):
    """Newton iterations on the active-constraint KKT system."""

    def residual(x, mu):
        Ax = A @ x
        nrm = np.linalg.norm(Ax)
        g_n = A.T @ Ax / nrm if nrm > 0 else np.zeros_like(x)
        return np.concatenate([2.0 * P @ x + mu * (g_n - b), [nrm - b @ x + c]]), Ax, nrm, g_n

    n = x.size
    F, Ax, nrm, g_n = residual(x, mu)
    steps = 0
    while steps < budget:
        fnorm = np.linalg.norm(F)
        if fnorm == 0:
            break
        if nrm > 0:
            H_n = (A.T @ A - np.outer(g_n, g_n)) / nrm
        else:
            H_n = np.zeros((n, n))
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = 2.0 * P + mu * H_n
        J[:n, n] = g_n - b
        J[n, :n] = g_n - b
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        steps += 1
        alpha = 1.0
        improved = False
        while alpha > 1e-4:
            x_new = x + alpha * delta[:n]
            mu_new = mu + alpha * delta[n]
            if mu_new >= 0:
                F_new, Ax_new, nrm_new, g_new = residual(x_new, mu_new)
                if np.linalg.norm(F_new) < fnorm:
                    improved = True
                    break
            alpha *= 0.5
        if not improved:
            break
        x, mu, F, Ax, nrm, g_n = x_new, mu_new, F_new, Ax_new, nrm_new, g_new
        # progress slower than linear means we hit the rounding floor
        if np.linalg.norm(F) > 0.5 * fnorm:
            break
    return x, mu, steps


def _null_face_candidate(P, A, b, c):
    """Optimum restricted to ``Ax = 0``, where the norm is not differentiable.

    Solves ``2Px - mu b + A^T nu = 0, Ax = 0, b^T x = c``; the point is a
    KKT point of the full problem when ``||nu|| <= mu``.
    """
    m, n = A.shape
    K = np.zeros((n + m + 1, n + m + 1))
    K[:n, :n] = 2.0 * P
    K[:n, n : n + m] = A.T
    K[:n, -1] = -b
    K[n : n + m, :n] = A
    K[-1, :n] = b
    rhs = np.zeros(n + m + 1)
    rhs[-1] = c
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    x, nu, mu = sol[:n], sol[n : n + m], sol[-1]
    if mu < 0 or np.linalg.norm(nu) > mu * (1.0 + 1e-9):
        return None
    return x, float(mu)


def solve_cone(problem: ConeProblem, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> SolveReport:
    """Solve ``min x^T P x  s.t. ||Ax|| <= b^T x - c``.

    Returns a report with status ``optimal``, ``infeasible`` or
    ``numerical_failure``. ``optimal`` guarantees every KKT residual is at
    most ``tol``.
    """
    if not 0 < tol <= 1e-2:
        raise ValueError("tol must lie in (0, 1e-2]")
    P, A, b, c = problem.P, problem.A, problem.b, problem.c
    n = problem.n
    eig_min = float(np.linalg.eigvalsh(P).min())
    if eig_min < -1e-10:
        raise ValueError("P must be positive semidefinite")
    regularized = eig_min < REGULARIZATION
    P_work = P + REGULARIZATION * np.eye(n) if regularized else P

    if c <= 0:
        # x = 0 is feasible and the objective is nonnegative
        x = np.zeros(n)
        kkt = kkt_residuals(problem, x, 0.0)
        return SolveReport(x, 0.0, 0.0, "optimal", kkt, 0, regularized)

    u = strictly_feasible_direction(A, b)
    if u is None:
        return SolveReport(None, float("inf"), 0.0, "infeasible", None, 0, regularized)
    x = u * (2.0 * c / (b @ u - np.linalg.norm(A @ u)))

    iterations = 0
    t = _BARRIER_DEGREE / max(x @ P_work @ x, 1e-300)
    mu = 0.0
    converged = False
    while iterations < max_iter:
        # centering by damped Newton
        while iterations < max_iter:
            f, grad, hess, s, D = _barrier_terms(P_work, A, b, c, x, t)
            try:
                dx = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            decrement = -grad @ dx
            if decrement <= 1e-9:
                break
            iterations += 1
            alpha = 1.0
            while alpha > 1e-12:
                trial = _barrier_terms(P_work, A, b, c, x + alpha * dx, t)
                if trial is not None and trial[0] <= f - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            # Armijo is swamped by rounding in f once t is large
            if alpha < 1e-3 and decrement < 1e-6:
                break
            x = x + alpha * dx
        _, _, _, s, D = _barrier_terms(P_work, A, b, c, x, t)
        mu = 2.0 * s / (t * D)
        objective = x @ P_work @ x
        # the barrier loses accuracy to cancellation near the boundary;
        # polishing takes over from a moderate gap
        if _BARRIER_DEGREE / t <= _BARRIER_GAP * max(objective, 1e-300):
            converged = True
            break
        t *= _T_FACTOR

    if converged:
        x, mu, steps = _polish(P_work, A, b, c, x, mu, max_iter - iterations)
        iterations += steps

    kkt = kkt_residuals(problem, x, mu)
    if converged and kkt.max() > tol and np.any(A):
        face = _null_face_candidate(P_work, A, b, c)
        if face is not None:
            face_kkt = kkt_residuals(problem, *face)
            if face_kkt.max() < kkt.max():
                (x, mu), kkt = face, face_kkt
    status = "optimal" if converged and kkt.max() <= tol else "numerical_failure"
    return SolveReport(x, problem.objective(x), float(mu), status, kkt, iterations, regularized)
