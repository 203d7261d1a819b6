"""Shifted two-sided Lanczos solver: one basis answers every parameter value
on a line.

A sweep fixes one parameter, builds the companion pencil of the Chebyshev
approximation along the free axis, and runs two-sided Lanczos on
B = M (K - sigma M)^{-1} started from the stacked right-hand side. Every
free-axis value mu is then recovered from a k x k shifted tridiagonal
solve plus one application of the stored LU, so one factorization serves
the whole line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .chebyshev import ChebyshevOperator, CompanionPencil
from .errors import BreakdownError, NoConvergenceError, SingularShiftError
from .linalg import solve_shifted_tridiagonal


def default_sigma(interval):
    """Default shift: interval midpoint nudged by 2% of the half-width so
    the shift does not collide with equidistant sample values."""
    lo, hi = interval
    return 0.5 * (lo + hi) + 0.02 * 0.5 * (hi - lo)


class ShiftedKrylov:
    """Two-sided Lanczos state for B = M (K - sigma M)^{-1}.

    Columns of the primal basis are unit-norm; the dual basis is scaled so
    that W^T V = I. The Lanczos relation
        B V_k = V_k T_k + beta_k v_{k+1} e_k^T
    holds to rounding by construction, which makes the cheap residual
    identity in residual_estimate exact for the preconditioned system
    (I + (sigma - mu) B) xhat = c.
    """

    def __init__(self, pencil, b, dual_perturbation=None,
                 tolerate_breakdown=False):
        self.pencil = pencil
        self.b = np.asarray(b, dtype=np.float64)
        self.beta = float(np.linalg.norm(self.b))
        self.tolerate_breakdown = tolerate_breakdown
        self.near_breakdowns = 0
        if self.beta == 0.0:
            raise ValueError("right-hand side must be nonzero")
        c = pencil.stack_rhs(self.b)
        v1 = c / self.beta
        w1 = v1.copy()
        if dual_perturbation is not None:
            rng = np.random.default_rng(dual_perturbation)
            w1 = w1 + 1e-8 * rng.standard_normal(w1.shape[0])
            w1 /= w1 @ v1
        dim = pencil.block_size
        self._V = np.empty((dim, 16))
        self._W = np.empty((dim, 16))
        self._V[:, 0] = v1
        self._W[:, 0] = w1
        self.k = 0                      # completed Lanczos steps
        self.diag = []                  # T_k diagonal
        self.sub = []                   # T_k subdiagonal (beta coefficients)
        self.sup = []                   # T_k superdiagonal
        self.beta_next = None           # beta_k of the Lanczos relation
        self.exhausted = False          # happy breakdown: invariant subspace

    def _ensure_capacity(self, k):
        if k >= self._V.shape[1]:
            grow = max(2 * self._V.shape[1], k + 1)
            for name in ("_V", "_W"):
                old = getattr(self, name)
                new = np.empty((old.shape[0], grow))
                new[:, : old.shape[1]] = old
                setattr(self, name, new)

    @property
    def basis(self):
        """Primal basis V_k (dim x k)."""
        return self._V[:, : self.k]

    @property
    def dual_basis(self):
        return self._W[:, : self.k]

    @property
    def next_vector(self):
        """Unit candidate v_{k+1} of the Lanczos relation."""
        return self._V[:, self.k]

    def apply_operator(self, u):
        """B u = M (K - sigma M)^{-1} u."""
        return self.pencil.apply_M(self.pencil.solve(u))

    def apply_operator_transpose(self, u):
        return self.pencil.solve(self.pencil.apply_M(u, transpose=True),
                                 transpose=True)

    def grow(self, steps):
        """Advance the recurrence by ``steps`` Lanczos iterations.

        Each step costs one shifted solve plus one M-apply for the primal
        direction and the transposed pair for the dual one. Raises
        BreakdownError on serious breakdown (caller may retry with a
        perturbed dual start); a happy breakdown (invariant subspace)
        just marks the state exhausted.
        """
        for _ in range(steps):
            if self.exhausted:
                return self
            j = self.k
            v = self._V[:, j]
            w = self._W[:, j]
            Bv = self.apply_operator(v)
            Btw = self.apply_operator_transpose(w)
            alpha = float(w @ Bv)
            vhat = Bv - alpha * v
            what = Btw - alpha * w
            if j > 0:
                vhat -= self.sup[j - 1] * self._V[:, j - 1]
                what -= self.sub[j - 1] * self._W[:, j - 1]
            beta_new = float(np.linalg.norm(vhat))
            self.diag.append(alpha)
            if beta_new < 1e-14 * max(abs(alpha), 1.0):
                self.k += 1
                self.beta_next = 0.0
                self.exhausted = True
                return self
            vnew = vhat / beta_new
            omega = float(what @ vnew)
            if abs(omega) < 1e-12 * float(np.linalg.norm(what)):
                # Candidate pair nearly orthogonal. The primal three-term
                # relation (all that the shifted evaluations rely on) stays
                # machine-exact either way, so a tolerant state pushes
                # through with inflated dual vectors instead of dying;
                # end-of-sweep residual verification guards the results.
                if not self.tolerate_breakdown or omega == 0.0:
                    self.diag.pop()
                    raise BreakdownError(
                        "two-sided Lanczos breakdown (|w^T v| below 1e-12 scale)",
                        step=j + 1,
                    )
                self.near_breakdowns += 1
            self._ensure_capacity(j + 1)
            self._V[:, j + 1] = vnew
            self._W[:, j + 1] = what / omega
            self.sub.append(beta_new)
            self.sup.append(omega)
            self.k += 1
            self.beta_next = beta_new
        return self

    def _reduced_solution(self, mu):
        if self.k < 1:
            raise ValueError("grow the subspace before evaluating")
        rhs = np.zeros(self.k)
        rhs[0] = self.beta
        return solve_shifted_tridiagonal(
            self.diag, self.sub[: self.k - 1], self.sup[: self.k - 1],
            self.sigma_minus(mu), rhs,
        )

    def sigma_minus(self, mu):
        return self.pencil.sigma - mu

    def evaluate(self, mu):
        """Approximate solution of the original n x n system at mu.

        mu == sigma is permitted (the reduced system becomes the identity
        and the result is the preconditioner-exact solution); a warning is
        emitted since the shift was presumably chosen to avoid sample
        points.
        """
        if mu == self.pencil.sigma:
            warnings.warn("evaluating exactly at the shift sigma", stacklevel=2)
        y = self._reduced_solution(mu)
        z = self.basis @ y
        u = self.pencil.solve(z)
        return u[: self.pencil.n]

    def residual_estimate(self, mu):
        """Relative residual of the preconditioned system at mu, computed
        from the Lanczos relation: |sigma - mu| * beta_k * |e_k^T y| / beta
        (the candidate vector is unit norm)."""
        if self.exhausted and self.beta_next == 0.0:
            return 0.0
        y = self._reduced_solution(mu)
        return abs(self.sigma_minus(mu)) * self.beta_next * abs(y[-1]) / self.beta

    def explicit_residual(self, mu):
        """||c - (I + (sigma - mu) B) V_k y|| / beta, the residual the cheap
        estimate reproduces; costs one extra operator application."""
        y = self._reduced_solution(mu)
        xk = self.basis @ y
        c = self.pencil.stack_rhs(self.b)
        r = c - xk - self.sigma_minus(mu) * self.apply_operator(xk)
        return float(np.linalg.norm(r)) / self.beta

    def biorthogonality_drift(self):
        """Biorthogonality loss diagnostic, on demand.

        Dual columns are scaled so W^T V = I, which makes their norms grow
        as Ritz values converge; raw entries of W^T V - I then blow up
        mechanically without harming the recurrence. The returned drift is
        therefore angle-normalized: max |(W^T V - I)_ij| / ||w_i|| with
        unit-norm v_j, i.e. the worst cosine leakage between the bases.
        """
        if self.k == 0:
            return 0.0
        G = self.dual_basis.T @ self.basis
        norms = np.linalg.norm(self.dual_basis, axis=0)
        leak = np.abs(G - np.eye(self.k)) / norms[:, None]
        return float(leak.max())

    def lanczos_relation_residual(self):
        """max abs residual of B V_k = V_k T_k + beta_k v_{k+1} e_k^T;
        holds to rounding by construction (on-demand check)."""
        if self.k == 0:
            return 0.0
        V = self.basis
        BV = np.column_stack([self.apply_operator(V[:, j]) for j in range(self.k)])
        T = np.zeros((self.k, self.k))
        T[np.diag_indices(self.k)] = self.diag
        for j in range(self.k - 1):
            T[j + 1, j] = self.sub[j]
            T[j, j + 1] = self.sup[j]
        rel = BV - V @ T
        if not self.exhausted:
            rel[:, -1] -= self.beta_next * self.next_vector
        return float(np.abs(rel).max())


@dataclass
class SnapshotLine:
    """Solutions along one parameter line (one sweep, one factorization)."""

    fixed_axis: int
    fixed_value: float
    values: np.ndarray
    snapshots: np.ndarray          # (len(values), n)
    converged: np.ndarray          # bool per value
    residuals: np.ndarray
    sigma: float
    tol: float
    k: int
    meta: dict = field(default_factory=dict)

    def snapshot(self, mu):
        idx = int(np.argmin(np.abs(self.values - mu)))
        if abs(self.values[idx] - mu) > 1e-12 * max(1.0, abs(mu)):
            raise KeyError("value %g not on this line" % mu)
        return self.snapshots[idx]


def snapshot_sweep(problem, fixed_axis, fixed_value, free_values, sigma=None,
                   tol=1e-8, k_max=300, check_every=1, cheb_tol=1e-13,
                   drift_tol=1e-3, verify_residual=True):
    """Generate all snapshots on one parameter line from a single Krylov
    recurrence (exactly one LU factorization).

    Grows the subspace until the cheap residual estimate is below ``tol``
    for every requested value (checked every ``check_every`` steps; the
    checks are O(k) per value, so per-step checking costs nothing and
    avoids post-convergence steps that only degrade biorthogonality) or
    k_max is reached, then materializes the solutions. Raises
    NoConvergenceError (with the partial SnapshotLine attached) when some
    values remain above tolerance at k_max.
    """
    free_values = np.asarray(free_values, dtype=np.float64)
    (a1, b1), (a2, b2) = problem.box
    lo, hi = ((a2, b2) if fixed_axis == 1 else (a1, b1))
    if free_values.min() < lo or free_values.max() > hi:
        raise ValueError("free values outside the parameter box")
    if sigma is None:
        sigma = default_sigma((lo, hi))

    operator = ChebyshevOperator(problem, fixed_axis, fixed_value, tol=cheb_tol)
    pencil = CompanionPencil(operator, sigma)

    state = ShiftedKrylov(pencil, problem.b)
    try:
        state = _grow_until(state, free_values, tol, k_max, check_every)
    except BreakdownError as exc:
        warnings.warn(
            "Lanczos breakdown at step %d; retrying with perturbed dual start"
            % exc.step, stacklevel=2,
        )
        try:
            state = ShiftedKrylov(pencil, problem.b, dual_perturbation=exc.step)
            state = _grow_until(state, free_values, tol, k_max, check_every)
        except BreakdownError as exc2:
            warnings.warn(
                "Lanczos breakdown again at step %d; continuing with a "
                "breakdown-tolerant recurrence" % exc2.step, stacklevel=2,
            )
            state = ShiftedKrylov(pencil, problem.b, tolerate_breakdown=True)
            state = _grow_until(state, free_values, tol, k_max, check_every)

    residuals = np.array([state.residual_estimate(mu) for mu in free_values])
    snaps = np.empty((free_values.shape[0], problem.n))
    for i, mu in enumerate(free_values):
        try:
            snaps[i] = state.evaluate(mu)
        except SingularShiftError:
            nudge = 1e-12 * (hi - lo)
            snaps[i] = state.evaluate(mu + nudge)
    converged = residuals < tol

    drift = state.biorthogonality_drift()
    if drift > drift_tol:
        warnings.warn("biorthogonality drift %.2e above %.1e" % (drift, drift_tol),
                      stacklevel=2)
    if verify_residual and residuals.size:
        # One extra operator application: confirm the cheap estimate against
        # the explicitly computed preconditioned residual at the worst value.
        worst = int(np.argmax(residuals))
        explicit = state.explicit_residual(free_values[worst])
        if abs(explicit - residuals[worst]) > 100.0 * tol:
            warnings.warn(
                "residual estimate %.2e disagrees with explicit residual %.2e"
                % (residuals[worst], explicit), stacklevel=2)

    line = SnapshotLine(
        fixed_axis=fixed_axis,
        fixed_value=float(fixed_value),
        values=free_values,
        snapshots=snaps,
        converged=converged,
        residuals=residuals,
        sigma=float(sigma),
        tol=float(tol),
        k=state.k,
        meta={"chebyshev_degree": operator.degree,
              "chebyshev_coefficients": [s.coefficients.tolist()
                                         for s in operator.scalar_series],
              "biorthogonality_drift": drift,
              "near_breakdowns": state.near_breakdowns},
    )
    if not converged.all():
        bad = [(float(mu), float(r))
               for mu, r in zip(free_values[~converged], residuals[~converged])]
        raise NoConvergenceError(
            "sweep left %d value(s) above tol %.1e at k=%d: %s"
            % (len(bad), tol, state.k, bad),
            partial=line,
            detail={"unconverged": bad},
        )
    return line


def _grow_until(state, free_values, tol, k_max, check_every):
    while state.k < k_max and not state.exhausted:
        state.grow(min(check_every, k_max - state.k))
        worst = max(state.residual_estimate(mu) for mu in free_values)
        if worst < tol:
            break
    return state
