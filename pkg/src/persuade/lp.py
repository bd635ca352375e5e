"""Dense two-phase primal simplex solver.

Solves   max c.x   s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0.

The implementation is a revised simplex with an explicit basis inverse, built
for LPs with a handful of rows and up to millions of columns (grid points).
Columns are stored vertex-major with the phase-2 cost appended, so pricing
every column is one tall-skinny BLAS matvec; slack and artificial columns
stay virtual.  Pricing is Dantzig (most positive reduced cost, ties broken
by lowest index); after ``DEGENERATE_PIVOT_FACTOR * rows`` degenerate pivots
the solver switches permanently to Bland's rule (lowest improving index),
which guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
DEGENERATE_PIVOT_FACTOR = 50
REFACTOR_EVERY = 100
MAX_ITER_BASE = 20_000


class LpError(Exception):
    """Base class for solver failures."""


class NumericError(LpError):
    """Numeric failure (cycling guard exhausted, singular basis, ...).

    Reported distinctly from infeasibility: an LP that trips this is not
    proven infeasible.
    """


@dataclass(frozen=True)
class LinearProgram:
    """max c.x  s.t.  A_eq x = b_eq, A_le x <= b_le, x >= 0."""

    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_le: np.ndarray
    b_le: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        A_le = np.atleast_2d(np.asarray(self.A_le, dtype=float))
        b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        b_le = np.atleast_1d(np.asarray(self.b_le, dtype=float))
        n = c.shape[0]
        if A_eq.size == 0:
            A_eq = np.zeros((0, n))
        if A_le.size == 0:
            A_le = np.zeros((0, n))
        if A_eq.shape[1] != n or A_le.shape[1] != n:
            raise LpError("constraint matrices do not match objective length")
        if A_eq.shape[0] != b_eq.shape[0] or A_le.shape[0] != b_le.shape[0]:
            raise LpError("right-hand sides do not match row counts")
        for arr in (c, A_eq, b_eq, A_le, b_le):
            if arr.size and not np.all(np.isfinite(arr)):
                raise LpError("non-finite entry in LP data")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "A_le", A_le)
        object.__setattr__(self, "b_le", b_le)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A_eq.shape[0] + self.A_le.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    value: float
    basis: tuple[int, ...]  # structural vars then slacks (n..n+m_le-1)


class _Simplex:
    """Working state for one solve.  Columns: structural | slack | artificial."""

    def __init__(self, lp: LinearProgram):
        self.n = lp.n_vars
        self.m_eq = lp.A_eq.shape[0]
        self.m_le = lp.A_le.shape[0]
        self.r = self.m_eq + self.m_le
        r, n = self.r, self.n
        neg = np.concatenate([lp.b_eq, lp.b_le]) < 0
        sign = np.where(neg, -1.0, 1.0)
        # Structural matrix stored column-major per vertex: row j holds the
        # constraint column of variable j (sign-normalized so b >= 0) plus
        # the phase-2 cost as the final entry, so pricing all columns is one
        # tall-skinny matvec.
        self.augT = np.empty((n, r + 1))
        self.augT[:, : self.m_eq] = lp.A_eq.T
        self.augT[:, self.m_eq: r] = lp.A_le.T
        for i in np.nonzero(neg)[0]:
            self.augT[:, i] *= -1.0
        self.augT[:, r] = lp.c
        self.b = np.abs(np.concatenate([lp.b_eq, lp.b_le]))
        # Slack column for le-row i is sign[m_eq + i] * e_{m_eq + i}.
        self.slack_sign = sign[self.m_eq:]
        self.n_slack = self.m_le
        self.c = lp.c
        # Basis: slacks where the sign allows, artificials elsewhere.
        self.basis = np.empty(r, dtype=np.int64)
        for i in range(r):
            le_idx = i - self.m_eq
            if le_idx >= 0 and self.slack_sign[le_idx] > 0:
                self.basis[i] = n + le_idx
            else:
                self.basis[i] = n + self.n_slack + i
        self.in_basis: set[int] = set(int(j) for j in self.basis)
        self.B_inv = np.eye(r)
        self.degenerate_pivots = 0
        self.bland = False
        self.iterations = 0
        self.max_iter = MAX_ITER_BASE + 50 * r
        self._buf = np.empty(n)
        self._y_aug = np.empty(r + 1)

    # -- column access ----------------------------------------------------
    def column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.augT[j, : self.r]
        col = np.zeros(self.r)
        if j < self.n + self.n_slack:
            le_idx = j - self.n
            col[self.m_eq + le_idx] = self.slack_sign[le_idx]
        else:
            col[j - self.n - self.n_slack] = 1.0
        return col

    def _cost_of(self, j: int, phase2: bool) -> float:
        if j < self.n:
            return float(self.c[j]) if phase2 else 0.0
        if j < self.n + self.n_slack:
            return 0.0
        return 0.0 if phase2 else -1.0

    def _refactor(self):
        B = np.column_stack([self.column(j) for j in self.basis]) \
            if self.r else np.zeros((0, 0))
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericError("singular basis during refactorization") from exc

    # -- pricing -------------------------------------------------------------
    def _dual(self, phase2: bool) -> np.ndarray:
        c_B = np.fromiter((self._cost_of(int(j), phase2) for j in self.basis),
                          dtype=float, count=self.r)
        y = c_B @ self.B_inv
        y_aug = self._y_aug
        y_aug[: self.r] = -y
        y_aug[self.r] = 1.0 if phase2 else 0.0
        return y_aug

    def _slack_reduced(self, y_aug: np.ndarray) -> np.ndarray:
        if not self.n_slack:
            return np.empty(0)
        red = self.slack_sign * y_aug[self.m_eq: self.r]
        for le_idx in range(self.n_slack):
            if self.n + le_idx in self.in_basis:
                red[le_idx] = -np.inf
        return red

    def _price(self, phase2: bool) -> int | None:
        """Entering column: Dantzig (most positive reduced cost, ties broken
        by lowest index) or, once the degeneracy guard has tripped, Bland's
        rule (lowest improving index)."""
        y_aug = self._dual(phase2)
        if self.bland:
            if self.n:
                np.dot(self.augT, y_aug, out=self._buf)
                for j in self.in_basis:
                    if j < self.n:
                        self._buf[j] = -np.inf
                if self._buf.max() > FEAS_TOL:
                    return int(np.argmax(self._buf > FEAS_TOL))
            red = self._slack_reduced(y_aug)
            idx = np.nonzero(red > FEAS_TOL)[0]
            return self.n + int(idx[0]) if idx.size else None
        best, best_val = None, FEAS_TOL
        if self.n:
            np.dot(self.augT, y_aug, out=self._buf)
            for j in self.in_basis:
                if j < self.n:
                    self._buf[j] = -np.inf
            cand = int(np.argmax(self._buf))
            if self._buf[cand] > best_val:
                best, best_val = cand, float(self._buf[cand])
        red = self._slack_reduced(y_aug)
        if red.size and red.max() > best_val:
            best = self.n + int(np.argmax(red))
        return best

    # -- main loop ---------------------------------------------------------
    def run(self, phase2: bool) -> str:
        while True:
            if self.iterations >= self.max_iter:
                raise NumericError(f"iteration limit {self.max_iter} exceeded")
            self.iterations += 1
            if self.iterations % REFACTOR_EVERY == 0:
                self._refactor()
            enter = self._price(phase2)
            if enter is None:
                return "optimal"
            d = self.B_inv @ self.column(enter)
            x_B = self.B_inv @ self.b
            pos = d > PIVOT_TOL
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(self.r, np.inf)
            ratios[pos] = x_B[pos] / d[pos]
            min_ratio = ratios.min()
            ties = np.nonzero(ratios <= min_ratio + PIVOT_TOL)[0]
            # Lowest basis-variable index among ties: deterministic and
            # cycling-safe once Bland's rule is active.
            leave_row = int(ties[np.argmin(self.basis[ties])])
            if min_ratio <= PIVOT_TOL:
                self.degenerate_pivots += 1
                if not self.bland and \
                        self.degenerate_pivots > DEGENERATE_PIVOT_FACTOR * max(self.r, 1):
                    self.bland = True
            self._pivot(enter, leave_row, d)

    def _pivot(self, enter: int, leave_row: int, d: np.ndarray):
        piv = d[leave_row]
        if abs(piv) < PIVOT_TOL:  # pragma: no cover - defensive
            raise NumericError("pivot element vanished")
        E_row = self.B_inv[leave_row] / piv
        self.B_inv -= np.outer(d, E_row)
        self.B_inv[leave_row] = E_row
        self.in_basis.discard(int(self.basis[leave_row]))
        self.in_basis.add(int(enter))
        self.basis[leave_row] = enter

    # -- phases -------------------------------------------------------------
    def drive_out_artificials(self):
        for i in range(self.r):
            if self.basis[i] < self.n + self.n_slack:
                continue
            row = self.augT[:, : self.r] @ self.B_inv[i]
            cand = np.nonzero(np.abs(row) > 1e-7)[0]
            if cand.size:
                j = int(cand[0])
                d = self.B_inv @ self.column(j)
                self._pivot(j, i, d)
            # else: redundant row, the artificial stays basic at value 0.


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve the LP, returning an optimal basic feasible solution.

    Optimality is certified by reduced costs <= 1e-9.  Infeasible and
    unbounded problems are reported through the status field; numeric
    failures raise :class:`NumericError`.
    """
    state = _Simplex(lp)
    n, n_slack = state.n, state.n_slack

    if any(int(j) >= n + n_slack for j in state.basis):
        status = state.run(phase2=False)
        if status != "optimal":  # pragma: no cover - phase 1 is always bounded
            raise NumericError("phase 1 terminated " + status)
        x_B = state.B_inv @ state.b
        art_rows = state.basis >= n + n_slack
        art_mass = float(x_B[art_rows].sum()) if state.r else 0.0
        if art_mass > FEAS_TOL * max(1.0, float(np.abs(state.b).sum())):
            return LpSolution(status="infeasible", x=None, value=float("nan"),
                              basis=())
        state.drive_out_artificials()
        state.degenerate_pivots = 0
        state.bland = False

    status = state.run(phase2=True)
    if status == "unbounded":
        return LpSolution(status="unbounded", x=None, value=float("inf"), basis=())

    x = np.zeros(n)
    x_B = state.B_inv @ state.b
    for row, j in enumerate(state.basis):
        if j < n:
            x[j] = x_B[row]
    np.clip(x, 0.0, None, out=x)
    scale = max(1.0, float(np.abs(lp.b_eq).sum() + np.abs(lp.b_le).sum()))
    if lp.A_eq.shape[0]:
        if float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))) > 100 * FEAS_TOL * scale:
            raise NumericError("optimal basis violates the equality rows")
    if lp.A_le.shape[0]:
        if float(np.max(lp.A_le @ x - lp.b_le)) > 100 * FEAS_TOL * scale:
            raise NumericError("optimal basis violates the inequality rows")
    basis = tuple(int(j) for j in sorted(state.basis) if j < n + n_slack)
    return LpSolution(status="optimal", x=x, value=float(state.c @ x), basis=basis)


def build_persuasion_lp(grid, gridded_utility, smoothed_bounds, prior,
                        vertex_mask=None) -> LinearProgram:
    """Assemble the grid LP: one variable per grid vertex (its probability).

    Rows are k-1 independent barycenter equalities plus one normalization row
    (the remaining barycenter row is redundant), and one <= row per smoothed
    ex-ante constraint with its relaxed bound.  ``vertex_mask`` restricts the
    columns to a feasible subset (ex-post handling).

    ``smoothed_bounds`` is a sequence of (smoothed_constraint, relaxed_bound)
    pairs; objects are duck-typed so this module stays dependency-free.
    """
    vertices = np.asarray(grid.vertices, dtype=float)
    p = np.asarray(getattr(prior, "weights", prior), dtype=float)
    c = np.asarray(gridded_utility.vertex_values(), dtype=float)
    if c.shape[0] != vertices.shape[0]:
        raise LpError("objective length does not match grid")
    if vertex_mask is not None:
        vertices = vertices[vertex_mask]
        c = c[vertex_mask]
    n, k = vertices.shape
    if p.shape[0] != k:
        raise LpError("prior dimension does not match grid")
    A_eq = np.empty((k, n))
    A_eq[: k - 1] = vertices[:, : k - 1].T
    A_eq[k - 1] = 1.0
    b_eq = np.concatenate([p[: k - 1], [1.0]])
    rows = []
    bounds = []
    for smoothed, bound in smoothed_bounds:
        rows.append(smoothed.eval_batch(vertices, p))
        bounds.append(bound)
    A_le = np.vstack(rows) if rows else np.zeros((0, n))
    b_le = np.asarray(bounds, dtype=float)
    return LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq, A_le=A_le, b_le=b_le)


def dump_lp(lp: LinearProgram, max_cols: int = 50) -> str:
    """Plain-text row/column listing for debugging."""
    lines = [f"max  {np.array2string(lp.c[:max_cols], precision=6)}"
             + (" ..." if lp.n_vars > max_cols else "")]
    for row, rhs in zip(lp.A_eq, lp.b_eq):
        lines.append(f"eq   {np.array2string(row[:max_cols], precision=6)} = {rhs:.6g}")
    for row, rhs in zip(lp.A_le, lp.b_le):
        lines.append(f"le   {np.array2string(row[:max_cols], precision=6)} <= {rhs:.6g}")
    lines.append(f"vars x >= 0  (n={lp.n_vars}, rows={lp.n_rows})")
    return "\n".join(lines)
