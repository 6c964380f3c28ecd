"""Dense bounded-variable primal simplex with Bland's rule.

Solves ``min c @ x  s.t.  A @ x <= b,  lo <= x <= hi`` for ``b >= 0`` and
finite bounds with ``lo = 0``.  With every structural variable starting at
its lower bound the slack basis is feasible, so no phase one is needed; both
LP families in this package (triangle relaxation, bad-triangle packing) have
that shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SimplexError(RuntimeError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    pivots: int


def bounded_simplex(c, A, b, hi, *, tol: float = 1e-11, max_pivots: int = 200_000) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m, nv = A.shape if A.size else (0, len(c))
    if len(c) != nv or len(hi) != nv or len(b) != m:
        raise ValueError("dimension mismatch between c, A, b and bounds")
    if np.any(b < 0):
        raise SimplexError("right-hand side must be nonnegative (slack basis start)")
    if np.any(hi < 0) or not np.all(np.isfinite(hi)):
        raise SimplexError("upper bounds must be finite and nonnegative")

    ntot = nv + m
    upper = np.concatenate([hi, np.full(m, np.inf)])
    cost = np.concatenate([c, np.zeros(m)])
    # tableau = B^-1 [A | I]; initial basis is the slack block
    T = np.hstack([A, np.eye(m)]) if m else np.zeros((0, ntot))
    basis = list(range(nv, ntot))
    in_basis = np.zeros(ntot, dtype=bool)
    in_basis[basis] = True
    at_upper = np.zeros(ntot, dtype=bool)
    xb = b.copy()
    d = cost.copy()  # reduced costs; c_B = 0 initially

    pivots = 0
    while True:
        enter = -1
        for j in range(ntot):  # Bland: least eligible index
            if in_basis[j]:
                continue
            if not at_upper[j] and d[j] < -tol and upper[j] > 0:
                enter = j
                break
            if at_upper[j] and d[j] > tol:
                enter = j
                break
        if enter < 0:
            break
        pivots += 1
        if pivots > max_pivots:
            raise SimplexError(f"pivot budget {max_pivots} exhausted")

        direction = -1.0 if at_upper[enter] else 1.0
        alpha = direction * T[:, enter]
        step = upper[enter]  # bound flip
        leave_row = -1
        leave_to_upper = False
        for i in range(m):
            bi = basis[i]
            if alpha[i] > tol:
                r = xb[i] / alpha[i]
                to_up = False
            elif alpha[i] < -tol and np.isfinite(upper[bi]):
                r = (upper[bi] - xb[i]) / -alpha[i]
                to_up = True
            else:
                continue
            r = max(r, 0.0)
            if r < step - tol or (leave_row >= 0 and abs(r - step) <= tol and bi < basis[leave_row]):
                step, leave_row, leave_to_upper = r, i, to_up
        if not np.isfinite(step):
            raise SimplexError("problem is unbounded")

        xb -= step * alpha
        if leave_row < 0:
            at_upper[enter] = not at_upper[enter]
            continue

        entering_value = (upper[enter] if at_upper[enter] else 0.0) + direction * step
        leaving = basis[leave_row]
        piv = T[leave_row, enter]
        T[leave_row] /= piv
        col = T[:, enter].copy()
        col[leave_row] = 0.0
        T -= np.outer(col, T[leave_row])
        d -= d[enter] * T[leave_row]
        xb[leave_row] = entering_value
        basis[leave_row] = enter
        in_basis[enter] = True
        in_basis[leaving] = False
        at_upper[enter] = False
        at_upper[leaving] = leave_to_upper

    x = np.where(at_upper, upper, 0.0)
    x[basis] = xb
    xs = np.clip(x[:nv], 0.0, hi)
    return SimplexResult(xs, float(c @ xs), pivots)
