"""Small dense linear programs.

``solve`` minimizes ``c @ x + constant`` subject to ``A_ub @ x <= b_ub``,
``A_eq @ x == b_eq`` and ``x >= lb`` (``lb = -inf`` marks a free variable).

Two backends are available:

``"simplex"``
    A dense two-phase tableau simplex written here.  Entering variables are
    chosen by the most negative reduced cost (Dantzig); after
    ``DEGENERATE_SWITCH`` consecutive degenerate pivots the phase switches
    permanently to Bland's smallest-index rule.  Ties in the ratio test go
    to the smallest basic variable index.  Degeneracy is further broken by
    solving with a tiny fixed perturbation of the right-hand side; the
    perturbation is then removed and dual simplex pivots restore primal
    feasibility (the reduced costs do not depend on the right-hand side).
    The tableau is rebuilt from the original data every ``REFRESH`` pivots
    to keep rounding error from accumulating.  The result is a function of
    the model alone.
``"highs"``
    :func:`scipy.optimize.linprog` with the HiGHS solver, used for bulk work.

Every optimal answer is checked before it is returned: primal feasibility
and agreement of the primal and dual objectives, both to ``TOL``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

TOL = 1e-9
PIVOT_TOL = 1e-9
OPT_TOL = 1e-10  # reduced costs above -OPT_TOL count as nonnegative
FEAS_TOL = 1e-12
DEGENERATE_SWITCH = 50
REFRESH = 50  # pivots between tableau rebuilds
MAX_PIVOTS = 100_000
PERTURB = 1e-7
PERTURB_SEED = 20240531


class LPCheckError(RuntimeError):
    """An optimal solution failed its own feasibility or duality check."""


@dataclass
class LPModel:
    c: np.ndarray
    A_ub: np.ndarray | sp.spmatrix | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    names: list[str] | None = None
    constant: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = len(self.c)
        if n == 0:
            raise ValueError("an LP needs at least one variable")
        if self.A_ub is None:
            self.A_ub, self.b_ub = np.zeros((0, n)), np.zeros(0)
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        self.b_ub = np.asarray(self.b_ub, dtype=float)
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        for name, A, b in (("A_ub", self.A_ub, self.b_ub), ("A_eq", self.A_eq, self.b_eq)):
            if A.shape != (len(b), n):
                raise ValueError(f"{name} has shape {A.shape}, expected {(len(b), n)}")
        if not (np.isfinite(self.c).all() and np.isfinite(self.b_ub).all() and np.isfinite(self.b_eq).all()):
            raise ValueError("non-finite coefficient")
        if self.names is None:
            self.names = [f"x{i}" for i in range(n)]

    @property
    def nvars(self) -> int:
        return len(self.c)

    def dense(self):
        def d(A):
            return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)

        return d(self.A_ub), d(self.A_eq)

    def objective(self, x) -> float:
        return float(self.c @ x) + self.constant

    def max_violation(self, x) -> float:
        A_ub, A_eq = self.dense()
        viol = [0.0]
        if len(self.b_ub):
            viol.append(float(np.max(A_ub @ x - self.b_ub)))
        if len(self.b_eq):
            viol.append(float(np.max(np.abs(A_eq @ x - self.b_eq))))
        finite = np.isfinite(self.lb)
        if finite.any():
            viol.append(float(np.max(self.lb[finite] - x[finite])))
        return max(viol)


@dataclass
class LPSolution:
    status: str  # "optimal", "infeasible" or "unbounded"
    objective: float = float("nan")
    x: np.ndarray | None = None
    y_ub: np.ndarray | None = None
    y_eq: np.ndarray | None = None
    basis: list[int] | None = None
    iterations: int = 0
    backend: str = ""
    gap: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve(model: LPModel, method: str = "simplex", check: bool = True) -> LPSolution:
    if method == "simplex":
        sol = _solve_simplex(model)
    elif method == "highs":
        sol = _solve_highs(model)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if check and sol.optimal:
        _self_check(model, sol)
    return sol


def _self_check(model: LPModel, sol: LPSolution):
    scale = 1.0 + abs(sol.objective)
    viol = model.max_violation(sol.x)
    if viol > TOL * (1.0 + np.abs(sol.x).max()):
        raise LPCheckError(f"primal infeasibility {viol:.3e}")
    if abs(model.objective(sol.x) - sol.objective) > TOL * scale:
        raise LPCheckError("reported objective disagrees with c @ x")
    if sol.y_ub is not None:
        dual = float(model.b_ub @ sol.y_ub + model.b_eq @ sol.y_eq) + model.constant
        A_ub, A_eq = model.dense()
        reduced = model.c - A_ub.T @ sol.y_ub - A_eq.T @ sol.y_eq
        finite = np.isfinite(model.lb)
        dual += float(reduced[finite] @ model.lb[finite])
        sol.gap = abs(sol.objective - dual)
        if sol.gap > TOL * scale:
            raise LPCheckError(f"duality gap {sol.gap:.3e}")
        bad = np.concatenate([reduced[finite] < -TOL * scale, np.abs(reduced[~finite]) > TOL * scale])
        if bad.any() or (sol.y_ub > TOL * scale).any():
            raise LPCheckError("dual infeasibility")


def _solve_highs(model: LPModel) -> LPSolution:
    bounds = [(None if not np.isfinite(l) else l, None) for l in model.lb]
    kw = dict(
        A_ub=model.A_ub if len(model.b_ub) else None,
        b_ub=model.b_ub if len(model.b_ub) else None,
        A_eq=model.A_eq if len(model.b_eq) else None,
        b_eq=model.b_eq if len(model.b_eq) else None,
        bounds=bounds,
        method="highs",
    )
    res = linprog(model.c, **kw)
    if res.status == 2:
        # presolve can report an unbounded model as infeasible
        res = linprog(model.c, options={"presolve": False}, **kw)
    if res.status == 2:
        return LPSolution("infeasible", backend="highs")
    if res.status == 3:
        return LPSolution("unbounded", backend="highs")
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    y_ub = res.ineqlin.marginals if len(model.b_ub) else np.zeros(0)
    y_eq = res.eqlin.marginals if len(model.b_eq) else np.zeros(0)
    return LPSolution(
        "optimal",
        float(res.fun) + model.constant,
        np.asarray(res.x),
        np.asarray(y_ub),
        np.asarray(y_eq),
        iterations=int(getattr(res, "nit", 0)),
        backend="highs",
    )


@dataclass
class _Standard:
    """``min cs @ z  s.t.  As @ z == bs, z >= 0`` derived from an LPModel."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    const: float
    sign: np.ndarray  # +1/-1 row flips applied to make b >= 0
    n_struct: int  # structural columns (after free-variable splitting)
    col_of: list[tuple[int, int]]  # structural column -> (original var, +1/-1)
    n_ub: int


def _standardize(model: LPModel, exact: bool = False) -> _Standard:
    A_ub, A_eq = model.dense()
    lb, c = model.lb, model.c
    n = model.nvars
    free = ~np.isfinite(lb)
    shift = np.where(free, 0.0, lb)
    cols, col_of = [], []
    for j in range(n):
        cols.append(j)
        col_of.append((j, 1))
    for j in np.nonzero(free)[0]:
        col_of.append((int(j), -1))
    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([model.b_ub, model.b_eq]) - A @ shift
    const = float(c @ shift) + model.constant
    struct = np.hstack([A, -A[:, free]])
    cs = np.concatenate([c, -c[free]])
    m_ub = len(model.b_ub)
    slack = np.vstack([np.eye(m_ub), np.zeros((len(model.b_eq), m_ub))])
    full = np.hstack([struct, slack])
    cfull = np.concatenate([cs, np.zeros(m_ub)])
    sign = np.where(b < 0, -1.0, 1.0)
    full = full * sign[:, None]
    b = b * sign
    if exact:
        full = np.vectorize(Fraction, otypes=[object])(full)
        b = np.vectorize(Fraction, otypes=[object])(b)
        cfull = np.vectorize(Fraction, otypes=[object])(cfull)
    return _Standard(full, b, cfull, const, sign, struct.shape[1], col_of, m_ub)


def _pivot(T: np.ndarray, r: int, j: int):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _tableau(A: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list[int]) -> np.ndarray:
    """Fresh tableau ``[B^-1 A | B^-1 b]`` with reduced costs in the last row."""
    m = A.shape[0]
    Binv_ab = np.linalg.solve(A[:, basis], np.hstack([A, b[:, None]]))
    T = np.empty((m + 1, A.shape[1] + 1))
    T[:m] = Binv_ab
    T[:m, basis] = np.eye(m)  # exact identity on basic columns
    T[-1] = np.append(cost, 0.0) - cost[basis] @ T[:m]
    return T


def _run_phase(T, basis, allowed, rebuild) -> tuple[str, int]:
    """Primal simplex on a tableau whose last row holds reduced costs.

    Only the first ``allowed`` columns may enter.  ``rebuild(basis)``
    recomputes the tableau from the original data every ``REFRESH`` pivots.
    Returns ``(status, pivots)``; the tableau is updated in place.
    """
    m = T.shape[0] - 1
    bland = False
    degenerate = 0
    pivots = 0
    while True:
        if pivots and pivots % REFRESH == 0:
            T[:] = rebuild(basis)
        red = T[-1, :allowed]
        neg = np.nonzero(red < -OPT_TOL)[0]
        if len(neg) == 0:
            return "optimal", pivots
        if pivots > MAX_PIVOTS:
            return "iteration limit", pivots
        j = int(neg[0]) if bland else int(neg[np.argmin(red[neg])])
        col = T[:m, j]
        pos = np.nonzero(col > PIVOT_TOL)[0]
        if len(pos) == 0:
            return "unbounded", pivots
        ratios = np.maximum(T[pos, -1], 0.0) / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + PIVOT_TOL * (1.0 + best)]
        r = int(min(ties, key=lambda i: basis[i]))
        if best <= PIVOT_TOL:
            degenerate += 1
            if degenerate >= DEGENERATE_SWITCH:
                bland = True
        else:
            degenerate = 0
        _pivot(T, r, j)
        basis[r] = j
        pivots += 1


def _run_dual(T, basis, allowed, rebuild) -> tuple[str, int]:
    """Dual simplex from a dual feasible tableau until the basis is primal feasible."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        if pivots and pivots % REFRESH == 0:
            T[:] = rebuild(basis)
        rhs = T[:m, -1]
        r = int(np.argmin(rhs)) if m else 0
        if not m or rhs[r] >= -FEAS_TOL:
            return "optimal", pivots
        if pivots > MAX_PIVOTS:
            return "iteration limit", pivots
        row = T[r, :allowed]
        cand = np.nonzero(row < -PIVOT_TOL)[0]
        if len(cand) == 0:
            return "infeasible", pivots
        ratios = np.maximum(T[-1, cand], 0.0) / -row[cand]
        best = ratios.min()
        ties = cand[ratios <= best + PIVOT_TOL * (1.0 + best)]
        j = int(ties[0])
        _pivot(T, r, j)
        basis[r] = j
        pivots += 1


def _solve_simplex(model: LPModel) -> LPSolution:
    st = _standardize(model)
    m, ncols = st.A.shape
    n_ub = st.n_ub
    # a fixed pseudo-random perturbation of the right-hand side breaks the
    # heavy degeneracy of these LPs; it is removed again at the end
    rng = np.random.default_rng(PERTURB_SEED)
    b_pert = st.b + PERTURB * (1.0 + rng.random(m)) * (1.0 + np.abs(st.b))
    # slack columns whose row was not flipped can start in the basis
    basis = [-1] * m
    for i in range(n_ub):
        if st.sign[i] > 0:
            basis[i] = st.n_struct + i
    art_rows = [i for i in range(m) if basis[i] < 0]
    n_art = len(art_rows)
    A_ext = np.hstack([st.A, np.zeros((m, n_art))])
    for a, i in enumerate(art_rows):
        A_ext[i, ncols + a] = 1.0
        basis[i] = ncols + a
    total_pivots = 0
    keep = list(range(m))
    if n_art:
        cost1 = np.concatenate([np.zeros(ncols), np.ones(n_art)])
        T = _tableau(A_ext, b_pert, cost1, basis)
        status, piv = _run_phase(T, basis, ncols + n_art, lambda bs: _tableau(A_ext, b_pert, cost1, bs))
        total_pivots += piv
        if status != "optimal":
            return LPSolution(status, iterations=total_pivots, backend="simplex")
        if -T[-1, -1] > 1e3 * PERTURB * m * (1.0 + np.abs(st.b).max()):
            return LPSolution("infeasible", iterations=total_pivots, backend="simplex")
        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= ncols:
                cand = np.nonzero(np.abs(T[i, :ncols]) > 1e-9)[0]
                if not len(cand):
                    continue
                j = int(cand[np.argmax(np.abs(T[i, cand]))])
                _pivot(T, i, j)
                basis[i] = j
                total_pivots += 1
            keep.append(i)
        basis = [basis[i] for i in keep]
    A2, b2, bp2 = st.A[keep], st.b[keep], b_pert[keep]
    T = _tableau(A2, bp2, st.c, basis)
    status, piv = _run_phase(T, basis, ncols, lambda bs: _tableau(A2, bp2, st.c, bs))
    total_pivots += piv
    if status != "optimal":
        return LPSolution(status, iterations=total_pivots, backend="simplex")
    # back to the true right-hand side: the basis stays dual feasible
    T = _tableau(A2, b2, st.c, basis)
    status, piv = _run_dual(T, basis, ncols, lambda bs: _tableau(A2, b2, st.c, bs))
    total_pivots += piv
    if status != "optimal":
        return LPSolution(status, iterations=total_pivots, backend="simplex")
    status, piv = _run_phase(T, basis, ncols, lambda bs: _tableau(A2, b2, st.c, bs))
    total_pivots += piv
    if status != "optimal":
        return LPSolution(status, iterations=total_pivots, backend="simplex")
    z = np.zeros(ncols)
    z[basis] = np.maximum(np.linalg.solve(A2[:, basis], b2), 0.0)
    x = _recover_x(model, st, z)
    # duals from the basis of the standard-form rows that survived
    y_kept = np.linalg.solve(A2[:, basis].T, st.c[basis])
    y = np.zeros(m)
    y[keep] = y_kept
    y = y * st.sign
    n_ub_orig = len(model.b_ub)
    return LPSolution(
        "optimal",
        model.objective(x),
        x,
        y[:n_ub_orig],
        y[n_ub_orig:],
        basis=list(basis),
        iterations=total_pivots,
        backend="simplex",
        extra={"rows": keep},
    )


def _recover_x(model: LPModel, st: _Standard, z) -> np.ndarray:
    n = model.nvars
    x = np.where(np.isfinite(model.lb), model.lb, 0.0).astype(float)
    for col, (j, s) in enumerate(st.col_of):
        x[j] += s * z[col]
    return x


def _fraction_solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals for a square system."""
    n = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular basis")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv if v else v for v in M[col]]
        nz = [k for k, v in enumerate(M[col]) if v]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                row = M[r]
                for k in nz:
                    row[k] -= f * M[col][k]
    return [row[-1] for row in M]


@dataclass
class ExactCheck:
    primal_feasible: bool
    dual_feasible: bool
    objective: Fraction

    @property
    def optimal(self) -> bool:
        return self.primal_feasible and self.dual_feasible


def exact_basis_check(model: LPModel, sol: LPSolution) -> ExactCheck:
    """Re-solve the final simplex basis in rational arithmetic.

    The model data are converted exactly (every float is a dyadic
    rational).  Returns whether the basic solution is exactly feasible and
    exactly dual feasible, and its exact objective value.  Intended for
    small models: the cost is cubic in the number of rows.
    """
    if sol.basis is None:
        raise ValueError("exact check needs a simplex basis")
    st = _standardize(model, exact=True)
    rows = sol.extra.get("rows", list(range(st.A.shape[0])))
    basis = sol.basis
    B = [[st.A[i, j] for j in basis] for i in rows]
    zB = _fraction_solve(B, [st.b[i] for i in rows])
    # the dropped rows must be implied by the kept ones
    z = [Fraction(0)] * st.A.shape[1]
    for j, v in zip(basis, zB):
        z[j] = v
    primal = all(v >= 0 for v in zB) and all(
        sum(st.A[i, j] * z[j] for j in basis) == st.b[i] for i in range(st.A.shape[0])
    )
    Bt = [[B[r][c] for r in range(len(rows))] for c in range(len(basis))]
    y = _fraction_solve(Bt, [st.c[j] for j in basis])
    dual = True
    for j in range(st.A.shape[1]):
        red = st.c[j] - sum(y[r] * st.A[i, j] for r, i in enumerate(rows))
        if red < 0:
            dual = False
            break
    obj = sum(st.c[j] * z[j] for j in basis) + Fraction(st.const)
    return ExactCheck(primal, dual, obj)


def to_lp_text(model: LPModel) -> str:
    """CPLEX-style LP text, for cross-checking with external solvers."""
    A_ub, A_eq = model.dense()
    names = model.names
    buf = io.StringIO()

    def expr(coefs):
        terms = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} {names[j]}" for j, v in enumerate(coefs) if v != 0]
        return " ".join(terms) if terms else "0 " + names[0]

    buf.write("Minimize\n obj: " + expr(model.c))
    if model.constant:
        buf.write(f" + {model.constant:.17g} constant")
    buf.write("\nSubject To\n")
    for i, row in enumerate(A_ub):
        buf.write(f" u{i}: {expr(row)} <= {model.b_ub[i]:.17g}\n")
    for i, row in enumerate(A_eq):
        buf.write(f" e{i}: {expr(row)} = {model.b_eq[i]:.17g}\n")
    buf.write("Bounds\n")
    if model.constant:
        buf.write(" constant = 1\n")
    for j, l in enumerate(model.lb):
        if not np.isfinite(l):
            buf.write(f" {names[j]} free\n")
        elif l != 0:
            buf.write(f" {names[j]} >= {l:.17g}\n")
    buf.write("End\n")
    return buf.getvalue()


def permuted(model: LPModel, var_perm: Sequence[int], ub_perm: Sequence[int], eq_perm: Sequence[int]) -> LPModel:
    """The same LP with variables and constraint rows reordered."""
    A_ub, A_eq = model.dense()
    var_perm = np.asarray(var_perm)
    return LPModel(
        model.c[var_perm],
        A_ub[np.ix_(ub_perm, var_perm)] if len(ub_perm) else None,
        model.b_ub[list(ub_perm)] if len(ub_perm) else None,
        A_eq[np.ix_(eq_perm, var_perm)] if len(eq_perm) else None,
        model.b_eq[list(eq_perm)] if len(eq_perm) else None,
        model.lb[var_perm],
        [model.names[j] for j in var_perm],
        model.constant,
    )
