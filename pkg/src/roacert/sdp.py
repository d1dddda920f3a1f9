"""Standard-form conic semidefinite programs and solver adapters.

A problem holds free scalar variables, nonnegative scalar variables and PSD
matrix block variables, tied together by linear equalities, with a linear
objective (minimization). PSD blocks are stored in scaled-vector form
("svec": upper triangle, column-major, off-diagonals multiplied by sqrt(2))
so that the Euclidean inner product of svecs equals the Frobenius product of
the matrices.

Back-ends are swappable behind :func:`solve`; `clarabel` (interior point) and
`scs` (first-order operator splitting) are provided. Interior point is the
accurate choice for small problems; the first-order solver scales to the
large Gram blocks of the seven-state problems, where the dense KKT blocks of
an interior-point method would be prohibitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

SQRT2 = math.sqrt(2.0)

# column keys: ("f", i) free, ("n", i) nonnegative, ("s", block, k) svec entry
ColKey = tuple


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec_index(i: int, j: int) -> int:
    """Index of entry (i, j), i <= j, in upper-triangle column-major order."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


def svec_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for j in range(n) for i in range(j + 1)]


def mat_to_svec(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    out = np.empty(svec_dim(n))
    for k, (i, j) in enumerate(svec_pairs(n)):
        out[k] = M[i, j] if i == j else SQRT2 * M[i, j]
    return out


def svec_to_mat(v: np.ndarray, n: int) -> np.ndarray:
    M = np.empty((n, n))
    for k, (i, j) in enumerate(svec_pairs(n)):
        if i == j:
            M[i, i] = v[k]
        else:
            M[i, j] = M[j, i] = v[k] / SQRT2
    return M


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | numerical_failure
    free: np.ndarray | None = None
    nonneg: np.ndarray | None = None
    psd: list[np.ndarray] | None = None  # full symmetric matrices
    objective: float | None = None
    diagnostics: str = ""
    solver: str = ""
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass
class SdpProblem:
    """min c.x  s.t.  A_eq x = b,  x_n >= 0,  mat(x_s, block) PSD."""

    n_free: int = 0
    n_nonneg: int = 0
    psd_dims: list[int] = field(default_factory=list)
    rows: list[dict[ColKey, float]] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    objective: dict[ColKey, float] = field(default_factory=dict)

    # -- variable management ----------------------------------------------

    def new_free(self) -> ColKey:
        self.n_free += 1
        return ("f", self.n_free - 1)

    def new_nonneg(self) -> ColKey:
        self.n_nonneg += 1
        return ("n", self.n_nonneg - 1)

    def new_psd_block(self, n: int) -> int:
        self.psd_dims.append(n)
        return len(self.psd_dims) - 1

    def add_eq(self, coeffs: dict[ColKey, float], rhs: float):
        self.rows.append(coeffs)
        self.rhs.append(float(rhs))

    @property
    def n_vars(self) -> int:
        return self.n_free + self.n_nonneg + sum(svec_dim(d) for d in self.psd_dims)

    def column(self, key: ColKey) -> int:
        kind = key[0]
        if kind == "f":
            return key[1]
        if kind == "n":
            return self.n_free + key[1]
        if kind == "s":
            _, b, k = key
            off = self.n_free + self.n_nonneg
            for d in self.psd_dims[:b]:
                off += svec_dim(d)
            return off + k
        raise KeyError(key)

    # -- assembly -----------------------------------------------------------

    def _block_offsets(self) -> list[int]:
        offs = []
        off = self.n_free + self.n_nonneg
        for d in self.psd_dims:
            offs.append(off)
            off += svec_dim(d)
        return offs

    def eq_matrix(self) -> tuple[sp.csc_matrix, np.ndarray]:
        rows, cols, vals = [], [], []
        for r, coeffs in enumerate(self.rows):
            for key, v in coeffs.items():
                if v != 0.0:
                    rows.append(r)
                    cols.append(self.column(key))
                    vals.append(v)
        A = sp.csc_matrix(
            (vals, (rows, cols)), shape=(len(self.rows), self.n_vars)
        )
        return A, np.asarray(self.rhs)

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for key, v in self.objective.items():
            c[self.column(key)] = v
        return c

    def split_solution(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        nf, nn = self.n_free, self.n_nonneg
        free = x[:nf].copy()
        nonneg = x[nf : nf + nn].copy()
        mats = []
        off = nf + nn
        for d in self.psd_dims:
            mats.append(svec_to_mat(x[off : off + svec_dim(d)], d))
            off += svec_dim(d)
        return free, nonneg, mats

    # -- debugging export -----------------------------------------------------

    def export_sdpa_like(self, path: str):
        """Sparse SDPA-like text dump (svec coordinates) for external checking."""
        with open(path, "w") as fh:
            fh.write("* roacert sdp export (svec: upper triangle col-major, offdiag*sqrt2)\n")
            fh.write(f"nfree {self.n_free}\n")
            fh.write(f"nnonneg {self.n_nonneg}\n")
            fh.write(f"blocks {' '.join(str(d) for d in self.psd_dims)}\n")
            for key, v in sorted(self.objective.items()):
                fh.write(f"obj {':'.join(map(str, key))} {v!r}\n")
            for r, coeffs in enumerate(self.rows):
                for key, v in sorted(coeffs.items()):
                    fh.write(f"eq {r} {':'.join(map(str, key))} {v!r}\n")
                fh.write(f"rhs {r} {self.rhs[r]!r}\n")


# -- solver adapters ----------------------------------------------------------


def _scs_psd_permutation(n: int) -> np.ndarray:
    """Map canonical svec order to SCS order (lower triangle, column-major).

    perm[k_scs] = k_canonical for each triangle entry.
    """
    canon = {pair: k for k, pair in enumerate(svec_pairs(n))}
    perm = np.empty(svec_dim(n), dtype=int)
    k = 0
    for j in range(n):
        for i in range(j, n):
            perm[k] = canon[(j, i)]  # (min, max) indexing
            k += 1
    return perm


def _solve_clarabel(prob: SdpProblem, opts: dict) -> SdpSolution:
    import clarabel

    A_eq, b_eq = prob.eq_matrix()
    n = prob.n_vars
    cones = []
    blocks = [A_eq]
    b = [b_eq]
    m_eq = A_eq.shape[0]
    if m_eq:
        cones.append(clarabel.ZeroConeT(m_eq))
    if prob.n_nonneg:
        sel = sp.identity(n, format="csc")[prob.n_free : prob.n_free + prob.n_nonneg, :]
        blocks.append(-sel)
        b.append(np.zeros(prob.n_nonneg))
        cones.append(clarabel.NonnegativeConeT(prob.n_nonneg))
    off = prob.n_free + prob.n_nonneg
    eye = sp.identity(n, format="csc")
    for d in prob.psd_dims:
        k = svec_dim(d)
        blocks.append(-eye[off : off + k, :])
        b.append(np.zeros(k))
        cones.append(clarabel.PSDTriangleConeT(d))
        off += k
    A = sp.vstack(blocks, format="csc")
    bvec = np.concatenate(b) if b else np.zeros(0)
    P = sp.csc_matrix((n, n))
    q = prob.cost_vector()

    settings = clarabel.DefaultSettings()
    settings.verbose = bool(opts.get("verbose", False))
    if "max_iter" in opts:
        settings.max_iter = int(opts["max_iter"])
    if "tol" in opts:
        settings.tol_gap_abs = opts["tol"]
        settings.tol_gap_rel = opts["tol"]
        settings.tol_feas = opts["tol"]
    solver = clarabel.DefaultSolver(P, q, A, bvec, cones, settings)
    res = solver.solve()
    status = str(res.status)
    x = np.asarray(res.x)
    sol = SdpSolution(status="numerical_failure", solver="clarabel",
                      iterations=int(res.iterations), diagnostics=status)
    if status in ("Solved", "AlmostSolved"):
        sol.status = "optimal"
        sol.free, sol.nonneg, sol.psd = prob.split_solution(x)
        sol.objective = float(res.obj_val)
    elif status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        sol.status = "infeasible"
    elif status in ("DualInfeasible", "AlmostDualInfeasible"):
        sol.diagnostics = "unbounded objective (dual infeasible)"
    return sol


def _solve_scs(prob: SdpProblem, opts: dict) -> SdpSolution:
    import scs

    A_eq, b_eq = prob.eq_matrix()
    n = prob.n_vars
    blocks = [A_eq]
    b = [b_eq]
    if prob.n_nonneg:
        sel = sp.identity(n, format="csc")[prob.n_free : prob.n_free + prob.n_nonneg, :]
        blocks.append(-sel)
        b.append(np.zeros(prob.n_nonneg))
    off = prob.n_free + prob.n_nonneg
    eye = sp.identity(n, format="csc")
    for d in prob.psd_dims:
        k = svec_dim(d)
        perm = _scs_psd_permutation(d)
        sel = eye[off : off + k, :][perm, :]
        blocks.append(-sel)
        b.append(np.zeros(k))
        off += k
    A = sp.vstack(blocks, format="csc")
    bvec = np.concatenate(b) if b else np.zeros(0)
    data = {"A": A, "b": bvec, "c": prob.cost_vector()}
    cone = {"z": A_eq.shape[0]}
    if prob.n_nonneg:
        cone["l"] = prob.n_nonneg
    if prob.psd_dims:
        cone["s"] = list(prob.psd_dims)

    solver = scs.SCS(
        data,
        cone,
        verbose=bool(opts.get("verbose", False)),
        eps_abs=opts.get("eps_abs", 1e-7),
        eps_rel=opts.get("eps_rel", 1e-7),
        eps_infeas=opts.get("eps_infeas", 1e-9),
        max_iters=int(opts.get("max_iters", 200_000)),
    )
    res = solver.solve()
    status = res["info"]["status"]
    sol = SdpSolution(status="numerical_failure", solver="scs",
                      iterations=int(res["info"]["iter"]), diagnostics=status)
    if status in ("solved", "solved (inaccurate - reached max_iters)"):
        sol.status = "optimal"
        if "inaccurate" in status:
            sol.diagnostics = status
        sol.free, sol.nonneg, sol.psd = prob.split_solution(np.asarray(res["x"]))
        sol.objective = float(res["info"]["pobj"])
    elif "infeasible" in status:
        sol.status = "infeasible"
    elif "unbounded" in status:
        sol.diagnostics = "unbounded objective"
    return sol


_BACKENDS = {"clarabel": _solve_clarabel, "scs": _solve_scs}

# Interior point is preferred while the largest PSD block stays small; its
# KKT factors grow with the 4th power of the block size, so big Gram blocks
# go to the first-order solver.
AUTO_IPM_BLOCK_LIMIT = 70


def solve(prob: SdpProblem, solver: str = "auto", **opts) -> SdpSolution:
    """Solve the problem with the requested back-end ("auto", "clarabel", "scs")."""
    if solver == "auto":
        max_block = max(prob.psd_dims, default=0)
        solver = "clarabel" if max_block <= AUTO_IPM_BLOCK_LIMIT else "scs"
    try:
        fn = _BACKENDS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; expected one of {sorted(_BACKENDS)}")
    return fn(prob, opts)
