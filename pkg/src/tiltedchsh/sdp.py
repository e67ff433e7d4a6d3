"""Dense primal-dual interior-point solver for small block SDPs.

Primal (min sense)::

    minimize    <C, X>
    subject to  <A_i, X> = b_i,   X = diag(X_1, ..., X_k) >= 0

Dual::

    maximize    b^T y
    subject to  sum_i y_i A_i + S = C,   S >= 0

Linear functionals are given entrywise on the upper triangle of each
block: ``{(block, i, j): c}`` with ``i <= j`` means ``sum c * X[block][i, j]``.

The method is infeasible-start path following with Nesterov-Todd scaling
and Mehrotra's predictor-corrector.  Newton systems are solved through a
QR factorization of the scaled constraint matrix.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

Functional = Dict[Tuple[int, int, int], float]

MAX_BLOCK_DIM = 128


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


class SdpError(ValueError):
    pass


def _canonical(functional, blocks) -> Functional:
    out: Functional = {}
    for key, c in functional.items():
        if len(key) != 3:
            raise SdpError(f"functional key {key!r} must be (block, i, j)")
        k, i, j = (int(v) for v in key)
        if not 0 <= k < len(blocks):
            raise SdpError(f"block index {k} out of range")
        n = blocks[k]
        if not (0 <= i < n and 0 <= j < n):
            raise SdpError(f"entry ({i}, {j}) outside block {k} of dimension {n}")
        if i > j:
            i, j = j, i
        out[(k, i, j)] = out.get((k, i, j), 0.0) + float(c)
    return {key: c for key, c in out.items() if c != 0.0}


@dataclass
class SdpProblem:
    blocks: List[int]
    objective: Functional
    constraints: List[Tuple[Functional, float]]
    sense: str = "min"

    def __post_init__(self):
        self.blocks = [int(n) for n in self.blocks]
        if not self.blocks:
            raise SdpError("at least one block is required")
        for n in self.blocks:
            if not 1 <= n <= MAX_BLOCK_DIM:
                raise SdpError(f"block dimension {n} outside [1, {MAX_BLOCK_DIM}]")
        if self.sense not in ("min", "max"):
            raise SdpError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self.objective = _canonical(self.objective, self.blocks)
        self.constraints = [(_canonical(f, self.blocks), float(r)) for f, r in self.constraints]

    def evaluate(self, functional: Functional, mats: Sequence[np.ndarray]) -> float:
        return float(sum(c * mats[k][i, j] for (k, i, j), c in functional.items()))

    # interchange format
    def to_dict(self) -> dict:
        def enc(f):
            return [[k, i, j, c] for (k, i, j), c in sorted(f.items())]

        return {
            "format": "tiltedchsh-sdp/1",
            "sense": self.sense,
            "blocks": self.blocks,
            "objective": enc(self.objective),
            "constraints": [{"coeffs": enc(f), "rhs": r} for f, r in self.constraints],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SdpProblem":
        def dec(rows):
            return {(int(k), int(i), int(j)): float(c) for k, i, j, c in rows}

        return cls(
            blocks=d["blocks"],
            objective=dec(d["objective"]),
            constraints=[(dec(c["coeffs"]), c["rhs"]) for c in d["constraints"]],
            sense=d.get("sense", "min"),
        )

    @classmethod
    def from_json(cls, text: str) -> "SdpProblem":
        return cls.from_dict(json.loads(text))


@dataclass
class IterationRecord:
    primal_objective: float
    dual_objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float


@dataclass
class SdpSolution:
    status: Status
    primal: List[np.ndarray]
    dual: np.ndarray
    slack: List[np.ndarray]
    objective: float
    dual_objective: float
    duality_gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    certified_bound: Optional[float] = None
    kept_constraints: List[int] = field(default_factory=list)
    history: List[IterationRecord] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "duality_gap": self.duality_gap,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "iterations": self.iterations,
            "certified_bound": self.certified_bound,
            "primal": [m.tolist() for m in self.primal],
            "dual": self.dual.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _BlockOperator:
    """Sparse storage of the constraint matrices restricted to one block."""

    def __init__(self, n: int, rows, ii, jj, vals, m: int):
        self.n = n
        rows, ii, jj, vals = (np.asarray(v) for v in (rows, ii, jj, vals))
        # symmetric split of off-diagonal coefficients
        off = ii != jj
        self.rows = np.concatenate([rows, rows[off]]).astype(int)
        self.p = np.concatenate([ii, jj[off]]).astype(int)
        self.q = np.concatenate([jj, ii[off]]).astype(int)
        self.v = np.concatenate([np.where(off, vals / 2, vals), vals[off] / 2]).astype(float)
        nnz = len(self.v)
        self.R = sp.csr_matrix((self.v, (self.rows, np.arange(nnz))), shape=(m, nnz))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.R @ x[self.p, self.q]

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.p, self.q), self.v * y[self.rows])
        return out

    def schur(self, w: np.ndarray) -> np.ndarray:
        # M_ij = tr(A_i W A_j W); K[a, b] = W[q_a, p_b] W[q_b, p_a]
        t = w[np.ix_(self.q, self.p)]
        k = t * t.T
        return np.asarray((self.R @ (self.R @ k).T).T)


def _sym_matrix(functional: Functional, blocks, k: int) -> np.ndarray:
    n = blocks[k]
    out = np.zeros((n, n))
    for (kk, i, j), c in functional.items():
        if kk != k:
            continue
        if i == j:
            out[i, i] += c
        else:
            out[i, j] += c / 2
            out[j, i] += c / 2
    return out


def _filter_redundant(problem: SdpProblem, tol: float = 1e-10):
    """Indices of a maximal linearly independent subset of the constraints."""
    m = len(problem.constraints)
    if m == 0:
        return [], np.zeros((0, 0))
    cols: Dict[Tuple[int, int, int], int] = {}
    rows, colidx, vals = [], [], []
    for r, (f, _) in enumerate(problem.constraints):
        for key, c in f.items():
            rows.append(r)
            colidx.append(cols.setdefault(key, len(cols)))
            vals.append(c)
    a = np.zeros((m, max(len(cols), 1)))
    np.add.at(a, (rows, colidx), vals)
    b = np.array([r for _, r in problem.constraints])
    _, rr, piv = sla.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rr))
    rank = int(np.sum(diag > tol * max(diag.max(initial=0.0), 1.0)))
    keep = sorted(piv[:rank].tolist())
    if rank < m:
        x, *_ = np.linalg.lstsq(a[keep], b[keep], rcond=None)
        if np.abs(a @ x - b).max() > 1e-8 * (1 + np.abs(b).max()):
            raise SdpError("redundant constraints are inconsistent: problem is infeasible")
    return keep, a


def _scaling(x: np.ndarray, s: np.ndarray):
    """NT scaling G with G^T S G = G^{-1} X G^{-T} = diag(lam)."""
    lx = np.linalg.cholesky(x)
    ls = np.linalg.cholesky(s)
    u, lam, vt = np.linalg.svd(ls.T @ lx)
    rt = np.sqrt(lam)
    g = (lx @ vt.T) / rt
    ginv = (rt[:, None] * vt) @ sla.solve_triangular(lx, np.eye(len(lam)), lower=True)
    return g, ginv, lam


def _max_step(lam: np.ndarray, d_scaled: np.ndarray) -> float:
    r = 1 / np.sqrt(lam)
    m = (r[:, None] * d_scaled) * r[None, :]
    e = np.linalg.eigvalsh((m + m.T) / 2)[0]
    return math.inf if e >= 0 else -1 / e


def _lyap(lam: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return 2 * rhs / (lam[:, None] + lam[None, :])


def _svec_index(n: int):
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return iu, w


def _unsvec(v: np.ndarray, n: int, iu, w) -> np.ndarray:
    out = np.zeros((n, n))
    out[iu] = v / w
    return out + np.triu(out, 1).T


def solve(problem: SdpProblem, tol: float = 1e-8, max_iter: int = 100) -> SdpSolution:
    """Solve ``problem``; the returned values are in the caller's sense.

    Each Newton system is solved in NT-scaled coordinates, where it reduces
    to a least-squares projection; the scaled constraint matrix is factored
    by QR, whose R factor is the Cholesky factor of the Schur complement
    obtained without squaring its condition number.
    """
    blocks = problem.blocks
    keep, _ = _filter_redundant(problem)
    cons = [problem.constraints[i] for i in keep]
    m = len(cons)
    sign = 1.0 if problem.sense == "min" else -1.0
    cmat = [sign * _sym_matrix(problem.objective, blocks, k) for k in range(len(blocks))]
    b = np.array([r for _, r in cons], dtype=float)

    per_block = [([], [], [], []) for _ in blocks]
    for r, (f, _) in enumerate(cons):
        for (k, i, j), c in f.items():
            pb = per_block[k]
            pb[0].append(r), pb[1].append(i), pb[2].append(j), pb[3].append(c)
    ops = [_BlockOperator(n, *pb, m=m) for n, pb in zip(blocks, per_block)]
    # dense (m, n, n) copies of the constraint matrices, used for scaling
    dense = []
    for op in ops:
        a = np.zeros((m, op.n, op.n))
        np.add.at(a, (op.rows, op.p, op.q), op.v)
        dense.append(a)
    svec = [_svec_index(n) for n in blocks]

    def a_apply(xs):
        out = np.zeros(m)
        for op, x in zip(ops, xs):
            out += op.apply(x)
        return out

    def a_adj(y):
        return [op.adjoint(y) for op in ops]

    def inner(us, vs):
        return float(sum(np.sum(u * v) for u, v in zip(us, vs)))

    def fro(us):
        return math.sqrt(inner(us, us))

    a_norms = np.zeros(m)
    for op in ops:
        a_norms += np.asarray(op.R.multiply(op.R).sum(axis=1)).ravel()
    a_norms = np.sqrt(a_norms)
    nsum = sum(blocks)
    c_norm = fro(cmat)
    b_norm = float(np.linalg.norm(b))

    xi = max(10.0, math.sqrt(nsum), nsum * max(((1 + abs(bi)) / (1 + an) for bi, an in zip(b, a_norms)), default=1.0))
    et = max(10.0, math.sqrt(nsum), float(a_norms.max(initial=0.0)), c_norm)
    xs = [xi * np.eye(n) for n in blocks]
    ss = [et * np.eye(n) for n in blocks]
    y = np.zeros(m)
    blow_up = 1e10 * max(xi, et)

    history: List[IterationRecord] = []
    status = Status.MAX_ITER
    best = None
    best_merit = math.inf
    bound = None
    measures: List[float] = []
    since_best = 0
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - a_apply(xs)
        rd = [c - s - t for c, s, t in zip(cmat, ss, a_adj(y))]
        pobj = inner(cmat, xs)
        dobj = float(b @ y)
        comp = inner(xs, ss)
        pinf = float(np.linalg.norm(rp)) / (1 + b_norm)
        dinf = fro(rd) / (1 + c_norm)
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        history.append(IterationRecord(sign * pobj, sign * dobj, pinf, dinf, comp))
        log.debug("it %d pobj %.10g dobj %.10g pinf %.2e dinf %.2e gap %.2e", it, pobj, dobj, pinf, dinf, gap)
        merit = max(pinf, dinf, gap)
        progress = False
        if merit < 0.99 * best_merit:
            best_merit, progress = merit, True
            best = (xs, y, ss)
        if dinf < tol and (bound is None or dobj > bound + tol * (1 + abs(dobj))):
            # S >= 0 with C - A^T y - S ~ 0: b^T y bounds the optimum
            bound, progress = dobj, True
        since_best = 0 if progress else since_best + 1
        if pinf < tol and dinf < tol and gap < tol:
            status = Status.OPTIMAL
            break
        measures.append(comp / (nsum * (1 + abs(pobj) + abs(dobj))))
        diverging = len(measures) > 20 and measures[-1] > measures[-21] and min(pinf, dinf) > tol
        if diverging or max(fro(xs), fro(ss), float(np.abs(y).max(initial=0.0))) > blow_up:
            # iterates diverge: one side has no feasible point
            status = Status.INFEASIBLE
            break
        if since_best >= 10:
            log.info("no progress for 10 iterations; stopping at iteration %d", it)
            break

        try:
            scal = [_scaling(x, s) for x, s in zip(xs, ss)]
        except np.linalg.LinAlgError:
            log.info("lost positive definiteness at iteration %d", it)
            break
        # scaled constraint matrix, columns in svec coordinates
        cols = []
        for (g, _, _), a, (iu, w) in zip(scal, dense, svec):
            ga = np.swapaxes(a @ g, 1, 2) @ g  # (G^T A_i G)^T, symmetric
            cols.append(ga[:, iu[0], iu[1]] * w)
        at = np.hstack(cols).T
        q, rfac = sla.qr(at, mode="economic", check_finite=False)
        if np.abs(np.diag(rfac)).min(initial=1.0) == 0.0:
            log.warning("scaled constraint matrix lost rank at iteration %d", it)
            break
        rt_rp = sla.solve_triangular(rfac, rp, trans="T", check_finite=False)
        rd_s = [g.T @ r @ g for (g, _, _), r in zip(scal, rd)]
        mu = comp / nsum

        def direction(zs):
            cvec = np.concatenate([(z - r)[iu] * w for z, r, (iu, w) in zip(zs, rd_s, svec)])
            qc = q.T @ cvec
            dy = sla.solve_triangular(rfac, rt_rp - qc, check_finite=False)
            zsym = [(z + z.T) / 2 for z in zs]
            for sweep in range(4):
                # the dual residual is removed exactly; rounding goes to complementarity
                ds = [r - t for r, t in zip(rd, a_adj(dy))]
                ds = [(d + d.T) / 2 for d in ds]
                dss = [g.T @ d @ g for (g, _, _), d in zip(scal, ds)]
                dxs = [z - d for z, d in zip(zsym, dss)]
                if sweep == 3:
                    break
                # iterative refinement of the primal equation A(dX) = rp
                res = rp - a_apply([g @ u @ g.T for (g, _, _), u in zip(scal, dxs)])
                if np.linalg.norm(res) <= 1e-3 * tol * (1 + b_norm):
                    break
                corr = sla.solve_triangular(rfac, res, trans="T", check_finite=False)
                dy = dy + sla.solve_triangular(rfac, corr, check_finite=False)
            return dxs, dy, dss, ds

        def steps(dxs, dss):
            ap = min(_max_step(lam, u) for (_, _, lam), u in zip(scal, dxs))
            ad = min(_max_step(lam, v) for (_, _, lam), v in zip(scal, dss))
            return ap, ad

        # predictor
        dxs, dy, dss, _ = direction([-np.diag(lam) for _, _, lam in scal])
        ap, ad = steps(dxs, dss)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(
            float(np.sum((np.diag(lam) + ap * u) * (np.diag(lam) + ad * v)))
            for (_, _, lam), u, v in zip(scal, dxs, dss)
        ) / nsum
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        gamma = 0.9 + 0.09 * min(ap, ad)
        # corrector
        zs = []
        for (_, _, lam), u, v in zip(scal, dxs, dss):
            r = sigma * mu * np.eye(len(lam)) - np.diag(lam**2) - (u @ v + v @ u) / 2
            zs.append(_lyap(lam, r))
        dxs, dy, dss, ds = direction(zs)
        ap, ad = steps(dxs, dss)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        xs = [x + ap * (g @ u @ g.T) for x, (g, _, _), u in zip(xs, scal, dxs)]
        ss = [s + ad * d for s, d in zip(ss, ds)]
        xs = [(x + x.T) / 2 for x in xs]
        ss = [(s + s.T) / 2 for s in ss]
        y = y + ad * dy

    if status != Status.OPTIMAL and best is not None and status != Status.INFEASIBLE:
        xs, y, ss = best
    rp = b - a_apply(xs)
    rd = [c - s - t for c, s, t in zip(cmat, ss, a_adj(y))]
    pobj, dobj = inner(cmat, xs), float(b @ y)
    return SdpSolution(
        status=status,
        primal=xs,
        dual=sign * y,
        slack=[sign * s for s in ss],
        objective=sign * pobj,
        dual_objective=sign * dobj,
        duality_gap=abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj)),
        primal_residual=float(np.linalg.norm(rp)) / (1 + b_norm),
        dual_residual=fro(rd) / (1 + c_norm),
        iterations=it,
        certified_bound=None if bound is None else sign * bound,
        kept_constraints=keep,
        history=history,
    )
