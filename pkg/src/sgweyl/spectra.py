"""Singular values, counting functions, weak Schatten quasinorms and Weyl fits."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components

from .opcalc import DiscreteOperator

__all__ = [
    "InsufficientDataError",
    "SingularValueSequence",
    "WeylFit",
    "singular_values",
    "weak_quasinorm",
    "counting_functions",
    "weyl_fit",
    "cyclic_eig_check",
    "kyfan_perturbation_check",
    "kyfan_squeeze_check",
    "sandwich_transport_check",
    "write_svals_csv",
]


class InsufficientDataError(ValueError):
    """Too few values in the fit window."""


@dataclass(frozen=True)
class SingularValueSequence:
    """Nonincreasing nonnegative values with a provenance string."""

    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("singular values must be finite and nonnegative")
        if np.any(np.diff(v) > 1e-12 * max(1.0, v[0] if v.size else 0.0)):
            raise ValueError("singular values must be nonincreasing")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def _svd_vals(a) -> np.ndarray:
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def _sparse_svals(A, max_block: int) -> np.ndarray:
    """Singular values of a sparse matrix via its bipartite connected components."""
    A = sp.csr_array(A)
    m, n = A.shape
    pattern = sp.csr_array((np.ones(A.nnz), A.indices, A.indptr), shape=A.shape)
    graph = sp.block_array([[None, pattern], [pattern.T, None]], format="csr")
    ncomp, labels = connected_components(graph, directed=False)
    rl, cl = labels[:m], labels[m:]
    order_r, order_c = np.argsort(rl, kind="stable"), np.argsort(cl, kind="stable")
    r_bounds = np.searchsorted(rl[order_r], np.arange(ncomp + 1))
    c_bounds = np.searchsorted(cl[order_c], np.arange(ncomp + 1))
    out = []
    for c in range(ncomp):
        R = order_r[r_bounds[c]:r_bounds[c + 1]]
        C = order_c[c_bounds[c]:c_bounds[c + 1]]
        if R.size == 0 or C.size == 0:
            continue
        if min(R.size, C.size) > max_block:
            raise MemoryError("sparse operator has a connected block larger than max_block")
        out.append(_svd_vals(A[R][:, C].toarray()))
    vals = np.concatenate(out) if out else np.zeros(0)
    return np.concatenate([vals, np.zeros(min(m, n) - vals.size)])


def singular_values(B, *, max_block: int = 4096, source: str | None = None) -> SingularValueSequence:
    """s-numbers of a DiscreteOperator (weights folded in), array or sparse matrix.

    Factored operators L C R use the QR factors of L and R^H, so only a
    rank-sized core is decomposed.  Sparse operators are split into the
    connected components of their bipartite sparsity graph, each decomposed
    densely.
    """
    if isinstance(B, DiscreteOperator):
        src = source or f"{B.form} {B.shape}"
        op = B.normalized()
        if op.form == "factored":
            L, C, R = op.left, op.core, op.right
            if min(op.shape) <= min(C.shape):
                vals = _svd_vals(op.to_dense())
            else:
                rl = np.linalg.qr(L, mode="r")
                rr = np.linalg.qr(R.conj().T, mode="r")
                vals = _svd_vals(rl @ C @ rr.conj().T)
        elif op.form == "sparse":
            vals = _sparse_svals(op.sparse, max_block)
        else:
            vals = _svd_vals(op.to_dense())
    elif sp.issparse(B):
        src = source or f"sparse {B.shape}"
        vals = _sparse_svals(B, max_block)
    else:
        src = source or "dense"
        vals = _svd_vals(B)
    vals = np.sort(np.clip(vals, 0, None))[::-1]
    return SingularValueSequence(vals, src)


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, SingularValueSequence) else np.asarray(s, dtype=float)


def weak_quasinorm(s, p: float) -> float:
    """N_p = sup_j s_j j^(1/p)."""
    v = _values(s)
    if v.size == 0:
        return 0.0
    j = np.arange(1, v.size + 1)
    return float(np.max(v * j ** (1.0 / p)))


def counting_functions(eigs, t_grid) -> tuple[np.ndarray, np.ndarray]:
    """(N+(t), N-(t)): numbers of eigenvalues above 1/t and below -1/t."""
    e = np.asarray(eigs)
    if np.iscomplexobj(e):
        if np.any(np.abs(e.imag) > 1e-10 * max(1.0, np.abs(e).max())):
            raise ValueError("counting functions need real eigenvalues")
        e = e.real
    t = np.asarray(t_grid, dtype=float)
    pos = np.sort(e[e > 0])
    neg = np.sort(-e[e < 0])
    thr = 1.0 / t
    n_plus = pos.size - np.searchsorted(pos, thr, side="right")
    n_minus = neg.size - np.searchsorted(neg, thr, side="right")
    return n_plus, n_minus


@dataclass(frozen=True)
class WeylFit:
    """Estimate of lim s_j j^p over the tail window [lo, hi] (1-based indices)."""

    p: float
    c_est: float
    window: tuple[int, int]
    dispersion: float
    n_used: int
    richardson: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def weyl_fit(s, p: float, J: int | None = None, *, window: tuple[int, int] | None = None,
             richardson: bool = False, min_count: int = 50) -> WeylFit:
    """Median of s_j j^p over the window [J/4, J].

    Parameters
    ----------
    s : SingularValueSequence or array_like
        Nonincreasing values s_1 >= s_2 >= ...
    p : float
        Exponent of the expected decay s_j ~ c j^(-p).
    J : int, optional
        Upper end of the window; defaults to the number of positive values.
    window : (int, int), optional
        Explicit 1-based inclusive window, overriding J.
    richardson : bool
        Also report 2 c(J) - c(J/2), which removes a 1/J bias term.

    Returns
    -------
    WeylFit
        ``dispersion`` is (q90 - q10) / median over the window.
    """
    v = _values(s)
    if v.size > 1 and np.any(np.diff(v) > 1e-12 * max(1.0, abs(v[0]))):
        raise ValueError("weyl_fit needs a nonincreasing sequence")
    if window is None:
        J = int(np.count_nonzero(v > 0)) if J is None else int(J)
        J = min(J, v.size)
        window = (max(1, int(np.ceil(J / 4))), J)
    lo, hi = window
    j = np.arange(lo, hi + 1)
    vals = v[lo - 1:hi]
    ok = vals > 0
    if ok.sum() < min_count:
        raise InsufficientDataError(f"only {int(ok.sum())} usable values in window {window}")
    q = vals[ok] * j[ok] ** p
    med = float(np.median(q))
    q10, q90 = np.quantile(q, [0.1, 0.9])
    rich = None
    if richardson:
        half = weyl_fit(v, p, window=(max(1, lo // 2), hi // 2), min_count=min(min_count, 10))
        rich = 2 * med - half.c_est
    return WeylFit(float(p), med, (int(lo), int(hi)), float((q90 - q10) / med) if med else np.inf,
                   int(ok.sum()), rich)


def _dense(B) -> np.ndarray:
    if isinstance(B, DiscreteOperator):
        return B.to_dense()
    return B.toarray() if sp.issparse(B) else np.asarray(B)


def cyclic_eig_check(B1, B2, *, floor: float = 1e-8) -> dict:
    """Compare the nonzero eigenvalues of B1 B2 and B2 B1.

    Eigenvalues below ``floor`` (relative to the largest modulus) count as
    zero.  Matching is an optimal assignment on |lambda - mu|.
    """
    A, B = _dense(B1), _dense(B2)
    e1 = np.linalg.eigvals(A @ B)
    e2 = np.linalg.eigvals(B @ A)
    scale = max(np.abs(e1).max(initial=0), np.abs(e2).max(initial=0), 1e-300)
    nz1 = e1[np.abs(e1) > floor * max(scale, 1.0)]
    nz2 = e2[np.abs(e2) > floor * max(scale, 1.0)]
    if nz1.size != nz2.size:
        return {"agree": False, "max_error": np.inf, "n1": int(nz1.size), "n2": int(nz2.size)}
    if nz1.size == 0:
        return {"agree": True, "max_error": 0.0, "n1": 0, "n2": 0}
    cost = np.abs(nz1[:, None] - nz2[None, :])
    r, c = linear_sum_assignment(cost)
    err = float(cost[r, c].max())
    return {"agree": err <= floor * max(scale, 1.0), "max_error": err, "n1": int(nz1.size),
            "n2": int(nz2.size), "eigenvalues": np.sort_complex(nz1)}


def kyfan_perturbation_check(B, B_prime, p: float, J: int | None = None,
                             tol: float = 0.01) -> dict:
    """Tail fits of B and B + B' with exponent 1/p.

    If s_j(B) j^(1/p) -> C0 and s_j(B') j^(1/p) -> 0, the two fitted
    constants agree asymptotically; ``agree`` reports agreement within tol.
    """
    sB = singular_values(B) if not isinstance(B, SingularValueSequence) else B
    sS = singular_values(_dense(B) + _dense(B_prime))
    f0 = weyl_fit(sB, 1.0 / p, J)
    f1 = weyl_fit(sS, 1.0 / p, J, window=f0.window)
    rel = abs(f1.c_est - f0.c_est) / f0.c_est if f0.c_est else np.inf
    return {"c_B": f0.c_est, "c_sum": f1.c_est, "rel_diff": rel, "agree": rel <= tol,
            "window": f0.window}


def kyfan_squeeze_check(approximants, B, p: float, J: int | None = None) -> dict:
    """Fitted constants of approximants B_k against B (two-parameter version).

    Returns the constants, their relative distances to B's constant and the
    fraction of successive steps in which the distance does not grow.
    """
    s_ref = B if isinstance(B, SingularValueSequence) else singular_values(B)
    f_ref = weyl_fit(s_ref, 1.0 / p, J)
    consts, dists = [], []
    for Bk in approximants:
        sk = Bk if isinstance(Bk, SingularValueSequence) else singular_values(Bk)
        fk = weyl_fit(sk, 1.0 / p, window=f_ref.window)
        consts.append(fk.c_est)
        dists.append(abs(fk.c_est - f_ref.c_est) / f_ref.c_est)
    return {"c_ref": f_ref.c_est, "constants": consts, "rel_dist": dists,
            "window": f_ref.window}


def sandwich_transport_check(B, eta, *, p: float | None = None, J: int | None = None) -> dict:
    """Check s_j(eta B eta^-1) against s_j(B) scaled by ||eta|| ||eta^-1||."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    if isinstance(B, DiscreteOperator):
        B = B.normalized().to_dense()
    A = _dense(B)
    s0 = singular_values(A).values
    s1 = singular_values(eta[:, None] * A / eta[None, :]).values
    kappa = eta.max() / eta.min()
    lower_ok = bool(np.all(s1 >= s0 / kappa * (1 - 1e-12) - 1e-300))
    upper_ok = bool(np.all(s1 <= s0 * kappa * (1 + 1e-12) + 1e-300))
    out = {"kappa": float(kappa), "lower_ok": lower_ok, "upper_ok": upper_ok,
           "holds": lower_ok and upper_ok}
    if p is not None:
        out["c_B"] = weyl_fit(s0, p, J).c_est
        out["c_sandwich"] = weyl_fit(s1, p, J).c_est
    return out


def write_svals_csv(path, s, p: float) -> None:
    """CSV with columns j, s_j, s_j*j^p."""
    v = _values(s)
    j = np.arange(1, v.size + 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "s_j", "s_j_jp"])
        for jj, sv in zip(j, v):
            w.writerow([int(jj), repr(float(sv)), repr(float(sv * jj**p))])
