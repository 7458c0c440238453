"""Boundary symbol operators and their assembly on the periodic half-plane.

Functions on T x R_+ are represented in the orthonormal basis

    e^{i xi' x'} phi_k(x_n, [xi'])    (xi' in {-N..N}, k < K),

ordered mode-major: index = mode_index * K + k.  Boundary functions on T use
the Fourier basis e^{i xi' x'} normalized in L2(T) / sqrt(2 pi), so all
operators below are matrices between orthonormal coordinate systems.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .laguerre import (UnderresolutionWarning, cross_gram, laguerre_table,
                       xi_bracket)

__all__ = [
    "DiscreteOperator",
    "ModeGrid",
    "SGKernel",
    "PoissonKernel",
    "opg_boundary_matrix",
    "assemble_opg",
    "assemble_opk",
    "assemble_opt",
    "phi_op",
    "sgo_to_poisson_family",
    "clm_decompose",
    "compose_boundary",
    "truncate_psdo",
    "save_sgw",
    "load_sgw",
]


class DiscreteOperator:
    """A linear map between finite coordinate spaces.

    Exactly one representation is stored: ``matrix`` (dense ndarray),
    ``sparse`` (scipy sparse matrix) or the factored triple
    ``left @ core @ right``.  Optional positive ``in_weights``/``out_weights``
    describe the inner products <u, v> = sum w u conj(v) of weighted spaces;
    singular values and adjoints are taken with respect to them.
    """

    def __init__(self, matrix=None, *, sparse=None, left=None, core=None, right=None,
                 in_weights=None, out_weights=None, domain_basis: str = "",
                 codomain_basis: str = ""):
        forms = [matrix is not None, sparse is not None, left is not None]
        if sum(forms) != 1:
            raise ValueError("give exactly one of matrix, sparse, or (left, core, right)")
        self.matrix = None if matrix is None else np.asarray(matrix)
        self.sparse = None if sparse is None else sp.csr_array(sparse)
        if left is not None:
            left, right = np.asarray(left), np.asarray(right)
            core = np.eye(left.shape[1]) if core is None else np.asarray(core)
            if left.shape[1] != core.shape[0] or core.shape[1] != right.shape[0]:
                raise ValueError("factor shapes do not chain")
        self.left, self.core, self.right = left, core, right
        self.in_weights = None if in_weights is None else np.asarray(in_weights, float)
        self.out_weights = None if out_weights is None else np.asarray(out_weights, float)
        self.domain_basis = domain_basis
        self.codomain_basis = codomain_basis

    @property
    def form(self) -> str:
        if self.matrix is not None:
            return "dense"
        return "sparse" if self.sparse is not None else "factored"

    @property
    def shape(self) -> tuple[int, int]:
        if self.matrix is not None:
            return self.matrix.shape
        if self.sparse is not None:
            return self.sparse.shape
        return (self.left.shape[0], self.right.shape[1])

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v)
        if self.matrix is not None:
            return self.matrix @ v
        if self.sparse is not None:
            return self.sparse @ v
        return self.left @ (self.core @ (self.right @ v))

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.sparse is not None:
            return self.sparse.toarray()
        return self.left @ self.core @ self.right

    def _with(self, **kw) -> "DiscreteOperator":
        base = dict(in_weights=self.in_weights, out_weights=self.out_weights,
                    domain_basis=self.domain_basis, codomain_basis=self.codomain_basis)
        base.update(kw)
        return DiscreteOperator(**base)

    def adjoint(self) -> "DiscreteOperator":
        """Adjoint with respect to the weighted inner products."""
        wi = 1.0 if self.in_weights is None else self.in_weights
        wo = 1.0 if self.out_weights is None else self.out_weights
        kw = dict(in_weights=self.out_weights, out_weights=self.in_weights,
                  domain_basis=self.codomain_basis, codomain_basis=self.domain_basis)
        if self.matrix is not None:
            m = self.matrix.conj().T
            return DiscreteOperator(m * wo / np.reshape(wi, (-1, 1)) if np.ndim(wi) or np.ndim(wo)
                                    else m, **kw)
        if self.sparse is not None:
            m = self.sparse.conj().T
            if np.ndim(wi) or np.ndim(wo):
                m = sp.diags_array(1.0 / np.broadcast_to(wi, (m.shape[0],))) @ m @ \
                    sp.diags_array(np.broadcast_to(wo, (m.shape[1],)) + 0.0)
            return DiscreteOperator(sparse=m, **kw)
        left = self.right.conj().T / np.reshape(wi, (-1, 1)) if np.ndim(wi) else self.right.conj().T
        right = self.left.conj().T * wo if np.ndim(wo) else self.left.conj().T
        return DiscreteOperator(left=left, core=self.core.conj().T, right=right, **kw)

    def normalized(self) -> "DiscreteOperator":
        """Same operator in orthonormal coordinates (weights folded in)."""
        if self.in_weights is None and self.out_weights is None:
            return self
        so = 1.0 if self.out_weights is None else np.sqrt(self.out_weights)
        si = 1.0 if self.in_weights is None else 1.0 / np.sqrt(self.in_weights)
        kw = dict(domain_basis=self.domain_basis, codomain_basis=self.codomain_basis)
        if self.matrix is not None:
            return DiscreteOperator(np.reshape(so, (-1, 1)) * self.matrix * si, **kw)
        if self.sparse is not None:
            m = self.sparse
            if np.ndim(so):
                m = sp.diags_array(so) @ m
            if np.ndim(si):
                m = m @ sp.diags_array(si)
            return DiscreteOperator(sparse=m, **kw)
        return DiscreteOperator(left=np.reshape(so, (-1, 1)) * self.left, core=self.core,
                                right=self.right * si, **kw)

    def __repr__(self) -> str:
        return f"DiscreteOperator({self.form}, shape={self.shape})"


@dataclass(frozen=True)
class ModeGrid:
    """Tangential modes -N..N, K Laguerre orders per mode, and an x' grid."""

    N: int
    K: int
    n_x: int | None = None

    def __post_init__(self):
        if self.N < 0 or self.K < 1:
            raise ValueError("need N >= 0 and K >= 1")
        if self.n_x is None:
            object.__setattr__(self, "n_x", 2 * self.N + 2)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def n_modes(self) -> int:
        return 2 * self.N + 1

    @property
    def sigma(self) -> np.ndarray:
        return xi_bracket(self.modes.astype(float))

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * 2 * np.pi / self.n_x

    @property
    def dim(self) -> int:
        return self.n_modes * self.K


@dataclass(frozen=True)
class SGKernel:
    """Laguerre coefficients c_jk(x', xi') of a singular Green symbol-kernel.

    ``coeff`` has shape (K, K, n_modes) for x'-independent kernels or
    (K, K, n_x, n_modes) when sampled on an x' grid.
    """

    coeff: np.ndarray
    order: float = 0.0
    holder_exponent: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=complex)
        if c.ndim not in (3, 4) or c.shape[0] != c.shape[1]:
            raise ValueError("coeff must have shape (K, K, [n_x,] n_modes)")
        object.__setattr__(self, "coeff", c)

    @property
    def K(self) -> int:
        return self.coeff.shape[0]

    @property
    def x_independent(self) -> bool:
        return self.coeff.ndim == 3

    def envelope(self, modes, M: int = 2, Mp: int = 2) -> float:
        """sup over modes (and x') of ||<j>^M <k>^M' c_jk||_F / <xi'>^(order+1)."""
        j = np.arange(self.K)
        w = (np.sqrt(1 + j**2)[:, None] ** M) * (np.sqrt(1 + j**2)[None, :] ** Mp)
        c = self.coeff if self.x_independent else np.moveaxis(self.coeff, 2, -1)
        wc = c * w.reshape(w.shape + (1,) * (c.ndim - 2))
        norms = np.sqrt(np.sum(np.abs(wc) ** 2, axis=(0, 1)))
        if not self.x_independent:
            norms = norms.max(axis=-1)
        bracket = np.sqrt(1 + np.asarray(modes, float) ** 2) ** (self.order + 1)
        return float(np.max(norms / bracket))


@dataclass(frozen=True)
class PoissonKernel:
    """Laguerre coefficients b_k(x', xi') of a Poisson (or trace) symbol-kernel.

    ``coeff`` has shape (K, n_modes) or (K, n_x, n_modes).
    """

    coeff: np.ndarray
    order: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=complex)
        if c.ndim not in (2, 3):
            raise ValueError("coeff must have shape (K, [n_x,] n_modes)")
        object.__setattr__(self, "coeff", c)

    @property
    def K(self) -> int:
        return self.coeff.shape[0]

    @property
    def x_independent(self) -> bool:
        return self.coeff.ndim == 2


def opg_boundary_matrix(g: SGKernel, x_index: int | None, mode_index: int, K: int) -> np.ndarray:
    """Matrix of the boundary symbol operator g(x', xi', D_n) in the phi basis."""
    if K > g.K:
        raise ValueError("K exceeds the stored order")
    if g.x_independent:
        return g.coeff[:K, :K, mode_index]
    return g.coeff[:K, :K, x_index, mode_index]


def _fourier_bands(c: np.ndarray, axis: int, tol: float):
    """Discrete Fourier coefficients in x' and the bands above tol."""
    n = c.shape[axis]
    chat = np.fft.fft(c, axis=axis) / n
    nu = np.fft.fftfreq(n, 1.0 / n).astype(int)
    mags = np.max(np.abs(np.moveaxis(chat, axis, 0)).reshape(n, -1), axis=1)
    keep = mags > tol * max(mags.max(), np.finfo(float).tiny)
    return chat, nu, keep


def _coupled_blocks(chat_bands, nu, keep, grid: ModeGrid, K_in_rows: int, tol: float, what: str):
    """Blocks (xi', eta') = CrossGram(sigma(xi'), sigma(eta')) @ chat(xi' - eta'; eta').

    chat_bands has shape (K_rows, K_cols, n_x, n_modes).  Returns COO pieces.
    """
    sig = grid.sigma
    nm, K = grid.n_modes, grid.K
    rows, cols, vals = [], [], []
    lost = 0.0
    total = 0.0
    for b in np.nonzero(keep)[0]:
        v = nu[b]
        src = np.arange(nm)
        dst = src + v
        ok = (dst >= 0) & (dst < nm)
        blocks_in = chat_bands[:, :, b, :]  # (Kr, Kc, nm)
        col_mass = np.sum(np.abs(blocks_in) ** 2)
        total += col_mass
        if not np.any(ok):
            lost += col_mass
            continue
        s_in, s_out = sig[src[ok]], sig[dst[ok]]
        G = cross_gram(max(K, K_in_rows), s_out, s_in)[:, :K, :K_in_rows]
        blk = np.einsum("mij,jkm->mik", G, blocks_in[:, :, ok])
        kept = np.sum(np.abs(blk) ** 2)
        lost += col_mass - kept
        ncol = blk.shape[2]
        r = (dst[ok][:, None, None] * K + np.arange(K)[None, :, None])
        c = (src[ok][:, None, None] * ncol + np.arange(ncol)[None, None, :])
        r, c = np.broadcast_arrays(r, c)
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(blk.ravel())
    if total > 0 and lost > tol * total:
        warnings.warn(f"{what}: {lost / total:.2e} of the kernel mass falls outside the "
                      "represented modes/orders", UnderresolutionWarning, stacklevel=3)
    if rows:
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    return np.zeros(0, int), np.zeros(0, int), np.zeros(0, complex)


def assemble_opg(g: SGKernel, grid: ModeGrid, *, band_tol: float = 1e-14,
                 warn_tol: float = 1e-8) -> DiscreteOperator:
    """Assemble the full singular Green operator on the mode/Laguerre basis.

    The symbol is quantized in x'-form: an input basis function
    e^{i eta' x'} phi_k(., [eta']) is multiplied by the kernel evaluated at
    eta', the x' dependence is expanded in Fourier modes nu, and the result
    is re-expanded in phi_j(., [eta' + nu]) through cross-Gram matrices.
    x'-independent kernels give block-diagonal operators.
    """
    K, nm = grid.K, grid.n_modes
    if g.K < K:
        raise ValueError("kernel has fewer Laguerre orders than the grid")
    if g.coeff.shape[-1] != nm:
        raise ValueError("kernel mode count does not match the grid")
    if g.x_independent:
        blocks = np.moveaxis(g.coeff[:K, :K, :], -1, 0)
        mat = sp.block_diag(list(blocks), format="csr")
        return DiscreteOperator(sparse=mat, domain_basis="mode x laguerre",
                                codomain_basis="mode x laguerre")
    chat, nu, keep = _fourier_bands(g.coeff[:, :K], axis=2, tol=band_tol)
    r, c, v = _coupled_blocks(chat, nu, keep, grid, g.K, warn_tol, "assemble_opg")
    mat = sp.coo_array((v, (r, c)), shape=(grid.dim, grid.dim)).tocsr()
    return DiscreteOperator(sparse=mat, domain_basis="mode x laguerre",
                            codomain_basis="mode x laguerre")


def assemble_opk(k: PoissonKernel, grid: ModeGrid, *, band_tol: float = 1e-14,
                 warn_tol: float = 1e-8) -> DiscreteOperator:
    """Poisson operator: boundary Fourier modes -> mode/Laguerre coordinates."""
    K, nm = grid.K, grid.n_modes
    if k.coeff.shape[-1] != nm:
        raise ValueError("kernel mode count does not match the grid")
    if k.x_independent:
        b = np.zeros((k.K, nm), complex)
        b[:] = k.coeff
        Kc = min(K, k.K)
        rows = (np.arange(nm)[None, :] * K + np.arange(Kc)[:, None]).ravel()
        cols = np.broadcast_to(np.arange(nm)[None, :], (Kc, nm)).ravel()
        mat = sp.coo_array((b[:Kc].ravel(), (rows, cols)), shape=(grid.dim, nm)).tocsr()
    else:
        chat, nu, keep = _fourier_bands(k.coeff[:, None], axis=2, tol=band_tol)
        r, c, v = _coupled_blocks(chat, nu, keep, grid, k.K, warn_tol, "assemble_opk")
        mat = sp.coo_array((v, (r, c)), shape=(grid.dim, nm)).tocsr()
    return DiscreteOperator(sparse=mat, domain_basis="mode", codomain_basis="mode x laguerre")


def assemble_opt(t: PoissonKernel, grid: ModeGrid, *, band_tol: float = 1e-14) -> DiscreteOperator:
    """Trace operator u -> sum_k int t_k phi_k u dx_n, quantized in x'-form."""
    K, nm = grid.K, grid.n_modes
    Kc = min(K, t.K)
    if t.x_independent:
        rows = np.broadcast_to(np.arange(nm)[None, :], (Kc, nm)).ravel()
        cols = (np.arange(nm)[None, :] * K + np.arange(Kc)[:, None]).ravel()
        mat = sp.coo_array((t.coeff[:Kc].ravel(), (rows, cols)), shape=(nm, grid.dim)).tocsr()
    else:
        chat, nu, keep = _fourier_bands(t.coeff[:Kc], axis=1, tol=band_tol)
        rows, cols, vals = [], [], []
        for b in np.nonzero(keep)[0]:
            src = np.arange(nm)
            dst = src + nu[b]
            ok = (dst >= 0) & (dst < nm)
            r = np.broadcast_to(dst[ok][None, :], (Kc, ok.sum()))
            c = src[ok][None, :] * K + np.arange(Kc)[:, None]
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(chat[:, b, ok].ravel())
        mat = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(nm, grid.dim)).tocsr()
    return DiscreteOperator(sparse=mat, domain_basis="mode x laguerre", codomain_basis="mode")


def phi_op(k: int, grid: ModeGrid) -> DiscreteOperator:
    """Laguerre boundary operator: mode xi' -> e^{i xi' x'} phi_k(x_n, [xi'])."""
    if not 0 <= k < grid.K:
        raise ValueError("k out of range for the grid")
    nm = grid.n_modes
    rows = np.arange(nm) * grid.K + k
    mat = sp.coo_array((np.ones(nm), (rows, np.arange(nm))), shape=(grid.dim, nm)).tocsr()
    return DiscreteOperator(sparse=mat, domain_basis="mode", codomain_basis="mode x laguerre")


def sgo_to_poisson_family(g: SGKernel) -> list[PoissonKernel]:
    """Poisson kernels K_k with coefficients (c_jk)_j, so that G = sum_k K_k Phi_k*."""
    return [PoissonKernel(g.coeff[:, k], g.order) for k in range(g.K)]


def _as_array(G: DiscreteOperator):
    return G.sparse if G.sparse is not None else G.to_dense()


def clm_decompose(G: DiscreteOperator, M: int, grid: ModeGrid):
    """Split G into the Laguerre-band part G_M and the remainder.

    Returns (C, G_M, G_M_dagger) with C[l][m] = Phi_l* G Phi_m (n_modes square
    matrices), G_M = sum_{l,m<M} Phi_l C_lm Phi_m* and G_M_dagger = G - G_M.
    """
    if M > grid.K:
        raise ValueError("M exceeds the number of Laguerre orders")
    A = _as_array(G)
    K = grid.K
    C = [[A[l::K, :][:, m::K] for m in range(M)] for l in range(M)]
    mask = np.zeros(grid.dim, bool)
    mask[(np.arange(grid.n_modes)[:, None] * K + np.arange(M)[None, :]).ravel()] = True
    P = sp.diags_array(mask.astype(float))
    if sp.issparse(A):
        GM = (P @ A @ P).tocsr()
        GM.eliminate_zeros()
        return C, DiscreteOperator(sparse=GM), DiscreteOperator(sparse=(A - GM).tocsr())
    GM = A * np.outer(mask, mask)
    return C, DiscreteOperator(GM), DiscreteOperator(A - GM)


def compose_boundary(a, b, kind: str):
    """Compose boundary symbol operators at one (x', xi') in Laguerre coefficients.

    ``a`` and ``b`` are :class:`~sgweyl.laguerre.LaguerreCoefficients` whose
    values are vectors (Poisson/trace kernels) or matrices (singular Green
    kernels), or plain scalars for the ``s`` factor.  Kinds:

    ``kt``  Poisson then trace: kernel matrix b_j b'_k;
    ``tk``  trace of Poisson: sum_k b_k b'_k;
    ``gk``  Poisson kernel C b;  ``tg``  trace kernel b C;
    ``gg``  kernel C C';  ``ks``  Poisson kernel b s;  ``st``  trace kernel s b.
    """
    from .laguerre import LaguerreCoefficients

    def vals(z):
        return z.values if isinstance(z, LaguerreCoefficients) else np.asarray(z)

    sig = [z.sigma for z in (a, b) if isinstance(z, LaguerreCoefficients)]
    if len(sig) == 2 and not np.isclose(sig[0], sig[1], rtol=1e-14, atol=0):
        raise ValueError("sigma mismatch: composition needs a cross-Gram change of basis")
    sigma = sig[0] if sig else None
    A, B = vals(a), vals(b)
    if kind == "kt":
        out = np.outer(A, B)
    elif kind == "tk":
        n = min(A.size, B.size)
        return complex(np.dot(A[:n], B[:n]))
    elif kind == "gk":
        out = A[:, : B.size] @ B[: A.shape[1]]
    elif kind == "tg":
        out = A[: B.shape[0]] @ B[: A.size]
    elif kind == "gg":
        out = A @ B
    elif kind in ("ks", "st"):
        out = A * B
    else:
        raise ValueError(f"unknown composition kind {kind!r}")
    return LaguerreCoefficients(out, sigma)


def truncate_psdo(Q: DiscreteOperator, mask, *, compress: bool = False) -> DiscreteOperator:
    """Truncation Q_+ = r+ Q e+ to the grid points where ``mask`` is true.

    By default the result acts on the full grid (zero outside the subdomain);
    with ``compress=True`` it is the restriction to the subdomain coordinates.
    """
    mask = np.asarray(mask, bool).ravel()
    if mask.size != Q.shape[0] or Q.shape[0] != Q.shape[1]:
        raise ValueError("mask must match a square operator")
    idx = np.nonzero(mask)[0]
    w = None if Q.in_weights is None else Q.in_weights
    if Q.sparse is not None:
        A = Q.sparse
        if compress:
            sub = A[idx][:, idx]
        else:
            P = sp.diags_array(mask.astype(float))
            sub = P @ A @ P
        ww = None if w is None else (w[idx] if compress else w)
        return DiscreteOperator(sparse=sub, in_weights=ww, out_weights=ww)
    A = Q.to_dense()
    if compress:
        sub = A[np.ix_(idx, idx)]
        ww = None if w is None else w[idx]
    else:
        sub = A * np.outer(mask, mask)
        ww = w
    return DiscreteOperator(sub, in_weights=ww, out_weights=ww)


_MAGIC = b"SGW1"


def save_sgw(path, op: DiscreteOperator | np.ndarray) -> None:
    """Write a matrix as magic ``SGW1``, uint64 rows and cols, then row-major
    little-endian complex64 (real, imag float32 pairs)."""
    m = op.to_dense() if isinstance(op, DiscreteOperator) else np.asarray(op)
    m = np.atleast_2d(m)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", *m.shape))
        fh.write(np.ascontiguousarray(m, dtype="<c8").tobytes())


def load_sgw(path) -> np.ndarray:
    """Read a matrix written by :func:`save_sgw`."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not an SGW1 container")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<c8")
    if data.size != rows * cols:
        raise ValueError("SGW1 payload size does not match the header")
    return data.reshape(rows, cols).astype(complex)


def synthesize_field(coeffs: np.ndarray, grid: ModeGrid, x_n: np.ndarray) -> np.ndarray:
    """Values on grid.x times x_n of a function given in mode/Laguerre coordinates."""
    c = np.asarray(coeffs).reshape(grid.n_modes, grid.K)
    out = np.zeros((grid.n_x, len(x_n)), complex)
    for mi, (m, s) in enumerate(zip(grid.modes, grid.sigma)):
        prof = c[mi] @ laguerre_table(grid.K, x_n, s)
        out += np.exp(1j * m * grid.x)[:, None] * prof[None, :] / np.sqrt(2 * np.pi)
    return out
