"""Dyadic Littlewood-Paley decomposition on a periodic 1D grid."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .opcalc import DiscreteOperator

__all__ = [
    "cutoff",
    "DyadicPartition",
    "SeparableSymbol",
    "dyadic_partition",
    "lp_block",
    "kernel_rows",
    "block_norm_table",
    "fit_wing_slopes",
    "besov_norm",
    "sobolev_norm",
    "write_table_csv",
]


def _smooth_step(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff(r) -> np.ndarray:
    """C-infinity cutoff: 1 on [0, 1/2], 0 on [1, inf), monotone in between."""
    r = np.abs(np.asarray(r, dtype=float))
    a = _smooth_step(1.0 - r)
    b = _smooth_step(r - 0.5)
    return a / (a + b)


@dataclass(frozen=True)
class DyadicPartition:
    """phi_0..phi_J sampled on a frequency grid; phi has shape (J + 1, n)."""

    xi: np.ndarray
    phi: np.ndarray

    @property
    def J(self) -> int:
        return self.phi.shape[0] - 1

    def band(self, j: int) -> np.ndarray:
        return self.phi[j]


def dyadic_partition(J: int, xi) -> DyadicPartition:
    """phi_0 = psi(|xi|/2), phi_j = psi(|xi|/2^(j+1)) - psi(|xi|/2^j).

    The sum telescopes to psi(|xi|/2^(J+1)), which is 1 for |xi| <= 2^J.
    Raises ValueError when the grid does not reach the top band or has no
    interior sample in some band.
    """
    xi = np.asarray(xi, dtype=float)
    if J < 0:
        raise ValueError("J must be nonnegative")
    r = np.abs(xi)
    if r.max() < 2.0**J:
        raise ValueError("frequency grid does not cover level J")
    phi = np.empty((J + 1, xi.size))
    phi[0] = cutoff(r / 2)
    for j in range(1, J + 1):
        phi[j] = cutoff(r / 2.0 ** (j + 1)) - cutoff(r / 2.0**j)
    if np.any(phi.max(axis=1) <= 0):
        raise ValueError("grid too coarse for level J")
    return DyadicPartition(xi, phi)


def _grid(n: int, length: float = 2 * np.pi):
    x = np.arange(n) * length / n
    xi = np.fft.fftfreq(n, length / n) * 2 * np.pi
    return x, xi


@dataclass(frozen=True)
class SeparableSymbol:
    """p(x, xi) = sum_r a_r(x) b_r(xi), with a_r sampled on the x grid and
    b_r callables (or arrays on the frequency grid)."""

    x_factors: tuple
    xi_factors: tuple

    def xi_values(self, xi) -> list[np.ndarray]:
        return [b(xi) if callable(b) else np.asarray(b) for b in self.xi_factors]

    def x_independent(self) -> bool:
        return all(np.allclose(a, np.asarray(a).ravel()[0]) for a in self.x_factors)


def lp_block(p: SeparableSymbol, j: int, partition: DyadicPartition, *,
             dense: bool = True) -> DiscreteOperator:
    """The operator p_j(x, D) with symbol p(x, xi) phi_j(xi) on the periodic grid.

    Realized as a dense matrix (x-multiplications of Fourier multipliers):
    column e_k is mapped by FFT, multiplication by b_r phi_j, inverse FFT and
    multiplication by a_r.
    """
    xi = partition.xi
    n = xi.size
    phij = partition.phi[j]
    mats = np.zeros((n, n), complex)
    eye_hat = np.fft.fft(np.eye(n), axis=0)
    for a, b in zip(p.x_factors, p.xi_values(xi)):
        mats += np.asarray(a)[:, None] * np.fft.ifft((b * phij)[:, None] * eye_hat, axis=0)
    return DiscreteOperator(mats, domain_basis="periodic grid", codomain_basis="periodic grid")


def kernel_rows(p: SeparableSymbol, j: int, partition: DyadicPartition,
                length: float = 2 * np.pi) -> tuple[np.ndarray, np.ndarray]:
    """Kernel k_j(x, z) = (1/2pi) sum_xi e^{i z xi} p(x, xi) phi_j(xi) dxi-weights.

    Returns (z, k) where k has shape (n_x, n_z) and z ranges over the
    periodic offsets in (-length/2, length/2].
    """
    xi = partition.xi
    n = xi.size
    dxi = 2 * np.pi / length
    phij = partition.phi[j]
    k = 0
    for a, b in zip(p.x_factors, p.xi_values(xi)):
        k = k + np.asarray(a)[:, None] * (np.fft.ifft(b * phij) * n * dxi / (2 * np.pi))[None, :]
    z = np.fft.fftfreq(n, 1.0 / n) * length / n
    return z, k


def _block_matrix(ahats, bs, phii, phij, sparse_limit: int):
    """Fourier-domain matrix of phi_i(D) p_j(x, D): entries
    phi_i(xi) sum_r ahat_r(xi - eta) b_r(eta) phi_j(eta) on the band supports."""
    n = phii.size
    R = np.flatnonzero(phii)
    C = np.flatnonzero(phij)
    pos = np.full(n, -1)
    pos[C] = np.arange(C.size)
    nnz = [np.flatnonzero(ah) for ah in ahats]
    if sum(v.size for v in nnz) <= sparse_limit:
        rows, cols, vals = [], [], []
        for ah, b, freqs in zip(ahats, bs, nnz):
            for nu in freqs:
                eta = (R - nu) % n
                ok = pos[eta] >= 0
                rows.append(np.flatnonzero(ok))
                cols.append(pos[eta[ok]])
                vals.append(ah[nu] * phii[R[ok]] * b[eta[ok]] * phij[eta[ok]])
        return sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(R.size, C.size)).tocsr()
    M = 0
    for ah, b in zip(ahats, bs):
        M = M + ah[(R[:, None] - C[None, :]) % n] * (b[C] * phij[C])[None, :]
    return phii[R][:, None] * M


def _norm2(M) -> float:
    if min(M.shape) == 0 or not (M.count_nonzero() if sp.issparse(M) else np.any(M)):
        return 0.0
    if min(M.shape) <= 256:
        dense = M.toarray() if sp.issparse(M) else M
        return float(np.linalg.svd(dense, compute_uv=False)[0])
    v0 = np.ones(min(M.shape))
    return float(spla.svds(M, k=1, return_singular_vectors=False, v0=v0, tol=1e-10)[0])


def block_norm_table(p: SeparableSymbol, i_range, j_range, partition: DyadicPartition, *,
                     rel_tol: float = 1e-15, sparse_limit: int = 256) -> np.ndarray:
    """Operator norms ||phi_i(D) p_j(x, D)|| on L2 of the periodic grid.

    Works in Fourier coordinates, where multiplication by a_r(x) is the
    convolution with its discrete Fourier coefficients (those below rel_tol
    times the largest are dropped).  Symbols whose x-factors have few
    Fourier modes give sparse blocks.
    """
    xi = partition.xi
    n = xi.size
    bs = [np.broadcast_to(np.asarray(b, dtype=complex), (n,)) for b in p.xi_values(xi)]
    ahats = []
    for a in p.x_factors:
        ah = np.fft.fft(np.broadcast_to(np.asarray(a, dtype=complex), (n,))) / n
        ah[np.abs(ah) < rel_tol * np.abs(ah).max()] = 0
        ahats.append(ah)
    table = np.zeros((len(i_range), len(j_range)))
    for ii, i in enumerate(i_range):
        for jj, j in enumerate(j_range):
            M = _block_matrix(ahats, bs, partition.phi[i], partition.phi[j], sparse_limit)
            table[ii, jj] = _norm2(M)
    return table


def fit_wing_slopes(table: np.ndarray, i_range, j_range, gap: int = 4,
                    floor: float = 1e-13) -> dict:
    """Least-squares log2-slopes of the two off-diagonal wings |i - j| >= gap.

    Lower wing (i >= j + gap): log2 norm against i.  Upper wing
    (j >= i + gap): log2 norm against j.  Entries below ``floor`` times the
    table maximum are ignored.
    """
    i_arr, j_arr = np.meshgrid(np.asarray(i_range), np.asarray(j_range), indexing="ij")
    vals = table
    good = vals > floor * vals.max()
    out = {}
    for name, mask, var in (("lower", i_arr - j_arr >= gap, i_arr),
                            ("upper", j_arr - i_arr >= gap, j_arr)):
        m = mask & good
        if m.sum() < 2:
            out[name] = np.nan
            continue
        X = np.c_[var[m], np.ones(m.sum())]
        coef, *_ = np.linalg.lstsq(X, np.log2(vals[m]), rcond=None)
        out[name] = float(coef[0])
    return out


def _l2(fh, n, length):
    return np.sqrt(np.sum(np.abs(fh) ** 2) * length / n**2)


def besov_norm(f, s: float, partition: DyadicPartition, length: float = 2 * np.pi) -> float:
    """(sum_j (2^(s j) ||phi_j(D) f||_L2)^2)^(1/2)."""
    fh = np.fft.fft(np.asarray(f))
    n = fh.size
    terms = [2.0 ** (s * j) * _l2(partition.phi[j] * fh, n, length)
             for j in range(partition.J + 1)]
    return float(np.sqrt(np.sum(np.square(terms))))


def sobolev_norm(f, s: float, length: float = 2 * np.pi) -> float:
    """||<D>^s f||_L2 on the periodic grid."""
    fh = np.fft.fft(np.asarray(f))
    n = fh.size
    _, xi = _grid(n, length)
    return float(_l2((1 + xi**2) ** (s / 2) * fh, n, length))


def write_table_csv(path, table, i_range, j_range) -> None:
    """CSV with columns i, j, norm, log2norm."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "norm", "log2norm"])
        for ii, i in enumerate(i_range):
            for jj, j in enumerate(j_range):
                v = float(table[ii, jj])
                w.writerow([int(i), int(j), repr(v), repr(float(np.log2(v))) if v > 0 else "-inf"])
