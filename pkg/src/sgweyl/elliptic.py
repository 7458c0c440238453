"""Finite-difference elliptic problems on the periodic strip T x (0, 1).

The discretization is derived from the sesquilinear form

    a(u, v) = sum_jk (a_jk d_k u, d_j v) + sum_j (a_j d_j u, v) + ((a_0 + shift) u, v)
              + (C gamma_0 u, gamma_0 v)_boundary

with trapezoidal weights on a uniform node grid: fluxes a_11 on x-edges,
a_22 on y-edges, cross terms on cell centres, lower-order terms at nodes.
Writing a(u, v) = hx hy v^H B u and W for the node weights (1/2 on the
boundary rows) the Robin-type realization is W^{-1} B, the Dirichlet
realization is the interior block of B, and ghost-node elimination of a
second-order centred boundary condition gives the same rows.  Because every
object below is built from the same B, the discrete Krein identity holds
exactly.
"""
from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .opcalc import DiscreteOperator
from .symbols import (EllipticityError, HolderField, InteriorSymbol2, mollify,
                      weierstrass)

__all__ = [
    "StripProblem",
    "Discretization",
    "KreinAssembly",
    "SeparableSpectra",
    "coefficient_family",
    "load_problem",
    "read_problem_file",
    "make_problem",
    "discretize",
    "dirichlet_resolvent",
    "poisson_operator",
    "conormal_trace",
    "dtn_operator",
    "robin_realization",
    "krein_assemble",
    "krein_identity_error",
    "dirichlet_sgo",
    "mollified_family",
    "separable_oracle",
    "rectangle_dirichlet_eigenvalues",
]

TWO_PI = 2 * np.pi
_NAMES = ("a11", "a12", "a21", "a22", "a1", "a2", "a0")


@dataclass(frozen=True)
class StripProblem:
    """A second-order problem on T x (0, 1) (or the unit square).

    ``coefficients`` are sampled on a periodic fine grid (periods (2 pi, 1) on
    the strip, (1, 1) on the square) whose shape is a multiple of
    (2 nx, 2 ny), so that nodes, edge midpoints and cell centres are grid
    points.  ``c1`` and ``c0`` define C = c1 D_x + c0 (D_x = -i d/dx) on both
    boundary lines; they are scalars, length-nx arrays or 1D HolderFields.
    """

    nx: int
    ny: int
    coefficients: InteriorSymbol2
    c1: float | np.ndarray | HolderField = 0.0
    c0: float | np.ndarray | HolderField = 0.0
    shift: float = 0.0
    domain: str = "strip"

    def __post_init__(self):
        if self.domain not in ("strip", "square"):
            raise ValueError("domain must be 'strip' or 'square'")
        mx, my = self.coefficients.shape
        if mx % (2 * self.nx) or my % (2 * self.ny):
            raise ValueError("coefficient grid must refine the half-node grid")

    @property
    def lx(self) -> float:
        return TWO_PI if self.domain == "strip" else 1.0

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    def sample(self, name: str, ix2, iy2) -> np.ndarray:
        """Coefficient ``name`` at half-index positions (x = ix2 hx / 2, y = iy2 hy / 2)."""
        s = getattr(self.coefficients, name).samples
        mx, my = s.shape
        qx, qy = mx // (2 * self.nx), my // (2 * self.ny)
        return s[(np.asarray(ix2) * qx) % mx, (np.asarray(iy2) * qy) % my]

    def boundary_values(self, which: str) -> np.ndarray:
        """c1 or c0 at the boundary nodes, shape (2, nx) for (bottom, top)."""
        c = getattr(self, which)
        if isinstance(c, HolderField):
            s = c.samples
            if s.size % self.nx:
                raise ValueError("boundary field must refine the node grid")
            c = s[:: s.size // self.nx]
        return np.broadcast_to(np.asarray(c, dtype=complex), (2, self.nx)).copy()

    @property
    def x_independent(self) -> bool:
        fields = [getattr(self.coefficients, n).samples for n in _NAMES]
        ok = all(np.allclose(f, f[:1], rtol=0, atol=1e-14) for f in fields)
        return ok and all(np.allclose(self.boundary_values(c), self.boundary_values(c)[:, :1])
                          for c in ("c1", "c0"))

    @property
    def selfadjoint(self) -> bool:
        c = self.coefficients
        return (np.allclose(c.a12.samples, np.conj(c.a21.samples))
                and all(np.isrealobj(getattr(c, n).samples) or
                        np.allclose(getattr(c, n).samples.imag, 0) for n in ("a11", "a22", "a0"))
                and np.allclose(c.a1.samples, 0) and np.allclose(c.a2.samples, 0)
                and np.allclose(self.boundary_values("c1").imag, 0)
                and np.allclose(self.boundary_values("c0").imag, 0))

    def with_coefficients(self, coefficients: InteriorSymbol2) -> "StripProblem":
        return replace(self, coefficients=coefficients)


def coefficient_family(nx: int, ny: int, family: str = "constant", *, tau: float = 0.5,
                       amplitude: float = 0.3, anisotropy: float = 0.0, a0: float = 0.0,
                       refine: int = 2, domain: str = "strip") -> InteriorSymbol2:
    """Coefficient fields for the standard problem families.

    ``constant``: a11 = a22 = 1, a12 = a21 = anisotropy.
    ``trig``: a11 = a22 = 1 + amplitude cos(x) cos(2 pi y) / 2 (smooth).
    ``weierstrass``: a11 = a22 = 1 + amplitude (W(x) + W(2 pi y + 1)) / (2 W(0))
    with W the truncated Weierstrass function of exponent tau.
    """
    lx = TWO_PI if domain == "strip" else 1.0
    shape = (2 * nx * refine, 2 * ny * refine)
    period = (lx, 1.0)
    x = np.arange(shape[0]) * lx / shape[0]
    y = np.arange(shape[1]) / shape[1]
    X, Y = np.meshgrid(x, y, indexing="ij")
    if family == "constant":
        diag = np.ones(shape)
        tau_f = 1.0
    elif family == "trig":
        diag = 1 + 0.5 * amplitude * np.cos(TWO_PI * X / lx) * np.cos(TWO_PI * Y)
        tau_f = 1.0
    elif family == "weierstrass":
        w0 = float(weierstrass(0.0, tau))
        wx = weierstrass(TWO_PI * X / lx, tau)
        wy = weierstrass(TWO_PI * Y + 1.0, tau)
        diag = 1 + amplitude * (wx + wy) / (2 * w0)
        tau_f = tau
    else:
        raise ValueError(f"unknown coefficient family {family!r}")
    if np.min(diag) <= abs(anisotropy):
        raise EllipticityError("coefficient family is not uniformly elliptic")

    def hf(v):
        return HolderField(np.asarray(v, dtype=float) * np.ones(shape), tau_f, None, period)

    return InteriorSymbol2(a11=hf(diag), a12=hf(anisotropy), a21=hf(anisotropy), a22=hf(diag),
                           a1=hf(0.0), a2=hf(0.0), a0=hf(a0))


def read_problem_file(path) -> dict:
    """Keyword arguments of :func:`make_problem` stored in a problem file.

    Sections and keys (all optional)::

        [grid]         nx, ny, refine, domain
        [coefficients] family = constant | trig | weierstrass
                       tau, amplitude, anisotropy, a0, shift
        [boundary]     c1, c0
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    kinds = {"grid": {"nx": int, "ny": int, "refine": int, "domain": str},
             "coefficients": {"family": str, "tau": float, "amplitude": float,
                              "anisotropy": float, "a0": float, "shift": float},
             "boundary": {"c1": float, "c0": float}}
    out = {}
    for section in cp.sections():
        if section not in kinds:
            raise ValueError(f"unknown section [{section}] in {path}")
        for key, value in cp[section].items():
            if key not in kinds[section]:
                raise ValueError(f"unknown key {key!r} in section [{section}] of {path}")
            out[key] = kinds[section][key](value)
    return out


def load_problem(path, **overrides) -> StripProblem:
    """Build the problem described by a problem file (see :func:`read_problem_file`)."""
    vals = dict(nx=64, ny=32)
    vals.update(read_problem_file(path))
    vals.update(overrides)
    return make_problem(**vals)


def make_problem(nx: int, ny: int, family: str = "constant", *, shift: float = 1.0,
                 c1: float = 0.0, c0: float = 0.0, refine: int = 2, domain: str = "strip",
                 **family_args) -> StripProblem:
    """StripProblem from a named coefficient family."""
    coeffs = coefficient_family(nx, ny, family, refine=refine, domain=domain, **family_args)
    return StripProblem(nx, ny, coeffs, c1=c1, c0=c0, shift=shift, domain=domain)


# ---------------------------------------------------------------------------
# assembly

def _grid_form(nxn: int, nyn: int, hx: float, hy: float, xper: bool, yper: bool,
               sample, shift: float):
    """Scaled form matrix B (a(u, v) = hx hy v^H B u) without boundary terms.

    ``sample(name, ix2, iy2)`` returns coefficients at half-index positions.
    Node (i, j) has flat index j * nxn + i.
    """
    def idx(i, j):
        return j * nxn + i

    wx = np.ones(nxn)
    wy = np.ones(nyn)
    if not xper:
        wx[[0, -1]] = 0.5
    if not yper:
        wy[[0, -1]] = 0.5
    n = nxn * nyn
    I, J = np.meshgrid(np.arange(nxn), np.arange(nyn), indexing="xy")  # J rows, I cols
    I, J = I.ravel(), J.ravel()
    node_w = wx[I] * wy[J]
    mats = []

    # x-edges
    ex_i = np.arange(nxn if xper else nxn - 1)
    EI, EJ = np.meshgrid(ex_i, np.arange(nyn), indexing="xy")
    EI, EJ = EI.ravel(), EJ.ravel()
    EI1 = (EI + 1) % nxn
    ne = EI.size
    Dx = sp.coo_array((np.r_[np.full(ne, 1 / hx), np.full(ne, -1 / hx)],
                       (np.r_[np.arange(ne), np.arange(ne)], np.r_[idx(EI1, EJ), idx(EI, EJ)])),
                      shape=(ne, n)).tocsr()
    a11 = sample("a11", 2 * EI + 1, 2 * EJ) * wy[EJ]
    mats.append(Dx.T @ sp.diags_array(a11) @ Dx)

    # y-edges
    ey_j = np.arange(nyn if yper else nyn - 1)
    FI, FJ = np.meshgrid(np.arange(nxn), ey_j, indexing="xy")
    FI, FJ = FI.ravel(), FJ.ravel()
    FJ1 = (FJ + 1) % nyn
    nf = FI.size
    Dy = sp.coo_array((np.r_[np.full(nf, 1 / hy), np.full(nf, -1 / hy)],
                       (np.r_[np.arange(nf), np.arange(nf)], np.r_[idx(FI, FJ1), idx(FI, FJ)])),
                      shape=(nf, n)).tocsr()
    a22 = sample("a22", 2 * FI, 2 * FJ + 1) * wx[FI]
    mats.append(Dy.T @ sp.diags_array(a22) @ Dy)

    # cell centres: cross terms
    CI, CJ = np.meshgrid(ex_i, ey_j, indexing="xy")
    CI, CJ = CI.ravel(), CJ.ravel()
    a12 = sample("a12", 2 * CI + 1, 2 * CJ + 1)
    a21 = sample("a21", 2 * CI + 1, 2 * CJ + 1)
    if np.any(a12 != 0) or np.any(a21 != 0):
        CI1, CJ1 = (CI + 1) % nxn, (CJ + 1) % nyn
        nc = CI.size
        r = np.tile(np.arange(nc), 4)
        cols = np.r_[idx(CI1, CJ), idx(CI, CJ), idx(CI1, CJ1), idx(CI, CJ1)]
        Dcx = sp.coo_array((np.r_[np.full(nc, 1.0), np.full(nc, -1.0), np.full(nc, 1.0),
                                  np.full(nc, -1.0)] / (2 * hx), (r, cols)), shape=(nc, n)).tocsr()
        cols_y = np.r_[idx(CI, CJ1), idx(CI, CJ), idx(CI1, CJ1), idx(CI1, CJ)]
        Dcy = sp.coo_array((np.r_[np.full(nc, 1.0), np.full(nc, -1.0), np.full(nc, 1.0),
                                  np.full(nc, -1.0)] / (2 * hy), (r, cols_y)),
                           shape=(nc, n)).tocsr()
        mats.append(Dcx.T @ sp.diags_array(a12) @ Dcy + Dcy.T @ sp.diags_array(a21) @ Dcx)

    # first-order terms at nodes
    a1 = sample("a1", 2 * I, 2 * J)
    a2 = sample("a2", 2 * I, 2 * J)
    if np.any(a1 != 0):
        mats.append(sp.diags_array(node_w * a1) @ _central(nxn, nyn, hx, xper, axis=0))
    if np.any(a2 != 0):
        mats.append(sp.diags_array(node_w * a2) @ _central(nxn, nyn, hy, yper, axis=1))

    a0 = sample("a0", 2 * I, 2 * J) + shift
    mats.append(sp.diags_array(node_w * a0))
    B = mats[0]
    for m in mats[1:]:
        B = B + m
    return sp.csr_array(B), node_w


def _central(nxn, nyn, h, periodic, axis):
    """Central first difference along an axis; one-sided at non-periodic ends."""
    m = nxn if axis == 0 else nyn
    if periodic:
        d = sp.diags_array([np.full(m - 1, 0.5), np.full(m - 1, -0.5)], offsets=[1, -1],
                           shape=(m, m)).tolil()
        d[0, m - 1] = -0.5
        d[m - 1, 0] = 0.5
    else:
        d = sp.diags_array([np.full(m - 1, 0.5), np.full(m - 1, -0.5)], offsets=[1, -1],
                           shape=(m, m)).tolil()
        d[0, :2] = [-1.0, 1.0]
        d[m - 1, m - 2:] = [-1.0, 1.0]
    d = sp.csr_array(d) / h
    other = sp.identity(nyn if axis == 0 else nxn, format="csr")
    return sp.kron(other, d, format="csr") if axis == 0 else sp.kron(d, other, format="csr")


def _periodic_central(n, h):
    d = np.zeros((n, n))
    i = np.arange(n)
    d[i, (i + 1) % n] += 0.5 / h
    d[i, (i - 1) % n] -= 0.5 / h
    return d


@dataclass
class Discretization:
    """Assembled form matrices of a StripProblem.

    ``B0`` is the scaled form without boundary term, ``B`` includes C, and
    ``A`` = W^{-1} B is the Robin-type operator on nodal values.  Node
    weights for the L2 inner product are ``hx * hy * weights``; boundary
    nodes carry weight ``hx`` in L2 of the boundary.
    """

    problem: StripProblem
    B0: sp.csr_array
    B: sp.csr_array
    C: np.ndarray
    weights: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray

    @property
    def A(self) -> sp.csr_array:
        return sp.csr_array(sp.diags_array(1.0 / self.weights) @ self.B)

    @property
    def hx(self) -> float:
        return self.problem.hx

    @property
    def hy(self) -> float:
        return self.problem.hy

    @property
    def l2_weights(self) -> np.ndarray:
        return self.hx * self.hy * self.weights

    @cached_property
    def B_II(self) -> sp.csc_array:
        return sp.csc_array(self.B[self.interior][:, self.interior])

    @cached_property
    def lu_interior(self):
        return spla.splu(self.B_II)

    @cached_property
    def lu_full(self):
        return spla.splu(sp.csc_array(self.B))

    @property
    def real(self) -> bool:
        return not (np.iscomplexobj(self.B.data) and np.any(self.B.data.imag != 0))


def discretize(problem: StripProblem) -> Discretization:
    """Assemble the discrete operator and its boundary index sets.

    Parameters
    ----------
    problem : StripProblem
        Coefficients, grid and boundary operator.

    Returns
    -------
    Discretization
        Node ordering is row-major in y: on the strip the first ``nx`` nodes
        are the lower boundary line and the last ``nx`` the upper one.
    """
    problem.coefficients.check_ellipticity()
    p = problem
    if p.domain == "strip":
        nxn, nyn, xper = p.nx, p.ny + 1, True
    else:
        nxn, nyn, xper = p.nx + 1, p.ny + 1, False
    B0, w = _grid_form(nxn, nyn, p.hx, p.hy, xper, False, p.sample, p.shift)
    n = nxn * nyn
    J, I = np.divmod(np.arange(n), nxn)
    if p.domain == "strip":
        bnd = np.r_[np.arange(p.nx), np.arange(n - p.nx, n)]
        c1, c0 = p.boundary_values("c1"), p.boundary_values("c0")
        D = _periodic_central(p.nx, p.hx)
        C = sla.block_diag(*[np.diag(c1[e]) @ (-1j * D) + np.diag(c0[e]) for e in range(2)])
        if not np.any(C.imag):
            C = C.real
        nz = np.flatnonzero(C)
        rows, cols = np.repeat(bnd, 2 * p.nx)[nz], np.tile(bnd, 2 * p.nx)[nz]
        B = B0 + sp.coo_array(((C / p.hy).ravel()[nz], (rows, cols)), shape=(n, n))
    else:
        bnd = np.flatnonzero((I == 0) | (I == nxn - 1) | (J == 0) | (J == nyn - 1))
        C = np.zeros((0, 0))
        B = B0
    interior = np.setdiff1d(np.arange(n), bnd)
    return Discretization(p, sp.csr_array(B0), sp.csr_array(B), C, w, interior, bnd)


def _as_disc(obj) -> Discretization:
    return obj if isinstance(obj, Discretization) else discretize(obj)


def dirichlet_resolvent(A_h, *, dense: bool | None = None) -> DiscreteOperator:
    """Inverse of the Dirichlet realization on the interior nodes.

    Dense for small grids (or ``dense=True``); otherwise a factored-solve
    operator whose ``matvec`` applies the sparse LU factorization.
    """
    d = _as_disc(A_h)
    n = d.interior.size
    w = np.full(n, d.hx * d.hy)
    try:
        lu = d.lu_interior
    except RuntimeError as exc:  # singular factor
        raise np.linalg.LinAlgError("Dirichlet realization is singular; increase the shift") from exc
    if dense or (dense is None and n <= 4096):
        return DiscreteOperator(lu.solve(np.eye(n, dtype=d.B_II.dtype)), in_weights=w,
                                out_weights=w, domain_basis="interior nodes",
                                codomain_basis="interior nodes")
    return SolveOperator(lu, n, w, "interior nodes")


class SolveOperator(DiscreteOperator):
    """Inverse of a sparse matrix, applied through its LU factorization."""

    def __init__(self, lu, n: int, weights, basis: str):
        self.lu = lu
        self._n = n
        super().__init__(sparse=sp.csr_array((n, n)), in_weights=weights, out_weights=weights,
                         domain_basis=basis, codomain_basis=basis)
        self.sparse = None

    @property
    def form(self) -> str:
        return "solve"

    @property
    def shape(self):
        return (self._n, self._n)

    def matvec(self, v):
        return self.lu.solve(np.asarray(v))

    def to_dense(self):
        return self.lu.solve(np.eye(self._n))


def poisson_operator(A_h, *, adjoint: bool = False) -> DiscreteOperator:
    """Discrete Poisson operator: boundary values -> A-harmonic extension.

    Returns the dense (nodes x boundary nodes) matrix [phi; -B_II^{-1} B_IB phi]
    in the node ordering.  ``adjoint=True`` uses the adjoint problem (form
    matrix B^H).
    """
    d = _as_disc(A_h)
    B_IB = d.B0[d.interior][:, d.boundary].toarray()
    n, nb = d.B.shape[0], d.boundary.size
    if adjoint:
        rhs = d.B0[d.boundary][:, d.interior].toarray().conj().T
        sol = d.lu_interior.solve(rhs, trans="H")
    else:
        sol = d.lu_interior.solve(B_IB)
    K = np.zeros((n, nb), dtype=np.result_type(sol, float))
    K[d.interior] = -sol
    K[d.boundary, np.arange(nb)] = 1.0
    return DiscreteOperator(K, in_weights=np.full(nb, d.hx), out_weights=d.l2_weights,
                            domain_basis="boundary nodes", codomain_basis="nodes")


def conormal_trace(A_h, u, method: str = "one_sided") -> np.ndarray:
    """Conormal derivative sum_k n_k a_kj d_j u with the interior normal.

    ``one_sided``: second-order one-sided differences in y and centred
    differences in x.  ``flux``: the discrete flux -hy (B0 u) on boundary rows,
    which is the conormal paired with the scheme by Green's formula (exact on
    discrete A-harmonic functions, where it equals the one-sided value up to
    O(h^2)).
    """
    d = _as_disc(A_h)
    p = d.problem
    if p.domain != "strip":
        raise ValueError("conormal trace is implemented for the strip")
    u = np.asarray(u)
    nx, ny, hx, hy = p.nx, p.ny, p.hx, p.hy
    if method == "flux":
        return -hy * (d.B0 @ u)[d.boundary]
    if method != "one_sided":
        raise ValueError("method must be 'one_sided' or 'flux'")
    U = u.reshape(ny + 1, nx)
    i = np.arange(nx)
    ux = (np.roll(U, -1, axis=1) - np.roll(U, 1, axis=1)) / (2 * hx)
    dy_bot = (-3 * U[0] + 4 * U[1] - U[2]) / (2 * hy)
    dy_top = (3 * U[-1] - 4 * U[-2] + U[-3]) / (2 * hy)
    a21b, a22b = p.sample("a21", 2 * i, 0), p.sample("a22", 2 * i, 0)
    a21t, a22t = p.sample("a21", 2 * i, 2 * ny), p.sample("a22", 2 * i, 2 * ny)
    bottom = a21b * ux[0] + a22b * dy_bot
    top = -(a21t * ux[-1] + a22t * dy_top)
    return np.r_[bottom, top]


def dtn_operator(A_h) -> np.ndarray:
    """Dirichlet-to-Neumann matrix P = chi K_gamma (flux conormal), boundary x boundary."""
    d = _as_disc(A_h)
    K = poisson_operator(d).matrix
    return conormal_trace(d, K, method="flux")


def robin_realization(problem, *, check: bool = True) -> sp.csr_array:
    """Realization of chi u = C gamma_0 u: the operator W^{-1} B on all nodes.

    Equivalent to eliminating ghost nodes from the centred boundary
    condition.  A coercivity probe (smallest real part of the Rayleigh
    quotient over a few smooth probes and the lowest Dirichlet-free modes)
    emits a warning when it fails.
    """
    d = _as_disc(problem)
    if d.problem.domain != "strip":
        raise ValueError("Robin realization is defined on the strip")
    if check:
        rng = np.random.default_rng(0)
        X = rng.standard_normal((d.B.shape[0], 8))
        X[:, 0] = 1.0
        q = np.einsum("ij,ij->j", X.conj(), d.B @ X).real
        if np.any(q <= 0):
            warnings.warn("coercivity probe failed for the Robin form", RuntimeWarning,
                          stacklevel=2)
    return d.A


@dataclass
class KreinAssembly:
    """Factors of the resolvent difference of Robin-type and Dirichlet problems."""

    disc: Discretization
    K_gamma: DiscreteOperator
    K_gamma_prime: DiscreteOperator
    L: np.ndarray
    P: np.ndarray
    C: np.ndarray
    G_C: DiscreteOperator = field(repr=False, default=None)


def krein_assemble(problem) -> KreinAssembly:
    """Assemble L = C - P, the Poisson operators and G_C = K L^{-1} K'*.

    With the scaled form matrix B, the Schur complement identity gives

        (W^{-1} B)^{-1} - pad(B_II^{-1}) = K (hy S)^{-1} K'*,
        S = B_BB - B_BI B_II^{-1} B_IB,

    and hy S = C - P with P the flux Dirichlet-to-Neumann matrix, so the
    discrete Krein formula holds exactly.
    """
    d = _as_disc(problem)
    K = poisson_operator(d)
    symmetric = d.real and (abs(d.B - d.B.T)).max() < 1e-13 * abs(d.B).max()
    Kp = K if symmetric else poisson_operator(d, adjoint=True)
    P = conormal_trace(d, K.matrix, method="flux")
    L = d.C - P
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError("L = C - P is singular: boundary condition not elliptic")
    Linv = np.linalg.inv(L)
    right = d.hy * (Kp.matrix.conj().T * d.weights)
    G = DiscreteOperator(left=K.matrix, core=Linv, right=right, in_weights=d.l2_weights,
                         out_weights=d.l2_weights, domain_basis="nodes", codomain_basis="nodes")
    return KreinAssembly(d, K, Kp, L, P, d.C, G)


def krein_identity_error(assembly: KreinAssembly, *, probes: int | None = 32,
                         seed: int = 0) -> float:
    """Relative Frobenius error of A_C^{-1} - A_gamma^{-1} = G_C.

    With ``probes=None`` both sides are formed densely; otherwise the norms
    are estimated on a block of Gaussian probe vectors (an unbiased
    Frobenius estimator), which keeps memory at O(nodes x probes).
    """
    d = assembly.disc
    n = d.B.shape[0]
    if probes is None:
        X = np.eye(n)
    else:
        X = np.random.default_rng(seed).standard_normal((n, probes))
    lhs = d.lu_full.solve((d.weights[:, None] * X).astype(d.lu_full.U.dtype))
    lhs[d.interior] -= d.lu_interior.solve(X[d.interior].astype(d.lu_interior.U.dtype))
    lhs[d.boundary] -= 0.0
    rhs = assembly.G_C.matvec(X)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


def _torus_problem(problem: StripProblem):
    """Even reflection y -> 2 - y of all coefficients, periodized with period 2."""
    p = problem
    nyt = 2 * p.ny

    def sample(name, ix2, iy2):
        iy2 = np.asarray(iy2) % (2 * nyt)
        refl = np.where(iy2 <= 2 * p.ny, iy2, 2 * nyt - iy2)
        return p.sample(name, ix2, refl)

    return nyt, sample


@dataclass
class DirichletSGO:
    """Singular Green part of the Dirichlet resolvent: A_gamma^{-1} - Q_+."""

    factored: DiscreteOperator
    difference: DiscreteOperator | None
    torus_shift: float
    mismatch: float | None


def dirichlet_sgo(problem, torus_shift: float | None = None, *,
                  difference: bool | None = None) -> DirichletSGO:
    """G_gamma = A_gamma^{-1} - Q_+ with Q the inverse of a torus extension.

    The torus operator uses the evenly reflected coefficients on
    T x (R / 2Z) plus ``torus_shift`` (default: the problem's own shift).
    Interior stencils of the torus and Dirichlet problems coincide, hence
    G_gamma = -K_gamma gamma_0 Q_+ exactly; this factored form is always
    returned, and for small grids (or ``difference=True``) the dense
    difference is formed as well and the two are compared.
    """
    d = _as_disc(problem)
    p = d.problem
    if p.domain != "strip":
        raise ValueError("torus extension is defined for the strip")
    shift = p.shift if torus_shift is None else torus_shift
    nyt, sample = _torus_problem(p)
    Bt, _ = _grid_form(p.nx, nyt, p.hx, p.hy, True, True, sample, shift)
    probe = np.ones(Bt.shape[0])
    if shift <= 0 or np.real(probe @ (Bt @ probe)) <= 0:
        raise EllipticityError("torus extension is not positive; increase the shift")
    lu_t = spla.splu(sp.csc_array(Bt))
    nx, ny = p.nx, p.ny
    interior_t = np.arange(nx, ny * nx)            # rows j = 1..ny-1 on the torus
    boundary_t = np.r_[np.arange(nx), np.arange(ny * nx, (ny + 1) * nx)]
    # rows of Q at the boundary nodes: solve with the adjoint on unit vectors
    E = np.zeros((Bt.shape[0], boundary_t.size))
    E[boundary_t, np.arange(boundary_t.size)] = 1.0
    rowsQ = lu_t.solve(E, trans="H").conj().T       # (boundary, torus nodes)
    gQ = rowsQ[:, interior_t]
    K = poisson_operator(d).matrix[d.interior]
    w = np.full(d.interior.size, d.hx * d.hy)
    fact = DiscreteOperator(left=-K, core=np.eye(K.shape[1]), right=gQ, in_weights=w,
                            out_weights=w, domain_basis="interior nodes",
                            codomain_basis="interior nodes")
    diff = None
    mismatch = None
    if difference or (difference is None and d.interior.size <= 4096):
        Rd = dirichlet_resolvent(d, dense=True).matrix
        n_t = Bt.shape[0]
        Et = np.zeros((n_t, d.interior.size))
        Et[interior_t, np.arange(d.interior.size)] = 1.0
        Qp = lu_t.solve(Et)[interior_t]
        diff = DiscreteOperator(Rd - Qp, in_weights=w, out_weights=w,
                                domain_basis="interior nodes", codomain_basis="interior nodes")
        mismatch = float(np.linalg.norm(diff.matrix - fact.to_dense()) / np.linalg.norm(diff.matrix))
    return DirichletSGO(fact, diff, shift, mismatch)


def _mollify_problem(problem: StripProblem, k: float) -> StripProblem:
    co = problem.coefficients.map(lambda f: mollify(f, k))
    return problem.with_coefficients(co)


def _spectral_norm(apply, apply_h, shape, seed=0) -> float:
    op = spla.LinearOperator(shape, matvec=apply, rmatvec=apply_h, dtype=float)
    probe = np.random.default_rng(seed).standard_normal((shape[1], 4))
    if not np.any(np.column_stack([apply(p) for p in probe.T])):
        return 0.0  # ARPACK cannot start from the zero operator
    v0 = np.random.default_rng(seed).standard_normal(min(shape))
    s = spla.svds(op, k=1, return_singular_vectors=False, v0=v0, tol=1e-6)
    return float(s[0])


def mollified_family(problem: StripProblem, k_list=(4, 8, 16, 32)):
    """Replace every coefficient by rho_k * a and report convergence.

    Returns ``(problems, report)`` where ``report`` has one row per k with
    the discrete norms ||A - A_k||_{H^2 -> L2} (graph norm of the Dirichlet
    Laplacian with the same shift), ||A_gamma^{-1} - A_gamma,k^{-1}|| and
    ||K_gamma - K_gamma,k|| (L2 of the boundary -> L2 of the strip), plus
    the sup-norm coefficient difference.
    """
    d0 = discretize(problem)
    lap = make_problem(problem.nx, problem.ny, "constant", shift=max(problem.shift, 1.0),
                       refine=1, domain=problem.domain)
    dl = discretize(lap)
    K0 = poisson_operator(d0).matrix
    sw = np.sqrt(d0.l2_weights)[:, None]
    sb = 1 / np.sqrt(d0.hx)
    n = d0.interior.size
    problems, report = [], []
    for k in k_list:
        pk = _mollify_problem(problem, k)
        dk = discretize(pk)
        dA = (d0.B_II - dk.B_II).tocsr()
        a_norm = _spectral_norm(lambda v: dA @ dl.lu_interior.solve(v),
                                lambda v: dl.lu_interior.solve(dA.T @ v, trans="T"), (n, n))
        r_norm = _spectral_norm(lambda v: d0.lu_interior.solve(v) - dk.lu_interior.solve(v),
                                lambda v: d0.lu_interior.solve(v, trans="T")
                                - dk.lu_interior.solve(v, trans="T"), (n, n))
        Kk = poisson_operator(dk).matrix
        Dk = (sw * (K0 - Kk)) * sb
        q = np.linalg.qr(Dk, mode="r")
        k_norm = float(np.linalg.svd(q, compute_uv=False)[0])
        coef = max(float(np.max(np.abs(getattr(problem.coefficients, nm).samples
                                       - getattr(pk.coefficients, nm).samples)))
                   for nm in _NAMES)
        problems.append(pk)
        report.append({"k": k, "operator": a_norm, "resolvent": r_norm, "poisson": k_norm,
                       "coefficients": coef})
    return problems, report


# ---------------------------------------------------------------------------
# separable oracle

@dataclass
class SeparableSpectra:
    """Per-mode spectral data; ``union(name)`` merges all modes."""

    modes: np.ndarray
    data: dict

    def union(self, name: str) -> np.ndarray:
        parts = [np.asarray(v) for v in self.data.get(name, [])]
        if not parts:
            return np.zeros(0)
        vals = np.concatenate(parts)
        if np.iscomplexobj(vals):
            return vals[np.argsort(-np.abs(vals), kind="stable")]
        return np.sort(vals)[::-1]


def _mode_form(problem: StripProblem, m: int, torus: bool = False) -> np.ndarray:
    """Scaled form matrix of the single tangential mode e^{i m x}, built from
    the 1D stencils and the discrete symbols of the x-differences."""
    p = problem
    hx, hy = p.hx, p.hy
    zeta = np.exp(1j * m * hx)
    if torus:
        nyt, sample_t = _torus_problem(p)
        n = nyt

        def s(name, iy2):
            return sample_t(name, 0, iy2)
        w = np.ones(n)
        edges = np.arange(n)
    else:
        n = p.ny + 1

        def s(name, iy2):
            return p.sample(name, 0, iy2)
        w = np.ones(n)
        w[[0, -1]] = 0.5
        edges = np.arange(n - 1)
    j = np.arange(n)
    B = np.zeros((n, n), complex)
    B[j, j] += w * s("a11", 2 * j) * abs(zeta - 1) ** 2 / hx**2
    for e in edges:
        j0, j1 = e, (e + 1) % n
        a = s("a22", 2 * e + 1) / hy**2
        B[j0, j0] += a
        B[j1, j1] += a
        B[j0, j1] -= a
        B[j1, j0] -= a
        a12, a21 = s("a12", 2 * e + 1), s("a21", 2 * e + 1)
        if a12 != 0 or a21 != 0:
            rx = (zeta - 1) / (2 * hx) * np.array([1.0, 1.0])
            ry = (1 + zeta) / (2 * hy) * np.array([-1.0, 1.0])
            blk = a12 * np.outer(rx.conj(), ry) + a21 * np.outer(ry.conj(), rx)
            ix = np.array([j0, j1])
            B[np.ix_(ix, ix)] += blk
    a1 = s("a1", 2 * j)
    B[j, j] += w * a1 * 1j * np.sin(m * hx) / hx
    a2 = s("a2", 2 * j)
    if np.any(a2 != 0):
        G = np.zeros((n, n))
        for jj in range(n):
            if torus or 0 < jj < n - 1:
                G[jj, (jj + 1) % n] += 0.5 / hy
                G[jj, (jj - 1) % n] -= 0.5 / hy
            elif jj == 0:
                G[0, :2] = [-1 / hy, 1 / hy]
            else:
                G[jj, jj - 1:] = [-1 / hy, 1 / hy]
        B += np.diag(w * a2) @ G
    B[j, j] += w * (s("a0", 2 * j) + p.shift)
    return B


def separable_oracle(problem: StripProblem, modes=None,
                     quantities=("dirichlet", "robin", "dtn", "krein", "poisson"),
                     torus_shift: float | None = None) -> SeparableSpectra:
    """Spectral data of x'-independent strip problems, one tangential mode at a time.

    For each mode m the 1D form matrix is built directly from the discrete
    symbols of the x-stencils.  Quantities: ``dirichlet`` and ``robin``
    eigenvalues of the realizations, ``dtn`` eigenvalues of the 2 x 2 DtN
    block, ``krein`` and ``poisson`` singular values of G_C and K_gamma,
    ``dirichlet_sgo`` singular values of G_gamma.  Unions over modes match
    the assembled 2D objects.
    """
    p = problem
    if p.domain != "strip":
        raise ValueError("the separable oracle is defined for the strip")
    if not p.x_independent:
        raise ValueError("coefficients depend on x; the problem is not separable")
    modes = np.fft.fftfreq(p.nx, 1.0 / p.nx).astype(int) if modes is None else np.asarray(modes)
    c1 = complex(p.boundary_values("c1")[0, 0])
    c0 = complex(p.boundary_values("c0")[0, 0])
    hy = p.hy
    data = {q: [] for q in quantities}
    for m in modes:
        B0 = _mode_form(p, int(m))
        n = B0.shape[0]
        w = np.ones(n)
        w[[0, -1]] = 0.5
        cm = c1 * np.sin(m * p.hx) / p.hx + c0
        C = np.diag([cm, cm])
        B = B0.copy()
        B[0, 0] += cm / hy
        B[-1, -1] += cm / hy
        I, Bd = slice(1, n - 1), [0, n - 1]
        BII = B[I, I]
        if "dirichlet" in quantities:
            ev = np.linalg.eigvals(BII)
            data["dirichlet"].append(np.sort_complex(ev).real if np.allclose(ev.imag, 0) else ev)
        if "robin" in quantities:
            ev = np.linalg.eigvals(B / w[:, None])
            data["robin"].append(np.sort_complex(ev).real if np.allclose(ev.imag, 0) else ev)
        need_k = {"dtn", "krein", "poisson", "dirichlet_sgo"} & set(quantities)
        if need_k:
            Kin = -np.linalg.solve(BII, B0[I][:, Bd])
            K = np.zeros((n, 2), complex)
            K[I] = Kin
            K[0, 0] = K[-1, 1] = 1.0
            P = -hy * (B0 @ K)[Bd]
            if "dtn" in quantities:
                data["dtn"].append(np.linalg.eigvals(P))
            if "poisson" in quantities:
                data["poisson"].append(np.linalg.svd(np.sqrt(hy * w)[:, None] * K,
                                                     compute_uv=False))
            if "krein" in quantities:
                Kp = np.zeros((n, 2), complex)
                Kp[I] = -np.linalg.solve(BII.conj().T, B0[Bd][:, I].conj().T)
                Kp[0, 0] = Kp[-1, 1] = 1.0
                L = C - P
                left = np.sqrt(hy * w)[:, None] * K
                right = hy * (Kp.conj().T * w) / np.sqrt(hy * w)
                rl = np.linalg.qr(left, mode="r")
                rr = np.linalg.qr(right.conj().T, mode="r")
                data["krein"].append(np.linalg.svd(rl @ np.linalg.solve(L, rr.conj().T),
                                                   compute_uv=False))
            if "dirichlet_sgo" in quantities:
                shift = p.shift if torus_shift is None else torus_shift
                Bt = _mode_form(replace(p, shift=shift), int(m), torus=True)
                ny = p.ny
                E = np.zeros((Bt.shape[0], 2))
                E[0, 0] = E[ny, 1] = 1.0
                rowsQ = np.linalg.solve(Bt.conj().T, E).conj().T[:, 1:ny]
                left = np.sqrt(hy) * Kin
                right = rowsQ / np.sqrt(hy)
                rl = np.linalg.qr(left, mode="r")
                rr = np.linalg.qr(right.conj().T, mode="r")
                data["dirichlet_sgo"].append(np.linalg.svd(rl @ rr.conj().T, compute_uv=False))
    return SeparableSpectra(np.asarray(modes), data)


def rectangle_dirichlet_eigenvalues(n: int, shift: float = 0.0) -> np.ndarray:
    """Eigenvalues of the 5-point Dirichlet Laplacian on the unit square
    with n intervals per side, from the 1D tridiagonal spectra (ascending)."""
    h = 1.0 / n
    d = np.full(n - 1, 2 / h**2)
    e = np.full(n - 2, -1 / h**2)
    lam = sla.eigh_tridiagonal(d, e, eigvals_only=True)
    return np.sort((lam[:, None] + lam[None, :]).ravel()) + shift
