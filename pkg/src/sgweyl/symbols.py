"""Hoelder fields, mollification, principal-symbol factorization and Weyl constants."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "HolderField",
    "InteriorSymbol2",
    "PrincipalFactorization",
    "EllipticityError",
    "UnderresolutionError",
    "weierstrass",
    "holder_seminorm",
    "bump",
    "mollify",
    "principal_factorize",
    "dtn_principal",
    "sphere_quadrature",
    "weyl_constant_psdo",
    "weyl_constant_sgo",
    "weyl_constant_dirichlet_sgo",
    "weyl_constant_krein",
    "load_grid",
    "save_grid",
]

TWO_PI = 2 * np.pi


class EllipticityError(ValueError):
    """A symbol fails to be (strongly) elliptic where it is required to be."""


class UnderresolutionError(ValueError):
    """The grid is too coarse for the requested operation."""


def weierstrass(x, tau: float, terms: int = 10) -> np.ndarray:
    """Truncated Weierstrass function sum_{m=1}^{terms} 2^(-tau m) cos(2^m x)."""
    x = np.asarray(x, dtype=float)
    m = np.arange(1, terms + 1)
    return np.tensordot(2.0 ** (-tau * m), np.cos(np.multiply.outer(2.0**m, x)), axes=1)


@dataclass(frozen=True)
class HolderField:
    """Samples of a function on a uniform periodic grid (1D or 2D).

    ``period`` holds one period per axis; the grid point with index i on an axis
    of length N sits at i * period / N.
    """

    samples: np.ndarray
    holder_exponent: float = 1.0
    declared_seminorm: float | None = None
    period: tuple[float, ...] = (TWO_PI,)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim not in (1, 2):
            raise ValueError("only 1D and 2D fields are supported")
        per = tuple(float(p) for p in np.broadcast_to(np.asarray(self.period, float), (s.ndim,)))
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "period", per)
        if not 0 < self.holder_exponent <= 1:
            raise ValueError("holder_exponent must lie in (0, 1]")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / n for p, n in zip(self.period, self.samples.shape))

    def grid(self) -> tuple[np.ndarray, ...]:
        """Coordinates of the sample points along each axis."""
        return tuple(np.arange(n) * h for n, h in zip(self.samples.shape, self.spacing))

    def check(self, tol: float = 1e-9) -> bool:
        """True when the discrete quotient respects the declared seminorm."""
        if self.declared_seminorm is None:
            return True
        q = holder_seminorm(self, self.holder_exponent)
        return q <= self.declared_seminorm * (1 + tol)

    @classmethod
    def constant(cls, value, shape, period=(TWO_PI,)) -> "HolderField":
        return cls(np.full(shape, value), 1.0, 0.0, period)


def _offsets_1d(n: int, full_limit: int = 2048) -> np.ndarray:
    half = n // 2
    if n <= full_limit:
        return np.arange(1, half + 1)
    near = np.arange(1, n // 4 + 1)
    far = np.arange(n // 4 + 1, half + 1, max(1, n // full_limit))
    return np.concatenate([near, far])


def holder_seminorm(f: HolderField | np.ndarray, tau: float | None = None, *,
                    period=TWO_PI, max_radius: int = 32) -> float:
    """Discrete Hoelder quotient max |f(x) - f(y)| / |x - y|^tau over grid pairs.

    Distances are periodic.  In 1D all pairs are used for N <= 2048; beyond
    that every pair within a quarter period plus a decimated sample of longer
    separations.  In 2D all offsets within ``max_radius`` cells per axis are
    used.
    """
    if not isinstance(f, HolderField):
        f = HolderField(np.asarray(f), period=period)
    tau = f.holder_exponent if tau is None else tau
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    s = f.samples
    best = 0.0
    if s.ndim == 1:
        (h,) = f.spacing
        n = s.size
        for d in _offsets_1d(n):
            dist = min(d, n - d) * h
            diff = np.max(np.abs(np.roll(s, -d) - s))
            best = max(best, diff / dist**tau)
        return float(best)
    hx, hy = f.spacing
    nx, ny = s.shape
    rx, ry = min(max_radius, nx // 2), min(max_radius, ny // 2)
    for dx in range(0, rx + 1):
        for dy in range(-ry, ry + 1):
            if dx == 0 and dy <= 0:
                continue
            dist = np.hypot(min(dx, nx - dx) * hx, min(abs(dy), ny - abs(dy)) * hy)
            diff = np.max(np.abs(np.roll(s, (-dx, -dy), axis=(0, 1)) - s))
            best = max(best, diff / dist**tau)
    return float(best)


def bump(r) -> np.ndarray:
    """Unnormalized smooth bump exp(-1/(1 - r^2)) supported in |r| < 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _periodic_distance(n: int, h: float) -> np.ndarray:
    i = np.arange(n)
    return np.minimum(i, n - i) * h


def mollify(f: HolderField | np.ndarray, k: float, *, period=TWO_PI):
    """Periodic convolution with rho_k(x) = k^m rho(k x).

    The kernel is a radial C-infinity bump supported in the ball of radius
    1/k, renormalized to unit discrete mass so that the mean of f is kept
    exactly.  Raises :class:`UnderresolutionError` when the support radius is
    below two grid cells on some axis.
    """
    wrap = isinstance(f, HolderField)
    hf = f if wrap else HolderField(np.asarray(f), period=period)
    s = hf.samples
    if k < 1:
        raise ValueError("k must be at least 1")
    radius = 1.0 / k
    if any(radius < 2 * h for h in hf.spacing):
        raise UnderresolutionError(f"mollifier scale 1/k = {radius:.3g} below two grid cells")
    dist2 = sum(
        np.expand_dims(_periodic_distance(n, h), tuple(a for a in range(s.ndim) if a != ax)) ** 2
        for ax, (n, h) in enumerate(zip(s.shape, hf.spacing))
    )
    kern = bump(np.sqrt(dist2) * k)
    kern /= kern.sum()
    out = np.fft.ifftn(np.fft.fftn(s) * np.fft.fftn(kern))
    if np.isrealobj(s):
        out = out.real
    if not wrap:
        return out
    return replace(hf, samples=out, declared_seminorm=None)


@dataclass(frozen=True)
class InteriorSymbol2:
    """Coefficients of A = -sum d_j a_jk d_k + sum a_j d_j + a_0 in two variables.

    Each coefficient is a 2D :class:`HolderField` with periods (2 pi, 1) on a
    common grid; the first axis is the tangential variable x, the second the
    normal variable y.
    """

    a11: HolderField
    a12: HolderField
    a21: HolderField
    a22: HolderField
    a1: HolderField
    a2: HolderField
    a0: HolderField

    @property
    def shape(self) -> tuple[int, int]:
        return self.a11.samples.shape

    def principal(self) -> np.ndarray:
        """Principal coefficient matrices, shape grid + (2, 2)."""
        return np.stack([np.stack([self.a11.samples, self.a12.samples], -1),
                         np.stack([self.a21.samples, self.a22.samples], -1)], -2)

    def check_ellipticity(self, n_dirs: int = 16) -> float:
        """Smallest value of Re a(xi, xi) over unit covectors; raises if <= 0."""
        th = np.linspace(0, np.pi, n_dirs, endpoint=False)
        xi = np.stack([np.cos(th), np.sin(th)], -1)
        a = self.principal()
        q = np.einsum("dj,...jk,dk->...d", xi, a, xi).real
        c0 = float(q.min())
        if c0 <= 0:
            raise EllipticityError("principal part is not strongly elliptic")
        return c0

    @classmethod
    def from_functions(cls, shape, funcs: dict, period=(TWO_PI, 1.0)) -> "InteriorSymbol2":
        """Sample callables f(x, y) on a periodic grid; missing entries default
        to the Laplacian (a11 = a22 = 1, all others 0)."""
        nx, ny = shape
        x = np.arange(nx) * period[0] / nx
        y = np.arange(ny) * period[1] / ny
        X, Y = np.meshgrid(x, y, indexing="ij")
        default = {"a11": 1.0, "a22": 1.0}
        fields = {}
        for name in ("a11", "a12", "a21", "a22", "a1", "a2", "a0"):
            fn = funcs.get(name, default.get(name, 0.0))
            vals = fn(X, Y) if callable(fn) else np.full(shape, fn)
            fields[name] = HolderField(np.asarray(vals) + 0.0 * X, 1.0, None, period)
        return cls(**fields)

    def map(self, fn) -> "InteriorSymbol2":
        """Apply fn to every coefficient field."""
        return InteriorSymbol2(**{n: fn(getattr(self, n)) for n in
                                  ("a11", "a12", "a21", "a22", "a1", "a2", "a0")})


@dataclass(frozen=True)
class PrincipalFactorization:
    """a0(xi', xi_n) = s0 (i xi_n + kappa_plus)(-i xi_n + kappa_minus)."""

    s0: np.ndarray
    kappa_plus: np.ndarray
    kappa_minus: np.ndarray
    lambda_plus: np.ndarray = field(repr=False, default=None)
    lambda_minus: np.ndarray = field(repr=False, default=None)

    def reassemble(self, xi_n) -> np.ndarray:
        xi_n = np.asarray(xi_n)
        return self.s0 * (1j * xi_n + self.kappa_plus) * (-1j * xi_n + self.kappa_minus)


def principal_factorize(a, xi_prime) -> PrincipalFactorization:
    """Factor the principal symbol a0(xi', xi_n) = xi^T a xi in xi_n.

    Parameters
    ----------
    a : array_like, shape (..., n, n)
        Principal coefficient matrix in local coordinates with the interior
        normal direction last.
    xi_prime : array_like, shape (..., n - 1) or (...) when n = 2
        Tangential covector.

    Returns
    -------
    PrincipalFactorization
        s0 = a_nn, roots lambda_plus (Im > 0) and lambda_minus (Im < 0),
        kappa_plus = -i lambda_plus and kappa_minus = i lambda_minus.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    xi = np.asarray(xi_prime, dtype=float)
    if n == 2 and (xi.ndim == 0 or xi.shape[-1] != 1):
        xi = xi[..., None]
    s0 = a[..., -1, -1]
    b = 0.5 * np.einsum("...k,...k->...", a[..., -1, :-1] + a[..., :-1, -1], xi)
    c = np.einsum("...j,...jk,...k->...", xi, a[..., :-1, :-1], xi)
    root = np.sqrt(b * b - s0 * c + 0j)
    r1, r2 = (-b + root) / s0, (-b - root) / s0
    lam_p = np.where(r1.imag > 0, r1, r2)
    lam_m = np.where(r1.imag > 0, r2, r1)
    if np.any(lam_p.imag <= 0) or np.any(lam_m.imag >= 0):
        raise EllipticityError("roots do not separate into upper and lower half-planes")
    return PrincipalFactorization(s0, -1j * lam_p, 1j * lam_m, lam_p, lam_m)


def dtn_principal(fact: PrincipalFactorization, a, xi_prime) -> np.ndarray:
    """Principal symbol of the Dirichlet-to-Neumann operator.

    The conormal derivative sum_k a_nk d_k (interior normal) applied to the
    decaying model solution exp(i x'.xi' - kappa_plus x_n) at x_n = 0.  For the
    Laplacian this is -|xi'|.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    xi = np.asarray(xi_prime, dtype=float)
    if n == 2 and (xi.ndim == 0 or xi.shape[-1] != 1):
        xi = xi[..., None]
    tangential = 1j * np.einsum("...k,...k->...", a[..., -1, :-1], xi)
    return -a[..., -1, -1] * fact.kappa_plus + tangential


def sphere_quadrature(dim: int, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights on the unit sphere S^dim in R^(dim+1).

    S^0 is the exact two-point set {-1, 1}; S^1 uses n equispaced angles; S^2 a
    Gauss-Legendre (in cos theta) times equispaced (in phi) product rule.
    """
    if dim == 0:
        return np.array([[-1.0], [1.0]]), np.ones(2)
    if dim == 1:
        th = np.arange(n) * TWO_PI / n
        return np.stack([np.cos(th), np.sin(th)], -1), np.full(n, TWO_PI / n)
    if dim == 2:
        z, wz = np.polynomial.legendre.leggauss(n // 2)
        ph = np.arange(n) * TWO_PI / n
        Z, P = np.meshgrid(z, ph, indexing="ij")
        r = np.sqrt(1 - Z**2)
        pts = np.stack([r * np.cos(P), r * np.sin(P), Z], -1).reshape(-1, 3)
        w = np.outer(wz, np.full(n, TWO_PI / n)).ravel()
        return pts, w
    raise ValueError("sphere quadrature implemented for dim <= 2")


def _integrate(integrand: np.ndarray, x_weights, omega_weights) -> float:
    integrand = np.asarray(integrand)
    if not np.all(np.isfinite(integrand)):
        raise ValueError("integrand is not finite on the quadrature grid")
    return float(np.einsum("xo,x,o->", integrand, np.asarray(x_weights, float),
                           np.asarray(omega_weights, float)))


def weyl_constant_psdo(principal, x_weights, omega_weights, t: float, m: int) -> float:
    """Weyl constant (1/(m (2 pi)^m)) int int tr((p* p)^(m/2t)) of an order -t symbol.

    ``principal`` has shape (n_x, n_omega) for scalar symbols or
    (n_x, n_omega, M, M) for matrix-valued ones, sampled at points of a
    product quadrature with the given weights.
    """
    if t <= 0:
        raise ValueError("order t must be positive")
    p = np.asarray(principal)
    if p.ndim == 2:
        integrand = np.abs(p) ** (m / t)
    else:
        s = np.linalg.svd(p, compute_uv=False)
        integrand = np.sum(s ** (m / t), axis=-1)
    return _integrate(integrand, x_weights, omega_weights) / (m * TWO_PI**m)


def weyl_constant_sgo(g0, x_weights, omega_weights, t: float, n: int,
                      selfadjoint: bool = True, tol: float = 1e-10) -> float:
    """Weyl constant of a singular Green operator of order -t in dimension n.

    ``g0`` has shape (n_x, n_omega, K, K): the boundary symbol operator in the
    Laguerre basis at each (x', xi'/|xi'|).  In selfadjoint mode each matrix
    must be Hermitian positive semidefinite and tr(g0^((n-1)/t)) is used;
    otherwise the trace of (g0* g0)^((n-1)/2t) via singular values.
    """
    g = np.asarray(g0)
    m = n - 1
    if selfadjoint:
        if not np.allclose(g, np.swapaxes(g.conj(), -1, -2), atol=tol * max(1.0, np.abs(g).max())):
            raise ValueError("g0 is not Hermitian")
        ev = np.linalg.eigvalsh(g)
        if np.any(ev < -tol * max(1.0, np.abs(ev).max())):
            raise ValueError("g0 is not positive semidefinite")
        integrand = np.sum(np.clip(ev, 0, None) ** (m / t), axis=-1)
    else:
        s = np.linalg.svd(g, compute_uv=False)
        integrand = np.sum(s ** (m / t), axis=-1)
    return _integrate(integrand, x_weights, omega_weights) / (m * TWO_PI**m)


def weyl_constant_dirichlet_sgo(fact: PrincipalFactorization, x_weights, omega_weights,
                                n: int) -> float:
    """Weyl constant of the resolvent difference between Dirichlet problem and
    truncated full-space inverse, from the factored principal symbol.

    The integrand is (4 |s0 (kappa+ + kappa-)|^2 Re kappa- Re kappa+)^(-(n-1)/4)
    on the unit cosphere bundle of the boundary.
    """
    m = n - 1
    kp, km = np.asarray(fact.kappa_plus), np.asarray(fact.kappa_minus)
    if np.any(kp.real <= 0) or np.any(km.real <= 0):
        raise EllipticityError("invalid factorization: Re kappa must be positive")
    base = 4 * np.abs(fact.s0 * (kp + km)) ** 2 * km.real * kp.real
    return _integrate(base ** (-m / 4), x_weights, omega_weights) / (m * TWO_PI**m)


def weyl_constant_krein(l0, fact: PrincipalFactorization, x_weights, omega_weights,
                        n: int) -> float:
    """Weyl constant of the Krein resolvent difference K L^-1 K'*.

    ``l0`` is the principal symbol of L = C - P (P the Dirichlet-to-Neumann
    operator); its modulus enters: (4 |l0|^2 Re kappa+ Re kappa-)^(-(n-1)/4).
    """
    m = n - 1
    l0 = np.asarray(l0)
    if np.any(np.abs(l0) == 0):
        raise EllipticityError("principal symbol of L vanishes")
    kp, km = np.asarray(fact.kappa_plus), np.asarray(fact.kappa_minus)
    base = 4 * np.abs(l0) ** 2 * kp.real * km.real
    return _integrate(base ** (-m / 4), x_weights, omega_weights) / (m * TWO_PI**m)


def save_grid(path, field: HolderField) -> None:
    """Write a field as text: header ``n rows cols period`` then row-major values."""
    s = np.atleast_2d(np.asarray(field.samples, dtype=float))
    n = field.samples.ndim
    with open(path, "w") as fh:
        fh.write(f"{n} {s.shape[0]} {s.shape[1]} {' '.join(repr(p) for p in field.period)}\n")
        np.savetxt(fh, s.reshape(1, -1) if n == 1 else s, fmt="%.17g")


def load_grid(path, holder_exponent: float = 1.0) -> HolderField:
    """Read a field written by :func:`save_grid`."""
    text = Path(path).read_text().split("\n", 1)
    head = text[0].split()
    n, rows, cols = (int(v) for v in head[:3])
    period = tuple(float(v) for v in head[3:]) or (TWO_PI,)
    vals = np.array(text[1].split(), dtype=float)
    if vals.size != rows * cols:
        raise ValueError("grid file: value count does not match header")
    vals = vals.reshape(rows, cols)
    if n == 1:
        vals = vals.ravel()
    return HolderField(vals, holder_exponent, None, period[:n] if len(period) >= n else period)
