"""Laguerre function system on the half-line.

The functions are

    phi_k(x, sigma) = (-1)^k sqrt(2 sigma) L_k(2 sigma x) exp(-sigma x),

an orthonormal basis of L2(0, inf) for every sigma > 0.  Their Fourier
transforms (with the extension by zero to x < 0) are the rational functions
sqrt(2 sigma) (sigma - i xi)^k / (sigma + i xi)^(k+1).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_laguerre

__all__ = [
    "UnderresolutionWarning",
    "LaguerreSystem",
    "LaguerreCoefficients",
    "xi_bracket",
    "xi_bracket_derivative",
    "laguerre_eval",
    "laguerre_table",
    "laguerre_hat",
    "laguerre_hat_table",
    "expand",
    "synthesize",
    "cross_gram",
    "dxi_recursion",
]

# beyond this value of sigma*x the exponential factor is carried in log form
_LOG_DOMAIN_THRESHOLD = 600.0
_RESCALE = 1e200


class UnderresolutionWarning(UserWarning):
    """A discretization does not resolve the function it is applied to."""


def xi_bracket(xi) -> np.ndarray | float:
    """Smooth positive bracket [xi], equal to |xi| for |xi| >= 1.

    For r = |xi| < 1 the quartic h(r) = 1/2 + r^3 - r^4/2 is used.  It has
    h(0) = 1/2, h(1) = 1, h'(1) = 1, h''(1) = 0, h'(r) = r^2 (3 - 2r) >= 0 and
    h'(0) = h''(0) = 0, so the bracket is monotone in |xi| and C^2 in xi.
    """
    r = np.abs(np.asarray(xi, dtype=float))
    out = np.where(r >= 1.0, r, 0.5 + r**3 - 0.5 * r**4)
    return out if out.ndim else float(out)


def xi_bracket_derivative(xi) -> np.ndarray | float:
    """Derivative of :func:`xi_bracket` with respect to a scalar covariable."""
    xi = np.asarray(xi, dtype=float)
    r = np.abs(xi)
    dr = np.where(r >= 1.0, 1.0, 3 * r**2 - 2 * r**3)
    out = np.sign(xi) * dr
    return out if out.ndim else float(out)


def _scaled_laguerre(K: int, y: np.ndarray) -> np.ndarray:
    """Rows L_k(y) exp(-y/2) for k < K, stable for large y."""
    y = np.asarray(y, dtype=float)
    out = np.empty((K,) + y.shape)
    small = y <= 2 * _LOG_DOMAIN_THRESHOLD
    ys = y[small]
    if ys.size:
        e = np.exp(-0.5 * ys)
        prev, cur = np.zeros_like(ys), e
        out[0][small] = cur
        for k in range(K - 1):
            prev, cur = cur, ((2 * k + 1 - ys) * cur - k * prev) / (k + 1)
            out[k + 1][small] = cur
    big = ~small
    yb = y[big]
    if yb.size:
        logscale = -0.5 * yb
        prev, cur = np.zeros_like(yb), np.ones_like(yb)
        out[0][big] = np.exp(logscale)
        for k in range(K - 1):
            prev, cur = cur, ((2 * k + 1 - yb) * cur - k * prev) / (k + 1)
            m = np.abs(cur)
            hit = m > _RESCALE
            if np.any(hit):
                cur = np.where(hit, cur / m, cur)
                prev = np.where(hit, prev / m, prev)
                logscale = np.where(hit, logscale + np.log(np.where(hit, m, 1.0)), logscale)
            with np.errstate(under="ignore"):
                out[k + 1][big] = cur * np.exp(logscale)
    return out


def laguerre_table(K: int, x, sigma: float) -> np.ndarray:
    """Values phi_k(x, sigma) for k < K as an array of shape (K,) + x.shape."""
    x = np.asarray(x, dtype=float)
    if K < 1:
        raise ValueError("K must be at least 1")
    if sigma <= 0 or not np.isfinite(sigma):
        raise ValueError("sigma must be positive and finite")
    if np.any(x < 0):
        raise ValueError("Laguerre functions live on x >= 0")
    if not np.all(np.isfinite(x)) or x.max(initial=0.0) > 1e300 / (K * sigma):
        raise OverflowError("argument k*sigma*x out of representable range")
    tab = _scaled_laguerre(K, 2 * sigma * x.ravel()).reshape((K,) + x.shape)
    signs = np.where(np.arange(K) % 2 == 0, 1.0, -1.0)
    return np.sqrt(2 * sigma) * signs.reshape((K,) + (1,) * x.ndim) * tab


def laguerre_eval(k: int, x, sigma: float):
    """phi_k(x, sigma) by the three-term recurrence."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = laguerre_table(k + 1, x, sigma)[k]
    return out if out.ndim else float(out)


def laguerre_hat(k: int, xi, sigma: float):
    """Fourier transform of the zero extension of phi_k."""
    xi = np.asarray(xi, dtype=float)
    out = np.sqrt(2 * sigma) / (sigma + 1j * xi) * ((sigma - 1j * xi) / (sigma + 1j * xi)) ** k
    return out if out.ndim else complex(out)


def laguerre_hat_table(K: int, xi, sigma: float) -> np.ndarray:
    """Fourier transforms of phi_0..phi_{K-1}, shape (K,) + xi.shape."""
    xi = np.asarray(xi, dtype=float)
    k = np.arange(K).reshape((K,) + (1,) * xi.ndim)
    blaschke = (sigma - 1j * xi) / (sigma + 1j * xi)
    return np.sqrt(2 * sigma) / (sigma + 1j * xi) * blaschke**k


@dataclass(frozen=True)
class LaguerreSystem:
    """phi_0..phi_{K-1} at scale sigma together with an exact quadrature.

    The quadrature is Gauss-Laguerre in y = 2 sigma x with 2K + 16 nodes, so
    every product phi_j phi_k (a polynomial times exp(-y)) is integrated
    exactly up to rounding.
    """

    sigma: float
    max_order: int
    quad_nodes: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.max_order < 1:
            raise ValueError("max_order must be at least 1")
        y, w = roots_laguerre(2 * self.max_order + 16)
        two_s = 2 * self.sigma
        object.__setattr__(self, "quad_nodes", y / two_s)
        object.__setattr__(self, "quad_weights", np.exp(np.log(w) + y) / two_s)

    @property
    def K(self) -> int:
        return self.max_order

    def table(self, x=None) -> np.ndarray:
        """phi_k at x (default: the quadrature nodes)."""
        return laguerre_table(self.K, self.quad_nodes if x is None else x, self.sigma)

    def gram(self) -> np.ndarray:
        """Quadrature Gram matrix of the system (the identity up to rounding)."""
        t = self.table()
        return (t * self.quad_weights) @ t.T

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature of samples taken at the nodes (last axis)."""
        return np.asarray(values) @ self.quad_weights


@dataclass(frozen=True)
class LaguerreCoefficients:
    """Coefficients b_0..b_{K-1} of an expansion in phi_k(., sigma)."""

    values: np.ndarray
    sigma: float

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.shape[0]


def expand(f, system: LaguerreSystem) -> LaguerreCoefficients:
    """Project f onto phi_0..phi_{K-1} with the system quadrature.

    Parameters
    ----------
    f : callable or array_like
        Function of x, or its samples at ``system.quad_nodes``.
    system : LaguerreSystem
        Scale and order of the expansion.

    Returns
    -------
    LaguerreCoefficients
        b_k = int_0^inf f phi_k dx.  A :class:`UnderresolutionWarning` is
        issued when the last coefficient is not small relative to the largest.
    """
    samples = f(system.quad_nodes) if callable(f) else np.asarray(f)
    if samples.shape[-1] != system.quad_nodes.size:
        raise ValueError("samples must be taken at the quadrature nodes")
    b = system.table() @ (system.quad_weights * samples)
    big = np.max(np.abs(b))
    if big > 0 and abs(b[-1]) > 1e-3 * big:
        warnings.warn("Laguerre expansion not resolved: tail coefficient is large",
                      UnderresolutionWarning, stacklevel=2)
    return LaguerreCoefficients(b, system.sigma)


def synthesize(coeffs: LaguerreCoefficients, x) -> np.ndarray:
    """Evaluate sum_k b_k phi_k(x, sigma)."""
    t = laguerre_table(coeffs.K, x, coeffs.sigma)
    return np.tensordot(coeffs.values, t, axes=(0, 0))


def cross_gram(K: int, sigma1, sigma2) -> np.ndarray:
    """Inner products <phi_j(., sigma1), phi_k(., sigma2)> for j, k < K.

    sigma1 and sigma2 broadcast against each other; the result has shape
    broadcast_shape + (K, K).  The integrand is a polynomial times
    exp(-(sigma1 + sigma2) x), so Gauss-Laguerre in z = (sigma1 + sigma2) x
    with K + 8 nodes is exact up to rounding.
    """
    s1, s2 = np.broadcast_arrays(np.asarray(sigma1, float), np.asarray(sigma2, float))
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise ValueError("sigma values must be positive")
    z, w = roots_laguerre(K + 8)
    s = s1 + s2
    a = _laguerre_poly(K, (2 * s1 / s)[..., None] * z)  # (..., K, nodes)
    b = _laguerre_poly(K, (2 * s2 / s)[..., None] * z)
    signs = np.where(np.arange(K) % 2 == 0, 1.0, -1.0)
    g = np.einsum("...jn,...kn,n->...jk", a, b, w)
    scale = np.sqrt(4 * s1 * s2) / s
    return g * scale[..., None, None] * signs[:, None] * signs[None, :]


def _laguerre_poly(K: int, y: np.ndarray) -> np.ndarray:
    """Plain Laguerre polynomials L_k(y), stacked on a new axis before the last."""
    out = np.empty(y.shape[:-1] + (K, y.shape[-1]))
    prev, cur = np.zeros_like(y), np.ones_like(y)
    out[..., 0, :] = cur
    for k in range(K - 1):
        prev, cur = cur, ((2 * k + 1 - y) * cur - k * prev) / (k + 1)
        out[..., k + 1, :] = cur
    return out


def dxi_recursion(k: int, sigma: float, variant: str = "normal", xi_prime=None,
                  normalized: bool = True) -> tuple[complex, complex, complex]:
    """Coefficients (c_prev, c_self, c_next) of a derivative of phi-hat_k.

    ``variant="normal"`` gives d/dxi_n phi-hat_k
    = c_prev phi-hat_{k-1} + c_self phi-hat_k + c_next phi-hat_{k+1}.

    ``variant="tangential"`` gives the derivative with respect to sigma; when
    ``xi_prime`` is supplied it is multiplied by d[xi']/dxi', giving the
    derivative in xi' for sigma = [xi'].  For the normalized functions the
    diagonal term vanishes; ``normalized=False`` returns the rule for the
    unnormalized functions phi-hat_k / sqrt(2 sigma), which has a diagonal
    coefficient -1/(2 sigma).  The k - 1 coefficient is 0 for k = 0.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    two_s = 2.0 * sigma
    if variant == "normal":
        return (-1j * k / two_s, -1j * (2 * k + 1) / two_s, -1j * (k + 1) / two_s)
    if variant != "tangential":
        raise ValueError("variant must be 'normal' or 'tangential'")
    diag = 0.0 if normalized else -1.0
    factor = 1.0 if xi_prime is None else float(xi_bracket_derivative(xi_prime))
    return tuple(complex(c * factor / two_s) for c in (k, diag, -(k + 1)))
