"""Experiment runners: each builds operators, fits Weyl constants and writes reports.

Every runner takes a flat parameter dict (validated against its defaults)
and returns an :class:`ExperimentResult`; :func:`run` writes ``svals.csv``,
``fit.json``, ``meta.json`` and any extra CSV tables to the output directory.
"""
from __future__ import annotations

import configparser
import csv
import json
import platform
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import scipy.sparse.linalg as spla
from scipy import integrate, special

from . import elliptic, laguerre, lpaley, opcalc, spectra, symbols

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "EXPERIMENTS",
    "list_experiments",
    "resolve_params",
    "run",
    "predicted_constants",
]

_STRIP = dict(nx=128, ny=0, family="constant", tau=0.5, amplitude=0.3, anisotropy=0.0,
              a0=0.0, shift=1.0, c1=0.0, c0=0.0, refine=2, problem="")


@dataclass
class ExperimentResult:
    """Outcome of one experiment run."""

    c_est: float | None
    c_predicted: float | None
    passed: bool
    provenance: dict
    tolerance: float | None = None
    svals: np.ndarray | None = None
    p: float | None = None
    window: tuple[int, int] | None = None
    dispersion: float | None = None
    details: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def rel_error(self) -> float | None:
        if self.c_est is None or not self.c_predicted:
            return None
        return abs(self.c_est - self.c_predicted) / abs(self.c_predicted)


@dataclass
class ExperimentConfig:
    """Experiment name, fully resolved parameters, seed and output directory."""

    name: str
    params: dict
    seed: int = 0
    out: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "seed": self.seed, "out": self.out}

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        """Read ``[experiment]`` (name, seed, out) and ``[params]`` from an INI file."""
        cp = configparser.ConfigParser()
        cp.optionxform = str  # parameter names are case-sensitive (N, K)
        if not cp.read(path):
            raise FileNotFoundError(path)
        head = cp["experiment"] if cp.has_section("experiment") else {}
        name = overrides.pop("name", None) or head.get("name")
        if head.get("name") and head.get("name") != name:
            raise ValueError(f"{path} configures {head.get('name')!r}, not {name!r}")
        if not name:
            raise ValueError(f"{path}: no experiment name")
        raw = dict(cp["params"]) if cp.has_section("params") else {}
        prob = raw.get("problem")
        if prob and not Path(prob).exists() and (Path(path).parent / prob).exists():
            raw["problem"] = str(Path(path).parent / prob)  # relative to the config file
        raw.update(overrides.pop("params", {}))
        return cls(name, resolve_params(name, raw), int(overrides.pop("seed", head.get("seed", 0))),
                   overrides.pop("out", head.get("out", "")))


def _to_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v) -> tuple:
    if isinstance(v, (tuple, list)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).replace(",", " ").split())


def resolve_params(name: str, raw: dict) -> dict:
    """Defaults of experiment ``name`` updated with ``raw`` (converted to the default types).

    A ``problem`` entry names a problem file whose values are applied before
    the explicit entries.
    """
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}")
    defaults = EXPERIMENTS[name].defaults
    out = dict(defaults)
    raw = {k.replace("-", "_"): v for k, v in raw.items()}
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
    if "problem" in raw and "problem" not in defaults:
        raise ValueError(f"{name} does not take a problem file")
    if raw.get("problem"):
        for k, v in elliptic.read_problem_file(raw["problem"]).items():
            if k == "domain":
                continue
            if k not in defaults:
                raise ValueError(f"problem file key {k!r} does not apply to {name}")
            out[k] = v
    for k, v in raw.items():
        d = defaults[k]
        if isinstance(d, bool):
            out[k] = _to_bool(v)
        elif isinstance(d, tuple):
            out[k] = _floats(v)
        elif isinstance(d, int):
            fv = float(v)
            if fv != int(fv):
                raise ValueError(f"{k} must be an integer")
            out[k] = int(fv)
        elif isinstance(d, float):
            out[k] = float(v)
        else:
            out[k] = str(v)
    return out


# ---------------------------------------------------------------------------
# shared pieces

def _strip_problem(p: dict, domain: str = "strip") -> elliptic.StripProblem:
    nx = p["nx"]
    if nx < 8:
        raise ValueError("nx must be at least 8")
    ny = p["ny"] or (nx // 2 if domain == "strip" else nx)
    fam = dict(tau=p["tau"], amplitude=p["amplitude"], anisotropy=p["anisotropy"], a0=p["a0"])
    return elliptic.make_problem(nx, ny, p["family"], shift=p["shift"], c1=p["c1"], c0=p["c0"],
                                 refine=p["refine"], domain=domain, **fam)


def _boundary_symbols(problem: elliptic.StripProblem):
    """Principal data on both boundary lines at xi' = -1, +1.

    Returns (a_local, xi, x_weights, c1) with a_local of shape (2 nx, 2, 2, 2)
    (node, direction, matrix) in coordinates (tangential, interior normal).
    """
    nx = problem.nx
    ix2 = 2 * np.arange(nx)
    blocks = []
    for iy2, sgn in ((0, 1.0), (2 * problem.ny, -1.0)):
        a11, a12, a21, a22 = (problem.sample(n, ix2, iy2) for n in ("a11", "a12", "a21", "a22"))
        a = np.empty((nx, 2, 2), complex)
        a[:, 0, 0], a[:, 0, 1], a[:, 1, 0], a[:, 1, 1] = a11, sgn * a12, sgn * a21, a22
        blocks.append(a)
    a = np.concatenate(blocks)[:, None]
    xi, ow = symbols.sphere_quadrature(0)
    xw = np.full(2 * nx, problem.hx)
    c1 = problem.boundary_values("c1").reshape(-1)
    return np.broadcast_to(a, (2 * nx, 2, 2, 2)), xi[:, 0], xw, ow, c1


def predicted_constants(problem: elliptic.StripProblem) -> dict:
    """Weyl constants c (with s_j j^2 -> c^2) of the Krein difference and of the
    Dirichlet singular Green part, quadratured over the boundary cosphere bundle."""
    a, xi, xw, ow, c1 = _boundary_symbols(problem)
    fact = symbols.principal_factorize(a, xi[None, :])
    p0 = symbols.dtn_principal(fact, a, xi[None, :])
    l0 = c1[:, None] * xi[None, :] - p0
    return {"krein": symbols.weyl_constant_krein(l0, fact, xw, ow, 2),
            "dirichlet_sgo": symbols.weyl_constant_dirichlet_sgo(fact, xw, ow, 2)}


def _strip_window(p: dict) -> int:
    return p["J"] or p["nx"] // 4


def _fit(s, p_exp: float, J: int) -> spectra.WeylFit:
    return spectra.weyl_fit(s, p_exp, J, min_count=min(50, max(4, (3 * J) // 4)))


def _result_from_fit(fit, s, c_pred, tol, prov_est, prov_pred, **details) -> ExperimentResult:
    res = ExperimentResult(fit.c_est, c_pred, False, {"c_est": prov_est, "c_predicted": prov_pred},
                           tol, s.values, fit.p, fit.window, fit.dispersion, details)
    res.passed = res.rel_error is not None and res.rel_error <= tol
    return res


# ---------------------------------------------------------------------------
# runners

def _laguerre_check(p: dict, seed: int) -> ExperimentResult:
    rng = np.random.default_rng(seed)
    K = p["K"]
    rows = []
    worst = {"orthonormality": 0.0, "round_trip": 0.0, "fourier": 0.0, "recursion": 0.0}
    for sigma in p["sigmas"]:
        sysm = laguerre.LaguerreSystem(sigma, K)
        e_orth = float(np.abs(sysm.gram() - np.eye(K)).max())
        b = rng.standard_normal(K) / (1 + np.arange(K)) ** 2
        coeffs = laguerre.LaguerreCoefficients(b, sigma)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", laguerre.UnderresolutionWarning)
            back = laguerre.expand(laguerre.synthesize(coeffs, sysm.quad_nodes), sysm)
        e_rt = float(np.abs(back.values - b).max())
        # Fourier transform against QUADPACK's oscillatory rule on (0, inf)
        e_ft = 0.0
        for k in (0, 1, min(5, K - 1)):
            for xi in (0.5, 2.0):
                f = lambda x: float(laguerre.laguerre_eval(k, x, sigma))
                re = integrate.quad(f, 0, np.inf, weight="cos", wvar=xi, limlst=200)[0]
                im = -integrate.quad(f, 0, np.inf, weight="sin", wvar=xi, limlst=200)[0]
                e_ft = max(e_ft, abs(complex(re, im) - laguerre.laguerre_hat(k, xi, sigma)))
        # derivative rule against the analytic derivative of the rational transform
        xi = np.linspace(-5, 5, 41)
        e_rec = 0.0
        for k in range(K - 1):
            hat = laguerre.laguerre_hat_table(K, xi, sigma)
            d_exact = hat[k] * (-1j * k / (sigma - 1j * xi) - 1j * (k + 1) / (sigma + 1j * xi))
            cp, cs, cn = laguerre.dxi_recursion(k, sigma)
            d_rule = cs * hat[k] + cn * hat[k + 1] + (cp * hat[k - 1] if k else 0)
            e_rec = max(e_rec, float(np.abs(d_rule - d_exact).max()))
        rows.append({"sigma": sigma, "orthonormality": e_orth, "round_trip": e_rt,
                     "fourier": e_ft, "recursion": e_rec})
        for key, v in (("orthonormality", e_orth), ("round_trip", e_rt), ("fourier", e_ft),
                       ("recursion", e_rec)):
            worst[key] = max(worst[key], v)
    ok = (worst["orthonormality"] <= p["tol"] and worst["round_trip"] <= p["tol"]
          and worst["recursion"] <= p["tol"] and worst["fourier"] <= p["tol_fourier"])
    return ExperimentResult(
        worst["orthonormality"], 0.0, ok,
        {"c_est": "largest deviation of the quadrature Gram matrix from the identity",
         "c_predicted": "orthonormality of the Laguerre functions (exact value 0)"},
        p["tol"], details=worst, tables={"errors": rows})


def _sgo_weyl(p: dict, seed: int) -> ExperimentResult:
    t, N, w = p["t"], p["N"], p["w"]
    if t <= 0 or w <= 0 or N < 16:
        raise ValueError("need t > 0, w > 0 and N >= 16")
    grid = opcalc.ModeGrid(N, p["K"])
    m = grid.modes.astype(float)
    bracket = (1 + m**2) ** (-t / 2)
    if p["rank_one"]:
        wx = np.full(grid.n_x, w)
        c = np.zeros((p["K"], p["K"], grid.n_modes))
        c[0, 0] = w * bracket
        tol, label = p["tol_rank_one"], "rank-one model"
    else:
        wx = w * (1 + p["amplitude"] * np.cos(grid.x))
        if np.any(wx <= 0):
            raise ValueError("cutoff weight must stay positive: need amplitude < 1")
        c = np.zeros((p["K"], p["K"], grid.n_x, grid.n_modes))
        c[0, 0] = wx[:, None] * bracket[None, :]
        tol, label = p["tol_cutoff"], "x'-dependent cutoff model"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", laguerre.UnderresolutionWarning)
        G = opcalc.assemble_opg(opcalc.SGKernel(c, -t), grid)
    s = spectra.singular_values(G, source=label)
    xi, ow = symbols.sphere_quadrature(0)
    g0 = np.zeros((grid.n_x, 2, p["K"], p["K"]))
    g0[:, :, 0, 0] = wx[:, None]
    c_w = symbols.weyl_constant_sgo(g0, np.full(grid.n_x, 2 * np.pi / grid.n_x), ow, t, 2)
    J = p["J"] or min(2000, s.values.size)
    fit = _fit(s, t, J)
    return _result_from_fit(
        fit, s, c_w**t, tol, f"median of s_j j^t over the tail window ({label})",
        "c^t with c the Weyl integral (1/2pi) int sum_{xi'=+-1} tr g0^(1/t) dx'",
        c_weyl=c_w, warnings=[str(x.message) for x in caught])


def _krein_weyl(p: dict, seed: int) -> ExperimentResult:
    prob = _strip_problem(p)
    J = _strip_window(p)
    pred = predicted_constants(prob)["krein"] ** 2
    details = {}
    if p["method"] == "separable":
        modes = np.arange(-(prob.nx // 4), prob.nx // 4 + 1)
        s = spectra.SingularValueSequence(
            elliptic.separable_oracle(prob, modes, ("krein",)).union("krein"), "per-mode Krein")
    elif p["method"] == "assembled":
        asm = elliptic.krein_assemble(prob)
        s = spectra.singular_values(asm.G_C, source="assembled Krein difference")
        if p["identity_probes"]:
            details["identity_error"] = elliptic.krein_identity_error(
                asm, probes=p["identity_probes"], seed=seed)
    else:
        raise ValueError("method must be 'assembled' or 'separable'")
    fit = _fit(s, 2.0, J)
    return _result_from_fit(
        fit, s, pred, p["tol"], "median of s_j j^2 of K L^-1 K'* over [J/4, J]",
        "c^2 with c the boundary Weyl integral of (4 |l0|^2 Re k+ Re k-)^(-1/4), "
        "l0 the principal symbol of C minus the Dirichlet-to-Neumann operator",
        **details)


def _dirichlet_sgo_weyl(p: dict, seed: int) -> ExperimentResult:
    prob = _strip_problem(p)
    J = _strip_window(p)
    pred = predicted_constants(prob)["dirichlet_sgo"] ** 2
    details = {}
    if p["method"] == "separable":
        modes = np.arange(-(prob.nx // 4), prob.nx // 4 + 1)
        s = spectra.SingularValueSequence(
            elliptic.separable_oracle(prob, modes, ("dirichlet_sgo",)).union("dirichlet_sgo"),
            "per-mode Dirichlet singular Green part")
    elif p["method"] == "assembled":
        g = elliptic.dirichlet_sgo(prob, difference=False)
        s = spectra.singular_values(g.factored, source="factored Dirichlet singular Green part")
    else:
        raise ValueError("method must be 'assembled' or 'separable'")
    if p["compare_nx"]:
        small = _strip_problem(dict(p, nx=p["compare_nx"], ny=0))
        details["construction_mismatch"] = elliptic.dirichlet_sgo(small, difference=True).mismatch
        details["construction_grid"] = [small.nx, small.ny]
    fit = _fit(s, 2.0, J)
    res = _result_from_fit(
        fit, s, pred, p["tol"], "median of s_j j^2 of A_gamma^-1 - Q_+ over [J/4, J]",
        "c^2 with c the boundary Weyl integral of "
        "(4 |s0 (k+ + k-)|^2 Re k+ Re k-)^(-1/4) from the factored principal symbol",
        **details)
    if "construction_mismatch" in details:
        res.passed = res.passed and details["construction_mismatch"] <= p["mismatch_tol"]
    return res


def _dirichlet_weyl(p: dict, seed: int) -> ExperimentResult:
    n = p["n"]
    if n < 16:
        raise ValueError("n must be at least 16")
    J = p["J"] or (n // 8) ** 2
    isotropic = p["family"] == "constant" and p["anisotropy"] == 0 and p["a0"] == 0
    method = p["method"]
    if method == "auto":
        method = "separable" if isotropic else "assembled"
    prob = _strip_problem(dict(p, nx=n, ny=n, c1=0.0, c0=0.0), domain="square")
    if method == "separable":
        if not isotropic:
            raise ValueError("the separable spectrum needs the constant isotropic family")
        lam = elliptic.rectangle_dirichlet_eigenvalues(n, p["shift"])[:J]
    elif method == "assembled":
        d = elliptic.discretize(prob)
        lam = np.sort(spla.eigsh(d.B_II, k=J, sigma=0, which="LM", return_eigenvectors=False,
                                 v0=np.ones(d.B_II.shape[0]))).real
    else:
        raise ValueError("method must be 'auto', 'separable' or 'assembled'")
    mu = np.sort(1.0 / lam)[::-1]
    s = spectra.SingularValueSequence(mu, f"{method} Dirichlet resolvent eigenvalues")
    # principal symbol 1/(xi^T a xi) on the unit circle, integrated over the square
    m_x = 64
    c = prob.coefficients
    ix = np.arange(m_x) * c.shape[0] // m_x
    iy = np.arange(m_x) * c.shape[1] // m_x
    a = np.stack([np.stack([c.a11.samples[np.ix_(ix, iy)], c.a12.samples[np.ix_(ix, iy)]], -1),
                  np.stack([c.a21.samples[np.ix_(ix, iy)], c.a22.samples[np.ix_(ix, iy)]], -1)],
                 -2).reshape(-1, 2, 2)
    om, ow = symbols.sphere_quadrature(1, 128)
    quad = np.einsum("oi,xij,oj->xo", om, a, om).real
    c_w = symbols.weyl_constant_psdo(1.0 / quad, np.full(a.shape[0], 1.0 / a.shape[0]), ow, 2, 2)
    fit = _fit(s, 1.0, J)
    return _result_from_fit(
        fit, s, c_w, p["tol"], "median of mu_j j over [J/4, J]",
        "Weyl integral (1/(2 (2pi)^2)) int int (xi^T a xi)^(-1) over the cosphere bundle "
        "(1/(4 pi) for the Laplacian)", method=method)


def _counting(p: dict, seed: int) -> ExperimentResult:
    prob = _strip_problem(p)
    if not prob.selfadjoint:
        raise ValueError("the counting experiment needs a selfadjoint problem")
    J = _strip_window(p)
    asm = elliptic.krein_assemble(prob)
    G = asm.G_C.normalized()
    # nonzero eigenvalues of left core right equal those of core (right left)
    eig = np.linalg.eigvals(G.core @ (G.right @ G.left))
    eig = eig[np.argsort(-np.abs(eig))]
    s = spectra.singular_values(asm.G_C)
    fit = _fit(s, 2.0, J)
    pos = np.sort(eig.real[eig.real > 0])[::-1]
    lo, hi = fit.window
    t_grid = np.geomspace(1.0 / pos[lo - 1], 1.0 / pos[hi - 1], 64)
    n_plus, n_minus = spectra.counting_functions(eig, t_grid)
    ratio = n_plus / np.sqrt(t_grid)
    c_est = float(np.median(ratio))
    c_pred = float(np.sqrt(fit.c_est))
    res = ExperimentResult(
        c_est, c_pred, False,
        {"c_est": "median of N+(t)/t^(1/2) over the t range of the fit window",
         "c_predicted": "square root of the fitted constant lim s_j j^2 of the same difference"},
        p["tol"], s.values, 2.0, fit.window, float(np.ptp(ratio) / c_est),
        {"c_fit": fit.c_est, "c_weyl": predicted_constants(prob)["krein"],
         "negative_count": int(n_minus.max()),
         "max_imag": float(np.abs(eig.imag).max())},
        {"counting": [{"t": float(t), "N_plus": int(a), "N_minus": int(b), "ratio": float(r)}
                      for t, a, b, r in zip(t_grid, n_plus, n_minus, ratio)]})
    res.passed = res.rel_error <= p["tol"]
    return res


def _mollify_converge(p: dict, seed: int) -> ExperimentResult:
    prob = _strip_problem(p)
    k_list = tuple(int(k) for k in p["k_list"])
    problems, report = elliptic.mollified_family(prob, k_list)
    J = _strip_window(p)
    s0 = spectra.singular_values(elliptic.krein_assemble(prob).G_C)
    f0 = _fit(s0, 2.0, J)
    rows = []
    for pk, row in zip(problems, report):
        sk = spectra.singular_values(elliptic.krein_assemble(pk).G_C)
        fk = spectra.weyl_fit(sk, 2.0, window=f0.window, min_count=f0.n_used)
        rows.append(dict(row, c_fit=fk.c_est, rel_dist=abs(fk.c_est - f0.c_est) / f0.c_est))
    ripple = p["ripple"]
    monotone = {}
    for key in ("operator", "resolvent", "poisson"):
        v = np.array([r[key] for r in rows])
        monotone[key] = bool(np.all(v[1:] <= v[:-1] * (1 + ripple)) and v[-1] < v[0])
    c_last = rows[-1]["c_fit"]
    res = ExperimentResult(
        c_last, f0.c_est, False,
        {"c_est": f"fitted Krein constant of the coefficients mollified at k = {k_list[-1]}",
         "c_predicted": "fitted Krein constant of the rough coefficients on the same window"},
        p["tol"], s0.values, 2.0, f0.window, f0.dispersion,
        {"monotone": monotone, "norm_ratio_first_last": rows[0]["resolvent"] / rows[-1]["resolvent"]},
        {"mollify": rows})
    res.passed = all(monotone.values()) and res.rel_error <= p["tol"]
    return res


def _lp_decay(p: dict, seed: int) -> ExperimentResult:
    n, J, tau = p["n"], p["levels"], p["tau"]
    if n < 2 ** (J + 1):
        raise ValueError("grid too small for the requested number of levels")
    x = np.arange(n) * 2 * np.pi / n
    xi = np.fft.fftfreq(n, 1.0 / n)
    part = lpaley.dyadic_partition(J, xi)
    a = symbols.weierstrass(x, tau)
    if p["mollify_k"]:
        a = symbols.mollify(a, p["mollify_k"])
    sym = lpaley.SeparableSymbol((1 + a,), (np.ones(n),))
    rng_ = range(J + 1)
    table = lpaley.block_norm_table(sym, rng_, rng_, part)
    slopes = lpaley.fit_wing_slopes(table, rng_, rng_, gap=p["gap"])
    worst = max(slopes["lower"], slopes["upper"])
    rows = [{"i": i, "j": j, "norm": float(table[i, j]),
             "log2norm": float(np.log2(table[i, j])) if table[i, j] > 0 else -np.inf}
            for i in rng_ for j in rng_]
    res = ExperimentResult(
        worst, -tau, worst <= -tau + p["slack"],
        {"c_est": "least-squares log2 slope of the slower off-diagonal wing, |i - j| >= gap",
         "c_predicted": "-tau, the decay rate of the three-regime block bound"},
        p["slack"], details={"slopes": slopes, "near_diagonal_max": float(max(
            table[i, j] for i in rng_ for j in rng_ if abs(i - j) <= 3))},
        tables={"table": rows})
    return res


def _selftest(p: dict, seed: int) -> ExperimentResult:
    rng = np.random.default_rng(seed)
    checks = []

    def check(name, value, tol):
        checks.append({"check": name, "value": float(value), "tol": tol, "ok": bool(value <= tol)})

    sysm = laguerre.LaguerreSystem(1.0, 32)
    check("laguerre gram", np.abs(sysm.gram() - np.eye(32)).max(), 1e-10)
    g = laguerre.cross_gram(16, 0.7, 0.7)
    check("cross gram at equal scales", np.abs(g - np.eye(16)).max(), 1e-12)
    xi = np.fft.fftfreq(2**14, 2.0**-14)
    part = lpaley.dyadic_partition(10, xi)
    band = np.abs(xi) <= 2**10
    check("partition of unity", np.abs(part.phi.sum(0)[band] - 1).max(), 1e-12)
    check("disjoint supports phi_1 phi_4", np.abs(part.phi[1] * part.phi[4]).max(), 0.0)
    prob = elliptic.make_problem(16, 8, "trig", c1=0.3, c0=0.5)
    asm = elliptic.krein_assemble(prob)
    check("krein identity", elliptic.krein_identity_error(asm, probes=None), 1e-10)
    check("dirichlet sgo constructions", elliptic.dirichlet_sgo(prob, difference=True).mismatch,
          1e-10)
    lap = elliptic.make_problem(16, 8, "constant", c1=0.3, refine=1)
    sep = elliptic.separable_oracle(lap, quantities=("dirichlet", "krein"))
    d = elliptic.discretize(lap)
    ev = np.sort(np.linalg.eigvals(d.B_II.toarray()).real)[::-1]
    check("separable dirichlet spectrum", np.abs(ev - sep.union("dirichlet")).max() / ev.max(),
          1e-10)
    sk = spectra.singular_values(elliptic.krein_assemble(lap).G_C).values
    check("separable krein s-numbers", np.abs(sk[:sep.union("krein").size]
                                              - sep.union("krein")).max() / sk[0], 1e-10)
    B1 = rng.standard_normal((12, 5)) + 1j * rng.standard_normal((12, 5))
    B2 = rng.standard_normal((5, 12))
    cyc = spectra.cyclic_eig_check(B1, B2)
    check("cyclic eigenvalue identity", cyc["max_error"], 1e-8)
    grid = opcalc.ModeGrid(32, 4)
    coeff = rng.standard_normal((4, 4, grid.n_modes))
    G = opcalc.assemble_opg(opcalc.SGKernel(coeff), grid)
    union = np.sort(np.concatenate([np.linalg.svd(coeff[:, :, i], compute_uv=False)
                                    for i in range(grid.n_modes)]))[::-1]
    check("block-diagonal s-numbers", np.abs(spectra.singular_values(G).values - union).max(),
          1e-10)
    ok = all(c["ok"] for c in checks)
    worst = max(c["value"] / c["tol"] if c["tol"] else (0.0 if c["value"] == 0 else np.inf)
                for c in checks)
    return ExperimentResult(
        worst, 0.0, ok, {"c_est": "largest ratio of an invariant's error to its tolerance",
                         "c_predicted": "all invariants exact up to rounding (value 0)"},
        1.0, details={"failed": [c["check"] for c in checks if not c["ok"]]},
        tables={"checks": checks})


@dataclass(frozen=True)
class Experiment:
    name: str
    verifies: str
    runner: object
    defaults: dict


EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in (
    Experiment("laguerre-check", "Laguerre basis identities: orthonormality, transform, recursion",
               _laguerre_check, dict(K=48, sigmas=(0.5, 1.0, 4.0), tol=1e-10, tol_fourier=1e-6)),
    Experiment("sgo-weyl", "Weyl asymptotics of negative-order singular Green operators",
               _sgo_weyl, dict(t=2.0, w=1.0, rank_one=False, N=1024, K=1, J=0, amplitude=0.8,
                               tol_rank_one=0.03, tol_cutoff=0.10)),
    Experiment("krein-weyl", "Weyl asymptotics of the Krein resolvent difference "
               "(constant from the boundary symbol of C minus the DtN operator)",
               _krein_weyl, dict(_STRIP, method="assembled", J=0, tol=0.10, identity_probes=0)),
    Experiment("dirichlet-weyl", "Weyl law for the Dirichlet resolvent on the unit square",
               _dirichlet_weyl, dict(n=256, family="constant", tau=0.5, amplitude=0.3,
                                     anisotropy=0.0, a0=0.0, shift=0.0, refine=1, method="auto",
                                     J=0, tol=0.05)),
    Experiment("dirichlet-sgo-weyl", "Weyl asymptotics of the singular Green part of the "
               "Dirichlet resolvent", _dirichlet_sgo_weyl,
               dict(_STRIP, method="assembled", J=0, tol=0.10, compare_nx=32,
                    mismatch_tol=1e-8)),
    Experiment("counting", "leading term of the eigenvalue counting function of a "
               "selfadjoint resolvent difference", _counting, dict(_STRIP, J=0, tol=0.10)),
    Experiment("mollify-converge", "convergence of operators and Weyl constants under "
               "mollification of Hoelder coefficients", _mollify_converge,
               dict(_STRIP, family="weierstrass", k_list=(4.0, 8.0, 16.0, 32.0), J=0,
                    tol=0.05, ripple=0.05)),
    Experiment("lp-decay", "off-diagonal decay of dyadic blocks of Hoelder symbols",
               _lp_decay, dict(n=4096, levels=10, tau=0.5, mollify_k=0.0, gap=4, slack=0.1)),
    Experiment("selftest", "structural invariants of every module", _selftest, dict()),
)}


def list_experiments() -> list[dict]:
    """Names with the result each experiment verifies."""
    return [{"name": e.name, "verifies": e.verifies} for e in EXPERIMENTS.values()]


def _versions() -> dict:
    from . import __version__
    return {"sgweyl": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _write_rows(path: Path, rows: list[dict]) -> None:
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else
                        json.dumps(v) if isinstance(v, (dict, list)) else v
                        for v in (r[k] for k in keys)])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else str(float(v))
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def run(config: ExperimentConfig, write: bool = True) -> tuple[ExperimentResult, dict]:
    """Run an experiment and (optionally) write its report files.

    Returns the result and the fit report written to ``fit.json``.
    """
    exp = EXPERIMENTS.get(config.name)
    if exp is None:
        raise ValueError(f"unknown experiment {config.name!r}")
    start = time.perf_counter()
    res = exp.runner(config.params, config.seed)
    runtime = time.perf_counter() - start
    fit = _jsonable({
        "experiment": config.name, "c_est": res.c_est, "c_predicted": res.c_predicted,
        "rel_error": res.rel_error, "tolerance": res.tolerance, "passed": res.passed,
        "dispersion": res.dispersion, "window": list(res.window) if res.window else None,
        "runtime": runtime, "provenance": res.provenance, "details": res.details})
    if write:
        out = Path(config.out or f"runs/{config.name}")
        out.mkdir(parents=True, exist_ok=True)
        if res.svals is not None:
            spectra.write_svals_csv(out / "svals.csv", res.svals, res.p)
        for name, rows in res.tables.items():
            _write_rows(out / f"{name}.csv", rows)
        (out / "fit.json").write_text(json.dumps(fit, indent=2) + "\n")
        meta = {"config": _jsonable(config.to_dict()), "versions": _versions()}
        (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return res, fit
