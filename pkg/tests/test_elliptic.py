import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from sgweyl.elliptic import (StripProblem, conormal_trace, dirichlet_resolvent, dirichlet_sgo,
                             discretize, dtn_operator, krein_assemble, krein_identity_error,
                             load_problem, make_problem, mollified_family, poisson_operator,
                             read_problem_file, rectangle_dirichlet_eigenvalues,
                             robin_realization, separable_oracle)
from sgweyl.symbols import EllipticityError, InteriorSymbol2

TWO_PI = 2 * np.pi


def variable_problem(nx, ny, shift=1.0, **kw):
    a = lambda x, y: 1 + 0.3 * np.cos(x)  # noqa: E731
    co = InteriorSymbol2.from_functions((4 * nx, 4 * ny), {"a11": a, "a22": a})
    return StripProblem(nx, ny, co, shift=shift, **kw)


def nodes(p):
    x = np.arange(p.nx) * p.hx
    y = np.arange(p.ny + 1) * p.hy
    X, Y = np.meshgrid(x, y)  # row-major in y: index j * nx + i
    return X.ravel(), Y.ravel()


def svals(op):
    return np.sort(np.linalg.svd(op.normalized().to_dense(), compute_uv=False))[::-1]


def same_nonzero_svals(full, union, atol=1e-12):
    n = union.size
    return np.allclose(full[:n], union, atol=atol) and np.all(np.abs(full[n:]) < atol)


# discretization

def test_manufactured_dirichlet_solution_second_order():
    errs = []
    for nx in (32, 64, 128):
        p = variable_problem(nx, nx // 2, shift=1.0)
        d = discretize(p)
        X, Y = nodes(p)
        a = 1 + 0.3 * np.cos(X)
        u = np.cos(X) * np.sin(np.pi * Y)
        f = np.sin(np.pi * Y) * (-0.3 * np.sin(X) ** 2 + a * np.cos(X) * (1 + np.pi**2)) + u
        uh = spla.spsolve(d.B_II.tocsc(), f[d.interior])
        errs.append(np.abs(uh - u[d.interior]).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9), errs


def test_shift_adds_weighted_identity():
    d0 = discretize(make_problem(16, 8, shift=0.0))
    d1 = discretize(make_problem(16, 8, shift=2.5))
    diff = (d1.B - d0.B).toarray()
    assert np.allclose(diff, np.diag(2.5 * d0.weights), atol=1e-12)
    assert np.allclose((d1.A - d0.A).toarray(), 2.5 * np.eye(diff.shape[0]), atol=1e-12)


def test_node_ordering_and_weights():
    d = discretize(make_problem(8, 4))
    assert np.array_equal(d.boundary, np.r_[np.arange(8), np.arange(32, 40)])
    assert np.all(d.weights[d.boundary] == 0.5) and np.all(d.weights[d.interior] == 1.0)


def test_non_elliptic_coefficients_rejected():
    co = InteriorSymbol2.from_functions((32, 16), {"a11": -1.0})
    with pytest.raises(EllipticityError):
        discretize(StripProblem(8, 4, co))
    with pytest.raises(ValueError):
        StripProblem(7, 4, co)


def test_resolvent_inverts_and_is_hermitian():
    d = discretize(variable_problem(16, 8))
    R = dirichlet_resolvent(d)
    assert R.form == "dense"
    M = R.to_dense()
    assert np.abs(M @ d.B_II.toarray() - np.eye(M.shape[0])).max() < 1e-12
    assert np.abs(M - M.T).max() < 1e-12 * np.abs(M).max()
    S = dirichlet_resolvent(d, dense=False)
    v = np.random.default_rng(0).standard_normal(M.shape[0])
    assert S.form == "solve" and np.allclose(S.matvec(v), M @ v)


def test_square_lowest_eigenvalue():
    lam = rectangle_dirichlet_eigenvalues(256)
    assert lam[0] == pytest.approx(2 * np.pi**2, rel=0.01)
    # the separable formula reproduces the assembled square operator
    d = discretize(make_problem(16, 16, shift=0.0, domain="square"))
    ev = np.sort(np.linalg.eigvalsh(d.B_II.toarray()))
    assert np.allclose(ev, rectangle_dirichlet_eigenvalues(16), rtol=1e-12)


# Poisson operator and conormal traces

def test_poisson_operator_is_discrete_harmonic_and_bounded():
    d = discretize(make_problem(24, 12, shift=1.0))
    K = poisson_operator(d).matrix
    assert np.abs((d.B0 @ K)[d.interior]).max() < 1e-12
    assert np.allclose(K[d.boundary], np.eye(d.boundary.size))
    assert K.min() >= -1e-14 and K.sum(axis=1).max() <= 1 + 1e-12


def test_conormal_of_linear_function():
    p = make_problem(16, 8, shift=0.0)
    d = discretize(p)
    _, Y = nodes(p)
    for method in ("one_sided", "flux"):
        g = conormal_trace(d, Y, method=method)
        assert np.allclose(g[:16], 1.0, atol=1e-12) and np.allclose(g[16:], -1.0, atol=1e-12)
    with pytest.raises(ValueError):
        conormal_trace(d, Y, method="bogus")


def test_one_sided_conormal_second_order():
    errs = []
    for nx in (32, 64, 128):
        p = variable_problem(nx, nx // 2)
        X, Y = nodes(p)
        u = np.cos(X) * np.exp(Y)
        g = conormal_trace(discretize(p), u)
        x = np.arange(nx) * p.hx
        a = 1 + 0.3 * np.cos(x)
        exact = np.r_[a * np.cos(x), -np.e * a * np.cos(x)]
        errs.append(np.abs(g - exact).max())
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.8), errs


def _continuum_dtn(m, shift):
    mu = np.sqrt(m * m + shift)
    return -mu / np.tanh(mu), mu / np.sinh(mu)


def test_dtn_modes_converge_to_closed_form():
    m, shift = 2, 1.0
    errs = []
    for nx in (32, 64, 128):
        p = make_problem(nx, nx // 2, shift=shift)
        P = dtn_operator(p)
        x = np.arange(nx) * p.hx
        e = np.exp(1j * m * x)
        out = P @ np.r_[e, np.zeros(nx)]
        diag, off = _continuum_dtn(m, shift)
        errs.append(max(np.abs(out[:nx] - diag * e).max(), np.abs(out[nx:] - off * e).max()))
    assert errs[-1] < 2e-3
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.8), errs


def test_dtn_symmetric_and_matches_separable():
    p = make_problem(16, 8, shift=1.0)
    P = dtn_operator(p)
    assert np.abs(P - P.T).max() < 1e-12
    ev = np.sort(np.linalg.eigvalsh(P))
    sep = np.sort(np.concatenate(separable_oracle(p, quantities=("dtn",)).data["dtn"]).real)
    assert np.allclose(ev, sep, atol=1e-10)
    assert ev.max() < 0


def test_neumann_realization_keeps_constants():
    p = make_problem(16, 8, shift=0.7)
    A = robin_realization(p)
    one = np.ones(A.shape[0])
    assert np.allclose(A @ one, 0.7 * one, atol=1e-12)


# Krein formula

@pytest.mark.parametrize("kw", [dict(), dict(c1=0.5, c0=0.2),
                                dict(family="weierstrass", tau=0.5, amplitude=0.3)])
def test_krein_identity_dense(kw):
    a = krein_assemble(make_problem(16, 8, **kw))
    assert krein_identity_error(a, probes=None) < 1e-10


def test_krein_identity_with_probes_variable():
    a = krein_assemble(variable_problem(32, 16, c1=0.3, c0=0.1))
    assert krein_identity_error(a, probes=16, seed=3) < 1e-10


def test_krein_difference_shrinks_with_large_c0():
    norms = []
    for c0 in (1.0, 10.0, 100.0):
        a = krein_assemble(make_problem(16, 8, c0=c0))
        norms.append(svals(a.G_C)[0])
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 0.05 * norms[0]


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(0.0, 2.0), st.floats(0.5, 3.0))
def test_krein_identity_random_boundary(c1, c0, shift):
    a = krein_assemble(make_problem(8, 4, c1=c1, c0=c0, shift=shift))
    assert krein_identity_error(a, probes=None) < 1e-10


# Dirichlet singular Green operator

def test_dirichlet_sgo_factored_form_exact():
    for p in (make_problem(16, 8), variable_problem(16, 8)):
        s = dirichlet_sgo(p)
        assert s.mismatch < 1e-8
        assert s.difference is not None


def _energy_outside_collar(shift, nx=32, width=0.25):
    p = make_problem(nx, nx // 2, shift=shift)
    G = dirichlet_sgo(p).factored.to_dense()
    y = (discretize(p).interior // nx) * p.hy
    near = np.minimum(y, 1 - y) <= width
    sq = np.abs(G) ** 2
    return 1 - sq[np.ix_(near, near)].sum() / sq.sum()


def test_dirichlet_sgo_concentrates_near_boundary():
    # localization needs the decay length 1 / sqrt(shift) below the collar width
    assert _energy_outside_collar(50.0) < 0.10
    outside = [_energy_outside_collar(s) for s in (1.0, 10.0, 50.0, 200.0)]
    assert all(b < a for a, b in zip(outside, outside[1:]))


def test_dirichlet_sgo_rejects_nonpositive_torus():
    with pytest.raises(EllipticityError):
        dirichlet_sgo(make_problem(8, 4), torus_shift=0.0)


# mollification and separable oracle

def test_mollified_constant_problem_is_unchanged():
    _, report = mollified_family(make_problem(32, 16), k_list=(4, 8))
    for row in report:
        assert row["coefficients"] < 1e-13
        assert max(row["operator"], row["resolvent"], row["poisson"]) < 1e-10


def test_separable_oracle_matches_assembled():
    p = make_problem(16, 8, c1=0.4, c0=0.3, anisotropy=0.2)
    sep = separable_oracle(p, quantities=("dirichlet", "robin", "krein", "poisson",
                                          "dirichlet_sgo"))
    d = discretize(p)
    ev = np.linalg.eigvals(d.B_II.toarray())
    assert np.allclose(np.sort_complex(ev), np.sort_complex(sep.union("dirichlet")), atol=1e-9)
    ev = np.linalg.eigvals(d.A.toarray())
    assert np.allclose(np.sort_complex(ev), np.sort_complex(sep.union("robin").astype(complex)),
                       atol=1e-8)
    a = krein_assemble(p)
    assert same_nonzero_svals(svals(a.G_C), sep.union("krein"))
    assert same_nonzero_svals(svals(poisson_operator(p)), sep.union("poisson"))
    assert same_nonzero_svals(svals(dirichlet_sgo(p).factored), sep.union("dirichlet_sgo"))


def test_separable_oracle_rejects_x_dependence():
    with pytest.raises(ValueError):
        separable_oracle(variable_problem(16, 8))


# problem files

def test_problem_file(tmp_path):
    path = tmp_path / "p.cfg"
    path.write_text("[grid]\nnx = 16\nny = 8\n[coefficients]\nfamily = trig\namplitude = 0.2\n"
                    "[boundary]\nc1 = 0.5\n")
    assert read_problem_file(path) == dict(nx=16, ny=8, family="trig", amplitude=0.2, c1=0.5)
    p = load_problem(path, shift=2.0)
    assert (p.nx, p.ny, p.shift) == (16, 8, 2.0)
    assert np.all(p.boundary_values("c1") == 0.5)
    path.write_text("[grid]\nnz = 3\n")
    with pytest.raises(ValueError):
        read_problem_file(path)
    with pytest.raises(FileNotFoundError):
        read_problem_file(tmp_path / "missing.cfg")


# further properties

def test_form_entries_linear_in_coefficient_perturbation():
    def B(eps):
        a = lambda x, y: 1 + eps * np.cos(3 * x) * np.sin(TWO_PI * y)  # noqa: E731
        co = InteriorSymbol2.from_functions((64, 32), {"a11": a, "a22": a})
        return discretize(StripProblem(16, 8, co, shift=1.0)).B.toarray()

    assert np.allclose(B(0.2) - B(0.0), 2 * (B(0.1) - B(0.0)), atol=1e-12)


def test_poisson_extension_of_boundary_mode():
    m, shift = 1, 1.0
    errs = []
    for nx in (32, 64, 128):
        p = make_problem(nx, nx // 2, shift=shift)
        K = poisson_operator(p).matrix
        x = np.arange(nx) * p.hx
        u = K @ np.r_[np.exp(1j * m * x), np.zeros(nx)]
        X, Y = nodes(p)
        mu = np.sqrt(m * m + shift)
        exact = np.exp(1j * m * X) * np.sinh(mu * (1 - Y)) / np.sinh(mu)
        errs.append(np.abs(u - exact).max())
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.8), errs
    assert not np.any(poisson_operator(p).matrix @ np.zeros(2 * 128))


def test_dtn_zero_mode_matches_two_point_flux():
    p = make_problem(128, 64, shift=1.0)
    ev = np.sort(separable_oracle(p, modes=[0], quantities=("dtn",)).data["dtn"][0].real)
    diag, off = _continuum_dtn(0, 1.0)
    assert np.allclose(ev, np.sort([diag - off, diag + off]), rtol=1e-4)


def test_dtn_symbol_approaches_principal_part():
    for nx in (64, 128, 256):
        p = make_problem(nx, nx // 2, shift=1.0)
        m = nx // 8
        ev = separable_oracle(p, modes=[m], quantities=("dtn",)).data["dtn"][0].real
        assert np.all(np.abs(ev / -m - 1) < 0.02)


def test_separable_dirichlet_eigenvalues_closed_form():
    p = make_problem(16, 8, shift=0.5)
    sep = separable_oracle(p, modes=[0, 3], quantities=("dirichlet",))
    j = np.arange(1, 8)
    for m, ev in zip((0, 3), sep.data["dirichlet"]):
        exact = (4 * np.sin(j * np.pi * p.hy / 2) ** 2 / p.hy**2
                 + 4 * np.sin(m * p.hx / 2) ** 2 / p.hx**2 + 0.5)
        assert np.allclose(np.sort(ev), exact, rtol=1e-12)
    empty = separable_oracle(p, modes=[], quantities=("dirichlet",))
    assert empty.union("dirichlet").size == 0


def test_robin_lowest_eigenvalue_tends_to_dirichlet():
    base = np.sort(separable_oracle(make_problem(32, 16), modes=[0],
                                    quantities=("dirichlet",)).data["dirichlet"][0])[0]
    gaps = []
    for c0 in (1.0, 100.0, 1e4):
        ev = separable_oracle(make_problem(32, 16, c0=c0), modes=[0],
                              quantities=("robin",)).data["robin"][0]
        gaps.append(abs(np.sort(ev.real)[0] - base))
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-2 * gaps[0]


def test_selfadjoint_data_gives_hermitian_operators():
    p = make_problem(16, 8, family="weierstrass", tau=0.5, amplitude=0.3, c0=0.4)
    G = krein_assemble(p).G_C.normalized().to_dense()
    assert np.abs(G - G.conj().T).max() < 1e-10 * np.abs(G).max()
    S = dirichlet_sgo(p).factored.normalized().to_dense()
    assert np.abs(S - S.conj().T).max() < 1e-10 * np.abs(S).max()


def test_singular_boundary_operator_rejected():
    # c0 equal to a DtN eigenvalue makes L = C - P singular
    p = make_problem(8, 4, shift=1.0)
    lam = np.linalg.eigvalsh(dtn_operator(p))[0]
    with pytest.raises(np.linalg.LinAlgError):
        krein_assemble(make_problem(8, 4, shift=1.0, c0=lam))
