import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from perfhom.corrector import CorrectorField
from perfhom.femlab import (
    OUTER,
    ConvergenceError,
    LoadError,
    Problem,
    TilingError,
    assemble,
    build_mesh,
    build_mesh_radius,
    error_norms,
    l2_norm,
    load_vector,
    local_robin_mass,
    local_stiffness,
    low_eigenvalues,
    mass_matrix,
    mesh_audit,
    pcg,
    read_mesh,
    robin_matrix,
    solve_cg,
    stiffness_matrix,
    structured_square,
    system_eigenvalues,
    triangle_rule,
    write_mesh,
)
from perfhom.femlab.assembly import p1_gradients
from perfhom.femlab.quadrature import map_points
from perfhom.femlab.solvers import DiscreteSolution
from perfhom.quasiunitary import tilde_hausdorff
from perfhom.regime import ContractError, GeometryError, PerforationParams, ScalingLaw

PI = math.pi
P2 = PerforationParams.power_laws(2, "3/2", "1/2", 0.25, 4 / PI)  # P_eps = 2, Q = inf


def sine(p):
    return np.sin(PI * p[..., 0]) * np.sin(PI * p[..., 1])


def one(p):
    return np.ones(p.shape[:-1])


@pytest.fixture(scope="module")
def quarter():
    return build_mesh(P2, 0.25, 0)


# --- element matrices ----------------------------------------------------------

def test_local_stiffness_unit_triangle():
    K = local_stiffness([[0, 0], [1, 0], [0, 1]])
    assert np.allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


def test_local_robin_mass():
    assert np.allclose(local_robin_mass(0.3, 2.0), 2.0 * 0.3 / 6 * np.array([[2, 1], [1, 2]]))


def test_quadrature_rules_exact():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for degree in (1, 2, 3, 4, 5):
        bary, w = triangle_rule(degree)
        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        pts = map_points(tri, np.array([[0, 1, 2]]), bary)[0]
        for a in range(degree + 1):
            b = degree - a
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            got = 0.5 * np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
            assert got == pytest.approx(exact, rel=1e-13)


# --- meshes ------------------------------------------------------------------

def test_small_mesh_audit():
    m = build_mesh_radius(1e-3, 0.5, 0)
    assert len(m.centers) == 4
    assert np.all(m.signed_areas() > 0)
    a = mesh_audit(m)
    assert a.ok and a.euler == 1 - 4 == a.expected_euler
    assert a.max_hole_radius_error <= 1e-12 * 1e-3


@pytest.mark.parametrize("eps,ref", [(0.5, 0), (0.5, 2), (0.25, 1), (1 / 3, 0), (0.125, 0)])
def test_mesh_areas(eps, ref):
    d = 0.25 * eps ** 1.5
    m = build_mesh_radius(d, eps, ref)
    k = round(1 / eps)
    # shoelace over the hole polygons, whose nodes sit on the circle
    e = m.hole_edges()
    a, b = m.nodes[e[:, 0]], m.nodes[e[:, 1]]
    polygons = 0.5 * np.sum(a[:, 1] * b[:, 0] - a[:, 0] * b[:, 1])
    assert m.area() == pytest.approx(1 - polygons, abs=1e-12)
    disks = k * k * PI * d * d
    assert 0 < m.area() - (1 - disks) <= disks * 8.0 / m.polygon_sides ** 2
    f = m.filled()
    assert f.area() == pytest.approx(1.0, abs=1e-12)
    assert mesh_audit(m).ok and mesh_audit(f).ok


def test_filled_variant_extends_perforated(quarter):
    f = quarter.filled()
    n, t = quarter.n_nodes, quarter.n_triangles
    assert np.array_equal(f.nodes[:n], quarter.nodes)
    assert np.array_equal(f.triangles[:t], quarter.triangles)
    assert f.kind == "filled" and np.all(f.boundary_tags == OUTER)


def test_hole_tags_and_outer_boundary(quarter):
    tags = quarter.boundary_tags
    assert set(np.unique(tags[tags >= 0])) == set(range(16))
    outer = quarter.nodes[quarter.dirichlet_nodes()]
    on_edge = np.isclose(outer, 0).any(axis=1) | np.isclose(outer, 1).any(axis=1)
    assert on_edge.all()
    r = np.linalg.norm(quarter.nodes[quarter.hole_nodes()][:, None] - quarter.centers[None], axis=2).min(axis=1)
    assert np.allclose(r, quarter.hole_radius, rtol=1e-12)


def test_mesh_errors():
    with pytest.raises(GeometryError):
        build_mesh_radius(0.125, 0.5, 0)
    with pytest.raises(TilingError):
        build_mesh_radius(0.01, 0.3, 0)
    with pytest.raises(GeometryError):
        build_mesh(PerforationParams.power_laws(3, 2, 0), 0.25, 0)
    with pytest.raises(GeometryError):
        build_mesh_radius(0.01, 0.25, -1)


def test_mesh_roundtrip(tmp_path, quarter):
    path = tmp_path / "mesh.txt"
    write_mesh(quarter, path)
    header = path.read_text().splitlines()[0].split()
    assert [int(v) for v in header] == [quarter.n_nodes, quarter.n_triangles, len(quarter.boundary_edges)]
    back = read_mesh(path)
    assert np.array_equal(back.nodes, quarter.nodes)
    assert np.array_equal(back.triangles, quarter.triangles)
    assert np.array_equal(back.boundary_edges, quarter.boundary_edges)
    assert np.array_equal(back.boundary_tags, quarter.boundary_tags)


# --- assembly ----------------------------------------------------------------

def test_matrix_invariants(quarter):
    K, M = stiffness_matrix(quarter), mass_matrix(quarter)
    B = robin_matrix(quarter, 3.0)
    for A in (K, M, B):
        assert abs(A - A.T).max() <= 1e-14
    assert np.abs(K @ np.ones(quarter.n_nodes)).max() <= 1e-12
    assert M.sum() == pytest.approx(quarter.area(), rel=1e-13)
    e = quarter.hole_edges()
    perimeter = np.linalg.norm(quarter.nodes[e[:, 0]] - quarter.nodes[e[:, 1]], axis=1).sum()
    assert B.sum() == pytest.approx(3.0 * perimeter, rel=1e-13)
    touched = np.unique(B.tocoo().row)
    assert set(touched) <= set(quarter.hole_nodes())
    assert np.linalg.eigvalsh(B.toarray()).min() >= -1e-14
    free = np.setdiff1d(np.arange(quarter.n_nodes), quarter.dirichlet_nodes())
    np.linalg.cholesky(M[free][:, free].toarray())


def test_neumann_holes_have_no_robin_term(quarter):
    assert robin_matrix(quarter, 0.0).nnz == 0
    sys = assemble(quarter, P2, 0.25, Problem.perforated(gamma=0.0), one)
    assert sys.B.nnz == 0


def test_load_vector_moments(quarter):
    f = quarter.filled()
    assert load_vector(f, one).sum() == pytest.approx(1.0, abs=1e-13)
    assert load_vector(f, lambda p: p[..., 0] ** 2).sum() == pytest.approx(1 / 3, abs=1e-13)


def test_assemble_contracts(quarter):
    with pytest.raises(ContractError):
        assemble(quarter.filled(), P2, 0.25, Problem.perforated(), one)
    with pytest.raises(ContractError):
        assemble(quarter, P2, 0.25, Problem.homogenized(2.0), one)
    with pytest.raises(ContractError):
        Problem.homogenized(-1.0)
    with pytest.raises(ContractError):
        assemble(quarter, None, None, Problem.perforated(), one)


def test_load_errors(quarter):
    with pytest.raises(LoadError):
        assemble(quarter, P2, 0.25, Problem.perforated(), lambda p: np.full(p.shape[:-1], np.nan))
    with pytest.raises(LoadError):
        assemble(quarter, P2, 0.25, Problem.perforated(), lambda p: p["x"])


# --- linear solver ----------------------------------------------------------------

def test_cg_diagonal():
    res = pcg(sp.diags([2.0, 3.0]).tocsr(), np.array([2.0, 3.0]))
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_cg_matches_dense(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 20))
    A = X @ X.T + 0.5 * np.eye(20)
    b = rng.standard_normal(20)
    x = pcg(A, b, tol=1e-13).x
    assert np.allclose(x, sla.solve(A, b, assume_a="pos"), atol=1e-8, rtol=0)


def test_cg_reports_failure():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 30))
    A = X @ X.T + 1e-3 * np.eye(30)
    with pytest.raises(ConvergenceError) as info:
        pcg(A, np.ones(30), tol=1e-12, max_iter=3)
    assert info.value.residual > 1e-12


def test_solve_certificate_and_dirichlet(quarter):
    sys = assemble(quarter, P2, 0.25, Problem.perforated(), sine)
    sol = solve_cg(sys, tol=1e-10)
    assert sol.metadata["residual"] <= 1e-10
    assert np.all(sol.values[quarter.dirichlet_nodes()] == 0)
    again = solve_cg(sys, tol=1e-10)
    assert np.array_equal(sol.values, again.values)


def test_galerkin_orthogonality(quarter):
    sys = assemble(quarter, P2, 0.25, Problem.perforated(), sine)
    sol = solve_cg(sys)
    free = sys.free
    r = sys.operator @ sol.values - sys.b
    assert np.linalg.norm(r[free]) <= 1e-10 * np.linalg.norm(sys.b[free]) * 1.0001


def test_manufactured_slope():
    errors = []
    for ref in range(4):
        fm = build_mesh_radius(0.05, 0.5, ref).filled()
        f = lambda p: (2 * PI ** 2 + 1) * sine(p)
        u = solve_cg(assemble(fm, None, None, Problem.homogenized(0.0), f))
        bary, w = triangle_rule(5)
        pts = map_points(fm.nodes, fm.triangles, bary)
        _, area = p1_gradients(fm.nodes, fm.triangles)
        uh = np.einsum("tk,qk->tq", u.values[fm.triangles], bary)
        errors.append(math.sqrt(np.sum(area * ((uh - sine(pts)) ** 2 @ w))))
    slopes = np.log2(np.array(errors[:-1]) / errors[1:])
    assert slopes.min() >= 1.9


def test_monotone_in_gamma(quarter):
    norms = []
    for g in (0.0, 1.0, 10.0):
        norms.append(l2_norm(solve_cg(assemble(quarter, P2, 0.25, Problem.perforated(gamma=g), sine))))
    assert norms[0] > norms[1] > norms[2]


def test_neumann_holes_regression():
    errs = []
    for d in (1 / 32, 1 / 64, 1 / 128):
        m = build_mesh_radius(d, 0.25, 0)
        ue = solve_cg(assemble(m, None, None, Problem.perforated(gamma=0.0), sine))
        u = solve_cg(assemble(m.filled(), None, None, Problem.homogenized(0.0), sine))
        errs.append(error_norms(ue, u)["L2"])
    assert errs[0] > errs[1] > errs[2]


# --- error norms -------------------------------------------------------------------

def test_error_norms_identical(quarter):
    f = quarter.filled()
    u = DiscreteSolution(f, sine(f.nodes))
    ue = DiscreteSolution(quarter, sine(quarter.nodes))
    out = error_norms(ue, u)
    assert out == {"L2": 0.0, "H1": 0.0, "H1_corrected": None}


def test_error_norms_against_matrix_oracle(quarter):
    f = quarter.filled()
    u = DiscreteSolution(f, np.cos(f.nodes[:, 0]) * f.nodes[:, 1])
    ue = DiscreteSolution(quarter, sine(quarter.nodes))
    out = error_norms(ue, u)
    w = ue.values - u.values[: quarter.n_nodes]
    # exact P1 integrals through the element matrices
    l2 = math.sqrt(w @ (mass_matrix(quarter) @ w))
    h1 = math.sqrt(l2 ** 2 + w @ (stiffness_matrix(quarter) @ w))
    assert out["L2"] == pytest.approx(l2, rel=1e-10)
    assert out["H1"] == pytest.approx(h1, rel=1e-10)


def test_corrected_norm_without_coupling(quarter):
    neumann = PerforationParams(2, P2.d_law, ScalingLaw(0.0))
    f = quarter.filled()
    u = DiscreteSolution(f, sine(f.nodes))
    ue = DiscreteSolution(quarter, 0.9 * sine(quarter.nodes))
    out = error_norms(ue, u, CorrectorField(neumann, 0.25))
    assert out["H1_corrected"] == pytest.approx(out["H1"], rel=1e-12)


def test_corrected_norm_cell_mismatch(quarter):
    f = quarter.filled()
    u = DiscreteSolution(f, sine(f.nodes))
    ue = DiscreteSolution(quarter, sine(quarter.nodes))
    with pytest.raises(ContractError):
        error_norms(ue, u, CorrectorField(P2, 0.125))


def test_error_norms_mismatched_pair(quarter):
    other = build_mesh(P2, 0.5, 0).filled()
    with pytest.raises(ContractError):
        error_norms(DiscreteSolution(quarter, np.zeros(quarter.n_nodes)),
                    DiscreteSolution(other, np.zeros(other.n_nodes)))
    with pytest.raises(ContractError):
        error_norms(DiscreteSolution(quarter, np.zeros(quarter.n_nodes)),
                    DiscreteSolution(quarter, np.zeros(quarter.n_nodes)))


# --- eigenvalues -------------------------------------------------------------------

def test_dirichlet_square_eigenvalue():
    m = structured_square(1.0, 32)
    sys = assemble(m, None, None, Problem.homogenized(0.0), one)
    lam = system_eigenvalues(sys, 1)[0]
    assert abs(lam / (2 * PI ** 2) - 1) < 0.01


def test_neumann_square_second_eigenvalue():
    m = structured_square(0.5, 32)
    lam = low_eigenvalues(stiffness_matrix(m), mass_matrix(m), 2, shift=-1.0)
    assert lam[0] == pytest.approx(0.0, abs=1e-8)
    assert abs(lam[1] / (PI / 0.5) ** 2 - 1) < 0.01


@pytest.mark.parametrize("k", [1, 3])
def test_eigen_against_dense(k):
    rng = np.random.default_rng(12)
    X = rng.standard_normal((12, 12))
    A = X @ X.T + np.eye(12)
    Y = rng.standard_normal((12, 12))
    M = Y @ Y.T + 12 * np.eye(12)
    lam, vecs, res = low_eigenvalues(A, M, k, return_vectors=True)
    assert np.allclose(lam, sla.eigh(A, M, eigvals_only=True)[:k], rtol=1e-9, atol=0)
    assert np.all(res <= 1e-8)
    for j in range(k):
        v = vecs[:, j]
        r = np.linalg.norm(A @ v - lam[j] * (M @ v)) / math.sqrt(v @ M @ v)
        assert r <= 1e-8


def test_eigen_argument_checks():
    with pytest.raises(ValueError):
        low_eigenvalues(np.eye(20), np.eye(20), 11)
    with pytest.raises(ValueError):
        low_eigenvalues(np.eye(3), np.eye(3), 4)


def test_eigen_iteration_limit():
    m = structured_square(1.0, 16)
    sys = assemble(m, None, None, Problem.homogenized(0.0), one)
    with pytest.raises(ConvergenceError):
        system_eigenvalues(sys, 5, max_iter=2)


def test_spectral_distance_decreases_along_sweep():
    dist = []
    for eps in (0.5, 0.25, 0.125):
        m = build_mesh(P2, eps, 0)
        le = system_eigenvalues(assemble(m, P2, eps, Problem.perforated(), one), 5)
        lh = system_eigenvalues(assemble(m.filled(), P2, eps, Problem.homogenized(2.0), one), 5)
        dist.append(tilde_hausdorff(le, lh))
    assert dist[0] > dist[1] > dist[2]
