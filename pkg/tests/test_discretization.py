"""Assembly: TPFA/MPFA-O stencils, residual/Jacobian consistency,
matrix structure, scheme exactness properties."""

from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sps

from richardsfv.benchmarks import (build_dam, build_verification_linear,
                                   dam_conductivity)
from richardsfv.constitutive import UnconfinedParams, VgmParams
from richardsfv.discretization import (AssemblyError, Discretization, Medium,
                                       ProblemSpec, assemble,
                                       assemble_jacobian, face_kr,
                                       tpfa_transmissibilities)
from richardsfv.linalg import solve
from richardsfv.mesh import build_mesh, gen_cartesian, gen_triangular

VGM = VgmParams(0.05, 0.4, 1.0, 1.5)
UNC = UnconfinedParams()


def two_cell_spec(kl=1.0, kr=1.0):
    """Two unit squares side by side, Dirichlet on the left."""
    mesh = gen_cartesian(2, 1, 2.0, 1.0)
    media = (Medium("L", kl * np.eye(2), VGM),
             Medium("R", kr * np.eye(2), VGM))
    cm = np.zeros(2, dtype=np.int64)
    cm[np.argmax(mesh.cell_centroid[:, 0])] = 1
    return ProblemSpec(mesh=mesh, media=media, cell_medium=cm,
                       dirichlet={"left": 1.0})


# -- TPFA transmissibilities ------------------------------------------

def test_tpfa_unit_interior_face():
    spec = two_cell_spec(1.0, 1.0)
    T = tpfa_transmissibilities(spec)
    (f,) = spec.mesh.interior_faces
    # two unit cells, K = I: one-sided conductances are 2 and 2
    assert T[f] == pytest.approx(1.0, rel=1e-14)
    assert (T > 0).all()


def test_tpfa_harmonic_average():
    spec = two_cell_spec(1.0, 3.0)
    T = tpfa_transmissibilities(spec)
    (f,) = spec.mesh.interior_faces
    # k_L = 2, k_R = 6 -> harmonic 2*6/(2+6) = 1.5
    assert T[f] == pytest.approx(1.5, rel=1e-14)


def test_tpfa_homogeneity_in_k():
    s = 7.3
    T1 = tpfa_transmissibilities(two_cell_spec(1.0, 3.0))
    T2 = tpfa_transmissibilities(two_cell_spec(s, 3.0 * s))
    np.testing.assert_allclose(T2, s * T1, rtol=1e-13)


def test_tpfa_degenerate_distance_names_cell():
    # arrowhead polygon whose centroid lies on a face plane
    verts = [(0, 0), (4, 0), (1, 1), (0, 4)]
    mesh = build_mesh(verts, [[0, 1, 2, 3]])
    spec = ProblemSpec(mesh=mesh, media=(Medium("m", np.eye(2), VGM),),
                       cell_medium=[0], dirichlet={"boundary": 1.0})
    with pytest.raises(AssemblyError, match="cell 0"):
        tpfa_transmissibilities(spec)


def test_mpfa_singular_region_names_vertex():
    verts = [(0, 0), (4, 0), (1, 1), (0, 4)]
    mesh = build_mesh(verts, [[0, 1, 2, 3]])
    spec = ProblemSpec(mesh=mesh, media=(Medium("m", np.eye(2), VGM),),
                       cell_medium=[0], dirichlet={"boundary": 1.0})
    with pytest.raises(AssemblyError, match="vertex"):
        Discretization(spec, "mpfa-o")


# -- face permeability ---------------------------------------------------

def test_face_kr_central():
    assert face_kr(5.0, 3.0, 0.2, 0.4, "central") == pytest.approx(0.3)


def test_face_kr_upwind():
    assert face_kr(5.0, 3.0, 0.2, 0.4, "upwind") == pytest.approx(0.2)
    assert face_kr(3.0, 5.0, 0.2, 0.4, "upwind") == pytest.approx(0.4)


def test_face_kr_upwind_tie_is_central():
    assert face_kr(4.0, 4.0, 0.2, 0.4, "upwind") == pytest.approx(0.3)


def test_face_kr_bad_mode():
    with pytest.raises(ValueError):
        face_kr(1.0, 1.0, 0.5, 0.5, "midpoint")


# -- assembly consistency ------------------------------------------------

@pytest.mark.parametrize("scheme", ["tpfa", "mpfa-o"])
def test_q0_assembly_is_state_independent(scheme):
    spec = build_dam("vgm", "cartesian:4x4")
    disc = Discretization(spec, scheme)
    rng = np.random.default_rng(0)
    A1 = disc.assemble(rng.uniform(2, 10, 16), 0.0, "linear").A
    A2 = disc.assemble(rng.uniform(2, 10, 16), 0.0, "power").A
    assert (A1 != A2).nnz == 0  # bit-identical


@pytest.mark.parametrize("scheme", ["tpfa", "mpfa-o"])
@pytest.mark.parametrize("q,kind", [(0.0, "linear"), (0.7, "power"),
                                    (1.0, "linear")])
def test_residual_equals_Ah_minus_b(scheme, q, kind):
    spec = build_dam("unconfined", "cartesian:5x4")
    disc = Discretization(spec, scheme)
    rng = np.random.default_rng(1)
    h = rng.uniform(2, 10, spec.mesh.n_cells)
    asm = disc.assemble(h, q, kind)
    F_from_A = asm.A @ h - asm.b
    scale = max(np.abs(asm.F).max(), np.abs(asm.b).max(), 1e-30)
    assert np.abs(asm.F - F_from_A).max() <= 1e-13 * scale
    np.testing.assert_allclose(disc.residual(h, q, kind), asm.F,
                               rtol=0, atol=1e-13 * scale)


def test_exact_discrete_solution_has_zero_residual():
    spec = build_dam("unconfined", "400")
    disc = Discretization(spec, "tpfa")
    asm = disc.assemble(np.full(400, 6.0), 0.0, "linear")
    h_star, _ = solve(asm.A, asm.b)
    F = disc.residual(h_star, 0.0, "linear")
    assert np.abs(F).max() <= 1e-10 * np.abs(asm.b).max()


def test_two_cell_no_flow_equilibrium():
    # Dirichlet h = 1 on the left, impermeable elsewhere, Q = 0:
    # the constant state solves the problem
    spec = two_cell_spec()
    disc = Discretization(spec, "tpfa")
    asm = disc.assemble(np.full(2, 0.5), 1.0, "linear")
    h, _ = solve(asm.A, asm.b)
    np.testing.assert_allclose(h, 1.0, atol=1e-12)


def test_neumann_inflow_balance():
    # prescribed inflow on the right must exit through the left
    # Dirichlet boundary at steady state
    mesh = gen_cartesian(3, 1, 3.0, 1.0)
    spec = ProblemSpec(mesh=mesh, media=(Medium("m", np.eye(2), VGM),),
                       cell_medium=np.zeros(3, dtype=int),
                       dirichlet={"left": 5.0}, neumann={"right": -0.25})
    disc = Discretization(spec, "tpfa")
    asm = disc.assemble(np.full(3, 5.0), 0.0, "linear")
    h, _ = solve(asm.A, asm.b)
    flux = disc.face_fluxes(h, 0.0, "linear")
    left = [f for f in mesh.boundary_faces if mesh.face_tag[f] == "left"]
    # outflux through the left face equals the prescribed influx 0.25
    assert flux[left[0]] == pytest.approx(-(-0.25) * 1.0, rel=1e-12)


# -- Jacobian ------------------------------------------------------------

@pytest.mark.parametrize("scheme", ["tpfa", "mpfa-o"])
def test_jacobian_equals_A_at_q0(scheme):
    spec = build_dam("vgm", "cartesian:4x4")
    disc = Discretization(spec, scheme)
    h = np.linspace(2, 10, 16)
    asm = disc.assemble(h, 0.0, "linear")
    J = disc.assemble_jacobian(h, 0.0, "linear")
    assert abs(J - asm.A).max() == 0.0


def fd_jacobian(disc, h, q, kind, step_scale=1e-6):
    n = len(h)
    cols = []
    for j in range(n):
        step = step_scale * (1.0 + abs(h[j]))
        hp = h.copy()
        hp[j] += step
        hm = h.copy()
        hm[j] -= step
        cols.append((disc.residual(hp, q, kind) -
                     disc.residual(hm, q, kind)) / (2.0 * step))
    return np.column_stack(cols)


@pytest.mark.parametrize("scheme", ["tpfa", "mpfa-o"])
@pytest.mark.parametrize("model", ["vgm", "unconfined"])
@pytest.mark.parametrize("kind", ["linear", "power"])
def test_jacobian_matches_finite_differences(scheme, model, kind):
    spec = build_dam(model, "cartesian:4x4")
    disc = Discretization(spec, scheme)
    rng = np.random.default_rng(42)
    h = rng.uniform(1.0, 11.0, 16)
    J = disc.assemble_jacobian(h, 1.0 if kind == "linear" else 0.6,
                               kind).toarray()
    Jfd = fd_jacobian(disc, h, 1.0 if kind == "linear" else 0.6, kind)
    scale = max(np.abs(Jfd).max(), 1e-30)
    assert np.abs(J - Jfd).max() <= 1e-5 * scale


def test_jacobian_upwind_mode():
    spec = build_dam("vgm", "cartesian:4x4", kr_mode="upwind")
    disc = Discretization(spec, "tpfa")
    rng = np.random.default_rng(3)
    h = rng.uniform(1.0, 11.0, 16)  # no ties, almost surely
    J = disc.assemble_jacobian(h, 1.0, "linear").toarray()
    Jfd = fd_jacobian(disc, h, 1.0, "linear")
    assert np.abs(J - Jfd).max() <= 1e-5 * np.abs(Jfd).max()
    # away from ties only the upwind cell carries the kr derivative
    flux0, K, dk_l, dk_r = disc._face_system(h, 1.0, "linear", True)
    hl = h[disc.cell_l]
    interior = disc.cell_r >= 0
    hr = np.where(interior, h[np.where(interior, disc.cell_r, 0)], 0.0)
    up_l = interior & (hl > hr)
    up_r = interior & (hl < hr)
    assert (dk_r[up_l] == 0).all()
    assert (dk_l[up_r] == 0).all()


# -- matrix structure -----------------------------------------------------

def test_tpfa_central_A_symmetric():
    spec = build_dam("unconfined", "cartesian:6x6")
    disc = Discretization(spec, "tpfa")
    h = np.random.default_rng(5).uniform(2, 10, 36)
    A = disc.assemble(h, 1.0, "linear").A
    assert abs(A - A.T).max() <= 1e-14 * abs(A).max()


def test_tpfa_q0_is_m_matrix():
    spec = build_dam("unconfined", "cartesian:6x6")
    disc = Discretization(spec, "tpfa")
    A = disc.assemble(np.full(36, 6.0), 0.0, "linear").A.toarray()
    off = A - np.diag(np.diag(A))
    assert (off <= 1e-14).all()  # nonpositive off-diagonals
    rowsum = A.sum(axis=1)
    assert (rowsum >= -1e-12).all()  # weak diagonal dominance
    # strict dominance in Dirichlet-adjacent rows
    mesh = spec.mesh
    dir_cells = {mesh.face_cells[f, 0]
                 for f in mesh.boundary_faces
                 if mesh.face_tag[f] in spec.dirichlet}
    assert all(rowsum[c] > 1e-10 for c in dir_cells)


def flip_face(mesh, f):
    """Reverse the stored orientation of face f."""
    fc = mesh.face_cells.copy()
    fn = mesh.face_normal.copy()
    sg = mesh.cf_sign.copy()
    fc[f] = fc[f][::-1]
    fn[f] = -fn[f]
    sg[mesh.cf_face == f] *= -1
    return replace(mesh, face_cells=fc, face_normal=fn, cf_sign=sg)


@pytest.mark.parametrize("scheme", ["tpfa", "mpfa-o"])
def test_orientation_flip_leaves_residual_unchanged(scheme):
    spec = build_dam("unconfined", "cartesian:4x3")
    f = int(spec.mesh.interior_faces[3])
    mesh2 = flip_face(spec.mesh, f)
    spec2 = replace(spec, mesh=mesh2)
    rng = np.random.default_rng(8)
    h = rng.uniform(2, 10, spec.mesh.n_cells)
    F1 = Discretization(spec, scheme).residual(h, 1.0, "power")
    F2 = Discretization(spec2, scheme).residual(h, 1.0, "power")
    np.testing.assert_allclose(F1, F2, rtol=0,
                               atol=1e-13 * np.abs(F1).max())
    # and the reconstructed flux through the flipped face changes sign
    x1 = Discretization(spec, scheme).face_fluxes(h, 1.0, "power")
    x2 = Discretization(spec2, scheme).face_fluxes(h, 1.0, "power")
    assert x2[f] == pytest.approx(-x1[f], rel=1e-12)


# -- exactness properties -------------------------------------------------

@pytest.mark.parametrize("scheme", ["tpfa", "mpfa-o"])
@pytest.mark.parametrize("gen", [gen_cartesian, gen_triangular])
def test_constant_field_exactness(scheme, gen):
    mesh = gen(4, 4, 2.0, 2.0)
    spec, _ = build_verification_linear(mesh, dam_conductivity(),
                                        a=0.0, b=0.0, c=7.0)
    disc = Discretization(spec, scheme)
    asm = disc.assemble(np.full(mesh.n_cells, 7.0), 1.0, "linear")
    h, _ = solve(asm.A, asm.b)
    np.testing.assert_allclose(h, 7.0, atol=1e-12)


def test_mpfa_reduces_to_tpfa_on_k_orthogonal_grid():
    mesh = gen_cartesian(5, 4, 2.0, 1.0)
    med = Medium("m", np.diag([2.0, 0.5]), VGM)
    spec = ProblemSpec(mesh=mesh, media=(med,),
                       cell_medium=np.zeros(20, dtype=int),
                       dirichlet={"left": 3.0, "right": 1.0})
    h = np.linspace(1, 2, 20)
    a1 = Discretization(spec, "tpfa").assemble(h, 1.0, "power")
    a2 = Discretization(spec, "mpfa-o").assemble(h, 1.0, "power")
    assert abs(a1.A - a2.A).max() <= 1e-12 * abs(a1.A).max()
    np.testing.assert_allclose(a1.b, a2.b, rtol=0,
                               atol=1e-12 * np.abs(a1.b).max())


@pytest.mark.parametrize("gen", [gen_cartesian, gen_triangular])
def test_mpfa_linear_exactness_rotated_tensor(gen):
    mesh = gen(6, 6, 10.0, 10.0)
    spec, exact = build_verification_linear(mesh, dam_conductivity(),
                                            a=1.0, b=2.0, c=50.0)
    disc = Discretization(spec, "mpfa-o")
    asm = disc.assemble(np.full(mesh.n_cells, 50.0), 1.0, "linear")
    h, _ = solve(asm.A, asm.b)
    h_exact = exact(mesh.cell_centroid[:, 0], mesh.cell_centroid[:, 1])
    assert np.abs(h - h_exact).max() <= 1e-10


def test_tpfa_linear_exactness_k_orthogonal():
    mesh = gen_cartesian(6, 5, 3.0, 2.0)
    spec, exact = build_verification_linear(mesh, np.diag([2.0, 0.7]),
                                            a=1.0, b=2.0, c=50.0)
    disc = Discretization(spec, "tpfa")
    asm = disc.assemble(np.full(mesh.n_cells, 50.0), 1.0, "linear")
    h, _ = solve(asm.A, asm.b)
    h_exact = exact(mesh.cell_centroid[:, 0], mesh.cell_centroid[:, 1])
    assert np.abs(h - h_exact).max() <= 1e-10


def test_tpfa_inconsistent_on_rotated_tensor_triangular_grid():
    # the motivating failure: TPFA does not approximate the flux on
    # non-K-orthogonal meshes
    mesh = gen_triangular(10, 10, 10.0, 10.0)
    spec, exact = build_verification_linear(mesh, dam_conductivity(),
                                            a=1.0, b=2.0, c=50.0)
    disc = Discretization(spec, "tpfa")
    asm = disc.assemble(np.full(mesh.n_cells, 50.0), 1.0, "linear")
    h, _ = solve(asm.A, asm.b)
    h_exact = exact(mesh.cell_centroid[:, 0], mesh.cell_centroid[:, 1])
    assert np.abs(h - h_exact).max() > 1e-3


def test_tpfa_flux_error_on_rotated_cartesian_grid():
    # on a uniform Cartesian grid the TPFA cell values are
    # superconvergent for linear fields (the missing cross-term flux is
    # constant), but the face fluxes are wrong by that cross term
    mesh = gen_cartesian(10, 10, 10.0, 10.0)
    K = dam_conductivity()
    spec, exact = build_verification_linear(mesh, K, a=1.0, b=2.0, c=50.0)
    grad = np.array([1.0, 2.0])
    for scheme, bound, comparison in (("mpfa-o", 1e-10, "below"),
                                      ("tpfa", 1e-3, "above")):
        disc = Discretization(spec, scheme)
        asm = disc.assemble(np.full(100, 50.0), 1.0, "linear")
        h, _ = solve(asm.A, asm.b)
        flux = disc.face_fluxes(h, 1.0, "linear")
        ids = disc.face_ids
        true_flux = np.array(
            [-(mesh.face_normal[f] @ K @ grad) * mesh.face_length[f]
             for f in ids])
        err = np.abs(flux[ids] - true_flux).max()
        assert (err < bound) if comparison == "below" else (err > bound)


# -- validation -----------------------------------------------------------

def test_problemspec_validation_errors():
    mesh = gen_cartesian(2, 2, 1.0, 1.0)
    med = Medium("m", np.eye(2), VGM)
    ok = dict(mesh=mesh, media=(med,),
              cell_medium=np.zeros(4, dtype=int))
    with pytest.raises(ValueError, match="Dirichlet"):
        ProblemSpec(**ok, dirichlet={})
    with pytest.raises(ValueError, match="missing tags"):
        ProblemSpec(**ok, dirichlet={"west": 1.0})
    with pytest.raises(ValueError, match="both"):
        ProblemSpec(**ok, dirichlet={"left": 1.0}, neumann={"left": 0.0})
    with pytest.raises(ValueError, match="medium"):
        ProblemSpec(mesh=mesh, media=(med,),
                    cell_medium=np.array([0, 0, 0, 5]),
                    dirichlet={"left": 1.0})
    with pytest.raises(ValueError, match="source"):
        ProblemSpec(**ok, dirichlet={"left": 1.0}, source=np.ones(3))


def test_medium_validation():
    with pytest.raises(ValueError, match="symmetric"):
        Medium("m", np.array([[1.0, 0.5], [0.0, 1.0]]), VGM)
    with pytest.raises(ValueError, match="positive definite"):
        Medium("m", np.array([[1.0, 2.0], [2.0, 1.0]]), VGM)
    with pytest.raises(ValueError, match="2x2"):
        Medium("m", np.eye(3), VGM)


def test_unknown_scheme_rejected():
    spec = two_cell_spec()
    with pytest.raises(ValueError, match="ntpfa"):
        Discretization(spec, "ntpfa")


def test_one_shot_wrappers():
    spec = two_cell_spec()
    h = np.array([1.0, 1.0])
    asm = assemble(spec, h, 0.0, "linear")
    J = assemble_jacobian(spec, h, 0.0, "linear")
    assert abs(J - asm.A).max() == 0.0
    assert sps.issparse(J)


def test_mpfa_single_cell_boundary_only():
    # no interior vertices: the stencils come purely from boundary
    # handling, and the uniform Dirichlet state is an exact solution
    mesh = gen_cartesian(1, 1, 1.0, 1.0)
    spec = ProblemSpec(mesh=mesh, media=(Medium("m", np.eye(2), VGM),),
                       cell_medium=[0], dirichlet={"left": 2.0, "right": 2.0})
    disc = Discretization(spec, "mpfa-o")
    F = disc.residual(np.array([2.0]), 1.0, "linear")
    assert abs(F[0]) < 1e-12
