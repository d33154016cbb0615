import numpy as np
import pytest

from dpwlawson.iwasawa import iwasawa_pointwise
from dpwlawson.loops import grid_points
from dpwlawson.monodromy import PathSpec
from dpwlawson.potential import PotentialParams
from dpwlawson.geometry import (
    CoveringSurface,
    PoleTooClose,
    blowup_compare,
    area_quadrature,
    area_residue,
    density_value,
    export_mesh,
    fit_generators,
    fundamental_patch,
    immerse,
    immerse_points,
    parse_obj_vertices,
    replicate_symmetry,
    residue_of_gauged_trace,
    saddle_tower_immersion,
    snap_rotation,
)
from dpwlawson.solver import SolveOptions


class TestCoveringSurface:
    def test_genus_and_cycles(self):
        cov = CoveringSurface(m=2, k=5)
        assert cov.genus == 10
        assert cov.euler_characteristic == -18
        assert cov.n_branch_points == 6
        assert cov.branch_cycle(0) == -cov.branch_cycle(1)


class TestRoundSphereOracles:
    def test_density_closed_form(self):
        # frame of the totally geodesic sphere: Phi = [[1, z/lam], [0, 1]],
        # density must come out 4 / (1 + |z|^2)^2
        L = 32
        lam = grid_points(L)
        for z in (0.0, 0.3 + 0.4j, -1.2 + 0.7j):
            Phi = np.zeros((L, 2, 2), dtype=complex)
            Phi[:, 0, 0] = 1.0
            Phi[:, 1, 1] = 1.0
            Phi[:, 0, 1] = z / lam
            B, Fv = iwasawa_pointwise(Phi, 2.0, 8)
            dens = density_value(B.coeff(0), 1.0)
            expect = 4.0 / (1.0 + abs(z) ** 2) ** 2
            assert abs(dens - expect) < 1e-10
            gram = Fv[0] @ Fv[0].conj().T
            assert np.max(np.abs(gram - np.eye(2))) < 1e-11

    def test_quadrature_gives_sphere_area(self):
        # integrate the factorization-based density of the geodesic-sphere
        # frame over the plane (analytic tail beyond the grid)
        L = 32
        lam = grid_points(L)
        R = 12.0
        nr, na = 400, 4          # the density is radially symmetric here
        redges = np.linspace(0.0, R, nr + 1)
        rmids = 0.5 * (redges[1:] + redges[:-1])
        total = 0.0
        for r, dr in zip(rmids, np.diff(redges)):
            for a in 2 * np.pi * (np.arange(na) + 0.5) / na:
                z = r * np.exp(1j * a)
                Phi = np.zeros((L, 2, 2), dtype=complex)
                Phi[:, 0, 0] = 1.0
                Phi[:, 1, 1] = 1.0
                Phi[:, 0, 1] = z / lam
                B, _ = iwasawa_pointwise(Phi, 2.0, 6)
                total += density_value(B.coeff(0), 1.0) * r * dr * 2 * np.pi / na
        total += 4.0 * np.pi / (1.0 + R ** 2)        # exact tail
        assert abs(total - 4.0 * np.pi) < 0.01

    def test_residue_gives_sphere_area(self):
        # in the u = 1/z chart the gauged trace has residue 1 at infinity,
        # so the residue formula returns area 4 pi
        def eta_m1(u):
            return np.array([[0.0, -1.0 / u ** 2], [0.0, 0.0]], dtype=complex)

        def G0(u):
            return np.array([[1.0 / u, 0.0], [0.0, u]], dtype=complex)

        def G1(u):
            return np.array([[0.0, 0.0], [-1.0, 0.0]], dtype=complex)

        res = residue_of_gauged_trace(eta_m1, G0, G1, center=0.0, radius=0.3)
        assert abs(res - 1.0) < 1e-12
        assert abs(4 * np.pi * res - 4 * np.pi) < 1e-10


class TestSaddleTower:
    def test_closed_form_m1(self):
        # independent oracle by explicit antiderivatives (m = 1):
        # X1 = 2 ln|(1-z)/(1+z)|, X2 = 2 ln|(z-i)/(z+i)|,
        # X3 = -2 arg((1-z^2)/(1+z^2))
        zs = np.array([0.3 + 0.1j, -0.2 + 0.55j, 0.45 - 0.3j])
        got = saddle_tower_immersion(1, zs)
        for z, x in zip(zs, got):
            expect = np.array([
                2 * np.log(abs((1 - z) / (1 + z))),
                2 * np.log(abs((z - 1j) / (z + 1j))),
                -2 * np.angle((1 - z ** 2) / (1 + z ** 2)),
            ])
            assert np.max(np.abs(x - expect)) < 1e-9


class TestImmersion:
    def test_identity_at_seed(self):
        params = PotentialParams.initial(1, N=8)
        samples = immerse_points(params, [0.3 + 0.2j, -0.5, 0.6j], L=32)
        for s in samples:
            assert np.max(np.abs(s.f - np.array([1, 0, 0, 0]))) < 1e-10

    def test_point_cloud_patch(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        zs = 0.5 * np.exp(1j * np.linspace(0.2, 1.2, 7))
        mesh = immerse(params, zs)
        assert mesh.n_vertices == 7
        assert mesh.max_norm_defect() < 1e-8
        assert np.all(mesh.density > 0)

    def test_real_segment_on_great_circle(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        xs = np.linspace(-0.9, 0.9, 21)
        samples = immerse_points(params, xs, L=48)
        X = np.stack([s.f for s in samples])
        _, svals, _ = np.linalg.svd(X)
        assert svals[2] < 1e-6 and svals[3] < 1e-6

    def test_surface_closes_on_cover(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        loop = PathSpec(0).pieces(params.n)
        prefix = []
        for _ in range(11):                 # k + 1 turns
            prefix.extend(loop)
        base = immerse_points(params, [0.45 + 0.1j], L=48)[0]
        looped = immerse_points(params, [0.45 + 0.1j], L=48,
                                prefix_pieces=prefix)[0]
        assert np.max(np.abs(base.f - looped.f)) < 1e-6


class TestGenerators:
    def test_snap_rotation(self):
        th = 2 * np.pi / 7 + 3e-4
        G = np.eye(4)
        G[0, 0] = G[1, 1] = np.cos(th)
        G[0, 1], G[1, 0] = -np.sin(th), np.sin(th)
        S = snap_rotation(G, 7)
        assert abs(np.arctan2(S[1, 0], S[0, 0]) - 2 * np.pi / 7) < 1e-12
        assert np.max(np.abs(S @ S.T - np.eye(4))) < 1e-12

    def test_fit_quality(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        gens = fit_generators(params, 1, 10, L=48)
        assert gens.fit_residual <= 1e-6
        assert gens.commutator <= 1e-6
        # orthogonality and order
        for G, order in ((gens.G1, 2), (gens.G2, 11)):
            assert np.max(np.abs(G @ G.T - np.eye(4))) < 1e-10
            assert np.max(np.abs(np.linalg.matrix_power(G, order) - np.eye(4))) < 1e-8


@pytest.fixture(scope="module")
def closed_mesh(solve_cache):
    params = solve_cache.solved(1, 10).params
    patch = fundamental_patch(params, 1, 10, resolution=4)
    return replicate_symmetry(patch, 1, 10)


class TestClosedMesh:
    def test_euler_characteristic(self, closed_mesh):
        assert closed_mesh.euler_characteristic() == 2 - 2 * 1 * 10

    def test_unit_vertices(self, closed_mesh):
        assert closed_mesh.max_norm_defect() < 1e-8

    def test_stitching(self, closed_mesh):
        assert closed_mesh.provenance["stitch_gap"] < 1e-5
        assert closed_mesh.provenance["fit_residual"] < 1e-6
        assert closed_mesh.provenance["commutator"] < 1e-6

    def test_density_positive(self, closed_mesh):
        assert np.all(closed_mesh.density > 0)

    def test_export_round_trip(self, closed_mesh, tmp_path):
        obj, csv = export_mesh(closed_mesh, with_density=True)
        path = tmp_path / "surface.obj"
        path.write_text(obj)
        back = parse_obj_vertices(path.read_text())
        assert back.shape == (closed_mesh.n_vertices, 3)
        # bit-exact round trip through repr formatting
        obj2, _ = export_mesh(closed_mesh, with_density=False)
        assert obj.splitlines()[-len(closed_mesh.faces):] == obj2.splitlines()[-len(closed_mesh.faces):]
        assert csv.startswith("index,density")
        assert np.all(np.isfinite(back))

    def test_pole_too_close(self, closed_mesh):
        # Id is on the surface (base point image), so projecting from it fails
        with pytest.raises(PoleTooClose):
            export_mesh(closed_mesh, pole=np.array([1.0, 0.0, 0.0, 0.0]))

    def test_vertex_count_bookkeeping(self, closed_mesh, solve_cache):
        params = solve_cache.solved(1, 10).params
        data_patch = fundamental_patch(params, 1, 10, resolution=4)
        data = data_patch.provenance["_patch"]
        m1, k1 = 2, 11
        n_sector = len(data.sector_vertices) * m1 * k1
        n_oi = 2 * k1
        n_disk = sum(d.ring_w.size + 1 for d in data.disks.values()) * m1
        assert closed_mesh.n_vertices == n_sector + n_oi + n_disk


class TestAreas:
    def test_residue_formula(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        a0 = params.a.coeff(0).real
        assert abs(area_residue(params, 1, 10) - 8 * np.pi * (1 - a0)) < 1e-12

    def test_quadrature_coarse_agreement(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        ar = area_residue(params, 1, 10)
        aq = area_quadrature(params, 1, 10, resolution=6)
        assert abs(aq - ar) / ar < 0.03

    def test_infinity_density_nonzero(self, solve_cache):
        params = solve_cache.solved(1, 10).params
        patch = fundamental_patch(params, 1, 10, resolution=4)
        data = patch.provenance["_patch"]
        assert data.infinity["density"]["u"] > 1e-3


@pytest.mark.slow
class TestBlowup:
    def test_linear_decay_m1(self):
        rep = blowup_compare(1, opts=SolveOptions(N=12, L=48))
        for r in rep.ratios:
            assert 1.7 <= r <= 2.3
        assert rep.gauss_map_exact
