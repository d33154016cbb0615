import numpy as np

from dpwlawson.loops import ScalarLoop, grid_points
from dpwlawson.monodromy import (
    Arc,
    PathSpec,
    Segment,
    integrate_phi,
    log_sl2,
    monodromy_matrix,
    monodromy_samples,
    mtilde_closed_form_t0,
    transport,
)
from dpwlawson.potential import PotentialGrid, PotentialParams

from test_potential import perturbed_params


def closed_form_residuals_t0(params):
    """F and G at t = 0 for arbitrary parameters, by residue calculus."""
    a, b, c, r = params.a, params.b, params.c, params.r
    rho = params.rho
    lam = ScalarLoop.monomial(1, 1.0, rho=rho)
    lam_inv = ScalarLoop.monomial(-1, 1.0, rho=rho)
    F = a - lam_inv * b * r - a.star() + lam * b.star() * r
    G = a * (2 * r) - lam_inv * b * r ** 2 + lam * c - lam * b.star()
    H1 = b.evaluate(1.0).real
    H2 = -b.evaluate(-1.0).real
    return F, G, H1, H2


class TestIntegration:
    def test_phi_closed_form_at_t0(self):
        for m in (1, 2):
            params = PotentialParams.initial(m, N=8)
            lam = grid_points(8)
            for z in (0.4 + 0.2j, -0.3 + 0.5j, 1.8 - 0.9j):
                Phi = integrate_phi(params, [Segment(0.0, z)], lam)
                expect = np.array([[1.0, 0.0], [params.r * z ** m, 1.0]])
                assert np.max(np.abs(Phi - expect)) < 1e-10

    def test_det_drift(self):
        params = perturbed_params(m=1, t=0.05)
        lam = grid_points(16)
        grid = PotentialGrid([params], lam)
        pieces = PathSpec(0).pieces(params.n)
        Y0 = np.broadcast_to(np.eye(2, dtype=complex), (1, 16, 2, 2))
        Y = transport(grid, pieces, Y0, renormalize_det=False)[0]
        det = np.linalg.det(Y)
        assert np.max(np.abs(det - 1.0)) < 1e-10

    def test_homotopic_paths_agree(self):
        params = perturbed_params(m=1, t=0.05)
        lam = grid_points(8)
        M1 = monodromy_samples([params], lam, 0, standoff=0.5)[0]
        M2 = monodromy_samples([params], lam, 0, standoff=0.3)[0]
        assert np.max(np.abs(M1 - M2)) < 1e-9

    def test_path_avoids_punctures(self):
        spec = PathSpec(0)
        assert spec.min_puncture_distance(4) >= 0.25 - 1e-9


class TestSeedMonodromy:
    def test_M0_is_identity(self):
        params = PotentialParams.initial(1, N=16)
        rec = monodromy_matrix(params)
        assert np.max(np.abs(rec.M_samples - np.eye(2))) < 1e-9

    def test_mtilde0_golden(self):
        params = PotentialParams.initial(1, N=16)
        rec = monodromy_matrix(params)
        pi_i = np.pi * 1j
        expect = {
            (0, 0): {1: pi_i, -1: pi_i},
            (0, 1): {1: pi_i, -1: -pi_i},
            (1, 0): {1: -pi_i, -1: pi_i},
            (1, 1): {1: -pi_i, -1: -pi_i},
        }
        worst = 0.0
        for (i, j), want in expect.items():
            e = rec.Mtilde.entry(i, j)
            for k in range(-e.trunc_degree, e.trunc_degree + 1):
                worst = max(worst, abs(e.coeff(k) - want.get(k, 0.0)))
        assert worst < 1e-7

    def test_residuals_vanish_at_seed(self):
        params = PotentialParams.initial(1, N=16)
        rec = monodromy_matrix(params)
        res = rec.residuals
        assert res.F.norm_inf_coeff() < 1e-9
        assert res.G.norm_inf_coeff() < 1e-9
        assert abs(res.H1) < 1e-10 and abs(res.H2) < 1e-10
        assert res.K_minus_1 == 0.0
        vec = res.flatten(16)
        assert vec.shape == (3 * 16 + 4,)
        assert np.max(np.abs(vec)) < 1e-9

    def test_K_at_seed(self):
        params = PotentialParams.initial(1)
        # (a0)^2 + b0 c0 = 0 + (-1/2)(-2) = 1
        a0 = params.a.coeff(0).real
        b0 = params.b.coeff(0).real
        c0 = params.c.coeff(0).real
        assert a0 ** 2 + b0 * c0 == 1.0


class TestDifferencingOracle:
    def test_mtilde0_matches_residue_formula(self):
        # the t = 0 limit computed by differencing must reproduce the
        # closed-form residue computation for arbitrary parameters
        params = perturbed_params(m=1, t=0.0, N=8)
        rec = monodromy_matrix(params, N_loop=8)
        closed = mtilde_closed_form_t0(params)
        N = max(rec.Mtilde.trunc_degree, closed.trunc_degree)
        diff = (rec.Mtilde.pad(N) - closed.pad(N)).norm_inf_coeff()
        assert diff < 1e-8

    def test_residual_closed_forms(self):
        params = perturbed_params(m=1, t=0.0, N=8, seed=12)
        rec = monodromy_matrix(params, N_loop=8)
        Fc, Gc, H1c, H2c = closed_form_residuals_t0(params)
        res = rec.residuals
        NF = max(res.F.trunc_degree, Fc.trunc_degree)
        assert (res.F.pad(NF) - Fc.pad(NF)).norm_inf_coeff() < 1e-8
        NG = max(res.G.trunc_degree, Gc.trunc_degree)
        assert (res.G.pad(NG) - Gc.pad(NG)).norm_inf_coeff() < 1e-8
        assert abs(res.H1 - H1c) < 1e-9
        assert abs(res.H2 - H2c) < 1e-9

    def test_F0_vanishes_by_symmetry(self):
        params = perturbed_params(m=1, t=0.03, seed=21)
        rec = monodromy_matrix(params, N_loop=8)
        assert abs(rec.residuals.F.coeff(0)) < 1e-10


class TestSymmetries:
    def test_reality_M_equals_barM_inverse(self):
        params = perturbed_params(m=1, t=0.05)
        L = 16
        lam = grid_points(L)
        M = monodromy_samples([params], lam, 0)[0]
        # bar(M)(lam) = conj(M(conj lam)); on the grid conj(lam_j) = lam_{L-j}
        for j in range(L):
            bar = np.conj(M[(L - j) % L])
            assert np.max(np.abs(M[j] @ bar - np.eye(2))) < 1e-9

    def test_monodromy_transport(self):
        params = perturbed_params(m=2, t=0.03)
        L = 16
        lam = grid_points(L)
        D = params.sym_conjugation()
        Dinv = np.linalg.inv(D)
        Ms = [monodromy_samples([params], lam, j)[0] for j in range(3)]
        for j in (0, 1):
            # M_{j+1}(lam) = D^-1 M_j(-lam) D; -lam_j = lam_{j + L/2}
            neg = np.roll(Ms[j], -L // 2, axis=0)
            transported = np.einsum("ab,kbc,cd->kad", Dinv, neg, D)
            assert np.max(np.abs(Ms[j + 1] - transported)) < 1e-9

    def test_composite_loop_is_ordered_product(self):
        params = perturbed_params(m=1, t=0.04)
        n = params.n
        lam = grid_points(8)
        Ms = [monodromy_samples([params], lam, j)[0] for j in range(n)]
        grid = PotentialGrid([params], lam)
        th0 = -np.pi / n
        R = 1.6
        pieces = [Segment(0.0, R * np.exp(1j * th0)),
                  Arc(0.0, R, th0, th0 + 2 * np.pi),
                  Segment(R * np.exp(1j * th0), 0.0)]
        Y0 = np.broadcast_to(np.eye(2, dtype=complex), (1, len(lam), 2, 2))
        Mbig = transport(grid, pieces, Y0)[0]
        prod = Ms[0]
        for j in range(1, n):
            prod = np.einsum("kab,kbc->kac", prod, Ms[j])
        assert np.max(np.abs(Mbig - prod)) < 1e-9


class TestSerialization:
    def test_record_round_trips_through_json(self):
        import json

        params = perturbed_params(m=1, t=0.03, N=8)
        rec = monodromy_matrix(params, N_loop=8)
        text = json.dumps(rec.to_json_dict(), sort_keys=True)
        back = json.loads(text)
        assert back["t"] == params.t
        assert back["M"]["N"] == 8
        assert abs(back["K_minus_1"] - rec.residuals.K_minus_1) == 0.0
        assert back["det_defect"] < 1e-9


class TestLog:
    def test_log_reproduces_exponential(self, rng):
        for _ in range(25):
            X = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            X = 0.4 * (X - 0.5 * np.trace(X) * np.eye(2))
            lam_e, V = np.linalg.eig(X)
            M = V @ np.diag(np.exp(lam_e)) @ np.linalg.inv(V)
            M = M / np.sqrt(np.linalg.det(M))
            logM, flagged = log_sl2(M[None])
            err = np.max(np.abs(logM[0] - X))
            assert err < 1e-10

    def test_branch_flag(self):
        M = np.array([[[-1.001, 0.01], [0.0, -1.0 / 1.001]]], dtype=complex)
        _, flagged = log_sl2(M)
        assert flagged
