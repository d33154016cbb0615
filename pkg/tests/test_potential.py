import numpy as np
import pytest

from dpwlawson.loops import MatrixLoop, ScalarLoop
from dpwlawson.potential import (
    DegenerateGauge,
    PotentialParams,
    PunctureEvaluation,
    apply_gauge,
    build_potential,
    gauge_at_infinity,
    gauge_infinity,
    gauge_zero,
    infinity_leading_coefficient,
    local_branch_gauge,
    PotentialGrid,
)


def perturbed_params(m=1, t=0.02, N=8, seed=3):
    """x0 plus a small real plus-perturbation of a, b, c (not a solution)."""
    rng = np.random.default_rng(seed)
    base = PotentialParams.initial(m, N)

    def bump(loop):
        c = loop.coeffs.copy()
        Nl = loop.trunc_degree
        c[Nl:Nl + 5] += 0.02 * rng.standard_normal(5)
        return ScalarLoop(c, loop.rho)

    return PotentialParams(m=m, t=t, r=1.0 + 0.01 * rng.standard_normal(),
                           a=bump(base.a), b=bump(base.b), c=bump(base.c))


class TestBuildPotential:
    def test_t_zero_is_nilpotent(self):
        params = PotentialParams.initial(2, N=6)
        ev = build_potential(params, 0.7 + 0.1j)
        v = ev.value
        m, r, z = 2, 1.0, 0.7 + 0.1j
        assert v.entry(0, 0).norm_rho() < 1e-14
        assert v.entry(0, 1).norm_rho() < 1e-14
        lower = v.entry(1, 0)
        assert abs(lower.coeff(0) - m * r * z ** (m - 1)) < 1e-14
        assert abs(lower.norm_rho() - abs(m * r * z ** (m - 1))) < 1e-13

    def test_residue_matrix_at_seed(self):
        params = PotentialParams.initial(1, N=4)
        A0 = params.residue_matrix(0)
        assert abs(A0.entry(0, 0).coeff(1) - 1.0) < 1e-14
        assert abs(A0.entry(0, 1).coeff(1) - 0.5) < 1e-14
        assert abs(A0.entry(0, 1).coeff(-1) + 0.5) < 1e-14
        assert abs(A0.entry(1, 0).coeff(1) + 2.0) < 1e-14
        assert abs(A0.entry(1, 1).coeff(1) + 1.0) < 1e-14

    def test_closed_matches_direct(self):
        params = perturbed_params(m=1, t=0.05)
        z = 0.3 + 0.2j
        closed = build_potential(params, z, method="closed")
        direct = build_potential(params, z, method="direct")
        N = max(closed.value.trunc_degree, direct.value.trunc_degree)
        diff = closed.value.pad(N) - direct.value.pad(N)
        assert diff.norm_rho() < 1e-12

    def test_closed_matches_direct_m2(self):
        params = perturbed_params(m=2, t=0.03, seed=11)
        for z in (0.4 - 0.6j, 1.7 + 0.4j, -0.2 + 0.9j):
            closed = build_potential(params, z, method="closed")
            direct = build_potential(params, z, method="direct")
            N = max(closed.value.trunc_degree, direct.value.trunc_degree)
            diff = closed.value.pad(N) - direct.value.pad(N)
            assert diff.norm_rho() < 1e-11

    def test_puncture_rejected(self):
        params = PotentialParams.initial(1, N=4)
        with pytest.raises(PunctureEvaluation):
            build_potential(params, 1.0)

    def test_ansatz_shape(self):
        params = perturbed_params(m=1, t=0.04)
        ev = build_potential(params, 0.55 + 0.3j)
        assert ev.shape_defect() < 1e-14

    def test_grid_evaluator_matches_loops(self):
        params = perturbed_params(m=1, t=0.05)
        L = 16
        lam = np.exp(2j * np.pi * np.arange(L) / L)
        grid = PotentialGrid([params], lam)
        z = 0.45 - 0.35j
        vals = grid.eta(z)[0]
        loop_val = build_potential(params, z).value.evaluate(lam)
        assert np.max(np.abs(vals - loop_val)) < 1e-12


class TestSymmetries:
    def test_residue_recursion(self):
        params = perturbed_params(m=2, t=0.02)
        D = params.sym_conjugation()
        Dinv = np.linalg.inv(D)
        L = 16
        lam = np.exp(2j * np.pi * np.arange(L) / L)
        for j in range(params.n - 1):
            Aj = params.residue_matrix(j).evaluate(-lam)
            Aj1 = params.residue_matrix(j + 1).evaluate(lam)
            transported = np.einsum("ab,kbc,cd->kad", Dinv, Aj, D)
            assert np.max(np.abs(Aj1 - transported)) < 1e-13

    def test_sigma_reality(self):
        params = perturbed_params(m=1, t=0.04)
        z = 0.37 + 0.41j
        lam = np.exp(2j * np.pi * np.arange(12) / 12)
        lhs = build_potential(params, np.conj(z)).value.evaluate(lam)
        rhs = np.conj(build_potential(params, z).value.evaluate(np.conj(lam)))
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_delta_equivariance(self):
        params = perturbed_params(m=1, t=0.04)
        n = params.n
        D = params.sym_conjugation()
        Dinv = np.linalg.inv(D)
        z = 0.52 - 0.17j
        rot = np.exp(2j * np.pi / n)
        lam = np.exp(2j * np.pi * np.arange(12) / 12)
        lhs = build_potential(params, rot * z).value.evaluate(lam) * rot
        inner = build_potential(params, z).value.evaluate(-lam)
        rhs = np.einsum("ab,kbc,cd->kad", Dinv, inner, D)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_numeric_residue_is_tA(self):
        params = perturbed_params(m=1, t=0.03)
        j = 1
        p = params.punctures()[j]
        S = 64
        r = 0.15
        ws = p + r * np.exp(2j * np.pi * np.arange(S) / S)
        lam = np.exp(2j * np.pi * np.arange(8) / 8)
        acc = np.zeros((8, 2, 2), dtype=complex)
        for w in ws:
            acc += build_potential(params, w).value.evaluate(lam) * (w - p)
        acc /= S
        expected = params.residue_matrix(j).evaluate(lam) * params.t
        assert np.max(np.abs(acc - expected)) < 1e-10


class TestGauges:
    def test_identity_gauge(self):
        params = perturbed_params(m=1, t=0.03)
        eta_fn = lambda z: build_potential(params, z)
        Id = lambda z: MatrixLoop.identity(0, params.rho)
        dId = lambda z: MatrixLoop.zero(0, params.rho)
        gauged = apply_gauge(eta_fn, Id, dId)
        z = 0.3 + 0.5j
        a = gauged(z).value
        b = build_potential(params, z).value
        N = max(a.trunc_degree, b.trunc_degree)
        assert (a.pad(N) - b.pad(N)).norm_rho() < 1e-13

    def test_zero_gauge_at_t0(self):
        # eta_0 gauged by the z^{+-m} shear becomes [[0,0],[m r z^-m-1,0]]
        for m in (1, 2):
            params = PotentialParams.initial(m, N=4)
            G, dG = gauge_zero(params)
            gauged = apply_gauge(lambda z: build_potential(params, z), G, dG)
            z = 1.3 - 0.4j
            v = gauged(z).value
            expect = m * params.r * z ** (-m - 1)
            assert abs(v.entry(1, 0).coeff(0) - expect) < 1e-12
            for (i, jj) in ((0, 0), (0, 1), (1, 1)):
                assert v.entry(i, jj).norm_rho() < 1e-11

    def test_gauge_cocycle(self):
        params = perturbed_params(m=1, t=0.05)
        rho = params.rho
        lam = ScalarLoop.monomial(1, 1.0, rho=rho)
        one = ScalarLoop.one(0, rho)
        zero = ScalarLoop.zero(0, rho)

        def G(z):
            return MatrixLoop.from_entries(one, lam * (0.3 * z), zero, one)

        def H(z):
            return MatrixLoop.from_entries(
                ScalarLoop.constant(np.cosh(0.2 * z), 0, rho), zero,
                lam * (0.1 * z ** 2), ScalarLoop.constant(1.0 / np.cosh(0.2 * z), 0, rho))

        def GH(z):
            return G(z) @ H(z)

        eta_fn = lambda z: build_potential(params, z)
        z = 0.42 + 0.33j
        step = apply_gauge(apply_gauge(eta_fn, G), H)(z).value
        joint = apply_gauge(eta_fn, GH)(z).value
        N = max(step.trunc_degree, joint.trunc_degree)
        assert (step.pad(N) - joint.pad(N)).norm_rho() < 1e-9


class TestInfinityGauge:
    def test_poles_vanish_for_any_params(self):
        params = perturbed_params(m=1, t=0.04)
        rep = gauge_at_infinity(params)
        assert rep.pole_11 < 1e-10
        assert rep.pole_21 < 1e-10

    def test_leading_series_matches_closed_form(self):
        params = perturbed_params(m=2, t=0.03, seed=5)
        rep = gauge_at_infinity(params)
        N = max(rep.B_series.trunc_degree, rep.B_closed.trunc_degree)
        diff = rep.B_series.pad(N) - rep.B_closed.pad(N)
        assert diff.norm_inf_coeff() < 1e-9
        assert rep.B_at_zero < 1e-10

    def test_lambda_residue_density_formula(self):
        # gauged (0,1) entry: lam^-1 coefficient is t n b0 z^{n-2}/(z^n - 1);
        # it scales with the deformation parameter and never vanishes at
        # infinity once t != 0.
        params = perturbed_params(m=1, t=0.05, seed=9)
        G, dG = gauge_infinity(params)
        gauged = apply_gauge(lambda z: build_potential(params, z), G, dG)
        n, t = params.n, params.t
        b0 = params.b.coeff(0)
        for z in (1.9 + 0.3j, 0.5 + 1.4j):
            v = gauged(z).value
            got = v.entry(0, 1).coeff(-1)
            expect = t * n * b0 * z ** (n - 2) / (z ** n - 1)
            assert abs(got - expect) < 1e-10
            assert abs(got) > 1e-4

    def test_B_vanishes_identically_at_lam0(self):
        params = perturbed_params(m=1, t=0.02, seed=13)
        B = infinity_leading_coefficient(params)
        assert abs(B.coeff(0)) < 1e-14


class TestBranchGauge:
    def test_pole_cancellation_at_magic_t(self):
        # a^2 + bc = 1 holds exactly at the seed, so with t = 1/(2k+2) the
        # pulled-back gauged potential extends holomorphically to w = 0.
        k = 5
        params = PotentialParams.initial(1, N=8).with_t(1.0 / (2 * k + 2))
        for j in (0, 1):
            rep = local_branch_gauge(params, j, k)
            assert rep.pole_defect < 1e-11
            assert rep.gauge_det_defect < 1e-12

    def test_lambda_residue_nonzero(self):
        k = 5
        params = PotentialParams.initial(1, N=8).with_t(1.0 / (2 * k + 2))
        rep = local_branch_gauge(params, 0, k)
        assert abs(rep.lam_residue_12 - rep.expected_lam_residue) < 1e-9
        assert abs(rep.lam_residue_12) > 0.5

    def test_pole_defect_nonzero_off_condition(self):
        # break a^2 + bc = 1: the w^-2 pole should reappear
        k = 5
        base = PotentialParams.initial(1, N=8)
        params = PotentialParams(
            m=1, t=1.0 / (2 * k + 2), r=1.0,
            a=base.a, b=base.b,
            c=base.c + ScalarLoop.constant(0.15, base.c.trunc_degree))
        rep = local_branch_gauge(params, 0, k)
        assert rep.pole_defect > 1e-4

    def test_degenerate_gauge_detected(self):
        k = 3
        base = PotentialParams.initial(1, N=8)
        params = PotentialParams(
            m=1, t=1.0 / (2 * k + 2), r=1.0,
            a=base.a,
            b=base.b - ScalarLoop.constant(base.b.coeff(0), base.b.trunc_degree),
            c=base.c)
        with pytest.raises(DegenerateGauge):
            local_branch_gauge(params, 0, k)

    def test_validity_rate_reported(self):
        k = 5
        params = PotentialParams.initial(1, N=8).with_t(1.0 / (2 * k + 2))
        rep = local_branch_gauge(params, 0, k)
        # at the seed 1 - a = 1 - lam has its root exactly on the circle
        assert 0.9 < rep.validity_rate < 1.1


class TestSerialization:
    def test_round_trip(self):
        params = perturbed_params(m=2, t=0.01)
        text = params.to_json()
        back = PotentialParams.from_json(text)
        assert back.m == params.m and back.t == params.t and back.r == params.r
        for name in ("a", "b", "c"):
            assert np.array_equal(getattr(back, name).coeffs, getattr(params, name).coeffs)
