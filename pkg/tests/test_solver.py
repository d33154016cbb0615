import math

import numpy as np
import pytest

from dpwlawson.potential import PotentialParams
from dpwlawson.solver import (
    SolveOptions,
    certify_solution,
    continuation_solve,
    derivative_check,
    jacobian_fd,
    kappa,
    pack_unknowns,
    residual_vector,
    solve_at_t,
    tangent_at_seed,
    unpack_unknowns,
    ContinuationTrace,
)

KAPPA_CLOSED = {
    1: math.log(2),
    2: 1.5 * math.log(3),
    3: 2 * math.log(2) + math.sqrt(2) * math.log(1 + math.sqrt(2)),
    4: 1.25 * math.log(5) + 0.5 * math.sqrt(5) * math.log(2 + math.sqrt(5)),
    5: math.log(2) + 1.5 * math.log(3) + math.sqrt(3) * math.log(2 + math.sqrt(3)),
}

FAST = SolveOptions(N=12, L=48)


class TestKappa:
    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
    def test_closed_forms(self, m):
        assert abs(kappa(m) - KAPPA_CLOSED[m]) < 1e-12

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            kappa(0)


class TestPacking:
    def test_round_trip(self):
        params = PotentialParams.initial(2, N=10)
        vec = pack_unknowns(params)
        assert vec.shape == (3 * 11 + 1,)
        back = unpack_unknowns(vec, params)
        for name in ("a", "b", "c"):
            assert np.array_equal(getattr(back, name).coeffs,
                                  getattr(params, name).coeffs)
        assert back.r == params.r


class TestResidualSystem:
    def test_zero_at_seed(self):
        params = PotentialParams.initial(1, FAST.N)
        vec = pack_unknowns(params)
        R = residual_vector(1, 0.0, vec, FAST)
        assert R.shape == vec.shape
        assert np.max(np.abs(R)) < 1e-9

    def test_jacobian_structure_at_seed(self):
        """Probe the derivative in the split directions; the raw-coefficient
        Jacobian must reproduce the constant block pattern
        (F+, G+, (G-)*) x (a+, b~+, lam c) = [[1,-1,0],[2,-1,1],[0,-1,0]]."""
        opts = FAST
        N = opts.N
        vec = pack_unknowns(PotentialParams.initial(1, N))
        J, _ = jacobian_fd(1, 0.0, vec, opts)
        k1 = N + 1

        def rows(block, j):
            # residual layout: F+ (N), G+ (N), (G-)* (N), G0, H1, H2, K-1
            return J[block * N + (j - 1), :]

        for j in (1, 2, 5):
            col_a = J[:, j]                # da = lam^j
            col_b = J[:, k1 + j + 1]       # db = lam^{j+1}, i.e. db~ = lam^j
            col_c = J[:, 2 * k1 + j - 1]   # dc = lam^{j-1}, i.e. d(lam c) = lam^j
            e = np.zeros(N)
            e[j - 1] = 1.0
            for col, (fF, fG, fGm) in ((col_a, (1, 2, 0)),
                                       (col_b, (-1, -1, -1)),
                                       (col_c, (0, 1, 0))):
                assert np.max(np.abs(col[0:N] - fF * e)) < 1e-5
                assert np.max(np.abs(col[N:2 * N] - fG * e)) < 1e-5
                assert np.max(np.abs(col[2 * N:3 * N] - fGm * e)) < 1e-5

    def test_jacobian_scalar_rows_at_seed(self):
        opts = FAST
        N = opts.N
        vec = pack_unknowns(PotentialParams.initial(1, N))
        J, _ = jacobian_fd(1, 0.0, vec, opts)
        k1 = N + 1
        iG0, iH1, iH2, iK = 3 * N, 3 * N + 1, 3 * N + 2, 3 * N + 3
        # d G0 = 2 da0 - 2 db1
        assert abs(J[iG0, 0] - 2.0) < 1e-5
        assert abs(J[iG0, k1 + 1] + 2.0) < 1e-5
        # d H1 = db(1), d H2 = -db(-1)
        assert abs(J[iH1, k1 + 0] - 1.0) < 1e-5      # b0
        assert abs(J[iH2, k1 + 0] + 1.0) < 1e-5
        assert abs(J[iH1, k1 + 1] - 1.0) < 1e-5      # b1
        assert abs(J[iH2, k1 + 1] - 1.0) < 1e-5
        # d K = c0 db0 + b0 dc0 at the seed (a0 = 0)
        assert abs(J[iK, k1] + 2.0) < 1e-5
        assert abs(J[iK, 2 * k1] + 0.5) < 1e-5
        # r rows: dF+ = -lam dr, dG+ = +lam dr, (dG-)* = +lam dr
        assert abs(J[0, -1] + 1.0) < 1e-5
        assert abs(J[N, -1] - 1.0) < 1e-5
        assert abs(J[2 * N, -1] - 1.0) < 1e-5

    def test_jacobian_rank(self):
        # square system with exactly one structurally decoupled direction
        # (top coefficient of c leaves the truncated residual band)
        vec = pack_unknowns(PotentialParams.initial(1, FAST.N))
        J, _ = jacobian_fd(1, 0.0, vec, FAST)
        sva = np.linalg.svd(J, compute_uv=False)
        assert sva[-2] > 1e-6 * sva[0]
        assert sva[0] / sva[-2] < 1e7


class TestNewton:
    def test_t0_returns_seed(self):
        x0 = pack_unknowns(PotentialParams.initial(1, FAST.N))
        res = solve_at_t(1, 0.0, x0, FAST)
        assert res.converged
        assert res.iterations == 0
        assert np.array_equal(pack_unknowns(res.params), x0)

    def test_small_t_converges_fast(self):
        x0 = pack_unknowns(PotentialParams.initial(1, FAST.N))
        t = 0.01
        guess = x0 + t * tangent_at_seed(1, FAST.N)
        res = solve_at_t(1, t, guess, FAST)
        assert res.converged
        assert res.iterations <= 5
        assert res.residual_norm <= 1e-10

    def test_solved_state_is_fixed_point(self):
        x0 = pack_unknowns(PotentialParams.initial(1, FAST.N))
        t = 0.02
        res = solve_at_t(1, t, x0 + t * tangent_at_seed(1, FAST.N), FAST)
        res2 = solve_at_t(1, t, pack_unknowns(res.params), FAST)
        assert res2.iterations == 0
        move = np.max(np.abs(pack_unknowns(res2.params) - pack_unknowns(res.params)))
        assert move <= 1e-12

    def test_basin_uniqueness(self, rng):
        t = 0.02
        x0 = pack_unknowns(PotentialParams.initial(1, FAST.N))
        res = solve_at_t(1, t, x0 + t * tangent_at_seed(1, FAST.N), FAST)
        sol = pack_unknowns(res.params)
        bumped = sol + 1e-4 * rng.standard_normal(sol.shape)
        res2 = solve_at_t(1, t, bumped, FAST)
        assert np.max(np.abs(pack_unknowns(res2.params) - sol)) < 1e-9

    def test_time_parity(self):
        t = 0.015
        x0 = pack_unknowns(PotentialParams.initial(1, FAST.N))
        tang = tangent_at_seed(1, FAST.N)
        plus = solve_at_t(1, t, x0 + t * tang, FAST).params
        minus = solve_at_t(1, -t, x0 - t * tang, FAST).params
        # a(-t)(lam) = -a(t)(-lam); b, c flip lam only; r equal
        N = FAST.N
        signs = (-1.0) ** np.abs(np.arange(-N, N + 1))
        assert np.max(np.abs(minus.a.coeffs + signs * plus.a.coeffs)) < 1e-9
        assert np.max(np.abs(minus.b.coeffs - signs * plus.b.coeffs)) < 1e-9
        assert np.max(np.abs(minus.c.coeffs - signs * plus.c.coeffs)) < 1e-9
        assert abs(minus.r - plus.r) < 1e-9

    def test_a0_over_t_approaches_kappa(self):
        t = 1e-3
        x0 = pack_unknowns(PotentialParams.initial(1, FAST.N))
        res = solve_at_t(1, t, x0 + t * tangent_at_seed(1, FAST.N), FAST)
        assert abs(res.params.a.coeff(0).real / t - kappa(1)) < 1e-4


class TestContinuation:
    def test_k10_certificates(self, solve_cache):
        res = solve_cache.solved(1, 10)
        assert res.residual_norm <= 1e-10
        cert = certify_solution(res.params, 10)
        assert cert["residual_inf"] <= 1e-10
        assert cert["det_A0_defect"] <= 1e-9
        assert cert["sym_point_defect"] <= 1e-8
        assert cert["transport_defect"] <= 1e-8
        assert cert["eigen_defect"] <= 1e-7

    def test_trace_csv(self):
        opts = SolveOptions(N=10, L=40)
        trace = ContinuationTrace()
        continuation_solve(1, 10, opts, trace)
        text = trace.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "t,residual,a0,r,iterations"
        assert len(lines) >= 3


class TestDerivatives:
    def test_derivative_reproduction_m1(self):
        rep = derivative_check(1, t0=1e-3, opts=SolveOptions(N=12, L=48))
        assert rep.max_deviation < 1e-5
        assert rep.deviation_c < 1e-6
        assert rep.deviation_r < 1e-6
        assert rep.parity_defect < 1e-9
