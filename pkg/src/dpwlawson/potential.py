"""The symmetric potential family on the (2m+2)-punctured plane.

The connection form is

    eta(z) = [[0, 0], [m r z^{m-1}, 0]] dz + t sum_j A_j(lam) dz / (z - p_j)

with punctures p_j = exp(2 pi i j / n), n = 2m+2, and residue matrices

    A_j = [[a_j, b_j / lam], [lam c_j, -a_j]],
    a_j(lam) = a((-1)^j lam),
    b_j(lam) = e^{2 pi i j / n} b((-1)^j lam),
    c_j(lam) = e^{-2 pi i j / n} c((-1)^j lam),

so the family is determined by one real scale r and three plus-loops a, b, c
with real coefficients.  Summing the geometric progressions of residues gives
closed forms in z^{m+1} which are what the evaluators below use; the naive
sum over punctures is retained as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .loops import MatrixLoop, ScalarLoop

GUARD_RADIUS = 0.05


class PotentialError(Exception):
    pass


class PunctureEvaluation(PotentialError):
    """Potential evaluated at (or too close to) a pole in z."""


class NonInvertibleGauge(PotentialError):
    pass


class DegenerateGauge(PotentialError):
    """Local gauge breaks down: b_j(0) = 0 or a_j(0) = 1 within tolerance."""


@dataclass(frozen=True)
class PotentialParams:
    """The unknowns (r, a, b, c) plus the deformation scale t and symmetry m."""

    m: int
    t: float
    r: float
    a: ScalarLoop
    b: ScalarLoop
    c: ScalarLoop

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        for name in ("a", "b", "c"):
            loop = getattr(self, name)
            if not loop.is_plus(1e-10):
                raise ValueError(f"{name} must have no negative Fourier modes")
            if not loop.is_real_coeff(1e-10):
                raise ValueError(f"{name} must have real coefficients")

    @property
    def n(self) -> int:
        return 2 * self.m + 2

    @property
    def rho(self) -> float:
        return self.a.rho

    def punctures(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.n) / self.n)

    def sym_conjugation(self) -> np.ndarray:
        """The constant diagonal D with A_{j+1}(lam) = D^-1 A_j(-lam) D."""
        phase = np.exp(1j * np.pi * self.m / self.n)
        return np.diag([phase, 1.0 / phase])

    @classmethod
    def initial(cls, m: int, N: int = 24, rho: float = 2.0) -> "PotentialParams":
        """The t = 0 seed: r = 1, a = lam, b = (lam^2 - 1)/2, c = -2."""
        return cls(
            m=m, t=0.0, r=1.0,
            a=ScalarLoop.monomial(1, 1.0, N, rho),
            b=ScalarLoop.from_dict({0: -0.5, 2: 0.5}, N, rho),
            c=ScalarLoop.constant(-2.0, N, rho),
        )

    def with_t(self, t: float) -> "PotentialParams":
        return PotentialParams(self.m, t, self.r, self.a, self.b, self.c)

    def residue_loops(self, j: int) -> tuple[ScalarLoop, ScalarLoop, ScalarLoop]:
        """(a_j, b_j, c_j) for the puncture p_j."""
        a, b, c = self.a, self.b, self.c
        if j % 2 == 1:
            a, b, c = a.parity_flip(), b.parity_flip(), c.parity_flip()
        phase = np.exp(2j * np.pi * j / self.n)
        return a, b * phase, c * np.conj(phase)

    def residue_matrix(self, j: int) -> MatrixLoop:
        """A_j(lam), the residue of eta/t at p_j."""
        aj, bj, cj = self.residue_loops(j)
        lam = ScalarLoop.monomial(1, 1.0, rho=self.rho)
        lam_inv = ScalarLoop.monomial(-1, 1.0, rho=self.rho)
        return MatrixLoop.from_entries(aj, lam_inv * bj, lam * cj, -aj)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "m": self.m, "t": self.t, "r": self.r,
            "a": self.a.to_json_dict(),
            "b": self.b.to_json_dict(),
            "c": self.c.to_json_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "PotentialParams":
        return cls(
            m=int(d["m"]), t=float(d["t"]), r=float(d["r"]),
            a=ScalarLoop.from_json_dict(d["a"]),
            b=ScalarLoop.from_json_dict(d["b"]),
            c=ScalarLoop.from_json_dict(d["c"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "PotentialParams":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class PotentialEvaluation:
    """eta/dz at a point, as a matrix loop."""

    value: MatrixLoop
    z: complex

    def shape_defect(self) -> float:
        """Deviation from the ansatz band structure: entry (0,1) only has
        modes k >= -1, entry (1,0) modes k >= 1 plus the constant, diagonal
        modes k >= 0."""
        v = self.value
        N = v.trunc_degree
        bad = 0.0
        for (i, j), kmin in (((0, 0), 0), ((1, 1), 0), ((0, 1), -1), ((1, 0), 0)):
            coeffs = v.entry(i, j).coeffs
            lo = N + kmin
            bad = max(bad, float(np.max(np.abs(coeffs[:lo]), initial=0.0)))
        return bad


def _pole_products(params: PotentialParams, z: complex,
                   znear: tuple[int, complex] | None = None) -> tuple[complex, complex]:
    """(z^{m+1} - 1, z^{m+1} + 1) in product form.

    When z sits exponentially close to a puncture the direct power loses all
    relative accuracy to cancellation; znear = (j, z - p_j) supplies the
    offset exactly and the corresponding factor is replaced by it.
    """
    n = params.n
    p = params.punctures()
    if znear is None:
        zm = z ** (params.m + 1)
        return zm - 1.0, zm + 1.0
    j, dz = znear
    minus = 1.0 + 0j
    plus = 1.0 + 0j
    for i in range(0, n, 2):
        minus *= dz + (p[j] - p[i]) if i != j else dz
    for i in range(1, n, 2):
        plus *= dz + (p[j] - p[i]) if i != j else dz
    return minus, plus


def build_potential(params: PotentialParams, z: complex,
                    method: str = "closed",
                    znear: tuple[int, complex] | None = None,
                    min_distance: float = 1e-12) -> PotentialEvaluation:
    """eta/dz at z as a matrix loop.

    method 'closed' uses the symmetric closed-form sums; 'direct' sums the
    residue matrices over the punctures (the independent cross-check).
    znear = (j, z - p_j) supplies the offset to a nearby puncture exactly,
    keeping relative accuracy when z approaches p_j.
    """
    p = params.punctures()
    if znear is None:
        dist = np.abs(z - p)
        if np.min(dist) < min_distance:
            raise PunctureEvaluation(f"z = {z} is within {min_distance} of a puncture")
    m, n, t, r = params.m, params.n, params.t, params.r
    rho = params.rho
    zero = ScalarLoop.zero(0, rho)
    lam_inv = ScalarLoop.monomial(-1, 1.0, rho=rho)
    lam = ScalarLoop.monomial(1, 1.0, rho=rho)

    if method == "direct":
        nilp = MatrixLoop.from_entries(zero, zero, ScalarLoop.constant(m * r * z ** (m - 1), 0, rho), zero)
        total = nilp
        for j in range(n):
            off = znear[1] if (znear is not None and j == znear[0]) else z - p[j]
            total = total + params.residue_matrix(j).scale(t / off)
        return PotentialEvaluation(value=total, z=z)

    if method != "closed":
        raise ValueError("method must be 'closed' or 'direct'")

    minus, plus = _pole_products(params, z, znear)
    a, b, c = params.a, params.b, params.c
    am, bm, cm = a.parity_flip(), b.parity_flip(), c.parity_flip()
    s11 = a * (t * n * z ** m / 2.0 / minus) + am * (t * n * z ** m / 2.0 / plus)
    s12 = lam_inv * (b * (t * n / 2.0 / minus) - bm * (t * n / 2.0 / plus))
    s21 = lam * (c * (t * n * z ** (m - 1) / 2.0 / minus) + cm * (t * n * z ** (m - 1) / 2.0 / plus))
    s21 = s21 + ScalarLoop.constant(m * r * z ** (m - 1), 0, rho)
    value = MatrixLoop.from_entries(s11, s12, s21, -s11)
    return PotentialEvaluation(value=value, z=z)


class PotentialGrid:
    """Vectorized evaluation of eta on a fixed lambda grid.

    Precomputes the loop values of (a, b, c) at +-lam for a batch of C
    parameter vectors; eta(z) then costs a handful of array operations and
    returns shape (C, L, 2, 2).  This is the hot path of the monodromy
    integrator and of the finite-difference Jacobian (all columns advance
    through the ODE together).
    """

    def __init__(self, params_list: list[PotentialParams], lam: np.ndarray):
        self.lam = np.asarray(lam, dtype=complex)
        L = self.lam.shape[0]
        C = len(params_list)
        p0 = params_list[0]
        self.m, self.n = p0.m, p0.n
        self.punctures = p0.punctures()
        self.t = np.array([p.t for p in params_list])
        self.r = np.array([p.r for p in params_list])

        def vals(loop_getter):
            out = np.empty((C, L), dtype=complex)
            for i, prm in enumerate(params_list):
                out[i] = loop_getter(prm).evaluate(self.lam)
            return out

        self.a_pos = vals(lambda p: p.a)
        self.a_neg = vals(lambda p: p.a.parity_flip())
        self.b_pos = vals(lambda p: p.b)
        self.b_neg = vals(lambda p: p.b.parity_flip())
        self.c_pos = vals(lambda p: p.c)
        self.c_neg = vals(lambda p: p.c.parity_flip())

    def eta(self, z: complex, znear: tuple[int, complex] | None = None) -> np.ndarray:
        """eta/dz at z: array (C, L, 2, 2)."""
        m, n = self.m, self.n
        if znear is None:
            zm1 = z ** (m + 1)
            minus, plus = zm1 - 1.0, zm1 + 1.0
        else:
            j, dz = znear
            minus = plus = 1.0 + 0j
            for i in range(0, n, 2):
                minus *= dz if i == j else (z - self.punctures[i])
            for i in range(1, n, 2):
                plus *= dz if i == j else (z - self.punctures[i])
        t = self.t[:, None]
        r = self.r[:, None]
        lam = self.lam[None, :]
        half_n = 0.5 * n
        s11 = t * half_n * z ** m * (self.a_pos / minus + self.a_neg / plus)
        s12 = t * half_n / lam * (self.b_pos / minus - self.b_neg / plus)
        s21 = t * half_n * z ** (m - 1) * lam * (self.c_pos / minus + self.c_neg / plus) \
            + m * r * z ** (m - 1)
        C, L = s11.shape
        out = np.empty((C, L, 2, 2), dtype=complex)
        out[..., 0, 0] = s11
        out[..., 0, 1] = s12
        out[..., 1, 0] = s21
        out[..., 1, 1] = -s11
        return out

    def eta_points(self, zs: np.ndarray,
                   znear: tuple[int, np.ndarray] | None = None) -> np.ndarray:
        """eta/dz at a vector of points (single parameter set): (Z, L, 2, 2)."""
        if len(self.t) != 1:
            raise ValueError("eta_points expects a single-parameter grid")
        m, n = self.m, self.n
        zs = np.asarray(zs, dtype=complex)
        if znear is None:
            zm1 = zs ** (m + 1)
            minus, plus = zm1 - 1.0, zm1 + 1.0
        else:
            j, dz = znear
            minus = np.ones_like(zs)
            plus = np.ones_like(zs)
            for i in range(0, n, 2):
                minus = minus * (dz if i == j else zs - self.punctures[i])
            for i in range(1, n, 2):
                plus = plus * (dz if i == j else zs - self.punctures[i])
        t, r = self.t[0], self.r[0]
        lam = self.lam[None, :]
        zc = zs[:, None]
        mc, pc = minus[:, None], plus[:, None]
        half_n = 0.5 * n
        s11 = t * half_n * zc ** m * (self.a_pos[0] / mc + self.a_neg[0] / pc)
        s12 = t * half_n / lam * (self.b_pos[0] / mc - self.b_neg[0] / pc)
        s21 = t * half_n * zc ** (m - 1) * lam * (self.c_pos[0] / mc + self.c_neg[0] / pc) \
            + m * r * zc ** (m - 1)
        Z, L = s11.shape
        out = np.empty((Z, L, 2, 2), dtype=complex)
        out[..., 0, 0] = s11
        out[..., 0, 1] = s12
        out[..., 1, 0] = s21
        out[..., 1, 1] = -s11
        return out


# -- gauge machinery ---------------------------------------------------------


def apply_gauge(eta_fn, gauge_fn, dgauge_fn=None, step: float = 1e-4):
    """Gauge a potential-as-function: z -> G^-1 eta G + G^-1 dG/dz.

    eta_fn and gauge_fn map z to MatrixLoop; pass dgauge_fn when the z
    derivative is known in closed form, otherwise a 6th-order central
    difference with the given step is used.
    """

    def dG_numeric(z):
        acc = None
        for k, w in ((1, 45.0), (2, -9.0), (3, 1.0)):
            term = (gauge_fn(z + k * step) - gauge_fn(z - k * step)).scale(w / (60.0 * step))
            acc = term if acc is None else acc + term
        return acc

    dfn = dgauge_fn if dgauge_fn is not None else dG_numeric

    def gauged(z):
        G = gauge_fn(z)
        det = G.det()
        Ld = max(2 * det.trunc_degree + 2, 8)
        det_vals = det.samples(Ld + Ld % 2)
        if np.min(np.abs(det_vals)) < 1e-12:
            raise NonInvertibleGauge(f"gauge is singular at z = {z}")
        Ginv = G.inverse(N=G.trunc_degree + eta_fn(z).value.trunc_degree + 4)
        eta = eta_fn(z).value
        out = (Ginv @ eta @ G) + (Ginv @ dfn(z))
        return PotentialEvaluation(value=out, z=z)

    return gauged


def gauge_zero(params: PotentialParams):
    """The z^{+-m} shear removing the nilpotent term at infinity (t = 0)."""
    rho = params.rho
    m, r = params.m, params.r

    def G(z):
        return MatrixLoop.from_entries(
            ScalarLoop.constant(z ** -m, 0, rho),
            ScalarLoop.constant(-1.0 / r, 0, rho),
            ScalarLoop.zero(0, rho),
            ScalarLoop.constant(z ** m, 0, rho))

    def dG(z):
        return MatrixLoop.from_entries(
            ScalarLoop.constant(-m * z ** (-m - 1), 0, rho),
            ScalarLoop.zero(0, rho),
            ScalarLoop.zero(0, rho),
            ScalarLoop.constant(m * z ** (m - 1), 0, rho))

    return G, dG


def infinity_gauge_s(params: PotentialParams) -> ScalarLoop:
    """s = (t/m) * sum_j a_j = (t n / 2m) (a(lam) + a(-lam))."""
    fac = params.t * params.n / (2.0 * params.m)
    return (params.a + params.a.parity_flip()) * fac


def gauge_infinity(params: PotentialParams):
    """G_s(z) = [[z^-m, (s-1)/r], [0, z^m]] and its z derivative."""
    rho = params.rho
    m, r = params.m, params.r
    s = infinity_gauge_s(params)
    off = (s - ScalarLoop.one(0, rho)) * (1.0 / r)

    def G(z):
        return MatrixLoop.from_entries(
            ScalarLoop.constant(z ** -m, 0, rho), off,
            ScalarLoop.zero(0, rho), ScalarLoop.constant(z ** m, 0, rho))

    def dG(z):
        return MatrixLoop.from_entries(
            ScalarLoop.constant(-m * z ** (-m - 1), 0, rho),
            ScalarLoop.zero(0, rho),
            ScalarLoop.zero(0, rho),
            ScalarLoop.constant(m * z ** (m - 1), 0, rho))

    return G, dG


def infinity_leading_coefficient(params: PotentialParams) -> ScalarLoop:
    """Closed form of the lam^-1 B(lam) series multiplying dw/w^{m+1} in the
    gauged (0,1) entry at infinity; vanishing of B at lam = 0 is structural,
    vanishing of all of B happens at solved parameters."""
    m, n, t, r = params.m, params.n, params.t, params.r
    rho = params.rho
    s = infinity_gauge_s(params)
    one = ScalarLoop.one(0, rho)
    a_sum = params.a + params.a.parity_flip()
    b_diff = params.b - params.b.parity_flip()
    lam = ScalarLoop.monomial(1, 1.0, rho=rho)
    term1 = lam * s * (one - s) * (-m / r)
    term2 = lam * (s - one) * a_sum * (-t * n / r)
    term3 = b_diff * (-t * n / 2.0)
    return term1 + term2 + term3


@dataclass(frozen=True)
class InfinityGaugeReport:
    eta_w: object                 # callable u -> PotentialEvaluation in the u = 1/z chart
    pole_11: float                # max |coefficient| of u^{-k}, k >= 1, entry (0,0)
    pole_21: float                # same for entry (1,0)
    B_series: ScalarLoop          # numeric lam-series scaling the leading (0,1) pole
    B_closed: ScalarLoop          # closed-form counterpart
    B_at_zero: float


def gauge_at_infinity(params: PotentialParams, sample_radius: float = 0.35,
                      n_samples: int = 64) -> InfinityGaugeReport:
    """Gauge by G_s, pull back by u = 1/z and report the singular content."""
    G, dG = gauge_infinity(params)
    eta_fn = lambda z: build_potential(params, z)
    gauged = apply_gauge(eta_fn, G, dG)

    def eta_w(u):
        if u == 0:
            raise PunctureEvaluation("use the Laurent data for the value at u = 0")
        ev = gauged(1.0 / u)
        return PotentialEvaluation(value=ev.value.scale(-1.0 / u ** 2), z=u)

    # Laurent data from a circle of samples in the u chart
    us = sample_radius * np.exp(2j * np.pi * np.arange(n_samples) / n_samples)
    vals = np.stack([eta_w(u).value.coeffs for u in us])    # (S, 2N+1, 2, 2)
    # FFT over the circle gives coefficients of u^k weighted by radius^k
    fhat = np.fft.fft(vals, axis=0) / n_samples
    m = params.m
    max_pole = m + 3

    def u_coeff(k):
        idx = k % n_samples
        return fhat[idx] / sample_radius ** k

    pole_11 = max(float(np.max(np.abs(u_coeff(-k)[..., 0, 0]))) for k in range(1, max_pole))
    pole_21 = max(float(np.max(np.abs(u_coeff(-k)[..., 1, 0]))) for k in range(1, max_pole))

    lead = u_coeff(-(m + 1))[..., 0, 1]     # lam-coefficients of the u^{-(m+1)} pole
    N = (lead.shape[0] - 1) // 2
    B_num = ScalarLoop(lead, params.rho)
    lam = ScalarLoop.monomial(1, 1.0, rho=params.rho)
    B_num = (lam * B_num).truncate(N, None)
    B_closed = infinity_leading_coefficient(params)
    return InfinityGaugeReport(
        eta_w=eta_w,
        pole_11=pole_11,
        pole_21=pole_21,
        B_series=B_num,
        B_closed=B_closed,
        B_at_zero=abs(B_num.coeff(0)),
    )


# -- local branch gauge -------------------------------------------------------


def circle_coeff(samples: np.ndarray, k: int, radius: float) -> np.ndarray:
    """Fourier coefficient of lam^k from samples on a radius-r circle grid."""
    L = samples.shape[0]
    lam = radius * np.exp(2j * np.pi * np.arange(L) / L)
    weights = lam ** (-k) / L
    return np.tensordot(weights, samples, axes=(0, 0))


def branch_gauge_pointwise(params: PotentialParams, j: int, lam: np.ndarray):
    """C(lam) = [[q, 0], [lam, 1/q]] and its inverse, evaluated pointwise.

    q = b_j/(1 - a_j) has poles where a_j = 1; near the seed those sit next
    to lam = +-1, so series representations fail and everything downstream
    works with pointwise values on a grid avoiding +-1.
    """
    aj, bj, _ = params.residue_loops(j)
    a0, b0 = aj.coeff(0), bj.coeff(0)
    if abs(b0) < 1e-9 or abs(1.0 - a0) < 1e-9:
        raise DegenerateGauge(f"b_j(0) = {b0}, a_j(0) = {a0}")
    av, bv = aj.evaluate(lam), bj.evaluate(lam)
    denom = 1.0 - av
    if np.min(np.abs(denom)) < 1e-10 or np.min(np.abs(bv)) < 1e-10:
        raise DegenerateGauge("gauge factor degenerates on the sample grid")
    q = bv / denom
    L = lam.shape[0]
    C = np.zeros((L, 2, 2), dtype=complex)
    C[:, 0, 0] = q
    C[:, 1, 0] = lam
    C[:, 1, 1] = 1.0 / q
    Cinv = np.zeros_like(C)
    Cinv[:, 0, 0] = 1.0 / q
    Cinv[:, 1, 0] = -lam
    Cinv[:, 1, 1] = q
    return C, Cinv


def branch_gauge_validity(params: PotentialParams, j: int) -> float:
    """1 / min |root| over roots of 1 - a_j: the reciprocal lam-radius on
    which the gauge factor stays holomorphic.  Values near or above 1 flag
    that the gauge only lives on a sub-annulus."""
    aj, _, _ = params.residue_loops(j)
    N = aj.trunc_degree
    poly = -aj.coeffs[N:]
    poly = poly.copy()
    poly[0] += 1.0
    nz = np.nonzero(np.abs(poly) > 1e-13)[0]
    if len(nz) <= 1:
        return 0.0
    poly = poly[: nz[-1] + 1]
    roots = np.roots(poly[::-1])
    if len(roots) == 0:
        return 0.0
    return float(1.0 / np.min(np.abs(roots)))


@dataclass(frozen=True)
class BranchGaugeReport:
    eta_w: object            # callable w -> (L, 2, 2) values on the lam grid
    lam_grid: np.ndarray
    pole_defect: float       # max |coefficient| of w^{-k}, k >= 1, all entries
    lam_residue_12: complex  # lam^-1 coefficient of the (0,1) entry at w = 0
    expected_lam_residue: complex
    gauge_det_defect: float
    validity_rate: float


def local_branch_gauge(params: PotentialParams, j: int, k: int,
                       sample_radius: float = 0.5,
                       n_samples: int = 64,
                       lam_samples: int = 64,
                       lam_radius: float = 0.6) -> BranchGaugeReport:
    """Pull back to the branched chart w^{k+1} = z - p_j and gauge away the
    residue.

    The gauge itself lives on a double cover of the w-disc (square root),
    but conjugation by diag(w^-1/2, w^1/2) shifts entries by integer powers
    of w, so the gauged potential is single valued in w and its Laurent data
    can be read off a full circle of samples.  The lam sampling sits on an
    interior circle: the gauge factor q = b_j/(1-a_j) has poles pinching
    lam = +-1 near the deformation seed, so the relevant expansion is the
    one at lam = 0 on a sub-annulus.
    """
    lam = lam_radius * np.exp(2j * np.pi * np.arange(lam_samples) / lam_samples)
    C, Cinv = branch_gauge_pointwise(params, j, lam)
    grid = PotentialGrid([params], lam)
    p = params.punctures()[j]
    kp1 = k + 1

    def eta_w(w):
        dz = w ** kp1
        z = p + dz
        ev = grid.eta(z, znear=(j, dz))[0]         # (L, 2, 2)
        pulled = ev * (kp1 * w ** (kp1 - 1))
        inner = np.einsum("lab,lbc,lcd->lad", Cinv, pulled, C)
        inner[:, 0, 1] *= w
        inner[:, 1, 0] /= w
        inner[:, 0, 0] -= 0.5 / w
        inner[:, 1, 1] += 0.5 / w
        return inner

    ws = sample_radius * np.exp(2j * np.pi * np.arange(n_samples) / n_samples)
    vals = np.stack([eta_w(w) for w in ws])        # (S, L, 2, 2)
    fhat = np.fft.fft(vals, axis=0) / n_samples

    def w_coeff(kk):
        return fhat[kk % n_samples] / sample_radius ** kk

    pole_defect = max(float(np.max(np.abs(w_coeff(-kk)))) for kk in (1, 2, 3))
    w0_12 = w_coeff(0)[:, 0, 1]
    lam_residue_12 = complex(circle_coeff(w0_12, -1, lam_radius))

    aj, bj, _ = params.residue_loops(j)
    expected = (aj.coeff(0) - 1.0) ** 2 / (2.0 * bj.coeff(0))

    det_defect = float(np.max(np.abs(C[:, 0, 0] * C[:, 1, 1] - 1.0)))
    return BranchGaugeReport(
        eta_w=eta_w,
        lam_grid=lam,
        pole_defect=pole_defect,
        lam_residue_12=lam_residue_12,
        expected_lam_residue=complex(expected),
        gauge_det_defect=det_defect,
        validity_rate=branch_gauge_validity(params, j),
    )
