"""Monodromy of the flat connection d + eta along puncture loops.

For each spectral parameter sample the frame solves the linear system
d Phi = Phi eta(z) dz along a path from the base point z = 0 (where
Phi = Id).  The loop around p_j yields M_j(t); the normalized logarithm
Mtilde = (1/t) log M extends to t = 0 and feeds the residual functionals
whose zeros characterize unitary monodromy with diagonal values at the
evaluation points lam = +-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loops import MatrixLoop, ScalarLoop, grid_points
from .potential import PotentialGrid, PotentialParams


class MonodromyError(Exception):
    pass


class StepSizeUnderflow(MonodromyError):
    pass


class ToleranceNotMet(MonodromyError):
    pass


class LogBranchAmbiguity(MonodromyError):
    """Eigenvalues of M approach -1; the principal log is unreliable."""


# -- paths --------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    z0: complex
    z1: complex

    def point(self, s: float) -> complex:
        return self.z0 + (self.z1 - self.z0) * s

    def velocity(self, s: float) -> complex:
        return self.z1 - self.z0


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    angle0: float
    angle1: float

    def point(self, s: float) -> complex:
        ang = self.angle0 + (self.angle1 - self.angle0) * s
        return self.center + self.radius * np.exp(1j * ang)

    def velocity(self, s: float) -> complex:
        ang = self.angle0 + (self.angle1 - self.angle0) * s
        return self.radius * np.exp(1j * ang) * 1j * (self.angle1 - self.angle0)


@dataclass(frozen=True)
class PathSpec:
    """Loop around puncture j: out from the base point, once around
    counterclockwise, and back."""

    puncture: int
    standoff: float | None = None
    base: complex = 0.0
    orientation: int = 1     # +1 counterclockwise

    def standoff_for(self, n: int) -> float:
        if self.standoff is not None:
            return self.standoff
        return 0.5 if n <= 8 else float(np.sin(np.pi / n))

    def pieces(self, n: int) -> list:
        p = np.exp(2j * np.pi * self.puncture / n)
        delta = self.standoff_for(n)
        approach = p * (1.0 - delta)
        theta = float(np.angle(p)) + np.pi          # points back toward 0
        sweep = 2.0 * np.pi * self.orientation
        return [
            Segment(self.base, approach),
            Arc(p, delta, theta, theta + sweep),
            Segment(approach, self.base),
        ]

    def min_puncture_distance(self, n: int, samples: int = 200) -> float:
        punct = np.exp(2j * np.pi * np.arange(n) / n)
        d = np.inf
        for piece in self.pieces(n):
            s = np.linspace(0.0, 1.0, samples)
            zs = np.array([piece.point(x) for x in s])
            d = min(d, float(np.min(np.abs(zs[:, None] - punct[None, :]))))
        return d


# -- batched embedded Runge-Kutta ----------------------------------------------

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def integrate_linear(rhs, Y0: np.ndarray, rtol: float = 1e-11,
                     atol: float = 1e-13, h0: float = 0.05,
                     max_steps: int = 200_000) -> np.ndarray:
    """Advance dY/ds = Y @ rhs(s) from s=0 to s=1 for a batch Y of shape
    (..., 2, 2); the step sequence is shared across the batch (errors are
    maxed), which makes finite differences of nearby solutions nearly
    noise-free."""
    Y = np.array(Y0, dtype=complex)
    s = 0.0
    h = min(h0, 1.0)
    k = [None] * 7
    k[0] = Y @ rhs(0.0)
    steps = 0
    while s < 1.0 - 1e-15:
        h = min(h, 1.0 - s)
        if h < 1e-14:
            raise StepSizeUnderflow(f"step size underflow at s = {s}")
        for i in range(1, 7):
            Yi = Y + h * sum(_DP_A[i][j] * k[j] for j in range(i))
            k[i] = Yi @ rhs(s + _DP_C[i] * h)
        Y5 = Y + h * sum(_DP_B5[i] * k[i] for i in range(7))
        err_arr = h * sum((_DP_B5[i] - _DP_B4[i]) * k[i] for i in range(7))
        scale = atol + rtol * np.abs(Y5)
        err = float(np.max(np.abs(err_arr) / scale))
        if err <= 1.0:
            s += h
            Y = Y5
            k[0] = k[6]     # FSAL
        else:
            k[0] = Y @ rhs(s)
        h *= float(np.clip(0.9 * (max(err, 1e-16)) ** -0.2, 0.2, 5.0))
        steps += 1
        if steps > max_steps:
            raise ToleranceNotMet(f"no convergence within {max_steps} steps")
    return Y


def transport(grid: PotentialGrid, pieces: list, Y0: np.ndarray,
              rtol: float = 1e-11, renormalize_det: bool = True) -> np.ndarray:
    """Parallel transport the batch Y0 (C, L, 2, 2) along the path pieces."""
    Y = np.array(Y0, dtype=complex)
    for piece in pieces:
        def rhs(s, piece=piece):
            return grid.eta(piece.point(s)) * piece.velocity(s)
        Y = integrate_linear(rhs, Y, rtol=rtol, atol=rtol * 1e-2)
        if renormalize_det:
            det = Y[..., 0, 0] * Y[..., 1, 1] - Y[..., 0, 1] * Y[..., 1, 0]
            Y = Y / np.sqrt(det)[..., None, None]
    return Y


def integrate_phi(params: PotentialParams, pieces: list, lam: np.ndarray,
                  rtol: float = 1e-11, Y0: np.ndarray | None = None) -> np.ndarray:
    """Frame at the end of the path, shape (L, 2, 2); starts from Id."""
    grid = PotentialGrid([params], np.asarray(lam))
    L = len(lam)
    if Y0 is None:
        Y0 = np.broadcast_to(np.eye(2, dtype=complex), (1, L, 2, 2))
    else:
        Y0 = np.asarray(Y0, dtype=complex)[None]
    return transport(grid, pieces, Y0, rtol=rtol)[0]


def monodromy_samples(params_list: list[PotentialParams], lam: np.ndarray,
                      j: int = 0, rtol: float = 1e-11,
                      standoff: float | None = None) -> np.ndarray:
    """Monodromy matrices around p_j on the lam grid for a batch of
    parameter vectors sharing (m, lam); shape (C, L, 2, 2)."""
    n = params_list[0].n
    pieces = PathSpec(j, standoff).pieces(n)
    grid = PotentialGrid(params_list, np.asarray(lam))
    L = len(lam)
    Y0 = np.broadcast_to(np.eye(2, dtype=complex), (len(params_list), L, 2, 2))
    return transport(grid, pieces, Y0, rtol=rtol)


# -- matrix logarithm ----------------------------------------------------------


def log_sl2(M: np.ndarray, branch_guard: float = 0.15) -> tuple[np.ndarray, bool]:
    """Principal logarithm of det-1 matrices, batched.

    Writes M = cosh(xi) Id + sinh(xi)/xi * X with tr X = 0; log M = X.
    Returns (log, flagged) where flagged reports eigenvalues near -1 (the
    branch boundary of the principal log).
    """
    tau = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    flagged = bool(np.any(np.abs(tau + 1.0) < branch_guard))
    xi = np.arccosh(tau + 0j)
    small = np.abs(xi) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(small, 1.0 + xi ** 2 / 6.0 + 7.0 * xi ** 4 / 360.0,
                       xi / np.sinh(np.where(small, 1.0, xi)))
    dev = M - tau[..., None, None] * np.eye(2)
    return fac[..., None, None] * dev, flagged


# -- normalized log and the record ----------------------------------------------


def mtilde_samples_batch(params_list: list[PotentialParams], lam: np.ndarray,
                         j: int = 0, rtol: float = 1e-11,
                         eps0: float = 3e-4,
                         standoff: float | None = None) -> tuple[np.ndarray, np.ndarray, bool]:
    """(M, Mtilde) samples for a batch of parameter vectors with a common t.

    t != 0: Mtilde = (1/t) log M per sample (principal branch).
    t == 0: Mtilde = M'(0) by central differences at eps0, eps0/2 with one
    Richardson stage; the four shifted integrations ride in one batch so
    they share the adaptive step sequence and their errors cancel in the
    differences.
    """
    t = params_list[0].t
    C = len(params_list)
    if abs(t) > 1e-12:
        M = monodromy_samples(params_list, lam, j, rtol, standoff)
        logs, flagged = log_sl2(M)
        return M, logs / t, flagged
    shifted = []
    for prm in params_list:
        shifted.extend([prm, prm.with_t(eps0), prm.with_t(-eps0),
                        prm.with_t(eps0 / 2), prm.with_t(-eps0 / 2)])
    Ms = monodromy_samples(shifted, lam, j, rtol, standoff)
    Ms = Ms.reshape(C, 5, *Ms.shape[1:])
    D1 = (Ms[:, 1] - Ms[:, 2]) / (2 * eps0)
    D2 = (Ms[:, 3] - Ms[:, 4]) / eps0
    Mt = (4.0 * D2 - D1) / 3.0
    return Ms[:, 0], Mt, False


@dataclass(frozen=True)
class ResidualBundle:
    """The obstruction functionals of the unitary-monodromy problem."""

    F: ScalarLoop          # (Mt_11 + Mt_11*) / 2 pi i  -- unitarity, diagonal
    G: ScalarLoop          # (Mt_21 + Mt_12*) / 2 pi i  -- unitarity, off-diag
    H1: float              # Mt_12 at lam = +1 / 2 pi i -- diagonal value
    H2: float              # Mt_12 at lam = -1 / 2 pi i
    K_minus_1: float       # (a0)^2 + b0 c0 - 1         -- normalization
    reality_defect: float  # largest imaginary part that should vanish

    def flatten(self, N: int) -> np.ndarray:
        """Square-system flattening: (F+, G+, (G-)*, G0, H1, H2, K-1)."""
        Fp = self.F.coeffs.real[self.F.trunc_degree + 1:][:N]
        Gp = self.G.coeffs.real[self.G.trunc_degree + 1:][:N]
        Gm_star = self.G.star().coeffs.real[self.G.trunc_degree + 1:][:N]
        if len(Fp) < N or len(Gp) < N:
            raise ValueError("residual loops shorter than requested degree")
        G0 = self.G.coeff(0).real
        return np.concatenate([Fp, Gp, Gm_star,
                               [G0, self.H1, self.H2, self.K_minus_1]])


@dataclass(frozen=True)
class MonodromyRecord:
    M: MatrixLoop
    Mtilde: MatrixLoop
    t: float
    params: PotentialParams
    lam: np.ndarray
    M_samples: np.ndarray
    Mt_samples: np.ndarray
    residuals: ResidualBundle
    branch_flagged: bool
    det_defect: float
    reality_defect: float

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "params": self.params.to_json_dict(),
            "M": self.M.to_json_dict(),
            "Mtilde": self.Mtilde.to_json_dict(),
            "H1": self.residuals.H1,
            "H2": self.residuals.H2,
            "K_minus_1": self.residuals.K_minus_1,
            "branch_flagged": self.branch_flagged,
            "det_defect": self.det_defect,
            "reality_defect": self.reality_defect,
        }


def residual_bundle(params: PotentialParams, Mt_samples: np.ndarray,
                    lam: np.ndarray, N: int | None = None) -> ResidualBundle:
    """Assemble the obstruction functionals from Mtilde samples on an even
    uniform grid containing lam = +-1 (indices 0 and L/2)."""
    L = len(lam)
    if N is None:
        N = params.a.trunc_degree
    two_pi_i = 2j * np.pi
    rho = params.rho
    Mt11 = ScalarLoop.from_samples(Mt_samples[:, 0, 0], N, rho)
    Mt12 = ScalarLoop.from_samples(Mt_samples[:, 0, 1], N, rho)
    Mt21 = ScalarLoop.from_samples(Mt_samples[:, 1, 0], N, rho)

    F = (Mt11 + Mt11.star()) * (1.0 / two_pi_i)
    G = (Mt21 + Mt12.star()) * (1.0 / two_pi_i)
    h1 = Mt_samples[0, 0, 1] / two_pi_i
    h2 = Mt_samples[L // 2, 0, 1] / two_pi_i

    a0 = params.a.coeff(0).real
    b0 = params.b.coeff(0).real
    c0 = params.c.coeff(0).real

    reality = max(
        float(np.max(np.abs(F.coeffs.imag))),
        float(np.max(np.abs(G.coeffs.imag))),
        abs(h1.imag), abs(h2.imag),
    )
    return ResidualBundle(
        F=ScalarLoop(F.coeffs.real + 0j, rho),
        G=ScalarLoop(G.coeffs.real + 0j, rho),
        H1=float(h1.real), H2=float(h2.real),
        K_minus_1=float(a0 * a0 + b0 * c0 - 1.0),
        reality_defect=reality,
    )


def monodromy_matrix(params: PotentialParams, j: int = 0,
                     L: int | None = None, rtol: float = 1e-11,
                     standoff: float | None = None,
                     N_loop: int | None = None) -> MonodromyRecord:
    """Full monodromy record around p_j (loop coefficients + residuals)."""
    if N_loop is None:
        N_loop = params.a.trunc_degree
    if L is None:
        L = 4 * N_loop
    lam = grid_points(L)
    M_s, Mt_s, flagged = mtilde_samples_batch([params], lam, j, rtol)
    M_s, Mt_s = M_s[0], Mt_s[0]
    M = MatrixLoop.from_samples(M_s, N_loop, params.rho)
    Mt = MatrixLoop.from_samples(Mt_s, N_loop, params.rho)
    det = np.linalg.det(M_s)
    det_defect = float(np.max(np.abs(det - 1.0)))
    bundle = residual_bundle(params, Mt_s, lam, N_loop)
    return MonodromyRecord(
        M=M, Mtilde=Mt, t=params.t, params=params, lam=lam,
        M_samples=M_s, Mt_samples=Mt_s, residuals=bundle,
        branch_flagged=flagged, det_defect=det_defect,
        reality_defect=bundle.reality_defect,
    )


def mtilde_closed_form_t0(params: PotentialParams) -> MatrixLoop:
    """M'(0) for the seed family, in closed form (residue calculus):

        2 pi i [[a - r b / lam,        b / lam         ],
                [2 r a - r^2 b / lam + lam c,  -a + r b / lam]].

    The production path computes the same object by differencing; this is
    the independent check used by the tests.
    """
    a, b, c, r = params.a, params.b, params.c, params.r
    rho = params.rho
    lam_inv = ScalarLoop.monomial(-1, 1.0, rho=rho)
    lam = ScalarLoop.monomial(1, 1.0, rho=rho)
    e11 = a - lam_inv * b * r
    e12 = lam_inv * b
    e21 = a * (2 * r) - lam_inv * b * r ** 2 + lam * c
    M = MatrixLoop.from_entries(e11, e12, e21, -e11)
    return M.scale(2j * np.pi)
