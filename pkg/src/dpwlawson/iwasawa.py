"""Unitary/positive splitting of SL(2,C) loops.

Any loop Phi on the circle with det = 1 splits uniquely as Phi = F * B with
F unitary on S^1 and B extending holomorphically to lam = 0, normalized so
that B(0) is upper triangular with positive diagonal.  We compute B as the
spectral factor of the positive-definite loop P = Phi* Phi:

    P(lam) = B(lam)* B(lam),   B = sum_{k>=0} B_k lam^k.

The factor is read off a block-Toeplitz Cholesky factorization (Bauer's
method): deep rows of the upper Cholesky factor of [P_{j-i}] converge to the
coefficient sequence (B_0, B_1, ...).  One or two multiplicative Newton
corrections on the defect B^-* P B^-1 - Id then polish the factor near
machine precision; F is recovered pointwise as Phi B^-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loops import MatrixLoop, _samples_to_coeffs, grid_points


class IwasawaError(Exception):
    pass


class NotPositiveDefinite(IwasawaError):
    """Phi*Phi is numerically singular on the circle."""


class NoConvergence(IwasawaError):
    """Defect polish failed to reach the requested tolerance."""


@dataclass(frozen=True)
class IwasawaResult:
    F: MatrixLoop
    B: MatrixLoop
    residual: float
    unitarity_defect: float

    def to_json_dict(self) -> dict:
        return {
            "F": self.F.to_json_dict(),
            "B": self.B.to_json_dict(),
            "residual": self.residual,
            "unitarity_defect": self.unitarity_defect,
        }


def finite_dim_iwasawa(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a constant det-1 matrix as (unitary) * (upper triangular, positive
    diagonal).  With det A = 1 the unitary factor lands in SU(2) automatically."""
    A = np.asarray(A, dtype=complex)
    if abs(np.linalg.det(A) - 1.0) > 1e-9:
        raise ValueError("finite_dim_iwasawa expects det A = 1")
    if np.max(np.abs(A[:, 0])) == 0.0:
        raise IwasawaError("zero first column")
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R).copy()
    phase = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return Q * phase[None, :], R * np.conj(phase)[:, None]


def _spectral_factor_samples(P_samples: np.ndarray, N_out: int, depth: int,
                             rho: float) -> MatrixLoop:
    """Bauer step: spectral factor of P from its samples on the unit circle.

    P_samples has shape (L, 2, 2), Hermitian positive definite per sample.
    Returns B of degree N_out with B(0) upper triangular, positive diagonal.
    """
    L = P_samples.shape[0]
    n_coef = min(depth, L // 2 - 1)
    P_coeffs = _samples_to_coeffs(P_samples, n_coef)

    nb = depth + N_out + 1
    dim = 2 * nb
    T = np.zeros((dim, dim), dtype=complex)
    for h in range(-min(n_coef, nb - 1), min(n_coef, nb - 1) + 1):
        block = P_coeffs[n_coef + h]
        for i in range(max(0, -h), min(nb, nb - h)):
            T[2 * i: 2 * i + 2, 2 * (i + h): 2 * (i + h) + 2] = block
    try:
        Lc = np.linalg.cholesky(T)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("block-Toeplitz section is not positive definite") from exc
    R = Lc.conj().T
    row = depth  # deep row: converged onto the factor coefficients
    coeffs = np.zeros((2 * N_out + 1, 2, 2), dtype=complex)
    for k in range(N_out + 1):
        coeffs[N_out + k] = R[2 * row: 2 * row + 2, 2 * (row + k): 2 * (row + k) + 2]
    return MatrixLoop(coeffs, rho)


def _polish_factor(B: MatrixLoop, P_samples: np.ndarray) -> tuple[MatrixLoop, float]:
    """One multiplicative Newton step: B <- (Id + X) B with X + X* = defect."""
    L = P_samples.shape[0]
    Bv = B.samples(L)
    Binv = np.linalg.inv(Bv)
    G = np.einsum("kba,kbc,kcd->kad", np.conj(Binv), P_samples, Binv)
    E = G - np.eye(2)
    defect = float(np.max(np.abs(E)))
    NB = B.trunc_degree
    E_coeffs = _samples_to_coeffs(E, NB)
    X = np.zeros((2 * NB + 1, 2, 2), dtype=complex)
    X[NB] = E_coeffs[NB] / 2.0
    X[NB + 1:] = E_coeffs[NB + 1:]
    Xloop = MatrixLoop(X, B.rho)
    B_new = ((MatrixLoop.identity(0, B.rho) + Xloop) @ B).truncate(NB, None)
    return B_new, defect


def _normalize_at_zero(B: MatrixLoop) -> MatrixLoop:
    """Left-multiply by a constant unitary so B(0) is upper triangular with
    positive diagonal (the factor stays positive, the product F B unchanged
    after F absorbs the inverse unitary)."""
    B0 = B.coeff(0)
    Q, R = np.linalg.qr(B0)
    d = np.diagonal(R).copy()
    phase = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    Q = Q * phase[None, :]
    U = MatrixLoop.from_constant(Q.conj().T, 0, B.rho)
    return (U @ B).truncate(B.trunc_degree, None)


def iwasawa_decompose(Phi: MatrixLoop, N_out: int | None = None,
                      depth: int | None = None, tol: float = 1e-9,
                      max_polish: int = 4) -> IwasawaResult:
    """Split Phi = F B, F unitary on S^1, B a normalized plus-loop.

    N_out bounds the output truncation degree (default: enough to represent
    the factor of a truncated det-1 loop exactly, i.e. twice the input degree).
    """
    N_in = Phi.trunc_degree
    if N_out is None:
        # The exact factor of a degree-N truncated loop can reach degree 2N,
        # but coefficients past N + margin sit below the float64 noise floor
        # once weighted by rho^k; representing them would only inject noise
        # into weighted norms.
        N_out = max(N_in + 8, 4)
    if depth is None:
        depth = 2 * N_in + 24
    L = 4 * (N_in + N_out) + 8
    L += L % 2

    lam = grid_points(L)
    Phi_v = Phi.samples(L)
    det = np.linalg.det(Phi_v)
    if np.max(np.abs(det - 1.0)) > 1e-6:
        raise IwasawaError("input loop is not in SL(2,C) within tolerance")
    P = np.einsum("kba,kbc->kac", np.conj(Phi_v), Phi_v)
    P = 0.5 * (P + np.conj(np.swapaxes(P, 1, 2)))
    # cheap positivity guard: 2x2 Hermitian eigenvalue bound
    tr = np.real(P[:, 0, 0] + P[:, 1, 1])
    dt = np.real(np.linalg.det(P))
    mineig = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4 * dt, 0.0)))
    if np.min(mineig) < 1e-12:
        raise NotPositiveDefinite(
            f"min eigenvalue of Phi*Phi on the grid is {np.min(mineig):.3e}")

    B = _spectral_factor_samples(P, N_out, depth, Phi.rho)
    defect = np.inf
    for _ in range(max_polish):
        B_new, defect = _polish_factor(B, P)
        if defect < 1e-15:
            break
        B = B_new
    if defect > tol:
        raise NoConvergence(f"factor defect {defect:.3e} above tolerance {tol:.1e}")
    B = _normalize_at_zero(B)

    # Coefficients below the sampling noise floor are meaningless and, once
    # multiplied by rho^k inside weighted norms, would dominate them; zero
    # them so every surviving coefficient is accurate relative to itself.
    scale = max(float(np.max(np.abs(P))), 1.0)
    B = B.clean(weighted_tol=1e-13, abs_tol=5e-15 * scale)

    # F in coefficient space: F = Phi adj(B) / det(B).  The series inverse of
    # det(B) keeps relative accuracy degree by degree, unlike a grid inverse.
    det = B.det().clean(weighted_tol=1e-16)
    inv_det = det.inverse_plus(2 * B.trunc_degree)
    F = (Phi @ B.adjugate()).scale(inv_det)
    F = F.clean(weighted_tol=1e-15 * max(F.norm_rho(), 1.0))
    F = F.truncate(N_in + N_out + 8, None)

    LF = 2 * F.trunc_degree + 2
    Fv = F.samples(LF)
    gram = np.einsum("kab,kcb->kac", Fv, np.conj(Fv))
    unit_defect = float(np.max(np.abs(gram - np.eye(2))))

    recon = (F @ B) - Phi.pad(F.trunc_degree + B.trunc_degree)
    residual = recon.norm_rho()
    return IwasawaResult(F=F, B=B, residual=residual, unitarity_defect=unit_defect)


def random_sl2_loop(rng, N: int = 16, rho: float = 2.0, amp: float = 0.4,
                    decay: float | None = None) -> MatrixLoop:
    """Random truncated det-1 loop built from unipotent factors.

    Coefficients decay geometrically well inside the rho-annulus so the
    weighted norm is dominated by the low modes and the factorization stays
    representable at double precision.
    """
    from .loops import ScalarLoop

    if decay is None:
        decay = 4.0 * rho

    def rand_scalar(deg):
        k = np.arange(-deg, deg + 1)
        c = rng.standard_normal(2 * deg + 1) + 1j * rng.standard_normal(2 * deg + 1)
        return ScalarLoop(c * amp * decay ** (-np.abs(k).astype(float)), rho)

    d = N // 3
    one = ScalarLoop.one(d, rho)
    zero = ScalarLoop.zero(d, rho)
    upper = MatrixLoop.from_entries(one, rand_scalar(d), zero, one)
    lower = MatrixLoop.from_entries(one, zero, rand_scalar(d), one)
    upper2 = MatrixLoop.from_entries(one, rand_scalar(N - 2 * d), zero, one)
    return (upper @ lower @ upper2).truncate(N, None)


def iwasawa_pointwise(Phi_samples: np.ndarray, rho: float, N_out: int,
                      depth: int | None = None) -> tuple[MatrixLoop, np.ndarray]:
    """Factor a loop given only by grid samples; returns (B, F_samples).

    Used in the inner reconstruction loop where Phi is produced by numerical
    integration sample-by-sample and only B's low coefficients and F at the
    evaluation points lam = +-1 are needed.
    """
    L = Phi_samples.shape[0]
    if L < 2 * N_out + 6:
        raise IwasawaError(
            f"grid of {L} samples cannot resolve a degree-{N_out} factor")
    P = np.einsum("kba,kbc->kac", np.conj(Phi_samples), Phi_samples)
    P = 0.5 * (P + np.conj(np.swapaxes(P, 1, 2)))
    if depth is None:
        depth = max(6, min(2 * N_out + 16, L // 2 - N_out - 2))
    B = _spectral_factor_samples(P, N_out, depth, rho)
    for _ in range(2):
        B, defect = _polish_factor(B, P)
        if defect < 1e-14:
            break
    B = _normalize_at_zero(B)
    Bv = B.samples(L)
    Fv = np.einsum("kab,kbc->kac", Phi_samples, np.linalg.inv(Bv))
    return B, Fv
