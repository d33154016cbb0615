"""Banach algebra of Fourier loops on the circle.

A scalar loop is a truncated Laurent series f(lam) = sum_k f_k lam^k with
|k| <= N, regarded as an element of the weighted Wiener algebra with norm
sum_k |f_k| rho^|k| (absolutely convergent on the annulus 1/rho < |lam| < rho).
Matrix loops are 2x2 matrices of scalar loops and carry the membership
predicates used throughout the pipeline (plus-loops, unitary loops, SL(2,C)).
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

DEFAULT_TRUNC_DEGREE = 24
DEFAULT_RHO = 2.0
DEFAULT_TAIL_BUDGET = 1e-10


class LoopError(Exception):
    pass


class TruncationOverflow(LoopError):
    """Discarded coefficient band carries more weighted mass than allowed."""


class SingularInverse(LoopError):
    """Loop evaluates below the invertibility threshold on the sample grid."""


class AliasingError(LoopError):
    """Sample grid too small (or odd) for the requested truncation degree."""


class OutOfAnnulus(LoopError):
    """Evaluation point outside the annulus of absolute convergence."""


def _check_grid(L: int, N: int) -> None:
    if L % 2 != 0:
        raise AliasingError(f"grid size L={L} must be even so that lam=-1 is a grid point")
    if L < 2 * N + 2:
        raise AliasingError(f"grid size L={L} aliases degree N={N} (need L >= 2N+2)")


def grid_points(L: int) -> np.ndarray:
    """The uniform sample grid exp(2 pi i j / L), j = 0..L-1."""
    return np.exp(2j * np.pi * np.arange(L) / L)


def _coeffs_to_samples(coeffs: np.ndarray, N: int, L: int) -> np.ndarray:
    # coeffs indexed k = -N..N along axis 0; returns samples on grid_points(L).
    shape = (L,) + coeffs.shape[1:]
    c = np.zeros(shape, dtype=complex)
    c[: N + 1] = coeffs[N:]
    if N > 0:
        c[L - N:] = coeffs[:N]
    return np.fft.ifft(c, axis=0) * L


def _samples_to_coeffs(samples: np.ndarray, N: int) -> np.ndarray:
    L = samples.shape[0]
    c = np.fft.fft(samples, axis=0) / L
    out = np.empty((2 * N + 1,) + samples.shape[1:], dtype=complex)
    out[N:] = c[: N + 1]
    if N > 0:
        out[:N] = c[L - N:]
    return out


@dataclass(frozen=True)
class ScalarLoop:
    """Truncated Laurent-Fourier series, coefficients indexed k = -N..N."""

    coeffs: np.ndarray
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.shape[0] % 2 != 1:
            raise ValueError("coeffs must be a 1-d array of odd length (k = -N..N)")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, N: int = 0, rho: float = DEFAULT_RHO) -> "ScalarLoop":
        return cls(np.zeros(2 * N + 1), rho)

    @classmethod
    def one(cls, N: int = 0, rho: float = DEFAULT_RHO) -> "ScalarLoop":
        return cls.monomial(0, 1.0, N, rho)

    @classmethod
    def monomial(cls, k: int, value: complex = 1.0, N: int | None = None,
                 rho: float = DEFAULT_RHO) -> "ScalarLoop":
        if N is None:
            N = abs(k)
        if abs(k) > N:
            raise ValueError("monomial degree exceeds truncation degree")
        c = np.zeros(2 * N + 1, dtype=complex)
        c[N + k] = value
        return cls(c, rho)

    @classmethod
    def constant(cls, value: complex, N: int = 0, rho: float = DEFAULT_RHO) -> "ScalarLoop":
        return cls.monomial(0, value, N, rho)

    @classmethod
    def from_dict(cls, d: dict, N: int | None = None, rho: float = DEFAULT_RHO) -> "ScalarLoop":
        """Build from {k: value}; N defaults to the largest |k| present."""
        if N is None:
            N = max((abs(k) for k in d), default=0)
        c = np.zeros(2 * N + 1, dtype=complex)
        for k, v in d.items():
            if abs(k) > N:
                raise ValueError("coefficient index exceeds truncation degree")
            c[N + k] = v
        return cls(c, rho)

    @classmethod
    def from_samples(cls, samples: np.ndarray, N: int, rho: float = DEFAULT_RHO) -> "ScalarLoop":
        samples = np.asarray(samples, dtype=complex)
        _check_grid(samples.shape[0], N)
        return cls(_samples_to_coeffs(samples, N), rho)

    # -- basic structure ---------------------------------------------------

    @property
    def trunc_degree(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    N = trunc_degree

    def coeff(self, k: int) -> complex:
        N = self.trunc_degree
        if abs(k) > N:
            return 0.0 + 0.0j
        return complex(self.coeffs[N + k])

    def pad(self, N: int) -> "ScalarLoop":
        n0 = self.trunc_degree
        if N < n0:
            raise ValueError("pad cannot shrink; use truncate")
        c = np.zeros(2 * N + 1, dtype=complex)
        c[N - n0: N + n0 + 1] = self.coeffs
        return ScalarLoop(c, self.rho)

    def truncate(self, N: int, tail_budget: float | None = DEFAULT_TAIL_BUDGET) -> "ScalarLoop":
        """Restrict to |k| <= N; raise if the discarded band is too heavy."""
        n0 = self.trunc_degree
        if N >= n0:
            return self.pad(N)
        kept = self.coeffs[n0 - N: n0 + N + 1]
        if tail_budget is not None:
            total = self.norm_rho()
            discarded = total - ScalarLoop(kept, self.rho).norm_rho()
            if total > 0 and discarded > tail_budget * total:
                raise TruncationOverflow(
                    f"discarded band mass {discarded:.3e} exceeds "
                    f"{tail_budget:.1e} of weighted norm {total:.3e}")
        return ScalarLoop(kept, self.rho)

    def tail_fraction(self, margin: int = 2) -> float:
        """Weighted mass fraction sitting within `margin` of the truncation edge."""
        N = self.trunc_degree
        total = self.norm_rho()
        if total == 0:
            return 0.0
        k = np.abs(np.arange(-N, N + 1))
        w = np.abs(self.coeffs) * self.rho ** k
        return float(np.sum(w[k > N - margin]) / total)

    # -- ring operations ---------------------------------------------------

    def _binary(self, other, op):
        if isinstance(other, (int, float, complex)):
            other = ScalarLoop.constant(other, 0, self.rho)
        if not isinstance(other, ScalarLoop):
            return NotImplemented
        if other.rho != self.rho:
            raise ValueError("incompatible weights rho")
        N = max(self.trunc_degree, other.trunc_degree)
        return ScalarLoop(op(self.pad(N).coeffs, other.pad(N).coeffs), self.rho)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return ScalarLoop(-self.coeffs, self.rho)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return ScalarLoop(self.coeffs * other, self.rho)
        if not isinstance(other, ScalarLoop):
            return NotImplemented
        if other.rho != self.rho:
            raise ValueError("incompatible weights rho")
        # Exact Laurent product; degrees add.  Callers truncate explicitly.
        N1, N2 = self.trunc_degree, other.trunc_degree
        return ScalarLoop(np.convolve(self.coeffs, other.coeffs), self.rho)

    __rmul__ = __mul__

    def inverse(self, N: int | None = None, threshold: float = 1e-13) -> "ScalarLoop":
        """Multiplicative inverse by pointwise grid inversion.

        The result is truncated to degree N (default: same degree); the
        contract is that f*(inverse) - 1 is small on the band |k| <= N-2.
        """
        n0 = self.trunc_degree
        if N is None:
            N = n0
        # oversample: the inverse is generally an infinite series, and the
        # grid transform aliases its tail back onto the band |k| <= N
        L = 4 * (N + n0 + 8)
        L += L % 2
        vals = self.samples(L)
        if np.min(np.abs(vals)) < threshold:
            raise SingularInverse("loop magnitude below threshold on the unit circle")
        return ScalarLoop.from_samples(1.0 / vals, N, self.rho)

    def inverse_plus(self, N: int) -> "ScalarLoop":
        """Series inverse of a plus-loop with invertible constant term.

        Pure coefficient recursion (forward substitution), so each output
        coefficient is accurate relative to its own magnitude; use this
        instead of grid inversion when high-order coefficients matter in
        the weighted norm.
        """
        if not self.is_plus(1e-300):
            raise SingularInverse("inverse_plus needs a plus-loop (no negative modes)")
        n0 = self.trunc_degree
        d = self.coeffs[n0:]
        if abs(d[0]) < 1e-300:
            raise SingularInverse("constant term vanishes")
        q = np.zeros(N + 1, dtype=complex)
        q[0] = 1.0 / d[0]
        for k in range(1, N + 1):
            jmax = min(k, n0)
            acc = np.dot(d[1: jmax + 1], q[k - 1:: -1][:jmax])
            q[k] = -acc / d[0]
        c = np.zeros(2 * N + 1, dtype=complex)
        c[N:] = q
        return ScalarLoop(c, self.rho)

    def clean(self, weighted_tol: float = 1e-13, abs_tol: float = 0.0) -> "ScalarLoop":
        """Zero coefficients that are indistinguishable from noise.

        A coefficient is dropped when its weighted magnitude |f_k| rho^|k|
        is below weighted_tol, or its raw magnitude below abs_tol.
        """
        N = self.trunc_degree
        k = np.abs(np.arange(-N, N + 1))
        w = np.abs(self.coeffs) * self.rho ** k
        keep = (w >= weighted_tol) & (np.abs(self.coeffs) >= abs_tol)
        return ScalarLoop(np.where(keep, self.coeffs, 0.0), self.rho)

    # -- involutions and projections ---------------------------------------

    def star(self) -> "ScalarLoop":
        """f*(lam) = conj(f(1/conj(lam))): reverse indices and conjugate."""
        return ScalarLoop(np.conj(self.coeffs[::-1]), self.rho)

    def bar(self) -> "ScalarLoop":
        """bar(f)(lam) = conj(f(conj(lam))): conjugate coefficients in place."""
        return ScalarLoop(np.conj(self.coeffs), self.rho)

    def parity_flip(self) -> "ScalarLoop":
        """f(-lam): negate odd coefficients."""
        N = self.trunc_degree
        signs = (-1.0) ** np.abs(np.arange(-N, N + 1))
        return ScalarLoop(self.coeffs * signs, self.rho)

    def project(self, part: str) -> "ScalarLoop":
        """Keep the k>0 ('+'), k=0 ('0') or k<0 ('-') band."""
        N = self.trunc_degree
        c = np.zeros_like(self.coeffs)
        if part == "+":
            c[N + 1:] = self.coeffs[N + 1:]
        elif part == "0":
            c[N] = self.coeffs[N]
        elif part == "-":
            c[:N] = self.coeffs[:N]
        else:
            raise ValueError("part must be one of '+', '0', '-'")
        return ScalarLoop(c, self.rho)

    # -- evaluation and norms ----------------------------------------------

    def __call__(self, lam: complex | np.ndarray) -> complex | np.ndarray:
        return self.evaluate(lam)

    def evaluate(self, lam):
        lam = np.asarray(lam, dtype=complex)
        mag = np.abs(lam)
        eps = 1e-12
        if np.any(mag < 1.0 / self.rho - eps) or np.any(mag > self.rho + eps):
            raise OutOfAnnulus("evaluation point outside the annulus of convergence")
        N = self.trunc_degree
        # Horner in lam for k >= 0 and in 1/lam for k < 0.
        pos = np.zeros_like(lam)
        for k in range(N, 0, -1):
            pos = (pos + self.coeffs[N + k]) * lam
        neg = np.zeros_like(lam)
        inv = 1.0 / lam
        for k in range(N, 0, -1):
            neg = (neg + self.coeffs[N - k]) * inv
        out = pos + neg + self.coeffs[N]
        return out if out.shape else complex(out)

    def samples(self, L: int) -> np.ndarray:
        """Values on the uniform grid exp(2 pi i j / L)."""
        _check_grid(L, self.trunc_degree)
        return _coeffs_to_samples(self.coeffs, self.trunc_degree, L)

    def norm_rho(self) -> float:
        N = self.trunc_degree
        k = np.abs(np.arange(-N, N + 1))
        return float(np.sum(np.abs(self.coeffs) * self.rho ** k))

    def norm_inf_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    # -- membership predicates ----------------------------------------------

    def is_plus(self, tol: float = 1e-12) -> bool:
        """Member of the subalgebra with no negative Fourier modes."""
        N = self.trunc_degree
        return bool(np.all(np.abs(self.coeffs[:N]) <= tol))

    def is_real_coeff(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.coeffs.imag) <= tol))

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "N": self.trunc_degree,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScalarLoop":
        c = np.array([complex(re, im) for re, im in d["coeffs"]])
        if len(c) != 2 * int(d["N"]) + 1:
            raise ValueError("coefficient list length does not match N")
        return cls(c, float(d["rho"]))

    def __repr__(self):
        N = self.trunc_degree
        terms = [
            f"{self.coeffs[N + k]:.3g}*lam^{k}"
            for k in range(-N, N + 1)
            if abs(self.coeffs[N + k]) > 1e-14
        ]
        body = " + ".join(terms) if terms else "0"
        return f"ScalarLoop({body}; N={N}, rho={self.rho})"


@dataclass(frozen=True)
class MatrixLoop:
    """2x2 matrix of scalar loops, stored as one (2N+1, 2, 2) array."""

    coeffs: np.ndarray
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1:] != (2, 2) or c.shape[0] % 2 != 1:
            raise ValueError("coeffs must have shape (2N+1, 2, 2)")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def identity(cls, N: int = 0, rho: float = DEFAULT_RHO) -> "MatrixLoop":
        c = np.zeros((2 * N + 1, 2, 2), dtype=complex)
        c[N] = np.eye(2)
        return cls(c, rho)

    @classmethod
    def zero(cls, N: int = 0, rho: float = DEFAULT_RHO) -> "MatrixLoop":
        return cls(np.zeros((2 * N + 1, 2, 2)), rho)

    @classmethod
    def from_constant(cls, A: np.ndarray, N: int = 0, rho: float = DEFAULT_RHO) -> "MatrixLoop":
        c = np.zeros((2 * N + 1, 2, 2), dtype=complex)
        c[N] = np.asarray(A, dtype=complex)
        return cls(c, rho)

    @classmethod
    def from_entries(cls, e11, e12, e21, e22) -> "MatrixLoop":
        entries = [e11, e12, e21, e22]
        rho = entries[0].rho
        N = max(e.trunc_degree for e in entries)
        c = np.zeros((2 * N + 1, 2, 2), dtype=complex)
        for (i, j), e in zip(((0, 0), (0, 1), (1, 0), (1, 1)), entries):
            if e.rho != rho:
                raise ValueError("entries carry incompatible rho")
            c[:, i, j] = e.pad(N).coeffs
        return cls(c, rho)

    @classmethod
    def from_samples(cls, samples: np.ndarray, N: int, rho: float = DEFAULT_RHO) -> "MatrixLoop":
        samples = np.asarray(samples, dtype=complex)
        _check_grid(samples.shape[0], N)
        return cls(_samples_to_coeffs(samples, N), rho)

    # -- structure -------------------------------------------------------------

    @property
    def trunc_degree(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def entry(self, i: int, j: int) -> ScalarLoop:
        return ScalarLoop(self.coeffs[:, i, j], self.rho)

    def coeff(self, k: int) -> np.ndarray:
        N = self.trunc_degree
        if abs(k) > N:
            return np.zeros((2, 2), dtype=complex)
        return np.array(self.coeffs[N + k])

    def pad(self, N: int) -> "MatrixLoop":
        n0 = self.trunc_degree
        if N < n0:
            raise ValueError("pad cannot shrink; use truncate")
        c = np.zeros((2 * N + 1, 2, 2), dtype=complex)
        c[N - n0: N + n0 + 1] = self.coeffs
        return MatrixLoop(c, self.rho)

    def truncate(self, N: int, tail_budget: float | None = DEFAULT_TAIL_BUDGET) -> "MatrixLoop":
        n0 = self.trunc_degree
        if N >= n0:
            return self.pad(N)
        kept = self.coeffs[n0 - N: n0 + N + 1]
        if tail_budget is not None:
            total = self.norm_rho()
            discarded = total - MatrixLoop(kept, self.rho).norm_rho()
            if total > 0 and discarded > tail_budget * total:
                raise TruncationOverflow(
                    f"discarded band mass {discarded:.3e} exceeds "
                    f"{tail_budget:.1e} of weighted norm {total:.3e}")
        return MatrixLoop(kept, self.rho)

    # -- algebra ------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, MatrixLoop):
            if other.rho != self.rho:
                raise ValueError("incompatible weights rho")
            return other
        if isinstance(other, np.ndarray) and other.shape == (2, 2):
            return MatrixLoop.from_constant(other, 0, self.rho)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        N = max(self.trunc_degree, o.trunc_degree)
        return MatrixLoop(self.pad(N).coeffs + o.pad(N).coeffs, self.rho)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        N = max(self.trunc_degree, o.trunc_degree)
        return MatrixLoop(self.pad(N).coeffs - o.pad(N).coeffs, self.rho)

    def __neg__(self):
        return MatrixLoop(-self.coeffs, self.rho)

    def scale(self, s) -> "MatrixLoop":
        if isinstance(s, ScalarLoop):
            out = np.zeros((self.coeffs.shape[0] + s.coeffs.shape[0] - 1, 2, 2), dtype=complex)
            for i in range(2):
                for j in range(2):
                    out[:, i, j] = np.convolve(self.coeffs[:, i, j], s.coeffs)
            return MatrixLoop(out, self.rho)
        return MatrixLoop(self.coeffs * s, self.rho)

    def __matmul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        # Exact product by block convolution.
        n1, n2 = self.trunc_degree, o.trunc_degree
        Nout = n1 + n2
        out = np.zeros((2 * Nout + 1, 2, 2), dtype=complex)
        for k in range(self.coeffs.shape[0]):
            out[k: k + o.coeffs.shape[0]] += np.einsum(
                "ab,kbc->kac", self.coeffs[k], o.coeffs)
        return MatrixLoop(out, self.rho)

    def star(self) -> "MatrixLoop":
        """M*(lam) = conj-transpose of M(1/conj(lam))."""
        c = np.conj(np.swapaxes(self.coeffs[::-1], 1, 2))
        return MatrixLoop(c, self.rho)

    def bar(self) -> "MatrixLoop":
        return MatrixLoop(np.conj(self.coeffs), self.rho)

    def parity_flip(self) -> "MatrixLoop":
        N = self.trunc_degree
        signs = (-1.0) ** np.abs(np.arange(-N, N + 1))
        return MatrixLoop(self.coeffs * signs[:, None, None], self.rho)

    def transpose(self) -> "MatrixLoop":
        return MatrixLoop(np.swapaxes(self.coeffs, 1, 2), self.rho)

    def det(self) -> ScalarLoop:
        a, b = self.coeffs[:, 0, 0], self.coeffs[:, 0, 1]
        c, d = self.coeffs[:, 1, 0], self.coeffs[:, 1, 1]
        return ScalarLoop(np.convolve(a, d) - np.convolve(b, c), self.rho)

    def trace(self) -> ScalarLoop:
        return ScalarLoop(self.coeffs[:, 0, 0] + self.coeffs[:, 1, 1], self.rho)

    def adjugate(self) -> "MatrixLoop":
        c = np.empty_like(self.coeffs)
        c[:, 0, 0] = self.coeffs[:, 1, 1]
        c[:, 1, 1] = self.coeffs[:, 0, 0]
        c[:, 0, 1] = -self.coeffs[:, 0, 1]
        c[:, 1, 0] = -self.coeffs[:, 1, 0]
        return MatrixLoop(c, self.rho)

    def inverse(self, N: int | None = None, threshold: float = 1e-13) -> "MatrixLoop":
        """inv = adjugate / det, with the scalar det inverted on the grid."""
        if N is None:
            N = self.trunc_degree
        det = self.det()
        one = ScalarLoop.one(0, self.rho)
        if (det - one).norm_inf_coeff() < 1e-14:
            return self.adjugate().truncate(max(N, self.trunc_degree), None)
        inv_det = det.inverse(N + self.trunc_degree, threshold)
        return self.adjugate().scale(inv_det).truncate(N, None)

    def clean(self, weighted_tol: float = 1e-13, abs_tol: float = 0.0) -> "MatrixLoop":
        """Entrywise noise floor; see ScalarLoop.clean."""
        N = self.trunc_degree
        k = np.abs(np.arange(-N, N + 1))
        w = np.abs(self.coeffs) * (self.rho ** k)[:, None, None]
        keep = (w >= weighted_tol) & (np.abs(self.coeffs) >= abs_tol)
        return MatrixLoop(np.where(keep, self.coeffs, 0.0), self.rho)

    # -- evaluation, norms, predicates ----------------------------------------

    def __call__(self, lam):
        return self.evaluate(lam)

    def evaluate(self, lam):
        lam_arr = np.asarray(lam, dtype=complex)
        mag = np.abs(lam_arr)
        eps = 1e-12
        if np.any(mag < 1.0 / self.rho - eps) or np.any(mag > self.rho + eps):
            raise OutOfAnnulus("evaluation point outside the annulus of convergence")
        N = self.trunc_degree
        powers = lam_arr[..., None] ** np.arange(-N, N + 1)
        return np.einsum("...k,kab->...ab", powers, self.coeffs)

    def samples(self, L: int) -> np.ndarray:
        _check_grid(L, self.trunc_degree)
        return _coeffs_to_samples(self.coeffs, self.trunc_degree, L)

    def norm_rho(self) -> float:
        N = self.trunc_degree
        k = np.abs(np.arange(-N, N + 1))
        w = np.abs(self.coeffs) * (self.rho ** k)[:, None, None]
        return float(np.max(np.sum(w, axis=0)))

    def norm_inf_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def is_plus(self, tol: float = 1e-12) -> bool:
        N = self.trunc_degree
        return bool(np.all(np.abs(self.coeffs[:N]) <= tol))

    def is_plus_normalized(self, tol: float = 1e-9) -> bool:
        """Plus-loop whose value at lam=0 is upper triangular with positive
        real diagonal (the normalization fixing uniqueness of the splitting)."""
        if not self.is_plus(tol):
            return False
        B0 = self.coeff(0)
        if abs(B0[1, 0]) > tol:
            return False
        d = np.diag(B0)
        return bool(np.all(np.abs(d.imag) <= tol) and np.all(d.real > 0))

    def is_sl2(self, tol: float = 1e-9) -> bool:
        d = self.det() - ScalarLoop.one(0, self.rho)
        return d.norm_rho() <= tol

    def unitarity_defect(self, L: int | None = None) -> float:
        """max over S^1 samples of || M(lam) M(lam)^H - Id ||."""
        if L is None:
            L = max(2 * self.trunc_degree + 2, 8)
            L += L % 2
        vals = self.samples(L)
        gram = np.einsum("kab,kcb->kac", vals, np.conj(vals))
        return float(np.max(np.abs(gram - np.eye(2))))

    def is_su2(self, tol: float = 1e-9) -> bool:
        return self.is_sl2(max(tol, 1e-9)) and self.unitarity_defect() <= tol

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "N": self.trunc_degree,
            "entries": [[self.entry(i, j).to_json_dict()["coeffs"] for j in range(2)]
                        for i in range(2)],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MatrixLoop":
        N, rho = int(d["N"]), float(d["rho"])
        c = np.zeros((2 * N + 1, 2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                c[:, i, j] = [complex(re, im) for re, im in d["entries"][i][j]]
        return cls(c, rho)


def loop_to_json(loop) -> str:
    return json.dumps(loop.to_json_dict(), sort_keys=True)


def loop_from_json(text: str):
    d = json.loads(text)
    return MatrixLoop.from_json_dict(d) if "entries" in d else ScalarLoop.from_json_dict(d)
