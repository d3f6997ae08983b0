"""Truncated power-series arithmetic on the crown around {xi*eta = omega}.

Two representations are used throughout:

* ``CoeffSeries`` -- a univariate truncated series in the product variable
  z = xi*eta.  These hold rotation exponents alpha(z), scaling factors
  Theta(z) and the coefficient functions of the crown decomposition.
* ``CrownSeries`` -- a dense triangular array of bivariate coefficients
  a[m, n] of xi^m eta^n with total degree m + n <= D.

Every bivariate series splits uniquely as

    f = f_00(xi*eta) + sum_l f_l0(xi*eta) xi^l + sum_j f_0j(xi*eta) eta^j,

and the weighted norm used by the iteration is

    ||f||_{omega,beta,r} = sum_{l*j=0} |f_lj|_{omega,beta} r^(l+j),

where |h|_{omega,beta} is the sup of |h| over the disk |z - omega| <= beta,
approximated here by sampling the boundary circle (maximum modulus).

All values are immutable after construction; operations return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

REALNESS_TOL = 1e-10
EXP_TAIL_TOL = 1e-16
INVERSE_TOL = 1e-14
MAX_INVERSE_ITERS = 50


class SeriesError(ValueError):
    """Raised on malformed operands or violated preconditions."""


# ---------------------------------------------------------------------------
# univariate series in z = xi*eta
# ---------------------------------------------------------------------------


class CoeffSeries:
    """Truncated univariate complex power series c_0 + c_1 z + ... + c_D z^D."""

    __slots__ = ("coeffs", "real")

    def __init__(self, coeffs, real: bool = False, realness_tol: float = REALNESS_TOL):
        c = np.asarray(coeffs, dtype=np.complex128).copy()
        if c.ndim != 1 or c.size == 0:
            raise SeriesError("CoeffSeries needs a nonempty 1-d coefficient array")
        if real:
            worst = float(np.max(np.abs(c.imag))) if c.size else 0.0
            scale = max(1.0, float(np.max(np.abs(c))))
            if worst > realness_tol * scale:
                raise SeriesError(
                    f"realness check failed: max |Im c_k| = {worst:.3e}"
                )
            c = c.real.astype(np.complex128)
        c.setflags(write=False)
        self.coeffs = c
        self.real = bool(real)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(trunc_z: int) -> "CoeffSeries":
        return CoeffSeries(np.zeros(trunc_z + 1), real=True)

    @staticmethod
    def constant(value, trunc_z: int) -> "CoeffSeries":
        c = np.zeros(trunc_z + 1, dtype=np.complex128)
        c[0] = value
        return CoeffSeries(c, real=abs(complex(value).imag) == 0.0)

    @staticmethod
    def variable(trunc_z: int) -> "CoeffSeries":
        c = np.zeros(trunc_z + 1, dtype=np.complex128)
        if trunc_z >= 1:
            c[1] = 1.0
        return CoeffSeries(c, real=True)

    # -- basic queries -----------------------------------------------------

    @property
    def trunc_z(self) -> int:
        return self.coeffs.size - 1

    def is_real(self, tol: float = REALNESS_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return float(np.max(np.abs(self.coeffs.imag))) <= tol * scale

    def realness_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs.imag)))

    def __repr__(self):
        return f"CoeffSeries(deg={self.trunc_z}, c0={self.coeffs[0]:.6g})"

    # -- ring operations ---------------------------------------------------

    def _matched(self, other: "CoeffSeries") -> tuple[np.ndarray, np.ndarray]:
        n = max(self.trunc_z, other.trunc_z) + 1
        a = np.zeros(n, dtype=np.complex128)
        b = np.zeros(n, dtype=np.complex128)
        a[: self.coeffs.size] = self.coeffs
        b[: other.coeffs.size] = other.coeffs
        return a, b

    def __add__(self, other):
        if isinstance(other, CoeffSeries):
            a, b = self._matched(other)
            return CoeffSeries(a + b)
        c = self.coeffs.copy()
        c[0] += other
        return CoeffSeries(c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, CoeffSeries):
            a, b = self._matched(other)
            return CoeffSeries(a - b)
        return self + (-other)

    def __neg__(self):
        return CoeffSeries(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, CoeffSeries):
            n = max(self.trunc_z, other.trunc_z)
            full = np.convolve(self.coeffs, other.coeffs)
            return CoeffSeries(full[: n + 1])
        return CoeffSeries(self.coeffs * other)

    __rmul__ = __mul__

    def truncate(self, trunc_z: int) -> "CoeffSeries":
        if trunc_z >= self.trunc_z:
            c = np.zeros(trunc_z + 1, dtype=np.complex128)
            c[: self.coeffs.size] = self.coeffs
            return CoeffSeries(c)
        return CoeffSeries(self.coeffs[: trunc_z + 1])

    def conj(self) -> "CoeffSeries":
        """Series with complex-conjugated coefficients (bar-series)."""
        return CoeffSeries(np.conj(self.coeffs))

    def derivative(self, order: int = 1) -> "CoeffSeries":
        c = self.coeffs
        for _ in range(order):
            if c.size == 1:
                c = np.zeros(1, dtype=np.complex128)
                break
            c = c[1:] * np.arange(1, c.size)
        return CoeffSeries(c)

    def project_real(self, tol: float = REALNESS_TOL) -> "CoeffSeries":
        """Zero imaginary parts after checking they are below tolerance."""
        return CoeffSeries(self.coeffs, real=True, realness_tol=tol)

    # -- analytic operations -----------------------------------------------

    def eval(self, z):
        """Horner evaluation at scalar or array argument."""
        z = np.asarray(z, dtype=np.complex128)
        out = np.full(z.shape, self.coeffs[-1], dtype=np.complex128)
        for k in range(self.coeffs.size - 2, -1, -1):
            out = out * z + self.coeffs[k]
        return out if out.shape else complex(out)

    def disk_max(self, omega: float, beta: float, n_samples: int = 64) -> float:
        """max |f| over the circle |z - omega| = beta (maximum modulus).

        beta = 0 degenerates to evaluation at omega.
        """
        if beta == 0.0:
            return abs(self.eval(omega))
        th = 2.0 * np.pi * np.arange(n_samples) / n_samples
        zs = omega + beta * np.exp(1j * th)
        return float(np.max(np.abs(self.eval(zs))))

    def reciprocal(self) -> "CoeffSeries":
        c0 = self.coeffs[0]
        if c0 == 0:
            raise SeriesError("cannot invert a series with zero constant term")
        n = self.trunc_z
        inv = np.zeros(n + 1, dtype=np.complex128)
        inv[0] = 1.0 / c0
        for k in range(1, n + 1):
            inv[k] = -np.dot(self.coeffs[1 : k + 1], inv[k - 1 :: -1][: k]) / c0
        return CoeffSeries(inv)

    def exp(self, a: complex = 1.0) -> "CoeffSeries":
        """exp(a*f) as a truncated series; requires bounded constant term."""
        c0 = a * self.coeffs[0]
        if abs(c0.real) >= 50.0:
            raise SeriesError(f"exp overflow guard tripped: |Re(a f(0))| = {abs(c0.real):.3g}")
        head = np.exp(c0)
        n = self.trunc_z
        g = a * self.coeffs.copy()
        g[0] = 0.0
        acc = np.zeros(n + 1, dtype=np.complex128)
        acc[0] = 1.0
        term = np.zeros(n + 1, dtype=np.complex128)
        term[0] = 1.0
        for k in range(1, n + 1):
            term = np.convolve(term, g)[: n + 1] / k
            acc += term
            if float(np.max(np.abs(term))) < EXP_TAIL_TOL:
                break
        return CoeffSeries(head * acc)

    def log(self) -> "CoeffSeries":
        """Principal log of a series with constant term away from the cut."""
        c0 = self.coeffs[0]
        if c0 == 0 or (c0.real < 0 and abs(c0.imag) < 1e-14 * abs(c0)):
            raise SeriesError("log branch-cut proximity at constant term")
        n = self.trunc_z
        g = self.coeffs / c0
        g[0] = 0.0
        acc = np.zeros(n + 1, dtype=np.complex128)
        term = np.zeros(n + 1, dtype=np.complex128)
        term[0] = 1.0
        for k in range(1, n + 1):
            term = np.convolve(term, g)[: n + 1]
            acc += ((-1.0) ** (k + 1) / k) * term
        acc[0] = np.log(c0)
        return CoeffSeries(acc)

    def pow_fraction(self, exponent: float) -> "CoeffSeries":
        """f^exponent via exp(exponent * log f), principal branch."""
        return self.log().exp(exponent)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> list:
        return [[float(c.real), float(c.imag)] for c in self.coeffs]

    @staticmethod
    def from_json(data: Sequence[Sequence[float]]) -> "CoeffSeries":
        return CoeffSeries(np.array([complex(re, im) for re, im in data]))


# ---------------------------------------------------------------------------
# norm parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrownNormParams:
    """Parameters (omega, beta, r) of the crown norm plus sampling density."""

    omega: float
    beta: float
    radius: float
    boundary_samples: int = 64

    def __post_init__(self):
        if self.radius <= 0:
            raise SeriesError("radius must be positive")
        if self.beta < 0:
            raise SeriesError("beta must be nonnegative")
        if self.boundary_samples < 8:
            raise SeriesError("boundary_samples must be >= 8")
        if abs(self.omega) >= self.radius**2:
            raise SeriesError(
                f"empty crown: |omega| = {abs(self.omega):.3g} >= r^2 = {self.radius ** 2:.3g}"
            )

    def shrunk(self, omega=None, beta=None, radius=None) -> "CrownNormParams":
        return CrownNormParams(
            self.omega if omega is None else omega,
            self.beta if beta is None else beta,
            self.radius if radius is None else radius,
            self.boundary_samples,
        )


# ---------------------------------------------------------------------------
# bivariate triangular series
# ---------------------------------------------------------------------------


def _triangle_mask(n: int) -> np.ndarray:
    i = np.arange(n)
    return (i[:, None] + i[None, :]) <= (n - 1)


class CrownSeries:
    """Dense triangular bivariate series sum a[m,n] xi^m eta^n, m+n <= D.

    ``tail`` accumulates the 1-norm of coefficients dropped by truncation;
    it is bookkeeping only and is not propagated rigorously.
    """

    __slots__ = ("coeffs", "trunc_total", "tail")

    def __init__(self, coeffs, trunc_total: int | None = None, tail: float = 0.0):
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise SeriesError("CrownSeries needs a square 2-d coefficient array")
        D = c.shape[0] - 1 if trunc_total is None else trunc_total
        if c.shape[0] != D + 1:
            raise SeriesError("coefficient array does not match trunc_total")
        c = c.copy()
        mask = _triangle_mask(D + 1)
        dropped = float(np.sum(np.abs(c[~mask])))
        c[~mask] = 0.0
        c.setflags(write=False)
        self.coeffs = c
        self.trunc_total = D
        self.tail = tail + dropped

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(D: int) -> "CrownSeries":
        return CrownSeries(np.zeros((D + 1, D + 1)), D)

    @staticmethod
    def constant(value, D: int) -> "CrownSeries":
        c = np.zeros((D + 1, D + 1), dtype=np.complex128)
        c[0, 0] = value
        return CrownSeries(c, D)

    @staticmethod
    def monomial(m: int, n: int, D: int, value=1.0) -> "CrownSeries":
        if m + n > D:
            raise SeriesError("monomial degree exceeds truncation")
        c = np.zeros((D + 1, D + 1), dtype=np.complex128)
        c[m, n] = value
        return CrownSeries(c, D)

    @staticmethod
    def xi(D: int) -> "CrownSeries":
        return CrownSeries.monomial(1, 0, D)

    @staticmethod
    def eta(D: int) -> "CrownSeries":
        return CrownSeries.monomial(0, 1, D)

    @staticmethod
    def from_z_series(h: CoeffSeries, D: int) -> "CrownSeries":
        """Lift h(z) to h(xi*eta): coefficient of z^k goes to (k, k)."""
        c = np.zeros((D + 1, D + 1), dtype=np.complex128)
        kmax = min(h.trunc_z, D // 2)
        for k in range(kmax + 1):
            c[k, k] = h.coeffs[k]
        tail = float(np.sum(np.abs(h.coeffs[kmax + 1 :])))
        return CrownSeries(c, D, tail=tail)

    # -- queries -------------------------------------------------------------

    def __repr__(self):
        nz = int(np.count_nonzero(self.coeffs))
        return f"CrownSeries(D={self.trunc_total}, nonzero={nz})"

    def order(self, tol: float = 0.0) -> int:
        """Lowest total degree with a coefficient above tol (D+1 if none)."""
        D = self.trunc_total
        for d in range(D + 1):
            for m in range(d + 1):
                if abs(self.coeffs[m, d - m]) > tol:
                    return d
        return D + 1

    def coeff_1norm(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    def max_abs_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def is_real(self, tol: float = REALNESS_TOL) -> bool:
        scale = max(1.0, self.max_abs_coeff())
        return float(np.max(np.abs(self.coeffs.imag))) <= tol * scale

    def realness_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs.imag)))

    # -- linear structure ----------------------------------------------------

    def _matched(self, other: "CrownSeries") -> int:
        if self.trunc_total != other.trunc_total:
            raise SeriesError(
                f"mismatched truncation degrees {self.trunc_total} != {other.trunc_total}"
            )
        return self.trunc_total

    def __add__(self, other):
        if isinstance(other, CrownSeries):
            D = self._matched(other)
            return CrownSeries(self.coeffs + other.coeffs, D, self.tail + other.tail)
        c = self.coeffs.copy()
        c[0, 0] += other
        return CrownSeries(c, self.trunc_total, self.tail)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, CrownSeries):
            D = self._matched(other)
            return CrownSeries(self.coeffs - other.coeffs, D, self.tail + other.tail)
        return self + (-other)

    def __neg__(self):
        return CrownSeries(-self.coeffs, self.trunc_total, self.tail)

    def __mul__(self, other):
        if isinstance(other, CrownSeries):
            return multiply(self, other)
        return CrownSeries(self.coeffs * other, self.trunc_total, self.tail * abs(other))

    __rmul__ = __mul__

    def conj(self) -> "CrownSeries":
        """Coefficientwise conjugate; realizes rho-conjugation of maps."""
        return CrownSeries(np.conj(self.coeffs), self.trunc_total, self.tail)

    def swap(self) -> "CrownSeries":
        """f(eta, xi): transpose of the coefficient array."""
        return CrownSeries(self.coeffs.T, self.trunc_total, self.tail)

    # -- crown decomposition ---------------------------------------------------

    def crown_coefficient(self, l: int, j: int) -> CoeffSeries:
        """Coefficient function f_lj(z) with f_lj[k] = a[k+l, k+j]; needs l*j = 0."""
        if l * j != 0:
            raise SeriesError("crown indices need l*j = 0")
        D = self.trunc_total
        kmax = (D - l - j) // 2
        if kmax < 0:
            return CoeffSeries.zero(0)
        ks = np.arange(kmax + 1)
        return CoeffSeries(self.coeffs[ks + l, ks + j])

    def crown_decompose(self) -> list[tuple[int, int, CoeffSeries]]:
        """All crown entries (l, j, f_lj) with l*j = 0 covering every a[m,n]."""
        D = self.trunc_total
        out = [(0, 0, self.crown_coefficient(0, 0))]
        for l in range(1, D + 1):
            out.append((l, 0, self.crown_coefficient(l, 0)))
        for j in range(1, D + 1):
            out.append((0, j, self.crown_coefficient(0, j)))
        return out

    @staticmethod
    def crown_reassemble(entries: Iterable[tuple[int, int, CoeffSeries]], D: int) -> "CrownSeries":
        c = np.zeros((D + 1, D + 1), dtype=np.complex128)
        for l, j, h in entries:
            kmax = min(h.trunc_z, (D - l - j) // 2)
            for k in range(kmax + 1):
                c[k + l, k + j] += h.coeffs[k]
        return CrownSeries(c, D)

    # -- norms -----------------------------------------------------------------

    def crown_norm(self, np_: CrownNormParams) -> float:
        """||f||_{omega,beta,r} with disk sups sampled on the boundary circle."""
        if abs(np_.omega) >= np_.radius**2 - np_.beta:
            raise SeriesError(
                f"empty crown: |omega| = {abs(np_.omega):.3g} >= r^2 - beta = "
                f"{np_.radius ** 2 - np_.beta:.3g}"
            )
        total = 0.0
        rpow = np_.radius ** np.arange(self.trunc_total + 1)
        for l, j, h in self.crown_decompose():
            m = h.disk_max(np_.omega, np_.beta, np_.boundary_samples)
            if m != 0.0:
                total += m * rpow[l + j]
        return total

    def norm_refinement_delta(self, np_: CrownNormParams) -> float:
        """Difference of the norm when boundary sampling is doubled.

        The sampling approximation has no error bound here; this reports the
        observed refinement delta instead.
        """
        finer = CrownNormParams(
            np_.omega, np_.beta, np_.radius, 2 * np_.boundary_samples
        )
        return abs(self.crown_norm(finer) - self.crown_norm(np_))

    def full_norm(self, r: float) -> float:
        """|f|_r = sum |a[m,n]| r^(m+n) (plain weighted 1-norm)."""
        D = self.trunc_total
        rpow = r ** np.arange(D + 1)
        w = rpow[:, None] * rpow[None, :]
        return float(np.sum(np.abs(self.coeffs) * w))

    # -- evaluation --------------------------------------------------------------

    def eval(self, xi, eta):
        """Pointwise evaluation (vectorized over matching array arguments)."""
        xi = np.asarray(xi, dtype=np.complex128)
        eta = np.asarray(eta, dtype=np.complex128)
        D = self.trunc_total
        out = np.zeros(np.broadcast(xi, eta).shape, dtype=np.complex128)
        for m in range(D, -1, -1):
            row = np.zeros_like(out)
            for n in range(D - m, -1, -1):
                row = row * eta + self.coeffs[m, n]
            out = out * xi + row
        return out if out.shape else complex(out)

    # -- truncated-ring analytics -------------------------------------------------

    def exp(self, a: complex = 1.0) -> "CrownSeries":
        """exp(a*f) summed until the term's max coefficient is below tolerance."""
        D = self.trunc_total
        c0 = a * complex(self.coeffs[0, 0])
        if abs(c0.real) >= 50.0:
            raise SeriesError(f"exp overflow guard tripped: |Re(a f(0,0))| = {abs(c0.real):.3g}")
        g = a * self
        g = g - complex(g.coeffs[0, 0])
        acc = CrownSeries.constant(1.0, D)
        term = CrownSeries.constant(1.0, D)
        for k in range(1, 2 * (D + 1)):
            term = multiply(term, g) * (1.0 / k)
            acc = acc + term
            if term.max_abs_coeff() < EXP_TAIL_TOL:
                break
        return acc * np.exp(c0)

    def log(self) -> "CrownSeries":
        """Principal log of a series with constant term away from the cut."""
        D = self.trunc_total
        c0 = complex(self.coeffs[0, 0])
        if c0 == 0 or (c0.real < 0 and abs(c0.imag) < 1e-14 * abs(c0)):
            raise SeriesError("log branch-cut proximity at constant term")
        u = self * (1.0 / c0) - 1.0
        acc = CrownSeries.constant(np.log(c0), D)
        term = CrownSeries.constant(1.0, D)
        for k in range(1, D + 2):
            term = multiply(term, u)
            if term.max_abs_coeff() < EXP_TAIL_TOL:
                break
            acc = acc + term * ((-1.0) ** (k + 1) / k)
        return acc

    def sqrt(self) -> "CrownSeries":
        """Principal square root via exp(log/2)."""
        return self.log().exp(0.5)

    def substitute(self, X: "CrownSeries", Y: "CrownSeries") -> "CrownSeries":
        """h(X(xi,eta), Y(xi,eta)) in the truncated ring (Horner in both slots)."""
        D = self._matched(X)
        X._matched(Y)
        ypow = [CrownSeries.constant(1.0, D)]
        for _ in range(D):
            ypow.append(multiply(ypow[-1], Y))
        out = CrownSeries.zero(D)
        for m in range(D, -1, -1):
            row = CrownSeries.zero(D)
            for n in range(D - m + 1):
                a = self.coeffs[m, n]
                if a != 0.0:
                    row = row + ypow[n] * a
            out = multiply(out, X) + row
        return out

    def compose_z(self, h: CoeffSeries) -> "CrownSeries":
        """h(self): univariate h evaluated on a bivariate argument (Horner)."""
        D = self.trunc_total
        out = CrownSeries.constant(h.coeffs[-1], D)
        for k in range(h.trunc_z - 1, -1, -1):
            out = multiply(out, self) + complex(h.coeffs[k])
        return out

    # -- serialization -------------------------------------------------------------

    def to_json(self) -> list:
        """Coefficients as [re, im] pairs in graded-lexicographic order.

        Order: total degree d = m+n ascending, then m ascending within d.
        """
        out = []
        for d in range(self.trunc_total + 1):
            for m in range(d + 1):
                c = self.coeffs[m, d - m]
                out.append([float(c.real), float(c.imag)])
        return out

    @staticmethod
    def from_json(data: Sequence[Sequence[float]]) -> "CrownSeries":
        n = len(data)
        D = 0
        while (D + 1) * (D + 2) // 2 < n:
            D += 1
        if (D + 1) * (D + 2) // 2 != n:
            raise SeriesError("coefficient list length is not triangular")
        c = np.zeros((D + 1, D + 1), dtype=np.complex128)
        it = iter(data)
        for d in range(D + 1):
            for m in range(d + 1):
                re, im = next(it)
                c[m, d - m] = complex(re, im)
        return CrownSeries(c, D)


# ---------------------------------------------------------------------------
# free functions
# ---------------------------------------------------------------------------


def multiply(f: CrownSeries, g: CrownSeries) -> CrownSeries:
    """Exact truncated product; terms of total degree > D are dropped."""
    D = f._matched(g)
    out = np.zeros((D + 1, D + 1), dtype=np.complex128)
    rows, cols = np.nonzero(f.coeffs)
    for m, n in zip(rows, cols):
        a = f.coeffs[m, n]
        out[m:, n:] += a * g.coeffs[: D + 1 - m, : D + 1 - n]
    return CrownSeries(out, D, tail=f.tail + g.tail)


def crown_decompose(f: CrownSeries) -> list[tuple[int, int, CoeffSeries]]:
    return f.crown_decompose()


def crown_norm(f: CrownSeries, np_: CrownNormParams) -> float:
    return f.crown_norm(np_)


def exp_series(f: CrownSeries, a: complex = 1.0) -> CrownSeries:
    return f.exp(a)


def pair_norm(fg: tuple[CrownSeries, CrownSeries], np_: CrownNormParams) -> float:
    """||(f,g)|| = ||f|| + ||g||."""
    return fg[0].crown_norm(np_) + fg[1].crown_norm(np_)


def rotation_factor(alpha: CoeffSeries, b: float, D: int) -> CrownSeries:
    """e^{i b alpha(xi eta)} lifted to the bivariate ring.

    The exponential is carried at z-degree D//2, the largest degree the lift
    retains, so that paired rotations cancel exactly in the truncated ring.
    """
    return CrownSeries.from_z_series(alpha.truncate(D // 2).exp(1j * b), D)


def compose_rotated(
    h: CrownSeries,
    b: float,
    alpha: CoeffSeries,
    f: CrownSeries,
    g: CrownSeries,
    b_limit: float | None = 1.0,
) -> CrownSeries:
    """h(e^{i b alpha(xi eta)} xi + f, e^{-i b alpha(xi eta)} eta + g).

    The rotation exponent is expanded with the univariate exponential and the
    substitution is done by Horner evaluation in the truncated ring.
    """
    if b_limit is not None and abs(b) > b_limit:
        raise SeriesError(f"|b| = {abs(b):.3g} exceeds limit {b_limit:.3g}")
    D = h._matched(f)
    h._matched(g)
    rot = rotation_factor(alpha, b, D)
    rot_inv = rotation_factor(alpha, -b, D)
    X = multiply(rot, CrownSeries.xi(D)) + f
    Y = multiply(rot_inv, CrownSeries.eta(D)) + g
    return h.substitute(X, Y)


MapPair = tuple[CrownSeries, CrownSeries]


def identity_pair(D: int) -> MapPair:
    return (CrownSeries.xi(D), CrownSeries.eta(D))


def substitute_pair(F: MapPair, G: MapPair) -> MapPair:
    """Composition F(G) of maps given as coefficient-series pairs."""
    return (F[0].substitute(G[0], G[1]), F[1].substitute(G[0], G[1]))


def invert_near_identity(
    U: MapPair,
    inverse_tol: float = INVERSE_TOL,
    max_iters: int = MAX_INVERSE_ITERS,
    guard: tuple[CrownNormParams, float, float] | None = None,
) -> MapPair:
    """V with (Id+U)o(Id+V) = Id up to truncation, via V <- -U o (Id+V).

    ``guard``, when given, is (norm params at (beta', r'), r', r'') and enforces
    the smallness precondition ||U|| < beta' (r'-r'') / (30 r') before iterating.
    """
    u, v = U
    D = u._matched(v)
    if guard is not None:
        np_, rp, rpp = guard
        bound = np_.beta * (rp - rpp) / (30.0 * rp)
        nu = pair_norm(U, np_)
        if nu >= bound:
            raise SeriesError(
                f"near-identity inversion rejected: ||U|| = {nu:.3g} >= {bound:.3g}"
            )
    xi, eta = identity_pair(D)
    V = (-u, -v)
    for _ in range(max_iters):
        X = xi + V[0]
        Y = eta + V[1]
        Vn = (-u.substitute(X, Y), -v.substitute(X, Y))
        delta = max(
            float(np.max(np.abs(Vn[0].coeffs - V[0].coeffs))),
            float(np.max(np.abs(Vn[1].coeffs - V[1].coeffs))),
        )
        V = Vn
        if delta < inverse_tol:
            return V
    raise SeriesError(f"near-identity inversion did not converge in {max_iters} iterations")
