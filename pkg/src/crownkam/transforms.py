"""Transform-chain links: polynomial maps and product-preserving scalings.

A chain is an ordered list of links applied left to right to points of C^2;
each link also knows its series representation so chains can be conjugated
through and checked for rho-commutation (real coefficients).
"""

from __future__ import annotations

from dataclasses import dataclass

from .series import CoeffSeries, CrownSeries, MapPair, identity_pair


@dataclass(frozen=True)
class PolyLink:
    """A polynomial map given by its component series, with a stored inverse."""

    forward: MapPair
    inverse: MapPair
    label: str = "poly"

    def apply_point(self, x: complex, y: complex) -> tuple[complex, complex]:
        return (
            complex(self.forward[0].eval(x, y)),
            complex(self.forward[1].eval(x, y)),
        )

    def apply_inverse_point(self, x: complex, y: complex) -> tuple[complex, complex]:
        return (
            complex(self.inverse[0].eval(x, y)),
            complex(self.inverse[1].eval(x, y)),
        )

    def is_real(self, tol: float = 1e-9) -> bool:
        return self.forward[0].is_real(tol) and self.forward[1].is_real(tol)

    def realness_defect(self) -> float:
        return max(
            self.forward[0].realness_defect(), self.forward[1].realness_defect()
        )


@dataclass(frozen=True)
class ScalingLink:
    """(xi, eta) -> (theta(xi eta) xi, theta(xi eta)^-1 eta); preserves xi*eta."""

    theta: CoeffSeries
    label: str = "scaling"

    def theta_inv(self) -> CoeffSeries:
        return self.theta.reciprocal()

    def forward_pair(self, D: int) -> MapPair:
        th = CrownSeries.from_z_series(self.theta.truncate(D // 2), D)
        th_inv = CrownSeries.from_z_series(self.theta_inv().truncate(D // 2), D)
        from .series import multiply

        return (
            multiply(th, CrownSeries.xi(D)),
            multiply(th_inv, CrownSeries.eta(D)),
        )

    def inverse_pair(self, D: int) -> MapPair:
        return ScalingLink(self.theta_inv(), self.label).forward_pair(D)

    def apply_point(self, x: complex, y: complex) -> tuple[complex, complex]:
        t = complex(self.theta.eval(x * y))
        return (t * x, y / t)

    def apply_inverse_point(self, x: complex, y: complex) -> tuple[complex, complex]:
        t = complex(self.theta.eval(x * y))
        return (x / t, y * t)

    def is_real(self, tol: float = 1e-9) -> bool:
        return self.theta.is_real(tol)

    def realness_defect(self) -> float:
        return self.theta.realness_defect()


@dataclass(frozen=True)
class RadialLink:
    """(xi, eta) -> (t xi, +-t eta): radial rescale, optional eta sign flip."""

    t: float
    flip: bool = False
    label: str = "rescale"

    def apply_point(self, x: complex, y: complex) -> tuple[complex, complex]:
        s = -1.0 if self.flip else 1.0
        return (self.t * x, s * self.t * y)

    def apply_inverse_point(self, x: complex, y: complex) -> tuple[complex, complex]:
        s = -1.0 if self.flip else 1.0
        return (x / self.t, s * y / self.t)

    def is_real(self, tol: float = 1e-9) -> bool:
        return True

    def realness_defect(self) -> float:
        return 0.0


def chain_apply(chain, x: complex, y: complex) -> tuple[complex, complex]:
    """Evaluate the composition chain[0] o chain[1] o ... at a point.

    Chains are stored in composition order (outermost first), so the last
    link acts first.
    """
    for link in reversed(chain):
        x, y = link.apply_point(x, y)
    return x, y


def chain_apply_inverse(chain, x: complex, y: complex) -> tuple[complex, complex]:
    """Evaluate the inverse of the chain composition at a point."""
    for link in chain:
        x, y = link.apply_inverse_point(x, y)
    return x, y


def chain_realness_defect(chain) -> float:
    return max((link.realness_defect() for link in chain), default=0.0)


def poly_link_from_U(U: MapPair, U_inv_tail: MapPair, label: str = "near-id") -> PolyLink:
    """Id+U with its inverse Id+V, both stored as full component maps."""
    D = U[0].trunc_total
    xi, eta = identity_pair(D)
    return PolyLink((xi + U[0], eta + U[1]), (xi + U_inv_tail[0], eta + U_inv_tail[1]), label)
