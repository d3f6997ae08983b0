"""One iteration step: truncate, solve the cohomological equations,
conjugate by Id + U-hat, and restore the principal part by a
product-preserving scaling.

The step takes an involution pair whose perturbation (p, q) is of size
eps/10 with a small skew term, and returns a conjugated pair whose
perturbation is quadratically smaller, together with the transform and a
report pairing every measured quantity with the bound evaluated at the
instance's eps, delta and K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .involution import InvolutionPair, ReversibleMap, compose_sigma, skew_term, split_pair
from .series import (
    CoeffSeries,
    CrownNormParams,
    CrownSeries,
    MapPair,
    SeriesError,
    invert_near_identity,
    multiply,
    rotation_factor,
    substitute_pair,
)
from .transforms import PolyLink, ScalingLink, poly_link_from_U


@dataclass(frozen=True)
class StepGeometry:
    """Radii, crown widths and derived quantities of one step.

    beta_plus and beta_tilde follow beta^(5/4) and 16 beta^(5/4); when the
    working beta is too large for the asymptotic ordering beta_+ < beta~ < beta
    to hold (unavoidable at desk eps), they are capped at beta/2 and beta/4
    so the ordering survives.  K is real-valued; index cutoffs use the
    truncation-capped floor.
    """

    r: float
    r_plus: float
    beta: float
    eps: float
    delta: float
    s: int = 1
    omega_samples: tuple = ()
    boundary_samples: int = 64

    def __post_init__(self):
        if not 0 < self.r_plus < self.r:
            raise SeriesError("need 0 < r_plus < r")
        if self.eps <= 0 or self.delta <= 0:
            raise SeriesError("eps and delta must be positive")

    def r_m(self, m: int) -> float:
        return self.r_plus + (m / 8.0) * (self.r - self.r_plus)

    @property
    def r7(self) -> float:
        return self.r_m(7)

    @property
    def r_tilde(self) -> float:
        return self.r_m(4)

    @property
    def beta_tilde(self) -> float:
        return min(16.0 * self.beta**1.25, self.beta / 2.0)

    @property
    def beta_plus(self) -> float:
        return min(self.beta**1.25, self.beta_tilde / 2.0)

    @property
    def K_formula(self) -> float:
        return abs(np.log(self.eps)) / abs(np.log(self.r7 / self.r))

    def K_cut(self, D: int) -> int:
        return int(min(np.floor(self.K_formula), D))

    def sup_norm(self, f: CrownSeries, beta: float, r: float) -> float:
        """sup over the omega samples of the crown norm at (beta, r)."""
        worst = 0.0
        seen = False
        for w in self.omega_samples:
            if abs(w) >= r * r - beta:
                continue
            seen = True
            worst = max(
                worst,
                f.crown_norm(CrownNormParams(float(w), beta, r, self.boundary_samples)),
            )
        if not seen:
            raise SeriesError(
                f"no omega sample lies in the window |omega| < r^2 - beta = {r * r - beta:.3g}"
            )
        return worst

    def sup_coeff(self, h: CoeffSeries, beta: float, window: float) -> float:
        """sup over samples (restricted to |omega| < window) of the disk max."""
        worst = 0.0
        for w in self.omega_samples:
            if abs(w) >= window:
                continue
            worst = max(worst, h.disk_max(float(w), beta, self.boundary_samples))
        return worst


@dataclass
class StepReport:
    """Measured-versus-bound bookkeeping of one step; serializes to a dict."""

    eps: float
    delta: float
    K_formula: float
    K_cut: int
    entries: dict = field(default_factory=dict)
    practical: dict = field(default_factory=dict)

    def add(self, name: str, measured: float, bound: float | None = None):
        self.entries[name] = (
            {"measured": measured}
            if bound is None
            else {"measured": measured, "bound": bound, "pass": bool(measured <= bound)}
        )

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "K_formula": self.K_formula,
            "K_cut": self.K_cut,
            "entries": self.entries,
            "practical": self.practical,
        }


def truncate_K(
    p: CrownSeries, q: CrownSeries, K: float, geom: StepGeometry | None = None
) -> tuple[CrownSeries, CrownSeries, float]:
    """Keep crown indices l, j <= floor(K); returns the measured tail norm."""
    if K < 1:
        raise SeriesError("K must be >= 1")
    D = p._matched(q)
    kc = int(np.floor(K))

    def cut(f):
        entries = [(l, j, h) for l, j, h in f.crown_decompose() if max(l, j) <= kc]
        return CrownSeries.crown_reassemble(entries, D)

    pK, qK = cut(p), cut(q)
    tail = 0.0
    if geom is not None:
        tail = max(
            geom.sup_norm(p - pK, geom.beta_tilde, geom.r7),
            geom.sup_norm(q - qK, geom.beta_tilde, geom.r7),
        )
    return pK, qK, tail


def divisor_minimum(
    alpha: CoeffSeries, geom: StepGeometry, n_max: int, beta: float
) -> float:
    """min over resonance orders n <= n_max and crown disks of |e^{i n alpha} - 1|.

    The origin is always included: coefficient-series divisions are Taylor
    inversions at z = 0, so a resonance there degrades the representation
    even when every sampled omega is clear of it.
    """
    worst = np.inf
    th = 2.0 * np.pi * np.arange(geom.boundary_samples) / geom.boundary_samples
    for w in tuple(geom.omega_samples) + (0.0,):
        zs = w + beta * np.exp(1j * th) if beta > 0 else np.array([w + 0j])
        avals = alpha.eval(zs)
        for n in range(1, n_max + 1):
            worst = min(worst, float(np.min(np.abs(np.exp(1j * n * avals) - 1.0))))
    return float(worst)


def solve_cohomological(
    t: InvolutionPair,
    sigma: ReversibleMap,
    geom: StepGeometry,
    realness_tol: float = 1e-7,
) -> MapPair:
    """The approximate cohomological solution (u-hat, v-hat).

    Crown coefficients, with E_n = e^{i n alpha(z)} as truncated z-series:

        u_l0 = (f_l0 - E_{l+1} fbar_l0) / (2 (E_l - E_1)),    2 <= l <= K
        u_0j = (f_0j - E_{-(j-1)} fbar_0j) / (2 (E_{-j} - E_1)),  0 <= j <= K
        v_l0 = (g_l0 - E_{l-1} gbar_l0) / (2 (E_l - E_{-1})),  0 <= l <= K
        v_0j = (g_0j - E_{-(j+1)} gbar_0j) / (2 (E_{-j} - E_{-1})), 2 <= j <= K
        u_10 = v_01 = 0.

    The divisors are guarded by |e^{i n alpha}| >= delta/2 on the sampled
    crown disks for 0 < |n| <= K+1; the result is real (self-conjugate) and
    is projected after the realness defect is checked.
    """
    D = t.trunc_total
    K = geom.K_cut(D)
    dmin = divisor_minimum(t.alpha, geom, K + 1, geom.beta_tilde)
    if dmin < geom.delta / 2.0:
        raise SeriesError(
            f"small divisor {dmin:.3e} below delta/2 = {geom.delta / 2:.3e} on the disk"
        )
    Dz = D // 2
    E1 = t.alpha.truncate(Dz).exp(1j)
    Em1 = t.alpha.truncate(Dz).exp(-1j)

    def E(n: int) -> CoeffSeries:
        return t.alpha.truncate(Dz).exp(1j * n)

    u_entries = []
    v_entries = []
    for l in range(0, K + 1):
        if l >= 2:
            f_l0 = sigma.f.crown_coefficient(l, 0).truncate(Dz)
            num = f_l0 - E(l + 1) * f_l0.conj()
            den = (E(l) - E1) * 2.0
            u_entries.append((l, 0, (num * den.reciprocal()).truncate((D - l) // 2)))
        g_l0 = sigma.g.crown_coefficient(l, 0).truncate(Dz)
        num = g_l0 - E(l - 1) * g_l0.conj()
        den = (E(l) - Em1) * 2.0
        v_entries.append((l, 0, (num * den.reciprocal()).truncate((D - l) // 2)))
    for j in range(0, K + 1):
        f_0j = sigma.f.crown_coefficient(0, j).truncate(Dz)
        num = f_0j - E(-(j - 1)) * f_0j.conj()
        den = (E(-j) - E1) * 2.0
        u_entries.append((0, j, (num * den.reciprocal()).truncate((D - j) // 2)))
        if j >= 2:
            g_0j = sigma.g.crown_coefficient(0, j).truncate(Dz)
            num = g_0j - E(-(j + 1)) * g_0j.conj()
            den = (E(-j) - Em1) * 2.0
            v_entries.append((0, j, (num * den.reciprocal()).truncate((D - j) // 2)))
    u = CrownSeries.crown_reassemble(u_entries, D)
    v = CrownSeries.crown_reassemble(v_entries, D)
    scale = max(1.0, u.max_abs_coeff(), v.max_abs_coeff())
    defect = max(u.realness_defect(), v.realness_defect())
    if defect > realness_tol * scale:
        raise SeriesError(f"cohomological solution failed realness: {defect:.3e}")
    u = CrownSeries(u.coeffs.real, D)
    v = CrownSeries(v.coeffs.real, D)
    return (u, v)


def cohomological_residuals(
    t: InvolutionPair,
    uv: MapPair,
    pK: CrownSeries,
    qK: CrownSeries,
    geom: StepGeometry,
) -> dict:
    """Residuals of the two approximate cohomological equations and the
    skew of the solution, each against its bound at (eps, delta, K, skew)."""
    D = t.trunc_total
    u, v = uv
    rot_p = rotation_factor(t.alpha, 0.5, D)
    rot_m = rotation_factor(t.alpha, -0.5, D)
    R = (multiply(rot_p, CrownSeries.eta(D)), multiply(rot_m, CrownSeries.xi(D)))
    p01 = CrownSeries.from_z_series(t.p.crown_coefficient(0, 1), D)
    q10 = CrownSeries.from_z_series(t.q.crown_coefficient(1, 0), D)
    res1 = (
        multiply(rot_p, v)
        - u.substitute(R[0], R[1])
        + pK
        - multiply(p01, CrownSeries.eta(D))
    )
    res2 = (
        multiply(rot_m, u)
        - v.substitute(R[0], R[1])
        + qK
        - multiply(q10, CrownSeries.xi(D))
    )
    cross = multiply(multiply(rot_m, CrownSeries.xi(D)), res1) + multiply(
        multiply(rot_p, CrownSeries.eta(D)), res2
    )
    skew_in = geom.sup_norm(skew_term(t), geom.beta, geom.r)
    K = geom.K_cut(D)
    eps, delta = geom.eps, geom.delta
    bt, r7 = geom.beta_tilde, geom.r7
    bound_res = eps ** (61 / 32) / 80.0 + 6.0 * (K + 1) / delta * skew_in
    skew_uv = multiply(CrownSeries.eta(D), u) + multiply(CrownSeries.xi(D), v)
    return {
        "cohomo1": (geom.sup_norm(res1, bt, r7), bound_res),
        "cohomo2": (geom.sup_norm(res2, bt, r7), bound_res),
        "crossing_cohomo": (geom.sup_norm(cross, bt, r7), eps ** (61 / 32) / 20.0),
        "skew_uv": (
            geom.sup_norm(skew_uv, bt, r7),
            eps ** (61 / 32) / 16.0 + 5.0 * (K + 1) / delta * skew_in,
        ),
        "skew_in": skew_in,
    }


@dataclass(frozen=True)
class IntermediatePair:
    """Conjugated pair before rescaling: principal (e^{i alpha/2} + A)."""

    alpha: CoeffSeries
    A: CoeffSeries
    p_t: CrownSeries
    q_t: CrownSeries
    phi: PolyLink


def conjugate_step(
    t: InvolutionPair, uv: MapPair, geom: StepGeometry
) -> IntermediatePair:
    """tau~ = phi^-1 o tau o phi with phi = Id + U-hat.

    The new principal part is (e^{i alpha/2} + p_01) eta and its reciprocal
    partner; the split-off perturbation is returned with the transform.
    """
    D = t.trunc_total
    # invertibility needs room relative to the radii; the crown containment
    # itself is checked a posteriori (crown_escape_margin)
    np_guard = _first_valid_params(geom, geom.beta_tilde, geom.r7)
    if np_guard is not None:
        u_size = uv[0].crown_norm(np_guard) + uv[1].crown_norm(np_guard)
        if u_size >= (geom.r7 - geom.r_plus) / 8.0:
            raise SeriesError(
                f"conjugating map too large to invert: ||U|| = {u_size:.3g}"
            )
    phi_inv_tail = invert_near_identity(uv)
    phi = poly_link_from_U(uv, phi_inv_tail, label="cohomological")
    T = t.components()
    T_phi = substitute_pair(T, phi.forward)
    T_new = substitute_pair(phi.inverse, T_phi)
    A = t.p.crown_coefficient(0, 1).truncate(D // 2)
    Ehalf = t.alpha.truncate(D // 2).exp(0.5j)
    lam_series = Ehalf + A
    p_t = T_new[0] - multiply(
        CrownSeries.from_z_series(lam_series, D), CrownSeries.eta(D)
    )
    q_t = T_new[1] - multiply(
        CrownSeries.from_z_series(lam_series.reciprocal(), D), CrownSeries.xi(D)
    )
    return IntermediatePair(t.alpha, A, p_t, q_t, phi)


def _first_valid_params(geom: StepGeometry, beta: float, r: float):
    for w in geom.omega_samples:
        if abs(w) < r * r - beta:
            return CrownNormParams(float(w), beta, r, geom.boundary_samples)
    return None


def crown_escape_margin(
    phi: PolyLink, geom: StepGeometry, n_boundary: int = 24
) -> float:
    """How far phi(C^{r+}_{omega,beta+}) stays inside C^{r}_{omega,beta}.

    Samples boundary points of the smaller crown; returns the worst margin
    (positive = contained).
    """
    worst = np.inf
    for w in geom.omega_samples:
        if abs(w) >= geom.r_plus**2 - geom.beta_plus:
            continue
        for tb in np.linspace(0, 2 * np.pi, 6, endpoint=False):
            z = w + geom.beta_plus * np.exp(1j * tb)
            for tm in np.linspace(0, 2 * np.pi, n_boundary, endpoint=False):
                mod = np.sqrt(abs(z)) if abs(z) > 0 else 1e-6
                hi = geom.r_plus * 0.98
                lo = abs(z) / hi
                for m in (lo * 1.01, np.sqrt(lo * hi), hi * 0.99):
                    x = m * np.exp(1j * tm)
                    y = z / x
                    if abs(x) >= geom.r_plus or abs(y) >= geom.r_plus:
                        continue
                    X, Y = phi.apply_point(x, y)
                    worst = min(
                        worst,
                        geom.beta - abs(X * Y - w),
                        geom.r - abs(X),
                        geom.r - abs(Y),
                    )
    return float(worst)


def theta_scaling(
    inter: IntermediatePair, geom: StepGeometry, realness_tol: float = 1e-7
) -> tuple[InvolutionPair, ScalingLink]:
    """Product-preserving rescale restoring a unit-modulus principal part.

    Theta = ((e^{i a/2} + A)(e^{-i a/2} + Abar))^{1/4} via exp(log/4) in the
    truncated z-ring; the new exponent is
    alpha_+ = alpha - i (e^{-i a/2} A - e^{i a/2} Abar).
    """
    D = inter.p_t.trunc_total
    Dz = D // 2
    alpha = inter.alpha.truncate(Dz)
    A = inter.A.truncate(Dz)
    norm_A = geom.sup_coeff(A, geom.beta, geom.r**2 - geom.beta)
    if norm_A >= 1.0 / 16.0:
        raise SeriesError(f"scaling precondition ||A|| = {norm_A:.3g} >= 1/16")
    r_cond = 4.0 * (geom.r_tilde - geom.r_plus) / (3.0 * geom.r_plus)
    Ep = alpha.exp(0.5j)
    Em = alpha.exp(-0.5j)
    w = Em * A + Ep * A.conj() + A * A.conj()
    radicand = w + 1.0
    theta = radicand.log() * 0.25
    theta = theta.exp()
    defect = theta.realness_defect()
    if defect > realness_tol * max(1.0, float(np.max(np.abs(theta.coeffs)))):
        raise SeriesError(f"Theta failed realness: {defect:.3e}")
    theta = theta.project_real()
    link = ScalingLink(theta, label="theta-scaling")

    alpha_plus = inter.alpha.truncate(Dz) + (Em * A - Ep * A.conj()) * (-1j)
    alpha_plus = alpha_plus.project_real(realness_tol)

    # exact conjugation of the intermediate pair by the scaling
    lam_series = Ep + A
    T = (
        multiply(CrownSeries.from_z_series(lam_series, D), CrownSeries.eta(D)) + inter.p_t,
        multiply(CrownSeries.from_z_series(lam_series.reciprocal(), D), CrownSeries.xi(D))
        + inter.q_t,
    )
    fwd = link.forward_pair(D)
    T_phi = substitute_pair(T, fwd)
    prod = multiply(T_phi[0], T_phi[1])
    th_at = prod.compose_z(theta.truncate(Dz))
    th_inv_at = prod.compose_z(theta.reciprocal().truncate(Dz))
    T_out = (multiply(th_inv_at, T_phi[0]), multiply(th_at, T_phi[1]))
    out = split_pair(T_out, alpha_plus, s_order=geom.s)
    return out, link


def main_step(
    t: InvolutionPair, geom: StepGeometry
) -> tuple[InvolutionPair, list, StepReport]:
    """truncate -> sigma -> cohomological solve -> conjugate -> rescale.

    Returns the new pair, the transform chain [phi, theta-scaling] (in
    composition order) and the full measured-versus-bound report.
    """
    D = t.trunc_total
    report = StepReport(geom.eps, geom.delta, geom.K_formula, geom.K_cut(D))
    eps, delta, K = geom.eps, geom.delta, geom.K_cut(D)

    def stage(name, fn):
        try:
            return fn()
        except SeriesError as e:
            raise SeriesError(f"[{name}] {e}") from e

    p_norm = geom.sup_norm(t.p, geom.beta, geom.r)
    q_norm = geom.sup_norm(t.q, geom.beta, geom.r)
    report.add("p_norm_in", p_norm, eps / 10.0)
    report.add("q_norm_in", q_norm, eps / 10.0)
    np_check = _first_valid_params(geom, geom.beta, geom.r)
    if np_check is not None:
        report.add("involution_residual_in", t.involution_residual(np_check), 1e-9)

    pK, qK, tail = stage(
        "truncate", lambda: truncate_K(t.p, t.q, geom.K_cut(D), geom)
    )
    report.add("truncation_tail", tail, eps**2 / 10.0)
    report.add(
        "truncation_tail_geometric",
        tail,
        max(p_norm, q_norm) * (geom.r7 / geom.r) ** geom.K_cut(D),
    )

    sigma = stage("sigma", lambda: compose_sigma(t))
    report.add(
        "sigma_f_norm", geom.sup_norm(sigma.f, geom.beta_tilde, geom.r7), eps / 4.0
    )
    report.add(
        "sigma_g_norm", geom.sup_norm(sigma.g, geom.beta_tilde, geom.r7), eps / 4.0
    )

    uv = stage("cohomological", lambda: solve_cohomological(t, sigma, geom))
    report.add(
        "u_norm", geom.sup_norm(uv[0], geom.beta_tilde, geom.r7), eps ** (49 / 50) / 20.0
    )
    report.add(
        "v_norm", geom.sup_norm(uv[1], geom.beta_tilde, geom.r7), eps ** (49 / 50) / 20.0
    )
    coh = cohomological_residuals(t, uv, pK, qK, geom)
    skew_in = coh.pop("skew_in")
    report.add("skew_in", skew_in, eps**1.5 / 3.0)
    for name, (measured, bound) in coh.items():
        report.add(name, measured, bound)

    inter = stage("conjugate", lambda: conjugate_step(t, uv, geom))
    margin = crown_escape_margin(inter.phi, geom)
    report.add("crown_escape_margin", margin)
    if margin < 0:
        raise SeriesError(f"[conjugate] crown escape: margin {margin:.3e} < 0")

    t_plus, theta_link = stage("theta-scaling", lambda: theta_scaling(inter, geom))
    chain = [inter.phi, theta_link]

    p_plus = geom.sup_norm(t_plus.p, geom.beta_plus, geom.r_plus)
    q_plus = geom.sup_norm(t_plus.q, geom.beta_plus, geom.r_plus)
    bound_pq = eps ** (61 / 32) / 2.0 + 24.0 * (K + 1) / delta * skew_in
    bound_pq_18 = eps ** (61 / 32) / 2.0 + 18.0 * (K + 1) / delta * skew_in
    report.add("p_plus_norm", p_plus, bound_pq)
    report.add("q_plus_norm", q_plus, bound_pq)
    report.entries["pq_plus_bound_constant18"] = {
        "measured": max(p_plus, q_plus),
        "bound": bound_pq_18,
        "pass": bool(max(p_plus, q_plus) <= bound_pq_18),
    }
    skew_plus = geom.sup_norm(skew_term(t_plus), geom.beta_plus, geom.r_plus)
    report.add("skew_plus", skew_plus, eps ** (61 / 32))

    # derivative ladder of the exponent update: verbatim entries, plus the
    # Cauchy-normalized variants beta_+^k |.|/k! which carry the per-degree
    # factor the desk-scale beta cannot absorb
    fact = 1.0
    for k in range(0, 16 * geom.s + 1):
        if k > 0:
            fact *= k
        h = (t_plus.alpha - t.alpha).derivative(k)
        measured = geom.sup_coeff(h, geom.beta_plus, geom.r_plus**2 - geom.beta_plus)
        report.add(f"alpha_diff_k{k}", measured, eps ** (1 / 3) / 10.0)
        report.add(
            f"alpha_diff_cauchy_k{k}",
            measured * geom.beta_plus**k / fact,
            eps ** (1 / 3) / 10.0,
        )

    for kpow in (1, -1, 2, -2):
        th = theta_link.theta if kpow > 0 else theta_link.theta_inv()
        base = th if abs(kpow) == 1 else th * th
        dev = CoeffSeries(base.coeffs - np.eye(1, base.trunc_z + 1, 0)[0])
        report.add(
            f"theta_pow{kpow}_dev",
            geom.sup_coeff(dev, geom.beta_plus, geom.r_plus**2 - geom.beta_plus),
            0.75 * abs(kpow) * max(geom.sup_coeff(inter.A, geom.beta, geom.r**2 - geom.beta), 1e-300),
        )

    report.practical["contraction"] = {
        "measured": p_plus + q_plus,
        "bound": eps**1.15,
        "pass": bool(p_plus + q_plus <= eps**1.15),
    }
    report.practical["skew_contraction"] = {
        "measured": skew_plus,
        "bound": eps**1.4,
        "pass": bool(skew_plus <= eps**1.4),
    }
    report.practical["eps_out"] = 10.0 * max(p_plus, q_plus)
    return t_plus, chain, report
