"""End-to-end driver: preparation, iteration loop, curve extraction,
smoothness diagnostics, and the command-line interface.

The pipeline is

    surface (or direct pair) -> diagonalize -> prenormalize -> radius search
      -> [case 2: one preliminary step] -> iterate main steps with resonance
      excision -> per-omega conjugacy extraction.

Reports are deterministic: identical configs produce byte-identical JSON and
CSV outputs (no clocks, no global RNG).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .involution import InvolutionPair, compose_sigma, skew_term
from .kamstep import StepGeometry, divisor_minimum, main_step
from .moserwebster import (
    BishopSurface,
    DiagonalFrame,
    diagonalize,
    hyperbola_image,
    surface_from_config,
    write_hyperbola_csv,
)
from .prenormal import (
    practical_beta,
    prenormalize,
    radius_search,
)
from .series import CoeffSeries, CrownNormParams, CrownSeries, SeriesError
from .sieve import IntervalSet, build_schedule, excise_resonances, measure_excluded
from .transforms import chain_apply

CONVERGENCE_FLOOR = 1e-13


class ConfigError(ValueError):
    """Malformed run configuration; carries a field-path diagnostic."""


@dataclass
class RunConfig:
    surface: dict | None = None
    direct: dict | None = None
    s_hint: int = 1
    degree: int | None = None
    N: int | None = None
    mode: str = "practical"
    max_nu: int = 3
    omega_count: int = 9
    omega_window: float = 0.9
    n_curve_points: int = 64
    boundary_samples: int = 64
    convergence_floor: float = CONVERGENCE_FLOOR
    out_dir: str = "out"

    def __post_init__(self):
        if self.mode not in ("practical", "rigorous"):
            raise ConfigError(f"mode: must be 'practical' or 'rigorous', got {self.mode!r}")
        if self.surface is None and self.direct is None:
            raise ConfigError("surface|direct: exactly one input block is required")
        if self.surface is not None and self.direct is not None:
            raise ConfigError("surface|direct: give only one input block")
        if self.N is None:
            self.N = 16 * self.s_hint
        if self.degree is None:
            self.degree = 2 * (2 * self.N + 2)
        if self.degree < 2 * (2 * self.N + 2):
            raise ConfigError(
                f"degree: need degree >= 2(2N+2) = {2 * (2 * self.N + 2)}, got {self.degree}"
            )
        for name in ("max_nu", "omega_count", "n_curve_points", "boundary_samples"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if not 0 < self.omega_window <= 1:
            raise ConfigError("omega_window: must lie in (0, 1]")
        if self.convergence_floor <= 0:
            raise ConfigError("convergence_floor: must be positive")

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown configuration field")
        try:
            return RunConfig(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from e


FIXTURES = {
    "linear": {
        "surface": {"gamma": 0.77, "degree": 12, "f_monomials": []},
        "s_hint": 1,
        "N": 2,
        "degree": 12,
        "max_nu": 2,
    },
    "cubic": {
        "surface": {
            "gamma": 0.77,
            "degree": 12,
            "f_monomials": [
                [3, 0, 0.08, 0.0],
                [2, 1, 0.05, 0.02],
                [4, 0, 0.03, 0.01],
            ],
        },
        "s_hint": 1,
        "N": 2,
        "degree": 12,
        "max_nu": 3,
    },
}


def pair_from_direct(cfg: dict, D: int) -> InvolutionPair:
    try:
        alpha = CoeffSeries.from_json(cfg["alpha"]).project_real(1e-8)
        p = np.zeros((D + 1, D + 1), dtype=np.complex128)
        q = np.zeros((D + 1, D + 1), dtype=np.complex128)
        for m, n, re, im in cfg.get("p_monomials", []):
            p[int(m), int(n)] = complex(re, im)
        for m, n, re, im in cfg.get("q_monomials", []):
            q[int(m), int(n)] = complex(re, im)
    except (KeyError, IndexError, ValueError) as e:
        raise ConfigError(f"direct: {e}") from e
    return InvolutionPair(alpha, CrownSeries(p, D), CrownSeries(q, D), 1)


@dataclass
class KamState:
    nu: int
    pair: InvolutionPair
    O: IntervalSet
    r: float
    eps_schedule: object
    chain: list = field(default_factory=list)  # per-step [phi, theta] links
    prelim_chain: list = field(default_factory=list)  # diag/PD/scaling composite
    history: list = field(default_factory=list)
    eps_measured: list = field(default_factory=list)
    skew_measured: list = field(default_factory=list)
    sieve_rows: list = field(default_factory=list)
    status: str = "running"
    mode: str = "practical"
    s: int = 1
    sigma_o: object = None  # original composed map (component series pair)
    surface: BishopSurface | None = None
    frame: DiagonalFrame | None = None
    branch: str = "case1"
    lam0: float = 0.0

    def omega_samples(self, beta: float, r: float, count: int = 5) -> tuple:
        lim = r * r - beta
        win = self.O.intersect(IntervalSet.interval(-lim, lim))
        pts = win.sample(count)
        if pts.size == 0:
            raise SeriesError("surviving parameter set is empty in the working window")
        return tuple(float(x) for x in pts)


def _measure_pair(pair, omegas, beta, r, ns=64) -> tuple[float, float]:
    g = StepGeometry(r, 0.75 * r, beta, eps=1.0, delta=1.0, omega_samples=omegas,
                     boundary_samples=ns)
    eps = 10.0 * max(g.sup_norm(pair.p, beta, r), g.sup_norm(pair.q, beta, r))
    skew = g.sup_norm(skew_term(pair), beta, r)
    return eps, skew


def prepare(config: RunConfig) -> tuple[KamState, dict]:
    """Build, normalize and branch; lands at the iteration's entry state."""
    D = config.degree
    record: dict = {"mode": config.mode}
    surface = frame = None
    if config.surface is not None:
        surface = surface_from_config(config.surface)
        if surface.trunc_total != D:
            surface = BishopSurface(
                surface.gamma, CrownSeries(_pad(surface.f.coeffs, D), D)
            )
        frame, pair = diagonalize(surface)
        record["lambda"] = frame.lam
        lam0 = frame.lam
    else:
        pair = pair_from_direct(config.direct, D)
        lam0 = float(pair.alpha.coeffs[0].real)
        record["lambda"] = lam0

    sigma_o = compose_sigma(pair)
    alpha_tail = float(np.max(np.abs(pair.alpha.coeffs[1:]))) if pair.alpha.trunc_z else 0.0
    if config.direct is not None and alpha_tail > 1e-14:
        # a direct pair with a non-constant exponent is already in prepared
        # form: skip the normalization stage
        prep, chain_pre = pair, []
        record["prenormalization"] = {"skipped": "direct input in prepared form"}
    else:
        prep, chain_pre, pre_report = prenormalize(pair, config.N)
        record["prenormalization"] = _jsonable(pre_report)
        if pre_report.get("nondegeneracy") == "degenerate":
            # a vanishing twist only blocks the sieve when there is something
            # to sieve; the unperturbed pair runs through trivially
            pert = max(prep.p.max_abs_coeff(), prep.q.max_abs_coeff())
            if pert > 1e-13:
                raise SeriesError(
                    "prepared exponent is degenerate: no z^s coefficient found"
                )
    s = prep.s_order
    rs = radius_search(prep, config.N, mode=config.mode)
    record["radius_search"] = {
        "r_star": rs.r_star,
        "A": rs.A,
        "eps0": rs.eps0,
        "branch": rs.branch,
        "skew_measured": rs.skew_measured,
        "skew_threshold": rs.skew_threshold,
        "rigorous_feasible": rs.rigorous_feasible,
        "rigorous_lhs": rs.rigorous_lhs,
        "alpha_conditions": rs.alpha_conditions,
        "trial": _jsonable(rs.trial),
    }

    lam_prep = float(prep.alpha.coeffs[0].real)
    if rs.branch == "case1" or rs.A == 0.0:
        pair0, r0, eps0 = prep, rs.r_star, max(rs.eps0, 1e-16)
        O0 = IntervalSet.interval(-r0 * r0, r0 * r0)
        prelim_links = []
        record["preliminary_step"] = None
    else:
        r_star = rs.r_star
        beta = practical_beta(rs.A, s, r_star)
        O_full = IntervalSet.interval(-r_star * r_star, r_star * r_star)
        g0 = StepGeometry(r_star, 0.75 * r_star, beta, eps=rs.A, delta=1.0, s=s,
                          omega_samples=tuple(O_full.sample(7)),
                          boundary_samples=config.boundary_samples)
        dmin = divisor_minimum(prep.alpha, g0, g0.K_cut(D) + 1, g0.beta_tilde)
        delta = min(100.0 * rs.A ** (1.0 / (60.0 * s)), 0.9 * dmin)
        O_delta = excise_resonances(O_full, prep.alpha, g0.K_cut(D), delta)
        omegas_delta = tuple(O_delta.sample(7))
        g1 = StepGeometry(r_star, 0.75 * r_star, beta, eps=rs.A, delta=1.0, s=s,
                          omega_samples=omegas_delta,
                          boundary_samples=config.boundary_samples)
        delta = min(delta, 0.9 * divisor_minimum(prep.alpha, g1, g1.K_cut(D) + 1,
                                                 g1.beta_tilde))
        geom = StepGeometry(
            r_star, 0.75 * r_star, beta, eps=rs.A, delta=delta, s=s,
            omega_samples=omegas_delta,
            boundary_samples=config.boundary_samples,
        )
        pair0, links, rep = main_step(prep, geom)
        record["preliminary_step"] = rep.to_dict()
        prelim_links = list(links)
        r0 = 0.75 * r_star
        eps0 = rs.A ** (49.0 / 50.0)
        O0 = O_delta.intersect(IntervalSet.interval(-r0 * r0, r0 * r0))

    schedule = build_schedule(s, r0, min(eps0, r0 * r0 * 0.99), config.max_nu + 1)
    record["schedule"] = schedule.to_dict()

    beta0 = practical_beta(eps0, s, r0)
    state = KamState(
        nu=0, pair=pair0, O=O0, r=r0, eps_schedule=schedule,
        prelim_chain=list(chain_pre) + prelim_links,
        status="prepared", mode=config.mode, s=s,
        sigma_o=sigma_o.components(), surface=surface, frame=frame,
        branch=rs.branch, lam0=lam_prep,
    )
    omegas = state.omega_samples(beta0, r0)
    eps_m, skew_m = _measure_pair(pair0, omegas, beta0, r0, config.boundary_samples)
    state.eps_measured.append(eps_m)
    state.skew_measured.append(skew_m)
    zs = np.array(omegas)
    record["alpha0_minus_lambda_sup"] = float(
        np.max(np.abs(pair0.alpha.eval(zs).real - lam_prep))
    )
    record["alpha0_minus_lambda_bound"] = 0.25
    record["alpha_hypotheses"] = _alpha_entry_hypotheses(pair0.alpha, s, r0, beta0)
    # entry hypotheses are stated against the schedule's eps0, with the
    # measured quantities required to sit below them
    eps0_sched = max(eps0, eps_m)
    record["entry"] = {
        "eps_measured": eps_m,
        "eps0_schedule": eps0_sched,
        "skew_measured": skew_m,
        "p_hypothesis_pass": bool(eps_m <= eps0_sched * (1 + 1e-12)),
        "skew_hypothesis_bound": eps0_sched**1.5 / 3.0,
        "skew_hypothesis_pass": bool(skew_m < eps0_sched**1.5 / 3.0),
    }
    return state, record


def _pad(coeffs: np.ndarray, D: int) -> np.ndarray:
    out = np.zeros((D + 1, D + 1), dtype=np.complex128)
    n = min(coeffs.shape[0], D + 1)
    out[:n, :n] = coeffs[:n, :n]
    return out


def _alpha_entry_hypotheses(alpha: CoeffSeries, s: int, r0: float, beta0: float) -> dict:
    """The entry hypotheses on the exponent, each measured on
    the working window and paired with its bound."""
    lim = max(r0 * r0 - beta0, 1e-12)
    zs = np.linspace(-lim, lim, 201)
    vals = alpha.eval(zs).real
    fact = float(math.factorial(s))
    ds = np.abs(alpha.derivative(s).eval(zs))
    out = {
        "range": [float(vals.min()), float(vals.max())],
        "range_window": [-0.125, 4 * np.pi + 0.125],
        "range_pass": bool(vals.min() > -0.125 and vals.max() < 4 * np.pi + 0.125),
        "norm_sup": float(np.max(np.abs(vals))),
        "norm_bound": 4 * np.pi + 0.25,
        "ds_minus_sfact_sup": float(np.max(np.abs(ds - fact))),
        "ds_bound": fact / 16.0,
    }
    highs = [
        float(np.max(np.abs(alpha.derivative(k).eval(zs))))
        for k in range(s + 1, min(16 * s, alpha.trunc_z) + 1)
    ]
    out["high_derivative_sup"] = max(highs) if highs else 0.0
    out["high_derivative_bound"] = 0.25 / r0
    if s >= 2:
        lows = [
            float(np.max(np.abs(alpha.derivative(k).eval(zs))))
            for k in range(1, s)
        ]
        out["low_derivative_sup"] = max(lows) if lows else 0.0
        out["low_derivative_bound"] = 1.0 / 16.0
    return out


def iterate(state: KamState, max_nu: int, config: RunConfig) -> KamState:
    """The loop: excise resonances, run a main step, record, repeat."""
    D = state.pair.trunc_total
    sch = state.eps_schedule
    while state.nu < max_nu:
        nu = state.nu
        r_nu = sch.r[nu]
        r_next = sch.r[nu + 1]
        beta_nu = practical_beta(state.eps_measured[-1], state.s, r_nu)
        eps_nu = max(state.eps_measured[-1], 1e-300)
        if eps_nu < config.convergence_floor or state.skew_measured[-1] < config.convergence_floor:
            state.status = "converged-to-truncation"
            break
        omegas = state.omega_samples(beta_nu, r_nu)
        g0 = StepGeometry(r_nu, r_next, beta_nu, eps=eps_nu, delta=1.0, s=state.s,
                          omega_samples=omegas, boundary_samples=config.boundary_samples)
        K_cut = g0.K_cut(D)
        delta_paper = eps_nu ** (1.0 / (64.0 * state.s))
        dmin = divisor_minimum(state.pair.alpha, g0, K_cut + 1, g0.beta_tilde)
        delta = delta_paper if state.mode == "rigorous" else min(delta_paper, 0.9 * dmin)

        window = IntervalSet.interval(-r_next * r_next, r_next * r_next)
        O_shrunk = state.O.intersect(window)
        O_next = excise_resonances(O_shrunk, state.pair.alpha, K_cut, delta)
        beta_next = practical_beta(eps_nu, state.s, r_next)
        mes = measure_excluded(
            O_shrunk, O_next,
            (-r_next * r_next + beta_next, r_next * r_next - beta_next),
            eps_nu=eps_nu, s=state.s,
        )
        state.sieve_rows.append(
            {
                "nu": nu,
                "surviving_measure": O_next.measure(),
                "excluded_measure": mes["measured"],
                "paper_bound_mes": mes["paper_bound_mes"],
                "bound_vacuous": mes["bound_vacuous"],
                "delta": delta,
                "K": K_cut,
            }
        )
        if not O_next:
            state.status = "empty-parameter-set"
            break

        try:
            omegas_next = tuple(
                float(x)
                for x in O_next.intersect(
                    IntervalSet.interval(-(r_next**2 - beta_nu), r_next**2 - beta_nu)
                ).sample(5)
            )
            if not omegas_next:
                raise SeriesError("no valid omega samples after excision")
            # recalibrate delta on the surviving samples: the excision grid and
            # the step's working grid must see the same divisor floor
            g1 = StepGeometry(
                r_nu, r_next, beta_nu, eps=eps_nu, delta=1.0, s=state.s,
                omega_samples=omegas_next, boundary_samples=config.boundary_samples,
            )
            dmin_next = divisor_minimum(state.pair.alpha, g1, K_cut + 1, g1.beta_tilde)
            if state.mode == "practical":
                delta = min(delta, 0.9 * dmin_next)
            geom = StepGeometry(
                r_nu, r_next, beta_nu, eps=eps_nu, delta=delta, s=state.s,
                omega_samples=omegas_next, boundary_samples=config.boundary_samples,
            )
            pair_next, links, rep = main_step(state.pair, geom)
        except SeriesError as e:
            state.status = f"step-failed: {e}"
            break

        state.pair = pair_next
        state.O = O_next
        state.chain.append(links)
        state.history.append(rep.to_dict())
        state.nu = nu + 1
        state.r = r_next
        eps_m, skew_m = _measure_pair(
            pair_next, geom.omega_samples, geom.beta_plus, r_next,
            config.boundary_samples,
        )
        state.eps_measured.append(eps_m)
        state.skew_measured.append(skew_m)
        if state.status == "prepared":
            state.status = "running"
    if state.status in ("running", "prepared"):
        state.status = "completed"
    return state


@dataclass
class CurveResult:
    omega: float
    mu_omega: float
    conjugacy_residual: float
    rho_equivariance_residual: float
    chain_tail: float
    samples: list = field(default_factory=list)

    def in_window(self, lam: float) -> bool:
        lo, hi = lam - np.pi / 4, lam + np.pi / 4
        return lo < self.mu_omega < hi


def full_chain(state: KamState) -> list:
    links = list(state.prelim_chain)
    for step_links in state.chain:
        links.extend(step_links)
    return links


def extract_curve(state: KamState, omega: float, n_pts: int) -> CurveResult:
    """Evaluate the conjugacy on {xi eta = omega} against the original map."""
    if omega not in state.O:
        raise SeriesError(f"omega = {omega} was excluded by the sieve")
    if n_pts < 1:
        raise SeriesError("need n_pts >= 1")
    R = state.r
    if abs(omega) >= R * R:
        raise SeriesError("omega outside the final window")
    mu = float(state.pair.alpha.eval(omega).real)
    links = full_chain(state)
    sigma1, sigma2 = state.sigma_o

    lo, hi = abs(omega) / R, R
    n_mod = max(2, int(np.ceil(n_pts / 8)))
    mods = np.exp(np.linspace(np.log(lo * 1.05), np.log(hi * 0.95), n_mod))
    args = 2.0 * np.pi * np.arange(8) / 8.0
    pts = [(m * np.exp(1j * a), omega / (m * np.exp(1j * a))) for m in mods for a in args]
    pts = pts[:max(n_pts, 8)]

    resid = 0.0
    rho_resid = 0.0
    samples = []
    rot = np.exp(1j * mu)
    for x0, y0 in pts:
        X, Y = chain_apply(links, x0, y0)
        sx = complex(sigma1.eval(X, Y))
        sy = complex(sigma2.eval(X, Y))
        Xr, Yr = chain_apply(links, rot * x0, y0 / rot)
        resid = max(resid, abs(sx - Xr), abs(sy - Yr))
        Xc, Yc = chain_apply(links, np.conj(x0), np.conj(y0))
        rho_resid = max(rho_resid, abs(Xc - np.conj(X)), abs(Yc - np.conj(Y)))
        samples.append(
            {
                "re_xi": x0.real, "im_xi": x0.imag,
                "re_x": X.real, "im_x": X.imag,
                "re_y": Y.real, "im_y": Y.imag,
            }
        )
    tail = 0.0
    if len(state.eps_measured) >= 2 and state.eps_measured[-2] > 0:
        ratio = min(0.5, state.eps_measured[-1] / state.eps_measured[-2])
        tail = state.eps_measured[-1] ** 0.8 * ratio / max(1e-300, 1.0 - ratio)
    return CurveResult(omega, mu, resid, rho_resid, tail, samples)


def smoothness_diagnostic(results: list[CurveResult]) -> dict:
    """Divided differences of omega -> mu_omega up to order min(3, n-1).

    A finite-difference diagnostic only; it makes no Whitney-regularity
    claim across the excised gaps.
    """
    pts = sorted(results, key=lambda c: c.omega)
    if len(pts) < 2:
        raise SeriesError("need at least two curve results with distinct omega")
    om = [c.omega for c in pts]
    if len(set(om)) != len(om):
        raise SeriesError("duplicate omega in smoothness diagnostic")
    mu = [c.mu_omega for c in pts]
    table = {0: list(zip(om, mu))}
    level = list(mu)
    xs = list(om)
    out = {"orders": {}}
    for order in range(1, min(3, len(pts) - 1) + 1):
        nxt = []
        for i in range(len(level) - 1):
            nxt.append((level[i + 1] - level[i]) / (xs[i + 1 + order - 1] - xs[i]))
        level = nxt
        out["orders"][order] = [float(v) for v in level]
    d1 = out["orders"].get(1, [0.0])
    out["lipschitz_estimate"] = float(max(abs(v) for v in d1)) if d1 else 0.0
    out["label"] = "finite-difference diagnostic (no Whitney-norm claim)"
    return out


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return float(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return str(obj)


def write_json(path: str, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_steps_csv(path: str, state: KamState) -> None:
    """One row per recorded nu; step-report columns where a step ran."""
    cols = [
        "nu", "eps_measured", "skew_measured", "p_plus_bound", "skew_plus_bound",
        "contraction_pass", "skew_contraction_pass",
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for nu in range(len(state.eps_measured)):
            rep = state.history[nu] if nu < len(state.history) else None
            w.writerow(
                [
                    nu,
                    repr(float(state.eps_measured[nu])),
                    repr(float(state.skew_measured[nu])),
                    repr(float(rep["entries"]["p_plus_norm"]["bound"])) if rep else "",
                    repr(float(rep["entries"]["skew_plus"]["bound"])) if rep else "",
                    rep["practical"]["contraction"]["pass"] if rep else "",
                    rep["practical"]["skew_contraction"]["pass"] if rep else "",
                ]
            )


def write_sieve_csv(path: str, state: KamState) -> None:
    cols = ["nu", "surviving_measure", "excluded_measure", "paper_bound_mes",
            "paper_bound_pyartli", "bound_vacuous"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in state.sieve_rows:
            from .sieve import resonance_zone_bound

            pb = resonance_zone_bound(state.s, row["delta"], row.get("K", 12))
            w.writerow(
                [
                    row["nu"],
                    repr(float(row["surviving_measure"])),
                    repr(float(row["excluded_measure"])),
                    repr(float(row["paper_bound_mes"])),
                    repr(float(pb)),
                    row["bound_vacuous"],
                ]
            )


def write_curves_csv(out_dir: str, curves: list[CurveResult]) -> None:
    with open(os.path.join(out_dir, "curves_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "mu_omega", "conjugacy_residual", "rho_residual", "chain_tail"])
        for c in curves:
            w.writerow([repr(float(c.omega)), repr(float(c.mu_omega)),
                        repr(float(c.conjugacy_residual)),
                        repr(float(c.rho_equivariance_residual)),
                        repr(float(c.chain_tail))])
    with open(os.path.join(out_dir, "curves.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "re_xi", "im_xi", "re_x", "im_x", "re_y", "im_y"])
        for c in curves:
            for srow in c.samples:
                w.writerow([repr(float(c.omega))] + [repr(float(srow[k])) for k in
                            ("re_xi", "im_xi", "re_x", "im_x", "re_y", "im_y")])
    plot_dir = os.path.join(out_dir, "plotdata")
    os.makedirs(plot_dir, exist_ok=True)
    for i, c in enumerate(curves):
        with open(os.path.join(plot_dir, f"curve_{i:03d}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_x", "im_x", "re_y", "im_y"])
            for srow in c.samples:
                w.writerow([repr(float(srow[k])) for k in ("re_x", "im_x", "re_y", "im_y")])


def select_omegas(state: KamState, count: int, window: float) -> tuple[list, list]:
    """Log-spaced |omega| of both signs inside the surviving set.

    Excluded samples are reported together with the resonance order whose
    divisor is smallest there (the order that excised them).
    """
    R2 = state.r**2
    mags = np.exp(np.linspace(np.log(1e-4 * R2), np.log(window * R2), count))
    n_top = max((row.get("K", 12) + 1 for row in state.sieve_rows), default=13)
    picked = []
    excluded = []
    for m in mags:
        for sgn in (1.0, -1.0):
            w = sgn * m
            if w in state.O:
                picked.append(float(w))
            else:
                a = float(state.pair.alpha.eval(w).real)
                divisors = [abs(np.exp(1j * n * a) - 1.0) for n in range(1, n_top + 1)]
                n_min = 1 + int(np.argmin(divisors))
                excluded.append(
                    {"omega": float(w), "resonance_order": n_min,
                     "divisor": float(min(divisors))}
                )
    return picked, excluded


def run_pipeline(config: RunConfig) -> tuple[KamState, dict, list]:
    state, record = prepare(config)
    state = iterate(state, config.max_nu, config)
    record["status"] = state.status
    record["eps_measured"] = list(state.eps_measured)
    record["skew_measured"] = list(state.skew_measured)
    record["surviving_measure"] = state.O.measure()
    record["window_measure"] = 2 * state.r**2
    record["chain_realness_defect"] = max(
        (l.realness_defect() for l in full_chain(state)), default=0.0
    )
    record["steps"] = state.history
    record["sieve"] = state.sieve_rows
    record["psi_factorizations"] = {
        "prelim_links": [l.label for l in state.prelim_chain],
        "step_links": [[l.label for l in links] for links in state.chain],
    }
    curves = []
    picked, excluded = select_omegas(state, config.omega_count, config.omega_window)
    for w in picked:
        try:
            curves.append(extract_curve(state, w, config.n_curve_points))
        except SeriesError:
            continue
    record["curves"] = [
        {
            "omega": c.omega,
            "mu_omega": c.mu_omega,
            "conjugacy_residual": c.conjugacy_residual,
            "rho_residual": c.rho_equivariance_residual,
            "chain_tail": c.chain_tail,
            "mu_in_window": c.in_window(state.lam0),
        }
        for c in curves
    ]
    record["excluded_omegas"] = excluded
    if len(curves) >= 2:
        record["smoothness"] = smoothness_diagnostic(curves)
    return state, record, curves


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------


def verify_suite(out_dir: str) -> dict:
    """The bundled invariant suite: linear fixture residuals, cubic fixture
    pipeline with contraction flags, sieve soundness spot checks."""
    report = {"checks": {}}

    def check(name, value, tol):
        report["checks"][name] = {
            "value": value, "tol": tol, "pass": bool(value <= tol)
        }

    lin_cfg = RunConfig.from_dict(dict(FIXTURES["linear"], out_dir=out_dir))
    state, record, curves = run_pipeline(lin_cfg)
    np_ = CrownNormParams(0.25 * state.r**2, state.r**2 / 16, state.r)
    check("linear_involution_residual", state.pair.involution_residual(np_), 1e-10)
    check("linear_eps", state.eps_measured[-1], 1e-10)
    if curves:
        check("linear_curve_residual", max(c.conjugacy_residual for c in curves), 1e-10)
        check("linear_rho_residual", max(c.rho_equivariance_residual for c in curves), 1e-10)
    report["linear"] = {"status": state.status, "eps": state.eps_measured}

    cub_cfg = RunConfig.from_dict(dict(FIXTURES["cubic"], out_dir=out_dir))
    state, record, curves = run_pipeline(cub_cfg)
    report["cubic"] = record
    ok_contr = all(
        rep["practical"]["contraction"]["pass"] for rep in state.history
    )
    report["checks"]["cubic_contraction_all_rounds"] = {
        "value": ok_contr, "pass": bool(ok_contr)
    }
    if curves:
        check("cubic_curve_residual", max(c.conjugacy_residual for c in curves), 1e-7)
        check("cubic_rho_residual", max(c.rho_equivariance_residual for c in curves), 1e-9)
        mu_ok = all(c.in_window(state.lam0) for c in curves)
        report["checks"]["cubic_mu_in_window"] = {"value": mu_ok, "pass": bool(mu_ok)}
    np_ = CrownNormParams(0.25 * state.r**2, state.r**2 / 16, state.r)
    check("cubic_involution_residual", state.pair.involution_residual(np_), 1e-9)

    from .sieve import pyartli_bound

    check("pyartli_spot", abs(pyartli_bound(2, 2.0, 0.08) - 0.8), 1e-12)
    report["pass"] = all(
        entry.get("pass", True) for entry in report["checks"].values()
    )
    return report


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _load_config(args) -> RunConfig:
    if args.seed_fixture:
        if args.seed_fixture not in FIXTURES:
            raise ConfigError(
                f"seed-fixture: unknown fixture {args.seed_fixture!r}; "
                f"available: {sorted(FIXTURES)}"
            )
        data = dict(FIXTURES[args.seed_fixture])
    else:
        path = args.config or os.environ.get("KAM_CONFIG")
        if not path:
            raise ConfigError("config: no --config path, KAM_CONFIG or --seed-fixture given")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError as e:
            raise ConfigError(f"config: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from e
    if args.mode:
        data["mode"] = args.mode
    if args.max_nu is not None:
        data["max_nu"] = args.max_nu
    if args.degree is not None:
        data["degree"] = args.degree
    if args.out:
        data["out_dir"] = args.out
    return RunConfig.from_dict(data)


def run_cli(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="crownkam",
        description="Invariant-hyperbola engine for perturbed hyperbolic Bishop quadrics",
    )
    parser.add_argument("command", choices=[
        "build", "prenorm", "iterate", "sieve", "curves", "verify", "report"
    ])
    parser.add_argument("--config", default=None)
    parser.add_argument("--mode", choices=["practical", "rigorous"], default=None)
    parser.add_argument("--max-nu", type=int, default=None, dest="max_nu")
    parser.add_argument("--degree", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed-fixture", default=None, dest="seed_fixture")
    args = parser.parse_args(argv)

    try:
        if args.command == "report":
            path = os.path.join(args.out or "out", "run_report.json")
            with open(path) as fh:
                data = json.load(fh)
            _print_summary(data)
            return 0
        if args.command == "verify":
            out_dir = args.out or "out"
            os.makedirs(out_dir, exist_ok=True)
            report = verify_suite(out_dir)
            write_json(os.path.join(out_dir, "run_report.json"), report)
            print("verify:", "PASS" if report["pass"] else "FAIL")
            for name, entry in report["checks"].items():
                print(f"  {name}: {'pass' if entry['pass'] else 'FAIL'}")
            return 0 if report["pass"] else 2
        config = _load_config(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 3

    os.makedirs(config.out_dir, exist_ok=True)
    try:
        if args.command == "build":
            if config.surface is None:
                print("configuration error: surface: build needs a surface block",
                      file=sys.stderr)
                return 3
            D = config.degree
            surface = surface_from_config(config.surface)
            frame, pair = diagonalize(
                BishopSurface(surface.gamma, CrownSeries(_pad(surface.f.coeffs, D), D))
            )
            np_ = CrownNormParams(0.001, 0.0002, 0.1)
            out = {
                "lambda": frame.lam,
                "pair": pair.to_json(),
                "involution_residual": pair.involution_residual(np_),
            }
            write_json(os.path.join(config.out_dir, "pair.json"), out)
            print(f"lambda = {frame.lam:.12g}, residual = {out['involution_residual']:.3e}")
            return 0 if out["involution_residual"] < 1e-9 else 2
        if args.command == "prenorm":
            state, record = prepare(config)
            write_json(os.path.join(config.out_dir, "prenorm_report.json"), record)
            print(f"branch = {state.branch}, eps0 = {state.eps_measured[0]:.3e}")
            return 0
        if args.command in ("iterate", "curves", "sieve"):
            state, record, curves = run_pipeline(config)
            write_json(os.path.join(config.out_dir, "run_report.json"), record)
            write_steps_csv(os.path.join(config.out_dir, "steps.csv"), state)
            write_sieve_csv(os.path.join(config.out_dir, "sieve.csv"), state)
            write_curves_csv(config.out_dir, curves)
            if state.surface is not None and curves:
                rows = []
                for c in curves[: min(4, len(curves))]:
                    rows.extend(
                        hyperbola_image(
                            state.pair, full_chain(state), c.omega, state.r, 5,
                            surface=state.surface, frame=state.frame,
                        )
                    )
                write_hyperbola_csv(os.path.join(config.out_dir, "hyperbolas.csv"), rows)
            _print_summary(record)
            failed = state.status.startswith("step-failed") or state.status == "empty-parameter-set"
            return 2 if failed else 0
    except (SeriesError,) as e:
        print(f"structural failure: {e}", file=sys.stderr)
        return 2
    return 3


def _print_summary(record: dict) -> None:
    print("status:", record.get("status", "?"))
    eps = record.get("eps_measured", [])
    if eps:
        print("eps:", " -> ".join(f"{e:.3e}" for e in eps))
    for c in record.get("curves", []):
        print(
            f"  omega={c['omega']:+.5e}  mu={c['mu_omega']:.8f}  "
            f"residual={c['conjugacy_residual']:.2e}  rho={c['rho_residual']:.2e}"
        )


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
