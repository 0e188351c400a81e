"""Limiting quantities: thresholds, final size and outbreak probability.

Everything here is a deterministic functional of the offspring tables.  The
local spread between complexes is a branching process whose per-complex
offspring laws the tables hold; its smallest fixed points (found by monotone
iteration from zero, which correctly assigns weight 0 to infinite lines of
descent) yield:

  R_L       Perron root of the 2x2 mean matrix of the susceptibility-side
            process; threshold when there is no global infection.
  R*        mean number of global contacts emanating from a local clump,
            beta_g * E[S]; threshold when global infection is present,
            infinite whenever R_L >= 1.
  z         limiting major-outbreak fraction: unique root in (0, 1] of
            1 - z = f_S(exp(-beta_g z)) when R* > 1, else 0.
  rho       limiting major-outbreak probability.  For a constant infectious
            period rho = z; in general rho = 1 - xi with xi the smallest
            root of phi_A(beta_g (1 - s)) = s, where phi_A is the Laplace
            transform of the limiting clump severity, assembled from the
            fine-typed severity libraries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams, SeedSpec, ConfigError
from .tables import (TableSet, FineLibrarySet, build_table_set,
                     build_fine_libraries, cached, cache_key)


class NonConvergence(RuntimeError):
    """A fixed-point iteration failed to reach tolerance."""


NEAR_CRITICAL_BAND = 1e-3


@dataclass
class FixedPointInfo:
    iterations: int
    residual: float
    converged: bool


def _iterate(update, x0: np.ndarray, tol: float = 1e-12,
             max_iter: int = 100_000, order: str = "jacobi"):
    """Monotone fixed-point iteration from x0 (componentwise nondecreasing maps).

    order "jacobi" applies the map to the whole vector; "gauss-seidel"
    refreshes one coordinate at a time.  Both converge to the same smallest
    fixed point for monotone maps started below it.
    """
    x = np.array(x0, dtype=float)
    for it in range(1, max_iter + 1):
        if order == "jacobi":
            new = update(x)
        elif order == "gauss-seidel":
            new = x.copy()
            for i in range(new.size):
                new[i] = update(new)[i]
        else:
            raise ConfigError(f"unknown iteration order {order!r}")
        delta = float(np.max(np.abs(new - x)))
        x = new
        if delta < tol:
            return x, FixedPointInfo(it, delta, True)
    return x, FixedPointInfo(max_iter, delta, False)


def solve_progeny_pair(table_h, table_w, s: float, *, tol: float = 1e-12,
                       max_iter: int = 100_000, order: str = "jacobi"):
    """Smallest solution of the coupled total-progeny PGF pair at argument s.

    The pair (x, y) solves x = s g_H(s, x, y), y = s g_W(s, x, y); x is the
    progeny PGF of the branch started by a household entrant, y by a
    workplace entrant.
    """
    if not 0.0 <= s <= 1.0:
        raise ConfigError("s must lie in [0, 1]")

    def update(v):
        return np.array([s * table_h.pgf(s, v[0], v[1]),
                         s * table_w.pgf(s, v[0], v[1])])

    pair, info = _iterate(update, np.zeros(2), tol=tol, max_iter=max_iter,
                          order=order)
    return float(pair[0]), float(pair[1]), info


def branching_pgf(tables: TableSet, theta: float, s: float, *,
                  order: str = "jacobi"):
    """PGF of the total local progeny from an ancestor of random type.

    With the susceptibility tables this is f_S, with the (constant-period)
    clump tables f_C.  A remainer ancestor contributes s g_R(s, x, y); a
    mover ancestor starts one branch in each of its two complexes and is
    counted once: g_H(s, x, y) * y.
    """
    if theta == 0.0:
        return s * tables.get("R").pgf(s, 1.0, 1.0), FixedPointInfo(0, 0.0, True)
    x, y, info = solve_progeny_pair(tables.get("H"), tables.get("W"), s,
                                    order=order)
    g_r = tables.get("R").pgf(s, x, y)
    g_h = tables.get("H").pgf(s, x, y)
    return (1.0 - theta) * s * g_r + theta * g_h * y, info


def f_S(tables: TableSet, theta: float, s: float) -> float:
    return branching_pgf(tables, theta, s)[0]


def f_C(tables: TableSet, theta: float, s: float,
        infectious_period=None) -> float:
    """Clump total-progeny PGF; meaningful only for a constant period."""
    if infectious_period is not None and not infectious_period.is_constant:
        raise ConfigError("the coarse clump process is a branching process "
                          "only for a constant infectious period")
    return branching_pgf(tables, theta, s)[0]


def perron_root_2x2(m: np.ndarray) -> float:
    """Largest eigenvalue of a nonnegative 2x2 matrix, in closed form."""
    a, b = m[0, 0], m[0, 1]
    c, e = m[1, 0], m[1, 1]
    return (a + e + math.sqrt((a - e) ** 2 + 4.0 * b * c)) / 2.0


def compute_R_L(tables: TableSet) -> float:
    """Perron root of the susceptibility mean matrix; 0 when theta = 0."""
    if not tables.has_movers:
        return 0.0
    return perron_root_2x2(tables.mean_matrix())


def _rl_from_means(mean_h, mean_w):
    return perron_root_2x2(np.array([[mean_h[1], mean_h[2]],
                                     [mean_w[1], mean_w[2]]]))


def _rstar_from_means(theta, beta_g, mean_r, mean_h, mean_w):
    if theta == 0.0:
        return beta_g * (1.0 + mean_r[0])
    m = np.array([[mean_h[1], mean_h[2]], [mean_w[1], mean_w[2]]])
    if perron_root_2x2(m) >= 1.0:
        return math.inf
    mu = np.linalg.solve(np.eye(2) - m,
                         np.array([1.0 + mean_h[0], 1.0 + mean_w[0]]))
    return beta_g * (1.0 - 2.0 * theta
                     + (1.0 - theta) * (mean_r[0] + mean_r[1] * mu[0]
                                        + mean_r[2] * mu[1])
                     + theta * (mu[0] + mu[1]))


def _delta_se(fn, means, covs, step=1e-6):
    """Delta-method standard error of fn(means) under independent tables."""
    var = 0.0
    for mean, cov in zip(means, covs):
        grad = np.zeros(3)
        for i in range(3):
            up, dn = mean.copy(), mean.copy()
            up[i] += step
            dn[i] -= step
            hi = fn(*_swap(means, mean, up))
            lo = fn(*_swap(means, mean, dn))
            if not (math.isfinite(hi) and math.isfinite(lo)):
                return math.nan
            grad[i] = (hi - lo) / (2 * step)
        var += float(grad @ cov @ grad)
    return math.sqrt(max(var, 0.0))


def _swap(means, target, replacement):
    return [replacement if m is target else m for m in means]


def compute_R_L_with_se(tables: TableSet):
    if not tables.has_movers:
        return 0.0, 0.0
    mh, mw = tables.get("H").mean(), tables.get("W").mean()
    value = _rl_from_means(mh, mw)
    if tables.exact:
        return value, 0.0
    se = _delta_se(lambda a, b: _rl_from_means(a, b), [mh, mw],
                   [tables.get("H").cov_of_mean(), tables.get("W").cov_of_mean()])
    return value, se


def compute_R_star(params: ModelParams, tables: TableSet):
    """Global-level reproduction number with a delta-method standard error.

    Returns (value, se); value is +inf (se nan) when the purely local
    process is itself supercritical.
    """
    mr = tables.get("R").mean()
    if params.theta == 0.0:
        value = _rstar_from_means(0.0, params.beta_g, mr, None, None)
        se = 0.0 if tables.exact else _delta_se(
            lambda a: _rstar_from_means(0.0, params.beta_g, a, None, None),
            [mr], [tables.get("R").cov_of_mean()])
        return value, se
    mh, mw = tables.get("H").mean(), tables.get("W").mean()
    value = _rstar_from_means(params.theta, params.beta_g, mr, mh, mw)
    if not math.isfinite(value):
        return value, math.nan
    if tables.exact:
        return value, 0.0
    se = _delta_se(
        lambda a, b, c: _rstar_from_means(params.theta, params.beta_g, a, b, c),
        [mr, mh, mw],
        [tables.get(x).cov_of_mean() for x in ("R", "H", "W")])
    return value, se


def solve_final_size_z(params: ModelParams, tables: TableSet, *,
                       tol: float = 1e-10):
    """Limiting major-outbreak fraction for beta_g > 0.

    Returns (z, residual).  The defining equation 1 - z = f_S(exp(-beta_g z))
    has z = 0 as a root always and a unique second root in (0, 1] exactly
    when R* > 1; bisection on a bracket located by an ascending scan finds it.
    """
    if params.beta_g <= 0.0:
        raise ConfigError("the final-size equation requires beta_g > 0")
    rstar, _ = compute_R_star(params, tables)
    if rstar <= 1.0:
        return 0.0, 0.0

    def F(z):
        return 1.0 - z - f_S(tables, params.theta, math.exp(-params.beta_g * z))

    lo = None
    probe = 1e-9
    while probe < 1.0:
        if F(probe) > 0.0:
            lo = probe
            break
        probe *= 10.0
    if lo is None:
        return 0.0, 0.0  # indistinguishable from critical at this table noise
    hi = 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if F(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    return z, abs(F(z))


def smallest_root(g, *, coarse: float = 0.01, tol: float = 1e-12) -> float:
    """Leftmost root in [0, 1] of a convex g with g(1) = 0.

    Scans upward from 0 for the first sign change; if the negative dip is
    narrower than the grid it is sought just left of 1 before concluding
    that 1 is the smallest root.
    """
    left = 0.0
    if g(left) <= 0.0:
        return 0.0
    bracket = None
    s = coarse
    while s < 1.0 - coarse / 2:
        if g(s) <= 0.0:
            bracket = (left, s)
            break
        left = s
        s += coarse
    if bracket is None:
        eps = coarse
        while eps > 1e-9:
            eps *= 0.5
            if g(1.0 - eps) < 0.0:
                bracket = (left, 1.0 - eps)
                break
        if bracket is None:
            return 1.0
    lo, hi = bracket
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class SeverityTransform:
    """Laplace transform of the limiting clump severity, for general periods.

    For each fine type (X, l) the branch severity satisfies the distributional
    recursion  A_hat = A + sum over typed offspring of independent copies, so
    for fixed nu the vector of branch transforms is the smallest fixed point
    of phi_t = E[exp(-nu A_t) prod phi^{Z_t}], estimated over the libraries.
    The ancestor mixes a mover (two branches, own period) with a remainer
    (one complex plus the branches it spawns).
    """

    def __init__(self, params: ModelParams, fine_set: FineLibrarySet, *,
                 order: str = "jacobi"):
        self.params = params
        self.fine_set = fine_set
        self.order = order
        h, w = params.h, params.w
        self.type_keys = ([("H", l) for l in range(1, h)]
                          + [("W", l) for l in range(1, w)])
        self.last_info: FixedPointInfo | None = None

    def phi_hat(self, nu: float) -> np.ndarray:
        libs = [self.fine_set.libraries[k] for k in self.type_keys]
        weights = [lib.severity_weights(nu) for lib in libs]

        def update(x):
            return np.array([lib.transform(nu, x, w)
                             for lib, w in zip(libs, weights)])

        x, info = _iterate(update, np.zeros(len(libs)), order=self.order)
        self.last_info = info
        if not info.converged:
            raise NonConvergence(f"branch severity transform at nu={nu}")
        return x

    def phi_A(self, nu: float) -> float:
        if nu == 0.0:
            return 1.0
        phi = self.phi_hat(nu)
        h = self.params.h
        by_h = np.concatenate([[1.0], phi[:h - 1]])   # Q_H = 0 spawns nothing
        by_w = np.concatenate([[1.0], phi[h - 1:]])
        phi_m = self.fine_set.mover_mix.mix(by_h, by_w, nu)
        phi_r = self.fine_set.r_library.transform_with_seed(nu, phi)
        theta = self.params.theta
        return theta * phi_m + (1.0 - theta) * phi_r


def rho_route_b(params: ModelParams, fine_set: FineLibrarySet, *,
                order: str = "jacobi"):
    """Outbreak probability from the severity transform (any period law)."""
    if params.beta_g <= 0.0:
        raise ConfigError("route B requires beta_g > 0")
    transform = SeverityTransform(params, fine_set, order=order)
    xi = smallest_root(lambda s: transform.phi_A(params.beta_g * (1.0 - s)) - s)
    return 1.0 - xi, xi


def xi_from_clump(params: ModelParams, clump_tables: TableSet) -> float:
    """Extinction probability via the clump progeny PGF (constant period).

    At a constant period the severity equals the clump size, so the global
    offspring PGF is f_C(exp(-beta_g (1 - s))).
    """
    if not params.infectious_period.is_constant:
        raise ConfigError("the clump-PGF route requires a constant period")
    return smallest_root(
        lambda s: f_C(clump_tables, params.theta,
                      math.exp(-params.beta_g * (1.0 - s))) - s)


def compute_rho(params: ModelParams, tables: TableSet,
                fine_set: FineLibrarySet | None = None):
    """(rho, xi) for beta_g > 0.

    Constant period: route A, rho = z.  Otherwise route B through the
    severity transform, which requires the fine libraries.
    """
    rstar, _ = compute_R_star(params, tables)
    if rstar <= 1.0:
        return 0.0, 1.0
    if params.infectious_period.is_constant:
        z, _ = solve_final_size_z(params, tables)
        return z, 1.0 - z
    if fine_set is None:
        raise ConfigError("route B needs fine severity libraries")
    return rho_route_b(params, fine_set)


def solve_pi_g0(params: ModelParams, tables: TableSet,
                fine_set: FineLibrarySet | None = None, *,
                order: str = "jacobi"):
    """(z, rho, eta_s, eta_c) for the purely local model (beta_g = 0).

    z is the survival probability of the backward 2-type process; rho that
    of the forward fine-typed process, which requires the fine libraries
    (pass fine_set=None to skip rho).
    """
    if params.beta_g != 0.0:
        raise ConfigError("solve_pi_g0 applies only when beta_g = 0")
    if params.theta == 0.0:
        raise ConfigError("with theta = 0 and no global infection the "
                          "epidemic never leaves one workplace")
    g_r, g_h, g_w = (tables.get(x) for x in ("R", "H", "W"))

    def update(v):
        return np.array([g_h.pgf2(v[0], v[1]), g_w.pgf2(v[0], v[1])])

    eta_s, info_s = _iterate(update, np.zeros(2), order=order)
    z = 1.0 - ((1.0 - params.theta) * g_r.pgf2(eta_s[0], eta_s[1])
               + params.theta * eta_s[0] * eta_s[1])

    rho = None
    eta_c = None
    info_c = None
    if fine_set is not None:
        h = params.h
        keys = ([("H", l) for l in range(1, h)]
                + [("W", l) for l in range(1, params.w)])
        libs = [fine_set.libraries[k] for k in keys]

        def update_c(x):
            return np.array([lib.pgf(x) for lib in libs])

        eta_c, info_c = _iterate(update_c, np.zeros(len(libs)), order=order)
        by_h = np.concatenate([[1.0], eta_c[:h - 1]])
        by_w = np.concatenate([[1.0], eta_c[h - 1:]])
        mover_term = fine_set.mover_mix.mix(by_h, by_w)
        rho = 1.0 - ((1.0 - params.theta) * fine_set.r_library.pgf(eta_c)
                     + params.theta * mover_term)
    return z, rho, eta_s, eta_c, (info_s, info_c)


@dataclass
class AnalyticsReport:
    """Everything the analyze pipeline produces, with diagnostics."""

    params: ModelParams
    table_kind: str
    n_mc: int | None
    seed: SeedSpec | None
    R_L: float = math.nan
    R_L_se: float = math.nan
    R_star: float = math.nan
    R_star_se: float = math.nan
    z: float = math.nan
    rho: float = math.nan
    xi: float = math.nan
    eta_s: tuple | None = None
    eta_c: np.ndarray | None = None
    z_residual: float = math.nan
    iterations: dict = field(default_factory=dict)
    near_critical: bool = False
    notes: list = field(default_factory=list)


def analyze(params: ModelParams, *, n_mc: int = 100_000,
            seed: SeedSpec | None = None, exact: str = "auto",
            n_mc_fine: int | None = None, cache_dir=None,
            unprimed_seed_rates: bool = False,
            skip_general_rho: bool = False) -> AnalyticsReport:
    """Full analytics pipeline: tables, thresholds, z and rho.

    exact is "auto" (use the exact backend when the period is constant and
    cheap), "force", or "off".  Monte Carlo table sizes default to n_mc for
    the coarse census tables and n_mc_fine (default n_mc / 5) for the
    severity libraries; the latter are built only when a route needs them.
    skip_general_rho leaves rho as NaN on the expensive route (non-constant
    period with beta_g > 0), for sweeps that only need thresholds and z.
    """
    seed = seed or SeedSpec(0)
    key = cache_key("tables", params.key(), "susset", str(n_mc),
                    str(seed), exact)
    tables = cached(cache_dir, key,
                    lambda: build_table_set(params, "susset", n_mc, seed, exact))
    report = AnalyticsReport(params=params, table_kind=tables.kind,
                             n_mc=tables.n_mc, seed=seed)
    report.R_L, report.R_L_se = compute_R_L_with_se(tables)
    report.R_star, report.R_star_se = compute_R_star(params, tables)
    if math.isfinite(report.R_star) and abs(report.R_star - 1.0) <= NEAR_CRITICAL_BAND:
        report.near_critical = True
        report.notes.append("R* within the near-critical band; the z > 0 <=> "
                            "R* > 1 link is not asserted here")

    def fine():
        n = n_mc_fine if n_mc_fine is not None else max(10_000, n_mc // 5)
        fkey = cache_key("fine", params.key(), str(n), str(seed),
                         str(unprimed_seed_rates))
        return cached(cache_dir, fkey,
                      lambda: build_fine_libraries(params, n, seed,
                                                   unprimed=unprimed_seed_rates))

    if params.beta_g > 0.0:
        report.z, report.z_residual = solve_final_size_z(params, tables)
        _, pair_info = branching_pgf(tables, params.theta,
                                     math.exp(-params.beta_g * report.z))
        report.iterations["progeny_pair_at_z"] = pair_info.iterations
        if params.infectious_period.is_constant:
            report.rho, report.xi = report.z, 1.0 - report.z
        elif skip_general_rho:
            report.notes.append("rho skipped on the general-period route")
        else:
            report.rho, report.xi = compute_rho(params, tables, fine())
    else:
        fs = fine() if params.theta > 0 else None
        z, rho, eta_s, eta_c, infos = solve_pi_g0(params, tables, fs)
        report.z, report.rho = z, rho if rho is not None else math.nan
        report.xi = 1.0 - report.rho if rho is not None else math.nan
        report.eta_s, report.eta_c = tuple(eta_s), eta_c
        report.iterations["eta_s"] = infos[0].iterations
        if infos[1] is not None:
            report.iterations["eta_c"] = infos[1].iterations
    return report
