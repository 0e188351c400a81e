"""Offspring tables: joint PMFs and paired-severity libraries per seed type.

Two backends feed the branching analytics.  The exact backend (constant
infectious period only) mixes the triangular-system PMFs over the finite
structure law and carries no sampling error.  The Monte Carlo backend mixes
engine batches over sampled structures, keeps the raw draws so that any
derived quantity can be jackknifed over shards, and reports per-cell
standard errors.
"""
from __future__ import annotations

import hashlib
import os
import pickle
from dataclasses import dataclass, field

import numpy as np

from .engine import run_complex_batch
from .exact import exact_coarse_pmf
from .params import ModelParams, SeedSpec, ConfigError, STREAM_TABLES
from .structure import (SEED_TYPES, n_fine_types, sample_structure_ms,
                        structure_from_m)


def powprod(exponents: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row-wise products prod_t x_t^e_t for an integer exponent matrix."""
    x = np.asarray(x, dtype=float)
    pos = x > 0.0
    logx = np.zeros_like(x)
    logx[pos] = np.log(x[pos])
    out = np.exp(exponents @ logx)
    if not pos.all():
        dead = (exponents[:, ~pos] > 0).any(axis=1)
        out[dead] = 0.0
    return out


@dataclass(frozen=True)
class CoarseTable:
    """Joint PMF of the typed census (z_r, z_h, z_w) for one seed type.

    z_r counts infected remainers, z_h infected movers-in (who seed a new
    complex through their household), z_w infected movers-out (who seed one
    through their workplace); the seed itself is excluded throughout.
    """

    seed_type: str
    keys: np.ndarray                  # (m, 3) int
    probs: np.ndarray                 # (m,)
    n_samples: int | None = None      # None marks an exact table
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def exact(self) -> bool:
        return self.n_samples is None

    def pgf(self, s1: float, s2: float, s3: float) -> float:
        s = np.array([s1, s2, s3], dtype=float)
        return float(powprod(self.keys, s) @ self.probs)

    def pgf2(self, s1: float, s2: float) -> float:
        """Marginal PGF in (z_h, z_w) only."""
        return self.pgf(1.0, s1, s2)

    def mean(self) -> np.ndarray:
        return self.keys.T @ self.probs

    def cov_of_mean(self) -> np.ndarray:
        """Covariance matrix of the estimated mean vector (zero when exact)."""
        if self.exact:
            return np.zeros((3, 3))
        mu = self.mean()
        second = (self.keys.T * self.probs) @ self.keys
        return (second - np.outer(mu, mu)) / self.n_samples

    def cell_se(self) -> np.ndarray:
        if self.exact:
            return np.zeros_like(self.probs)
        return np.sqrt(self.probs * (1.0 - self.probs) / self.n_samples)

    @classmethod
    def from_samples(cls, seed_type: str, triples: np.ndarray,
                     keep_samples: bool = True) -> "CoarseTable":
        keys, counts = np.unique(triples, axis=0, return_counts=True)
        return cls(seed_type=seed_type, keys=keys,
                   probs=counts / triples.shape[0], n_samples=triples.shape[0],
                   samples=triples if keep_samples else None)

    @classmethod
    def from_pmf(cls, seed_type: str, pmf: dict) -> "CoarseTable":
        items = sorted(pmf.items())
        keys = np.array([k for k, _ in items], dtype=np.int64)
        probs = np.array([p for _, p in items])
        return cls(seed_type=seed_type, keys=keys, probs=probs)

    def shard_tables(self, n_shards: int) -> list:
        if self.samples is None:
            raise ConfigError("exact tables have no shards")
        bounds = np.linspace(0, self.samples.shape[0], n_shards + 1).astype(int)
        return [CoarseTable.from_samples(self.seed_type,
                                         self.samples[a:b], keep_samples=False)
                for a, b in zip(bounds[:-1], bounds[1:])]


def _mc_coarse_samples(params: ModelParams, seed_type: str, kind: str,
                       n_mc: int, rng: np.random.Generator) -> np.ndarray:
    """Sample n_mc typed censuses, mixing over the structure law."""
    ms = sample_structure_ms(params, seed_type, rng, n_mc)
    triples = np.empty((n_mc, 3), dtype=np.int16)
    uniq, inverse = np.unique(ms, axis=0, return_inverse=True)
    for u in range(uniq.shape[0]):
        rows = np.flatnonzero(inverse == u)
        structure = structure_from_m(params, uniq[u], seed_type)
        batch = run_complex_batch(structure, params, rng, rows.size, mode=kind)
        triples[rows] = batch.coarse()
    return triples


def build_coarse_table(params: ModelParams, seed_type: str, kind: str,
                       n_mc: int, rng: np.random.Generator) -> CoarseTable:
    if kind not in ("clump", "susset"):
        raise ConfigError(f"unknown table kind {kind!r}")
    return CoarseTable.from_samples(
        seed_type, _mc_coarse_samples(params, seed_type, kind, n_mc, rng))


def exact_coarse_table(params: ModelParams, seed_type: str) -> CoarseTable:
    """Exact census table; the clump and susceptibility laws coincide here."""
    return CoarseTable.from_pmf(seed_type, exact_coarse_pmf(params, seed_type))


@dataclass(frozen=True)
class TableSet:
    """Census tables for all live seed types plus provenance.

    When theta = 0 there are no movers, so only the R table exists and the
    complex never chains; consumers treat the H/W entries as absent.
    """

    kind: str                        # "clump", "susset" or "exact"
    tables: dict
    n_mc: int | None
    seed: SeedSpec | None

    def get(self, seed_type: str) -> CoarseTable:
        table = self.tables.get(seed_type)
        if table is None:
            raise ConfigError(f"no {seed_type} table (theta = 0?)")
        return table

    @property
    def has_movers(self) -> bool:
        return "H" in self.tables

    @property
    def exact(self) -> bool:
        return self.kind == "exact"

    def mean_matrix(self) -> np.ndarray:
        """2x2 matrix of mean H/W offspring from H/W seeds."""
        mh = self.get("H").mean()
        mw = self.get("W").mean()
        return np.array([[mh[1], mh[2]], [mw[1], mw[2]]])

    def shard_sets(self, n_shards: int) -> list:
        sets = []
        shards = {x: t.shard_tables(n_shards) for x, t in self.tables.items()}
        for s in range(n_shards):
            sets.append(TableSet(kind=self.kind,
                                 tables={x: shards[x][s] for x in shards},
                                 n_mc=None, seed=self.seed))
        return sets


# routing threshold for the exact backend: box volume across all structures
EXACT_COST_LIMIT = 2_000_000.0


def build_table_set(params: ModelParams, kind: str, n_mc: int,
                    seed: SeedSpec, mode: str = "auto",
                    stream: int = 0) -> TableSet:
    """Build census tables for every live seed type.

    mode "force" demands the exact backend (constant period only), "off"
    demands Monte Carlo, "auto" routes to exact when the period is constant
    and the structure boxes are affordably small.
    """
    from .exact import exact_cost
    types = SEED_TYPES if params.theta > 0 else ("R",)
    use_exact = False
    if mode == "force":
        use_exact = True
    elif mode == "auto" and params.infectious_period.is_constant:
        cost = sum(exact_cost(params, x) for x in types)
        use_exact = cost <= EXACT_COST_LIMIT
    elif mode not in ("auto", "off"):
        raise ConfigError(f"unknown exact mode {mode!r}")

    if use_exact:
        tables = {x: exact_coarse_table(params, x) for x in types}
        return TableSet(kind="exact", tables=tables, n_mc=None, seed=None)
    rng = seed.rng(STREAM_TABLES, stream, 0 if kind == "clump" else 1)
    tables = {x: build_coarse_table(params, x, kind, n_mc, rng) for x in types}
    return TableSet(kind=kind, tables=tables, n_mc=n_mc, seed=seed)


def _dedup(columns):
    """Collapse identical rows of the stacked columns into (uniques, weights).

    Pays off massively at a constant period, where severities are integers
    and the joint support is tiny; returns None when the draws are mostly
    distinct (continuous severities).
    """
    stacked = np.column_stack(columns)
    uniq, counts = np.unique(stacked, axis=0, return_counts=True)
    if uniq.shape[0] > 0.5 * stacked.shape[0]:
        return None
    return uniq, counts / stacked.shape[0]


@dataclass
class FineLibrary:
    """Paired draws of (severity, fine offspring vector) for one fine seed type.

    The fine vector counts type-(Y, k) movers infected in the complex: column
    k-1 holds household entrants infecting k next-complex members, column
    (h-1) + k - 1 the workplace entrants.  severity excludes the seed.
    """

    seed_type: str
    l: int
    severity: np.ndarray
    fine: np.ndarray
    _compact: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.severity.size

    def _compacted(self):
        if self._compact is None:
            dd = _dedup([self.severity, self.fine])
            if dd is None:
                self._compact = (self.severity, self.fine,
                                 np.full(self.n, 1.0 / self.n))
            else:
                uniq, w = dd
                self._compact = (uniq[:, 0], uniq[:, 1:].astype(np.int64), w)
        return self._compact

    def pgf(self, x: np.ndarray) -> float:
        _, fine, w = self._compacted()
        return float(w @ powprod(fine, x))

    def transform(self, nu: float, x: np.ndarray,
                  weights: np.ndarray | None = None) -> float:
        """E[exp(-nu A) prod_t x_t^{Z_t}] over the library."""
        sev, fine, w = self._compacted()
        damp = np.exp(-nu * sev) if weights is None else weights
        return float((w * damp) @ powprod(fine, x))

    def severity_weights(self, nu: float) -> np.ndarray:
        return np.exp(-nu * self._compacted()[0])

    def slice(self, a: int, b: int) -> "FineLibrary":
        return FineLibrary(self.seed_type, self.l,
                           self.severity[a:b], self.fine[a:b])


@dataclass
class RSeedLibrary:
    """Unconditioned remainer-seed draws: own period, severity, fine offspring."""

    seed_period: np.ndarray
    severity: np.ndarray
    fine: np.ndarray
    _compact: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.seed_period.size

    def _compacted(self):
        if self._compact is None:
            dd = _dedup([self.seed_period + self.severity, self.fine])
            if dd is None:
                self._compact = (self.seed_period + self.severity, self.fine,
                                 np.full(self.n, 1.0 / self.n))
            else:
                uniq, w = dd
                self._compact = (uniq[:, 0], uniq[:, 1:].astype(np.int64), w)
        return self._compact

    def pgf(self, x: np.ndarray) -> float:
        _, fine, w = self._compacted()
        return float(w @ powprod(fine, x))

    def transform_with_seed(self, nu: float, x: np.ndarray) -> float:
        """E[exp(-nu (I_seed + A)) prod_t x_t^{Z_t}]."""
        total, fine, w = self._compacted()
        return float((w * np.exp(-nu * total)) @ powprod(fine, x))

    def slice(self, a, b):
        return RSeedLibrary(self.seed_period[a:b], self.severity[a:b],
                            self.fine[a:b])


@dataclass(frozen=True)
class MoverContactMix:
    """Joint law of (I, Q_H, Q_W) for a mover ancestor.

    Q_H and Q_W are the ancestor's contact counts in its two complexes,
    binomial given I.  Exact enumeration when the period is constant,
    otherwise Monte Carlo draws.
    """

    period: np.ndarray
    q_h: np.ndarray
    q_w: np.ndarray
    weights: np.ndarray              # uniform for MC draws, exact pmf otherwise
    exact: bool

    def mix(self, values_h: np.ndarray, values_w: np.ndarray,
            nu: float = 0.0) -> float:
        """E[exp(-nu I) values_h[Q_H] values_w[Q_W]]."""
        damp = np.exp(-nu * self.period) if nu else 1.0
        return float(np.sum(self.weights * damp
                            * values_h[self.q_h] * values_w[self.q_w]))

    def slice(self, a, b):
        if self.exact:
            return self
        w = self.weights[a:b]
        return MoverContactMix(self.period[a:b], self.q_h[a:b], self.q_w[a:b],
                               w / w.sum(), False)


def _seed_contact_rates(params: ModelParams, unprimed: bool):
    if unprimed:
        return params.beta_h, params.beta_w
    return params.beta_h_pair, params.beta_w_pair


def build_mover_mix(params: ModelParams, n_mc: int, rng: np.random.Generator,
                    unprimed: bool = False) -> MoverContactMix:
    h, w = params.h, params.w
    rh, rw = _seed_contact_rates(params, unprimed)
    ip = params.infectious_period
    if ip.is_constant:
        from math import comb
        ph, pw = -np.expm1(-rh), -np.expm1(-rw)
        qh = np.arange(h)
        qw = np.arange(w)
        pmf_h = np.array([comb(h - 1, k) * ph**k * (1 - ph)**(h - 1 - k)
                          for k in qh])
        pmf_w = np.array([comb(w - 1, k) * pw**k * (1 - pw)**(w - 1 - k)
                          for k in qw])
        grid_h, grid_w = np.meshgrid(qh, qw, indexing="ij")
        weights = np.outer(pmf_h, pmf_w).ravel()
        return MoverContactMix(period=np.ones(weights.size),
                               q_h=grid_h.ravel(), q_w=grid_w.ravel(),
                               weights=weights, exact=True)
    period = np.asarray(ip.sample(rng, n_mc), dtype=float)
    q_h = rng.binomial(h - 1, -np.expm1(-rh * period))
    q_w = rng.binomial(w - 1, -np.expm1(-rw * period))
    return MoverContactMix(period=period, q_h=q_h, q_w=q_w,
                           weights=np.full(n_mc, 1.0 / n_mc), exact=False)


@dataclass(frozen=True)
class FineLibrarySet:
    """All severity/offspring libraries needed by the general-period routes."""

    params_key: str
    libraries: dict                  # (X, l) -> FineLibrary
    r_library: RSeedLibrary
    mover_mix: MoverContactMix
    n_mc: int

    def fine_range(self, seed_type: str, h: int, w: int):
        return range(1, h if seed_type == "H" else w)

    def shard_count(self, n_shards):
        return n_shards

    def shard(self, s: int, n_shards: int) -> "FineLibrarySet":
        def cut(n):
            bounds = np.linspace(0, n, n_shards + 1).astype(int)
            return bounds[s], bounds[s + 1]

        libs = {}
        for key, lib in self.libraries.items():
            a, b = cut(lib.n)
            libs[key] = lib.slice(a, b)
        a, b = cut(self.r_library.n)
        rlib = self.r_library.slice(a, b)
        if self.mover_mix.exact:
            mm = self.mover_mix
        else:
            a, b = cut(self.mover_mix.period.size)
            mm = self.mover_mix.slice(a, b)
        return FineLibrarySet(self.params_key, libs, rlib, mm, b - a)


def build_fine_libraries(params: ModelParams, n_mc: int, seed: SeedSpec,
                         stream: int = 0,
                         unprimed: bool = False) -> FineLibrarySet:
    """Monte Carlo libraries for every fine seed type plus the two ancestors.

    A type-(X, l) library runs complexes whose seed enters through household
    (X=H) or workplace (X=W) and contacts exactly l members there.  The
    remainer library runs unconditioned seeds; with unprimed=True its
    first-generation contact counts (and the mover mix) use total rather
    than per-pair rates, reproducing a literal reading of the source
    formulas for comparison.
    """
    if params.theta == 0:
        raise ConfigError("fine libraries need movers (theta > 0)")
    h, w = params.h, params.w
    libs = {}
    for x in ("H", "W"):
        top = h - 1 if x == "H" else w - 1
        for l in range(1, top + 1):
            rng = seed.rng(STREAM_TABLES, stream, 2, 0 if x == "H" else 1, l)
            ms = sample_structure_ms(params, x, rng, n_mc)
            severity = np.empty(n_mc)
            fine = np.empty((n_mc, n_fine_types(params)), dtype=np.int16)
            uniq, inverse = np.unique(ms, axis=0, return_inverse=True)
            for u in range(uniq.shape[0]):
                rows = np.flatnonzero(inverse == u)
                structure = structure_from_m(params, uniq[u], x)
                batch = run_complex_batch(structure, params, rng, rows.size,
                                          constraint=("l", l), want_fine=True)
                severity[rows] = batch.severity
                fine[rows] = batch.fine
            libs[(x, l)] = FineLibrary(x, l, severity, fine)

    rng = seed.rng(STREAM_TABLES, stream, 2, 2)
    r_lib = _build_r_library(params, n_mc, rng, unprimed)
    rng = seed.rng(STREAM_TABLES, stream, 2, 3)
    mover = build_mover_mix(params, n_mc, rng, unprimed)
    return FineLibrarySet(params_key=params.key(), libraries=libs,
                          r_library=r_lib, mover_mix=mover, n_mc=n_mc)


def _build_r_library(params, n_mc, rng, unprimed):
    ms = sample_structure_ms(params, "R", rng, n_mc)
    seed_period = np.empty(n_mc)
    severity = np.empty(n_mc)
    fine = np.empty((n_mc, n_fine_types(params)), dtype=np.int16)
    uniq, inverse = np.unique(ms, axis=0, return_inverse=True)
    for u in range(uniq.shape[0]):
        rows = np.flatnonzero(inverse == u)
        structure = structure_from_m(params, uniq[u], "R")
        if not unprimed:
            batch = run_complex_batch(structure, params, rng, rows.size,
                                      want_fine=True)
            seed_period[rows] = batch.seed_period
            severity[rows] = batch.severity
            fine[rows] = batch.fine
            continue
        # literal-formula variant: draw the seed's contact counts from the
        # unprimed binomials, then run (j, l)-constrained epidemics
        ip = params.infectious_period
        I = np.asarray(ip.sample(rng, rows.size), dtype=float)
        rh, rw = _seed_contact_rates(params, True)
        js = rng.binomial(params.h - 1, -np.expm1(-rh * I))
        ls = rng.binomial(params.w - 1, -np.expm1(-rw * I))
        seed_period[rows] = I
        for (j, l) in sorted(set(zip(js.tolist(), ls.tolist()))):
            sub = np.flatnonzero((js == j) & (ls == l))
            batch = run_complex_batch(structure, params, rng, sub.size,
                                      constraint=("jl", j, l), want_fine=True)
            severity[rows[sub]] = batch.severity
            fine[rows[sub]] = batch.fine
    return RSeedLibrary(seed_period=seed_period, severity=severity, fine=fine)


def cache_key(*parts: str) -> str:
    payload = "|".join(parts).encode()
    return hashlib.sha256(payload).hexdigest()[:32]


def cached(cache_dir, key: str, builder):
    """Pickle-backed memoisation keyed by a content hash; None dir disables."""
    if cache_dir is None:
        return builder()
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, key + ".pkl")
    if os.path.exists(path):
        with open(path, "rb") as fh:
            return pickle.load(fh)
    value = builder()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        pickle.dump(value, fh)
    os.replace(tmp, path)
    return value
