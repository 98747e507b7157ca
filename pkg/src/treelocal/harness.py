"""Experiment driver: configuration, seeded replication, outputs, provenance.

Every experiment consumes replicate indices; replicate i draws from a Philox
generator keyed by SeedSequence((master_seed, domain, i)), so any partition of
the index range over workers yields the same stream per replicate.  Replicates
are processed in fixed-size blocks and partial results are merged in block
order, which makes all outputs (including float aggregates) independent of the
worker count.
"""

import hashlib
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np

from . import __version__
from . import brw, cascade, extremes, field, stats, walker
from . import besq as besq_mod
from .tree import TreeShape, format_address

RNG_ID = "philox4x64:seedseq(master_seed, domain, replicate_index)"
BLOCK_SIZE = 1024

# stream domains, so auxiliary draws never collide with main replicates
DOMAIN_MAIN = 0
DOMAIN_AUX = 1
DOMAIN_CONTROL = 2

EXPERIMENT_KINDS = (
    "field-sample",
    "walk",
    "isomorphism",
    "tail",
    "gumbel",
    "point-process",
    "geometry",
    "bessel-check",
    "gamma-star",
    "cascade",
)


class ConfigError(ValueError):
    """Invalid run configuration."""


class ExperimentFailure(RuntimeError):
    """The experiment ran but its internal checks failed."""


def replicate_rng(master_seed: int, index: int, domain: int = DOMAIN_MAIN) -> np.random.Generator:
    seq = np.random.SeedSequence((int(master_seed), int(domain), int(index)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class RunConfig:
    kind: str
    b: int = 2
    n: int = 4
    t: float | None = None
    t_factor: float = 8.0
    m: int = 0
    replicates: int = 1000
    seed: int = 0
    workers: int = 1
    out: str | None = None
    options: dict = dc_field(default_factory=dict)

    def resolved_t(self) -> float:
        if self.t is not None:
            return float(self.t)
        if self.n < 2:
            raise ConfigError("t-schedule C*n*log(n) needs n >= 2; pass t explicitly")
        return self.t_factor * self.n * math.log(self.n)

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.b < 2:
            raise ConfigError("b must be >= 2")
        if self.n < 0:
            raise ConfigError("n must be >= 0")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.t is not None and self.t <= 0:
            raise ConfigError("t must be > 0")
        if not 0 <= self.m <= self.n:
            raise ConfigError("m must lie in [0, n]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise ConfigError(f"unknown config fields: {sorted(bad)}")
        return cls(**data)


@dataclass
class Table:
    name: str
    kind: str  # "jsonl" or "csv"
    header: list
    rows: list


@dataclass
class RunManifest:
    config: dict
    version: str
    rng: str
    summary: dict
    wall_time_s: float
    manifest_hash: str


@dataclass
class RunResult:
    config: RunConfig
    manifest: RunManifest
    tables: dict
    summary: dict
    ok: bool


def manifest_hash(config: RunConfig) -> str:
    """Identity of the experiment: config minus execution-only fields.

    Output path and worker count cannot affect any data row, so they stay
    out of the hash and reruns/worker changes remain byte-identical.
    """
    ident = config.to_dict()
    ident.pop("out")
    ident.pop("workers")
    payload = json.dumps(
        {"version": __version__, "rng": RNG_ID, "config": ident},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _block_ranges(total: int, block: int = BLOCK_SIZE):
    return [(i, lo, min(lo + block, total)) for i, lo in enumerate(range(0, total, block))]


def _run_blocks(cfg: RunConfig, block_fn):
    """Run block_fn(cfg, start, stop) over all replicate blocks, merging in
    block order regardless of worker count."""
    blocks = _block_ranges(cfg.replicates)
    if cfg.workers == 1 or len(blocks) == 1:
        return [block_fn(cfg, lo, hi) for _, lo, hi in blocks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(cfg.workers) as pool:
        return pool.starmap(block_fn, [(cfg, lo, hi) for _, lo, hi in blocks])


# ---------------------------------------------------------------------------
# comparison batteries


@dataclass
class KSRow:
    label: str
    statistic: float
    pvalue: float
    passed: bool


@dataclass
class BatteryReport:
    rows: list
    alpha: float
    passed: bool


def ks_battery(samples_a, samples_b, labels, alpha: float = 0.01) -> BatteryReport:
    """Per-label two-sample KS with Bonferroni correction across labels."""
    cut = alpha / len(labels)
    rows = []
    for lab, a, c in zip(labels, samples_a, samples_b):
        r = stats.ks_two_sample(a, c)
        rows.append(KSRow(lab, r.statistic, r.pvalue, r.pvalue > cut))
    return BatteryReport(rows=rows, alpha=alpha, passed=all(r.passed for r in rows))


def binned_conditional_ks(
    parent_a, child_a, parent_b, child_b, n_bins: int = 5, alpha: float = 0.01
) -> BatteryReport:
    """Compare the child-given-parent conditional law between two samplers.

    Bins are pooled quantiles of the positive parent values; the zero-parent
    cell is checked for all-zero children on both sides (absorbed subtrees).
    """
    pa = np.asarray(parent_a, float)
    pb = np.asarray(parent_b, float)
    ca = np.asarray(child_a, float)
    cb = np.asarray(child_b, float)
    pooled_pos = np.concatenate([pa[pa > 0], pb[pb > 0]])
    edges = np.quantile(pooled_pos, np.linspace(0, 1, n_bins + 1))
    edges[0], edges[-1] = 0.0, np.inf
    rows = []
    cut = alpha / n_bins
    for k in range(n_bins):
        in_a = (pa > edges[k]) & (pa <= edges[k + 1])
        in_b = (pb > edges[k]) & (pb <= edges[k + 1])
        r = stats.ks_two_sample(ca[in_a], cb[in_b])
        rows.append(KSRow(f"parent-bin-{k}", r.statistic, r.pvalue, r.pvalue > cut))
    zero_ok = bool(np.all(ca[pa == 0] == 0)) and bool(np.all(cb[pb == 0] == 0))
    rows.append(KSRow("parent-zero-atom", 0.0, 1.0, zero_ok))
    return BatteryReport(rows=rows, alpha=alpha, passed=all(r.passed for r in rows))


@dataclass
class IsoReport:
    vertex_rows: list
    bivariate_stat: float
    bivariate_pvalue: float
    alpha: float
    passed: bool


def verify_isomorphism(
    b: int,
    n: int,
    t: float,
    replicates: int,
    seed: int,
    edge_duration: float = 1.0,
    alpha: float = 0.01,
    workers: int = 1,
) -> IsoReport:
    """Distributional check of the coupling between the stopped local-time
    field and the squared Gaussian field.

    Per vertex: two-sample KS between {field value + independent h^2/2} and
    {(h' + sqrt(2t))^2 / 2} from a fresh field, Bonferroni-corrected.  One
    bivariate (depth-1 vertex, leaf below it) cell is compared by a binned
    chi-square; the root coordinate is a.s. constant on both sides, so a
    literal root-leaf pair would be degenerate.
    """
    cfg = RunConfig(
        kind="isomorphism",
        b=b,
        n=n,
        t=t,
        replicates=replicates,
        seed=seed,
        workers=workers,
        options={"edge_duration": edge_duration},
    )
    parts = _run_blocks(cfg, _iso_block)
    lhs = np.concatenate([p[0] for p in parts], axis=0)
    rhs = np.concatenate([p[1] for p in parts], axis=0)
    shape = TreeShape(b, n)
    labels = [
        format_address(_addr(shape, k), b) or "root" for k in range(shape.num_vertices)
    ]
    battery = ks_battery(list(lhs.T), list(rhs.T), labels, alpha=alpha)
    # bivariate cell: first depth-1 vertex and the leftmost leaf below it
    v1 = shape.level_offset(1)
    leaf = shape.level_offset(n)
    chi_stat, chi_p = _binned_chi2_2d(
        lhs[:, v1], lhs[:, leaf], rhs[:, v1], rhs[:, leaf]
    )
    passed = battery.passed and chi_p > alpha
    return IsoReport(
        vertex_rows=battery.rows,
        bivariate_stat=chi_stat,
        bivariate_pvalue=chi_p,
        alpha=alpha,
        passed=passed,
    )


def _addr(shape: TreeShape, flat_index: int):
    from .tree import address_of

    level = 0
    while shape.level_offset(level + 1) <= flat_index:
        level += 1
    return address_of(flat_index - shape.level_offset(level), level, shape)


def _binned_chi2_2d(x_a, y_a, x_b, y_b, bins: int = 4):
    pooled_x = np.concatenate([x_a, x_b])
    pooled_y = np.concatenate([y_a, y_b])
    ex = np.quantile(pooled_x, np.linspace(0, 1, bins + 1))
    ey = np.quantile(pooled_y, np.linspace(0, 1, bins + 1))
    ex[0], ex[-1] = -np.inf, np.inf
    ey[0], ey[-1] = -np.inf, np.inf
    ha, _, _ = np.histogram2d(x_a, y_a, bins=[ex, ey])
    hb, _, _ = np.histogram2d(x_b, y_b, bins=[ex, ey])
    stat, pvalue, _ = stats.two_sample_chi2(ha, hb)
    return stat, pvalue


def _iso_block(cfg: RunConfig, start: int, stop: int):
    shape = TreeShape(cfg.b, cfg.n)
    t = cfg.resolved_t()
    dur = cfg.options.get("edge_duration", 1.0)
    lhs = np.empty((stop - start, shape.num_vertices))
    rhs = np.empty((stop - start, shape.num_vertices))
    root2t = math.sqrt(2.0 * t)
    for i in range(start, stop):
        rng = replicate_rng(cfg.seed, i)
        f = field.sample_field(shape, t, rng, edge_duration=dur)
        g = brw.sample_brw(shape, rng)
        lhs[i - start] = f.values + 0.5 * g.values ** 2
        g2 = brw.sample_brw(shape, replicate_rng(cfg.seed, i, DOMAIN_AUX))
        rhs[i - start] = 0.5 * (g2.values + root2t) ** 2
    return lhs, rhs


# ---------------------------------------------------------------------------
# experiment blocks


def _field_block(cfg: RunConfig, start: int, stop: int):
    shape = TreeShape(cfg.b, cfg.n)
    t = cfg.resolved_t()
    dump = bool(cfg.options.get("dump_fields", False))
    out = {
        "raw": np.empty(stop - start),
        "centered": np.empty(stop - start),
        "location": np.empty(stop - start),
        "argmax": [],
        "values": np.empty((stop - start, shape.num_vertices)) if dump else None,
    }
    for i in range(start, stop):
        f = field.sample_field(shape, t, replicate_rng(cfg.seed, i))
        cm = extremes.centered_max(f)
        out["raw"][i - start] = cm.raw_max
        out["centered"][i - start] = cm.centered
        out["location"][i - start] = cm.location
        out["argmax"].append(format_address(cm.address, cfg.b))
        if dump:
            out["values"][i - start] = f.values
    return out


def _walk_block(cfg: RunConfig, start: int, stop: int):
    shape = TreeShape(cfg.b, cfg.n)
    t = cfg.resolved_t()
    cap = int(cfg.options.get("excursion_cap", 10 ** 9))
    wc = walker.WalkConfig(shape=shape, t=t, excursion_cap=cap)
    vals = np.empty((stop - start, shape.num_vertices))
    aborted = []
    for i in range(start, stop):
        try:
            f = walker.run_inverse_local_time(wc, replicate_rng(cfg.seed, i))
            vals[i - start] = f.values
        except walker.ExcursionCapExceeded:
            vals[i - start] = np.nan
            aborted.append(i)
    return vals, aborted


def _tail_block(cfg: RunConfig, start: int, stop: int):
    shape = TreeShape(cfg.b, cfg.n)
    t = cfg.resolved_t()
    centered = np.empty(stop - start)
    for i in range(start, stop):
        f = field.sample_field(shape, t, replicate_rng(cfg.seed, i))
        leaves = f.leaves()
        centered[i - start] = math.sqrt(leaves.max()) - math.sqrt(t) - extremes.max_centering(
            cfg.n, t, cfg.b
        )
    return centered


def _pattern_block(cfg: RunConfig, start: int, stop: int):
    """Shared heavy block: centered max, box counts, pair-depth histogram."""
    shape = TreeShape(cfg.b, cfg.n)
    t = cfg.resolved_t()
    boxes = [extremes.LaplaceBox(**bx) for bx in cfg.options.get("boxes", [])]
    offset = cfg.options.get("pair_offset")
    centered = np.empty(stop - start)
    counts = np.zeros((stop - start, len(boxes)), dtype=np.int64)
    pair_counts = np.zeros(cfg.n + 1, dtype=np.int64)
    a = extremes.max_centering(cfg.n, t, cfg.b)
    for i in range(start, stop):
        f = field.sample_field(shape, t, replicate_rng(cfg.seed, i))
        pat = extremes.point_pattern(f, cfg.m)
        centered[i - start] = pat.heights.max()
        if boxes:
            counts[i - start] = extremes.box_counts(pat, boxes)
        if offset is not None:
            level = math.sqrt(t) + a - offset
            thr = level * level if level > 0 else 0.0
            pair_counts += extremes.pair_depth_counts(f.leaves(), cfg.n, thr, cfg.b)
    return centered, counts, pair_counts


def _cascade_block(cfg: RunConfig, start: int, stop: int):
    depths = sorted(cfg.options.get("depths", [cfg.n]))
    if depths[-1] != cfg.n:
        raise ConfigError("largest cascade depth must equal n")
    mass_depth = int(cfg.options.get("mass_depth", min(4, depths[0])))
    shape = TreeShape(cfg.b, cfg.n)
    rows = np.empty((stop - start, len(depths), 3))
    identity_err = 0.0
    for i in range(start, stop):
        f = brw.sample_brw(shape, replicate_rng(cfg.seed, i))
        for j, d in enumerate(depths):
            rows[i - start, j, 0] = cascade.derivative_martingale(f, d)
            rows[i - start, j, 1] = cascade.additive_martingale(f, d)
            rows[i - start, j, 2] = cascade.squared_derivative_term(f, d)
        masses = cascade.cascade_masses(f, mass_depth)
        total = math.fsum(masses)
        d_n = rows[i - start, len(depths) - 1, 0]
        denom = max(abs(d_n), 1e-300)
        identity_err = max(identity_err, abs(total - d_n) / denom)
    return rows, identity_err


# ---------------------------------------------------------------------------
# experiment finishers


def _finish_field(cfg: RunConfig, parts):
    raw = np.concatenate([p["raw"] for p in parts])
    centered = np.concatenate([p["centered"] for p in parts])
    location = np.concatenate([p["location"] for p in parts])
    argmax = [a for p in parts for a in p["argmax"]]
    rows = [
        (i, float(raw[i]), float(centered[i]), float(location[i]), argmax[i])
        for i in range(len(raw))
    ]
    table = Table(
        "samples", "jsonl", ["replicate", "raw_max", "centered", "location", "argmax"], rows
    )
    summary = {
        "mean_centered": float(centered.mean()),
        "sd_centered": float(centered.std(ddof=1)) if len(centered) > 1 else 0.0,
    }
    if cfg.options.get("dump_fields") and cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)
        matrix = np.concatenate([p["values"] for p in parts], axis=0)
        field.write_fields(
            os.path.join(cfg.out, "fields.bin"),
            TreeShape(cfg.b, cfg.n),
            cfg.resolved_t(),
            cfg.seed,
            matrix,
        )
        summary["dumped_fields"] = int(matrix.shape[0])
    return {"samples": table}, summary, True


def _finish_walk(cfg: RunConfig, parts):
    vals = np.concatenate([p[0] for p in parts], axis=0)
    aborted = [i for p in parts for i in p[1]]
    keep = ~np.isnan(vals[:, 0])
    frac_aborted = 1.0 - keep.mean()
    rows = [
        (int(i), [float(v) for v in vals[i]]) for i in np.flatnonzero(keep)
    ]
    table = Table("fields", "jsonl", ["replicate", "values"], rows)
    summary = {
        "aborted": len(aborted),
        "mean_values": [float(v) for v in vals[keep].mean(axis=0)] if keep.any() else [],
    }
    ok = frac_aborted <= 0.001
    return {"fields": table}, summary, ok


def _finish_tail(cfg: RunConfig, parts):
    centered = np.concatenate(parts)
    y_grid = cfg.options.get("y_grid")
    if y_grid is None:
        y_grid = np.arange(1.0, 4.0 + 1e-9, 0.5)
    curve = extremes.tail_curve(centered, np.asarray(y_grid, float))
    rows = [
        (float(y), float(p), float(lo), float(hi))
        for y, p, lo, hi in zip(curve.y, curve.p, curve.lo, curve.hi)
    ]
    table = Table("tail", "csv", ["y", "p", "lo", "hi"], rows)
    summary = {
        "exponent": curve.exponent,
        "exponent_se": curve.exponent_se,
        "intercept": curve.intercept,
        "truncated": curve.truncated,
        "target_exponent": -2.0 * math.sqrt(math.log(cfg.b)),
    }
    return {"tail": table}, summary, True


def _finish_cascade(cfg: RunConfig, parts):
    depths = sorted(cfg.options.get("depths", [cfg.n]))
    rows_np = np.concatenate([p[0] for p in parts], axis=0)
    identity_err = max(p[1] for p in parts)
    rows = []
    for i in range(rows_np.shape[0]):
        for j, d in enumerate(depths):
            rows.append(
                (
                    i,
                    int(d),
                    float(rows_np[i, j, 0]),
                    float(rows_np[i, j, 1]),
                    float(rows_np[i, j, 2]),
                )
            )
    table = Table("cascade", "csv", ["replicate", "n", "D", "W", "D2"], rows)
    med_w = [float(np.median(rows_np[:, j, 1])) for j in range(len(depths))]
    med_d2 = [float(np.median(rows_np[:, j, 2])) for j in range(len(depths))]
    monotone = all(a > b for a, b in zip(med_w, med_w[1:])) and all(
        a > b for a, b in zip(med_d2, med_d2[1:])
    )
    summary = {
        "depths": [int(d) for d in depths],
        "median_W": med_w,
        "median_D2": med_d2,
        "identity_max_rel_err": identity_err,
        "identity_ok": identity_err <= 1e-12,
        "medians_decreasing": monotone,
    }
    return {"cascade": table}, summary, bool(summary["identity_ok"])


# ---------------------------------------------------------------------------
# single-shot experiments (no per-replicate row structure)


def _run_bessel_check(cfg: RunConfig):
    x = float(cfg.options.get("x", 2.0))
    t = float(cfg.options.get("t", 1.0))
    draws = int(cfg.replicates)
    rng = replicate_rng(cfg.seed, 0)
    sample = besq_mod.sample_besq0_step(np.full(draws, x), t, rng)
    atom_freq = float(np.mean(sample == 0.0))
    atom_true = besq_mod.besq0_atom(x, t)
    atom_sigma = math.sqrt(atom_true * (1 - atom_true) / draws)
    atom_ok = abs(atom_freq - atom_true) <= 3 * atom_sigma

    mean_ok = abs(sample.mean() - x) <= 3 * sample.std(ddof=1) / math.sqrt(draws)

    from scipy.integrate import quad

    mass, _ = quad(lambda y: besq_mod.besq0_density(x, y, t), 0, np.inf, limit=200)
    mass_err = abs(atom_true + mass - 1.0)
    mean_int, _ = quad(lambda y: y * besq_mod.besq0_density(x, y, t), 0, np.inf, limit=200)
    mean_err = abs(mean_int - x)

    pos = np.sort(sample[sample > 0.0])
    ks = stats.ks_two_sample(pos, _inverse_cdf_draws(x, t, len(pos), replicate_rng(cfg.seed, 0, DOMAIN_AUX)))
    summary = {
        "atom_freq": atom_freq,
        "atom_true": atom_true,
        "atom_ok": bool(atom_ok),
        "mean_ok": bool(mean_ok),
        "mass_err": mass_err,
        "mass_ok": bool(mass_err <= 1e-8),
        "mean_int_err": mean_err,
        "mean_int_ok": bool(mean_err <= 1e-6),
        "ks_stat": ks.statistic,
        "ks_pvalue": ks.pvalue,
        "ks_ok": bool(ks.pvalue > 0.01),
    }
    ok = all(summary[k] for k in ("atom_ok", "mean_ok", "mass_ok", "mean_int_ok", "ks_ok"))
    table = Table("bessel", "jsonl", ["key", "value"], sorted(summary.items()))
    return {"bessel": table}, summary, ok


def _inverse_cdf_draws(x: float, t: float, count: int, rng) -> np.ndarray:
    """Independent oracle: inverse-CDF sampling of the positive part of the
    transition by quadrature of the closed-form density."""
    from scipy.integrate import cumulative_trapezoid

    hi = x + 44 * t + 12 * math.sqrt(max(x * t, 1.0))
    grid = np.linspace(1e-12, hi, 40001)
    dens = np.array([besq_mod.besq0_density(x, y, t) for y in grid])
    cdf = cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    u = rng.random(count)
    return np.interp(u, cdf, grid)


def _run_gamma_star(cfg: RunConfig):
    depth_list = [int(d) for d in cfg.options.get("depths", [5, 6, 7])]
    nodes = int(cfg.options.get("nodes", 25))
    direct = int(cfg.options.get("direct_replicates", 200_000))
    importance = int(cfg.options.get("importance_replicates", 40_000))
    rows = []
    results = []
    for j, ell in enumerate(depth_list):
        rng = replicate_rng(cfg.seed, j, DOMAIN_AUX)
        r = extremes.tail_intensity_integral(
            cfg.b,
            ell,
            rng,
            nodes=nodes,
            direct_replicates=direct,
            importance_replicates=importance,
        )
        results.append(r)
        rows.append((ell, float(r.value), float(r.lo), float(r.hi), bool(r.truncated)))
    table = Table("gamma", "csv", ["depth", "value", "lo", "hi", "truncated"], rows)
    mutually_consistent = all(
        not (a.lo > c.hi or c.lo > a.hi) for a in results for c in results
    )
    summary = {
        "depths": depth_list,
        "values": [float(r.value) for r in results],
        "ses": [float(r.se) for r in results],
        "mutually_consistent": bool(mutually_consistent),
        "all_positive": bool(all(r.lo > 0 for r in results)),
    }
    return {"gamma": table}, summary, bool(summary["all_positive"])


def _run_isomorphism(cfg: RunConfig):
    dur = float(cfg.options.get("edge_duration", 1.0))
    negative_control = bool(cfg.options.get("negative_control", False))
    if negative_control:
        dur = float(cfg.options.get("control_duration", 0.5))
    rep = verify_isomorphism(
        cfg.b,
        cfg.n,
        cfg.resolved_t(),
        cfg.replicates,
        cfg.seed,
        edge_duration=dur,
        workers=cfg.workers,
    )
    rows = [(r.label, float(r.statistic), float(r.pvalue), bool(r.passed)) for r in rep.vertex_rows]
    rows.append(("bivariate-chi2", float(rep.bivariate_stat), float(rep.bivariate_pvalue), rep.bivariate_pvalue > rep.alpha))
    table = Table("isomorphism", "jsonl", ["vertex", "statistic", "pvalue", "passed"], rows)
    summary = {
        "passed": rep.passed,
        "negative_control": negative_control,
        "edge_duration": dur,
    }
    ok = (not rep.passed) if negative_control else rep.passed
    return {"isomorphism": table}, summary, ok


def _run_gumbel(cfg: RunConfig):
    parts = _run_blocks(cfg, _tail_block)
    centered = np.concatenate(parts)
    d_depth = int(cfg.options.get("d_depth", 16))
    d_draws = int(cfg.options.get("d_draws", 2048))
    limit = cascade.derivative_limit_draws(
        cfg.b, d_depth, d_draws, replicate_rng(cfg.seed, 0, DOMAIN_AUX)
    )
    fit = extremes.gumbel_fit(centered, limit.draws, cfg.b)
    half = len(centered) // 2
    fit_a = extremes.gumbel_fit(centered[:half], limit.draws, cfg.b)
    fit_b = extremes.gumbel_fit(centered[half:], limit.draws, cfg.b)
    rel_split = abs(fit_a.c - fit_b.c) / fit.c
    summary = {
        "c": fit.c,
        "sup_distance": fit.sup_distance,
        "c_first_half": fit_a.c,
        "c_second_half": fit_b.c,
        "split_rel_diff": rel_split,
        "d_depth": d_depth,
        "d_draws_used": fit.draws_used,
        "d_draws_dropped": fit.draws_dropped,
        "d_stabilization": limit.stabilization,
    }
    rows = sorted((k, float(v)) for k, v in summary.items() if isinstance(v, (int, float)))
    table = Table("gumbel", "jsonl", ["key", "value"], rows)
    return {"gumbel": table}, summary, True


def _run_point_process(cfg: RunConfig):
    boxes_opt = cfg.options.get("boxes")
    if not boxes_opt:
        raise ConfigError("point-process requires options.boxes")
    weights = cfg.options.get("weights", [1.0] * len(boxes_opt))
    kappa = cfg.options.get("kappa")
    if kappa is None:
        raise ConfigError("point-process requires options.kappa (fitted scale)")
    parts = _run_blocks(cfg, _pattern_block)
    counts = np.concatenate([p[1] for p in parts], axis=0)
    z_depth = int(cfg.options.get("z_depth", 16))
    z_draws = int(cfg.options.get("z_draws", 2048))
    boxes = [extremes.LaplaceBox(**bx) for bx in boxes_opt]
    masses = _cascade_box_masses(cfg.b, z_depth, z_draws, boxes, replicate_rng(cfg.seed, 0, DOMAIN_AUX))
    report = extremes.laplace_comparison(counts, boxes, weights, masses, float(kappa), cfg.b)
    summary = {
        "empirical": report.empirical,
        "empirical_se": report.empirical_se,
        "predicted": report.predicted,
        "predicted_se": report.predicted_se,
        "gap": report.gap,
        "kappa": float(kappa),
    }
    rows = sorted((k, float(v)) for k, v in summary.items())
    table = Table("laplace", "jsonl", ["key", "value"], rows)
    return {"laplace": table}, summary, True


def _cascade_box_masses(b, depth, draws, boxes, rng) -> np.ndarray:
    """Cascade masses of each box's location interval, one row per draw.

    Location intervals are aligned to the depth-`depth` b-adic grid: a leaf
    interval contributes when it is contained in [a_lo, a_hi].
    """
    shape = TreeShape(b, depth)
    n_leaves = shape.num_leaves
    sel = []
    for bx in boxes:
        lo = int(np.ceil(bx.a_lo * n_leaves - 1e-9))
        hi = int(np.floor(bx.a_hi * n_leaves + 1e-9))
        sel.append((max(lo, 0), min(hi, n_leaves)))
    out = np.empty((draws, len(boxes)))
    for i in range(draws):
        f = brw.sample_brw(shape, rng)
        w = cascade.leaf_weights(f)
        for j, (lo, hi) in enumerate(sel):
            out[i, j] = math.fsum(w[lo:hi])
    return out


def _run_geometry(cfg: RunConfig):
    offset = float(cfg.options.get("pair_offset", 2.0))
    r_list = [int(r) for r in cfg.options.get("r_list", [2, 3, 4])]
    cfg.options["pair_offset"] = offset
    parts = _run_blocks(cfg, _pattern_block)
    pair_counts = sum(p[2] for p in parts)
    hist = extremes.PairDepths(depth=cfg.n, counts=pair_counts, replicates=cfg.replicates)
    masses = {r: hist.middle_mass(r) for r in r_list}
    rows = [(int(d), int(c)) for d, c in enumerate(pair_counts)]
    table = Table("pair_depths", "csv", ["ancestor_depth", "pairs"], rows)
    vals = [masses[r] for r in r_list]
    summary = {
        "offset": offset,
        "total_pairs": hist.total_pairs,
        "middle_mass": {str(r): float(m) for r, m in masses.items()},
        "decreasing": bool(all(a >= b for a, b in zip(vals, vals[1:]))),
    }
    ok = hist.total_pairs > 0
    return {"pair_depths": table}, summary, ok


_BLOCK_EXPERIMENTS = {
    "field-sample": (_field_block, _finish_field),
    "walk": (_walk_block, _finish_walk),
    "tail": (_tail_block, _finish_tail),
    "cascade": (_cascade_block, _finish_cascade),
}

_WHOLE_EXPERIMENTS = {
    "bessel-check": _run_bessel_check,
    "gamma-star": _run_gamma_star,
    "isomorphism": _run_isomorphism,
    "gumbel": _run_gumbel,
    "point-process": _run_point_process,
    "geometry": _run_geometry,
}


def run(cfg: RunConfig) -> RunResult:
    """Execute one experiment: validate, run, optionally write outputs."""
    cfg.validate()
    start = time.monotonic()
    if cfg.kind in _BLOCK_EXPERIMENTS:
        block_fn, finish_fn = _BLOCK_EXPERIMENTS[cfg.kind]
        parts = _run_blocks(cfg, block_fn)
        tables, summary, ok = finish_fn(cfg, parts)
    else:
        tables, summary, ok = _WHOLE_EXPERIMENTS[cfg.kind](cfg)
    wall = time.monotonic() - start
    manifest = RunManifest(
        config=cfg.to_dict(),
        version=__version__,
        rng=RNG_ID,
        summary=summary,
        wall_time_s=wall,
        manifest_hash=manifest_hash(cfg),
    )
    if cfg.out is not None:
        _write_outputs(cfg.out, manifest, tables)
    return RunResult(config=cfg, manifest=manifest, tables=tables, summary=summary, ok=ok)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_outputs(out_dir: str, manifest: RunManifest, tables: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for table in tables.values():
        path = os.path.join(out_dir, f"{table.name}.{table.kind}")
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            if table.kind == "csv":
                fh.write(f"# manifest={manifest.manifest_hash}\n")
                fh.write(",".join(table.header) + "\n")
                for row in table.rows:
                    fh.write(",".join(_csv_cell(v) for v in row) + "\n")
            else:
                fh.write(json.dumps({"_manifest": manifest.manifest_hash}) + "\n")
                for row in table.rows:
                    rec = dict(zip(table.header, row))
                    fh.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")
        os.replace(tmp, path)
    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath + ".tmp", "w") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    os.replace(mpath + ".tmp", mpath)


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
