"""Monte Carlo harness for the three scaling regimes of the endpoint.

Depending on how fast the interface spacing grows with the polymer length,
the endpoint is Gaussian at a subdiffusive scale, converges (divided by the
spacing) to a Poissonised interface walk, or stays tight on the starting
interface.  Each regime runs replicated exact skeleton draws and reports
goodness-of-fit statistics, each with an explicit finite-replica sampling
radius so that pass/fail never hides Monte Carlo noise.  A separate
diagnostics suite checks the supporting limit laws of the underlying tilted
renewal process (mark-walk CLT with its Berry-Esseen budget, contact-rate
concentration, hop-count Poisson limit, first-hop waiting law).

Replica ``i`` always draws from ``default_rng([seed, i])`` (and vectorised
diagnostics from fixed-size chunk streams), so reports are bit-reproducible
for a given (seed, replicas) regardless of worker count.
"""

import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .free_energy import free_energy, hop_cost, scaling_constants, step_mean
from .kernels import hop_transform
from .path_engine import _cached_free, skeleton_statistics
from .renewal import _sample_tail_gap, build_step_law

#: Replica block size used by vectorised (non-skeleton) simulations.
CHUNK = 512

#: Default regime thresholds; overridable per config.
DEFAULT_THRESHOLDS = {
    "gaussian_ks": 0.05,
    "variance_ratio_low": 0.8,
    "variance_ratio_high": 1.2,
    "hop_count_tv": 0.05,
    "interface_walk_tv": 0.07,
    "tail_percentile_spread": 10.0,
    "contact_rate_epsilon": 0.02,
    "contact_rate_outlier": 0.01,
}


# ---------------------------------------------------------------------------
# goodness-of-fit machinery


def ks_statistic(sample, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a vectorised cdf."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.atleast_1d(np.asarray(cdf(x), dtype=float))
    hi = np.arange(1, n + 1) / n - f
    lo = f - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))


def ks_radius(replicas, quantile=1.63) -> float:
    """99% quantile of the KS statistic of an M-sample from its own law."""
    return quantile / math.sqrt(replicas)


def tv_distance(hist_a, hist_b) -> float:
    """Total variation between two histograms (dicts value -> mass).

    Counts are normalised; identical histograms give 0, disjoint ones 1.
    """
    a, b = dict(hist_a), dict(hist_b)
    if not a or not b:
        raise ValueError("empty histogram")
    za = sum(a.values())
    zb = sum(b.values())
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) / za - b.get(k, 0.0) / zb) for k in keys)


def tv_radius(pmf, replicas) -> float:
    """Expected-plus-3-sigma Monte Carlo radius of an empirical-vs-exact TV.

    Cell-wise normal approximation of the multinomial counts: the expected
    absolute deviation per cell is sqrt(2 q (1-q) / (pi M)).
    """
    q = np.asarray(list(pmf.values()) if hasattr(pmf, "values") else pmf, dtype=float)
    var = q * (1.0 - q) / replicas
    expected = 0.5 * float(np.sum(np.sqrt(2.0 * var / math.pi)))
    spread = 0.5 * math.sqrt(float(np.sum(var * (1.0 - 2.0 / math.pi))))
    return expected + 3.0 * spread


def normal_cdf(x):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x, dtype=float) / math.sqrt(2.0)))


def poisson_pmf(rate, tail=1e-12) -> dict:
    """Poisson probabilities down to a ``tail`` remainder (lumped at the end)."""
    if rate < 0.0:
        raise ValueError("rate must be >= 0")
    out = {}
    p = math.exp(-rate)
    k = 0
    total = 0.0
    while total < 1.0 - tail and k < 10000:
        out[k] = p
        total += p
        k += 1
        p *= rate / k
    return out


def interface_walk_law(rate, tail=1e-12) -> dict:
    """Law of a simple walk run for an independent Poisson number of steps.

    ``P(j) = sum_v Poisson(rate)(v) * P(v-step walk = j)``; the Poisson sum is
    truncated at mass ``tail``.
    """
    if rate < 0.0:
        raise ValueError("rate must be >= 0")
    pois = poisson_pmf(rate, tail)
    out = {}
    for v, pv in pois.items():
        scale = pv / 2.0**v
        for j in range(-v, v + 1, 2):
            out[j] = out.get(j, 0.0) + scale * math.comb(v, (v + j) // 2)
    return out


def empirical_hist(values) -> dict:
    vals, counts = np.unique(np.asarray(values), return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


# ---------------------------------------------------------------------------
# configuration and report containers


def nearest_even_spacing(x) -> int:
    """Even integer closest to ``x``, at least 2."""
    return max(2, 2 * round(x / 2.0))


def spacing_for(rule, length, delta, zeta=0.0) -> int:
    """Interface spacing selected by a named growth rule at one length."""
    c = hop_cost(delta)
    log_n = math.log(length)
    if rule == "half-critical":
        return nearest_even_spacing(0.5 * log_n / c)
    if rule == "critical":
        return nearest_even_spacing(log_n / c + zeta)
    if rule == "double-critical":
        return nearest_even_spacing(2.0 * log_n / c)
    raise ValueError(f"unknown spacing rule {rule!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One regime run: pinning strength, length grid, spacing rule, budget."""

    delta: float
    lengths: tuple
    replicas: int
    seed: int
    rule: str = "critical"
    zeta: float = 0.0
    spacings: tuple | None = None  # explicit list overriding the rule
    workers: int = 1
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError("regime experiments require delta > 0")
        if self.replicas < 0:
            raise ValueError("replicas must be >= 0")
        if self.spacings is not None and len(self.spacings) != len(self.lengths):
            raise ValueError("explicit spacing list must match the length grid")

    def threshold(self, name) -> float:
        return self.thresholds.get(name, DEFAULT_THRESHOLDS[name])

    def spacing_at(self, i) -> int:
        if self.spacings is not None:
            return int(self.spacings[i])
        return spacing_for(self.rule, self.lengths[i], self.delta, self.zeta)


@dataclass(frozen=True)
class StatRow:
    """One reported statistic with its pass rule ``value <= threshold + radius``."""

    regime: str
    length: int
    spacing: int
    delta: float
    zeta_realized: float
    statistic: str
    value: float
    radius: float
    threshold: float
    passed: bool
    replicas: int
    seed: int


@dataclass
class ExperimentReport:
    """Rows plus free-form extras for one regime run."""

    regime: str
    delta: float
    replicas: int
    seed: int
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def add(self, **kw):
        self.rows.append(StatRow(**kw))


# ---------------------------------------------------------------------------
# replica collection


def _stats_chunk(args):
    """Worker task: skeleton statistics for a replica index range."""
    delta, spacing, length, seed, lo, hi = args
    sampler = _cached_free(delta, spacing)
    out = np.empty((hi - lo, 6), dtype=np.int64)
    for i in range(lo, hi):
        rng = np.random.default_rng([seed, i])
        stats = skeleton_statistics(sampler.sample(length, rng))
        out[i - lo] = (
            stats.endpoint,
            stats.contacts,
            stats.hops,
            stats.last_contact,
            stats.first_hop_index,
            stats.first_hop_gap,
        )
    return out


def collect_free_stats(delta, spacing, length, replicas, seed, workers=1):
    """Statistics of ``replicas`` independent free-polymer skeletons.

    Returns a dict of int64 arrays keyed by statistic name.  Replica ``i``
    uses the stream ``[seed, i]``, so the result is independent of worker
    count and chunking.
    """
    delta = float(delta)
    spacing = int(spacing)
    tasks = [
        (delta, spacing, length, seed, lo, min(lo + 250, replicas))
        for lo in range(0, replicas, 250)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_stats_chunk, tasks))
    else:
        blocks = [_stats_chunk(t) for t in tasks]
    data = (
        np.concatenate(blocks)
        if blocks
        else np.empty((0, 6), dtype=np.int64)
    )
    names = (
        "endpoint",
        "contacts",
        "hops",
        "last_contact",
        "first_hop_index",
        "first_hop_gap",
    )
    return {name: data[:, j] for j, name in enumerate(names)}


def _check_offsets_decreasing(config, report):
    """Warn when the configured rule does not drive the offset to -infinity."""
    c = hop_cost(config.delta)
    offsets = [
        config.spacing_at(i) - math.log(n) / c for i, n in enumerate(config.lengths)
    ]
    if len(offsets) > 1 and any(b >= a for a, b in zip(offsets, offsets[1:])):
        msg = (
            "spacing rule does not give a decreasing critical offset: "
            f"{offsets}; proceeding anyway"
        )
        warnings.warn(msg)
        report.warnings.append(msg)
    return offsets


# ---------------------------------------------------------------------------
# regimes


def regime_gaussian(config) -> ExperimentReport:
    """Slowly growing spacings: the normalised endpoint is standard normal.

    The normalisation uses the asymptotic scale
    ``gaussian_scale * exp(-hop_cost T / 2) * T * sqrt(N)`` for rule-driven
    spacings; for an explicit spacing list the empirical standard deviation
    is used instead (fixed spacing keeps the same limit at its own scale).
    """
    start = time.time()
    report = ExperimentReport(
        regime="gaussian",
        delta=config.delta,
        replicas=config.replicas,
        seed=config.seed,
    )
    _check_offsets_decreasing(config, report)
    consts = scaling_constants(config.delta)
    for i, length in enumerate(config.lengths):
        spacing = config.spacing_at(i)
        zeta_n = spacing - math.log(length) / consts.hop_cost
        if config.replicas == 0:
            continue
        stats = collect_free_stats(
            config.delta, spacing, length, config.replicas, config.seed, config.workers
        )
        endpoint = stats["endpoint"].astype(float)
        theory_scale = (
            consts.gaussian_scale
            * math.exp(-consts.hop_cost * spacing / 2.0)
            * spacing
            * math.sqrt(length)
        )
        scale = theory_scale if config.spacings is None else endpoint.std()
        ks = ks_statistic(endpoint / scale, normal_cdf)
        report.add(
            regime="gaussian",
            length=length,
            spacing=spacing,
            delta=config.delta,
            zeta_realized=zeta_n,
            statistic="endpoint_normal_ks",
            value=ks,
            radius=ks_radius(config.replicas),
            threshold=config.threshold("gaussian_ks"),
            passed=ks <= config.threshold("gaussian_ks") + ks_radius(config.replicas),
            replicas=config.replicas,
            seed=config.seed,
        )
        ratio = float(endpoint.var() / theory_scale**2)
        # variance-of-variance radius at the Gaussian reference
        ratio_radius = 3.0 * math.sqrt(2.0 / max(config.replicas - 1, 1))
        lo_t = config.threshold("variance_ratio_low")
        hi_t = config.threshold("variance_ratio_high")
        report.add(
            regime="gaussian",
            length=length,
            spacing=spacing,
            delta=config.delta,
            zeta_realized=zeta_n,
            statistic="endpoint_variance_ratio",
            value=ratio,
            radius=ratio_radius,
            threshold=hi_t,
            passed=lo_t - ratio_radius <= ratio <= hi_t + ratio_radius,
            replicas=config.replicas,
            seed=config.seed,
        )
    report.wall_clock = time.time() - start
    return report


def regime_critical(config) -> ExperimentReport:
    """Critically growing spacings: hop counts are Poisson and the endpoint
    over the spacing follows the Poissonised interface walk.

    The Poisson intensity is evaluated at the *realized* offset of the even
    integer spacing actually used, not at the target offset.
    """
    start = time.time()
    report = ExperimentReport(
        regime="critical",
        delta=config.delta,
        replicas=config.replicas,
        seed=config.seed,
    )
    for i, length in enumerate(config.lengths):
        spacing = config.spacing_at(i)
        zeta_n = spacing - math.log(length) / hop_cost(config.delta)
        consts = scaling_constants(config.delta, zeta_n)
        if config.replicas == 0:
            continue
        stats = collect_free_stats(
            config.delta, spacing, length, config.replicas, config.seed, config.workers
        )
        rate = consts.poisson_rate
        pois = poisson_pmf(rate)
        tv_hops = tv_distance(empirical_hist(stats["hops"]), pois)
        rad_hops = tv_radius(pois, config.replicas)
        report.add(
            regime="critical",
            length=length,
            spacing=spacing,
            delta=config.delta,
            zeta_realized=zeta_n,
            statistic="hop_count_poisson_tv",
            value=tv_hops,
            radius=rad_hops,
            threshold=config.threshold("hop_count_tv"),
            passed=tv_hops <= config.threshold("hop_count_tv") + rad_hops,
            replicas=config.replicas,
            seed=config.seed,
        )
        rounded = np.rint(stats["endpoint"] / spacing).astype(np.int64)
        walk = interface_walk_law(rate)
        tv_walk = tv_distance(empirical_hist(rounded), walk)
        rad_walk = tv_radius(walk, config.replicas)
        report.add(
            regime="critical",
            length=length,
            spacing=spacing,
            delta=config.delta,
            zeta_realized=zeta_n,
            statistic="interface_walk_tv",
            value=tv_walk,
            radius=rad_walk,
            threshold=config.threshold("interface_walk_tv"),
            passed=tv_walk <= config.threshold("interface_walk_tv") + rad_walk,
            replicas=config.replicas,
            seed=config.seed,
        )
    report.wall_clock = time.time() - start
    return report


def regime_tight(config) -> ExperimentReport:
    """Fast-growing spacings: no hops at all and a tight endpoint.

    Checks the analytic inclusion bound ``e^delta N Q1`` on the probability
    of any hop and that the high quantiles of |endpoint| do not grow along
    the length grid; the empirical tail curves are kept in the extras.
    """
    start = time.time()
    report = ExperimentReport(
        regime="tight",
        delta=config.delta,
        replicas=config.replicas,
        seed=config.seed,
    )
    percentiles = []
    tail_curves = {}
    for i, length in enumerate(config.lengths):
        spacing = config.spacing_at(i)
        zeta_n = spacing - math.log(length) / hop_cost(config.delta)
        phi = free_energy(config.delta, spacing)
        bound = math.exp(config.delta) * length * hop_transform(spacing, phi)
        if config.replicas == 0:
            continue
        stats = collect_free_stats(
            config.delta, spacing, length, config.replicas, config.seed, config.workers
        )
        p_hop = float(np.mean(stats["hops"] >= 1))
        slack = 3.0 * math.sqrt(bound * (1.0 - min(bound, 1.0)) / config.replicas)
        report.add(
            regime="tight",
            length=length,
            spacing=spacing,
            delta=config.delta,
            zeta_realized=zeta_n,
            statistic="any_hop_probability",
            value=p_hop,
            radius=slack,
            threshold=bound,
            passed=p_hop <= bound + slack,
            replicas=config.replicas,
            seed=config.seed,
        )
        abs_endpoint = np.abs(stats["endpoint"])
        percentiles.append(float(np.percentile(abs_endpoint, 99.0)))
        grid = np.arange(0, int(abs_endpoint.max()) + 2)
        tail_curves[length] = {
            "levels": grid.tolist(),
            "tail_prob": [float(np.mean(abs_endpoint > g)) for g in grid],
        }
    if percentiles:
        spread = max(percentiles) - min(percentiles)
        thr = config.threshold("tail_percentile_spread")
        report.add(
            regime="tight",
            length=max(config.lengths),
            spacing=config.spacing_at(len(config.lengths) - 1),
            delta=config.delta,
            zeta_realized=float("nan"),
            statistic="abs_endpoint_p99_spread",
            value=spread,
            radius=0.0,
            threshold=thr,
            passed=spread <= thr,
            replicas=config.replicas,
            seed=config.seed,
        )
    report.extras["tail_curves"] = tail_curves
    report.extras["p99"] = percentiles
    report.wall_clock = time.time() - start
    return report


# ---------------------------------------------------------------------------
# diagnostics of the underlying renewal process


def _renewal_counts(law, length, replicas, seed, tag):
    """Vectorised (contacts, hops) of the unconditioned renewal up to
    ``length`` for ``replicas`` chunked streams."""
    contacts = np.empty(replicas, dtype=np.int64)
    hops = np.empty(replicas, dtype=np.int64)
    est = length / law.mean
    cols = int(est + 8.0 * math.sqrt(est) + 32)
    tail_slot = law.horizon + 1
    for lo in range(0, replicas, CHUNK):
        hi = min(lo + CHUNK, replicas)
        rows = hi - lo
        rng = np.random.default_rng([seed, tag, lo])
        gaps = law.alias.draw(rng, rows * cols).reshape(rows, cols)
        tails = np.nonzero(gaps == tail_slot)
        for r, c in zip(*tails):
            gaps[r, c] = _sample_tail_gap(law, rng)
        frac = law.hop_given_gap[np.minimum(gaps, law.horizon)]
        for r, c in zip(*tails):
            frac[r, c] = law.hop_fraction(int(gaps[r, c]))
        hop_draws = rng.random((rows, cols)) < frac
        times = np.cumsum(gaps, axis=1)
        inside = times <= length
        contacts[lo:hi] = inside.sum(axis=1)
        hops[lo:hi] = (inside & hop_draws).sum(axis=1)
        # unbiased sequential extension of any row that stopped short
        for r in np.nonzero(times[:, -1] <= length)[0]:
            t = int(times[r, -1])
            while True:
                gap = law.alias.draw(rng)
                if gap == tail_slot:
                    gap = _sample_tail_gap(law, rng)
                is_hop = rng.random() < law.hop_fraction(gap)
                t += gap
                if t > length:
                    break
                contacts[lo + r] += 1
                hops[lo + r] += int(is_hop)
    return contacts, hops


def diagnostics_suite(delta, spacing, length, replicas, seed, workers=1) -> ExperimentReport:
    """Statistical checks of the tilted renewal's limit theorems.

    (a) the mark walk obeys the CLT within its Berry-Esseen budget,
    (b) the contact rate concentrates at the single-interface density,
    (c) the hop count is Poisson at its matched intensity,
    (d) the first-hop epoch is geometric (exponential limit) and the gap at
        the first hop is negligible on the polymer scale,
    (e) the mark variance matches twice the tilted hop transform.
    """
    start = time.time()
    delta = float(delta)
    spacing = int(spacing)
    report = ExperimentReport(
        regime="diagnostics", delta=delta, replicas=replicas, seed=seed
    )
    law = build_step_law(delta, spacing)
    p_hop = 2.0 * math.exp(delta) * hop_transform(spacing, law.phi)
    zeta_n = spacing - math.log(length) / hop_cost(delta)
    s_single = scaling_constants(delta).contact_density

    def add(statistic, value, radius, threshold):
        report.add(
            regime="diagnostics",
            length=length,
            spacing=spacing,
            delta=delta,
            zeta_realized=zeta_n,
            statistic=statistic,
            value=value,
            radius=radius,
            threshold=threshold,
            passed=value <= threshold + radius,
            replicas=replicas,
            seed=seed,
        )

    # (a) Berry-Esseen for the mark walk: Y = signed sum of Bin(length, p) hops
    rng = np.random.default_rng([seed, 1])
    n_hops = rng.binomial(length, p_hop, size=replicas)
    y = 2.0 * rng.binomial(n_hops, 0.5) - n_hops
    sigma = math.sqrt(p_hop * length)
    add(
        "mark_walk_ks",
        ks_statistic(y / sigma, normal_cdf),
        3.0 * ks_radius(replicas),
        3.0 / sigma,
    )

    # (e) mark variance: Var(mark) = E(mark^2) = p_hop
    squared_marks = (rng.random(replicas * 16) < p_hop).astype(float)
    add(
        "mark_variance_gap",
        abs(float(squared_marks.mean()) - p_hop),
        0.0,
        3.0 * math.sqrt(p_hop * (1.0 - p_hop) / (replicas * 16)),
    )

    # (b) contact-rate concentration + (c) hop-count Poisson
    contacts, hops = _renewal_counts(law, length, replicas, seed, 2)
    eps = DEFAULT_THRESHOLDS["contact_rate_epsilon"]
    outliers = float(np.mean(np.abs(contacts / length - s_single) > eps))
    out_radius = 3.0 * math.sqrt(
        DEFAULT_THRESHOLDS["contact_rate_outlier"] / replicas
    )
    add(
        "contact_rate_outlier_frac",
        outliers,
        out_radius,
        DEFAULT_THRESHOLDS["contact_rate_outlier"],
    )
    matched_rate = p_hop * length / step_mean(delta, spacing)
    pois = poisson_pmf(matched_rate)
    add(
        "hop_count_tv",
        tv_distance(empirical_hist(hops), pois),
        tv_radius(pois, replicas),
        DEFAULT_THRESHOLDS["hop_count_tv"],
    )

    # (d) first-hop epoch: geometric over marks, exponential on the polymer scale
    rng = np.random.default_rng([seed, 3])
    first = rng.geometric(p_hop, size=replicas)
    v_rate = scaling_constants(delta, zeta_n).first_hop_rate

    def exp_cdf(x):
        return 1.0 - np.exp(-v_rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    add(
        "first_hop_exponential_ks",
        ks_statistic((first - 1.0) / length, exp_cdf),
        3.0 * ks_radius(replicas),
        0.02 + abs(p_hop * length / v_rate - 1.0),
    )
    hop_weights = 2.0 * law.hop_mass[law.hop_mass > 0.0]
    hop_support = np.nonzero(law.hop_mass > 0.0)[0]
    cdf = np.cumsum(hop_weights) / hop_weights.sum()
    picks = hop_support[np.searchsorted(cdf, rng.random(replicas))]
    exp_gap = float(np.dot(hop_support, hop_weights)) / hop_weights.sum()
    add(
        "first_hop_gap_mean_over_length",
        float(picks.mean()) / length,
        0.0,
        max(1e-3, 3.0 * exp_gap / length),
    )
    report.extras["matched_poisson_rate"] = matched_rate
    report.extras["hop_probability"] = p_hop
    report.wall_clock = time.time() - start
    return report


# ---------------------------------------------------------------------------
# report output


def write_report_csv(report, path):
    """Write rows to CSV in the documented schema; bit-stable per (seed, M)."""
    cols = (
        "regime,N,T_N,delta,zeta_realized,statistic_name,value,"
        "radius,threshold,pass,M,seed"
    )
    lines = [cols]
    for r in report.rows:
        lines.append(
            ",".join(
                [
                    r.regime,
                    str(r.length),
                    str(r.spacing),
                    f"{r.delta:.9g}",
                    f"{r.zeta_realized:.9g}",
                    r.statistic,
                    f"{r.value:.9g}",
                    f"{r.radius:.9g}",
                    f"{r.threshold:.9g}",
                    str(r.passed).lower(),
                    str(r.replicas),
                    str(r.seed),
                ]
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_json(report, path):
    """JSON summary: config echo, rows, extras, wall clock."""
    payload = {
        "regime": report.regime,
        "delta": report.delta,
        "replicas": report.replicas,
        "seed": report.seed,
        "passed": report.passed,
        "rows": [asdict(r) for r in report.rows],
        "extras": report.extras,
        "warnings": report.warnings,
        "wall_clock_seconds": report.wall_clock,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
