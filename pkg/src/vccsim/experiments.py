"""Monte Carlo harness for effective sum-rates and effective gains.

A scenario fixes the cell, antenna and caching parameters plus the power
sweep; runners draw user locations and fading realizations, solve the
per-realization power allocation, and reduce to per-point means with
standard errors.  All randomness flows through keyed substreams of the
master seed, and results are reduced in location order, so a report is
bit-identical for any worker count.

Substream keys: ``(0, loc)`` user positions, ``(1, loc, fad, group)``
fading, ``(2, loc, fad, group)`` transmitter CSI errors,
``(3, loc, fad, group)`` receiver coupling errors, ``(4, loc, fad, 0|1)``
baseline-scheme channels.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .allocation import UserRateFunction, mmf_massive_mimo, solve_mmf, zf_mmf_bounds
from .caching import q_max_uniform
from .channel import (
    GroupChannel,
    complex_gaussian,
    corrupt_csit,
    csi_overhead,
    dbm_to_watts,
    geometry_preset,
    noise_power_watts,
    sample_user_position,
    substream,
)
from .errors import InvalidConfigurationError, UnsupportedConfigurationError
from .precoding import (
    bd_mrc_eigenvalues,
    msv_gains_fast,
    msv_rate_from_gains,
    zf_matrix,
)

__all__ = [
    "Scenario",
    "SchemeCurve",
    "RateReport",
    "run_vcc_bd_mrc",
    "run_cacheless_bd_mrc",
    "run_vcc_zf",
    "run_msv",
    "run_imperfect_csi",
    "optimize_q",
    "effective_gain",
    "CSV_COLUMNS",
    "rows_for_curve",
    "rows_for_best",
    "format_csv",
]

OPTIMIZE = "optimize"


@dataclass(frozen=True)
class Scenario:
    """Static parameters of one experiment.

    ``users_per_group`` (the served users per cache group) and
    ``baseline_users`` (the cacheless multiplexing gain) may be ``None`` to
    request per-point optimization.  ``geometry`` of ``None`` means
    statistically symmetric users with unit pathloss, in which case
    ``noise_power`` should usually be 1 so the sweep reads as transmit SNR.
    """

    name: str = "custom"
    geometry: str | None = "macro"
    num_tx_antennas: int = 64
    num_states: int = 5
    cache_fraction: Fraction = Fraction(4, 5)
    antennas_per_user: int = 4
    users_per_group: int | None = 4
    baseline_users: int | None = None
    ptot_dbm: tuple[float, ...] = (30.0, 34.0, 38.0, 42.0, 46.0, 50.0)
    coherence_symbols: int = 15000
    pilot_symbols: int = 10
    noise_power: float = noise_power_watts()
    csit_error_var: float = 0.0
    csir_error_vars: tuple[float, ...] = ()
    n_locations: int = 1000
    n_fadings: int = 20
    seed: int = 0
    users_per_state: int | None = None

    def __post_init__(self):
        gain = self.num_states * Fraction(self.cache_fraction)
        if gain.denominator != 1:
            raise InvalidConfigurationError(
                f"num_states * cache_fraction = {gain} is not an integer"
            )
        if not 0 <= Fraction(self.cache_fraction) <= 1:
            raise InvalidConfigurationError("cache_fraction outside [0, 1]")
        if not self.ptot_dbm:
            raise InvalidConfigurationError("power sweep must be nonempty")
        if self.antennas_per_user < 1 or self.num_tx_antennas < self.antennas_per_user:
            raise InvalidConfigurationError(
                "need 1 <= antennas_per_user <= num_tx_antennas"
            )
        if self.n_locations < 1 or self.n_fadings < 1:
            raise InvalidConfigurationError("realization counts must be positive")
        if self.users_per_group is not None:
            cap = self.max_group_users()
            if not 1 <= self.users_per_group <= cap:
                raise InvalidConfigurationError(
                    f"users_per_group {self.users_per_group} outside 1..{cap}"
                )
        if self.geometry is not None:
            geometry_preset(self.geometry)

    @property
    def coded_gain(self) -> int:
        return int(self.num_states * Fraction(self.cache_fraction)) + 1

    @property
    def cached_load(self) -> int:
        return self.coded_gain - 1

    @property
    def p_watts(self) -> tuple[float, ...]:
        return tuple(dbm_to_watts(p) for p in self.ptot_dbm)

    @property
    def snr_db(self) -> tuple[float, ...]:
        return tuple(
            10.0 * math.log10(p / self.noise_power) for p in self.p_watts
        )

    def max_group_users(self) -> int:
        """Per-group multiplexing cap: null-space feasibility plus the
        whole-group antenna budget this simulator enforces."""
        l, m = self.num_tx_antennas, self.antennas_per_user
        b = self.users_per_state if self.users_per_state else (m + l - 1) // m
        return max(1, min(q_max_uniform(l, m, b), l // m))

    def group_user_counts(self, fixed: int | None) -> tuple[int, ...]:
        """Candidate served-user counts: the fixed value or the full sweep."""
        if fixed is not None:
            return (fixed,)
        return tuple(range(1, self.max_group_users() + 1))

    def cacheless_counterpart(self) -> "Scenario":
        """Same physical setup with a single group and no cache."""
        return dataclasses.replace(
            self,
            name=f"{self.name}-cacheless",
            num_states=1,
            cache_fraction=Fraction(0),
            users_per_group=self.baseline_users,
        )

    def overhead_factor(self, num_groups: int, q: int) -> float:
        return csi_overhead(
            self.coherence_symbols,
            self.pilot_symbols,
            num_groups * q * self.antennas_per_user,
        ).overhead_factor


@dataclass(frozen=True)
class SchemeCurve:
    """Per-point statistics of one scheme over the power sweep."""

    scheme: str
    ptot_dbm: tuple[float, ...]
    q_values: tuple[int, ...]
    mean: np.ndarray    # (n_q, n_p) nats/s/Hz
    stderr: np.ndarray  # (n_q, n_p)

    def best(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per power point: argmax-q (smallest on ties), its mean and stderr."""
        idx = np.argmax(self.mean, axis=0)
        qs = np.array([self.q_values[i] for i in idx])
        cols = np.arange(self.mean.shape[1])
        return qs, self.mean[idx, cols], self.stderr[idx, cols]

    def single(self) -> tuple[int, np.ndarray, np.ndarray]:
        if len(self.q_values) != 1:
            raise ValueError(f"curve {self.scheme} holds a q sweep, not one row")
        return self.q_values[0], self.mean[0], self.stderr[0]


@dataclass(frozen=True)
class RateReport:
    scenario: Scenario
    curves: dict[str, SchemeCurve]

    def __getitem__(self, scheme: str) -> SchemeCurve:
        return self.curves[scheme]


def _parallel_map(fn, args_list, workers: int) -> list:
    if workers and workers > 1 and len(args_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(args_list) // (workers * 4))
            return list(pool.map(fn, args_list, chunksize=chunk))
    return [fn(a) for a in args_list]


def _location_betas(scenario: Scenario, num_groups: int, q_top: int, loc: int) -> np.ndarray:
    if scenario.geometry is None:
        return np.ones((num_groups, q_top))
    geom = geometry_preset(scenario.geometry)
    rng = substream(scenario.seed, 0, loc)
    draws = [
        sample_user_position(geom, rng).beta for _ in range(num_groups * q_top)
    ]
    return np.asarray(draws).reshape(num_groups, q_top)


def _unit_channels(scenario: Scenario, num_groups: int, q_top: int, loc: int, fad: int):
    l, m = scenario.num_tx_antennas, scenario.antennas_per_user
    return [
        complex_gaussian(substream(scenario.seed, 1, loc, fad, gi), (l, q_top * m))
        for gi in range(num_groups)
    ]


def _group_channel(unit: np.ndarray, betas_row: np.ndarray, q: int, m: int) -> GroupChannel:
    per_user = tuple(
        (unit[:, k * m : (k + 1) * m] * math.sqrt(betas_row[k]), float(betas_row[k]))
        for k in range(q)
    )
    return GroupChannel(per_user)


def _curve_from_draws(
    scheme: str, scenario: Scenario, q_values, samples: np.ndarray
) -> SchemeCurve:
    """Reduce draw-level rates ``(n_loc, n_fad, n_q, n_p)`` to a curve."""
    loc_means = samples.mean(axis=1)
    mean = loc_means.mean(axis=0)
    n_loc = samples.shape[0]
    if n_loc > 1:
        stderr = loc_means.std(axis=0, ddof=1) / math.sqrt(n_loc)
    else:
        stderr = np.full_like(mean, np.nan)
    return SchemeCurve(scheme, scenario.ptot_dbm, tuple(q_values), mean, stderr)


# ---------------------------------------------------------------------------
# BD-MRC (cache-aided and cacheless are the same path with different G)
# ---------------------------------------------------------------------------

def _bd_location_worker(args) -> np.ndarray:
    scenario, num_groups, q_list, loc = args
    m = scenario.antennas_per_user
    q_top = max(q_list)
    p_watts = scenario.p_watts
    betas = _location_betas(scenario, num_groups, q_top, loc)
    out = np.empty((scenario.n_fadings, len(q_list), len(p_watts)))
    for fad in range(scenario.n_fadings):
        units = _unit_channels(scenario, num_groups, q_top, loc, fad)
        for qi, q in enumerate(q_list):
            xi = scenario.overhead_factor(num_groups, q)
            fns = []
            for gi in range(num_groups):
                group = _group_channel(units[gi], betas[gi], q, m)
                fns.extend(
                    UserRateFunction(lam, scenario.noise_power, xi)
                    for lam in bd_mrc_eigenvalues(group)
                )
            for pi, p in enumerate(p_watts):
                out[fad, qi, pi] = solve_mmf(fns, p).sum_rate
    return out


def _asym_location_worker(args) -> np.ndarray:
    scenario, num_groups, q_list, loc = args
    m = scenario.antennas_per_user
    betas = _location_betas(scenario, num_groups, max(q_list), loc)
    out = np.empty((len(q_list), len(scenario.p_watts)))
    for qi, q in enumerate(q_list):
        xi = scenario.overhead_factor(num_groups, q)
        counts = [[m] * q] * num_groups
        beta_rows = [list(betas[gi, :q]) for gi in range(num_groups)]
        for pi, p in enumerate(scenario.p_watts):
            rate, _ = mmf_massive_mimo(
                beta_rows, counts, scenario.num_tx_antennas, xi,
                scenario.noise_power, p,
            )
            out[qi, pi] = rate
    return out


def _scheme_args(scenario: Scenario, num_groups: int, q_list):
    return [
        (scenario, num_groups, tuple(q_list), loc)
        for loc in range(scenario.n_locations)
    ]


def run_vcc_bd_mrc(
    scenario: Scenario, workers: int = 1, include_asymptotic: bool = False
) -> RateReport:
    """Simulated BD-MRC effective sum-rate under max-min-fair allocation.

    With ``users_per_group=None`` all feasible per-group user counts are
    evaluated on common random numbers.  ``include_asymptotic`` adds the
    large-antenna closed-form curve evaluated on the same location draws.
    """
    g = scenario.coded_gain
    q_list = scenario.group_user_counts(scenario.users_per_group)
    draws = _parallel_map(_bd_location_worker, _scheme_args(scenario, g, q_list), workers)
    curves = {
        "vcc_bd_mrc": _curve_from_draws("vcc_bd_mrc", scenario, q_list, np.stack(draws))
    }
    if include_asymptotic:
        asym = np.stack(
            _parallel_map(_asym_location_worker, _scheme_args(scenario, g, q_list), workers)
        )
        # No fading axis: insert one so the reducer sees per-location values.
        curves["vcc_bd_mrc_asym"] = _curve_from_draws(
            "vcc_bd_mrc_asym", scenario, q_list, asym[:, None]
        )
    return RateReport(scenario, curves)


def run_cacheless_bd_mrc(scenario: Scenario, workers: int = 1) -> RateReport:
    """Cacheless MU-MIMO baseline: the same pipeline with a single group."""
    base = scenario.cacheless_counterpart()
    q_list = base.group_user_counts(base.users_per_group)
    draws = _parallel_map(_bd_location_worker, _scheme_args(base, 1, q_list), workers)
    curve = _curve_from_draws("cacheless_bd_mrc", base, q_list, np.stack(draws))
    return RateReport(base, {"cacheless_bd_mrc": curve})


# ---------------------------------------------------------------------------
# ZF with fading-averaged analytic bounds
# ---------------------------------------------------------------------------

def _zf_location_worker(args):
    scenario, num_groups, q_list, loc = args
    m = scenario.antennas_per_user
    q_top = max(q_list)
    p_watts = scenario.p_watts
    betas = _location_betas(scenario, num_groups, q_top, loc)
    sim = np.empty((scenario.n_fadings, len(q_list), len(p_watts)))
    lo = np.empty((len(q_list), len(p_watts)))
    hi = np.empty((len(q_list), len(p_watts)))
    for qi, q in enumerate(q_list):
        xi = scenario.overhead_factor(num_groups, q)
        counts = [[m] * q] * num_groups
        beta_rows = [list(betas[gi, :q]) for gi in range(num_groups)]
        for pi, p in enumerate(p_watts):
            lo[qi, pi], hi[qi, pi] = zf_mmf_bounds(
                beta_rows, counts, scenario.num_tx_antennas, xi,
                scenario.noise_power, p,
            )
    for fad in range(scenario.n_fadings):
        units = _unit_channels(scenario, num_groups, q_top, loc, fad)
        for qi, q in enumerate(q_list):
            xi = scenario.overhead_factor(num_groups, q)
            fns = []
            for gi in range(num_groups):
                group = _group_channel(units[gi], betas[gi], q, m)
                _, gains = zf_matrix(group.stacked())
                for k in range(q):
                    fns.append(
                        UserRateFunction(
                            gains[k * m : (k + 1) * m], scenario.noise_power, xi
                        )
                    )
            for pi, p in enumerate(p_watts):
                sim[fad, qi, pi] = solve_mmf(fns, p).sum_rate
    return sim, lo, hi


def run_vcc_zf(scenario: Scenario, workers: int = 1) -> RateReport:
    """Simulated ZF max-min rate plus its fading-averaged analytic bounds."""
    g = scenario.coded_gain
    q_list = scenario.group_user_counts(scenario.users_per_group)
    results = _parallel_map(_zf_location_worker, _scheme_args(scenario, g, q_list), workers)
    sim = np.stack([r[0] for r in results])
    lo = np.stack([r[1] for r in results])[:, None]
    hi = np.stack([r[2] for r in results])[:, None]
    return RateReport(
        scenario,
        {
            "vcc_zf": _curve_from_draws("vcc_zf", scenario, q_list, sim),
            "vcc_zf_lower": _curve_from_draws("vcc_zf_lower", scenario, q_list, lo),
            "vcc_zf_upper": _curve_from_draws("vcc_zf_upper", scenario, q_list, hi),
        },
    )


# ---------------------------------------------------------------------------
# Bit-level multi-server baseline (single-antenna, symmetric fading)
# ---------------------------------------------------------------------------

def _msv_location_worker(args):
    scenario, quc_list, loc = args
    l = scenario.num_tx_antennas
    g = scenario.coded_gain
    p_watts = scenario.p_watts
    out = np.empty((scenario.n_fadings, len(quc_list), len(p_watts)))
    for fad in range(scenario.n_fadings):
        uc_pool = complex_gaussian(substream(scenario.seed, 4, loc, fad, 0), (l - 1, l))
        mc = complex_gaussian(substream(scenario.seed, 4, loc, fad, 1), (g, l))
        for qi, quc in enumerate(quc_list):
            mc_gains, uc_gains = msv_gains_fast(mc, uc_pool, quc)
            for pi, p in enumerate(p_watts):
                out[fad, qi, pi] = msv_rate_from_gains(
                    mc_gains, uc_gains, p, scenario.noise_power, g,
                    scenario.cached_load, scenario.coherence_symbols,
                    scenario.pilot_symbols,
                )
    return out


def run_msv(scenario: Scenario, workers: int = 1) -> RateReport:
    """Original and stream-count-swept multi-server baseline rates.

    The original scheme always runs all ``L - 1`` unicast streams; the
    modified variant sweeps the unicast stream count for a better
    multiplexing/beamforming balance.
    """
    if scenario.antennas_per_user != 1 or scenario.geometry is not None:
        raise UnsupportedConfigurationError(
            "multi-server baseline needs single-antenna users with unit pathloss"
        )
    l = scenario.num_tx_antennas
    quc_list = tuple(range(1, l))
    args = [(scenario, quc_list, loc) for loc in range(scenario.n_locations)]
    draws = np.stack(_parallel_map(_msv_location_worker, args, workers))
    full = _curve_from_draws("msv_modified", scenario, quc_list, draws)
    original = SchemeCurve(
        "msv", scenario.ptot_dbm, (l - 1,), full.mean[-1:], full.stderr[-1:]
    )
    return RateReport(scenario, {"msv": original, "msv_modified": full})


# ---------------------------------------------------------------------------
# ZF with imperfect CSIT / CSIR (single-antenna, symmetric, equal power)
# ---------------------------------------------------------------------------

def _csi_location_worker(args):
    scenario, num_groups, q_list, loc = args
    l = scenario.num_tx_antennas
    n0 = scenario.noise_power
    q_top = max(q_list)
    p_watts = scenario.p_watts
    csit_var = scenario.csit_error_var
    csir_vars = scenario.csir_error_vars
    variants = ["perfect", "csit"] + [f"csir{i}" for i in range(len(csir_vars))]
    out = {
        v: np.empty((scenario.n_fadings, len(q_list), len(p_watts))) for v in variants
    }
    for fad in range(scenario.n_fadings):
        groups = []
        for gi in range(num_groups):
            h = complex_gaussian(substream(scenario.seed, 1, loc, fad, gi), (l, q_top))
            h_hat, _ = corrupt_csit(h, csit_var, substream(scenario.seed, 2, loc, fad, gi))
            w = complex_gaussian(substream(scenario.seed, 3, loc, fad, gi), q_top)
            groups.append((h, h_hat, w))
        for qi, q in enumerate(q_list):
            served = num_groups * q
            xi = scenario.overhead_factor(num_groups, q)
            per_group = {v: [] for v in variants}
            for h, h_hat, w in groups:
                _, gains = zf_matrix(h[:, :q])
                per_group["perfect"].append((gains, None))
                v_hat, _ = zf_matrix(h_hat[:, :q])
                coupling = h[:, :q].T @ v_hat
                cross = np.abs(coupling) ** 2
                signal = np.diag(cross).copy()
                interf = cross.sum(axis=1) - signal
                per_group["csit"].append((signal, interf))
                own = np.diag(coupling)
                for i, var in enumerate(csir_vars):
                    est = np.abs(own - math.sqrt(var) * w[:q]) ** 2
                    per_group[f"csir{i}"].append((est, var))
            for pi, p in enumerate(p_watts):
                pe = p / served
                acc = {v: 0.0 for v in variants}
                for gains, _ in per_group["perfect"]:
                    acc["perfect"] += float(np.sum(np.log1p(pe * gains / n0)))
                for signal, interf in per_group["csit"]:
                    acc["csit"] += float(
                        np.sum(np.log1p(pe * signal / (n0 + pe * interf)))
                    )
                for i, var in enumerate(csir_vars):
                    residual = pe * var * (served - 1)
                    for est, _ in per_group[f"csir{i}"]:
                        sinr = pe * (est + var) / (n0 + residual)
                        acc[f"csir{i}"] += float(np.sum(np.log1p(sinr)))
                for v in variants:
                    out[v][fad, qi, pi] = xi * acc[v]
    return out


def run_imperfect_csi(scenario: Scenario, workers: int = 1) -> RateReport:
    """Equal-power ZF rates under perfect and estimated CSI.

    Produces the cache-aided curves and their cacheless counterparts, for
    perfect CSI, transmitter-side estimation error, and (if
    ``csir_error_vars`` is set) additional receiver-side coupling error.
    Inter-group residuals enter through their average power only.
    """
    if scenario.antennas_per_user != 1 or scenario.geometry is not None:
        raise UnsupportedConfigurationError(
            "imperfect-CSI study needs single-antenna users with unit pathloss"
        )
    curves: dict[str, SchemeCurve] = {}
    for prefix, num_groups, fixed in (
        ("vcc_zf", scenario.coded_gain, scenario.users_per_group),
        ("cacheless_zf", 1, scenario.baseline_users),
    ):
        side = scenario
        if prefix == "cacheless_zf":
            # Residual-coupling errors model imperfect cache-aided
            # cancellation, which the cacheless baseline does not perform.
            side = dataclasses.replace(scenario, csir_error_vars=())
        q_list = scenario.group_user_counts(fixed)
        results = _parallel_map(
            _csi_location_worker, _scheme_args(side, num_groups, q_list), workers
        )
        for variant in results[0]:
            samples = np.stack([r[variant] for r in results])
            name = f"{prefix}_{variant}"
            if variant.startswith("csir"):
                var = scenario.csir_error_vars[int(variant[4:])]
                name = f"{prefix}_csit_csir{var:g}"
            curves[name] = _curve_from_draws(name, scenario, q_list, samples)
    return RateReport(scenario, curves)


# ---------------------------------------------------------------------------
# Q optimization and effective gains
# ---------------------------------------------------------------------------

_SCHEME_RUNNERS = {
    "vcc_bd_mrc": (run_vcc_bd_mrc, "vcc_bd_mrc"),
    "cacheless_bd_mrc": (run_cacheless_bd_mrc, "cacheless_bd_mrc"),
    "vcc_zf": (run_vcc_zf, "vcc_zf"),
}


def optimize_q(scenario: Scenario, scheme: str, workers: int = 1):
    """Best served-user count and mean rate per power point for a scheme."""
    try:
        runner, curve_name = _SCHEME_RUNNERS[scheme]
    except KeyError:
        raise InvalidConfigurationError(f"unknown scheme {scheme!r}")
    if scheme == "cacheless_bd_mrc":
        sweep = dataclasses.replace(scenario, baseline_users=None)
    else:
        sweep = dataclasses.replace(scenario, users_per_group=None)
    report = runner(sweep, workers=workers)
    qs, means, _ = report[curve_name].best()
    return list(zip(scenario.ptot_dbm, qs.tolist(), means.tolist()))


def effective_gain(
    numerator: SchemeCurve, denominator: SchemeCurve, mode: str = "fixed"
) -> np.ndarray:
    """Ratio of mean rates per power point.

    ``optimized`` mode takes the best served-user count on each side first,
    i.e. the ratio of maxima rather than the maximum of ratios.
    """
    if numerator.ptot_dbm != denominator.ptot_dbm:
        raise InvalidConfigurationError("power grids differ between the two reports")
    if mode == "fixed":
        num = numerator.single()[1]
        den = denominator.single()[1]
    elif mode == "optimized":
        num = numerator.best()[1]
        den = denominator.best()[1]
    else:
        raise ValueError("mode must be 'fixed' or 'optimized'")
    return num / den


# ---------------------------------------------------------------------------
# CSV assembly
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "scheme",
    "ptot_dbm",
    "snr_db",
    "q",
    "mean_rate_nats",
    "mean_rate_bits",
    "stderr",
    "gain",
    "gain_optimized",
    "n_locations",
    "n_fadings",
    "seed",
)


def _row(scenario, scheme, p_idx, q, mean, stderr, gain=None, gain_opt=None):
    return {
        "scheme": scheme,
        "ptot_dbm": scenario.ptot_dbm[p_idx],
        "snr_db": scenario.snr_db[p_idx],
        "q": q,
        "mean_rate_nats": mean,
        "mean_rate_bits": mean / math.log(2),
        "stderr": stderr,
        "gain": gain,
        "gain_optimized": gain_opt,
        "n_locations": scenario.n_locations,
        "n_fadings": scenario.n_fadings,
        "seed": scenario.seed,
    }


def rows_for_curve(curve: SchemeCurve, scenario: Scenario, gain=None, scheme=None):
    """One CSV row per (q, power point); ``gain`` attaches to single-q curves."""
    rows = []
    name = scheme or curve.scheme
    for qi, q in enumerate(curve.q_values):
        for pi in range(len(curve.ptot_dbm)):
            g = None
            if gain is not None and len(curve.q_values) == 1:
                g = float(gain[pi])
            rows.append(
                _row(
                    scenario, name, pi, q,
                    float(curve.mean[qi, pi]), float(curve.stderr[qi, pi]), gain=g,
                )
            )
    return rows


def rows_for_best(curve: SchemeCurve, scenario: Scenario, gain_opt=None, scheme=None):
    """Per power point, the best-q row of an optimized scheme."""
    qs, means, errs = curve.best()
    name = scheme or f"{curve.scheme}_opt"
    rows = []
    for pi in range(len(curve.ptot_dbm)):
        rows.append(
            _row(
                scenario, name, pi, int(qs[pi]),
                float(means[pi]), float(errs[pi]),
                gain_opt=None if gain_opt is None else float(gain_opt[pi]),
            )
        )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def format_csv(rows, header: dict | None = None) -> str:
    """Render rows (dicts keyed by :data:`CSV_COLUMNS`) as CSV text.

    ``header`` entries are echoed as ``# key=value`` comment lines so a run
    is reproducible from its own output.
    """
    lines = []
    for key, value in (header or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(",".join(CSV_COLUMNS))
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"
