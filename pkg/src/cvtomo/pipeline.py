"""End-to-end orchestration: simulate, condition, reconstruct, oracle-compare.

A run is fully determined by (config, seed): sampling is sharded over
deterministic per-shard generators keyed by a global shard index, shard
results are merged in shard order, and every emitted byte (CSV tables, PGM
previews, the key=value metrics report) is reproducible bit-for-bit across
worker-thread counts. Wall-clock timing is therefore reported on stderr, never
in the artifacts.
"""

from __future__ import annotations

import hashlib
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import conditioning as cond
from . import fock, gaussian, sampleio, tomography
from .params import ExperimentParams, db_to_variance, default_tomography_angles

DEFAULT_POLYNOMIALS = ("n", "n(n-2)(n-3)", "n(n-1)", "n(n-1)(n-3)")


class PipelineError(RuntimeError):
    """A stage failure with enough context to locate it."""

    def __init__(self, stage: str, message: str, angle: float | None = None):
        self.stage = stage
        self.angle = angle
        where = f"stage '{stage}'" + (f", angle {angle:.6g} rad" if angle is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Declarative description of a full pipeline run."""

    params: ExperimentParams = field(default_factory=ExperimentParams)
    polynomials: tuple[str, ...] = DEFAULT_POLYNOMIALS
    histogram_range: float = 8.0
    histogram_bins: int = 401
    grid_extent: float = tomography.DEFAULT_EXTENT
    grid_points: int = tomography.DEFAULT_GRID_POINTS
    radon_cutoff: float = tomography.DEFAULT_CUTOFF
    fock_cutoff: int = fock.DEFAULT_N_MAX
    shard_size: int = 1_000_000
    oracle_compare: bool = True
    mode: str = "run"

    def number_polynomials(self) -> list[cond.NumberPolynomial]:
        return [cond.NumberPolynomial.parse(text) for text in self.polynomials]


_PARAM_KEYS = {
    "squeezed_variance_db": float,
    "antisqueezed_variance_db": float,
    "tap_reflectivity": float,
    "homodyne_efficiency": float,
    "dark_noise_db": float,
    "conditioning_phase": float,
    "samples_per_angle": int,
    "rng_seed": int,
}
_CONFIG_KEYS = {
    "histogram_range": float,
    "histogram_bins": int,
    "grid_extent": float,
    "grid_points": int,
    "radon_cutoff": float,
    "fock_cutoff": int,
    "shard_size": int,
    "mode": str,
}


def parse_config(text: str) -> RunConfig:
    """Parse the flat `key = value` format; arrays are comma-separated."""
    params_kwargs: dict = {}
    config_kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _PARAM_KEYS:
            params_kwargs[key] = _PARAM_KEYS[key](value)
        elif key in _CONFIG_KEYS:
            config_kwargs[key] = _CONFIG_KEYS[key](value)
        elif key == "tomography_angles_deg":
            angles = tuple(math.radians(float(v)) for v in value.split(","))
            params_kwargs["tomography_angles"] = angles
        elif key == "polynomials":
            config_kwargs["polynomials"] = tuple(v.strip() for v in value.split(","))
        elif key == "oracle_compare":
            if value.lower() not in ("true", "false"):
                raise ValueError(f"config line {lineno}: oracle_compare must be true/false")
            config_kwargs["oracle_compare"] = value.lower() == "true"
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return RunConfig(params=ExperimentParams(**params_kwargs), **config_kwargs)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def config_overrides(config: RunConfig, seed: int | None = None) -> RunConfig:
    if seed is None:
        return config
    return replace(config, params=replace(config.params, rng_seed=seed))


def polynomial_slug(label: str) -> str:
    """Filesystem-safe version of a polynomial label, e.g. n(n-1)(n-3) -> n_n-1_n-3."""
    return label.replace(")(", "_").replace("(", "_").replace(")", "").replace("*", "")


# ---------------------------------------------------------------------------
# sharded simulation + conditioning


def _shard_plan(params: ExperimentParams, shard_size: int) -> list[tuple[int, int, int, int]]:
    """(angle_index, local_shard, global_shard, n_samples) for every work unit."""
    n_angles = len(params.tomography_angles)
    per_angle = params.samples_per_angle
    n_shards = max(1, math.ceil(per_angle / shard_size))
    plan = []
    for ai in range(n_angles):
        remaining = per_angle
        for si in range(n_shards):
            take = min(shard_size, remaining)
            plan.append((ai, si, ai * n_shards + si, take))
            remaining -= take
    return plan


def _condition_shard(
    covariances: list[np.ndarray],
    config: RunConfig,
    weightings: list[cond.WeightPolynomial],
    task: tuple[int, int, int, int],
):
    """Generate one shard and accumulate it into fresh per-polynomial histograms."""
    ai, _si, global_shard, n = task
    params = config.params
    theta = params.tomography_angles[ai]
    batch = gaussian.sample_batch(
        covariances[ai], n, params.rng_seed, global_shard, theta=theta
    )
    digest = hashlib.sha256(np.ascontiguousarray(batch.triples, dtype="<f8").tobytes()).digest()
    hists = []
    x_b, x_a1, x_a2 = batch.triples[:, 0], batch.triples[:, 1], batch.triples[:, 2]
    for q in weightings:
        h = cond.WeightedHistogram(
            theta=theta, x_max=config.histogram_range, n_bins=config.histogram_bins
        )
        h.accumulate_batch(x_b, q.weight_of(x_a1, x_a2))
        hists.append(h)
    return digest, hists


def condition_in_memory(
    config: RunConfig, threads: int = 1
) -> tuple[dict[str, list[cond.WeightedHistogram]], str]:
    """Simulate and condition the full dataset without persisting samples.

    Returns per-polynomial histograms (one per angle, every polynomial fed the
    identical samples) plus the dataset content hash. The result is identical
    for any thread count: shards are generated from (seed, global shard) and
    merged in global shard order.
    """
    params = config.params
    polys = config.number_polynomials()
    weightings = [cond.build_q_polynomial(p) for p in polys]
    covariances = [gaussian.build_covariance(params, t) for t in params.tomography_angles]
    plan = _shard_plan(params, config.shard_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(lambda t: _condition_shard(covariances, config, weightings, t), plan)
            )
    else:
        results = [_condition_shard(covariances, config, weightings, t) for t in plan]

    n_angles = len(params.tomography_angles)
    merged: dict[str, list[cond.WeightedHistogram]] = {
        p.label: [
            cond.WeightedHistogram(
                theta=params.tomography_angles[ai],
                x_max=config.histogram_range,
                n_bins=config.histogram_bins,
            )
            for ai in range(n_angles)
        ]
        for p in polys
    }
    hasher = hashlib.sha256()
    for task, (digest, hists) in zip(plan, results):
        ai = task[0]
        hasher.update(digest)
        for poly, hist in zip(polys, hists):
            merged[poly.label][ai] = merged[poly.label][ai].merge(hist)
    return merged, hasher.hexdigest()


def marginal_set_from_histograms(
    hists: list[cond.WeightedHistogram],
) -> tomography.MarginalSet:
    angles = np.array([h.theta for h in hists])
    centers = hists[0].bin_centers
    densities = np.stack([h.normalize() for h in hists])
    return tomography.MarginalSet(angles=angles, centers=centers, densities=densities)


# ---------------------------------------------------------------------------
# file-based stages


def simulate(config: RunConfig, out_dir, threads: int = 1) -> list[Path]:
    """Write the raw dataset as one CVQS file per (angle, shard)."""
    out = Path(out_dir) / "samples"
    out.mkdir(parents=True, exist_ok=True)
    params = config.params
    covariances = [gaussian.build_covariance(params, t) for t in params.tomography_angles]
    plan = _shard_plan(params, config.shard_size)

    def work(task):
        ai, si, global_shard, n = task
        theta = params.tomography_angles[ai]
        batch = gaussian.sample_batch(covariances[ai], n, params.rng_seed, global_shard, theta=theta)
        path = out / f"angle{ai:02d}_shard{si:04d}.cvqs"
        sampleio.write_samples(path, theta, batch.triples, params.rng_seed, global_shard)
        return path

    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                paths = list(pool.map(work, plan))
        else:
            paths = [work(t) for t in plan]
    except ValueError as exc:
        raise PipelineError("simulate", str(exc)) from exc
    return sorted(paths)


def ingest(path):
    """Stream (n, 3) sample blocks from one CVQS file."""
    return sampleio.stream_samples(path)


def condition_from_files(config: RunConfig, sample_dir, out_dir) -> dict:
    """Read CVQS files, build weighted marginals, write per-angle CSV tables."""
    files = sorted(Path(sample_dir).glob("*.cvqs"))
    if not files:
        raise PipelineError("condition", f"no CVQS files under {sample_dir}")
    polys = config.number_polynomials()
    weightings = [cond.build_q_polynomial(p) for p in polys]

    by_angle: dict[float, list[Path]] = {}
    for path in files:
        header = sampleio.read_header(path)
        by_angle.setdefault(header["theta"], []).append(path)

    merged: dict[str, list[cond.WeightedHistogram]] = {p.label: [] for p in polys}
    for theta in sorted(by_angle):
        paths = sorted(by_angle[theta], key=lambda p: sampleio.read_header(p)["shard"])
        hists = [
            cond.WeightedHistogram(
                theta=theta, x_max=config.histogram_range, n_bins=config.histogram_bins
            )
            for _ in polys
        ]
        for path in paths:
            try:
                for block in sampleio.stream_samples(path):
                    for h, q in zip(hists, weightings):
                        h.accumulate_batch(block[:, 0], q.weight_of(block[:, 1], block[:, 2]))
            except sampleio.CvqsFormatError as exc:
                raise PipelineError("condition", f"{path}: {exc}", angle=theta) from exc
        for poly, h in zip(polys, hists):
            merged[poly.label].append(h)

    write_marginal_tables(merged, Path(out_dir))
    return merged


def write_marginal_tables(merged: dict, out_dir: Path) -> None:
    for label, hists in merged.items():
        slug = polynomial_slug(label)
        poly_dir = out_dir / "marginals" / slug
        poly_dir.mkdir(parents=True, exist_ok=True)
        for h in hists:
            millideg = round(math.degrees(h.theta) * 1000)
            path = poly_dir / f"angle_{millideg:06d}.csv"
            sampleio.write_marginal_csv(
                path, h.bin_centers, h.normalize(), h.bin_counts, h.bin_weights
            )


def reconstruct_marginals(
    config: RunConfig, marginals: tomography.MarginalSet
) -> tomography.WignerGrid:
    return tomography.inverse_radon(
        marginals,
        extent=config.grid_extent,
        n_grid=config.grid_points,
        cutoff=config.radon_cutoff,
    )


# ---------------------------------------------------------------------------
# oracle reference


def oracle_reference(config: RunConfig) -> dict:
    """Exact per-polynomial references at the configured detection settings.

    The conditioning-channel loss is applied as a loss channel on the tapped
    mode of the joint state (exactly equivalent to equal per-channel loss
    after the balanced splitter), and conditioning-channel dark noise is
    folded into an adjusted weighting polynomial. Tomography-channel loss and
    dark noise act on the heralded states / marginals directly.
    """
    params = config.params
    eta = params.homodyne_efficiency
    dark = params.dark_noise_variance
    rho_in = fock.squeezed_vacuum(
        params.squeezed_variance, params.antisqueezed_variance, config.fock_cutoff
    )
    out = {}
    for p in config.number_polynomials():
        q = cond.build_q_polynomial(p)
        p_adjusted = cond.dark_adjusted_number_polynomial(q, dark)
        rho_w, herald_analogue = fock.weighted_state(
            rho_in, params.tap_reflectivity, p_adjusted, eta_a=eta, eta_b=eta
        )
        out[p.label] = {
            "polynomial": p,
            "adjusted": p_adjusted,
            "weighted_state": rho_w,
            "herald_analogue": herald_analogue,
        }
    return out


def oracle_marginal(
    config: RunConfig, entry: dict, theta: float, centers: np.ndarray
) -> np.ndarray:
    params = config.params
    rho_in = fock.squeezed_vacuum(
        params.squeezed_variance, params.antisqueezed_variance, config.fock_cutoff
    )
    return fock.weighted_conditional_marginal(
        rho_in,
        params.tap_reflectivity,
        entry["adjusted"],
        theta,
        centers,
        eta_a=params.homodyne_efficiency,
        eta_b=params.homodyne_efficiency,
        dark_b=params.dark_noise_variance,
    )


# ---------------------------------------------------------------------------
# full run


def run(config: RunConfig, out_dir, threads: int = 1) -> dict:
    """Execute the full protocol and write all artifacts; returns the metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    params = config.params
    entries: dict = {
        "config.rng_seed": params.rng_seed,
        "config.samples_per_angle": params.samples_per_angle,
        "config.angles": len(params.tomography_angles),
        "config.radon_cutoff": config.radon_cutoff,
    }

    try:
        merged, dataset_hash = condition_in_memory(config, threads=threads)
    except ValueError as exc:
        raise PipelineError("simulate/condition", str(exc)) from exc
    entries["dataset.sha256"] = dataset_hash

    write_marginal_tables(merged, out)

    oracle = oracle_reference(config) if config.oracle_compare else {}
    rho_sources = {}

    wigner_dir = out / "wigner"
    wigner_dir.mkdir(parents=True, exist_ok=True)
    for label, hists in merged.items():
        slug = polynomial_slug(label)
        try:
            marginals = marginal_set_from_histograms(hists)
        except (ValueError, cond.ConditioningTooWeakError) as exc:
            raise PipelineError("condition", f"polynomial {label}: {exc}") from exc
        try:
            grid = reconstruct_marginals(config, marginals)
        except ValueError as exc:
            raise PipelineError("reconstruct", f"polynomial {label}: {exc}") from exc
        sampleio.write_wigner_csv(wigner_dir / f"{slug}.csv", grid)
        sampleio.write_pgm(wigner_dir / f"{slug}.pgm", grid)

        metrics = tomography.wigner_metrics(grid)
        for key, value in metrics.as_dict().items():
            entries[f"{label}.{key}"] = value
        total = merged[label][0]
        entries[f"{label}.sum_w_over_n"] = sum(h.sum_w for h in hists) / sum(
            h.count for h in hists
        )
        entries[f"{label}.sum_w_se"] = total.mean_weight_standard_error()

        if oracle:
            entry = oracle[label]
            entries[f"{label}.herald_analogue_oracle"] = entry["herald_analogue"]
            wig_ref = fock.wigner_exact(entry["weighted_state"], grid.xs, grid.ps)
            ref_metrics = tomography.wigner_metrics(
                tomography.WignerGrid(xs=grid.xs, ps=grid.ps, values=wig_ref)
            )
            entries[f"{label}.oracle_wigner_min"] = ref_metrics.wigner_min
            entries[f"{label}.oracle_central_fringe_max"] = ref_metrics.central_fringe_max
            entries[f"{label}.oracle_fringe_min"] = ref_metrics.fringe_min
            centers = hists[0].bin_centers
            width = hists[0].bin_width
            for ai, h in enumerate(hists):
                exact = oracle_marginal(config, entry, h.theta, centers)
                l1 = float(np.abs(h.normalize() - exact).sum() * width)
                entries[f"{label}.oracle_l1_angle_{ai:02d}"] = l1
            rho_sources[label] = entry

    sampleio.write_report(out / "metrics.txt", entries)
    elapsed = time.monotonic() - started
    print(f"run completed in {elapsed:.1f} s ({threads} thread(s))", file=sys.stderr)
    return entries


# ---------------------------------------------------------------------------
# verification battery


def _check(results: dict, name: str, passed: bool, detail: str = "") -> None:
    results[name] = "pass" if passed else f"FAIL {detail}".strip()


def verify(config: RunConfig, out_dir=None) -> tuple[bool, dict]:
    """Fast internal consistency battery over every stage; writes a report."""
    rng = np.random.default_rng(config.params.rng_seed)
    results: dict = {}
    params = config.params

    # covariance symmetry / PSD over random parameter draws
    ok = True
    for _ in range(200):
        v_s = rng.uniform(0.15, 1.0)
        p = ExperimentParams(
            squeezed_variance_db=10 * math.log10(v_s),
            antisqueezed_variance_db=10 * math.log10(rng.uniform(1.0 / v_s, 4.0 / v_s)),
            tap_reflectivity=rng.uniform(0.0, 1.0),
            homodyne_efficiency=rng.uniform(0.5, 1.0),
            dark_noise_db=rng.uniform(-30.0, 0.0),
            conditioning_phase=rng.uniform(0, math.pi),
            samples_per_angle=1,
        )
        cov = gaussian.build_covariance(p, rng.uniform(0, math.pi))
        sym = np.allclose(cov, cov.T)
        psd = np.linalg.eigvalsh(cov).min() >= -gaussian.PSD_TOLERANCE
        if not (sym and psd):
            ok = False
            break
    _check(results, "covariance_symmetric_psd", ok)

    # passive-optics energy bookkeeping at eta = 1, no dark noise
    theta = 0.7
    clean = ExperimentParams(
        squeezed_variance_db=params.squeezed_variance_db,
        antisqueezed_variance_db=params.antisqueezed_variance_db,
        tap_reflectivity=params.tap_reflectivity,
        homodyne_efficiency=1.0,
        dark_noise_db=-300.0,
        conditioning_phase=theta,
        samples_per_angle=1,
    )
    v_in = clean.input_variance(theta)
    r = clean.tap_reflectivity
    var_b = gaussian.build_covariance(clean, theta)[0, 0]
    var_a = gaussian.presplit_covariance(clean, theta)[1, 1]
    ok = abs((1 - r) * v_in + r - var_b) < 1e-9 and abs(r * v_in + (1 - r) - var_a) < 1e-9
    _check(results, "energy_bookkeeping", ok)

    # sampling determinism
    cov = gaussian.build_covariance(params, 0.3)
    b1 = gaussian.sample_batch(cov, 1000, params.rng_seed, 7)
    b2 = gaussian.sample_batch(cov, 1000, params.rng_seed, 7)
    _check(results, "sampling_deterministic", b1.triples.tobytes() == b2.triples.tobytes())

    # Q-polynomial basis identities, exact
    ok = True
    for label in cond.PAPER_POLYNOMIALS:
        p = cond.NumberPolynomial.parse(label)
        q = cond.build_q_polynomial(p)
        back = q.number_polynomial()
        for n in range(p.degree + 2):
            if back.evaluate_exact(n) != p.evaluate_exact(n):
                ok = False
    _check(results, "q_basis_identity_exact", ok)

    # Monte Carlo weighted mean against the Isserlis expansion
    q = cond.build_q_polynomial(cond.NumberPolynomial.parse("n"))
    samples = gaussian.sample_batch(cov, 200_000, params.rng_seed, 11)
    w = q.weight_of(samples.triples[:, 1], samples.triples[:, 2])
    exact = gaussian.analytic_weighted_moment(cov, q, 0)
    se = float(np.std(w) / math.sqrt(w.size))
    _check(
        results,
        "weighted_mean_matches_isserlis",
        abs(float(np.mean(w)) - exact) < 6 * se,
        f"mc={np.mean(w):.5f} exact={exact:.5f} se={se:.2g}",
    )

    # vacuum-port cancellation and phase invariance of the analytic moments
    ok = True
    for _ in range(20):
        v_s = rng.uniform(0.2, 1.0)
        p = ExperimentParams(
            squeezed_variance_db=10 * math.log10(v_s),
            antisqueezed_variance_db=10 * math.log10(rng.uniform(1.0 / v_s, 3.0 / v_s)),
            tap_reflectivity=rng.uniform(0.05, 0.95),
            homodyne_efficiency=1.0,
            dark_noise_db=-300.0,
            conditioning_phase=rng.uniform(0, math.pi),
            samples_per_angle=1,
        )
        th = rng.uniform(0, math.pi)
        measured = gaussian.build_covariance(p, th)
        presplit = gaussian.presplit_covariance(p, th)
        q_n = cond.build_q_polynomial(cond.NumberPolynomial.parse("n"))
        q_fict = cond.WeightPolynomial(radial_coefficients=(-0.5, 0.5))
        for g in (0, 2):
            lhs = gaussian.analytic_weighted_moment(measured, q_n, g)
            rhs = gaussian.analytic_weighted_moment(presplit, q_fict, g)
            if abs(lhs - rhs) > 1e-12 * max(1.0, abs(lhs)):
                ok = False
    _check(results, "vacuum_port_cancellation", ok)

    ok = True
    for label in cond.PAPER_POLYNOMIALS:
        q = cond.build_q_polynomial(cond.NumberPolynomial.parse(label))
        vals = []
        for phi in (0.0, math.pi / 7):
            p = ExperimentParams(
                conditioning_phase=phi, homodyne_efficiency=1.0, dark_noise_db=-300.0,
                samples_per_angle=1,
            )
            vals.append(gaussian.analytic_weighted_moment(gaussian.build_covariance(p, 0.4), q, 0))
        if abs(vals[0] - vals[1]) > 1e-12 * max(1.0, abs(vals[0])):
            ok = False
    _check(results, "phase_invariance", ok)

    # Fock oracle basics
    r_solve, eta_solve = fock.squeezed_vacuum_parameters(
        params.squeezed_variance, params.antisqueezed_variance
    )
    rho = fock.squeezed_vacuum(params.squeezed_variance, params.antisqueezed_variance, config.fock_cutoff)
    diag = fock.diagnose(rho)
    _check(results, "oracle_state_physical", diag.physical, f"{diag}")
    joint = fock.tap_two_mode(rho, params.tap_reflectivity)
    probs, _states = fock.herald_family(joint)
    _check(results, "herald_probabilities_sum", abs(probs.sum() - 1.0) < 1e-8)
    xs = np.linspace(-8, 8, 1601)
    clean = ExperimentParams(
        squeezed_variance_db=params.squeezed_variance_db,
        antisqueezed_variance_db=params.antisqueezed_variance_db,
        tap_reflectivity=params.tap_reflectivity,
        homodyne_efficiency=1.0,
        dark_noise_db=-300.0,
        samples_per_angle=1,
    )
    ok = True
    for th in (0.0, 0.9):
        pdf = fock.marginal_pdf(_partial_trace_b(joint), th, xs)
        var = float(np.trapezoid(xs**2 * pdf, xs))
        expected = gaussian.build_covariance(clean, th)[0, 0]
        if abs(var - expected) > 1e-6:
            ok = False
    _check(results, "oracle_engine_second_moments", ok)

    # histogram merge equals concatenated accumulation
    xs1 = rng.normal(size=2000)
    ws1 = rng.normal(size=2000)
    xs2 = rng.normal(size=3000)
    ws2 = rng.normal(size=3000)
    h1 = cond.WeightedHistogram().accumulate_batch(xs1, ws1)
    h2 = cond.WeightedHistogram().accumulate_batch(xs2, ws2)
    h12 = cond.WeightedHistogram().accumulate_batch(
        np.concatenate([xs1, xs2]), np.concatenate([ws1, ws2])
    )
    merged = h1.merge(h2)
    _check(
        results,
        "histogram_merge_additive",
        np.allclose(merged.bin_weights, h12.bin_weights, rtol=1e-12, atol=1e-12)
        and merged.count == h12.count,
    )

    # vacuum reconstruction peak at the configured cutoff
    centers = np.linspace(-8, 8, 401)
    vac = np.exp(-(centers**2) / 2.0) / math.sqrt(2 * math.pi)
    marginals = tomography.MarginalSet(
        angles=np.array(default_tomography_angles()),
        centers=centers,
        densities=np.tile(vac, (12, 1)),
    )
    grid = tomography.inverse_radon(
        marginals, extent=config.grid_extent, n_grid=101, cutoff=config.radon_cutoff
    )
    peak = tomography.wigner_metrics(grid).origin
    _check(
        results,
        "vacuum_peak_convention",
        abs(peak - 1.0 / (2 * math.pi)) < 0.002,
        f"peak={peak:.5f}",
    )

    # tiny end-to-end determinism across thread counts
    small = replace(
        config,
        params=replace(params, samples_per_angle=20_000),
        shard_size=5_000,
    )
    m1, hash1 = condition_in_memory(small, threads=1)
    m2, hash2 = condition_in_memory(small, threads=4)
    same = hash1 == hash2 and all(
        np.array_equal(a.bin_weights, b.bin_weights)
        for la, lb in zip(sorted(m1), sorted(m2))
        for a, b in zip(m1[la], m2[lb])
    )
    _check(results, "thread_count_determinism", same)

    passed = all(v == "pass" for v in results.values())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sampleio.write_report(out / "verify_report.txt", results)
    return passed, results


def _partial_trace_b(joint: np.ndarray) -> np.ndarray:
    dim = int(round(math.sqrt(joint.shape[0])))
    return joint.reshape(dim, dim, dim, dim).trace(axis1=1, axis2=3)
