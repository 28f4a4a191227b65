"""
Randomized verification of the duality and uncertainty inequalities.

Every sample draws from its own Philox stream keyed by (seed, sample index),
so a batch is reproducible bit for bit regardless of how samples are
distributed over worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import DualityLabError, NullOutcome, OverlapSingularity, PaddingViolation
from .interferometry import DUALITY_TOL, DetectorFunction, detect, duality_check, overlap_stats, which_way
from .uncertainty import NON_OVERLAP_TOL, detector_variation, separation_variance
from .wavefield import GaussianParams, Grid, expectation_T, make_gaussian, position_moments, translated_gaussian

MODULAR_TOL = 1e-10
DXW_TOL = 1e-9
CHAIN_SLACK = 0.05
MAX_RETRIES = 10
SCATTER_PARAMS = ("phi_x0", "phi_w", "phi_k", "branch_x0", "det_x0", "det_w", "det_k", "theta")


@dataclass(frozen=True)
class SamplerBounds:
    """Uniform ranges, in units of a reference width of 1."""

    x0: tuple[float, float] = (-4.0, 4.0)
    k: tuple[float, float] = (-4.0, 4.0)
    w: tuple[float, float] = (0.05, 4.0)
    points_per_width: float = 10.0

    def __post_init__(self):
        for name in ("x0", "k", "w"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"bad {name} range {lo, hi}")
        if self.w[0] <= 0:
            raise ValueError("widths must be positive")
        if self.points_per_width < 5:
            raise ValueError("the narrowest width must span at least 5 grid steps")


@dataclass(frozen=True)
class SampleConfig:
    phi: GaussianParams
    branch: GaussianParams
    detector: GaussianParams
    theta: float

    @property
    def a(self) -> float:
        return self.branch.x0 - self.phi.x0

    def params(self) -> dict[str, float]:
        return dict(zip(SCATTER_PARAMS, (self.phi.x0, self.phi.w, self.phi.k, self.branch.x0,
                                         self.detector.x0, self.detector.w, self.detector.k, self.theta)))

    def grid(self, bounds: "SamplerBounds", post_measurement: bool = False) -> Grid:
        """
        Holds phi and its branch and resolves |a| down to the narrowest
        admissible width. With ``post_measurement`` it also holds D times each
        branch (itself a Gaussian, possibly centered elsewhere) and all of
        these moved once more by a, as needed for <T_a> of psi_D.
        """
        x0, a, w = self.phi.x0, self.a, self.phi.w
        centers, widths = [x0, x0 + a], [w, w]
        if post_measurement:
            xd, wd = self.detector.x0, self.detector.w
            inv = 1.0 / w**2 + 1.0 / wd**2
            wp = 1.0 / math.sqrt(inv)
            for c in (x0, x0 + a):
                cp = (c / w**2 + xd / wd**2) / inv
                centers += [c + a, cp, cp + a]
                widths += [w, wp, wp]
        return Grid.covering(centers=centers, widths=widths,
                             resolve=(self.detector.w, max(abs(a), bounds.w[0])),
                             points_per_width=bounds.points_per_width)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_config(rng: np.random.Generator, bounds: SamplerBounds = SamplerBounds()) -> SampleConfig:
    """
    phi and the detector Gaussian are independent uniform draws; the second
    branch is phi moved to an independently drawn center (same width and k).
    """
    u = lambda r: float(rng.uniform(*r)) if r[1] > r[0] else float(r[0])  # noqa: E731
    phi = GaussianParams(u(bounds.x0), u(bounds.w), u(bounds.k))
    branch = GaussianParams(u(bounds.x0), phi.w, phi.k)
    det = GaussianParams(u(bounds.x0), u(bounds.w), u(bounds.k))
    theta = float(rng.uniform(0.0, 2 * math.pi))
    return SampleConfig(phi, branch, det, theta)


def _prepare(cfg: SampleConfig, bounds: SamplerBounds, constant_detector: bool,
             post_measurement: bool = False):
    grid = cfg.grid(bounds, post_measurement and not constant_detector)
    phi = make_gaussian(cfg.phi, grid)
    branch = translated_gaussian(cfg.phi, cfg.a, grid)
    if constant_detector:
        D = DetectorFunction.constant(grid)
    else:
        D = DetectorFunction.from_gaussian(cfg.detector, grid)
    return grid, phi, branch, D


def _draw(seed: int, index: int, bounds: SamplerBounds, constant_detector: bool,
          post_measurement: bool = False):
    """Configuration plus its discretization; redraws (bounded) on padding failure."""
    rng = sample_rng(seed, index)
    for _ in range(MAX_RETRIES):
        cfg = sample_config(rng, bounds)
        try:
            return (cfg,) + _prepare(cfg, bounds, constant_detector, post_measurement)
        except PaddingViolation:
            continue
    raise PaddingViolation(f"sample {index}: no padded configuration in {MAX_RETRIES} draws")


@dataclass
class BatchReport:
    kind: str
    seed: int
    n_samples: int
    n_evaluated: int = 0
    n_violations: int = 0
    max_duality: float = -math.inf
    min_duality: float = math.inf
    violation_counts: dict[str, int] = field(default_factory=dict)
    min_margins: dict[str, float] = field(default_factory=dict)
    checked: dict[str, int] = field(default_factory=dict)
    skipped: dict[str, int] = field(default_factory=dict)
    records: list[dict] = field(default_factory=list, repr=False)
    skip_log: list[tuple[int, str]] = field(default_factory=list, repr=False)

    @property
    def n_skipped(self) -> int:
        return sum(self.skipped.values())

    @property
    def skip_rate(self) -> float:
        return self.n_skipped / self.n_samples if self.n_samples else 0.0

    @property
    def any_violation(self) -> bool:
        return any(self.violation_counts.values())

    def _note_margin(self, name: str, margin: float, tol: float) -> None:
        self.checked[name] = self.checked.get(name, 0) + 1
        self.min_margins[name] = min(self.min_margins.get(name, math.inf), margin)
        self.violation_counts.setdefault(name, 0)
        if margin < -tol:
            self.violation_counts[name] += 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("records")
        out.pop("skip_log")
        out["n_skipped"] = self.n_skipped
        out["skip_rate"] = self.skip_rate
        return out

    def to_json(self, manifest: dict | None = None) -> str:
        body = {"manifest": manifest or {}, **self.to_dict()}
        return json.dumps(body, indent=2, sort_keys=True, default=_json_default)

    def scatter_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment is not None:
            buf.write(f"# {header_comment}\n")
        columns = ["sample_id", "W", "V", "duality", "a", *SCATTER_PARAMS, "skip_reason"]
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        rows = self.records + [{"sample_id": i, "skip_reason": reason} for i, reason in self.skip_log]
        for rec in sorted(rows, key=lambda r: r["sample_id"]):
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
        return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _skip_reason(exc: Exception) -> str:
    if isinstance(exc, NullOutcome):
        return "null_outcome"
    if isinstance(exc, OverlapSingularity):
        return "singular_overlap"
    return type(exc).__name__


def _duality_sample(seed: int, index: int, bounds: SamplerBounds, constant_detector: bool):
    try:
        cfg, grid, phi, branch, D = _draw(seed, index, bounds, constant_detector)
        if abs(cfg.a) < 5 * grid.dx:
            return index, "unresolved_separation", None
        rep = duality_check(phi, cfg.a, D, branch)
    except DualityLabError as exc:
        return index, _skip_reason(exc), None
    rec = {"sample_id": index, "W": rep.W, "V": rep.V, "duality": rep.duality, "a": cfg.a, **cfg.params()}
    return index, None, rec


def _uncertainty_sample(seed: int, index: int, bounds: SamplerBounds, constant_detector: bool):
    try:
        cfg, grid, phi, branch, D = _draw(seed, index, bounds, constant_detector, post_measurement=True)
        a = cfg.a
        if abs(a) < 5 * grid.dx:
            return index, "unresolved_separation", None
        psi_d = detect(phi, a, D, cfg.theta, branch)
        margins = {}
        for label, state in (("modular_input", phi), ("modular_post", psi_d)):
            _, var = position_moments(state)
            margins[label] = math.sqrt(var) / abs(a) - abs(expectation_T(state, a)) / 2.0
        stats = overlap_stats(phi, a, D, branch)
        if abs(stats.t_overlap) < NON_OVERLAP_TOL:
            W = which_way(stats)
            _, var = position_moments(psi_d)
            margins["dxw"] = (1.0 - W**2) / 2.0 - var / a**2
            margins["dxw_separation"] = (1.0 - W**2) / 2.0 - separation_variance(stats, a) / a**2
    except DualityLabError as exc:
        return index, _skip_reason(exc), None
    return index, None, {"sample_id": index, "a": a, **margins, **cfg.params()}


def _run_chunk(args):
    fn, seed, indices, bounds, constant_detector = args
    return [fn(seed, i, bounds, constant_detector) for i in indices]


def _run(fn, n: int, seed: int, bounds: SamplerBounds, constant_detector: bool, workers: int):
    if n < 1:
        raise ValueError("need at least one sample")
    if workers <= 1:
        return [fn(seed, i, bounds, constant_detector) for i in range(n)]
    chunks = [list(range(i, n, workers)) for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(fn, seed, c, bounds, constant_detector) for c in chunks])
        results = [r for part in parts for r in part]
    return sorted(results, key=lambda r: r[0])


def verify_duality_batch(n: int, seed: int, bounds: SamplerBounds = SamplerBounds(),
                         workers: int = 1, constant_detector: bool = False) -> BatchReport:
    """Duality W^2 + V^2 <= 1 over ``n`` random Gaussian configurations."""
    report = BatchReport(kind="duality", seed=seed, n_samples=n)
    for index, reason, rec in _run(_duality_sample, n, seed, bounds, constant_detector, workers):
        if rec is None:
            report.skipped[reason] = report.skipped.get(reason, 0) + 1
            report.skip_log.append((index, reason))
            continue
        report.n_evaluated += 1
        report.max_duality = max(report.max_duality, rec["duality"])
        report.min_duality = min(report.min_duality, rec["duality"])
        report._note_margin("duality", 1.0 - rec["duality"], DUALITY_TOL)
        report.records.append(rec)
    report.n_violations = report.violation_counts.get("duality", 0)
    return report


def verify_uncertainty_batch(n: int, seed: int, bounds: SamplerBounds = SamplerBounds(),
                             workers: int = 1, constant_detector: bool = False) -> BatchReport:
    """
    Per sample: dx/|a| >= |<T_a>|/2 for the input packet and the
    post-measurement state; for non-overlapping branches also
    (1 - W^2)/2 >= dx^2/a^2, both with the true dx and with the
    separation-only variance a^2 n0 n1 / (n0 + n1)^2.
    """
    report = BatchReport(kind="uncertainty", seed=seed, n_samples=n)
    tols = {"modular_input": MODULAR_TOL, "modular_post": MODULAR_TOL, "dxw": DXW_TOL, "dxw_separation": DXW_TOL}
    for index, reason, rec in _run(_uncertainty_sample, n, seed, bounds, constant_detector, workers):
        if rec is None:
            report.skipped[reason] = report.skipped.get(reason, 0) + 1
            report.skip_log.append((index, reason))
            continue
        report.n_evaluated += 1
        for name, tol in tols.items():
            if name in rec:
                report._note_margin(name, rec[name], tol)
        report.records.append(rec)
    report.n_violations = sum(report.violation_counts.values())
    return report


@dataclass(frozen=True)
class ChainBounds:
    """Sampler for narrow packets under a slowly varying detector."""

    w_phi: tuple[float, float] = (0.02, 0.1)
    k_phi: tuple[float, float] = (-4.0, 4.0)
    a: tuple[float, float] = (1.0, 4.0)
    det_x0: tuple[float, float] = (-4.0, 4.0)
    det_w: tuple[float, float] = (1.0, 4.0)
    det_k: tuple[float, float] = (-0.2, 0.2)


def verify_derivation_chain(n: int, seed: int, bounds: ChainBounds = ChainBounds(),
                            max_draws: int | None = None) -> BatchReport:
    """
    dx^2/a^2 >= (1 - slack) |<T_a>|^2 on ``n`` compliant samples: detector
    variation below 5% within 3 w_phi of both branches and branch overlap
    below the non-overlap gate. Non-compliant draws are counted as skips.
    """
    report = BatchReport(kind="derivation_chain", seed=seed, n_samples=0)
    max_draws = max_draws or 20 * n
    index = 0
    while report.n_evaluated < n and index < max_draws:
        rng = sample_rng(seed, index)
        index += 1
        w = float(rng.uniform(*bounds.w_phi))
        phi_p = GaussianParams(0.0, w, float(rng.uniform(*bounds.k_phi)))
        a = float(rng.uniform(*bounds.a)) * (1.0 if rng.random() < 0.5 else -1.0)
        det_p = GaussianParams(float(rng.uniform(*bounds.det_x0)), float(rng.uniform(*bounds.det_w)),
                               float(rng.uniform(*bounds.det_k)))
        theta = float(rng.uniform(0.0, 2 * math.pi))
        grid = Grid.covering(centers=(0.0, a, 2 * a), widths=(w, w, w), resolve=(det_p.w,))
        D = DetectorFunction.from_gaussian(det_p, grid)
        report.n_samples += 1
        if detector_variation(D, (0.0, a), 3.0 * w) > CHAIN_SLACK:
            report.skipped["detector_too_sharp"] = report.skipped.get("detector_too_sharp", 0) + 1
            continue
        phi = make_gaussian(phi_p, grid)
        try:
            stats = overlap_stats(phi, a, D)
            if abs(stats.t_overlap) >= NON_OVERLAP_TOL:
                report.skipped["overlapping"] = report.skipped.get("overlapping", 0) + 1
                continue
            psi_d = detect(phi, a, D, theta)
        except DualityLabError as exc:
            reason = _skip_reason(exc)
            report.skipped[reason] = report.skipped.get(reason, 0) + 1
            continue
        _, var = position_moments(psi_d)
        t_mod = abs(expectation_T(psi_d, a))
        margin = var / a**2 - (1.0 - CHAIN_SLACK) * t_mod**2
        report.n_evaluated += 1
        report._note_margin("wv2", margin, 0.0)
        report.records.append({"sample_id": index - 1, "a": a, "wv2": margin, "w_phi": w,
                               "det_x0": det_p.x0, "det_w": det_p.w, "det_k": det_p.k, "theta": theta})
    report.n_violations = report.violation_counts.get("wv2", 0)
    return report


def gaussian_control_margins(a_values, w: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Numerical dx/a - |<T_a>|/2 for a lone Gaussian of width ``w`` against the
    analytic (1 - u exp(-u^2/2)) / (2u), u = a/w.
    """
    a_values = np.asarray(a_values, dtype=float)
    reach = float(np.max(np.abs(a_values)))
    grid = Grid.covering(centers=(0.0, reach), widths=(w, w), points_per_width=20.0)
    psi = make_gaussian(GaussianParams(0.0, w), grid)
    _, var = position_moments(psi)
    numeric = np.array([math.sqrt(var) / a - abs(expectation_T(psi, a)) / 2.0 for a in a_values])
    u = a_values / w
    return numeric, (1.0 - u * np.exp(-(u**2) / 2.0)) / (2.0 * u)


def marginal_uniformity(n: int, seed: int, bounds: SamplerBounds = SamplerBounds(),
                        bins: int = 20) -> dict[str, float]:
    """Chi-square p-value of each sampled parameter's histogram against uniform."""
    draws = [sample_config(sample_rng(seed, i), bounds).params() for i in range(n)]
    ranges = {"phi_x0": bounds.x0, "phi_w": bounds.w, "phi_k": bounds.k, "branch_x0": bounds.x0,
              "det_x0": bounds.x0, "det_w": bounds.w, "det_k": bounds.k, "theta": (0.0, 2 * math.pi)}
    out = {}
    for name, rng_ in ranges.items():
        counts, _ = np.histogram([d[name] for d in draws], bins=bins, range=rng_)
        out[name] = float(sps.chisquare(counts).pvalue)
    return out
