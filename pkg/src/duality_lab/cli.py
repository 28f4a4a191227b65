"""
Command-line entry point.

Every output starts with its run manifest (a ``# manifest=`` comment line for
CSV, a ``"manifest"`` field for JSON); ``replay`` re-runs a file from it.
Exit status: 0 success, 1 an inequality or check failed, 2 bad usage/config.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.constants import c as C_LIGHT

from . import __version__
from .config import load as load_config
from .emission import (
    EmissionConfig,
    ThinLensDetector,
    detector_function_farfield,
    detector_relative_error,
    fit_decay_rate,
    heisenberg_resolution,
    imaging_detector,
    mode_amplitudes,
    ModeSet,
    thin_lens_detector,
    thin_lens_eta,
    thin_lens_modular,
    thin_lens_WV,
    uniform_comb,
)
from .errors import ConfigError, DualityLabError
from .interferometry import (
    DetectorFunction,
    UnambiguousPovm,
    detect,
    overlap_stats,
    population_extrema,
    which_way,
    which_way_theta,
)
from .montecarlo import gaussian_control_margins, verify_derivation_chain, verify_duality_batch, verify_uncertainty_batch
from .uncertainty import antisymmetric_detector_case
from .wavefield import GaussianParams, Grid, make_gaussian

MANIFEST_PREFIX = "# manifest="
MANIFEST_KEYS = ("subcommand", "config", "out", "scatter", "seed", "samples", "sweep_min", "sweep_max",
                 "sweep_points", "perfect_lens", "w_eff", "workers")
SWEEP_DEFAULTS = {
    "duality-scan": (0.0, 4.0, 201),
    "povm-check": (0.5, 4.0, 8),
}


def _fmt(value) -> str:
    return repr(float(value))


def _manifest(args: argparse.Namespace) -> dict:
    out = {key: getattr(args, key, None) for key in MANIFEST_KEYS}
    out["version"] = __version__
    return out


def _csv_text(manifest: dict, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(MANIFEST_PREFIX + json.dumps(manifest, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _json_text(manifest: dict, body: dict) -> str:
    return json.dumps({"manifest": manifest, **body}, indent=2, sort_keys=True, default=_json_default) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sweep(args) -> np.ndarray:
    lo, hi, n = SWEEP_DEFAULTS[args.subcommand]
    lo = lo if args.sweep_min is None else args.sweep_min
    hi = hi if args.sweep_max is None else args.sweep_max
    n = n if args.sweep_points is None else args.sweep_points
    if n < 1 or hi < lo:
        raise ConfigError("sweep needs sweep_points >= 1 and sweep_max >= sweep_min")
    return np.linspace(lo, hi, n)


def _lens_detector(args):
    """(detector, lens config, full config) from --config; the last two are None with --w-eff."""
    if args.config is not None:
        exp = load_config(args.config)
        perfect = args.perfect_lens or exp.perfect_lens
        return thin_lens_detector(exp.lens, perfect_lens=perfect), exp.lens, exp
    if args.w_eff is None:
        raise ConfigError("need --config or --w-eff")
    if not args.w_eff > 0:
        raise ConfigError("--w-eff must be positive")
    return ThinLensDetector(w_eff=args.w_eff, delta_phi=0.0), None, None


def thin_lens_modular_real(a: float, det: ThinLensDetector) -> float:
    """|<T_a>| for a detector without wavefront curvature."""
    u = (a / det.w_eff) ** 2
    return math.exp(-u / 2.0) / (1.0 + math.exp(-u))


def cmd_duality_scan(args) -> int:
    det, lens, _ = _lens_detector(args)
    rows = []
    for r in _sweep(args):
        a = r * det.w_eff
        W, V = thin_lens_WV(a, det)
        t = thin_lens_modular(a, det, lens) if lens is not None else complex(thin_lens_modular_real(a, det))
        rows.append([_fmt(r), _fmt(W), _fmt(V), _fmt(W**2 + V**2), _fmt(abs(t)), _fmt(math.atan2(t.imag, t.real))])
    header = ["a_over_w_eff", "W", "V", "duality", "T_abs", "T_phase"]
    _emit(_csv_text(_manifest(args), header, rows), args.out)
    return 0


def _scatter_path(args) -> str | None:
    if args.scatter is not None:
        return args.scatter
    if args.out is not None:
        p = Path(args.out)
        return str(p.with_name(p.stem + "_scatter.csv"))
    return None


def cmd_random_verify(args) -> int:
    report = verify_duality_batch(args.samples, args.seed, workers=args.workers)
    manifest = _manifest(args)
    scatter = _scatter_path(args)
    manifest["scatter"] = scatter
    _emit(report.to_json(manifest) + "\n", args.out)
    if scatter is not None:
        Path(scatter).write_text(report.scatter_csv(MANIFEST_PREFIX[2:] + json.dumps(manifest, sort_keys=True)))
    return 1 if report.n_violations else 0


def _decay_check(emission: EmissionConfig) -> dict:
    modes, comb = uniform_comb(emission.omega_a, emission.gamma)
    t = np.linspace(0.0, 4.0 / emission.gamma, 801)
    ce, cn = mode_amplitudes(modes, comb, t)
    gamma_hat = fit_decay_rate(t, np.abs(ce) ** 2, (0.5 / emission.gamma, 3.0 / emission.gamma))
    drift = float(np.max(np.abs(np.abs(ce) ** 2 + np.sum(np.abs(cn) ** 2, axis=1) - 1.0)))
    return {"n_modes": len(modes), "gamma_ratio": gamma_hat / emission.gamma, "probability_drift": drift}


def _rabi_check() -> dict:
    omega, coupling = 10.0, 0.3
    modes = ModeSet.build([omega], [1.0])
    cfg = EmissionConfig(omega_a=omega, gamma=1.0, d_eg=coupling)
    t = np.linspace(0.0, 8 * math.pi / coupling, 2001)
    ce, cn = mode_amplitudes(modes, cfg, t)
    err = float(np.max(np.abs(np.abs(ce) ** 2 - np.cos(coupling * t) ** 2)))
    drift = float(np.max(np.abs(np.abs(ce) ** 2 + np.sum(np.abs(cn) ** 2, axis=1) - 1.0)))
    return {"max_error": err, "probability_drift": drift}


def cmd_emission_check(args) -> int:
    if args.config is None:
        raise ConfigError("emission-check needs --config")
    exp = load_config(args.config)
    if exp.emission is None:
        raise ConfigError("config lacks the emission keys gamma_per_s, omega_a_per_s, time_s")
    lens, emission = exp.lens, exp.emission
    perfect = args.perfect_lens or exp.perfect_lens
    small = thin_lens_detector(lens, perfect_lens=perfect)
    exact = imaging_detector(lens, perfect_lens=perfect)

    grid = Grid.symmetric(5.0, 1024)
    mask = np.abs(grid.x) <= 3.0
    k0 = emission.omega_a / C_LIGHT
    farfield = {}
    for label, propagate in (("imaging", True), ("literal", False)):
        eta = thin_lens_eta(lens, detector_propagation=propagate, perfect_lens=perfect)
        D = detector_function_farfield(eta, emission, grid, k0=k0, length_unit=small.w_eff)
        ref_exact = exact.values(grid.x * small.w_eff, lens)
        ref_mod = np.abs(small.values(grid.x * small.w_eff))
        ref_mod = ref_mod / ref_mod.max()  # same peak convention as D
        farfield[label] = {
            "max_rel_error_vs_exact_gaussian": detector_relative_error(D, ref_exact, mask),
            "max_rel_error_modulus_vs_w_eff": float(np.max(np.abs(np.abs(D.values[mask]) - ref_mod[mask])
                                                           / ref_mod[mask])),
        }
    decay = _decay_check(emission)
    rabi = _rabi_check()
    checks = {
        "farfield_within_1pct": farfield["imaging"]["max_rel_error_vs_exact_gaussian"] < 0.01,
        "farfield_modulus_within_1pct": farfield["imaging"]["max_rel_error_modulus_vs_w_eff"] < 0.01,
        "decay_rate_within_5pct": abs(decay["gamma_ratio"] - 1.0) < 0.05,
        "rabi_within_1e-6": rabi["max_error"] < 1e-6,
        "probability_conserved": max(decay["probability_drift"], rabi["probability_drift"]) < 1e-8,
    }
    body = {
        "perfect_lens": perfect,
        "w_eff_m": small.w_eff,
        "w_min_m": lens.w_min,
        "delta_phi": small.delta_phi,
        "exact_imaging": {"w_eff_m": exact.w_eff, "delta_phi": exact.delta_phi},
        "heisenberg_resolution_m": heisenberg_resolution(lens),
        "gamma_t": emission.gamma * emission.t,
        "farfield": farfield,
        "decay": decay,
        "rabi": rabi,
        "checks": checks,
    }
    _emit(_json_text(_manifest(args), body), args.out)
    return 0 if all(checks.values()) else 1


def cmd_uncertainty_suite(args) -> int:
    batch = verify_uncertainty_batch(args.samples, args.seed, workers=args.workers)
    chain = verify_derivation_chain(max(1, args.samples // 10), args.seed)
    a_values = np.linspace(0.25, 6.0, 24)
    numeric, analytic = gaussian_control_margins(a_values)
    odd = antisymmetric_detector_case()
    inequalities = {name: {"min_margin": batch.min_margins.get(name), "violations": batch.violation_counts.get(name, 0),
                           "checked": batch.checked.get(name, 0)}
                    for name in ("modular_input", "modular_post", "dxw", "dxw_separation")}
    inequalities["wv2_chain"] = {"min_margin": chain.min_margins.get("wv2"), "violations": chain.n_violations,
                                 "checked": chain.n_evaluated}
    body = {
        "inequalities": inequalities,
        "skipped": batch.skipped,
        "chain_skipped": chain.skipped,
        "gaussian_control_max_deviation": float(np.max(np.abs(numeric - analytic))),
        "antisymmetric_detector": {"W": odd.W, "V": odd.V, "delta_x": odd.delta_x,
                                   "dxw_margin": odd.dxw_margin, "modular_margin": odd.modular_margin},
    }
    _emit(_json_text(_manifest(args), body), args.out)
    violated = any(v["violations"] for v in inequalities.values())
    return 1 if violated else 0


def cmd_povm_check(args) -> int:
    """
    For a unit-width packet and a fixed Gaussian detector, compares |P0 - P1|
    of the unambiguous-discrimination POVM with the which-way formula at
    both extrema of the outcome probability.
    """
    det_params = GaussianParams(0.3, 2.0, 0.5)
    rows = []
    worst = 0.0
    for a in _sweep(args):
        grid = Grid.covering(centers=(0.0, a), widths=(1.0, 1.0), resolve=(det_params.w,))
        phi = make_gaussian(GaussianParams(0.0, 1.0), grid)
        D = DetectorFunction.from_gaussian(det_params, grid)
        stats = overlap_stats(phi, a, D)
        povm = UnambiguousPovm(phi, a)
        W = which_way(stats)
        for theta in population_extrema(stats):
            probs = povm.probabilities(detect(phi, a, D, theta))
            formula = which_way_theta(stats, theta)
            worst = max(worst, abs(probs.which_way - formula))
            rows.append([_fmt(a), _fmt(abs(povm.t)), _fmt(theta), _fmt(probs.p0), _fmt(probs.p1), _fmt(probs.p2),
                         _fmt(probs.which_way), _fmt(formula), _fmt(W), _fmt(probs.out_of_span)])
    header = ["a", "t_abs", "theta", "p0", "p1", "p2", "which_way_povm", "which_way_formula", "W", "out_of_span"]
    _emit(_csv_text(_manifest(args), header, rows), args.out)
    return 0 if worst < 1e-9 else 1


COMMANDS = {
    "duality-scan": cmd_duality_scan,
    "random-verify": cmd_random_verify,
    "emission-check": cmd_emission_check,
    "uncertainty-suite": cmd_uncertainty_suite,
    "povm-check": cmd_povm_check,
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duality-lab", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, samples_default=None):
        p.add_argument("--config", help="flat key=value file, SI units")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--samples", type=_positive_int, default=samples_default)
        p.add_argument("--sweep-min", type=float)
        p.add_argument("--sweep-max", type=float)
        p.add_argument("--sweep-points", type=int)
        p.add_argument("--perfect-lens", action="store_true")
        p.add_argument("--w-eff", type=float, help="effective detector width (instead of --config)")
        p.add_argument("--workers", type=_positive_int, default=1)
        p.add_argument("--scatter", help="scatter CSV path for random-verify")

    for name in COMMANDS:
        common(sub.add_parser(name), 1000 if name in ("random-verify", "uncertainty-suite") else None)
    replay = sub.add_parser("replay", help="re-run an output file from its embedded manifest")
    replay.add_argument("file")
    replay.add_argument("--out", help="where to write the regenerated output (default: stdout)")
    return parser


def read_manifest(path: str) -> dict:
    text = Path(path).read_text()
    if text.startswith(MANIFEST_PREFIX):
        return json.loads(text.splitlines()[0][len(MANIFEST_PREFIX):])
    try:
        return json.loads(text)["manifest"]
    except (json.JSONDecodeError, KeyError, TypeError):
        raise ConfigError(f"{path}: no embedded manifest") from None


def _replay_args(manifest: dict, out: str | None) -> argparse.Namespace:
    if manifest.get("subcommand") not in COMMANDS:
        raise ConfigError("manifest names no known subcommand")
    ns = argparse.Namespace(**{key: manifest.get(key) for key in MANIFEST_KEYS})
    ns.out = out
    ns.perfect_lens = bool(ns.perfect_lens)
    ns.workers = ns.workers or 1
    if manifest.get("scatter") is not None and out is not None:
        p = Path(out)
        ns.scatter = str(p.with_name(p.stem + "_scatter.csv"))
    elif out is None:
        ns.scatter = None
    return ns


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "replay":
            args = _replay_args(read_manifest(args.file), args.out)
        return COMMANDS[args.subcommand](args)
    except ConfigError as exc:
        print(f"duality-lab: config error: {exc}", file=sys.stderr)
        return 2
    except DualityLabError as exc:
        print(f"duality-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
