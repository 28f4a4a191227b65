"""
Position / modular-momentum uncertainty and its links to W and V.

All margins are reported as ``lhs - rhs`` of the corresponding inequality,
so a non-negative margin means the inequality holds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DetectorTooSharp, OverlapTooLarge, UndefinedPhase
from .interferometry import (
    DetectorFunction,
    OverlapStats,
    detect,
    overlap_stats,
    visibility,
    which_way,
)
from .wavefield import GaussianParams, Grid, Wavepacket, expectation_T, make_gaussian, position_moments

NON_OVERLAP_TOL = 1e-6
SLOW_VARIATION_TOL = 0.05


@dataclass(frozen=True)
class UncertaintyReport:
    delta_x: float
    t_expect: complex
    holevo: float
    margins: dict[str, float] = field(default_factory=dict)


def holevo_uncertainty(t_expect: complex) -> float:
    """Holevo phase spread |<T_a>|^-2 - 1."""
    m = abs(t_expect)
    if m < 1e-12:
        raise UndefinedPhase("<T_a> vanishes: modular momentum completely indefinite")
    return max(1.0 / m**2 - 1.0, 0.0)


def modular_uncertainty_check(psi: Wavepacket, a: float) -> float:
    """Margin of dx/|a| >= |<T_a>|/2 (exact for every state)."""
    if a == 0.0:
        raise ValueError("separation must be non-zero")
    psi = psi.normalized()
    _, var = position_moments(psi)
    return math.sqrt(var) / abs(a) - abs(expectation_T(psi, a)) / 2.0


def separation_variance(stats: OverlapStats, a: float) -> float:
    """a^2 n0 n1 / (n0 + n1)^2: the variance when the packet widths are neglected."""
    return a**2 * stats.n0 * stats.n1 / stats.total**2


def dxw_inequality_check(stats: OverlapStats, psi_d: Wavepacket, a: float) -> float:
    """Margin of (1 - W^2)/2 >= dx^2/a^2, dx taken from the actual post-measurement state."""
    if abs(stats.t_overlap) >= NON_OVERLAP_TOL:
        raise OverlapTooLarge(f"|<phi|T_a phi>| = {abs(stats.t_overlap):.3g}")
    W = which_way(stats)
    _, var = position_moments(psi_d)
    return (1.0 - W**2) / 2.0 - var / a**2


def detector_variation(D: DetectorFunction, centers, half_width: float) -> float:
    """
    Largest |D(x) - D(c)| within ``half_width`` of each center, relative to
    the largest |D(c)|.
    """
    x = D.grid.x
    values = D.values
    at = [complex(np.interp(c, x, values.real) + 1j * np.interp(c, x, values.imag)) for c in centers]
    scale = max(abs(v) for v in at)
    if scale == 0.0:
        return math.inf
    worst = 0.0
    for c, dc in zip(centers, at):
        window = np.abs(x - c) <= half_width
        if window.any():
            worst = max(worst, float(np.max(np.abs(values[window] - dc))))
    return worst / scale


def _require_slow(D: DetectorFunction, centers, w_phi: float) -> None:
    variation = detector_variation(D, centers, 3.0 * w_phi)
    if variation > SLOW_VARIATION_TOL:
        raise DetectorTooSharp(f"detector varies by {variation:.3g} across +-3 w_phi")


def _value_at(D: DetectorFunction, x0: float) -> complex:
    x = D.grid.x
    return complex(np.interp(x0, x, D.values.real) + 1j * np.interp(x0, x, D.values.imag))


def dxw_approx_relation(D: DetectorFunction, a: float, w_phi: float) -> tuple[float, float]:
    """
    Compare dx^2/a^2 of the post-measurement state with
    |D(0)|^2 |D(a)|^2 / (|D(0)|^2 + |D(a)|^2)^2.

    A Gaussian packet of width ``w_phi`` centered at 0 is placed on the
    detector's grid; theta = 0.
    """
    _require_slow(D, (0.0, a), w_phi)
    phi = make_gaussian(GaussianParams(0.0, w_phi), D.grid)
    _, var = position_moments(detect(phi, a, D, 0.0))
    d0 = abs(_value_at(D, 0.0)) ** 2
    da = abs(_value_at(D, a)) ** 2
    return var / a**2, d0 * da / (d0 + da) ** 2


class VTRelation(NamedTuple):
    t_modulus: float
    half_v: float
    # margin of dx^2/a^2 >= |<T_a>|^2
    wv2_margin: float


def vt_relation_check(phi: Wavepacket, a: float, D: DetectorFunction, theta: float = 0.0,
                      w_phi: float | None = None) -> VTRelation:
    """|<psi_D|T_a|psi_D>| against V/2, for slowly varying detectors."""
    if w_phi is None:
        _, var = position_moments(phi)
        w_phi = 2.0 * math.sqrt(var)
    mean, _ = position_moments(phi)
    _require_slow(D, (mean, mean + a), w_phi)
    stats = overlap_stats(phi, a, D)
    if abs(stats.t_overlap) >= NON_OVERLAP_TOL:
        raise OverlapTooLarge(f"|<phi|T_a phi>| = {abs(stats.t_overlap):.3g}")
    psi_d = detect(phi, a, D, theta)
    t_mod = abs(expectation_T(psi_d, a))
    _, var = position_moments(psi_d)
    return VTRelation(t_mod, visibility(stats) / 2.0, var / a**2 - t_mod**2)


def analyze(phi: Wavepacket, a: float, D: DetectorFunction, theta: float = 0.0) -> UncertaintyReport:
    """Uncertainty figures of the post-measurement state and the margins that apply to it."""
    stats = overlap_stats(phi, a, D)
    psi_d = detect(phi, a, D, theta)
    t = expectation_T(psi_d, a)
    _, var = position_moments(psi_d)
    margins = {"modular": math.sqrt(var) / abs(a) - abs(t) / 2.0}
    if abs(stats.t_overlap) < NON_OVERLAP_TOL:
        W = which_way(stats)
        margins["dxw"] = (1.0 - W**2) / 2.0 - var / a**2
        margins["dxw_separation"] = (1.0 - W**2) / 2.0 - separation_variance(stats, a) / a**2
    holevo = holevo_uncertainty(t) if abs(t) >= 1e-12 else math.inf
    return UncertaintyReport(delta_x=math.sqrt(var), t_expect=t, holevo=holevo, margins=margins)


class AntisymmetricCase(NamedTuple):
    W: float
    V: float
    duality: float
    delta_x: float
    dxw_margin: float
    modular_margin: float
    z0: complex
    n0: float
    n1: float


def antisymmetric_detector_case(w_phi: float = 1.0, a: float = 10.0, sigma: float = 0.05,
                                offset: float = 1e-3) -> AntisymmetricCase:
    """
    A symmetric packet at 0 seen through the narrow odd detector
    D(x) = (y/s) exp(1/2 - y^2/2s^2), y = x - offset*w_phi, s = sigma*w_phi,
    which vanishes near x = a. W and dx both come out close to zero even
    though the paths are far apart.

    With ``offset = 0`` the fringe pattern vanishes identically and V is 0/0;
    a small node displacement gives the limiting value V = 0.
    """
    s = sigma * w_phi
    x_node = offset * w_phi
    grid = Grid.covering(centers=(0.0, a, 2 * a), widths=(w_phi,) * 3, resolve=(s,))
    phi = make_gaussian(GaussianParams(0.0, w_phi), grid)
    D = DetectorFunction.from_function(
        lambda x: ((x - x_node) / s) * np.exp(0.5 - (x - x_node) ** 2 / (2 * s * s)), grid)
    stats = overlap_stats(phi, a, D)
    W = which_way(stats)
    V = visibility(stats)
    report = analyze(phi, a, D, 0.0)
    return AntisymmetricCase(W=W, V=V, duality=W**2 + V**2, delta_x=report.delta_x,
                             dxw_margin=report.margins["dxw"], modular_margin=report.margins["modular"],
                             z0=stats.z0, n0=stats.n0, n1=stats.n1)
