"""
Two-path interferometer with a generalized position measurement.

The input packet phi is split into phi and T_a phi, a single outcome of a
position measurement multiplies the state by a detector function D(x), and
the which-way information W and fringe visibility V are computed from a
handful of overlap integrals (``OverlapStats``).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateFringe,
    DegenerateSplit,
    GridMismatch,
    IndistinguishableStates,
    NullOutcome,
    OverlapSingularity,
    SingularHouseholder,
)
from .wavefield import GaussianParams, Grid, Wavepacket, inner_product, integrate, shift

DETECTOR_TOL = 1e-12
DUALITY_TOL = 1e-9
# Outcome probabilities below this are treated as impossible. A spectral
# shift leaves a ~1e-16 relative round-off floor everywhere on the grid, so
# weights much below its square are not trustworthy.
NULL_TOL = 1e-20
# f_max + f_min below this counts as a vanishing fringe pattern.
FRINGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DetectorFunction:
    """Values of D(x) on a grid; one outcome of a partition of unity, so |D| <= 1."""

    grid: Grid
    values: np.ndarray
    gaussian: GaussianParams | None = None

    def __post_init__(self):
        values = np.array(np.broadcast_to(np.asarray(self.values, dtype=complex),
                                          (self.grid.n_points,)))
        peak = float(np.max(np.abs(values)))
        if peak > 1.0 + DETECTOR_TOL:
            raise ValueError(f"|D| reaches {peak:.6g} > 1; no complementary outcome exists")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: complex = 1.0) -> "DetectorFunction":
        return cls(grid, np.full(grid.n_points, value, dtype=complex))

    @classmethod
    def from_gaussian(cls, params: GaussianParams, grid: Grid) -> "DetectorFunction":
        # exp(-(x-x0)^2/w^2 + ikx) already peaks at modulus 1
        return cls(grid, params(grid.x), params)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], grid: Grid,
                      rescale: bool = False) -> "DetectorFunction":
        values = np.asarray(func(grid.x), dtype=complex)
        if rescale:
            peak = np.max(np.abs(values))
            if peak > 0:
                values = values / peak
        return cls(grid, values)

    def complement(self) -> "DetectorFunction":
        """The outcome sqrt(1 - |D|^2) that completes the partition of unity."""
        return DetectorFunction(self.grid, np.sqrt(np.clip(1.0 - np.abs(self.values) ** 2, 0.0, None)))


@dataclass(frozen=True)
class OverlapStats:
    n0: float
    n1: float
    r: complex
    z0: complex
    z1: complex
    z2: complex
    z3: complex
    t_overlap: complex

    @property
    def total(self) -> float:
        return self.n0 + self.n1

    def cauchy_schwarz_excess(self) -> float:
        """max_i (|z_i|^2 - n_i/(n0+n1)) for i = 0, 1; non-positive for a valid state."""
        return max(abs(self.z0) ** 2 - self.n0 / self.total,
                   abs(self.z1) ** 2 - self.n1 / self.total)


@dataclass(frozen=True)
class DualityReport:
    W: float
    V: float
    duality: float
    theta_max: float
    theta_min: float

    @property
    def violated(self) -> bool:
        return self.duality > 1.0 + DUALITY_TOL


def _branch(phi: Wavepacket, a: float, branch: Wavepacket | None) -> Wavepacket:
    """T_a phi, either supplied exactly by the caller or by spectral shift."""
    if branch is None:
        return shift(phi, a)
    if branch.grid != phi.grid:
        raise GridMismatch("branch and wavepacket live on different grids")
    return branch


def beam_split(phi: Wavepacket, a: float, theta: float, branch: Wavepacket | None = None) -> Wavepacket:
    """(phi + e^{i theta} T_a phi) / n_BS1."""
    branch = _branch(phi, a, branch)
    total = phi.psi + cmath.exp(1j * theta) * branch.psi
    out = Wavepacket(phi.grid, total)
    norm = out.norm()
    if norm < 1e-8:
        raise DegenerateSplit(f"beam splitter output has norm {norm:.3g}")
    return Wavepacket(phi.grid, total / norm)


def householder_apply(phi: Wavepacket, target: Wavepacket, state: Wavepacket,
                      adjoint: bool = False) -> Wavepacket:
    """
    Apply U = |u><u| / (1 + <target|phi>) - 1 with u = phi + target.

    U maps phi onto target. It is unitary only when <target|phi> is real;
    ``adjoint=True`` applies U^dagger instead.
    """
    c = 1.0 + inner_product(target, phi)
    if abs(c) < 1e-12:
        raise SingularHouseholder("1 + <target|phi> vanishes")
    if adjoint:
        c = c.conjugate()
    u = Wavepacket(phi.grid, phi.psi + target.psi)
    coeff = inner_product(u, state) / c
    return Wavepacket(phi.grid, coeff * u.psi - state.psi)


def apply_detector(psi: Wavepacket, D: DetectorFunction) -> tuple[Wavepacket, float]:
    """Post-selected state D psi / ||D psi|| and the outcome weight ||D psi||^2."""
    if psi.grid != D.grid:
        raise GridMismatch("detector and wavepacket live on different grids")
    out = Wavepacket(psi.grid, D.values * psi.psi)
    weight = out.norm() ** 2
    if weight < NULL_TOL:
        raise NullOutcome(f"detector outcome weight {weight:.3g}")
    return Wavepacket(psi.grid, out.psi / math.sqrt(weight)), weight


def detect(phi: Wavepacket, a: float, D: DetectorFunction, theta: float,
           branch: Wavepacket | None = None) -> Wavepacket:
    """psi_D(theta): beam split, then post-select on the detector outcome."""
    return apply_detector(beam_split(phi, a, theta, branch), D)[0]


def overlap_stats(phi: Wavepacket, a: float, D: DetectorFunction,
                  branch: Wavepacket | None = None) -> OverlapStats:
    """
    The overlap scalars of phi and T_a phi under D. ``branch`` may supply
    T_a phi exactly; otherwise it is computed by spectral shift.
    """
    if phi.grid != D.grid:
        raise GridMismatch("detector and wavepacket live on different grids")
    grid = phi.grid
    p0 = phi.psi
    p1 = _branch(phi, a, branch).psi
    d = D.values
    d2 = np.abs(d) ** 2

    def braket(u, op, v):
        return complex(integrate(np.conj(u) * op * v, grid))

    n0 = braket(p0, d2, p0).real
    n1 = braket(p1, d2, p1).real
    total = n0 + n1
    if total < NULL_TOL:
        raise NullOutcome("detector does not overlap either path")
    s = math.sqrt(total)
    return OverlapStats(
        n0=n0,
        n1=n1,
        r=2.0 * braket(p0, d2, p1) / total,
        z0=braket(p0, d, p0) / s,
        z1=braket(p1, d, p1) / s,
        z2=braket(p0, d, p1) / s,
        z3=braket(p1, d, p0) / s,
        t_overlap=braket(p0, 1.0, p1),
    )


def _which_way_parts(stats: OverlapStats) -> tuple[float, complex]:
    z0, z1, z2, z3 = stats.z0, stats.z1, stats.z2, stats.z3
    diff = abs(z0) ** 2 - abs(z1) ** 2 + abs(z2) ** 2 - abs(z3) ** 2
    cross = z0.conjugate() * z2 - z3.conjugate() * z1
    return diff, cross


def population_extrema(stats: OverlapStats) -> tuple[float, float]:
    """Phases maximizing and minimizing n(theta); (0, pi) when r = 0."""
    if stats.r == 0:
        return 0.0, math.pi
    arg = cmath.phase(stats.r)
    return (-arg) % (2 * math.pi), (math.pi - arg) % (2 * math.pi)


def which_way_theta(stats: OverlapStats, theta: float) -> float:
    """W~(theta) = |P0 - P1| for the post-selected state at interferometer phase theta."""
    rel = 1.0 + (cmath.exp(1j * theta) * stats.r).real
    if rel < 1e-12:
        raise OverlapSingularity(f"n(theta)/(n0+n1) = {rel:.3g}")
    diff, cross = _which_way_parts(stats)
    signed = (diff + 2.0 * (cmath.exp(1j * theta) * cross).real) / ((1.0 + abs(stats.t_overlap)) * rel)
    return abs(signed)


def which_way(stats: OverlapStats) -> float:
    """Mean of W~ at the two extrema of n(theta)."""
    if 1.0 - abs(stats.r) < 1e-12:
        raise OverlapSingularity("|r| -> 1: the paths are indistinguishable after detection")
    theta_max, theta_min = population_extrema(stats)
    return 0.5 * (which_way_theta(stats, theta_max) + which_way_theta(stats, theta_min))


def which_way_closed_form(stats: OverlapStats) -> float:
    """Closed-form mean over the extrema, absolute-valued.

    Agrees with :func:`which_way` whenever W~ has the same sign at both extrema.
    """
    r = stats.r
    if 1.0 - abs(r) < 1e-12:
        raise OverlapSingularity("|r| -> 1: the paths are indistinguishable after detection")
    diff, cross = _which_way_parts(stats)
    value = (diff - 2.0 * (r.conjugate() * cross).real) / ((1.0 + abs(stats.t_overlap)) * (1.0 - abs(r) ** 2))
    return 0.0 if abs(value) < 1e-10 else abs(value)


def fringe_closed_form(stats: OverlapStats, theta: float) -> float:
    """f(theta) expressed through the overlap scalars."""
    alpha = stats.z0 + stats.z3
    beta = stats.z1 + stats.z2
    e = cmath.exp(1j * theta)
    num = abs(alpha + e * beta) ** 2
    den = 2.0 * (1.0 + stats.t_overlap.real) * (1.0 + (e * stats.r).real)
    return num / den


def visibility(stats: OverlapStats) -> float:
    """Fringe visibility from the overlap scalars (no theta scan)."""
    alpha = stats.z0 + stats.z3
    beta = stats.z1 + stats.z2
    r = stats.r
    one_minus_r2 = 1.0 - abs(r) ** 2
    den = abs(alpha) ** 2 + abs(beta) ** 2 - 2.0 * (r * alpha * beta.conjugate()).real
    if one_minus_r2 <= 0.0:
        raise OverlapSingularity("|r| -> 1")
    # f_max + f_min = den / ((1 + Re t)(1 - |r|^2))
    if den / ((1.0 + stats.t_overlap.real) * one_minus_r2) < FRINGE_TOL:
        raise DegenerateFringe("fringe pattern vanishes")
    v2 = 1.0 - one_minus_r2 * (abs(alpha) ** 2 - abs(beta) ** 2) ** 2 / den**2
    return math.sqrt(min(max(v2, 0.0), 1.0))


class _Interferometer:
    """Cache of the theta-independent pieces used by repeated fringe evaluations."""

    def __init__(self, phi: Wavepacket, a: float, D: DetectorFunction, branch: Wavepacket | None = None):
        self.phi = phi
        self.D = D
        self.branch = _branch(phi, a, branch)
        self.target = beam_split(phi, a, 0.0, self.branch)

    def state(self, theta: float) -> Wavepacket:
        total = self.phi.psi + cmath.exp(1j * theta) * self.branch.psi
        return Wavepacket(self.phi.grid, total)

    def fringe(self, theta: float) -> float:
        psi_d, _ = apply_detector(self.state(theta), self.D)
        recombined = householder_apply(self.phi, self.target, psi_d, adjoint=True)
        return abs(inner_product(self.phi, recombined)) ** 2


def fringe(phi: Wavepacket, a: float, D: DetectorFunction, theta: float,
           branch: Wavepacket | None = None) -> float:
    """f(theta) = |<phi| U_BS^dagger(0) |psi_D(theta)>|^2."""
    return _Interferometer(phi, a, D, branch).fringe(theta)


def visibility_scan(phi: Wavepacket, a: float, D: DetectorFunction,
                    n_theta: int = 64, refine: bool = True,
                    branch: Wavepacket | None = None) -> tuple[float, float, float]:
    """
    Visibility from the fringe pattern itself.

    Scans ``n_theta`` equally spaced phases, then polishes the extrema with a
    bounded scalar minimization. Returns (V, theta_max, theta_min).
    """
    ifm = _Interferometer(phi, a, D, branch)
    thetas = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    values = np.array([ifm.fringe(t) for t in thetas])
    step = thetas[1] - thetas[0]

    def polish(i, sign):
        if not refine:
            return thetas[i], values[i]
        res = minimize_scalar(lambda t: sign * ifm.fringe(t),
                              bounds=(thetas[i] - step, thetas[i] + step),
                              method="bounded", options={"xatol": 1e-10})
        best = sign * res.fun
        if sign * best < sign * values[i]:
            return res.x % (2 * np.pi), best
        return thetas[i], values[i]

    t_max, f_max = polish(int(np.argmax(values)), -1.0)
    t_min, f_min = polish(int(np.argmin(values)), 1.0)
    if f_max + f_min < FRINGE_TOL:
        raise DegenerateFringe("fringe pattern vanishes")
    return (f_max - f_min) / (f_max + f_min), t_max, t_min


def duality_check(phi: Wavepacket, a: float, D: DetectorFunction,
                  branch: Wavepacket | None = None) -> DualityReport:
    stats = overlap_stats(phi, a, D, branch)
    W = which_way(stats)
    V = visibility(stats)
    theta_max, theta_min = population_extrema(stats)
    return DualityReport(W=W, V=V, duality=W**2 + V**2, theta_max=theta_max, theta_min=theta_min)


@dataclass(frozen=True)
class PovmTriple:
    p0: float
    p1: float
    p2: float
    # squared norm of the state's component outside span{phi, T_a phi}
    out_of_span: float

    @property
    def which_way(self) -> float:
        return abs(self.p0 - self.p1)

    @property
    def null_negative(self) -> bool:
        """Diagnostic: P2 is not positive outside the two-state span."""
        return self.p2 < -1e-12


class UnambiguousPovm:
    """
    Conclusive discrimination of phi and T_a phi with an inconclusive outcome.

    P0 = (1 - |phi><phi|) / (1 + |t|), P1 = (1 - |T_a phi><T_a phi|) / (1 + |t|),
    P2 = 1 - P0 - P1, where t = <phi|T_a phi>.
    """

    def __init__(self, phi: Wavepacket, a: float):
        self.phi = phi
        self.branch = shift(phi, a)
        self.t = inner_product(phi, self.branch)
        if 1.0 - abs(self.t) < 1e-12:
            raise IndistinguishableStates("<phi|T_a phi> has modulus 1")
        self._scale = 1.0 / (1.0 + abs(self.t))

    def apply(self, index: int, psi: Wavepacket) -> Wavepacket:
        if index == 2:
            p0 = self.apply(0, psi).psi
            p1 = self.apply(1, psi).psi
            return Wavepacket(psi.grid, psi.psi - p0 - p1)
        ref = {0: self.phi, 1: self.branch}[index]
        proj = inner_product(ref, psi) * ref.psi
        return Wavepacket(psi.grid, self._scale * (psi.psi - proj))

    def probabilities(self, state: Wavepacket) -> PovmTriple:
        norm2 = state.norm() ** 2
        q0 = abs(inner_product(self.phi, state)) ** 2
        q1 = abs(inner_product(self.branch, state)) ** 2
        p0 = self._scale * (norm2 - q0)
        p1 = self._scale * (norm2 - q1)
        return PovmTriple(p0=p0, p1=p1, p2=norm2 - p0 - p1, out_of_span=self._outside(state))

    def _outside(self, state: Wavepacket) -> float:
        # Gram-Schmidt on {phi, T_a phi}
        e1 = self.phi.psi
        v = self.branch.psi - self.t * e1
        nv = math.sqrt(abs(integrate(np.abs(v) ** 2, state.grid)))
        c1 = inner_product(self.phi, state)
        inside = abs(c1) ** 2
        if nv > 1e-12:
            e2 = Wavepacket(state.grid, v / nv)
            inside += abs(inner_product(e2, state)) ** 2
        return max(state.norm() ** 2 - inside, 0.0)


def povm_probabilities(phi: Wavepacket, a: float, state: Wavepacket) -> PovmTriple:
    return UnambiguousPovm(phi, a).probabilities(state)
