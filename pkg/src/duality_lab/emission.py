"""
Spontaneous emission as a generalized position measurement.

``simulate_discrete_modes`` gives the exact dynamics of a two-level atom
coupled to a finite set of plane-wave modes (one excitation, atom position
frozen). ``detector_function_farfield`` evaluates the long-time
Wigner-Weisskopf detector function as a transverse k-integral over the
detector mode eta(k); the thin-lens closed forms summarise its result.

Lengths and times may use any consistent units, except that the far-field
routine needs SI for the speed of light.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import EmissionIncomplete, WindowTooNarrow
from .interferometry import DetectorFunction, DualityReport, detect, duality_check, overlap_stats
from .wavefield import GaussianParams, Grid, expectation_T, make_gaussian

COMPLETION_THRESHOLD = 10.0


@dataclass(frozen=True, eq=False)
class ModeSet:
    """
    Plane-wave modes E_n(x) = amplitude_n * exp(i k_n x) with frequencies
    omega_n, and the detector mode b = sum_n eta_n^* a_n.
    """

    omega: np.ndarray
    amplitude: np.ndarray
    wavenumber: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        amp = np.broadcast_to(np.asarray(self.amplitude, dtype=complex), omega.shape).copy()
        k = np.broadcast_to(np.asarray(self.wavenumber, dtype=float), omega.shape).copy()
        eta = np.broadcast_to(np.asarray(self.eta, dtype=complex), omega.shape).copy()
        if np.any(omega <= 0):
            raise ValueError("mode frequencies must be positive")
        if abs(np.sum(np.abs(eta) ** 2) - 1.0) > 1e-10:
            raise ValueError("detector mode coefficients must be normalized")
        for name, arr in (("omega", omega), ("amplitude", amp), ("wavenumber", k), ("eta", eta)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def build(cls, omega, amplitude, wavenumber=0.0, eta=None) -> "ModeSet":
        """Like the constructor, but normalizes ``eta`` (uniform if omitted)."""
        omega = np.asarray(omega, dtype=float)
        eta = np.ones_like(omega, dtype=complex) if eta is None else np.asarray(eta, dtype=complex)
        eta = eta / np.sqrt(np.sum(np.abs(eta) ** 2))
        return cls(omega, amplitude, wavenumber, eta)

    def __len__(self):
        return self.omega.size

    def field(self, x: np.ndarray) -> np.ndarray:
        """E_n(x), shape (n_modes, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.amplitude[:, None] * np.exp(1j * self.wavenumber[:, None] * x[None, :])


@dataclass(frozen=True)
class EmissionConfig:
    omega_a: float
    gamma: float
    d_eg: complex = 1.0
    t: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("decay rate must be positive")

    @property
    def completed(self) -> bool:
        return self.gamma * self.t > COMPLETION_THRESHOLD


@dataclass(frozen=True)
class ThinLensConfig:
    focal_length: float
    lens_radius: float
    detector_width: float
    k0: float

    def __post_init__(self):
        for name in ("focal_length", "lens_radius", "detector_width", "k0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lens_radius / self.focal_length >= 1.0:
            raise ValueError("paraxial model needs lens_radius < focal_length")

    @property
    def w_min(self) -> float:
        """Diffraction floor 2f / (k0 L)."""
        return 2.0 * self.focal_length / (self.k0 * self.lens_radius)


@dataclass(frozen=True)
class ThinLensDetector:
    """D(x) ~ exp(-x^2 / (2 w_eff^2) + i (k0/f) delta_phi x^2 / 2)."""

    w_eff: float
    delta_phi: float
    w_min: float = 0.0

    def phase_coefficient(self, cfg: ThinLensConfig) -> float:
        return cfg.k0 * self.delta_phi / (2.0 * cfg.focal_length)

    def values(self, x: np.ndarray, cfg: ThinLensConfig | None = None) -> np.ndarray:
        kappa = 0.0 if cfg is None else self.phase_coefficient(cfg)
        return np.exp(-(x**2) / (2.0 * self.w_eff**2) + 1j * kappa * x**2)

    def detector_function(self, grid: Grid, cfg: ThinLensConfig | None = None,
                          length_unit: float = 1.0) -> DetectorFunction:
        """Sample D on ``grid`` whose coordinates are in units of ``length_unit``."""
        return DetectorFunction(grid, self.values(grid.x * length_unit, cfg))


# ---------------------------------------------------------------------------
# discrete modes


@dataclass(frozen=True, eq=False)
class DiscreteModeSolution:
    t: np.ndarray
    psi_e: np.ndarray  # (n_t, n_x)
    psi_n: np.ndarray  # (n_t, n_modes, n_x)

    def total_probability(self) -> np.ndarray:
        """|psi_e|^2 + sum_n |psi_n|^2 at every (t, x)."""
        return np.abs(self.psi_e) ** 2 + np.sum(np.abs(self.psi_n) ** 2, axis=1)


def _hamiltonian(modes: ModeSet, cfg: EmissionConfig) -> np.ndarray:
    m = len(modes)
    h = np.zeros((m + 1, m + 1), dtype=complex)
    h[0, 0] = cfg.omega_a
    h[np.arange(1, m + 1), np.arange(1, m + 1)] = modes.omega
    h[0, 1:] = -cfg.d_eg * modes.amplitude
    h[1:, 0] = np.conj(h[0, 1:])
    return h


def mode_amplitudes(modes: ModeSet, cfg: EmissionConfig, t_grid) -> tuple[np.ndarray, np.ndarray]:
    """
    Excited-state and one-photon amplitudes for an atom at x = 0 that starts
    excited. Returns (c_e(t), c_n(t)) with shapes (n_t,) and (n_t, n_modes).

    The system is linear with a time-independent Hermitian generator, so it
    is propagated exactly through its eigendecomposition.
    """
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    evals, evecs = np.linalg.eigh(_hamiltonian(modes, cfg))
    weights = np.conj(evecs[0, :])
    amps = (evecs[None, :, :] * (np.exp(-1j * np.outer(t, evals)) * weights)[:, None, :]).sum(axis=2)
    return amps[:, 0], amps[:, 1:]


def simulate_discrete_modes(modes: ModeSet, cfg: EmissionConfig, psi0, x, t_grid) -> DiscreteModeSolution:
    """
    Solve i dpsi_e/dt = omega_A psi_e - d sum_n E_n(x) psi_n,
          i dpsi_n/dt = omega_n psi_n - d^* E_n^*(x) psi_e
    with psi_e(x, 0) = psi0(x), psi_n(x, 0) = 0.

    Atom positions decouple. For plane-wave modes the generator at x is the
    one at x = 0 conjugated by the diagonal phases exp(-i k_n x), so
    psi_n(x, t) = c_n(t) exp(-i k_n x) psi0(x).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi0 = np.broadcast_to(np.asarray(psi0, dtype=complex), x.shape)
    ce, cn = mode_amplitudes(modes, cfg, t_grid)
    phases = np.exp(-1j * modes.wavenumber[:, None] * x[None, :])
    psi_e = ce[:, None] * psi0[None, :]
    psi_n = cn[:, :, None] * phases[None, :, :] * psi0[None, None, :]
    return DiscreteModeSolution(np.atleast_1d(np.asarray(t_grid, dtype=float)), psi_e, psi_n)


def uniform_comb(omega_a: float, gamma: float, n_modes: int = 401, half_span: float = 20.0,
                 d_eg: float = 1.0) -> tuple[ModeSet, EmissionConfig]:
    """
    Equally spaced modes over omega_a +- half_span*gamma with a common coupling
    chosen so the golden-rule rate 2 pi |d E|^2 / spacing equals ``gamma``.
    """
    omega = omega_a + gamma * np.linspace(-half_span, half_span, n_modes)
    spacing = omega[1] - omega[0]
    amplitude = math.sqrt(gamma * spacing / (2 * math.pi)) / abs(d_eg)
    modes = ModeSet.build(omega, amplitude)
    return modes, EmissionConfig(omega_a=omega_a, gamma=gamma, d_eg=d_eg)


def golden_rule_rate(d_eg: complex, amplitude: complex, spacing: float) -> float:
    return 2 * math.pi * abs(d_eg * amplitude) ** 2 / spacing


def fit_decay_rate(t, excited_population, window: tuple[float, float]) -> float:
    """Least-squares slope of -log|psi_e|^2 over ``window``."""
    t = np.asarray(t)
    p = np.asarray(excited_population)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 3:
        raise ValueError("fit window holds fewer than three samples")
    slope, _ = np.polyfit(t[sel], np.log(p[sel]), 1)
    return -slope


def wigner_weisskopf_amplitudes(modes: ModeSet, cfg: EmissionConfig, t: float) -> np.ndarray:
    """
    One-photon amplitudes at x = 0 with the excited state decaying as
    exp(-i omega_A t - gamma t / 2) (Lamb shift absorbed into omega_A).
    """
    e_star = np.conj(cfg.d_eg * modes.amplitude)
    detuning = modes.omega - cfg.omega_a + 0.5j * cfg.gamma
    return e_star * (np.exp(-1j * cfg.omega_a * t - 0.5 * cfg.gamma * t)
                     - np.exp(-1j * modes.omega * t)) / detuning


def discrete_detector_function(modes: ModeSet, cfg: EmissionConfig, grid: Grid,
                               amplitudes: np.ndarray | None = None) -> DetectorFunction:
    """
    D(x) = sum_n eta_n^* psi_n(x, t) / psi0(x), rescaled to max |D| = 1.

    ``amplitudes`` overrides the exact c_n(t), e.g. with the Wigner-Weisskopf ones.
    """
    if amplitudes is None:
        _, cn = mode_amplitudes(modes, cfg, [cfg.t])
        amplitudes = cn[0]
    coeff = np.conj(modes.eta) * amplitudes
    values = np.exp(-1j * np.outer(grid.x, modes.wavenumber)) @ coeff
    peak = np.max(np.abs(values))
    return DetectorFunction(grid, values / peak if peak > 0 else values)


# ---------------------------------------------------------------------------
# far field and the thin lens


@dataclass(frozen=True)
class GaussianEta:
    """eta(k) = exp(-S k^2 / 2) for complex S with Re S > 0."""

    S: complex

    def __post_init__(self):
        if complex(self.S).real <= 0:
            raise ValueError("eta must decay: Re S > 0")

    def __call__(self, k):
        return np.exp(-0.5 * self.S * np.asarray(k) ** 2)

    @property
    def k_width(self) -> float:
        """k at which |eta| has fallen by exp(-1/2)."""
        return 1.0 / math.sqrt(complex(self.S).real)


def lens_transfer(k, k_prime, cfg: ThinLensConfig):
    """Gaussian-aperture thin-lens kernel M(k, k')."""
    P = 1.0 / cfg.lens_radius**2 - 1j * cfg.k0 / cfg.focal_length
    return np.exp(-0.5 * (np.asarray(k) - np.asarray(k_prime)) ** 2 / P)


def thin_lens_eta(cfg: ThinLensConfig, detector_propagation: bool = False,
                  perfect_lens: bool = False) -> GaussianEta:
    """
    Detector mode exp(-w^2 k^2 / 2) seen through the lens kernel.

    By default the composition ignores the free propagation between lens and
    detector, which gives exp(-(k^2/2) (1/L^2 + 1/w^2 - i k0/f)^-1). With
    ``detector_propagation=True`` the detector mode is first carried back
    over the lens-detector distance 2f, i.e. w^2 -> w^2 - 2 i f / k0; this is
    the variant whose far-field integral reproduces the imaging closed form.
    ``perfect_lens`` removes the aperture (L -> infinity).
    """
    f, L, w, k0 = cfg.focal_length, cfg.lens_radius, cfg.detector_width, cfg.k0
    lens = (0.0 if perfect_lens else 1.0 / L**2) - 1j * k0 / f
    detector = w**2 - (2j * f / k0 if detector_propagation else 0.0)
    return GaussianEta(1.0 / (lens + 1.0 / detector))


def thin_lens_detector(cfg: ThinLensConfig, perfect_lens: bool = False) -> ThinLensDetector:
    """
    Small-detector closed forms: w_eff^2 = 4 f^2/(k0 L)^2 + w^2 and
    delta_phi = 1/2 + (k0 L w / f)^4 / 32. A perfect lens drops the
    diffraction term, leaving w_eff = w.
    """
    f, L, w, k0 = cfg.focal_length, cfg.lens_radius, cfg.detector_width, cfg.k0
    w_min = 0.0 if perfect_lens else cfg.w_min
    w_eff = math.sqrt(w_min**2 + w**2)
    delta_phi = 0.5 + k0**4 * L**4 * w**4 / (32.0 * f**4)
    return ThinLensDetector(w_eff=w_eff, delta_phi=delta_phi, w_min=w_min)


def imaging_detector(cfg: ThinLensConfig, perfect_lens: bool = False) -> ThinLensDetector:
    """
    Exact Gaussian parameters of D for the 2f-2f arrangement (atom at 0,
    Gaussian-aperture lens at 2f, detector mode of width w at 4f). Reduces to
    :func:`thin_lens_detector` when w << 2f/(k0 L).
    """
    f, w, k0 = cfg.focal_length, cfg.detector_width, cfg.k0
    alpha = 1.0 / (2.0 * w**2) - 1j * k0 / (4.0 * f)
    if perfect_lens:
        q = alpha
    else:
        beta = 1.0 / (2.0 * cfg.w_min**2)
        q = alpha * beta / (alpha + beta)
    q -= 1j * k0 / (4.0 * f)
    return ThinLensDetector(w_eff=1.0 / math.sqrt(2.0 * q.real),
                            delta_phi=-2.0 * f * q.imag / k0,
                            w_min=0.0 if perfect_lens else cfg.w_min)


def heisenberg_resolution(cfg: ThinLensConfig) -> float:
    """lambda / (2 sin alpha) with sin alpha ~ L / f."""
    wavelength = 2 * math.pi / cfg.k0
    return wavelength / (2.0 * cfg.lens_radius / cfg.focal_length)


def _outside_mass(eta, k_max: float) -> float:
    k = np.linspace(-6 * k_max, 6 * k_max, 24001)
    dens = np.abs(eta(k)) ** 2
    total = np.trapezoid(dens, k)
    inside = np.trapezoid(np.where(np.abs(k) <= k_max, dens, 0.0), k)
    return float((total - inside) / total) if total > 0 else 0.0


def farfield_integral(eta: Callable, x: np.ndarray, k0: float, t: float, k_max: float,
                      n_k: int, prefactor: Callable | None = None) -> np.ndarray:
    """sum over a uniform k grid of eta^*(k) exp(-i k x) exp(-i c k^2 t / (2 k0)) [* prefactor]."""
    k = np.linspace(-k_max, k_max, n_k)
    dk = k[1] - k[0]
    weights = np.full(n_k, dk)
    weights[[0, -1]] *= 0.5
    g = np.conj(eta(k)) * np.exp(-1j * C_LIGHT * t * k**2 / (2.0 * k0)) * weights
    if prefactor is not None:
        g = g * prefactor(k)
    out = np.empty(x.size, dtype=complex)
    chunk = max(1, 2**22 // n_k)
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        out[start:start + chunk] = np.exp(-1j * np.outer(xs, k)) @ g
    return out


def detector_function_farfield(eta: Callable, cfg: EmissionConfig, grid: Grid, k_max: float | None = None,
                               k0: float | None = None, length_unit: float = 1.0,
                               exact_prefactor: bool = False, rtol: float = 1e-10) -> DetectorFunction:
    """
    Long-time detector function as a transverse k-integral.

    Paraxial frequencies omega_k = c k0 + c k^2 / (2 k0) enter the
    exponential; the factor sqrt(omega_k) / (omega_k - omega_A + i gamma/2)
    is treated as constant unless ``exact_prefactor``. Grid coordinates are
    in units of ``length_unit`` metres. The result is rescaled to max |D| = 1.
    The number of k nodes is doubled until the result changes by less than
    ``rtol`` relative to its peak.
    """
    if not cfg.completed:
        raise EmissionIncomplete(f"gamma*t = {cfg.gamma * cfg.t:.3g} <= {COMPLETION_THRESHOLD}")
    if k0 is None:
        k0 = cfg.omega_a / C_LIGHT
    if k_max is None:
        k_max = 8.0 * eta.k_width
    outside = _outside_mass(eta, k_max)
    if outside > 1e-8:
        raise WindowTooNarrow(f"{outside:.3g} of |eta|^2 lies outside |k| <= {k_max:.4g}")
    def lineshape(k):
        omega_k = C_LIGHT * k0 + C_LIGHT * k**2 / (2 * k0)
        return np.sqrt(omega_k) / (omega_k - cfg.omega_a + 0.5j * cfg.gamma)

    prefactor = lineshape if exact_prefactor else None

    x = grid.x * length_unit
    n_k = 1025
    values = farfield_integral(eta, x, k0, cfg.t, k_max, n_k, prefactor)
    while True:
        n_k = 2 * n_k - 1
        finer = farfield_integral(eta, x, k0, cfg.t, k_max, n_k, prefactor)
        change = np.max(np.abs(finer - values)) / np.max(np.abs(finer))
        values = finer
        if change < rtol or n_k > 2**20:
            break
    return DetectorFunction(grid, values / np.max(np.abs(values)))


def detector_relative_error(D: DetectorFunction, reference: np.ndarray, mask: np.ndarray) -> float:
    """Max |D - c ref| / |c ref| over ``mask``, with the best complex scale c."""
    d = D.values[mask]
    ref = reference[mask]
    scale = np.vdot(ref, d) / np.vdot(ref, ref)
    return float(np.max(np.abs(d - scale * ref) / np.abs(scale * ref)))


def thin_lens_WV(a: float, det: ThinLensDetector) -> tuple[float, float]:
    """W = tanh(a^2 / 2 w_eff^2), V = 2 / (1 + exp(a^2 / w_eff^2))."""
    u = (a / det.w_eff) ** 2
    return math.tanh(u / 2.0), 2.0 / (1.0 + math.exp(u)) if u < 700 else 0.0


def thin_lens_V_no(a: float, det: ThinLensDetector) -> float:
    """
    2|D(0)||D(a)| / (|D(0)|^2 + |D(a)|^2) = sech(a^2 / 2 w_eff^2): the
    non-overlapping visibility evaluated for the thin-lens detector.
    """
    u = (a / det.w_eff) ** 2
    return 1.0 / math.cosh(u / 2.0) if u < 1400 else 0.0


def thin_lens_modular(a: float, det: ThinLensDetector, cfg: ThinLensConfig) -> complex:
    """<T_a> = exp(-u/2) exp(-i a^2 k0 delta_phi / 2f) / (1 + exp(-u)), u = a^2/w_eff^2."""
    u = (a / det.w_eff) ** 2
    phase = -(a**2) * cfg.k0 * det.delta_phi / (2.0 * cfg.focal_length)
    return math.exp(-u / 2.0) / (1.0 + math.exp(-u)) * complex(math.cos(phase), math.sin(phase))


@dataclass(frozen=True)
class PipelinePoint:
    a: float
    report: DualityReport
    t_modulus: float
    t_overlap: float


def thin_lens_pipeline(a: float, det: ThinLensDetector, cfg: ThinLensConfig | None = None,
                       w_phi: float | None = None) -> PipelinePoint:
    """
    W, V and |<T_a>| from the full quadrature pipeline: Gaussian packet of
    width ``w_phi`` (default w_eff/100) at the origin, second path at ``a``,
    thin-lens detector function (with its wavefront phase when ``cfg`` is
    given). Lengths are physical; the grid is laid out in units of w_eff.
    """
    unit = det.w_eff
    w = (w_phi if w_phi is not None else det.w_eff / 100.0) / unit
    s = a / unit
    grid = Grid.covering(centers=(0.0, s, 2 * s), widths=(w, w, w), resolve=(1.0,))
    phi = make_gaussian(GaussianParams(0.0, w), grid)
    D = det.detector_function(grid, cfg, length_unit=unit)
    report = duality_check(phi, s, D)
    stats = overlap_stats(phi, s, D)
    psi_d = detect(phi, s, D, report.theta_max)
    return PipelinePoint(a=a, report=report, t_modulus=abs(expectation_T(psi_d, s)),
                         t_overlap=abs(stats.t_overlap))


def reference_lens_config() -> ThinLensConfig:
    """k0 = 1e7 /m, L = 5 cm, f = 20 cm, w = 30 um."""
    return ThinLensConfig(focal_length=0.20, lens_radius=0.05, detector_width=30e-6, k0=1e7)


__all__ = [
    "ModeSet", "EmissionConfig", "ThinLensConfig", "ThinLensDetector", "DiscreteModeSolution",
    "simulate_discrete_modes", "mode_amplitudes", "uniform_comb", "golden_rule_rate",
    "fit_decay_rate", "wigner_weisskopf_amplitudes", "discrete_detector_function",
    "GaussianEta", "lens_transfer", "thin_lens_eta", "farfield_integral", "thin_lens_detector", "imaging_detector",
    "heisenberg_resolution", "detector_function_farfield", "detector_relative_error",
    "thin_lens_WV", "thin_lens_V_no", "thin_lens_modular", "reference_lens_config", "PipelinePoint",
    "thin_lens_pipeline",
]
