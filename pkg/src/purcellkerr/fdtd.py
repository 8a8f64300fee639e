"""2D TM finite-difference time-domain engine for dipole emission spectra.

Yee layout with Ez at integer nodes, Hx/Hy on half-step edges, natural
units c = mu0 = eps0 = 1, lengths in lattice constants and frequencies in
c/a (so phases are exp(2 pi i f t)).  The emission-rate spectrum of a
point dipole is obtained from the work the source current performs on its
own field, -Re[Ez(f) J*(f)], normalized by the same quantity from a vacuum
run on an identical grid so that discretization error largely divides out.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InstabilityError, NumericalError, ResidualEnergyWarning
from .geometry import RasterGrid, matching_uniform

COURANT_LIMIT_2D = 1.0 / math.sqrt(2.0)

# Gaussian envelope reaches 1e-8 of its peak this many widths from centre;
# the current is hard-zeroed beyond twice this (turn-off time).
_ENVELOPE_CUT = math.sqrt(2.0 * math.log(1e8))

_BLOWUP_LIMIT = 1e10
_CHECK_INTERVAL = 100
_RESIDUAL_TARGET = 1e-6


@dataclass(frozen=True)
class GaussianSource:
    """Gaussian-pulse point current J_z: amplitude, carrier and bandwidth.

    bandwidth is the Gaussian sigma of the spectral envelope in c/a units;
    the spectrum covers |f - center_frequency| <= 3.72 * bandwidth at the
    1e-3 relative amplitude level.
    """

    center_frequency: float
    bandwidth: float
    amplitude: float = 1.0
    delay: float = 0.0

    def __post_init__(self):
        if not self.center_frequency > 0:
            raise ValueError(f"center_frequency must be > 0, got {self.center_frequency}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.amplitude == 0:
            raise ValueError("amplitude must be nonzero")

    @property
    def width(self) -> float:
        """Temporal 1/e half-width of the envelope."""
        return 1.0 / (2.0 * math.pi * self.bandwidth)

    @property
    def peak_time(self) -> float:
        return self.delay + _ENVELOPE_CUT * self.width

    @property
    def turn_off_time(self) -> float:
        return self.delay + 2.0 * _ENVELOPE_CUT * self.width

    def current(self, t: float) -> float:
        if t >= self.turn_off_time or t < 0.0:
            return 0.0
        u = t - self.peak_time
        return (
            self.amplitude
            * math.cos(2.0 * math.pi * self.center_frequency * u)
            * math.exp(-(u * u) / (2.0 * self.width**2))
        )

    def envelope_spectrum(self, freqs):
        """Spectral envelope relative to its own peak (1 at the carrier)."""
        f = np.asarray(freqs, dtype=float)
        return np.exp(-((f - self.center_frequency) ** 2) / (2.0 * self.bandwidth**2))

    def covers(self, f_lo: float, f_hi: float, floor: float = 1e-3) -> bool:
        edge = float(min(self.envelope_spectrum(f_lo), self.envelope_spectrum(f_hi)))
        return edge >= floor


@dataclass(eq=False)
class FieldState:
    """Live field arrays of a running simulation (shared, not copied)."""

    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    time_step_index: int


def _cpml_coeffs(depth_frac, dt, sigma_max, alpha_max, m):
    """Recursive-convolution coefficients (b, a) for one axis profile."""
    d = np.asarray(depth_frac, dtype=float)
    sigma = sigma_max * d**m
    alpha = np.where(d > 0, alpha_max * (1.0 - d), 0.0)
    total = sigma + alpha
    b = np.exp(-total * dt)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(total > 0, sigma * (b - 1.0) / np.where(total > 0, total, 1.0), 0.0)
    return b, a


def _depth_profile(positions, n_total, npml):
    """Fractional PML depth (0 inside the working region, 1 at the walls)."""
    p = np.asarray(positions, dtype=float)
    left = np.maximum(npml - p, 0.0)
    right = np.maximum(p - (n_total - 1 - npml), 0.0)
    return (left + right) / npml


class TmSolver:
    """Leapfrog TM update (Hx, Hy then Ez) with CPML or PEC boundaries."""

    def __init__(
        self,
        grid: RasterGrid,
        courant: float = 0.5,
        pml_thickness: float = 1.0,
        boundary: str = "pml",
        pml_m: int = 3,
        pml_sigma_factor: float = 0.8,
        pml_alpha_max: float = 0.1,
    ):
        if not 0 < courant < COURANT_LIMIT_2D:
            raise ValueError(
                f"courant factor must lie in (0, 1/sqrt(2)) for 2D stability, got {courant}"
            )
        if boundary not in ("pml", "pec"):
            raise ValueError(f"boundary must be 'pml' or 'pec', got {boundary!r}")
        self.grid = grid
        self.dx = grid.dx
        self.dt = courant * self.dx
        self.courant = courant
        self.boundary = boundary
        nx, ny = grid.eps.shape

        self.ez = np.zeros((nx, ny))
        self.hx = np.zeros((nx, ny - 1))
        self.hy = np.zeros((nx - 1, ny))
        self.n = 0
        self._inv_dx = 1.0 / self.dx
        self._dt_over_eps = self.dt / grid.eps[1:-1, 1:-1]
        i0, j0 = grid.source_index
        self._src = (i0, j0)
        self._src_coeff = self.dt / grid.eps[i0, j0]

        if boundary == "pml":
            npml = int(round(pml_thickness * grid.resolution))
            if npml < 4:
                raise ValueError(
                    f"PML of {pml_thickness} lattice units is only {npml} cells at "
                    f"this resolution; need at least 4"
                )
            if 2 * npml >= min(nx, ny) - 2:
                raise ValueError("PML regions overlap; enlarge the grid padding")
            self.npml = npml
            # boundary-medium index sets the absorption strength scale
            edge = np.concatenate([grid.eps[0, :], grid.eps[-1, :], grid.eps[:, 0], grid.eps[:, -1]])
            n_edge = math.sqrt(float(np.median(edge)))
            sigma_max = pml_sigma_factor * (pml_m + 1) / (self.dx * n_edge)

            def coeffs(positions, n_total):
                d = _depth_profile(positions, n_total, npml)
                return _cpml_coeffs(d, self.dt, sigma_max, pml_alpha_max, pml_m)

            be, ae = coeffs(np.arange(1, nx - 1), nx)
            self._b_e_x, self._a_e_x = be[:, None], ae[:, None]
            be, ae = coeffs(np.arange(1, ny - 1), ny)
            self._b_e_y, self._a_e_y = be[None, :], ae[None, :]
            bh, ah = coeffs(np.arange(nx - 1) + 0.5, nx)
            self._b_h_x, self._a_h_x = bh[:, None], ah[:, None]
            bh, ah = coeffs(np.arange(ny - 1) + 0.5, ny)
            self._b_h_y, self._a_h_y = bh[None, :], ah[None, :]

            self._psi_hx = np.zeros((nx, ny - 1))
            self._psi_hy = np.zeros((nx - 1, ny))
            self._psi_ez_x = np.zeros((nx - 2, ny - 2))
            self._psi_ez_y = np.zeros((nx - 2, ny - 2))

    @property
    def state(self) -> FieldState:
        return FieldState(ez=self.ez, hx=self.hx, hy=self.hy, time_step_index=self.n)

    def step(self, source_current: float = 0.0) -> None:
        """Advance one leapfrog update, injecting the given current at the
        source cell during the Ez half of the step."""
        ez, hx, hy = self.ez, self.hx, self.hy
        pml = self.boundary == "pml"

        dez_y = (ez[:, 1:] - ez[:, :-1]) * self._inv_dx
        dez_x = (ez[1:, :] - ez[:-1, :]) * self._inv_dx
        if pml:
            self._psi_hx *= self._b_h_y
            self._psi_hx += self._a_h_y * dez_y
            self._psi_hy *= self._b_h_x
            self._psi_hy += self._a_h_x * dez_x
            hx -= self.dt * (dez_y + self._psi_hx)
            hy += self.dt * (dez_x + self._psi_hy)
        else:
            hx -= self.dt * dez_y
            hy += self.dt * dez_x

        dhy_x = (hy[1:, 1:-1] - hy[:-1, 1:-1]) * self._inv_dx
        dhx_y = (hx[1:-1, 1:] - hx[1:-1, :-1]) * self._inv_dx
        if pml:
            self._psi_ez_x *= self._b_e_x
            self._psi_ez_x += self._a_e_x * dhy_x
            self._psi_ez_y *= self._b_e_y
            self._psi_ez_y += self._a_e_y * dhx_y
            ez[1:-1, 1:-1] += self._dt_over_eps * (
                dhy_x + self._psi_ez_x - dhx_y - self._psi_ez_y
            )
        else:
            ez[1:-1, 1:-1] += self._dt_over_eps * (dhy_x - dhx_y)
        if source_current != 0.0:
            ez[self._src] -= self._src_coeff * source_current
        self.n += 1

    def check_stability(self) -> None:
        m = float(np.abs(self.ez).max())
        if not math.isfinite(m) or m > _BLOWUP_LIMIT:
            raise InstabilityError(
                f"field blow-up at step {self.n}: max |Ez| = {m:.3e} "
                f"(courant = {self.courant})"
            )

    def energy(self) -> float:
        """Instantaneous field energy sum(eps Ez^2 + Hx^2 + Hy^2) / 2."""
        return 0.5 * (
            float(np.sum(self.grid.eps * self.ez**2))
            + float(np.sum(self.hx**2))
            + float(np.sum(self.hy**2))
        )


@dataclass(frozen=True, eq=False)
class DipoleRecord:
    """On-the-fly Fourier transforms of the source-point field and current."""

    frequencies: np.ndarray
    ez_dft: np.ndarray
    j_dft: np.ndarray
    source: GaussianSource
    dt: float
    n_steps: int
    resolution: int
    grid_shape: tuple[int, int]
    grid_hash: str
    runtime: float
    peak_energy: float
    final_energy: float

    @property
    def residual_ratio(self) -> float:
        if self.peak_energy <= 0:
            return 0.0
        return self.final_energy / self.peak_energy


@dataclass(frozen=True, eq=False)
class PurcellSpectrum:
    """Frequency-resolved emission-rate ratio of structure to vacuum."""

    frequencies: np.ndarray
    gamma_ratio: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = self.frequencies
        if f.ndim != 1 or f.size < 2 or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        g = self.gamma_ratio
        if g.shape != f.shape:
            raise ValueError("gamma_ratio shape must match frequencies")
        if np.any(~np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gamma_ratio must be finite and >= 0")


def run_dipole(
    grid: RasterGrid,
    source: GaussianSource,
    runtime: float,
    frequencies: np.ndarray,
    *,
    courant: float = 0.5,
    pml_thickness: float = 1.0,
    residual_target: float = _RESIDUAL_TARGET,
) -> DipoleRecord:
    """Pulse a point dipole and record Ez(f) and J(f) at the source cell.

    runtime counts simulated time (in a/c) after the source turns off.
    Emits ResidualEnergyWarning if the field energy has not decayed below
    residual_target of its peak by the end of the run (slow in-gap
    ringing); the spectra are still returned.
    """
    if runtime <= 0:
        raise ValueError(f"runtime must be > 0, got {runtime}")
    freqs = np.asarray(frequencies, dtype=float)
    solver = TmSolver(grid, courant=courant, pml_thickness=pml_thickness)
    dt = solver.dt
    n_steps = int(math.ceil((source.turn_off_time + runtime) / dt))

    ez_dft = np.zeros(freqs.size, dtype=complex)
    j_dft = np.zeros(freqs.size, dtype=complex)
    two_pi_f = 2.0 * math.pi * freqs
    src = grid.source_index
    peak_energy = 0.0

    for n in range(n_steps):
        t_mid = (n + 0.5) * dt
        j_val = source.current(t_mid)
        solver.step(j_val)
        ez_dft += solver.ez[src] * np.exp((2j * math.pi * (n + 1) * dt) * freqs) * dt
        if j_val != 0.0:
            j_dft += j_val * np.exp(1j * two_pi_f * t_mid) * dt
        if (n + 1) % _CHECK_INTERVAL == 0 or n + 1 == n_steps:
            solver.check_stability()
            peak_energy = max(peak_energy, solver.energy())

    final_energy = solver.energy()
    if peak_energy > 0 and final_energy > residual_target * peak_energy:
        warnings.warn(
            f"residual field energy {final_energy / peak_energy:.3e} of peak exceeds "
            f"{residual_target:.1e}; spectrum may be broadened by truncated ringing",
            ResidualEnergyWarning,
            stacklevel=2,
        )
    return DipoleRecord(
        frequencies=freqs,
        ez_dft=ez_dft,
        j_dft=j_dft,
        source=source,
        dt=dt,
        n_steps=n_steps,
        resolution=grid.resolution,
        grid_shape=grid.eps.shape,
        grid_hash=grid.geometry_hash,
        runtime=runtime,
        peak_energy=peak_energy,
        final_energy=final_energy,
    )


def ldos_ratio(
    structure: DipoleRecord,
    vacuum: DipoleRecord,
    *,
    source_floor: float = 1e-3,
    metadata: dict | None = None,
) -> PurcellSpectrum:
    """Emission-rate spectrum: ratio of source-point work in the two runs.

    Frequencies where the source spectral amplitude is below source_floor
    of its in-band peak are dropped.  Raises NumericalError if the vacuum
    work is non-positive anywhere in the kept band.
    """
    if structure.grid_shape != vacuum.grid_shape or structure.resolution != vacuum.resolution:
        raise ValueError("structure and vacuum runs must use identical grids")
    if structure.dt != vacuum.dt or structure.n_steps != vacuum.n_steps:
        raise ValueError("structure and vacuum runs must use identical time stepping")
    if structure.source != vacuum.source:
        raise ValueError("structure and vacuum runs must use identical sources")
    if not np.array_equal(structure.frequencies, vacuum.frequencies):
        raise ValueError("structure and vacuum runs must use identical analysis frequencies")

    freqs = structure.frequencies
    env = structure.source.envelope_spectrum(freqs)
    keep = env >= source_floor * env.max()
    work_s = -np.real(structure.ez_dft * np.conj(structure.j_dft))[keep]
    work_v = -np.real(vacuum.ez_dft * np.conj(vacuum.j_dft))[keep]
    if np.any(work_v <= 0):
        bad = freqs[keep][work_v <= 0]
        raise NumericalError(
            f"vacuum radiated work is non-positive at {bad.size} analysis "
            f"frequencies (first: {bad[0]:.6g} c/a); run is unusable for normalization"
        )
    ratio = np.clip(work_s / work_v, 0.0, None)
    meta = {
        "resolution": structure.resolution,
        "runtime": structure.runtime,
        "geometry_hash": structure.grid_hash,
        "vacuum_hash": vacuum.grid_hash,
        "n_steps": structure.n_steps,
        "dt": structure.dt,
        "source_center_frequency": structure.source.center_frequency,
        "source_bandwidth": structure.source.bandwidth,
        "structure_residual": structure.residual_ratio,
        "vacuum_residual": vacuum.residual_ratio,
    }
    if metadata:
        meta.update(metadata)
    return PurcellSpectrum(frequencies=freqs[keep], gamma_ratio=ratio, metadata=meta)


def detect_gap(spectrum: PurcellSpectrum, threshold: float) -> tuple[float, float] | None:
    """Widest contiguous frequency window with gamma_ratio < threshold.

    Window edges are linearly interpolated at the threshold crossings.
    Returns None when no sample is below threshold.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    f = spectrum.frequencies
    g = spectrum.gamma_ratio
    below = g < threshold
    if not below.any():
        return None

    def crossing(i_out, i_in):
        # interpolate f where g crosses threshold between adjacent samples
        g0, g1 = g[i_out], g[i_in]
        if g1 == g0:
            return f[i_in]
        return f[i_out] + (threshold - g0) * (f[i_in] - f[i_out]) / (g1 - g0)

    best = None
    i = 0
    n = f.size
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        lo = f[0] if i == 0 else crossing(i - 1, i)
        hi = f[-1] if j == n - 1 else crossing(j + 1, j)
        if best is None or hi - lo > best[1] - best[0]:
            best = (float(lo), float(hi))
        i = j + 1
    return best


def compute_purcell_spectrum(
    grid: RasterGrid,
    source: GaussianSource,
    runtime: float,
    frequencies: np.ndarray,
    *,
    courant: float = 0.5,
    pml_thickness: float = 1.0,
    threads: int = 1,
    metadata: dict | None = None,
) -> PurcellSpectrum:
    """Structure run plus matching vacuum run, combined into a spectrum."""
    vacuum_grid = matching_uniform(grid, 1.0)

    def job(g):
        return run_dipole(
            g, source, runtime, frequencies, courant=courant, pml_thickness=pml_thickness
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut_s = pool.submit(job, grid)
            fut_v = pool.submit(job, vacuum_grid)
            rec_s, rec_v = fut_s.result(), fut_v.result()
    else:
        rec_s, rec_v = job(grid), job(vacuum_grid)
    return ldos_ratio(rec_s, rec_v, metadata=metadata)
