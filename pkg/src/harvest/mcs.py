"""Monte Carlo simulation of the original coupled delayed stochastic system.

Semi-implicit Euler stepping of displacement, velocity and harvested voltage
with the colored noise advanced by its exact one-step update, delayed feedback read
from ring buffers with linear interpolation, and ensemble estimators for the
mean output power, RMS voltage, conversion efficiency, stationary histogram
and a periodogram-based SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .averaging import DensityField, GridSpec
from .errors import ParameterError
from .model import ExcitationParams, NoiseParams, SystemParams

_CHUNK = 16384


@dataclass(frozen=True)
class PsdSettings:
    """Spectral-estimation settings for the periodogram SNR.

    segment_time is the length of each periodogram segment in time units; it
    must cover at least ten periods of the periodic excitation.
    """

    segment_time: float
    overlap: float = 0.5
    n_bootstrap: int = 200

    def __post_init__(self):
        if not self.segment_time > 0:
            raise ParameterError("segment_time must be > 0")
        if not 0.0 <= self.overlap < 1.0:
            raise ParameterError("overlap must lie in [0, 1)")
        if self.n_bootstrap < 10:
            raise ParameterError("n_bootstrap must be >= 10")


@dataclass(frozen=True)
class SimConfig:
    """Integration and ensemble settings for the Monte Carlo runs."""

    dt: float
    t_total: float
    t_transient: float | None = None
    n_traj: int = 100
    seed: int = 0
    x0: float | None = None
    v0: float = 0.0
    V0: float = 0.0
    grid: GridSpec = field(
        default_factory=lambda: GridSpec(nx=64, nv=64)
    )
    psd: PsdSettings | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not self.t_total > 0:
            raise ParameterError(f"t_total must be > 0, got {self.t_total}")
        if self.t_transient is not None and not 0 <= self.t_transient < self.t_total:
            raise ParameterError("t_transient must lie in [0, t_total)")
        if self.n_traj < 1:
            raise ParameterError("n_traj must be >= 1")

    def resolved_transient(self, ex: ExcitationParams) -> float:
        """Transient discard window; default 20% of the run, and at least 200
        forcing periods when the periodic excitation is on."""
        if self.t_transient is not None:
            return self.t_transient
        t = 0.2 * self.t_total
        if ex.eps > 0:
            t = max(t, 200.0 * 2.0 * math.pi / ex.Omega)
        return min(t, 0.95 * self.t_total)


@dataclass(frozen=True)
class PsdSnr:
    """Background-subtracted spectral SNR estimate at the drive frequency."""

    estimate: float
    stderr: float
    n_segments: int
    bin_freq: float
    freq_resolution: float


@dataclass(frozen=True)
class TrajectoryResult:
    """Post-transient series and running estimators of a single trajectory."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    V: np.ndarray
    power_sum: float
    input_power_sum: float
    n_samples: int
    divergent: bool
    final_state: tuple[float, float, float, float]  # (x, v, V, xi)


@dataclass(frozen=True)
class EnsembleEstimates:
    """Pooled stationary estimators of the simulated ensemble."""

    mean_power: float
    v_rms: float
    efficiency_pct: float
    efficiency_defined: bool
    histogram: DensityField
    n_divergent: int
    n_samples: int
    psd_snr: PsdSnr | None = None


def lane() -> str:
    """Which stepping lane is active: 'numba' or 'numpy'."""
    return "numba" if _kernels.USE_NUMBA else "numpy"


def ou_path_step(
    xi: float, noise: NoiseParams, dt: float, gaussian_draw: float
) -> float:
    """Exact one-step update of the exponentially correlated noise."""
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    decay = math.exp(-dt / noise.c)
    scale = math.sqrt(noise.D / noise.c * (1.0 - math.exp(-2.0 * dt / noise.c)))
    return xi * decay + scale * gaussian_draw


def ou_initial_draw(noise: NoiseParams, gaussian_draw: float) -> float:
    """Stationary initialization: xi0 ~ Normal(0, D/c)."""
    return math.sqrt(noise.D / noise.c) * gaussian_draw


def _validate_step(p: SystemParams, noise: NoiseParams, cfg: SimConfig) -> None:
    scales = [s for s in (p.tau1, p.tau2, noise.c) if s > 0]
    if scales and cfg.dt > min(scales) / 20.0:
        raise ParameterError(
            f"dt={cfg.dt} too large: must be <= min(tau1, tau2, c)/20 = "
            f"{min(scales) / 20.0:.6g}"
        )


def _delay_offsets(tau: float, dt: float) -> tuple[int, float]:
    r = tau / dt
    k = int(math.floor(r + 1e-12))
    frac = r - k
    if frac < 1e-12:
        frac = 0.0
    return k, frac


def _run_params(p: SystemParams, noise: NoiseParams, cfg: SimConfig):
    k1, f1 = _delay_offsets(p.tau1, cfg.dt)
    k2, f2 = _delay_offsets(p.tau2, cfg.dt)
    buf_len = max(k1, k2) + 2
    decay = math.exp(-cfg.dt / noise.c)
    scale = math.sqrt(
        noise.D / noise.c * (1.0 - math.exp(-2.0 * cfg.dt / noise.c))
    )
    return k1, f1, k2, f2, buf_len, decay, scale


def _forcing_chunk(ex: ExcitationParams, dt: float, s0: int, n: int) -> np.ndarray:
    if ex.eps == 0 or ex.G == 0:
        return np.zeros(n)
    return ex.amplitude * np.sin(ex.Omega * dt * np.arange(s0, s0 + n, dtype=float))


def _initial_positions(p: SystemParams, cfg: SimConfig, n: int) -> np.ndarray:
    base = cfg.x0 if cfg.x0 is not None else math.sqrt(p.delta1 / p.delta3)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return base * signs


def _kernel_args(p: SystemParams, cfg: SimConfig, k1, f1, k2, f2, decay, scale, skip):
    g = cfg.grid
    dx = (g.x_max - g.x_min) / g.nx
    dv = (g.v_max - g.v_min) / g.nv
    return (
        cfg.dt,
        p.beta,
        p.delta1,
        p.delta3,
        p.kappa,
        p.alpha,
        p.mu,
        p.nu,
        k1,
        f1,
        k2,
        f2,
        decay,
        scale,
        skip,
    ), (g.x_min, dx, g.nx, g.v_min, dv, g.nv)


def simulate_trajectory(
    p: SystemParams,
    noise: NoiseParams,
    ex: ExcitationParams,
    cfg: SimConfig,
    traj_seed,
    x_init: float | None = None,
) -> TrajectoryResult:
    """Integrate one trajectory; deterministic given traj_seed.

    traj_seed may be an integer or a numpy SeedSequence.  The delay history
    before t=0 is held constant at the initial condition.
    """
    _validate_step(p, noise, cfg)
    n_steps = int(round(cfg.t_total / cfg.dt))
    skip = int(round(cfg.resolved_transient(ex) / cfg.dt))
    n_post = n_steps - skip
    k1, f1, k2, f2, buf_len, decay, scale = _run_params(p, noise, cfg)
    coeffs, hspec = _kernel_args(p, cfg, k1, f1, k2, f2, decay, scale, skip)

    rng = np.random.default_rng(traj_seed)
    x = float(x_init) if x_init is not None else float(
        _initial_positions(p, cfg, 1)[0]
    )
    v, V = cfg.v0, cfg.V0
    xi = ou_initial_draw(noise, rng.standard_normal())
    xbuf = np.full(buf_len, x)
    vbuf = np.full(buf_len, v)
    hist = np.zeros((cfg.grid.nx, cfg.grid.nv), dtype=np.int64)
    acc = np.zeros(3)
    series = np.zeros((3, max(n_post, 1)))

    alive = True
    s0 = 0
    while s0 < n_steps and alive:
        n = min(_CHUNK, n_steps - s0)
        forcing = _forcing_chunk(ex, cfg.dt, s0, n)
        draws = rng.standard_normal(n)
        x, v, V, xi, alive = _kernels._chunk_scalar(
            x, v, V, xi, xbuf, vbuf, s0, n, forcing, draws,
            *coeffs, hist, *hspec, acc, series, _kernels.STORE_XVV,
        )
        if not alive:
            break
        s0 += n

    n_samples = int(acc[2])
    t = (skip + np.arange(n_samples)) * cfg.dt
    return TrajectoryResult(
        t=t,
        x=series[0, :n_samples].copy(),
        v=series[1, :n_samples].copy(),
        V=series[2, :n_samples].copy(),
        power_sum=p.kappa * p.alpha * acc[1],
        input_power_sum=acc[0],
        n_samples=n_samples,
        divergent=not alive,
        final_state=(x, v, V, xi),
    )


def _ensemble_core(
    p: SystemParams,
    noise: NoiseParams,
    ex: ExcitationParams,
    cfg: SimConfig,
    store: int,
):
    """Run the full ensemble on the active lane.

    Returns (acc (n_traj, 3), hist counts, divergent mask, series or None).
    Both lanes draw per-trajectory standard-normal streams from generators
    spawned off the master seed, so their results agree bit for bit.
    """
    _validate_step(p, noise, cfg)
    n_steps = int(round(cfg.t_total / cfg.dt))
    skip = int(round(cfg.resolved_transient(ex) / cfg.dt))
    if skip >= n_steps:
        raise ParameterError("transient discard leaves no samples")
    n_post = n_steps - skip
    k1, f1, k2, f2, buf_len, decay, scale = _run_params(p, noise, cfg)
    coeffs, hspec = _kernel_args(p, cfg, k1, f1, k2, f2, decay, scale, skip)

    m = cfg.n_traj
    children = np.random.SeedSequence(cfg.seed).spawn(m)
    gens = [np.random.default_rng(c) for c in children]
    x0 = _initial_positions(p, cfg, m)
    hist = np.zeros((cfg.grid.nx, cfg.grid.nv), dtype=np.int64)

    if _kernels.USE_NUMBA:
        acc = np.zeros((m, 3))
        divergent = np.zeros(m, dtype=bool)
        n_cols = 1 if store == _kernels.STORE_X else 3
        series = (
            np.zeros((m, n_cols, n_post)) if store != _kernels.STORE_NONE else None
        )
        dummy = np.zeros((1, 1))
        for i in range(m):
            rng = gens[i]
            x = float(x0[i])
            v, V = cfg.v0, cfg.V0
            xi = ou_initial_draw(noise, rng.standard_normal())
            xbuf = np.full(buf_len, x)
            vbuf = np.full(buf_len, v)
            ser = series[i] if series is not None else dummy
            s0 = 0
            alive = True
            while s0 < n_steps and alive:
                n = min(_CHUNK, n_steps - s0)
                forcing = _forcing_chunk(ex, cfg.dt, s0, n)
                draws = rng.standard_normal(n)
                x, v, V, xi, alive = _kernels._chunk_scalar(
                    x, v, V, xi, xbuf, vbuf, s0, n, forcing, draws,
                    *coeffs, hist, *hspec, acc[i], ser, store,
                )
                s0 += n
            divergent[i] = not alive
        return acc, hist, divergent, series

    x = x0.copy()
    v = np.full(m, cfg.v0)
    V = np.full(m, cfg.V0)
    xi = np.array(
        [ou_initial_draw(noise, g.standard_normal()) for g in gens]
    )
    xbuf = np.repeat(x[:, None], buf_len, axis=1)
    vbuf = np.repeat(v[:, None], buf_len, axis=1)
    acc = np.zeros((m, 3))
    alive = np.ones(m, dtype=bool)
    n_cols = 1 if store == _kernels.STORE_X else 3
    series = (
        np.zeros((m, n_cols, n_post)) if store != _kernels.STORE_NONE else
        np.zeros((m, 1, 1))
    )
    s0 = 0
    while s0 < n_steps:
        n = min(_CHUNK, n_steps - s0)
        forcing = _forcing_chunk(ex, cfg.dt, s0, n)
        draws = np.empty((m, n))
        for i, g in enumerate(gens):
            draws[i] = g.standard_normal(n)
        _kernels._chunk_batch(
            x, v, V, xi, alive, xbuf, vbuf, s0, n, forcing, draws,
            *coeffs, hist, *hspec, acc, series, store,
        )
        s0 += n
    out_series = series if store != _kernels.STORE_NONE else None
    return acc, hist, ~alive, out_series


def _histogram_density(cfg: SimConfig, hist: np.ndarray) -> DensityField:
    g = cfg.grid
    dx = (g.x_max - g.x_min) / g.nx
    dv = (g.v_max - g.v_min) / g.nv
    total = hist.sum()
    if total == 0:
        raise ParameterError("no in-grid samples collected; widen the grid")
    dens = hist / (total * dx * dv)
    xc = g.x_min + dx * (np.arange(g.nx) + 0.5)
    vc = g.v_min + dv * (np.arange(g.nv) + 0.5)
    return DensityField(x=xc, v=vc, values=dens, norm_const=1.0)


def run_ensemble(
    p: SystemParams,
    noise: NoiseParams,
    ex: ExcitationParams,
    cfg: SimConfig,
    _store: int = _kernels.STORE_NONE,
    _series_out: list | None = None,
) -> EnsembleEstimates:
    """Ensemble estimates pooled over all post-transient samples.

    Merging is a fixed-order sum over trajectory index, so the result does not
    depend on scheduling.  Divergent trajectories contribute the samples they
    collected before diverging and are counted in n_divergent.
    """
    acc, hist, divergent, series = _ensemble_core(p, noise, ex, cfg, _store)
    if _series_out is not None:
        _series_out.append((series, divergent))
    pm_sum = float(np.sum(acc[:, 0]))
    vsq_sum = float(np.sum(acc[:, 1]))
    n = float(np.sum(acc[:, 2]))
    if n == 0:
        raise ParameterError("all trajectories diverged before the transient ended")
    vsq_mean = vsq_sum / n
    mean_power = p.kappa * p.alpha * vsq_mean
    p_in = pm_sum / n
    defined = p_in > 1e-8
    eff = 100.0 * mean_power / p_in if defined else math.nan
    return EnsembleEstimates(
        mean_power=mean_power,
        v_rms=math.sqrt(vsq_mean),
        efficiency_pct=eff,
        efficiency_defined=defined,
        histogram=_histogram_density(cfg, hist),
        n_divergent=int(np.sum(divergent)),
        n_samples=int(n),
        psd_snr=None,
    )


def _segment_periodograms(
    series: np.ndarray, divergent: np.ndarray, n_seg: int, step: int
) -> np.ndarray:
    """Hann-windowed periodograms of every segment of every clean trajectory."""
    window = np.hanning(n_seg)
    wnorm = np.sum(window**2)
    periodograms = []
    for i in range(series.shape[0]):
        if divergent[i]:
            continue
        xs = series[i, 0]
        for start in range(0, xs.shape[0] - n_seg + 1, step):
            seg = xs[start : start + n_seg]
            seg = (seg - seg.mean()) * window
            spec = np.abs(np.fft.rfft(seg)) ** 2 / wnorm
            periodograms.append(spec)
    if not periodograms:
        raise ParameterError("no complete segments; increase t_total")
    return np.asarray(periodograms)


def _snr_from_mean(mean_spec: np.ndarray, j: int) -> float:
    lo = np.arange(max(j - 6, 1), max(j - 1, 1))
    hi = np.arange(j + 2, min(j + 7, mean_spec.shape[0]))
    neighbors = np.concatenate([mean_spec[lo], mean_spec[hi]])
    background = float(np.mean(neighbors))
    if background <= 0:
        return 0.0
    return (float(mean_spec[j]) - background) / background


def estimate_snr_psd(
    p: SystemParams,
    noise: NoiseParams,
    ex: ExcitationParams,
    cfg: SimConfig,
) -> PsdSnr:
    """Periodogram SNR of the displacement at the drive frequency.

    Averages Hann periodograms over overlapping segments of every clean
    trajectory, subtracts the noise floor interpolated from neighboring bins,
    and attaches a bootstrap standard error over segments.
    """
    if cfg.psd is None:
        raise ParameterError("psd settings are required for spectral estimation")
    drive_period = 2.0 * math.pi / ex.Omega
    if cfg.psd.segment_time < 10.0 * drive_period:
        raise ParameterError(
            f"segment_time={cfg.psd.segment_time} must cover >= 10 drive periods "
            f"({10.0 * drive_period:.6g})"
        )
    out: list = []
    run_ensemble(p, noise, ex, cfg, _store=_kernels.STORE_X, _series_out=out)
    series, divergent = out[0]
    if np.all(divergent):
        raise ParameterError("all trajectories diverged; no spectra available")

    n_seg = int(round(cfg.psd.segment_time / cfg.dt))
    step = max(1, int(round(n_seg * (1.0 - cfg.psd.overlap))))
    pgs = _segment_periodograms(series, divergent, n_seg, step)
    freqs = 2.0 * math.pi * np.fft.rfftfreq(n_seg, d=cfg.dt)
    j = int(np.argmin(np.abs(freqs - ex.Omega)))
    if j < 3 or j > pgs.shape[1] - 8:
        raise ParameterError("drive frequency too close to the spectral edge")

    estimate = _snr_from_mean(pgs.mean(axis=0), j)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2**20,)))
    n_pg = pgs.shape[0]
    boot = np.empty(cfg.psd.n_bootstrap)
    for b in range(cfg.psd.n_bootstrap):
        pick = rng.integers(0, n_pg, n_pg)
        boot[b] = _snr_from_mean(pgs[pick].mean(axis=0), j)
    return PsdSnr(
        estimate=estimate,
        stderr=float(np.std(boot, ddof=1)),
        n_segments=n_pg,
        bin_freq=float(freqs[j]),
        freq_resolution=float(freqs[1]),
    )
