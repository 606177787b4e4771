"""Stochastic averaging of the energy envelope and the stationary response.

The lightly damped effective oscillator reduces to a one-dimensional Ito
diffusion for the energy; from its stationary density follow the joint
displacement/velocity density, the effective generalized potential, the
mean-square harvested voltage and the mean output power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ParameterError, SeparatrixBandError
from .freq import (
    FrequencyTable,
    build_table,
    exclusion_band,
    orbit_average,
    period_integral,
    solve_frequency,
)
from .model import (
    MotionRegime,
    NoiseParams,
    SystemParams,
    effective_coeffs,
    equilibrium_for_regime,
)


@dataclass(frozen=True)
class DriftDiffusion:
    """Averaged drift m(H) and diffusion sigma^2(H) of the energy envelope."""

    m: float
    sigma2: float


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (x, v) evaluation lattice."""

    x_min: float = -2.5
    x_max: float = 2.5
    nx: int = 201
    v_min: float = -3.0
    v_max: float = 3.0
    nv: int = 201

    def __post_init__(self):
        if self.nx < 32 or self.nv < 32:
            raise ParameterError(
                f"grid too coarse: need at least 32x32, got {self.nx}x{self.nv}"
            )
        if not (self.x_max > self.x_min and self.v_max > self.v_min):
            raise ParameterError("grid bounds must satisfy min < max")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(self.x_min, self.x_max, self.nx),
            np.linspace(self.v_min, self.v_max, self.nv),
        )


@dataclass(frozen=True)
class DensityField:
    """Joint stationary density on an (x, v) grid, trapezoid-normalized to 1."""

    x: np.ndarray
    v: np.ndarray
    values: np.ndarray  # shape (nx, nv)
    norm_const: float

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.v, axis=1), self.x))


def _resolve_omega(H, p, regime, table: FrequencyTable | None):
    if table is not None:
        return table.lookup(H, regime)
    return solve_frequency(H, p, regime)


def loop_average(
    f, H: float, p: SystemParams, regime: MotionRegime, omega: float | None = None
) -> float:
    """Time average of f(x, v) over the closed orbit at energy H.

    When omega is omitted the self-consistent frequency at H is used; passing
    omega evaluates the orbit in the frozen potential delta_eff(omega).
    """
    if omega is None:
        omega = solve_frequency(H, p, regime)
    return orbit_average(f, H, p, omega, regime)


def mean_square_velocity(
    H: float, p: SystemParams, regime: MotionRegime, omega: float | None = None
) -> float:
    if omega is None:
        omega = solve_frequency(H, p, regime)
    return orbit_average(lambda x, v: v * v, H, p, omega, regime)


def drift_diffusion(
    H: float,
    p: SystemParams,
    noise: NoiseParams,
    regime: MotionRegime,
    omega: float | None = None,
    table: FrequencyTable | None = None,
    reduced: bool = False,
) -> DriftDiffusion:
    """Averaged drift and diffusion of the energy envelope at H.

    The full form averages v*(beta_eff*v - delta_eff*X*) over the orbit; the
    reduced form uses the vanishing of the cross term on symmetric wells and
    evaluates -beta_eff*<v^2> directly.
    """
    noise.require_positive_intensity()
    if omega is None:
        omega = _resolve_omega(H, p, regime, table)
    ec = effective_coeffs(p, omega)
    xs = equilibrium_for_regime(p, regime)
    msv = orbit_average(lambda x, v: v * v, H, p, omega, regime)
    if reduced:
        dissipation = ec.beta_eff * msv
    else:
        dissipation = orbit_average(
            lambda x, v: v * (ec.beta_eff * v - ec.delta_eff * xs),
            H, p, omega, regime,
        )
    chi = 1.0 + noise.c**2 * omega**2
    m = -dissipation + noise.D / chi
    sigma2 = 2.0 * noise.D / chi * msv
    return DriftDiffusion(m, sigma2)


def energy_spd(
    p: SystemParams,
    noise: NoiseParams,
    H_grid: np.ndarray,
    table: FrequencyTable | None = None,
) -> np.ndarray:
    """Stationary probability density of the total energy on the given grid.

    p(H) = N0/sigma^2(H) * exp(int 2m/sigma^2 dH), accumulated by trapezoid from
    the grid base and normalized over the grid.  The grid must avoid the
    separatrix exclusion band.
    """
    noise.require_positive_intensity()
    H_grid = np.asarray(H_grid, dtype=float)
    if np.any(np.diff(H_grid) <= 0):
        raise ParameterError("H_grid must be strictly increasing")
    band = table.band if table is not None else exclusion_band(p)
    if np.any(np.abs(H_grid) < band):
        raise SeparatrixBandError(
            f"H_grid contains points inside the exclusion band (+-{band:.6g})"
        )
    ratio = np.empty_like(H_grid)
    ln_s2 = np.empty_like(H_grid)
    for i, H in enumerate(H_grid):
        regime = MotionRegime.CROSS_WELL if H > 0 else MotionRegime.RIGHT_WELL
        dd = drift_diffusion(H, p, noise, regime, table=table)
        ratio[i] = 2.0 * dd.m / dd.sigma2
        ln_s2[i] = math.log(dd.sigma2)
    inner = np.concatenate(
        ([0.0], np.cumsum(0.5 * (ratio[1:] + ratio[:-1]) * np.diff(H_grid)))
    )
    ln_p = inner - ln_s2
    ln_p -= ln_p.max()
    dens = np.exp(ln_p)
    Z = np.trapezoid(dens, H_grid)
    return dens / Z


def _table_for(p: SystemParams, grid: GridSpec) -> FrequencyTable:
    """Frequency table wide enough to cover every energy reachable on the grid."""
    omega0 = math.sqrt(2.0 * p.delta1)
    d_eff = effective_coeffs(p, omega0).delta_eff
    xm = max(abs(grid.x_min), abs(grid.x_max))
    vm = max(abs(grid.v_min), abs(grid.v_max))
    H_corner = (
        0.5 * vm**2
        - 0.5 * p.delta1 * xm**2
        + 0.25 * p.delta3 * xm**4
        + 0.5 * abs(d_eff) * xm**2
    )
    from .freq import bottom_frequency, well_depth as _wd  # local to avoid cycle

    depth = _wd(p, bottom_frequency(p))
    H_max = max(2.0 * H_corner, 0.5 * vm**2 * 2.0, 10.0 * depth)
    return build_table(p, H_range=(-depth * (1.0 - 1e-6), H_max))


def _self_consistent_fields(
    p: SystemParams,
    noise: NoiseParams,
    X: np.ndarray,
    V: np.ndarray,
    table: FrequencyTable,
    tol: float = 1e-12,
    max_iter: int = 200,
):
    """Per-point energy and frequency, resolved jointly by damped fixed point.

    Points near the separatrix can cycle (omega(H) is steep across the bridged
    band), so stragglers are finished by bisection on the energy fixed-point
    equation H = kin + U_bare + delta_eff(omega(H)) x^2 / 2, which brackets a
    root because delta_eff is bounded over the table's frequency range.
    """
    shape = X.shape
    omega = np.full(shape, math.sqrt(2.0 * p.delta1))
    kin = 0.5 * V * V
    bare = -0.5 * p.delta1 * X * X + 0.25 * p.delta3 * X**4

    def d_eff_of(om):
        return effective_coeffs(p, om).delta_eff

    def H_of(om):
        return kin + bare + 0.5 * d_eff_of(om) * X * X

    for _ in range(60):
        H = H_of(omega)
        omega_new = table.lookup_bridged(H).reshape(shape)
        if np.max(np.abs(omega_new - omega)) <= tol:
            omega = omega_new
            break
        omega = 0.5 * (omega + omega_new)
    H = H_of(omega)
    resid = np.abs(table.lookup_bridged(H).reshape(shape) - omega)
    bad = resid > 1e-9
    if np.any(bad):
        xb = X[bad]
        base = kin[bad] + bare[bad]
        om_lo = min(float(table.omega_neg.min()), float(table.omega_pos.min()))
        om_hi = max(float(table.omega_neg.max()), float(table.omega_pos.max()))
        om_span = np.linspace(om_lo, om_hi, 64)
        d_span = np.array([d_eff_of(om) for om in om_span])
        lo = base + 0.5 * d_span.min() * xb * xb - 1e-9
        hi = base + 0.5 * d_span.max() * xb * xb + 1e-9

        def F(Hq):
            om = table.lookup_bridged(Hq)
            return base + 0.5 * d_eff_of(om) * xb * xb - Hq

        flo = F(lo)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = F(mid)
            same = np.sign(fm) == np.sign(flo)
            lo = np.where(same, mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same, hi, mid)
        Hb = 0.5 * (lo + hi)
        H[bad] = Hb
        omega[bad] = table.lookup_bridged(Hb)
        # final consistency: recompute H from the resolved omega
        H = H_of(omega)
    ec = effective_coeffs(p, omega)
    return H, omega, ec


def _joint_density(
    p: SystemParams,
    noise: NoiseParams,
    grid: GridSpec,
    table: FrequencyTable,
):
    noise.require_positive_intensity()
    x, v = grid.axes()
    X, V = np.meshgrid(x, v, indexing="ij")
    H, omega, ec = _self_consistent_fields(p, noise, X, V, table)
    chi = 1.0 + noise.c**2 * omega**2
    ln_raw = np.log(chi / noise.D) - ec.beta_eff * chi / noise.D * H
    M = ln_raw.max()
    scaled = np.exp(ln_raw - M)
    Z_scaled = np.trapezoid(np.trapezoid(scaled, v, axis=1), x)
    values = scaled / Z_scaled
    ln_norm = -(M + math.log(Z_scaled))  # log of N0
    return {
        "x": x,
        "v": v,
        "values": values,
        "norm_const": math.exp(ln_norm) if ln_norm > -700 else 0.0,
        "ln_norm": ln_norm,
        "H": H,
        "omega": omega,
        "X": X,
        "V": V,
        "chi": chi,
        "beta_eff": ec.beta_eff,
    }


def joint_spd(
    p: SystemParams,
    noise: NoiseParams,
    grid: GridSpec | None = None,
    table: FrequencyTable | None = None,
    max_expansions: int = 5,
) -> DensityField:
    """Joint stationary density of displacement and velocity (forcing frozen at 0).

    The grid auto-expands until the boundary density falls below 1e-12 of the
    peak, so normalization captures the tails.
    """
    if grid is None:
        grid = GridSpec()
    for _ in range(max_expansions + 1):
        tab = table if table is not None else _table_for(p, grid)
        res = _joint_density(p, noise, grid, tab)
        vals = res["values"]
        boundary = max(
            vals[0, :].max(), vals[-1, :].max(), vals[:, 0].max(), vals[:, -1].max()
        )
        if boundary < 1e-12 * vals.max():
            return DensityField(res["x"], res["v"], vals, res["norm_const"])
        sx = 0.2 * (grid.x_max - grid.x_min)
        sv = 0.2 * (grid.v_max - grid.v_min)
        grid = GridSpec(
            grid.x_min - sx, grid.x_max + sx, int(grid.nx * 1.4) | 1,
            grid.v_min - sv, grid.v_max + sv, int(grid.nv * 1.4) | 1,
        )
        if table is not None:
            table = None  # supplied table may not cover the expanded grid
    raise ConvergenceError("grid expansion did not contain the density tails")


def effective_generalized_potential(
    x, v, p: SystemParams, noise: NoiseParams, table: FrequencyTable | None = None
):
    """Generalized potential whose Boltzmann-like factor exp(-U/D) gives the SPD."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if table is None:
        xm = max(1.0, float(np.max(np.abs(x))))
        vm = max(1.0, float(np.max(np.abs(v))))
        table = _table_for(p, GridSpec(-xm, xm, 32, -vm, vm, 32))
    H, omega, ec = _self_consistent_fields(p, noise, x, v, table)
    chi = 1.0 + noise.c**2 * omega**2
    out = ec.beta_eff * chi * H
    return float(out[0]) if out.size == 1 else out


def mean_square_voltage(
    p: SystemParams,
    noise: NoiseParams,
    grid: GridSpec | None = None,
    table: FrequencyTable | None = None,
) -> float:
    """E[V^2]: voltage map squared, integrated against the joint SPD.

    The oscillation center X* per grid point follows the regime rule: above the
    saddle energy the center is 0; below it, the minimum of the effective
    potential on the side of the current displacement.  The effective minimum
    (not the bare equilibrium) is the center the density actually oscillates
    around, so using it keeps the voltage map consistent with the joint SPD.
    """
    if grid is None:
        grid = GridSpec()
    if table is None:
        table = _table_for(p, grid)
    res = _joint_density(p, noise, grid, table)
    H, omega, X, V = res["H"], res["omega"], res["X"], res["V"]
    margin = np.maximum(p.delta1 - effective_coeffs(p, omega).delta_eff, 0.0)
    x_min = np.sqrt(margin / p.delta3)
    xstar = np.where(H >= 0.0, 0.0, np.where(X >= 0.0, x_min, -x_min))
    den = p.alpha**2 + omega**2
    volt = omega**2 / den * (X - xstar) + p.alpha / den * V
    integrand = volt * volt * res["values"]
    return float(np.trapezoid(np.trapezoid(integrand, res["v"], axis=1), res["x"]))


def mean_power(
    p: SystemParams,
    noise: NoiseParams,
    grid: GridSpec | None = None,
    table: FrequencyTable | None = None,
) -> float:
    """Mean harvested power kappa * alpha * E[V^2]."""
    return p.kappa * p.alpha * mean_square_voltage(p, noise, grid, table)
