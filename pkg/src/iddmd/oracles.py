"""Reference simulators used to generate training data and ground truth.

All simulators are pure functions of their configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.stats import ortho_group

from .snapshots import SnapshotRecord, SnapshotSet

__all__ = [
    "InstabilityError",
    "BuildingParams",
    "BurgersConfig",
    "chain_matrix",
    "building_matrices",
    "building_frequencies",
    "simulate_building",
    "building_dataset",
    "simulate_vanderpol",
    "simulate_cubic_damped",
    "gaussian_random_field",
    "simulate_burgers",
    "burgers_dataset",
    "simulate_random_parametric_linear",
    "inject_noise",
    "rk4_integrate",
]

BLOWUP_FACTOR = 1e6


class InstabilityError(RuntimeError):
    """Simulation diverged or violated a stability bound."""


def _guard(norm: float, ref: float, where: str) -> None:
    if not np.isfinite(norm) or (ref > 0 and norm > BLOWUP_FACTOR * ref):
        raise InstabilityError(f"{where}: state norm {norm:.3e} exceeds {BLOWUP_FACTOR:g} x initial {ref:.3e}")


def rk4_integrate(
    rhs: Callable[[np.ndarray], np.ndarray],
    z0: np.ndarray,
    dt: float,
    n_samples: int,
    substeps: int = 1,
    where: str = "rk4",
) -> np.ndarray:
    """Fixed-step classical Runge-Kutta for an autonomous ODE; returns ``len(z0) x n_samples``."""
    z = np.array(z0, dtype=np.float64)
    out = np.empty((z.size, n_samples))
    out[:, 0] = z
    h = dt / substeps
    # a zero initial state (forced runs) only gets the finiteness check
    ref = float(np.linalg.norm(z))
    for k in range(1, n_samples):
        for _ in range(substeps):
            k1 = rhs(z)
            k2 = rhs(z + 0.5 * h * k1)
            k3 = rhs(z + 0.5 * h * k2)
            k4 = rhs(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[:, k] = z
        if k % 256 == 0:
            _guard(np.linalg.norm(z), ref, where)
    _guard(np.linalg.norm(z), ref, where)
    return out


def _n_samples(horizon: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return int(round(horizon / dt)) + 1


# -- 4-DoF building ----------------------------------------------------------------


def chain_matrix(v: Sequence[float]) -> np.ndarray:
    """Tridiagonal shear-building matrix from storey coefficients ``v_1..v_n``."""
    n = len(v)
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i] += v[i]
        if i + 1 < n:
            a[i, i] += v[i + 1]
            a[i, i + 1] = a[i + 1, i] = -v[i + 1]
    return a


@dataclass
class BuildingParams:
    masses: tuple = (5e6, 4e6, 3e6, 2e6)
    stiffness: tuple = (1500e6, 2000e6, 3000e6, 1000e6)
    damping: tuple = (1e5, 1e5, 1e5, 1e5)
    c_non: float = 0.0
    x0: tuple = (1.0, 0.0, 0.0, 0.0)
    v0: tuple = (0.0, 0.0, 0.0, 0.0)

    def with_bottom_stiffness(self, k_s: float) -> "BuildingParams":
        k = list(self.stiffness)
        k[0] = k_s
        return BuildingParams(self.masses, tuple(k), self.damping, self.c_non, self.x0, self.v0)

    def with_nonlinear_damper(self, c_non: float) -> "BuildingParams":
        return BuildingParams(self.masses, self.stiffness, self.damping, c_non, self.x0, self.v0)


def building_matrices(p: BuildingParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.diag(p.masses).astype(float), chain_matrix(p.damping), chain_matrix(p.stiffness)


def building_frequencies(p: BuildingParams) -> np.ndarray:
    """Undamped resonant frequencies (rad/s) from the generalized problem ``K v = w^2 M v``."""
    m, _, k = building_matrices(p)
    w2 = sla.eigh(k, m, eigvals_only=True)
    return np.sqrt(w2)


def _block_propagate(step: np.ndarray, z0: np.ndarray, n: int, where: str, block: int = 512) -> np.ndarray:
    """Iterate a linear one-step map ``n - 1`` times using precomputed matrix powers."""
    d = z0.size
    block = max(1, min(block, n))
    powers = np.empty((block, d, d))
    acc = np.eye(d)
    for j in range(block):
        acc = step @ acc
        powers[j] = acc
    stacked = powers.reshape(block * d, d)
    out = np.empty((d, n))
    out[:, 0] = z0
    ref = max(np.linalg.norm(z0), 1e-300)
    k = 1
    z = z0.astype(np.float64)
    while k < n:
        chunk = min(block, n - k)
        vals = (stacked[: chunk * d] @ z).reshape(chunk, d).T
        out[:, k : k + chunk] = vals
        z = vals[:, -1]
        k += chunk
        _guard(np.linalg.norm(z), ref, where)
        # flush denormals from fully decayed responses
        if np.linalg.norm(z) < 1e-250 * ref:
            out[:, k:] = 0.0
            break
    return out


def simulate_building(
    p: BuildingParams, horizon: float, dt: float, scheme: str = "rk4", substeps: int = 1
) -> np.ndarray:
    """Free vibration of the 4-DoF building; returns the ``4 x n`` displacement history.

    ``scheme="rk4"`` integrates the first-order form with fixed-step RK4 (the
    only option when ``c_non != 0``). ``scheme="central"`` uses the
    central-difference recursion with backward-difference velocity, valid
    for the linear building only.
    """
    mass, damp, stiff = building_matrices(p)
    n = _n_samples(horizon, dt)
    minv = np.diag(1.0 / np.diag(mass))
    x0 = np.asarray(p.x0, dtype=float)
    v0 = np.asarray(p.v0, dtype=float)
    if scheme == "central":
        if p.c_non != 0:
            raise ValueError("central-difference scheme is for the linear building (c_non = 0)")
        eye = np.eye(4)
        a1 = 2 * eye - dt * minv @ damp - dt**2 * minv @ stiff
        a2 = -eye + dt * minv @ damp
        step = np.block([[a1, a2], [eye, np.zeros((4, 4))]])
        z0 = np.concatenate([x0, x0 - dt * v0])
        return _block_propagate(step, z0, n, "building (central difference)")[:4]
    if scheme != "rk4":
        raise ValueError(f"unknown scheme {scheme!r}")
    a = np.block([[np.zeros((4, 4)), np.eye(4)], [-minv @ stiff, -minv @ damp]])
    z0 = np.concatenate([x0, v0])
    if p.c_non == 0:
        h = dt / substeps
        ah = a * h
        one = np.eye(8) + ah @ (np.eye(8) + ah @ (np.eye(8) / 2 + ah @ (np.eye(8) / 6 + ah / 24)))
        step = np.linalg.matrix_power(one, substeps)
        return _block_propagate(step, z0, n, "building (rk4)")[:4]
    c_non = float(p.c_non)
    mdiag = np.diag(mass)

    def rhs(z):
        x, v = z[:4], z[4:]
        f = stiff @ x + damp @ v
        rel = (v[2] - v[1]) ** 3 * c_non
        f[1] -= rel
        f[2] += rel
        return np.concatenate([v, -f / mdiag])

    return rk4_integrate(rhs, z0, dt, n, substeps, "building (nonlinear)")[:4]


def building_dataset(
    param: str,
    values: Sequence[float],
    horizon: float,
    dt: float,
    scheme: str = "rk4",
    base: BuildingParams | None = None,
    substeps: int = 1,
) -> SnapshotSet:
    """Training set over either the bottom stiffness ``k_s`` or the damper ``c_non``."""
    base = base or BuildingParams()
    recs = []
    for val in values:
        if param == "k_s":
            p = base.with_bottom_stiffness(val)
        elif param == "c_non":
            p = base.with_nonlinear_damper(val)
        else:
            raise ValueError(f"unknown building parameter {param!r}")
        recs.append(SnapshotRecord([val], simulate_building(p, horizon, dt, scheme, substeps)))
    return SnapshotSet(recs, dt, (param,), metadata={"system": "building", "scheme": scheme})


# -- oscillators ---------------------------------------------------------------------


def simulate_vanderpol(
    mu: float,
    omega_bar: float,
    horizon: float,
    dt: float,
    t_start: float = 0.0,
    x0: float = 0.1,
    substeps: int = 1,
) -> np.ndarray:
    """``x'' - mu (1 - x^2) x' + omega_bar x = 0`` from ``x(0)=x0, x'(0)=0``.

    Returns the ``1 x n`` displacement sampled on ``[t_start, horizon]``.
    """

    def rhs(z):
        return np.array([z[1], mu * (1 - z[0] ** 2) * z[1] - omega_bar * z[0]])

    n = _n_samples(horizon, dt)
    y = rk4_integrate(rhs, [x0, 0.0], dt, n, substeps, "van der Pol")
    first = int(round(t_start / dt))
    return y[:1, first:]


def simulate_cubic_damped(
    c3: float, horizon: float, dt: float, y0: float = 0.01, substeps: int = 1, forcing=None
) -> np.ndarray:
    """``y'' + 0.03 y' + 100 y + c3 y'^3 = u(t)`` from ``y(0)=y0, y'(0)=0``; returns ``1 x n``.

    ``forcing`` is an optional callable ``u(t)``.
    """
    n = _n_samples(horizon, dt)
    if forcing is None:

        def rhs(z):
            return np.array([z[1], -0.03 * z[1] - 100.0 * z[0] - c3 * z[1] ** 3])

        return rk4_integrate(rhs, [y0, 0.0], dt, n, substeps, "cubic-damped oscillator")[:1]

    # time-dependent forcing: augment with time as a state
    def rhs_t(z):
        return np.array([z[1], -0.03 * z[1] - 100.0 * z[0] - c3 * z[1] ** 3 + forcing(z[2]), 1.0])

    return rk4_integrate(rhs_t, [y0, 0.0, 0.0], dt, n, substeps, "cubic-damped oscillator")[:1]


# -- viscous Burgers -------------------------------------------------------------------


@dataclass
class BurgersConfig:
    """Periodic 1-D viscous Burgers on ``[0, 1]``.

    ``n_points`` output points include both endpoints. The solver itself runs
    on ``n_modes`` equispaced points of the periodic cell.
    """

    viscosity: float
    n_points: int = 101
    dt: float = 0.01
    horizon: float = 1.0
    seed: int = 0
    n_modes: int = 1024
    cfl: float = 0.4

    def __post_init__(self):
        if not self.viscosity > 0:
            raise ValueError("viscosity must be positive")
        if self.n_points < 3 or self.n_modes < 8:
            raise ValueError("grid too small")


def gaussian_random_field(n: int, seed: int, sigma: float = 25.0, tau: float = 5.0) -> np.ndarray:
    """Zero-mean periodic sample of ``N(0, sigma^2 (-Laplacian + tau^2 I)^-2)`` on ``n`` points.

    Fourier coefficient ``k`` is white noise filtered by
    ``sigma / (4 pi^2 k^2 + tau^2)``, the principal square root of the
    covariance operator in the orthonormal Fourier basis of ``[0, 1)``.
    """
    rng = np.random.default_rng(seed)
    k = np.fft.rfftfreq(n, d=1.0 / n)
    coef = sigma / (4 * np.pi**2 * k**2 + tau**2)
    xi = (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)) / np.sqrt(2.0)
    uhat = coef * xi
    uhat[0] = 0.0
    if n % 2 == 0:
        uhat[-1] = uhat[-1].real * np.sqrt(2.0)
    # u(x) = sum_k uhat_k e^{2 pi i k x} + c.c.
    return np.fft.irfft(uhat, n=n) * n


def _interp_matrix(n_fine: int, x: np.ndarray) -> np.ndarray:
    """Matrix evaluating a real trigonometric polynomial from ``rfft`` coefficients at ``x``."""
    k = np.arange(n_fine // 2 + 1)
    w = np.full(k.size, 2.0)
    w[0] = 1.0
    if n_fine % 2 == 0:
        w[-1] = 1.0
    return np.exp(2j * np.pi * np.outer(x, k)) * (w / n_fine)


def simulate_burgers(cfg: BurgersConfig, initial: np.ndarray | None = None) -> np.ndarray:
    """Pseudo-spectral integrating-factor RK4 solution; returns ``n_points x n_t`` samples.

    The nonlinear term is dealiased with the 2/3 rule. The internal step is
    the largest divisor of ``dt`` satisfying the advective CFL bound at the
    initial amplitude (Burgers' maximum principle keeps it valid later).
    """
    n = cfg.n_modes
    u0 = gaussian_random_field(n, cfg.seed) if initial is None else np.asarray(initial, dtype=float)
    if u0.size != n:
        raise ValueError(f"initial condition needs {n} points")
    k = np.fft.rfftfreq(n, d=1.0 / n)
    kx = 2j * np.pi * k
    lin = -cfg.viscosity * (2 * np.pi * k) ** 2
    dealias = k < n / 3
    umax = max(np.max(np.abs(u0)), 1e-12)
    dx = 1.0 / n
    n_sub = max(1, int(np.ceil(cfg.dt * umax / (cfg.cfl * dx))))
    h = cfg.dt / n_sub
    if h * umax / dx > 1.0:
        raise InstabilityError("CFL violation")
    e_half = np.exp(lin * h / 2)
    e_full = np.exp(lin * h)

    def nonlin(vhat):
        u = np.fft.irfft(vhat, n=n)
        return -0.5 * kx * np.fft.rfft(u * u) * dealias

    n_t = _n_samples(cfg.horizon, cfg.dt)
    x_out = np.linspace(0.0, 1.0, cfg.n_points)
    out = np.empty((cfg.n_points, n_t))
    interp = _interp_matrix(n, x_out)
    vhat = np.fft.rfft(u0)
    out[:, 0] = (interp @ vhat).real
    ref = np.linalg.norm(u0)
    for step in range(1, n_t):
        for _ in range(n_sub):
            a = nonlin(vhat)
            b = nonlin(e_half * (vhat + 0.5 * h * a))
            c = nonlin(e_half * vhat + 0.5 * h * b)
            d = nonlin(e_full * vhat + h * e_half * c)
            vhat = e_full * vhat + (h / 6.0) * (e_full * a + 2 * e_half * (b + c) + d)
        out[:, step] = (interp @ vhat).real
        _guard(np.linalg.norm(vhat) / np.sqrt(n), ref, "burgers")
    return out


def burgers_dataset(
    viscosities: Sequence[float],
    horizon: float = 1.0,
    dt: float = 0.01,
    n_points: int = 101,
    seed: int = 0,
    n_modes: int = 1024,
) -> SnapshotSet:
    """One record per viscosity, all from the same random initial condition."""
    recs = []
    for v in viscosities:
        cfg = BurgersConfig(v, n_points, dt, horizon, seed, n_modes)
        recs.append(SnapshotRecord([v], simulate_burgers(cfg)))
    return SnapshotSet(
        recs,
        dt,
        ("v",),
        {"dims": [n_points], "x": [0.0, 1.0]},
        {"system": "burgers", "seed": seed, "shared_initial_condition": True},
    )


# -- synthetic parametric linear systems ------------------------------------------------


def simulate_random_parametric_linear(
    m: int,
    n_params: int,
    spectral_radius: float,
    seed: int,
    n_sets: int | None = None,
    n_steps: int | None = None,
    runs_per_set: int = 1,
    eps_box: tuple[float, float] = (-1.0, 1.0),
) -> tuple[list[np.ndarray], SnapshotSet]:
    """Random operators ``A_0..A_P`` and trajectories of ``x_k = A(eps) x_{k-1}``.

    ``A_0`` is ``0.8 * spectral_radius`` times a random orthogonal matrix and
    the parametric parts are scaled so ``||A(eps)||_2 <= spectral_radius``
    everywhere in ``eps_box^P``, which keeps every trajectory stable.
    """
    if not 0 <= spectral_radius < 1:
        raise ValueError("spectral_radius must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    n_sets = n_sets if n_sets is not None else n_params + 2
    n_steps = n_steps if n_steps is not None else 3 * m + 2
    bound = max(abs(eps_box[0]), abs(eps_box[1]))
    base = ortho_group.rvs(m, random_state=rng) if m > 1 else np.array([[1.0]])
    ops = [0.8 * spectral_radius * base]
    budget = 0.2 * spectral_radius
    for _ in range(n_params):
        g = rng.standard_normal((m, m))
        g *= budget / (n_params * bound * np.linalg.norm(g, 2))
        ops.append(g)
    recs = []
    for _ in range(n_sets):
        eps = rng.uniform(eps_box[0], eps_box[1], size=n_params)
        a = ops[0] + sum(e * op for e, op in zip(eps, ops[1:]))
        for _ in range(runs_per_set):
            x = np.empty((m, n_steps))
            x[:, 0] = rng.standard_normal(m)
            for k in range(1, n_steps):
                x[:, k] = a @ x[:, k - 1]
            recs.append(SnapshotRecord(eps, x))
    return ops, SnapshotSet(recs, 1.0, metadata={"system": "randlin", "seed": seed})


def inject_noise(snapshots: SnapshotSet, std: float, seed: int) -> SnapshotSet:
    """Add zero-mean Gaussian noise of standard deviation ``std`` to every state value."""
    if std < 0:
        raise ValueError("std must be non-negative")
    if std == 0:
        return snapshots
    rng = np.random.default_rng(seed)
    noisy = [r.states + std * rng.standard_normal(r.states.shape) for r in snapshots.records]
    return snapshots.replace_states(noisy)
