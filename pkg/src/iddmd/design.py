"""Inverse design by exhaustive grid search over the fitted parametric model."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fit import IdDmdModel
from .modal import ModalDecomposition, modal_decomposition
from .predict import Trajectory, reconstruct_trajectory

__all__ = [
    "DesignError",
    "LossSpec",
    "Constraint",
    "DesignProblem",
    "DesignResult",
    "signal_power",
    "energy_dissipation",
    "target_frequency",
    "resonant_frequencies",
    "parameter_value",
    "custom",
    "evaluate_loss",
    "solve_design",
]


class DesignError(RuntimeError):
    """Design problem is ill-posed or has no feasible point."""


@dataclass
class LossSpec:
    """Scalar objective or constraint functional.

    ``kind`` is one of ``signal_power``, ``energy_dissipation``,
    ``target_frequency``, ``parameter`` or ``custom``; ``options`` holds the
    kind-specific settings. Use the module-level constructors.
    """

    kind: str
    options: dict = field(default_factory=dict)

    @property
    def needs_trajectory(self) -> bool:
        return self.kind in ("signal_power", "energy_dissipation") or (
            self.kind == "custom" and self.options.get("needs") == "trajectory"
        )

    @property
    def horizon(self) -> int:
        """Number of trajectory steps required."""
        return int(self.options.get("window", (0, 1))[1])


def signal_power(region: np.ndarray | Sequence[int] | None, window: tuple[int, int]) -> LossSpec:
    """``(1/N) sqrt(sum_{region, k in window} x_k^2)`` with ``N`` the window length.

    ``region`` is a boolean mask or index list over physical states (``None`` = all).
    """
    return LossSpec("signal_power", {"region": None if region is None else np.asarray(region), "window": tuple(window)})


def energy_dissipation(baseline, window: tuple[int, int], signal: int = 0) -> LossSpec:
    """``(E_lin - E) / E_lin`` with ``E = sum_k |y(k)|^2`` over ``window``.

    ``E_lin`` is the energy of the model response at the ``baseline``
    parameters (the linear reference).
    """
    return LossSpec(
        "energy_dissipation",
        {"baseline": np.atleast_1d(np.asarray(baseline, dtype=float)), "window": tuple(window), "signal": signal},
    )


def target_frequency(omega_target: float, order: int = 1, max_decay: float | None = None) -> LossSpec:
    """``|omega_order(eps) - omega_target|`` for the ``order``-th resonant frequency.

    Resonant frequencies are the positive imaginary parts of the oscillatory
    modes sorted ascending; modes decaying faster than ``max_decay`` (1/s)
    are treated as spurious and skipped.
    """
    return LossSpec("target_frequency", {"omega_target": float(omega_target), "order": int(order), "max_decay": max_decay})


def parameter_value(weights: Sequence[float]) -> LossSpec:
    """Linear functional ``w . eps`` of the design parameters (e.g. minimal damper size)."""
    return LossSpec("parameter", {"weights": np.asarray(weights, dtype=float)})


def custom(fn: Callable, needs: str = "eps", horizon: int = 1) -> LossSpec:
    """Arbitrary scalar functional.

    ``needs`` selects the argument passed to ``fn``: ``"eps"`` (parameter
    vector), ``"trajectory"`` (:class:`Trajectory` over ``horizon`` steps) or
    ``"modes"`` (:class:`ModalDecomposition`).
    """
    if needs not in ("eps", "trajectory", "modes"):
        raise ValueError(f"unknown custom loss input {needs!r}")
    return LossSpec("custom", {"fn": fn, "needs": needs, "window": (0, horizon)})


def resonant_frequencies(dec: ModalDecomposition, max_decay: float | None = None) -> np.ndarray:
    """Sorted positive frequencies of oscillatory, non-spurious modes."""
    lam = dec.lam
    osc = np.abs(lam.imag) > 1e-10 * np.abs(lam)
    ok = osc & (dec.omega > 0)
    if max_decay is not None:
        ok &= dec.sigma >= -abs(max_decay)
    return np.sort(dec.omega[ok])


class _Evaluator:
    """Caches decompositions and trajectories per parameter point."""

    def __init__(self, model: IdDmdModel, ic, mode_method: str = "exact"):
        self.model = model
        self.ic = ic
        self.mode_method = mode_method
        self._dec: dict = {}
        self._traj: dict = {}

    def decomposition(self, eps) -> ModalDecomposition:
        key = tuple(np.atleast_1d(eps).tolist())
        if key not in self._dec:
            self._dec[key] = modal_decomposition(self.model, eps, self.mode_method)
        return self._dec[key]

    def trajectory(self, eps, n_steps: int) -> Trajectory:
        if self.ic is None:
            raise DesignError("trajectory-based loss needs an initial condition")
        key = (tuple(np.atleast_1d(eps).tolist()), n_steps)
        if key not in self._traj:
            self._traj[key] = reconstruct_trajectory(
                self.model, eps, self.ic, n_steps, self.mode_method, self.decomposition(eps)
            )
        return self._traj[key]

    def loss(self, eps, spec: LossSpec) -> float:
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        o = spec.options
        if spec.kind == "signal_power":
            k0, k1 = o["window"]
            x = self.trajectory(eps, k1).states[:, k0:k1]
            region = o["region"]
            if region is not None:
                if region.dtype == bool and not region.any() or region.size == 0:
                    raise DesignError("signal_power region mask is empty")
                x = x[region]
            return float(np.sqrt(np.sum(x**2)) / (k1 - k0))
        if spec.kind == "energy_dissipation":
            k0, k1 = o["window"]
            sig = o["signal"]
            try:
                base = self.trajectory(o["baseline"], k1).states[sig, k0:k1]
            except Exception as exc:  # noqa: BLE001 - reported as design failure
                raise DesignError(f"baseline evaluation failed: {exc}") from exc
            e_lin = float(np.sum(base**2))
            if e_lin == 0:
                raise DesignError("baseline response has zero energy")
            y = self.trajectory(eps, k1).states[sig, k0:k1]
            return (e_lin - float(np.sum(y**2))) / e_lin
        if spec.kind == "target_frequency":
            freqs = resonant_frequencies(self.decomposition(eps), o.get("max_decay"))
            order = o["order"]
            if freqs.size < order:
                return float("inf")
            return abs(float(freqs[order - 1]) - o["omega_target"])
        if spec.kind == "parameter":
            return float(np.dot(o["weights"], eps))
        if spec.kind == "custom":
            needs = o["needs"]
            if needs == "eps":
                return float(o["fn"](eps))
            if needs == "modes":
                return float(o["fn"](self.decomposition(eps)))
            return float(o["fn"](self.trajectory(eps, o["window"][1])))
        raise DesignError(f"unknown loss kind {spec.kind!r}")


def evaluate_loss(model: IdDmdModel, eps, spec: LossSpec, ic=None, mode_method: str = "exact") -> float:
    """Evaluate one loss functional at ``eps`` using the model as the simulator."""
    return _Evaluator(model, ic, mode_method).loss(eps, spec)


@dataclass
class Constraint:
    """``loss(eps) <sense> value`` with ``sense`` in ``<=``, ``>=``, ``==``."""

    spec: LossSpec
    sense: str = "<="
    value: float = 0.0
    tol: float = 1e-6

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad constraint sense {self.sense!r}")

    def violation(self, x: float) -> float:
        """Signed violation; feasible iff ``<= 0`` (equality uses ``|h| - tol``)."""
        if self.sense == "<=":
            return x - self.value
        if self.sense == ">=":
            return self.value - x
        return abs(x - self.value) - self.tol


@dataclass
class DesignProblem:
    """Bounds, candidate grid, objective and constraints.

    ``grid`` is either an explicit ``(n_candidates, P)`` array, or per
    parameter a number of points (int) or a step (float) across ``bounds``.
    """

    bounds: Sequence[tuple[float, float]]
    loss: LossSpec
    grid: object = 11
    constraints: Sequence[Constraint] = ()

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
            raise DesignError(f"invalid bounds {b.tolist()}")
        self.bounds = b

    def candidates(self) -> np.ndarray:
        P = self.bounds.shape[0]
        g = self.grid
        if isinstance(g, np.ndarray) or (isinstance(g, (list, tuple)) and g and isinstance(g[0], (list, tuple, np.ndarray))):
            pts = np.asarray(g, dtype=float).reshape(-1, P)
        else:
            spec = list(g) if isinstance(g, (list, tuple)) else [g] * P
            if len(spec) != P:
                raise DesignError(f"grid spec has {len(spec)} entries for {P} parameters")
            axes = []
            for (lo, hi), s in zip(self.bounds, spec):
                if isinstance(s, (int, np.integer)) and not isinstance(s, bool):
                    axes.append(np.linspace(lo, hi, int(s)) if s > 1 else np.array([lo]))
                else:
                    step = float(s)
                    if step <= 0:
                        raise DesignError("grid step must be positive")
                    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
                    axes.append(np.round(lo + step * np.arange(n), 12))
            pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, P)
        if pts.shape[0] == 0:
            raise DesignError("design grid is empty")
        inside = np.all((pts >= self.bounds[:, 0] - 1e-12) & (pts <= self.bounds[:, 1] + 1e-12), axis=1)
        pts = pts[inside]
        if pts.shape[0] == 0:
            raise DesignError("no grid candidate lies inside the bounds")
        return pts


@dataclass
class DesignResult:
    eps_opt: np.ndarray
    loss_opt: float
    n_feasible: int
    table: list

    def table_rows(self) -> list[list[float]]:
        return [list(r["eps"]) + [r["loss"]] + list(r["constraints"]) + [int(r["feasible"])] for r in self.table]


def solve_design(
    model: IdDmdModel,
    problem: DesignProblem,
    ic=None,
    mode_method: str = "exact",
    threads: int = 1,
) -> DesignResult:
    """Evaluate every grid candidate and return the feasible minimiser.

    Ties are broken by the lexicographically smallest parameter vector, so the
    result does not depend on grid order or thread count.
    """
    pts = problem.candidates()
    ev = _Evaluator(model, ic, mode_method)

    def row(p):
        values = [ev.loss(p, c.spec) for c in problem.constraints]
        viol = [c.violation(v) for c, v in zip(problem.constraints, values)]
        feasible = all(v <= 0 for v in viol)
        loss = ev.loss(p, problem.loss)
        return {"eps": p.tolist(), "loss": loss, "constraints": values, "violation": viol, "feasible": feasible}

    if threads > 1:
        # trajectories are cached per point so workers don't share mutable work
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, pts))
    else:
        rows = [row(p) for p in pts]
    rows.sort(key=lambda r: tuple(r["eps"]))
    feas = [r for r in rows if r["feasible"] and np.isfinite(r["loss"])]
    if not feas:
        nearest = min(rows, key=lambda r: max(r["violation"], default=0.0))
        raise DesignError(
            f"no feasible design among {len(rows)} candidates; nearest eps={nearest['eps']} "
            f"with max violation {max(nearest['violation'], default=0.0):.4g}"
        )
    best = min(feas, key=lambda r: (r["loss"], tuple(r["eps"])))
    return DesignResult(np.asarray(best["eps"]), float(best["loss"]), len(feas), rows)
