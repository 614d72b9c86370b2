"""Polynomial / time-delay observables for Koopman lifting.

Signals are delay-embedded first. With ``delay_depth = d`` and base signals
``x_1 .. x_q`` the embedded vector at step ``k`` is::

    [x_1(k), x_1(k-1), .., x_1(k-d), x_2(k), .., x_q(k-d)]

and the observables are all monomials of these ``v = q (d + 1)`` signals up to
``max_degree``, graded by total degree and, within a degree, ordered like
``itertools.combinations_with_replacement`` over the signal indices (so
``y(k)^2, y(k) y(k-1), y(k-1)^2``). An optional constant comes first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .snapshots import SnapshotError, SnapshotSet

__all__ = [
    "ObservableConfig",
    "LiftedSet",
    "lifted_dimension",
    "monomial_exponents",
    "lift_states",
    "lift_history",
    "polynomial_delay_lift",
    "extract_physical_states",
]


def lifted_dimension(v: int, max_degree: int, include_constant: bool = False) -> int:
    """Number of observables for ``v`` embedded signals and total degree cap ``max_degree``."""
    return comb(max_degree + v, v) - 1 + int(include_constant)


@dataclass(frozen=True)
class ObservableConfig:
    base_dim: int
    delay_depth: int = 0
    max_degree: int = 1
    include_constant: bool = False

    def __post_init__(self):
        if self.base_dim < 1:
            raise ValueError("base_dim must be >= 1")
        if self.delay_depth < 0:
            raise ValueError("delay_depth must be >= 0")
        if self.max_degree < 1:
            raise ValueError("max_degree must be >= 1")

    @property
    def n_signals(self) -> int:
        return self.base_dim * (self.delay_depth + 1)

    @property
    def dimension(self) -> int:
        return lifted_dimension(self.n_signals, self.max_degree, self.include_constant)

    @property
    def is_identity(self) -> bool:
        return self.delay_depth == 0 and self.max_degree == 1 and not self.include_constant

    def physical_rows(self) -> np.ndarray:
        """Row indices of the zero-delay, degree-1 monomials, in signal order."""
        off = int(self.include_constant)
        return off + np.arange(self.base_dim) * (self.delay_depth + 1)

    def to_dict(self) -> dict:
        return {
            "base_dim": self.base_dim,
            "delay_depth": self.delay_depth,
            "max_degree": self.max_degree,
            "include_constant": self.include_constant,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObservableConfig":
        return cls(
            base_dim=int(d["base_dim"]),
            delay_depth=int(d.get("delay_depth", 0)),
            max_degree=int(d.get("max_degree", 1)),
            include_constant=bool(d.get("include_constant", False)),
        )


def monomial_exponents(v: int, max_degree: int, include_constant: bool = False) -> np.ndarray:
    """Exponent vectors of all observables, one row per monomial."""
    rows = []
    if include_constant:
        rows.append(np.zeros(v, dtype=np.int64))
    for deg in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(v), deg):
            e = np.zeros(v, dtype=np.int64)
            for i in combo:
                e[i] += 1
            rows.append(e)
    return np.array(rows, dtype=np.int64).reshape(len(rows), v)


def _embed(states: np.ndarray, d: int) -> np.ndarray:
    """Delay embedding; column ``j`` of the result is time ``j + d`` of the input."""
    q, n = states.shape
    n_out = n - d
    out = np.empty((q * (d + 1), n_out))
    for i in range(q):
        for lag in range(d + 1):
            out[i * (d + 1) + lag] = states[i, d - lag : d - lag + n_out]
    return out


def _monomials(embedded: np.ndarray, cfg: ObservableConfig) -> np.ndarray:
    v, n = embedded.shape
    rows = []
    if cfg.include_constant:
        rows.append(np.ones(n))
    # products built degree by degree from the previous degree's rows
    prev = [((i,), embedded[i]) for i in range(v)]
    rows.extend(r for _, r in prev)
    for _ in range(2, cfg.max_degree + 1):
        nxt = []
        for combo, vals in prev:
            for i in range(combo[-1], v):
                nxt.append((combo + (i,), vals * embedded[i]))
        rows.extend(r for _, r in nxt)
        prev = nxt
    return np.vstack(rows) if rows else np.empty((0, n))


def lift_states(states: np.ndarray, cfg: ObservableConfig) -> np.ndarray:
    """Lift a ``base_dim x n`` trajectory; the first ``delay_depth`` columns are consumed."""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim == 1:
        states = states[:, None]
    if states.shape[0] != cfg.base_dim:
        raise SnapshotError(f"expected {cfg.base_dim} signals, got {states.shape[0]}")
    if states.shape[1] < cfg.delay_depth + 1:
        raise SnapshotError(
            f"need at least {cfg.delay_depth + 1} snapshots for delay depth {cfg.delay_depth}"
        )
    if cfg.is_identity:
        return states.copy()
    return _monomials(_embed(states, cfg.delay_depth), cfg)


def lift_history(history: np.ndarray, cfg: ObservableConfig) -> np.ndarray:
    """Observable vector at the newest of ``delay_depth + 1`` raw snapshots (oldest first)."""
    history = np.asarray(history, dtype=np.float64)
    if history.ndim == 1:
        if cfg.delay_depth == 0:
            history = history[:, None]
        else:
            history = history[None, :] if cfg.base_dim == 1 else history.reshape(cfg.base_dim, -1)
    if history.shape != (cfg.base_dim, cfg.delay_depth + 1):
        raise SnapshotError(
            f"initial history must be {cfg.base_dim}x{cfg.delay_depth + 1}, got {history.shape}"
        )
    return lift_states(history, cfg)[:, -1]


@dataclass(frozen=True)
class LiftedSet:
    snapshots: SnapshotSet
    monomial_index: np.ndarray
    config: ObservableConfig


def polynomial_delay_lift(snapshots: SnapshotSet, cfg: ObservableConfig) -> LiftedSet:
    """Lift every record of ``snapshots``; records shrink by ``delay_depth`` columns."""
    if snapshots.m != cfg.base_dim:
        raise SnapshotError(f"config expects {cfg.base_dim} signals, data has {snapshots.m}")
    lifted = []
    for idx, rec in enumerate(snapshots.records):
        if rec.length < cfg.delay_depth + 2:
            raise SnapshotError(
                f"record {idx}: length {rec.length} < delay_depth + 2 = {cfg.delay_depth + 2}"
            )
        lifted.append(lift_states(rec.states, cfg))
    out = snapshots.replace_states(lifted)
    return LiftedSet(out, monomial_exponents(cfg.n_signals, cfg.max_degree, cfg.include_constant), cfg)


def extract_physical_states(lifted_traj: np.ndarray, cfg: ObservableConfig) -> np.ndarray:
    """Select the raw-signal rows from a lifted trajectory."""
    lifted_traj = np.asarray(lifted_traj)
    if lifted_traj.ndim == 1:
        lifted_traj = lifted_traj[:, None]
    if lifted_traj.shape[0] != cfg.dimension:
        raise SnapshotError(
            f"lifted trajectory has {lifted_traj.shape[0]} rows, config expects {cfg.dimension}"
        )
    if cfg.is_identity:
        return lifted_traj
    return lifted_traj[cfg.physical_rows()]
