"""Trajectory reconstruction from modes and validation error measures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fit import IdDmdModel
from .modal import ModalDecomposition, modal_decomposition
from .observables import extract_physical_states, lift_history
from .snapshots import SnapshotError

__all__ = [
    "Trajectory",
    "SymmetryError",
    "initial_observables",
    "reconstruct_trajectory",
    "relative_error",
    "max_relative_error",
]

IMAG_TOL = 1e-6


class SymmetryError(RuntimeError):
    """Reconstructed trajectory has a non-negligible imaginary part."""


@dataclass
class Trajectory:
    """Real states ``m x K`` at times ``k * dt`` (``k = 0 .. K-1``) for parameters ``eps``."""

    states: np.ndarray
    times: np.ndarray
    eps: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.states.shape[1]


def initial_observables(model: IdDmdModel, x1) -> np.ndarray:
    """Map a raw initial state (or delay history) to the model's state space."""
    x1 = np.asarray(x1, dtype=np.float64)
    if model.observables is None:
        x1 = x1.reshape(-1)
        if x1.size != model.m:
            raise SnapshotError(f"initial state has {x1.size} entries, model expects {model.m}")
        return x1
    return lift_history(x1, model.observables)


def reconstruct_trajectory(
    model: IdDmdModel,
    eps,
    x1,
    n_steps: int,
    mode_method: str = "exact",
    decomposition: ModalDecomposition | None = None,
) -> Trajectory:
    """Predict ``n_steps`` snapshots starting from ``x1`` at parameters ``eps``.

    For lifted models ``x1`` is the ``base_dim x (delay_depth + 1)`` block of
    the first raw snapshots (oldest first); the returned trajectory starts at
    the newest of them and holds physical states only.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dec = decomposition if decomposition is not None else modal_decomposition(model, eps, mode_method)
    psi = initial_observables(model, x1)
    k = np.arange(n_steps)
    if len(dec) == 0:
        # every eigenvalue was zero: the model maps any state to zero
        warnings.warn("no modes left after dropping zero eigenvalues; trajectory is zero", RuntimeWarning, stacklevel=2)
        states = np.zeros((model.physical_dim, n_steps))
        return Trajectory(states, k * model.dt, np.atleast_1d(np.asarray(eps, dtype=float)))
    if np.linalg.matrix_rank(dec.phi) < dec.phi.shape[1]:
        warnings.warn("mode matrix is rank deficient; using minimum-norm amplitudes", RuntimeWarning, stacklevel=2)
    b, *_ = np.linalg.lstsq(dec.phi, psi.astype(complex), rcond=None)
    powers = np.exp(np.outer(dec.step_log, k))
    traj = dec.phi @ (b[:, None] * powers)
    scale = np.max(np.abs(traj.real), initial=0.0)
    resid = np.max(np.abs(traj.imag), initial=0.0)
    if resid > IMAG_TOL * max(scale, np.finfo(float).tiny):
        raise SymmetryError(f"imaginary residue {resid:.3e} exceeds {IMAG_TOL:g} x max|state| = {scale:.3e}")
    states = traj.real
    if model.observables is not None:
        states = extract_physical_states(states, model.observables)
    return Trajectory(states, k * model.dt, np.atleast_1d(np.asarray(eps, dtype=float)))


def _as_array(x) -> np.ndarray:
    return x.states if isinstance(x, Trajectory) else np.asarray(x, dtype=np.float64)


def relative_error(pred, truth) -> tuple[np.ndarray, float]:
    """Per-step relative error and its time mean.

    ``eta_k = max_i |pred_ik - truth_ik| / max |truth|`` with the denominator
    taken over the whole truth record; values are fractions (0.1 = 10 %).
    """
    p = _as_array(pred)
    t = _as_array(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: prediction {p.shape}, truth {t.shape}")
    denom = np.max(np.abs(t))
    if denom == 0:
        raise ValueError("truth is identically zero; relative error undefined")
    eta = np.max(np.abs(p - t), axis=0) / denom
    return eta, float(np.mean(eta))


def max_relative_error(pred, truth) -> float:
    eta, _ = relative_error(pred, truth)
    return float(np.max(eta))
