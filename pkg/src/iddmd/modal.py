"""Modal analysis of a fitted model at a query parameter.

Eigenvalues of the reduced operator are the discrete-time eigenvalues of the
full operator; modes are lifted back to the full space either through the
stored exact-mode factors or by the projection basis. Continuous-time
frequencies ``s = log(lambda) / dt`` have their growth rates clamped to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fit import IdDmdModel

__all__ = [
    "ModalDecomposition",
    "ModeClassification",
    "evaluate_reduced_operator",
    "continuous_frequencies",
    "modal_decomposition",
    "classify_modes",
    "mode_amplitudes",
]

ZERO_EIG = 1e-12


# roundoff allowance so constant-frequency tracks pass at tol_rel = 0
SPREAD_FLOOR = 1e-10


def evaluate_reduced_operator(model: IdDmdModel, eps) -> np.ndarray:
    return model.operator(eps)


def continuous_frequencies(lam: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Principal-branch ``log(lam) / dt`` with positive real parts clamped to zero.

    Returns ``(s, clamped)``.
    """
    s = np.log(np.asarray(lam, dtype=complex)) / dt
    clamped = s.real > 0
    s = np.where(clamped, 1j * s.imag, s)
    return s, clamped


@dataclass
class ModalDecomposition:
    lam: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    s: np.ndarray
    clamped: np.ndarray
    dt: float
    eps: np.ndarray
    dropped: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def sigma(self) -> np.ndarray:
        return self.s.real

    @property
    def omega(self) -> np.ndarray:
        return self.s.imag

    @property
    def step_log(self) -> np.ndarray:
        """Per-step exponent ``log(lambda)`` with the clamp applied."""
        return self.s * self.dt

    def __len__(self) -> int:
        return self.lam.size


def modal_decomposition(model: IdDmdModel, eps, mode_method: str = "exact") -> ModalDecomposition:
    """Eigenvalues, reduced eigenvectors, full modes and continuous frequencies at ``eps``."""
    if mode_method not in ("exact", "projected"):
        raise ValueError(f"mode_method must be 'exact' or 'projected', got {mode_method!r}")
    a = model.operator(eps)
    lam, w = np.linalg.eig(a)
    keep = np.abs(lam) >= ZERO_EIG * max(1.0, np.max(np.abs(lam), initial=0.0))
    dropped = np.flatnonzero(~keep)
    if dropped.size:
        warnings.warn(f"dropping {dropped.size} mode(s) with zero eigenvalue", RuntimeWarning, stacklevel=2)
    lam = lam[keep]
    w = w[:, keep]
    if mode_method == "exact":
        phi = model.mode_factor(eps) @ w
    else:
        phi = model.u @ w
    s, clamped = continuous_frequencies(lam, model.dt)
    return ModalDecomposition(lam, w, phi, s, clamped, model.dt, np.atleast_1d(np.asarray(eps, float)), dropped)


def mode_amplitudes(dec: ModalDecomposition, x1: np.ndarray) -> np.ndarray:
    """Least-squares amplitudes ``b = Phi^+ x1``."""
    b, *_ = np.linalg.lstsq(dec.phi, np.asarray(x1, dtype=complex), rcond=None)
    return b


@dataclass
class ModeClassification:
    """Frequency tracks across a parameter sweep.

    ``tracks[t, g]`` is the mode index at grid point ``g`` belonging to track
    ``t`` (``-1`` if unmatched); ``omega[t, g]`` the matching frequency.
    """

    eps_grid: np.ndarray
    tracks: np.ndarray
    omega: np.ndarray
    labels: list
    frequency_spread: np.ndarray
    median_omega: np.ndarray

    def dominant(self) -> np.ndarray:
        return np.array([i for i, lab in enumerate(self.labels) if lab == "dominant"], dtype=int)

    def dominant_frequencies(self, positive: bool = True) -> np.ndarray:
        med = self.median_omega[self.dominant()]
        return np.sort(med[med > 0]) if positive else np.sort(med)

    def label_at(self, g: int) -> dict[int, str]:
        """Mode index -> label at grid point ``g``."""
        out = {}
        for t, lab in enumerate(self.labels):
            j = self.tracks[t, g]
            if j >= 0:
                out[int(j)] = lab
        return out


def _match(prev: np.ndarray, cur: np.ndarray) -> dict[int, int]:
    """Greedy nearest-frequency assignment ``prev index -> cur index``."""
    if prev.size == 0 or cur.size == 0:
        return {}
    d = np.abs(prev[:, None] - cur[None, :])
    order = np.argsort(d, axis=None, kind="stable")
    used_p, used_c, out = set(), set(), {}
    for flat in order:
        i, j = divmod(int(flat), cur.size)
        if i in used_p or j in used_c:
            continue
        out[i] = j
        used_p.add(i)
        used_c.add(j)
        if len(used_p) == prev.size or len(used_c) == cur.size:
            break
    return out


def classify_modes(
    model: IdDmdModel,
    eps_grid: Sequence,
    tol_rel: float = 0.02,
    mode_method: str = "exact",
    decompositions: Sequence[ModalDecomposition] | None = None,
) -> ModeClassification:
    """Track modes over a parameter sweep and label them dominant or spurious.

    Tracks start at the middle grid point and are extended outward by greedy
    nearest-frequency matching. A track is dominant when it covers the whole
    grid, is oscillatory everywhere (non-real eigenvalues) and its frequency
    never departs from the track median by more than ``tol_rel`` times the
    median.
    """
    grid = np.array([np.atleast_1d(np.asarray(e, dtype=float)) for e in eps_grid])
    if grid.shape[0] < 3:
        raise ValueError("need at least 3 grid points to classify modes")
    decs = list(decompositions) if decompositions is not None else [
        modal_decomposition(model, e, mode_method) for e in grid
    ]
    if any(len(d) == 0 for d in decs):
        raise ValueError("empty modal decomposition in sweep")
    G = len(decs)
    mid = G // 2
    n_tracks = len(decs[mid])
    tracks = -np.ones((n_tracks, G), dtype=int)
    tracks[:, mid] = np.arange(n_tracks)
    for direction in (1, -1):
        g = mid
        while 0 <= g + direction < G:
            nxt = g + direction
            alive = np.flatnonzero(tracks[:, g] >= 0)
            prev_w = decs[g].omega[tracks[alive, g]]
            mapping = _match(prev_w, decs[nxt].omega)
            for a_pos, j in mapping.items():
                tracks[alive[a_pos], nxt] = j
            g = nxt
    omega = np.full((n_tracks, G), np.nan)
    real_flag = np.zeros((n_tracks, G), dtype=bool)
    for g, dec in enumerate(decs):
        ok = tracks[:, g] >= 0
        idx = tracks[ok, g]
        omega[ok, g] = dec.omega[idx]
        lam = dec.lam[idx]
        real_flag[ok, g] = np.abs(lam.imag) <= 1e-10 * np.maximum(np.abs(lam), 1e-300)
    labels, spread, med = [], np.full(n_tracks, np.inf), np.full(n_tracks, np.nan)
    for t in range(n_tracks):
        row = omega[t]
        complete = np.all(np.isfinite(row))
        if np.any(np.isfinite(row)):
            med[t] = np.nanmedian(row)
            spread[t] = np.nanmax(np.abs(row - med[t]))
        dominant = (
            complete
            and not real_flag[t].any()
            and spread[t] <= (tol_rel + SPREAD_FLOOR) * abs(med[t])
        )
        labels.append("dominant" if dominant else "spurious")
    return ModeClassification(grid, tracks, omega, labels, spread, med)
