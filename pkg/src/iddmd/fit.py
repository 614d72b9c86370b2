"""Global regression, truncated SVDs and the reduced parametric operator family.

The model is ``x_k = (A_0 + sum_i eps_i A_i) x_{k-1}`` with scaled parameters
``eps_i``. All records are stacked into one regression ``Z = Theta Xi`` where
``Xi`` holds the blocks ``[X; eps_1 X; ...; eps_P X]``. The full operators are
never formed: both ``Z`` and ``Xi`` are truncated by SVD and the operators are
projected onto the leading left singular vectors of ``Z``.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .observables import ObservableConfig, polynomial_delay_lift
from .snapshots import (
    PairMatrices,
    ScalingFactors,
    SnapshotError,
    SnapshotSet,
    assemble_shifted_pairs,
    scale_parameters,
)

__all__ = [
    "RankError",
    "RegressionMatrices",
    "TruncatedSvd",
    "FitConfig",
    "IdDmdModel",
    "assemble_regression",
    "truncated_svd",
    "select_rank",
    "reduced_operators",
    "fit_regression",
    "fit_model",
    "save_model",
    "load_model",
]

MODEL_FORMAT_VERSION = 1
SIGMA_FLOOR = 1e-12


class RankError(ValueError):
    """Requested truncation rank is infeasible for the data."""


@dataclass(frozen=True)
class RegressionMatrices:
    z: np.ndarray
    xi: np.ndarray
    n_params: int

    @property
    def n(self) -> int:
        return self.z.shape[1]

    @property
    def m(self) -> int:
        return self.z.shape[0]

    def subset(self, columns: np.ndarray) -> "RegressionMatrices":
        """Same column index set applied to ``Z`` and ``Xi``."""
        # contiguous copies keep LAPACK results independent of the index pattern
        return RegressionMatrices(
            np.ascontiguousarray(self.z[:, columns]), np.ascontiguousarray(self.xi[:, columns]), self.n_params
        )


def assemble_regression(pairs: Sequence[PairMatrices]) -> RegressionMatrices:
    """Concatenate per-record pairs into ``Z = [X'_1 X'_2 ..]`` and ``Xi = [E_1 E_2 ..]``."""
    if not pairs:
        raise SnapshotError("no snapshot pairs to assemble")
    m = pairs[0].x.shape[0]
    P = pairs[0].params_scaled.size
    n = sum(p.width for p in pairs)
    z = np.empty((m, n))
    xi = np.empty(((P + 1) * m, n))
    col = 0
    for idx, pair in enumerate(pairs):
        if pair.x.shape[0] != m or pair.x_prime.shape != pair.x.shape:
            raise SnapshotError(f"record {idx}: inconsistent pair shapes")
        if pair.params_scaled.size != P:
            raise SnapshotError(f"record {idx}: {pair.params_scaled.size} parameters, expected {P}")
        w = pair.width
        z[:, col : col + w] = pair.x_prime
        xi[:m, col : col + w] = pair.x
        for i, e in enumerate(pair.params_scaled):
            xi[(i + 1) * m : (i + 2) * m, col : col + w] = e * pair.x
        col += w
    return RegressionMatrices(z, xi, P)


@dataclass(frozen=True)
class TruncatedSvd:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    # full singular spectrum before truncation, kept for diagnostics
    spectrum: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def rank(self) -> int:
        return self.sigma.size

    def discarded_energy(self) -> float:
        """Frobenius norm of the truncated tail."""
        tail = self.spectrum[self.rank :]
        return float(np.sqrt(np.sum(tail**2)))


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> None:
    # largest-magnitude entry of each left singular vector made positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u *= signs
    vt *= signs[:, None]


def truncated_svd(a: np.ndarray, r: int) -> TruncatedSvd:
    """Top-``r`` SVD factors of ``a`` with a deterministic sign convention."""
    a = np.asarray(a, dtype=np.float64)
    kmax = min(a.shape)
    if not 1 <= r <= kmax:
        raise RankError(f"rank {r} outside [1, {kmax}] for a {a.shape[0]}x{a.shape[1]} matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    _fix_signs(u, vt)
    return TruncatedSvd(u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy(), s)


def select_rank(sigma: np.ndarray, rel_tol: float = 1e-10, cap: int | None = None) -> int:
    """Largest ``r`` with ``sigma_r >= rel_tol * sigma_1``, capped at ``cap``."""
    sigma = np.asarray(sigma)
    if sigma.size == 0 or sigma[0] == 0:
        r = 1
    else:
        r = int(np.count_nonzero(sigma >= rel_tol * sigma[0]))
    if cap is not None:
        r = min(r, int(cap))
    return max(r, 1)


def reduced_operators(
    z_svd: TruncatedSvd, xi_svd: TruncatedSvd, z: np.ndarray, n_params: int
) -> tuple[np.ndarray, np.ndarray]:
    """Reduced operators ``A~_i`` and exact-mode factors ``C_i``.

    ``C_i = Z V_Xi Sigma_Xi^-1 U_Xi,i^* U`` and ``A~_i = U^* C_i`` where
    ``U_Xi,i`` is the ``i``-th contiguous ``m``-row block of ``U_Xi``.

    Returns
    -------
    reduced_ops : ndarray, shape (P+1, r_Z, r_Z)
    factors : ndarray, shape (P+1, m, r_Z)
    """
    m = z.shape[0]
    if xi_svd.u.shape[0] != (n_params + 1) * m:
        raise RankError(
            f"U_Xi has {xi_svd.u.shape[0]} rows, expected {(n_params + 1) * m}"
        )
    sig = xi_svd.sigma
    smax = xi_svd.spectrum[0] if xi_svd.spectrum.size else (sig[0] if sig.size else 0.0)
    u = z_svd.u
    r_z = u.shape[1]
    if smax == 0:
        zeros = np.zeros((n_params + 1, r_z, r_z))
        return zeros, np.zeros((n_params + 1, m, r_z))
    if sig[-1] < SIGMA_FLOOR * smax:
        raise RankError(
            f"rank {sig.size} too high for Xi: sigma_r/sigma_1 = {sig[-1] / smax:.3e} < {SIGMA_FLOOR:g}"
        )
    b = (z @ xi_svd.v) / sig
    factors = np.empty((n_params + 1, m, r_z))
    ops = np.empty((n_params + 1, r_z, r_z))
    for i in range(n_params + 1):
        block = xi_svd.u[i * m : (i + 1) * m]
        factors[i] = b @ (block.T @ u)
        ops[i] = u.T @ factors[i]
    return ops, factors


@dataclass
class FitConfig:
    """Identification settings.

    ``rank_z`` / ``rank_xi`` cap the automatically selected ranks; ``None``
    means no cap. ``alpha=None`` picks ``1 / max |eps|`` per parameter.
    """

    rank_z: int | None = None
    rank_xi: int | None = None
    alpha: ScalingFactors | Sequence[float] | None = None
    observables: ObservableConfig | None = None
    rank_tol: float = 1e-10

    def to_dict(self) -> dict:
        alpha = self.alpha.alpha.tolist() if isinstance(self.alpha, ScalingFactors) else (
            None if self.alpha is None else [float(a) for a in self.alpha]
        )
        return {
            "rank_z": self.rank_z,
            "rank_xi": self.rank_xi,
            "alpha": alpha,
            "observables": None if self.observables is None else self.observables.to_dict(),
            "rank_tol": self.rank_tol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        obs = d.get("observables")
        return cls(
            rank_z=d.get("rank_z"),
            rank_xi=d.get("rank_xi"),
            alpha=None if d.get("alpha") is None else ScalingFactors(d["alpha"]),
            observables=None if obs is None else ObservableConfig.from_dict(obs),
            rank_tol=float(d.get("rank_tol", 1e-10)),
        )


@dataclass
class IdDmdModel:
    reduced_ops: np.ndarray
    u: np.ndarray
    exact_mode_factors: np.ndarray
    alpha: ScalingFactors
    dt: float
    observables: ObservableConfig | None = None
    param_names: tuple = ()
    sigma_z: np.ndarray = field(default_factory=lambda: np.empty(0))
    sigma_xi: np.ndarray = field(default_factory=lambda: np.empty(0))
    config: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return self.reduced_ops.shape[0] - 1

    @property
    def ranks(self) -> tuple[int, int]:
        r_xi = int(self.config.get("rank_xi_used", self.reduced_ops.shape[1]))
        return self.reduced_ops.shape[1], r_xi

    @property
    def m(self) -> int:
        """Dimension of the (possibly lifted) state the operators act on."""
        return self.u.shape[0]

    @property
    def physical_dim(self) -> int:
        return self.m if self.observables is None else self.observables.base_dim

    def scaled(self, eps) -> np.ndarray:
        return scale_parameters(eps, self.alpha)

    def operator(self, eps) -> np.ndarray:
        """Reduced operator ``A~_0 + sum_i eps_i A~_i`` at physical parameters ``eps``."""
        e = self.scaled(eps)
        return self.reduced_ops[0] + np.tensordot(e, self.reduced_ops[1:], axes=1)

    def mode_factor(self, eps) -> np.ndarray:
        e = self.scaled(eps)
        return self.exact_mode_factors[0] + np.tensordot(e, self.exact_mode_factors[1:], axes=1)


def fit_regression(
    reg: RegressionMatrices,
    alpha: ScalingFactors,
    dt: float,
    cfg: FitConfig,
    observables: ObservableConfig | None = None,
    param_names: tuple = (),
) -> IdDmdModel:
    """Fit the reduced operator family from assembled regression matrices."""
    kz = min(reg.z.shape)
    kx = min(reg.xi.shape)
    u, s, vt = np.linalg.svd(reg.z, full_matrices=False)
    _fix_signs(u, vt)
    r_z = select_rank(s, cfg.rank_tol, cfg.rank_z)
    if cfg.rank_z is not None and cfg.rank_z > kz:
        r_z = min(r_z, kz)
    z_svd = TruncatedSvd(u[:, :r_z].copy(), s[:r_z].copy(), vt[:r_z].T.copy(), s)
    ux, sx, vxt = np.linalg.svd(reg.xi, full_matrices=False)
    _fix_signs(ux, vxt)
    r_xi = select_rank(sx, cfg.rank_tol, cfg.rank_xi)
    r_xi = min(r_xi, kx)
    xi_svd = TruncatedSvd(ux[:, :r_xi].copy(), sx[:r_xi].copy(), vxt[:r_xi].T.copy(), sx)
    ops, factors = reduced_operators(z_svd, xi_svd, reg.z, reg.n_params)
    conf = cfg.to_dict()
    conf.update({"rank_z_used": r_z, "rank_xi_used": r_xi})
    return IdDmdModel(
        reduced_ops=ops,
        u=z_svd.u,
        exact_mode_factors=factors,
        alpha=alpha,
        dt=float(dt),
        observables=observables,
        param_names=tuple(param_names),
        sigma_z=s,
        sigma_xi=sx,
        config=conf,
    )


def resolve_alpha(snapshots: SnapshotSet, cfg: FitConfig) -> ScalingFactors:
    if cfg.alpha is None:
        return ScalingFactors.from_data(snapshots)
    if isinstance(cfg.alpha, ScalingFactors):
        return cfg.alpha
    return ScalingFactors(cfg.alpha)


def build_regression(snapshots: SnapshotSet, cfg: FitConfig) -> tuple[RegressionMatrices, ScalingFactors]:
    """Lift (if configured), pair and stack the data."""
    alpha = resolve_alpha(snapshots, cfg)
    data = snapshots
    if cfg.observables is not None and not cfg.observables.is_identity:
        data = polynomial_delay_lift(snapshots, cfg.observables).snapshots
    pairs = assemble_shifted_pairs(data, alpha)
    return assemble_regression(pairs), alpha


def fit_model(snapshots: SnapshotSet, cfg: FitConfig | None = None) -> IdDmdModel:
    """Lift -> pairs -> regression -> truncated SVDs -> reduced operators."""
    cfg = cfg or FitConfig()
    reg, alpha = build_regression(snapshots, cfg)
    obs = cfg.observables if cfg.observables is not None and not cfg.observables.is_identity else None
    return fit_regression(reg, alpha, snapshots.dt, cfg, obs, snapshots.param_names)


# -- model file ------------------------------------------------------------------

_ARRAYS = ("reduced_ops", "u", "exact_mode_factors", "sigma_z", "sigma_xi", "alpha")


def _model_arrays(model: IdDmdModel) -> dict[str, np.ndarray]:
    return {
        "reduced_ops": model.reduced_ops,
        "u": model.u,
        "exact_mode_factors": model.exact_mode_factors,
        "sigma_z": model.sigma_z,
        "sigma_xi": model.sigma_xi,
        "alpha": model.alpha.alpha,
    }


def _content_hash(arrays: dict[str, np.ndarray], meta_json: str) -> str:
    h = hashlib.sha256()
    for name in _ARRAYS:
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        h.update(name.encode())
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    h.update(meta_json.encode())
    return h.hexdigest()


def save_model(model: IdDmdModel, path) -> str:
    """Write ``model`` to an ``.npz`` container; returns the content hash."""
    arrays = _model_arrays(model)
    meta = {
        "format": "iddmd-model",
        "version": MODEL_FORMAT_VERSION,
        "dt": model.dt,
        "param_names": list(model.param_names),
        "observables": None if model.observables is None else model.observables.to_dict(),
        "config": model.config,
    }
    meta_json = json.dumps(meta, sort_keys=True)
    digest = _content_hash(arrays, meta_json)
    buf = io.BytesIO()
    np.savez(buf, meta=np.array(meta_json), sha256=np.array(digest), **arrays)
    Path(path).write_bytes(buf.getvalue())
    return digest


def load_model(path) -> IdDmdModel:
    path = Path(path)
    if not path.exists():
        raise SnapshotError(f"model file not found: {path}")
    with np.load(path, allow_pickle=False) as f:
        meta_json = str(f["meta"])
        digest = str(f["sha256"])
        arrays = {name: f[name] for name in _ARRAYS}
    if _content_hash(arrays, meta_json) != digest:
        raise SnapshotError(f"{path}: content hash mismatch")
    meta = json.loads(meta_json)
    if meta.get("format") != "iddmd-model" or meta.get("version") != MODEL_FORMAT_VERSION:
        raise SnapshotError(f"{path}: unsupported model format")
    obs = meta.get("observables")
    return IdDmdModel(
        reduced_ops=arrays["reduced_ops"],
        u=arrays["u"],
        exact_mode_factors=arrays["exact_mode_factors"],
        alpha=ScalingFactors(arrays["alpha"]) if arrays["alpha"].size else ScalingFactors(np.ones(0)),
        dt=float(meta["dt"]),
        observables=None if obs is None else ObservableConfig.from_dict(obs),
        param_names=tuple(meta.get("param_names", ())),
        sigma_z=arrays["sigma_z"],
        sigma_xi=arrays["sigma_xi"],
        config=meta.get("config", {}),
    )
