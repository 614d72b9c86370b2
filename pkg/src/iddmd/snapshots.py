"""Multi-experiment snapshot data: containers, validation, file I/O and
time-shifted pair assembly.

A :class:`SnapshotSet` holds one record per design-parameter set. Each record
is an ``m x n_l`` real matrix whose columns are consecutive snapshots sampled
every ``dt`` seconds.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

__all__ = [
    "SnapshotError",
    "SnapshotRecord",
    "SnapshotSet",
    "ScalingFactors",
    "PairMatrices",
    "scale_parameters",
    "unscale_parameters",
    "assemble_shifted_pairs",
    "read_matrix",
    "write_matrix",
    "load_snapshot_set",
    "save_snapshot_set",
]

BINARY_MAGIC = b"IDMD"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class SnapshotError(ValueError):
    """Raised for malformed or inconsistent snapshot data."""


@dataclass(frozen=True)
class SnapshotRecord:
    """States sampled under one set of design-parameter values."""

    params: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "params", np.atleast_1d(np.asarray(self.params, dtype=np.float64)))
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[None, :]
        object.__setattr__(self, "states", states)

    @property
    def length(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class SnapshotSet:
    """Validated collection of snapshot records sharing ``m``, ``dt`` and ``P``.

    Parameters
    ----------
    records : sequence of SnapshotRecord
        One record per experiment, in manifest order.
    dt : float
        Sampling time in seconds.
    param_names : sequence of str, optional
        Labels of the design parameters. Defaults to ``eps1, eps2, ...``.
    state_layout : dict, optional
        Free-form spatial-grid metadata (for example ``{"dims": [101]}``).
    """

    records: tuple
    dt: float
    param_names: tuple = ()
    state_layout: dict | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        records = tuple(
            r if isinstance(r, SnapshotRecord) else SnapshotRecord(*r) for r in self.records
        )
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "dt", float(self.dt))
        if not records:
            raise SnapshotError("snapshot set has no records")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise SnapshotError(f"dt must be positive and finite, got {self.dt}")
        m = records[0].states.shape[0]
        P = records[0].params.size
        for idx, rec in enumerate(records):
            if rec.states.ndim != 2:
                raise SnapshotError(f"record {idx}: states must be a 2-D matrix")
            if rec.states.shape[0] != m:
                raise SnapshotError(
                    f"record {idx}: state dimension {rec.states.shape[0]} != {m} (record 0)"
                )
            if rec.params.size != P:
                raise SnapshotError(
                    f"record {idx}: {rec.params.size} parameters, expected {P}"
                )
            if rec.length < 2:
                raise SnapshotError(f"record {idx}: needs at least 2 snapshots, has {rec.length}")
            _check_finite(rec.states, f"record {idx}")
            if not np.all(np.isfinite(rec.params)):
                raise SnapshotError(f"record {idx}: non-finite parameter value")
        names = tuple(self.param_names) if self.param_names else tuple(f"eps{i + 1}" for i in range(P))
        if len(names) != P:
            raise SnapshotError(f"{len(names)} parameter names given for P={P}")
        object.__setattr__(self, "param_names", names)

    @property
    def m(self) -> int:
        return self.records[0].states.shape[0]

    @property
    def n_params(self) -> int:
        return self.records[0].params.size

    @property
    def params(self) -> np.ndarray:
        """``(n_records, P)`` array of the raw parameter values."""
        return np.array([r.params for r in self.records]).reshape(len(self.records), self.n_params)

    def __len__(self) -> int:
        return len(self.records)

    def replace_states(self, states: Sequence[np.ndarray]) -> "SnapshotSet":
        """Return a copy with new state matrices, keeping parameters and metadata."""
        recs = [SnapshotRecord(r.params, s) for r, s in zip(self.records, states)]
        return SnapshotSet(recs, self.dt, self.param_names, self.state_layout, dict(self.metadata))


def _check_finite(a: np.ndarray, where: str) -> None:
    bad = ~np.isfinite(a)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise SnapshotError(f"{where}: non-finite value at cell (row {i}, column {j})")


@dataclass(frozen=True)
class ScalingFactors:
    """Per-parameter positive scaling factors ``alpha_i``."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if a.ndim != 1 or not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise SnapshotError(f"scaling factors must be positive and finite, got {a}")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def identity(cls, n_params: int) -> "ScalingFactors":
        return cls(np.ones(n_params))

    @classmethod
    def from_data(cls, snapshots: SnapshotSet) -> "ScalingFactors":
        """Default factors ``1 / max_l |eps_i,(l)|`` (1 where a parameter is all zero)."""
        if snapshots.n_params == 0:
            return cls(np.ones(0))
        peak = np.max(np.abs(snapshots.params), axis=0)
        return cls(np.where(peak > 0, 1.0 / np.where(peak > 0, peak, 1.0), 1.0))

    def __len__(self) -> int:
        return self.alpha.size


def scale_parameters(params, alpha: ScalingFactors) -> np.ndarray:
    """Scaled design parameters ``alpha_i * eps_i``."""
    p = np.atleast_1d(np.asarray(params, dtype=np.float64))
    if p.shape != alpha.alpha.shape:
        raise SnapshotError(f"parameter vector has {p.size} entries, scaling has {alpha.alpha.size}")
    return alpha.alpha * p


def unscale_parameters(scaled, alpha: ScalingFactors) -> np.ndarray:
    p = np.atleast_1d(np.asarray(scaled, dtype=np.float64))
    if p.shape != alpha.alpha.shape:
        raise SnapshotError(f"parameter vector has {p.size} entries, scaling has {alpha.alpha.size}")
    return p / alpha.alpha


@dataclass(frozen=True)
class PairMatrices:
    """Time-shifted snapshot pair ``(X', X)`` of one record plus its scaled parameters."""

    x_prime: np.ndarray
    x: np.ndarray
    params_scaled: np.ndarray

    @property
    def width(self) -> int:
        return self.x.shape[1]


def assemble_shifted_pairs(snapshots: SnapshotSet, alpha: ScalingFactors) -> list[PairMatrices]:
    """Split every record into ``X`` (all but last column) and ``X'`` (all but first)."""
    pairs = []
    for rec in snapshots.records:
        pairs.append(
            PairMatrices(
                x_prime=rec.states[:, 1:],
                x=rec.states[:, :-1],
                params_scaled=scale_parameters(rec.params, alpha),
            )
        )
    return pairs


# -- file formats -------------------------------------------------------------


def write_matrix(path, a: np.ndarray) -> None:
    """Write a 2-D matrix as CSV (``.csv``) or the ``IDMD`` binary format (anything else)."""
    path = Path(path)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if path.suffix.lower() == ".csv":
        np.savetxt(path, a, delimiter=",", fmt="%.17g")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, a.shape[0], a.shape[1]))
        fh.write(np.asfortranarray(a).astype("<f8").tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`. Format is sniffed from the magic bytes."""
    path = Path(path)
    if not path.exists():
        raise SnapshotError(f"data file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if head[:4] == BINARY_MAGIC:
            if len(head) < _HEADER.size:
                raise SnapshotError(f"{path}: truncated binary header")
            _, version, rows, cols = _HEADER.unpack(head)
            if version != BINARY_VERSION:
                raise SnapshotError(f"{path}: unsupported binary version {version}")
            buf = fh.read()
            if len(buf) != rows * cols * 8:
                raise SnapshotError(f"{path}: expected {rows * cols} values, found {len(buf) // 8}")
            return np.frombuffer(buf, dtype="<f8").reshape((rows, cols), order="F").astype(np.float64)
    try:
        a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise SnapshotError(f"{path}: cannot parse CSV ({exc})") from exc
    return a


def load_snapshot_set(manifest_path) -> SnapshotSet:
    """Load and validate a snapshot set from a JSON manifest.

    The manifest has keys ``dt``, ``param_names``, ``records`` (each with
    ``params`` and a ``data`` path relative to the manifest) and an optional
    ``grid`` entry.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise SnapshotError(f"manifest not found: {manifest_path}")
    try:
        spec = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{manifest_path}: invalid JSON ({exc})") from exc
    for key in ("dt", "records"):
        if key not in spec:
            raise SnapshotError(f"{manifest_path}: missing key {key!r}")
    base = manifest_path.parent
    records = []
    for idx, entry in enumerate(spec["records"]):
        try:
            states = read_matrix(base / entry["data"])
        except SnapshotError as exc:
            raise SnapshotError(f"record {idx}: {exc}") from exc
        except KeyError as exc:
            raise SnapshotError(f"record {idx}: missing key {exc}") from exc
        _check_finite(states, f"record {idx}")
        records.append(SnapshotRecord(entry.get("params", []), states))
    meta = {k: v for k, v in spec.items() if k not in ("dt", "records", "param_names", "grid")}
    return SnapshotSet(
        records,
        spec["dt"],
        tuple(spec.get("param_names", ())),
        spec.get("grid"),
        meta,
    )


def save_snapshot_set(snapshots: SnapshotSet, manifest_path, fmt: str = "bin") -> Path:
    """Write data files next to ``manifest_path`` and the manifest itself.

    ``fmt`` is ``"bin"`` (``IDMD`` binary) or ``"csv"``.
    """
    if fmt not in ("bin", "csv"):
        raise ValueError(f"unknown data format {fmt!r}")
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    stem = manifest_path.stem
    entries = []
    for idx, rec in enumerate(snapshots.records):
        name = f"{stem}_record{idx:03d}.{fmt}"
        write_matrix(manifest_path.parent / name, rec.states)
        entries.append({"params": rec.params.tolist(), "data": name})
    spec: dict[str, Any] = dict(snapshots.metadata)
    spec.update(
        {
            "dt": snapshots.dt,
            "param_names": list(snapshots.param_names),
            "records": entries,
        }
    )
    if snapshots.state_layout is not None:
        spec["grid"] = snapshots.state_layout
    tmp = manifest_path.with_suffix(manifest_path.suffix + ".tmp")
    tmp.write_text(json.dumps(spec, indent=2), encoding="utf-8")
    os.replace(tmp, manifest_path)
    return manifest_path
