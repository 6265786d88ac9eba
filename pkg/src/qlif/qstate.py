"""Discretized superposed-spacetime states and their metric-weighted overlap.

A state is a finite sum of branches.  Each branch pairs a mass-configuration
label and a classical metric with the relative wavefunction of the probe
particle, sampled on a shared spatial grid at one fixed coordinate time
(the equal-time restriction: the time label is a parameter, not a grid
axis).  Wavefunctions are measured with the branch's own volume weight
sqrt(-g_i) d^3x, so

    <a|b> = sum over matching (mass_label, metric_id) branches of
            conj(amp_a) amp_b * sum_points conj(psi_a) psi_b sqrt(-g_i) dV

and branches with different labels are orthogonal by construction, which is
how "macroscopically distinguishable implies orthogonal" is represented.

Grid sums run over C-ordered (x, y, z) arrays with np.sum, branches in
input order; this fixed scheme makes every overlap deterministic.

States are immutable: all operations return new objects and wavefunction
arrays are frozen (writeable = False) on construction.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import GridMismatch, OffGridTranslation, WrongFrame, ZeroNorm
from .spacetime import FourVector, MetricField, UnitSystem, metric_from_dict, sqrt_neg_det_batch


class Frame(str, Enum):
    """Whose origin the relative coordinates refer to."""

    R = "R"
    P = "P"


@dataclass(frozen=True)
class GridSpec:
    """Uniform spatial grid: per-axis bounds (inclusive) and point counts.

    Spacing is (hi - lo) / (n - 1) per axis; samples are stored row-major
    with axis order (x, y, z).  ``t0`` is the fixed coordinate time of the
    slice (as x0 = c*t0).
    """

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    n: tuple[int, int, int]
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if len(self.lo) != 3 or len(self.hi) != 3 or len(self.n) != 3:
            raise ValueError("GridSpec needs 3 spatial axes")
        for lo, hi, n in zip(self.lo, self.hi, self.n):
            if n < 2:
                raise ValueError("point counts must be >= 2")
            if not (hi > lo):
                raise ValueError("bounds must satisfy hi > lo")
        if not np.isfinite(self.t0):
            raise ValueError("t0 must be finite")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple((h - l) / (n - 1) for l, h, n in zip(self.lo, self.hi, self.n))

    @property
    def dvol(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def axis(self, i: int) -> np.ndarray:
        return np.linspace(self.lo[i], self.hi[i], self.n[i])

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def points4(self) -> np.ndarray:
        """All grid points as (N, 4) rows (c*t0, x, y, z), C-ordered."""
        xx, yy, zz = self.meshgrid()
        pts = np.empty((xx.size, 4))
        pts[:, 0] = self.t0
        pts[:, 1] = xx.ravel()
        pts[:, 2] = yy.ravel()
        pts[:, 3] = zz.ravel()
        return pts

    def negated(self) -> "GridSpec":
        """The grid of point-wise negated coordinates (lo, hi swap and flip)."""
        return GridSpec(
            lo=tuple(-h for h in self.hi),
            hi=tuple(-l for l in self.lo),
            n=self.n,
            t0=self.t0,
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QlifRecords:
    """Per-point data kept by the QLIF transformation so it can be inverted.

    Arrays are flat over the source grid's C-ordered points: ``b`` and
    ``f`` are the tetrads used at each point, ``measure_factor`` is
    (-g)^(1/4) (the weight folded into the transformed wavefunction),
    ``xi`` the local-frame mass coordinates, ``valid`` the metric validity
    mask.
    """

    source_metric: MetricField
    source_grid: GridSpec
    b: np.ndarray
    f: np.ndarray
    measure_factor: np.ndarray
    xi: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class Branch:
    """One term of the superposition.

    ``psi`` is the relative wavefunction of the probe over the state's
    grid (complex, shape grid.shape).  ``metric`` is the branch's metric
    register; for P-frame branches it is the flat metric and
    ``source_metric_id`` keeps the pre-transformation identity so branch
    matching survives the frame change.  ``records`` is set only on
    branches produced by the QLIF transformation.
    """

    amplitude: complex
    mass_label: str
    mass_position: FourVector
    metric: MetricField
    psi: np.ndarray
    source_metric_id: str | None = None
    records: QlifRecords | None = None

    @property
    def metric_id(self) -> str:
        return self.metric.label

    @property
    def key(self) -> tuple[str, str]:
        """(mass_label, metric identity) pair used for branch matching."""
        return (self.mass_label, self.source_metric_id or self.metric.label)


@dataclass(frozen=True)
class SuperposedState:
    """Branches over a shared grid, tagged with the frame they refer to.

    ``prefactor`` records the overall constant absorbed when the input
    amplitudes and wavefunctions were normalized (the bookkeeping that
    makes <state|state> = 1 the normative convention).
    """

    branches: tuple[Branch, ...]
    grid: GridSpec
    frame: Frame
    units: UnitSystem
    prefactor: complex = 1.0 + 0.0j

    def branch_keys(self) -> list[tuple[str, str]]:
        return [b.key for b in self.branches]


def branch_sqrt_neg_det(branch: Branch, grid: GridSpec) -> np.ndarray:
    """sqrt(-g) of the branch metric over the grid, shape grid.shape.

    Points inside the metric's singular set get weight 0 (they may only
    carry zero amplitude; ``make_state`` and the QRF operations enforce
    that)."""
    pts = grid.points4()
    valid = branch.metric.valid_mask(pts)
    w = np.zeros(pts.shape[0])
    if np.any(valid):
        w[valid] = sqrt_neg_det_batch(branch.metric, pts[valid])
    return w.reshape(grid.shape)


def _branch_measure_norm_sq(branch: Branch, grid: GridSpec) -> float:
    w = branch_sqrt_neg_det(branch, grid)
    return float(np.sum(w * np.abs(branch.psi) ** 2).real * grid.dvol)


def make_state(
    branches,
    grid: GridSpec,
    frame: Frame = Frame.R,
    units: UnitSystem | None = None,
) -> SuperposedState:
    """Build a normalized superposed state.

    Each branch wavefunction is normalized under its own sqrt(-g) measure
    and the amplitude vector is scaled to unit total weight, so the result
    satisfies <state|state> = 1.  The absorbed overall constant is recorded
    as ``prefactor``.

    Raises ZeroNorm for an identically-zero wavefunction, GridMismatch for
    a wavefunction of the wrong shape, and ValueError for duplicate
    (mass_label, metric_id) pairs or amplitudes that are all zero.
    """
    branches = list(branches)
    if not branches:
        raise ValueError("state needs at least one branch")
    if units is None:
        units = branches[0].metric.units
    keys = [b.key for b in branches]
    if len(set(keys)) != len(keys):
        raise ValueError(f"duplicate branch keys: {keys}")

    normalized = []
    weights = []
    for b in branches:
        psi = np.asarray(b.psi, dtype=complex)
        if psi.shape != grid.shape:
            raise GridMismatch(f"psi shape {psi.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(psi)):
            raise ValueError(f"branch {b.key}: psi has non-finite samples")
        if not np.any(psi):
            raise ZeroNorm(f"branch {b.key}: psi is identically zero")
        nrm_sq = _branch_measure_norm_sq(replace(b, psi=psi), grid)
        if nrm_sq <= 0.0:
            raise ZeroNorm(f"branch {b.key}: zero measure-weighted norm")
        nrm = np.sqrt(nrm_sq)
        normalized.append(replace(b, psi=_freeze(psi / nrm)))
        weights.append(complex(b.amplitude) * nrm)

    weights = np.asarray(weights)
    total = np.sqrt(np.sum(np.abs(weights) ** 2))
    if total == 0.0:
        raise ValueError("all branch amplitudes are zero")
    final = tuple(
        replace(b, amplitude=complex(w / total)) for b, w in zip(normalized, weights)
    )
    return SuperposedState(
        branches=final, grid=grid, frame=frame, units=units, prefactor=complex(total)
    )


def inner_product(a: SuperposedState, b: SuperposedState) -> complex:
    """<a|b> with the per-branch sqrt(-g) measure and branch-label orthogonality.

    Branches are matched on their (mass_label, metric_id) key; unmatched
    branches contribute exactly zero.  Raises GridMismatch if the grids
    differ and WrongFrame if the frame tags differ.
    """
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
    if a.frame != b.frame:
        raise WrongFrame(f"cannot overlap a {a.frame.value}-frame with a {b.frame.value}-frame state")
    out = 0.0 + 0.0j
    b_by_key = {br.key: br for br in b.branches}
    for br_a in a.branches:
        br_b = b_by_key.get(br_a.key)
        if br_b is None:
            continue
        w = branch_sqrt_neg_det(br_a, a.grid)
        s = np.sum(np.conj(br_a.psi) * br_b.psi * w) * a.grid.dvol
        out += np.conj(br_a.amplitude) * br_b.amplitude * s
    return complex(out)


def state_norm(s: SuperposedState) -> float:
    return float(np.real(inner_product(s, s)))


def translate_state(s: SuperposedState, d) -> SuperposedState:
    """Rigid spatial translation psi(x) -> psi(x - d), exact on the grid.

    ``d`` must be an integer number of grid steps per axis (no
    interpolation); samples wrap periodically.  The sqrt(-g) weight is not
    uniform on curved branches, so the norm is exactly preserved only on
    flat ones.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (3,):
        raise ValueError("translation must be a 3-vector")
    shifts = []
    for i, (di, h) in enumerate(zip(d, s.grid.spacing)):
        steps = di / h
        rounded = np.rint(steps)
        if abs(steps - rounded) > 1e-9 * max(1.0, abs(steps)):
            raise OffGridTranslation(
                f"axis {i}: {di!r} is {steps} grid steps; integer steps required"
            )
        shifts.append(int(rounded))
    moved = tuple(
        replace(b, psi=_freeze(np.roll(b.psi, shifts, axis=(0, 1, 2))))
        for b in s.branches
    )
    return replace(s, branches=moved)


def gaussian_psi(grid: GridSpec, center, sigma, momentum=None, hbar: float = 1.0) -> np.ndarray:
    """Gaussian wavefunction exp(-|x - c|^2 / (2 sigma^2)) on the grid, unnormalized.

    With this width convention the overlap of two copies a distance d
    apart is exp(-|d|^2 / (4 sigma^2)).  ``sigma`` may be a scalar or
    per-axis.  An optional momentum adds a plane-wave factor
    exp(i p.x / hbar).
    """
    center = np.broadcast_to(np.asarray(center, dtype=float), (3,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (3,))
    if np.any(sigma <= 0):
        raise ValueError("sigma must be > 0")
    xx, yy, zz = grid.meshgrid()
    q = (
        ((xx - center[0]) / sigma[0]) ** 2
        + ((yy - center[1]) / sigma[1]) ** 2
        + ((zz - center[2]) / sigma[2]) ** 2
    )
    psi = np.exp(-0.5 * q).astype(complex)
    if momentum is not None:
        p = np.broadcast_to(np.asarray(momentum, dtype=float), (3,))
        psi = psi * np.exp(1j * (p[0] * xx + p[1] * yy + p[2] * zz) / hbar)
    return psi


# ---------------------------------------------------------------------------
# State container (save/load)
# ---------------------------------------------------------------------------
#
# Layout: magic, format version, u64 header length, UTF-8 JSON header, then
# per branch (in header order) the raw complex128 little-endian samples,
# row-major with axis order (x, y, z).  QLIF records are runtime-only and
# are not serialized; a reloaded P-frame state is archival (it supports
# overlaps but not inversion).

_MAGIC = b"QLIFSTA1"


def _state_header(s: SuperposedState) -> dict:
    return {
        "format": 1,
        "grid": {"lo": list(s.grid.lo), "hi": list(s.grid.hi), "n": list(s.grid.n), "t0": s.grid.t0},
        "units": {"c": s.units.c, "G": s.units.G, "hbar": s.units.hbar},
        "frame": s.frame.value,
        "prefactor": [s.prefactor.real, s.prefactor.imag],
        "branches": [
            {
                "amplitude": [b.amplitude.real, b.amplitude.imag],
                "mass_label": b.mass_label,
                "mass_position": b.mass_position.array.tolist(),
                "metric": b.metric.describe(),
                "source_metric_id": b.source_metric_id,
            }
            for b in s.branches
        ],
    }


def save_state(s: SuperposedState, path) -> None:
    """Write the state container (see module notes for the layout)."""
    header = json.dumps(_state_header(s), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for b in s.branches:
            fh.write(np.ascontiguousarray(b.psi, dtype="<c16").tobytes())


def load_state(path) -> SuperposedState:
    """Read a state container written by ``save_state``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a state container (magic {magic!r})")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        grid = GridSpec(
            lo=tuple(header["grid"]["lo"]),
            hi=tuple(header["grid"]["hi"]),
            n=tuple(header["grid"]["n"]),
            t0=header["grid"]["t0"],
        )
        units = UnitSystem(**header["units"])
        count = int(np.prod(grid.shape))
        branches = []
        for rec in header["branches"]:
            raw = fh.read(16 * count)
            psi = np.frombuffer(raw, dtype="<c16").reshape(grid.shape)
            branches.append(
                Branch(
                    amplitude=complex(*rec["amplitude"]),
                    mass_label=rec["mass_label"],
                    mass_position=FourVector.from_array(rec["mass_position"]),
                    metric=metric_from_dict(rec["metric"], units),
                    psi=_freeze(psi.astype(complex)),
                    source_metric_id=rec["source_metric_id"],
                )
            )
    return SuperposedState(
        branches=tuple(branches),
        grid=grid,
        frame=Frame(header["frame"]),
        units=units,
        prefactor=complex(*header["prefactor"]),
    )
