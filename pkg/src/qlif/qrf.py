"""Frame change to the Quantum Locally Inertial Frame of the probe particle.

``to_qlif`` applies, branch by branch and grid point by grid point, the
linear frame change of module ``tetrad``, controlled on the probe position
x and the branch label.  For a branch with metric g_i and mass coordinate
x_S, the component at probe position x is relabeled as follows:

* the old origin R acquires the relative coordinate -x, so the transformed
  wavefunction over the new grid is psi'(y) = psi(-y) (-g_i(-y))^(1/4);
  folding the fourth root of the measure into the samples is what lets the
  flat-measure overlap in the new frame reproduce the curved-measure
  overlap in the old one, making the map unitary on the implemented state
  class;
* the mass coordinate becomes xi_i = b(x, g_i) (x_S - x), the local-frame
  separation seen from the probe (stored per point in the branch records);
* the branch metric register becomes the flat metric: by construction
  f^T g_i f = eta at every support point, which is the per-branch locally
  inertial property, verified and reported rather than assumed.

The transformation never mixes branches (it is block-diagonal in the
(mass_label, metric_id) key), and each output branch keeps the tetrads it
used so ``from_qlif`` can invert it without re-deriving anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingTetradRecord, SingularRegion, WrongFrame
from .qstate import (
    Branch,
    Frame,
    GridSpec,
    QlifRecords,
    SuperposedState,
    inner_product,
    state_norm,
)
from .spacetime import ETA, Minkowski
from .tetrad import tetrad_arrays


@dataclass(frozen=True)
class BranchTransformRecord:
    """Per-branch certification of the QLIF postcondition."""

    mass_label: str
    metric_id: str
    max_metric_deviation_at_origin: float


@dataclass(frozen=True)
class QrfTransformReport:
    """Numbers certifying one ``to_qlif`` run.

    ``max_metric_deviation_at_origin`` is max |g'(0) - eta| over all
    branches and support points; ``roundtrip_error`` is
    |<input | from_qlif(to_qlif(input))> - 1|.
    """

    norm_before: float
    norm_after: float
    max_metric_deviation_at_origin: float
    roundtrip_error: float
    branches: tuple[BranchTransformRecord, ...] = ()

    def __post_init__(self):
        for name in (
            "norm_before",
            "norm_after",
            "max_metric_deviation_at_origin",
            "roundtrip_error",
        ):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError(f"report field {name} must be finite and >= 0, got {v!r}")


def _reverse(a: np.ndarray) -> np.ndarray:
    """Grid relabeling x -> -x (index reversal on every spatial axis)."""
    return a[::-1, ::-1, ::-1]


def _transform_branch(branch: Branch, grid: GridSpec) -> tuple[Branch, float]:
    pts = grid.points4()
    n = pts.shape[0]
    psi_flat = np.asarray(branch.psi).reshape(n)
    support = psi_flat != 0

    valid = branch.metric.valid_mask(pts)
    if np.any(support & ~valid):
        bad = pts[np.argmax(support & ~valid)]
        raise SingularRegion(
            f"branch {branch.key}: support point {bad.tolist()} is in the "
            f"singular set of {branch.metric.label}"
        )

    # Placeholder eta at invalid points keeps the batch well-formed; those
    # points carry zero amplitude and weight 1, so they never contribute.
    g = np.broadcast_to(ETA, (n, 4, 4)).copy()
    g[valid] = branch.metric.eval_batch(pts[valid])
    b_arr, f_arr = tetrad_arrays(g)
    factor = (-np.linalg.det(g)) ** 0.25

    dev = np.einsum("nam,nab,nbv->nmv", f_arr, g, f_arr) - ETA
    support_dev = np.abs(dev[support & valid])
    max_dev = float(np.max(support_dev)) if support_dev.size else 0.0

    dx = branch.mass_position.array[None, :] - pts
    xi = np.einsum("nij,nj->ni", b_arr, dx)

    psi_weighted = (psi_flat * factor).reshape(grid.shape)
    psi_new = _reverse(psi_weighted).copy()
    psi_new.setflags(write=False)

    records = QlifRecords(
        source_metric=branch.metric,
        source_grid=grid,
        b=b_arr,
        f=f_arr,
        measure_factor=factor,
        xi=xi,
        valid=valid,
    )
    new_branch = Branch(
        amplitude=branch.amplitude,
        mass_label=branch.mass_label,
        mass_position=branch.mass_position,
        metric=Minkowski(branch.metric.units),
        psi=psi_new,
        source_metric_id=branch.key[1],
        records=records,
    )
    return new_branch, max_dev


def to_qlif(s: SuperposedState) -> tuple[SuperposedState, QrfTransformReport]:
    """Transform an R-frame state to the locally inertial frame of the probe.

    Returns the P-frame state together with the certification report.
    Raises WrongFrame unless ``s`` is R-frame, and SingularRegion if any
    nonzero-amplitude grid point of a branch lies in its metric's singular
    set.
    """
    if s.frame != Frame.R:
        raise WrongFrame(f"to_qlif needs an R-frame state, got {s.frame.value}-frame")

    new_branches = []
    deviations = []
    for branch in s.branches:
        nb, dev = _transform_branch(branch, s.grid)
        new_branches.append(nb)
        deviations.append(dev)

    out = SuperposedState(
        branches=tuple(new_branches),
        grid=s.grid.negated(),
        frame=Frame.P,
        units=s.units,
        prefactor=s.prefactor,
    )
    roundtrip = abs(inner_product(s, from_qlif(out)) - 1.0)
    report = QrfTransformReport(
        norm_before=state_norm(s),
        norm_after=state_norm(out),
        max_metric_deviation_at_origin=max(deviations),
        roundtrip_error=roundtrip,
        branches=tuple(
            BranchTransformRecord(nb.mass_label, nb.key[1], dev)
            for nb, dev in zip(new_branches, deviations)
        ),
    )
    return out, report


def from_qlif(s: SuperposedState) -> SuperposedState:
    """Invert ``to_qlif`` using the stored per-point records.

    Raises WrongFrame unless ``s`` is P-frame and MissingTetradRecord if a
    branch lacks its records (e.g. a state reloaded from a container).
    """
    if s.frame != Frame.P:
        raise WrongFrame(f"from_qlif needs a P-frame state, got {s.frame.value}-frame")
    branches = []
    for branch in s.branches:
        rec = branch.records
        if rec is None:
            raise MissingTetradRecord(f"branch {branch.key} carries no tetrad records")
        grid = rec.source_grid
        psi_weighted = _reverse(np.asarray(branch.psi)).reshape(-1)
        psi = (psi_weighted / rec.measure_factor).reshape(grid.shape)
        psi.setflags(write=False)
        branches.append(
            Branch(
                amplitude=branch.amplitude,
                mass_label=branch.mass_label,
                mass_position=branch.mass_position,
                metric=rec.source_metric,
                psi=psi,
            )
        )
    return SuperposedState(
        branches=tuple(branches),
        grid=s.branches[0].records.source_grid,
        frame=Frame.R,
        units=s.units,
        prefactor=s.prefactor,
    )


@dataclass(frozen=True)
class QlifMetricRow:
    """One row of the local-metric deviation table."""

    mass_label: str
    metric_id: str
    radius: float
    max_deviation: float


def check_qlif_metric(
    s: SuperposedState, radius: float, sample_points: int = 16
) -> list[QlifMetricRow]:
    """Max |g' - eta| per branch within local distance ``radius`` of the origin.

    For each branch the ``sample_points`` highest-amplitude support points
    are probed along the eight +-axis directions of the local frame at
    distance ``radius`` (plus the origin itself); g' is the source metric
    pulled back through the point's stored tetrad.  The deviation vanishes
    at the origin by construction and grows linearly in the radius, which
    is the leading-order-only locality of the frame.
    """
    if s.frame != Frame.P:
        raise WrongFrame(f"check_qlif_metric needs a P-frame state, got {s.frame.value}-frame")
    if radius < 0.0:
        raise ValueError("radius must be >= 0")

    rows = []
    for branch in s.branches:
        rec = branch.records
        if rec is None:
            raise MissingTetradRecord(f"branch {branch.key} carries no tetrad records")
        pts = rec.source_grid.points4()
        weight = np.abs(_reverse(np.asarray(branch.psi)).reshape(-1))
        weight[~rec.valid] = 0.0
        order = np.argsort(-weight, kind="stable")
        chosen = order[: min(sample_points, np.count_nonzero(weight))]

        max_dev = 0.0
        for p in chosen:
            f = rec.f[p]
            anchor = pts[p]
            disp = np.concatenate([radius * f.T, -radius * f.T], axis=0)  # (8, 4)
            targets = np.vstack([anchor[None, :], anchor[None, :] + disp])
            ok = rec.source_metric.valid_mask(targets)
            if not np.any(ok):
                continue
            g_t = rec.source_metric.eval_batch(targets[ok])
            pulled = np.einsum("am,nab,bv->nmv", f, g_t, f)
            max_dev = max(max_dev, float(np.max(np.abs(pulled - ETA))))
        rows.append(
            QlifMetricRow(
                mass_label=branch.mass_label,
                metric_id=branch.key[1],
                radius=float(radius),
                max_deviation=max_dev,
            )
        )
    return rows
