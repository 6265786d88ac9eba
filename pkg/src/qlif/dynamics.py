"""Branch-wise geodesic motion and flat-space wavepacket evolution.

Geodesics are integrated in proper time with classic fixed-step RK4 on the
pair (x, u):

    dx^mu/dtau = u^mu,    du^mu/dtau = -Gamma^mu_{nu rho} u^nu u^rho,

using the metric catalog's Christoffel symbols (analytic where available,
4th-order finite differences otherwise).  Timelike normalization is
g_munu u^mu u^nu = -c^2, with u^0 = d(ct)/dtau.

The 1D wavepacket half implements the flat-space stationarity demo: free
evolution under H = P^2 / 2m by the spectral (FFT) method on a periodic
grid.  On that grid the translation operator is an index roll, which the
kinetic phase commutes with exactly, so evolving then translating equals
translating then evolving to machine precision; that commutation is the
operational content of "a translated superposition accumulates no relative
phase".
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import OffGridTranslation, QlifError
from .qstate import SuperposedState, branch_sqrt_neg_det
from .spacetime import FdConfig, FourVector, MetricField, christoffel
from .tetrad import build_tetrad


@dataclass(frozen=True)
class GeodesicState:
    """Position, 4-velocity, and proper time along a world line."""

    x: FourVector
    u: FourVector
    tau: float


@dataclass(frozen=True)
class Trajectory:
    """Integrator output; ``error`` is set when the run hit a singular point."""

    states: tuple[GeodesicState, ...]
    error: QlifError | None = None

    @property
    def completed(self) -> bool:
        return self.error is None


def velocity_norm(field: MetricField, x: FourVector, u: FourVector) -> float:
    """g_munu u^mu u^nu (should be -c^2 on a timelike world line)."""
    g = field.eval_batch(x.array[None, :])[0]
    return float(u.array @ g @ u.array)


def timelike_velocity(field: MetricField, x: FourVector, u_spatial) -> FourVector:
    """Complete spatial components u^i = dx^i/dtau to a future-directed 4-velocity.

    Solves g_munu u^mu u^nu = -c^2 for u^0 > 0.
    """
    u_spatial = np.asarray(u_spatial, dtype=float)
    g = field.eval_batch(x.array[None, :])[0]
    c = field.units.c
    a = g[0, 0]
    b = 2.0 * g[0, 1:] @ u_spatial
    d = u_spatial @ g[1:, 1:] @ u_spatial + c**2
    disc = b**2 - 4.0 * a * d
    if disc < 0.0:
        raise ValueError("no timelike completion for the given spatial velocity")
    u0 = (-b - np.sqrt(disc)) / (2.0 * a)
    return FourVector(float(u0), *u_spatial)


def local_frame_velocity(field: MetricField, x: FourVector, v_local) -> FourVector:
    """4-velocity whose local-frame components are gamma (c, v_local).

    ``v_local`` is an ordinary 3-velocity (|v| < c) measured in the
    canonical tetrad frame at x; the result is automatically normalized
    because f^T g f = eta.
    """
    v = np.asarray(v_local, dtype=float)
    c = field.units.c
    beta_sq = float(v @ v) / c**2
    if beta_sq >= 1.0:
        raise ValueError("local speed must be below c")
    gamma = 1.0 / np.sqrt(1.0 - beta_sq)
    u_local = np.concatenate([[gamma * c], gamma * v])
    t = build_tetrad(field, x)
    return FourVector.from_array(t.f @ u_local)


def _gamma_evaluator(field: MetricField, fd: FdConfig, method: str):
    if method not in ("auto", "fd", "analytic"):
        raise ValueError(f"unknown method {method!r}")
    analytic = method in ("auto", "analytic") and (
        field.christoffel_batch(np.empty((0, 4))) is not None
    )
    if method == "analytic" and not analytic:
        raise ValueError(f"{field.label} has no analytic Christoffel path")
    if analytic:

        def gamma(xv: np.ndarray) -> np.ndarray:
            field.require_valid(xv[None, :])
            return field.christoffel_batch(xv[None, :])[0]

        return gamma

    def gamma(xv: np.ndarray) -> np.ndarray:
        return christoffel(field, FourVector.from_array(xv), fd=fd, method="fd")

    return gamma


def integrate_geodesic(
    field: MetricField,
    init: GeodesicState,
    dtau: float,
    n_steps: int,
    fd: FdConfig = FdConfig(richardson=False),
    method: str = "auto",
    norm_tol: float = 1e-6,
) -> Trajectory:
    """Integrate the geodesic equation from ``init`` for ``n_steps`` RK4 steps.

    Returns n_steps + 1 states (including the initial one).  The initial
    state must be timelike-normalized within ``norm_tol`` (relative to
    c^2) and at a valid point, else ValueError / SingularRegion is raised;
    a singular point hit mid-run stops the integration and returns the
    partial trajectory with ``error`` set.
    """
    if dtau <= 0.0:
        raise ValueError("dtau must be > 0")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    field.require_valid(init.x.array[None, :])
    c = field.units.c
    miss = abs(velocity_norm(field, init.x, init.u) + c**2)
    if miss > norm_tol * c**2:
        raise ValueError(
            f"initial 4-velocity is not normalized: g u u + c^2 = {miss:.3e}"
        )

    gamma = _gamma_evaluator(field, fd, method)

    def rhs(y: np.ndarray) -> np.ndarray:
        gam = gamma(y[:4])
        u = y[4:]
        return np.concatenate([u, -np.einsum("mnr,n,r->m", gam, u, u)])

    y = np.concatenate([init.x.array, init.u.array])
    states = [replace(init, tau=float(init.tau))]
    error = None
    for k in range(n_steps):
        try:
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dtau * k1)
            k3 = rhs(y + 0.5 * dtau * k2)
            k4 = rhs(y + dtau * k3)
        except QlifError as exc:
            error = exc
            break
        y = y + (dtau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            error = QlifError(f"non-finite state at step {k + 1}")
            break
        states.append(
            GeodesicState(
                x=FourVector.from_array(y[:4]),
                u=FourVector.from_array(y[4:]),
                tau=init.tau + (k + 1) * dtau,
            )
        )
    return Trajectory(states=tuple(states), error=error)


@dataclass(frozen=True)
class BranchTrajectory:
    """Geodesic of one metric branch."""

    mass_label: str
    metric_id: str
    trajectory: Trajectory


def branch_centroid(state: SuperposedState, branch_index: int) -> FourVector:
    """Measure-weighted mean position of a branch wavefunction on its slice."""
    branch = state.branches[branch_index]
    w = branch_sqrt_neg_det(branch, state.grid) * np.abs(branch.psi) ** 2
    total = float(np.sum(w))
    if total <= 0.0:
        raise ValueError("branch has zero weight")
    xx, yy, zz = state.grid.meshgrid()
    return FourVector(
        state.grid.t0,
        float(np.sum(w * xx) / total),
        float(np.sum(w * yy) / total),
        float(np.sum(w * zz) / total),
    )


def geodesic_superposition(
    state: SuperposedState,
    init_local_velocity,
    dtau: float,
    n_steps: int,
    fd: FdConfig = FdConfig(richardson=False),
) -> list[BranchTrajectory]:
    """One geodesic per branch, started at the branch's wavefunction centroid.

    ``init_local_velocity`` is the common initial 3-velocity in the local
    orthonormal frame at each branch's start point, so every branch starts
    with the same physical velocity even though the metrics differ.
    """
    out = []
    for i, branch in enumerate(state.branches):
        x0 = branch_centroid(state, i)
        u0 = local_frame_velocity(branch.metric, x0, init_local_velocity)
        traj = integrate_geodesic(
            branch.metric, GeodesicState(x=x0, u=u0, tau=0.0), dtau, n_steps, fd=fd
        )
        out.append(BranchTrajectory(branch.mass_label, branch.key[1], traj))
    return out


# ---------------------------------------------------------------------------
# Flat-space 1D wavepackets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Wavepacket1D:
    """Unit-norm complex samples on a periodic 1D grid x_j = lo + j (hi - lo)/n.

    The endpoint is exclusive (period hi - lo), which is what makes the
    FFT evolution and the index-roll translation exact companions.
    """

    samples: np.ndarray
    lo: float
    hi: float
    mass: float
    hbar: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("samples must be a 1D array of length >= 2")
        if not (self.hi > self.lo):
            raise ValueError("need hi > lo")
        if not (self.mass > 0.0 and self.hbar > 0.0):
            raise ValueError("mass and hbar must be > 0")
        object.__setattr__(self, "samples", s)
        if abs(packet_norm(self) - 1.0) > 1e-10:
            raise ValueError("samples must have unit L2 norm (use gaussian_wavepacket "
                             "or normalize_samples)")

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.samples.size)


def packet_norm(p: Wavepacket1D) -> float:
    return float(np.sqrt(np.sum(np.abs(p.samples) ** 2) * (p.hi - p.lo) / p.samples.size))


def packet_overlap(a: Wavepacket1D, b: Wavepacket1D) -> complex:
    if a.samples.size != b.samples.size or (a.lo, a.hi) != (b.lo, b.hi):
        raise ValueError("packets live on different grids")
    return complex(np.sum(np.conj(a.samples) * b.samples) * a.dx)


def normalize_samples(samples, lo: float, hi: float, mass: float, hbar: float = 1.0) -> Wavepacket1D:
    s = np.asarray(samples, dtype=complex)
    nrm = np.sqrt(np.sum(np.abs(s) ** 2) * (hi - lo) / s.size)
    if nrm == 0.0:
        raise ValueError("cannot normalize zero samples")
    return Wavepacket1D(samples=s / nrm, lo=lo, hi=hi, mass=mass, hbar=hbar)


def gaussian_wavepacket(
    lo: float,
    hi: float,
    n: int,
    center: float,
    sigma: float,
    momentum: float = 0.0,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> Wavepacket1D:
    """Normalized Gaussian exp(-(x - c)^2 / (4 sigma^2) + i p x / hbar).

    ``sigma`` is the rms position width: |psi|^2 has standard deviation
    sigma, and free evolution spreads it as
    sigma(t) = sigma sqrt(1 + (hbar t / (2 m sigma^2))^2).
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be > 0")
    x = lo + (hi - lo) / n * np.arange(n)
    psi = np.exp(-((x - center) ** 2) / (4.0 * sigma**2) + 1j * momentum * x / hbar)
    return normalize_samples(psi, lo, hi, mass, hbar)


def evolve_free(p: Wavepacket1D, t: float) -> Wavepacket1D:
    """Evolve under H = P^2 / (2 m) for time t >= 0 (spectral, unitary)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return p
    k = 2.0 * np.pi * np.fft.fftfreq(p.samples.size, d=p.dx)
    phase = np.exp(-1j * p.hbar * k**2 * t / (2.0 * p.mass))
    return replace(p, samples=np.fft.ifft(np.fft.fft(p.samples) * phase))


def translate_packet(p: Wavepacket1D, d: float) -> Wavepacket1D:
    """psi(x) -> psi(x - d) for d an integer number of grid steps (exact roll)."""
    steps = d / p.dx
    rounded = np.rint(steps)
    if abs(steps - rounded) > 1e-9 * max(1.0, abs(steps)):
        raise OffGridTranslation(f"{d!r} is {steps} grid steps; integer steps required")
    return replace(p, samples=np.roll(p.samples, int(rounded)))


def translation_covariance_check(p: Wavepacket1D, d: float, t: float) -> float:
    """L2 distance between evolve-then-translate and translate-then-evolve.

    Zero (to machine precision) for the periodic free Hamiltonian, because
    the kinetic phase is diagonal in the same Fourier basis that
    diagonalizes the roll; this is the operational stationarity statement
    for translated superpositions.
    """
    a = evolve_free(translate_packet(p, d), t)
    b = translate_packet(evolve_free(p, t), d)
    return float(np.sqrt(np.sum(np.abs(a.samples - b.samples) ** 2) * p.dx))


def packet_width(p: Wavepacket1D) -> float:
    """sqrt(<x^2> - <x>^2) of |psi|^2 on the grid."""
    prob = np.abs(p.samples) ** 2 * p.dx
    total = float(np.sum(prob))
    mean = float(np.sum(p.x * prob) / total)
    var = float(np.sum((p.x - mean) ** 2 * prob) / total)
    return float(np.sqrt(var))
