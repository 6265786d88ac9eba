import numpy as np
import pytest

from qlif.qstate import Branch, GridSpec, gaussian_psi, make_state
from qlif.spacetime import FourVector, Minkowski, Schwarzschild, UnitSystem, WeakFieldPointMass


@pytest.fixture(scope="session")
def units():
    return UnitSystem.geometric()


@pytest.fixture(scope="session")
def catalog(units):
    """One instance of each metric kind, at scales the tests share."""
    return {
        "minkowski": Minkowski(units),
        "weak_field": WeakFieldPointMass(units, mass=1e-5, soft=1e-3, center=(0.3, -0.2, 0.1)),
        "schwarzschild": Schwarzschild(units, mass=1.0),
    }


def random_point(field, rng):
    """A random point in the metric's valid region."""
    if isinstance(field, Schwarzschild):
        return FourVector(
            rng.uniform(-1.0, 1.0),
            rng.uniform(5.0, 15.0),
            rng.uniform(0.6, 2.5),
            rng.uniform(0.0, 2.0 * np.pi),
        )
    return FourVector(rng.uniform(-1.0, 1.0), *rng.uniform(-2.0, 2.0, 3))


def two_branch_state(
    units,
    grid=None,
    rng=None,
    mass=1e-6,
    half_separation=1.5,
    amplitudes=(1.0, 1.0),
):
    """The canonical L/R weak-field scenario; randomized packets when rng given."""
    if grid is None:
        grid = GridSpec(lo=(-3, -3, -3), hi=(3, 3, 3), n=(17, 17, 17))
    gl = WeakFieldPointMass(units, mass=mass, soft=1e-3, center=(-half_separation, 0, 0))
    gr = WeakFieldPointMass(units, mass=mass, soft=1e-3, center=(half_separation, 0, 0))
    if rng is None:
        centers = [(0.0, 0.0, 0.5), (0.0, 0.0, 0.5)]
        sigmas = [0.6, 0.6]
        momenta = [None, None]
    else:
        centers = [rng.uniform(-0.5, 0.5, 3) for _ in range(2)]
        sigmas = [rng.uniform(0.4, 0.8) for _ in range(2)]
        momenta = [rng.uniform(-0.5, 0.5, 3) for _ in range(2)]
    branches = [
        Branch(
            amplitude=amplitudes[0],
            mass_label="L",
            mass_position=FourVector(grid.t0, -half_separation, 0.0, 0.0),
            metric=gl,
            psi=gaussian_psi(grid, centers[0], sigmas[0], momentum=momenta[0]),
        ),
        Branch(
            amplitude=amplitudes[1],
            mass_label="R",
            mass_position=FourVector(grid.t0, half_separation, 0.0, 0.0),
            metric=gr,
            psi=gaussian_psi(grid, centers[1], sigmas[1], momentum=momenta[1]),
        ),
    ]
    return make_state(branches, grid, units=units)
