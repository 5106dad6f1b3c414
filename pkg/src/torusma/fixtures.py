"""Reusable experiment fixtures: manufactured solutions, singular densities,
subsolution schedules, perturbation pairs, and seeded random quasi-psh fields.

Every fixture returns plain library objects (GridFunction / MeasureField /
HermitianMetric) so the command-line pipelines and the test-suite share one
source of truth for the inputs they exercise.
"""

import numpy as np

from .errors import PreconditionError
from .geometry import Torus, GridFunction, HermitianMetric, flat_metric
from .pluripotential import MeasureField, ma_measure, is_omega_psh
from .regularize import psh_repair
from .solver import ContinuationSchedule, decompose_subsolution
from .certify import lp_density_fixture

__all__ = [
    "manufactured_cos",
    "singular_density",
    "holder_subsolution",
    "stability_pair",
    "random_psh",
    "mixture_pair",
    "FIXTURE_NAMES",
]


def _cos_profile(torus: Torus, amplitude: float) -> np.ndarray:
    """amplitude * sum_j cos(2 pi x_j) over the real axes x_1, ..., x_n."""
    vals = np.zeros(torus.shape)
    for j in range(torus.n):
        vals = vals + amplitude * np.cos(2.0 * np.pi * torus.axis_coord(2 * j))
    return vals


def manufactured_cos(n: int, N: int, amplitude: float = 0.05):
    """Smooth exact-solution fixture: phi* built from cosines, mu := omega_{phi*}^n.

    Returns (phi_star, mu, metric) with phi_star sup-normalized, so a solver
    run against mu has a machine-precision oracle.
    """
    torus = Torus(n, N)
    metric = flat_metric(torus)
    phi = GridFunction(torus, _cos_profile(torus, amplitude)).sup_normalized()
    if not is_omega_psh(phi, metric):
        raise PreconditionError(f"amplitude {amplitude} too large for psh fixture")
    return phi, ma_measure(phi, metric), metric


def singular_density(n: int = 1, N: int = 64, s: float = 0.5, p: float = 2.0):
    """Unit-mass L^p density with a dist^(-s) point singularity at the origin.

    Returns (mu, metric); requires s*p < 2n.
    """
    torus = Torus(n, N)
    metric = flat_metric(torus)
    return lp_density_fixture(p, s, metric, center=None), metric


def holder_subsolution(N: int = 256, delta_range=(3, 8)):
    """Continuation fixture: a Hoelder (not C^2) subsolution u from repairing
    0.05 |sin(pi x)|^(1/2), datum mu = h * omega_u^n with smooth h >= 0.

    Returns (schedule, metric) where schedule carries the dyadic mollification
    ladder delta_j = 2^-j for j in range(*delta_range), clipped to the lattice
    resolution floor of two spacings.
    """
    torus = Torus(1, N)
    metric = flat_metric(torus)
    x = torus.axis_coord(0)
    raw = GridFunction(torus, 0.05 * np.abs(np.sin(np.pi * x)) ** 0.5
                       * np.ones(torus.shape))
    u = psh_repair(raw, metric, rounds=8)
    h = GridFunction(torus, 0.5 * (1.0 + np.cos(2.0 * np.pi * x))
                     * np.ones(torus.shape))
    dens = GridFunction(torus, ma_measure(u, metric).density.values * h.values)
    mu = MeasureField.from_density(dens, metric)
    base = decompose_subsolution(mu, u, metric)
    floor = 2.0 * torus.spacing
    deltas = tuple(d for d in (2.0 ** -j for j in range(*delta_range))
                   if d >= floor)
    if len(deltas) < 2:
        raise PreconditionError(f"N = {N} leaves fewer than two resolvable deltas")
    return ContinuationSchedule(u=base.u, C0=base.C0, h=base.h,
                                delta_list=deltas), metric


def stability_pair(n: int = 1, N: int = 64, amplitude: float = 1e-2):
    """Perturbation fixture for the sup-vs-L^1 stability estimate.

    phi is the cosine fixture; psi subtracts a * (1 + cos(2 pi x_1)) and
    re-normalizes, so sup(psi - phi) = 2a > 0 while psi stays omega-psh
    and <= 0.  Returns (psi, phi, mu, metric) with mu = omega_phi^n.
    """
    phi, mu, metric = manufactured_cos(n, N)
    torus = metric.torus
    bump = (1.0 + np.cos(2.0 * np.pi * torus.axis_coord(0))) * np.ones(torus.shape)
    pert = phi.values - amplitude * bump
    psi = GridFunction(torus, pert - pert.max())
    if not is_omega_psh(psi, metric):
        raise PreconditionError("perturbed field left the psh cone")
    return psi, phi, mu, metric


def random_psh(torus: Torus, metric: HermitianMetric, rng: np.random.Generator,
               amplitude: float = 0.02, max_freq: int = 2) -> GridFunction:
    """Seeded random low-frequency trigonometric field, repaired into the
    omega-psh cone and sup-normalized."""
    vals = np.zeros(torus.shape)
    for axis in range(torus.ndim_real):
        x = torus.axis_coord(axis)
        for k in range(1, max_freq + 1):
            a, b = rng.uniform(-1.0, 1.0, size=2)
            vals = vals + (amplitude / k ** 2) * (
                a * np.cos(2.0 * np.pi * k * x) + b * np.sin(2.0 * np.pi * k * x)
            ) * np.ones(torus.shape)
    f = psh_repair(GridFunction(torus, vals), metric)
    return f.sup_normalized()


def mixture_pair(n: int, N: int, rng: np.random.Generator,
                 amplitude: float = 0.02):
    """Two random omega-psh potentials and positive weights for the
    convexity-domination experiment.  Returns (phi1, phi2, c1, c2, metric)."""
    torus = Torus(n, N)
    metric = flat_metric(torus)
    phi1 = random_psh(torus, metric, rng, amplitude=amplitude)
    phi2 = random_psh(torus, metric, rng, amplitude=amplitude)
    c1, c2 = rng.uniform(0.5, 2.0, size=2)
    return phi1, phi2, float(c1), float(c2), metric


# names accepted by the command-line configuration
FIXTURE_NAMES = ("manufactured_cos", "singular_density", "holder_subsolution",
                 "stability_pair", "mixture_pair")
