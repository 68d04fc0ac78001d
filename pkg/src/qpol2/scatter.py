"""Polarized Monte Carlo photon transport through a scattering slab.

Photons are launched along +z into a slab of thickness d with scattering
coefficient mu_s and Henyey-Greenstein anisotropy g.  Each trajectory
accumulates a Jones matrix from per-event Rayleigh dipole amplitude
matrices S(theta) = diag(cos theta, 1) sandwiched between reference-frame
rotations; transmitted paths within the detection cone form the channel's
Kraus ensemble.  Per-photon counter-based RNG streams keyed on
(seed, photon index) make runs reproducible independent of any
parallel execution order.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .channels import KrausEnsemble, mueller_from_kraus, propagate_tensor
from .exceptions import NoTransmissionError
from .fitting import fit_diagonal

__all__ = [
    "Medium",
    "PathRecord",
    "effective_thickness",
    "sample_hg",
    "trace_paths",
    "simulate",
    "mueller_vs_eta",
]

_BELL_TENSOR = np.diag([1.0, -1.0, 1.0, 1.0])
_MAX_EVENTS = 1_000_000


@dataclass(frozen=True)
class Medium:
    """Scattering slab: mu_s (1/mm), anisotropy g, thickness d (mm), cone (rad)."""

    mu_s: float
    g: float
    d: float
    acceptance_half_angle: float = math.radians(5.0)

    def __post_init__(self):
        if self.mu_s <= 0:
            raise ValueError("mu_s must be positive")
        if not 0 <= self.g < 1:
            raise ValueError("g must lie in [0, 1)")
        if self.d < 0:
            raise ValueError("thickness must be nonnegative")
        if not 0 < self.acceptance_half_angle <= math.pi / 2:
            raise ValueError("acceptance half-angle must lie in (0, pi/2]")

    @property
    def transport_mean_free_path(self) -> float:
        return 1.0 / (self.mu_s * (1.0 - self.g))


@dataclass(frozen=True)
class PathRecord:
    """One trajectory: accumulated Jones matrix, exit direction, event count."""

    jones: np.ndarray
    exit_direction: np.ndarray
    n_events: int
    transmitted: bool


def effective_thickness(medium: Medium) -> float:
    """Slab thickness in transport mean free paths, eta = d mu_s (1 - g)."""
    return medium.d * medium.mu_s * (1.0 - medium.g)


def sample_hg(g, xi):
    """Sample cos(theta) from the Henyey-Greenstein phase function.

    ``xi`` is uniform in [0, 1); works on scalars and elementwise on
    arrays.  g = 0 reduces to isotropic scattering.
    """
    if abs(g) < 1e-8:
        return 1.0 - 2.0 * xi
    frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * xi)
    ct = (1.0 + g * g - frac * frac) / (2.0 * g)
    if isinstance(ct, np.ndarray):
        return np.clip(ct, -1.0, 1.0)
    return min(1.0, max(-1.0, ct))


def _trace_photon(medium: Medium, seed, index):
    """Transport one photon; returns (transmitted, jones, exit_dir, n_events).

    The Jones matrix of a transmitted photon is expressed in the global
    H/V frame of the exit beam; otherwise it is left in the last local
    frame (only its singular values are meaningful then).
    """
    rng = np.random.Generator(np.random.Philox(key=[seed, index]))
    rand = rng.random
    mu_s = medium.mu_s
    g = medium.g
    d = medium.d
    cos_acc = math.cos(medium.acceptance_half_angle)

    # direction u, transverse frame (e1, e2), real Jones entries
    ux, uy, uz = 0.0, 0.0, 1.0
    e1x, e1y, e1z = 1.0, 0.0, 0.0
    e2x, e2y, e2z = 0.0, 1.0, 0.0
    j00, j01, j10, j11 = 1.0, 0.0, 0.0, 1.0
    z = 0.0
    events = 0

    while events < _MAX_EVENTS:
        step = -math.log(1.0 - rand()) / mu_s
        z_new = z + uz * step
        if uz > 0.0 and z_new >= d:
            if uz < cos_acc:
                return False, (j00, j01, j10, j11), (ux, uy, uz), events
            # rotate the local frame onto the global H/V axes of the exit beam
            hx, hy, hz = 1.0 - ux * ux, -ux * uy, -ux * uz
            norm = math.sqrt(hx * hx + hy * hy + hz * hz)
            hx, hy, hz = hx / norm, hy / norm, hz / norm
            vx = uy * hz - uz * hy
            vy = uz * hx - ux * hz
            vz = ux * hy - uy * hx
            t00 = e1x * hx + e1y * hy + e1z * hz
            t01 = e2x * hx + e2y * hy + e2z * hz
            t10 = e1x * vx + e1y * vy + e1z * vz
            t11 = e2x * vx + e2y * vy + e2z * vz
            out = (
                t00 * j00 + t01 * j10,
                t00 * j01 + t01 * j11,
                t10 * j00 + t11 * j10,
                t10 * j01 + t11 * j11,
            )
            return True, out, (ux, uy, uz), events
        if uz < 0.0 and z_new <= 0.0:
            return False, (j00, j01, j10, j11), (ux, uy, uz), events
        z = z_new

        ct = sample_hg(g, rand())
        st = math.sqrt(max(0.0, 1.0 - ct * ct))
        phi = 2.0 * math.pi * rand()
        cp = math.cos(phi)
        sp = math.sin(phi)

        # J <- S(theta) R(phi) J with S = diag(cos theta, 1)
        r00 = cp * j00 + sp * j10
        r01 = cp * j01 + sp * j11
        r10 = -sp * j00 + cp * j10
        r11 = -sp * j01 + cp * j11
        j00, j01, j10, j11 = ct * r00, ct * r01, r10, r11

        # renormalize so the largest singular value is 1
        q = j00 * j00 + j01 * j01 + j10 * j10 + j11 * j11
        det = j00 * j11 - j01 * j10
        smax = math.sqrt(0.5 * (q + math.sqrt(max(0.0, q * q - 4.0 * det * det))))
        j00, j01, j10, j11 = j00 / smax, j01 / smax, j10 / smax, j11 / smax

        # rotate the propagation frame into the new direction
        nux = st * cp * e1x + st * sp * e2x + ct * ux
        nuy = st * cp * e1y + st * sp * e2y + ct * uy
        nuz = st * cp * e1z + st * sp * e2z + ct * uz
        ne1x = ct * cp * e1x + ct * sp * e2x - st * ux
        ne1y = ct * cp * e1y + ct * sp * e2y - st * uy
        ne1z = ct * cp * e1z + ct * sp * e2z - st * uz
        e2x, e2y, e2z = -sp * e1x + cp * e2x, -sp * e1y + cp * e2y, -sp * e1z + cp * e2z
        ux, uy, uz = nux, nuy, nuz
        e1x, e1y, e1z = ne1x, ne1y, ne1z
        events += 1
    return False, (j00, j01, j10, j11), (ux, uy, uz), events


def trace_paths(medium: Medium, n_photons, seed):
    """Trace every photon and return the full list of PathRecord objects."""
    records = []
    for i in range(int(n_photons)):
        ok, jones, direction, events = _trace_photon(medium, seed, i)
        records.append(
            PathRecord(
                jones=np.array(jones, dtype=complex).reshape(2, 2),
                exit_direction=np.array(direction),
                n_events=events,
                transmitted=ok,
            )
        )
    return records


def simulate(medium: Medium, n_photons, seed) -> KrausEnsemble:
    """Run the transport and return the transmitted-path Kraus ensemble.

    Equal weights 1/N_transmitted over the paths accepted by the detection
    cone, each Jones matrix in the global H/V frame.  Deterministic for a
    given (medium, n_photons, seed).
    """
    if n_photons < 1:
        raise ValueError("n_photons must be at least 1")
    jones = []
    for i in range(int(n_photons)):
        ok, j, _, _ = _trace_photon(medium, seed, i)
        if ok:
            jones.append(j)
    if not jones:
        raise NoTransmissionError("no transmission within acceptance")
    stack = np.array(jones, dtype=complex).reshape(-1, 2, 2)
    weights = np.full(len(jones), 1.0 / len(jones))
    return KrausEnsemble(weights, stack)


def mueller_vs_eta(medium_template: Medium, eta_grid, n_photons, seed):
    """Simulate a slab at each effective thickness and fit the isotropic m.

    The slab thickness is adjusted to reach each eta at fixed mu_s and g;
    the same seed is reused across grid points (common random numbers).
    Returns a list of (eta, mueller, m_fit) triples.
    """
    eta_grid = [float(e) for e in eta_grid]
    if any(b <= a for a, b in zip(eta_grid, eta_grid[1:])):
        raise ValueError("eta grid must be strictly increasing")
    results = []
    for eta in eta_grid:
        thickness = eta / (medium_template.mu_s * (1.0 - medium_template.g))
        medium = replace(medium_template, d=thickness)
        ensemble = simulate(medium, n_photons, seed)
        mueller, _ = mueller_from_kraus(ensemble)
        k_out = propagate_tensor(mueller, _BELL_TENSOR)
        fit = fit_diagonal(_BELL_TENSOR, k_out, model="isotropic")
        results.append((eta, mueller, float(fit.params[0])))
    return results
