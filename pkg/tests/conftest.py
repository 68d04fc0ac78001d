"""Shared random-object generators for the test suite.

All helpers take an explicit numpy Generator so that every test controls
its own seeding; none of them keep global state.
"""

import math

import numpy as np

import qpol2

K_BELL = np.diag([1.0, -1.0, 1.0, 1.0])

PAULI_SIGNS = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
)


def random_density(rng, dim=4):
    """Full-rank random density matrix (Ginibre ensemble)."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_density(rng, dim=4):
    """Haar-random pure-state density matrix."""
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_product_density(rng):
    """Pure product two-photon state rho_A (x) rho_B."""
    return np.kron(random_pure_density(rng, 2), random_pure_density(rng, 2))


def random_stokes(rng, dop=None):
    """Normalized Stokes vector with the given (or random) degree of polarization."""
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    if dop is None:
        dop = rng.uniform(0.0, 1.0)
    return np.concatenate([[1.0], dop * v])


def random_cptp_ensemble(rng, k=3):
    """Exactly trace-preserving Kraus ensemble with k operators.

    Built from a Haar-random isometry so that sum_k U_k^dagger U_k = I to
    machine precision.
    """
    g = rng.normal(size=(2 * k, 2)) + 1j * rng.normal(size=(2 * k, 2))
    v, _ = np.linalg.qr(g)
    ops = v.reshape(k, 2, 2)
    w = np.array([(np.abs(op) ** 2).sum() / 2 for op in ops])
    jones = ops / np.sqrt(w)[:, None, None]
    return qpol2.KrausEnsemble(w / w.sum(), jones)


def random_rotation_mueller(rng):
    """Mueller matrix of a random polarization rotation (block-diagonal SO(3))."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    rot = np.eye(4)
    rot[1:, 1:] = q
    return rot


def random_cp_diagonal(rng, lo=0.3):
    """Diagonal depolarizer entries (m11, m22, m33) with nonnegative Pauli weights."""
    while True:
        d = rng.uniform(lo, 1.0, size=3)
        if ((1 + PAULI_SIGNS @ d) / 4).min() >= 0:
            return d


def random_realizable_mueller(rng):
    """Random physical Mueller matrix: rotation times a CP diagonal depolarizer."""
    d = random_cp_diagonal(rng)
    return random_rotation_mueller(rng) @ np.diag(np.concatenate([[1.0], d]))


def concurrence_state(c):
    """Pure state cos(a)|HV> + sin(a)|VH> with concurrence c = sin(2a)."""
    alpha = 0.5 * math.asin(c)
    psi = np.zeros(4, dtype=complex)
    psi[1] = math.cos(alpha)
    psi[2] = math.sin(alpha)
    return np.outer(psi, psi.conj())
