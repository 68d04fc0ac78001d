"""Kraus/Jones channel representations and the correlation-tensor congruence.

A channel is a weighted ensemble of 2x2 Jones matrices; the Kraus
operators are U_k = sqrt(w_k) J_k.  The same ensemble yields a Mueller
matrix M_ij = (1/2) Tr[sigma_i sum_k U_k sigma_j U_k^dagger], and for the
two-photon configuration in which each photon samples an independent
realization the output correlation tensor obeys K_out = M K_in M^T.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ChannelError, NotCompletelyPositiveError, UnphysicalStateError
from .polarization import PAULI, check_density

__all__ = [
    "KrausEnsemble",
    "apply_one_photon",
    "apply_two_photon_independent",
    "apply_two_photon_correlated",
    "mueller_from_kraus",
    "propagate_tensor",
    "kraus_from_diagonal_mueller",
    "compose",
    "normalize_mueller",
    "mueller_maps_physical",
]

_WEIGHT_SUM_TOL = 1e-10
_TRACE_COND_TOL = 1e-8


@dataclass(frozen=True)
class KrausEnsemble:
    """Weighted ensemble of Jones matrices defining a (sub-)CPTP channel.

    Attributes
    ----------
    weights : (K,) float array, nonnegative, summing to 1.
    jones : (K, 2, 2) complex array of per-realization Jones matrices.
    """

    weights: np.ndarray
    jones: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        j = np.asarray(self.jones, dtype=complex)
        if w.ndim != 1 or j.shape != (w.size, 2, 2):
            raise ChannelError("ensemble needs weights (K,) and jones (K, 2, 2)")
        if w.min() < -1e-12:
            raise ChannelError("ensemble weights must be nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ChannelError("ensemble weights must sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "jones", j)
        gram = self.kraus_gram()
        if np.linalg.eigvalsh(gram).max() > 1 + _TRACE_COND_TOL:
            raise ChannelError("sum_k U_k^dagger U_k exceeds the identity")

    def kraus(self) -> np.ndarray:
        """Return the Kraus operators U_k = sqrt(w_k) J_k as a (K, 2, 2) array."""
        return np.sqrt(self.weights)[:, None, None] * self.jones

    def kraus_gram(self) -> np.ndarray:
        """Return sum_k U_k^dagger U_k (identity for an exactly CPTP channel)."""
        u = self.kraus()
        return np.einsum("kba,kbc->ac", u.conj(), u)

    @classmethod
    def identity(cls) -> "KrausEnsemble":
        return cls(np.array([1.0]), np.eye(2, dtype=complex)[None])

    @classmethod
    def from_unitary(cls, v) -> "KrausEnsemble":
        return cls(np.array([1.0]), np.asarray(v, dtype=complex)[None])

    @classmethod
    def pauli(cls, weights) -> "KrausEnsemble":
        """Pauli (twirl) channel with the given four weights."""
        return cls(np.asarray(weights, dtype=float), PAULI.copy())


def _apply_kraus(u, rho):
    # sum_k U_k rho U_k^dagger without renormalization
    return np.einsum("kab,bc,kdc->ad", u, rho, u.conj())


def _renormalize(rho):
    trans = np.trace(rho).real
    if trans <= 1e-15:
        raise ChannelError("channel annihilates state")
    return rho / trans, trans


def apply_one_photon(ch: KrausEnsemble, rho, arm="none"):
    """Apply the channel to one photon; the other arm (if any) is untouched.

    For a 4x4 input, ``arm`` selects which photon traverses the channel
    ("first" or "second"); this is the one-photon-polarimetry configuration.
    Returns (rho_out, transmittance) with rho_out renormalized to trace 1
    and transmittance the pre-normalization trace.
    """
    rho = check_density(rho)
    u = ch.kraus()
    if rho.shape == (2, 2):
        out = _apply_kraus(u, rho)
    elif rho.shape == (4, 4):
        if arm == "first":
            big = np.einsum("kab,cd->kacbd", u, np.eye(2)).reshape(-1, 4, 4)
        elif arm == "second":
            big = np.einsum("ab,kcd->kacbd", np.eye(2), u).reshape(-1, 4, 4)
        else:
            raise ChannelError("two-photon input requires arm='first' or 'second'")
        out = _apply_kraus(big, rho)
    else:
        raise UnphysicalStateError("density matrix must be 2x2 or 4x4")
    return _renormalize(out)


def apply_two_photon_independent(ch: KrausEnsemble, rho):
    """Send both photons through independent realizations of the channel.

    Implements rho_out ~ sum_{k,l} (U_k (x) U_l) rho (U_k (x) U_l)^dagger by
    applying the single-photon channel to each arm in sequence, which is
    algebraically identical and O(K) instead of O(K^2).  Returns
    (rho_out, transmittance).
    """
    rho = check_density(rho, dim=4)
    u = ch.kraus()
    first = np.einsum("kab,cd->kacbd", u, np.eye(2)).reshape(-1, 4, 4)
    second = np.einsum("ab,kcd->kacbd", np.eye(2), u).reshape(-1, 4, 4)
    out = _apply_kraus(second, _apply_kraus(first, rho))
    return _renormalize(out)


def apply_two_photon_correlated(ch: KrausEnsemble, rho):
    """Send both photons through the same realization of the channel.

    Implements the same-index sum rho_out ~ sum_k (U_k (x) U_k) rho
    (U_k (x) U_k)^dagger, renormalized.  This differs from the independent
    mode for multi-element ensembles (a correlated Pauli ensemble leaves the
    Bell state untouched, for instance) and is provided as the alternative
    microscopic model.  Returns (rho_out, transmittance).
    """
    rho = check_density(rho, dim=4)
    u = ch.kraus()
    big = np.einsum("kab,kcd->kacbd", u, u).reshape(-1, 4, 4)
    out = _apply_kraus(big, rho)
    return _renormalize(out)


def mueller_from_kraus(ch: KrausEnsemble):
    """Return (M, transmittance) for M_ij = (1/2) Tr[sigma_i sum_k U_k sigma_j U_k^dagger].

    M is normalized so that M_00 = 1; the raw M_00 (mean channel
    transmission) is returned separately.
    """
    u = ch.kraus()
    raw = 0.5 * np.einsum("iab,kbc,jcd,kad->ij", PAULI, u, PAULI, u.conj()).real
    trans = raw[0, 0]
    if trans <= 1e-15:
        raise ChannelError("channel has zero transmittance")
    return raw / trans, trans


def propagate_tensor(m, k_in) -> np.ndarray:
    """Evolve a correlation tensor through the congruence K_out = M K_in M^T."""
    m = np.asarray(m, dtype=float)
    k_in = np.asarray(k_in, dtype=float)
    if abs(m[0, 0] - 1.0) > 1e-10:
        raise ValueError("Mueller matrix must be normalized to M00 = 1")
    return m @ k_in @ m.T


def kraus_from_diagonal_mueller(m11, m22, m33) -> KrausEnsemble:
    """Pauli ensemble realizing the depolarizer diag(1, m11, m22, m33).

    The four weights solve the sign system of the Pauli transfer matrix:
    p0 = (1 + m11 + m22 + m33)/4, p1 = (1 + m11 - m22 - m33)/4,
    p2 = (1 - m11 + m22 - m33)/4, p3 = (1 - m11 - m22 + m33)/4.
    All must be nonnegative for the map to be completely positive.
    """
    m = np.array([m11, m22, m33], dtype=float)
    if m.min() < 0 or m.max() > 1:
        raise ValueError("diagonal entries must lie in [0, 1]")
    signs = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    )
    p = (1 + signs @ m) / 4
    if p.min() < -1e-12:
        raise NotCompletelyPositiveError(
            f"not completely positive: Pauli weights {p.tolist()}"
        )
    p = np.clip(p, 0.0, None)
    return KrausEnsemble.pauli(p / p.sum())


def compose(ch1: KrausEnsemble, ch2: KrausEnsemble) -> KrausEnsemble:
    """Sequential channel: ch2 acts first, then ch1 (Mueller matrices multiply M1 M2)."""
    w = np.outer(ch1.weights, ch2.weights).ravel()
    j = np.einsum("kab,lbc->klac", ch1.jones, ch2.jones).reshape(-1, 2, 2)
    return KrausEnsemble(w, j)


def normalize_mueller(m) -> np.ndarray:
    """Scale a Mueller matrix so that M_00 = 1."""
    m = np.asarray(m, dtype=float)
    if m[0, 0] <= 0:
        raise ValueError("Mueller matrix must have M00 > 0")
    return m / m[0, 0]


def mueller_maps_physical(m, n_samples=100, seed=0, tol=1e-10) -> bool:
    """Check that M maps sampled physical Stokes vectors inside the DoP ball.

    Samples fully polarized states uniformly on the sphere and verifies the
    output degree of polarization never exceeds 1 + tol.
    """
    m = np.asarray(m, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_samples, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    s = np.column_stack([np.ones(n_samples), v])
    out = s @ m.T
    dop = np.linalg.norm(out[:, 1:], axis=1) / out[:, 0]
    return bool(dop.max() <= 1 + tol)
