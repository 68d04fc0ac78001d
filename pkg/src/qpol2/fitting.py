"""Mueller-matrix reconstruction from two-photon correlation data.

Implements nonlinear least-squares fits of the congruence law
K_out = M K_in M^T for diagonal depolarizers (isotropic or anisotropic),
general 4x4 Mueller matrices from multiple input states, stabilizer
diagnostics quantifying when such fits are identifiable, and per-pixel
image reconstruction.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares, minimize

from .exceptions import UnderdeterminedFitError

__all__ = [
    "FitResult",
    "StabilizerReport",
    "PixelMap",
    "fit_diagonal",
    "fit_general",
    "stabilizer_dimension",
    "reconstruct_image",
    "mueller_similarity",
]

_FIT_TOL = 1e-14
_NULL_SPACE_REL_TOL = 1e-10


@dataclass(frozen=True)
class FitResult:
    """Outcome of a Mueller fit.

    ``params`` holds 1 (isotropic), 3 (diagonal), or 15 (general, row-major
    without M00) numbers; M00 is always fixed to 1.  ``iterations`` counts
    objective evaluations.  ``converged`` means the optimizer reported
    success and, when a residual tolerance was configured, the residual is
    below it.
    """

    model: str
    params: np.ndarray
    residual: float
    iterations: int
    converged: bool

    def mueller(self) -> np.ndarray:
        """Assemble the fitted 4x4 Mueller matrix."""
        m = np.eye(4)
        if self.model == "isotropic":
            m[1, 1] = m[2, 2] = m[3, 3] = self.params[0]
        elif self.model == "diagonal":
            m[1, 1], m[2, 2], m[3, 3] = self.params
        elif self.model == "general":
            m = np.empty((4, 4))
            m.flat[0] = 1.0
            m.flat[1:] = self.params
        else:
            raise ValueError(f"unknown model {self.model!r}")
        return m

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "params": [float(p) for p in self.params],
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class StabilizerReport:
    """Dimension of the joint stabilizer Lie algebra of input tensors.

    The algebra is {X : X K_i + K_i X^T = 0 for all inputs}; a nonzero
    dimension means a continuous family M exp(tX) reproduces the same
    output data, so a congruence fit from these inputs alone cannot be
    unique.  ``generators`` holds an orthonormal basis of the algebra.
    """

    tensors: tuple
    lie_algebra_dim: int
    identifiable: bool
    generators: np.ndarray

    def as_dict(self) -> dict:
        return {
            "n_inputs": len(self.tensors),
            "lie_algebra_dim": self.lie_algebra_dim,
            "identifiable": self.identifiable,
            "generators": [g.tolist() for g in self.generators],
        }


@dataclass(frozen=True)
class PixelMap:
    """Per-pixel fit parameters and residuals of an image reconstruction."""

    width: int
    height: int
    model: str
    values: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray

    def plane(self, index) -> np.ndarray:
        """Return one parameter plane as a (height, width) array."""
        return self.values[:, :, index]


def _check_tensor_pair(k_in, k_out):
    k_in = np.asarray(k_in, dtype=float)
    k_out = np.asarray(k_out, dtype=float)
    if k_in.shape != (4, 4) or k_out.shape != (4, 4):
        raise ValueError("correlation tensors must be 4x4")
    if abs(k_in[0, 0] - 1.0) > 1e-8:
        raise ValueError("input tensor must have K00 = 1")
    return k_in, k_out


def _diag_mueller(x) -> np.ndarray:
    m = np.eye(4)
    m[1, 1], m[2, 2], m[3, 3] = x
    return m


def _diagonal_system(k_in, k_out, isotropic):
    """Residual and Jacobian functions of the diagonal congruence fit."""

    def expand(x):
        return np.full(3, x[0]) if isotropic else x

    def fun(x):
        m = _diag_mueller(expand(x))
        return (m @ k_in @ m.T - k_out).ravel()

    def jac(x):
        m = _diag_mueller(expand(x))
        km = k_in @ m.T
        mk = m @ k_in
        cols = []
        for a in (1, 2, 3):
            d = np.zeros((4, 4))
            d[a, :] += km[a, :]
            d[:, a] += mk[:, a]
            cols.append(d.ravel())
        j = np.array(cols).T
        if isotropic:
            j = j.sum(axis=1, keepdims=True)
        return j

    return fun, jac


def fit_diagonal(k_in, k_out, model="diagonal", residual_tol=None) -> FitResult:
    """Fit M = diag(1, m11, m22, m33) to K_out = M K_in M^T.

    ``model`` is "diagonal" (three parameters) or "isotropic"
    (m11 = m22 = m33).  Parameters are box-constrained to [0, 1].
    """
    k_in, k_out = _check_tensor_pair(k_in, k_out)
    if model not in ("diagonal", "isotropic"):
        raise ValueError("model must be 'diagonal' or 'isotropic'")
    isotropic = model == "isotropic"
    fun, jac = _diagonal_system(k_in, k_out, isotropic)

    # Seed from the diagonal ratio where the input tensor has signal.
    guess = np.full(3, 0.5)
    for a in (1, 2, 3):
        if abs(k_in[a, a]) > 0.05:
            guess[a - 1] = np.clip(
                np.sqrt(abs(k_out[a, a] / k_in[a, a])), 0.0, 1.0
            )
    x0 = np.array([guess.mean()]) if isotropic else guess

    res = least_squares(
        fun, x0, jac=jac, bounds=(0.0, 1.0), method="trf",
        xtol=_FIT_TOL, ftol=_FIT_TOL, gtol=_FIT_TOL,
    )
    residual = float(np.linalg.norm(res.fun))
    converged = bool(res.success) and (residual_tol is None or residual <= residual_tol)
    return FitResult(model, res.x.copy(), residual, int(res.nfev), converged)


def _general_mueller(x) -> np.ndarray:
    m = np.empty((4, 4))
    m.flat[0] = 1.0
    m.flat[1:] = x
    return m


def _general_system(pairs):
    """Residual and Jacobian functions of the 15-parameter congruence fit."""

    def fun(x):
        m = _general_mueller(x)
        return np.concatenate(
            [(m @ k_in @ m.T - k_out).ravel() for k_in, k_out in pairs]
        )

    def jac(x):
        m = _general_mueller(x)
        blocks = []
        for k_in, _ in pairs:
            km = k_in @ m.T
            mk = m @ k_in
            block = np.zeros((16, 15))
            for p in range(15):
                a, b = divmod(p + 1, 4)
                d = np.zeros((4, 4))
                d[a, :] += km[b, :]
                d[:, a] += mk[:, b]
                block[:, p] = d.ravel()
            blocks.append(block)
        return np.vstack(blocks)

    return fun, jac


_SIGN_FLIPS = [
    np.diag([1.0, s1, s2, s3])
    for s1 in (1.0, -1.0)
    for s2 in (1.0, -1.0)
    for s3 in (1.0, -1.0)
]


def fit_general(pairs, n_starts=20, seed=0, residual_tol=None) -> FitResult:
    """Fit a general Mueller matrix (M00 = 1, 15 free entries) to tensor pairs.

    Minimizes the stacked congruence residual over all pairs with entries
    box-constrained to [-1, 1], using ``n_starts`` uniform multistarts (best
    residual wins, ties broken by start order) and a Nelder-Mead fallback
    when the least-squares runs do not report success.  A single pair whose
    input tensor has a nonzero stabilizer algebra is rejected as
    underdetermined.  When the data leave the sign of the diagonal block
    free, the representative with M11 >= 0 is returned.
    """
    pairs = [_check_tensor_pair(k_in, k_out) for k_in, k_out in pairs]
    if not pairs:
        raise ValueError("at least one (k_in, k_out) pair is required")
    if len(pairs) == 1:
        report = stabilizer_dimension([pairs[0][0]])
        if report.lie_algebra_dim > 0:
            raise UnderdeterminedFitError(
                "underdetermined - see stabilizer report", report
            )

    fun, jac = _general_system(pairs)
    rng = np.random.default_rng(seed)
    best = None
    nfev = 0
    for _ in range(n_starts):
        x0 = rng.uniform(-1.0, 1.0, size=15)
        res = least_squares(
            fun, x0, jac=jac, bounds=(-1.0, 1.0), method="trf",
            xtol=_FIT_TOL, ftol=_FIT_TOL, gtol=_FIT_TOL,
        )
        nfev += int(res.nfev)
        resid = float(np.linalg.norm(res.fun))
        if best is None or resid < best[0]:
            best = (resid, res.x.copy(), bool(res.success))
    residual, x, success = best

    if not success:
        # Derivative-free fallback from the best point found so far.
        nm = minimize(
            lambda z: float(np.sum(fun(z) ** 2)), x, method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 20000},
        )
        nfev += int(nm.nfev)
        nm_resid = float(np.linalg.norm(fun(nm.x)))
        if nm_resid < residual:
            residual, x, success = nm_resid, np.clip(nm.x, -1, 1), bool(nm.success)

    # Resolve sign freedom: prefer M11 >= 0 among data-equivalent candidates.
    m = _general_mueller(x)
    if m[1, 1] < 0:
        tol = residual + max(1e-12, 1e-9 * residual)
        for flip in _SIGN_FLIPS:
            cand = m @ flip
            if cand[1, 1] >= 0 and np.linalg.norm(fun(cand.flat[1:])) <= tol:
                x = cand.flatten()[1:]
                residual = float(np.linalg.norm(fun(x)))
                break

    converged = success and (residual_tol is None or residual <= residual_tol)
    return FitResult("general", np.asarray(x), residual, nfev, converged)


def _stabilizer_operator(tensors) -> np.ndarray:
    rows = []
    for k in tensors:
        k = np.asarray(k, dtype=float)
        op = np.zeros((16, 16))
        for a in range(4):
            for b in range(4):
                basis = np.zeros((4, 4))
                basis[a, b] = 1.0
                op[:, 4 * a + b] = (basis @ k + k @ basis.T).ravel()
        rows.append(op)
    return np.vstack(rows)


def stabilizer_dimension(tensors) -> StabilizerReport:
    """Dimension of the joint algebra {X : X K_i + K_i X^T = 0}.

    Computed as the SVD null space of the stacked linear operator with
    relative threshold 1e-10; the congruence K -> M K M^T is invariant
    under M -> M exp(tX) for every generator X, so identifiability of a
    Mueller fit from these inputs requires dimension zero.
    """
    tensors = [np.asarray(k, dtype=float) for k in tensors]
    if not tensors:
        raise ValueError("at least one tensor is required")
    op = _stabilizer_operator(tensors)
    _, sing, vt = np.linalg.svd(op)
    dim = int(np.sum(sing < _NULL_SPACE_REL_TOL * sing[0]))
    if dim:
        generators = vt[16 - dim:].reshape(dim, 4, 4).copy()
    else:
        generators = np.zeros((0, 4, 4))
    return StabilizerReport(
        tensors=tuple(tensors),
        lie_algebra_dim=dim,
        identifiable=(dim == 0),
        generators=generators,
    )


def reconstruct_image(k_in, pixel_tensors, model="diagonal", threads=None) -> PixelMap:
    """Fit the diagonal depolarizer model independently at every pixel.

    ``pixel_tensors`` is an (H, W, 4, 4) array of output tensors sharing the
    input tensor ``k_in``.  Per-pixel failures are recorded as NaN values
    with ``converged`` False rather than aborting the image.  ``threads``
    defaults to the QPOL2_THREADS environment variable (serial if unset);
    results are identical for any thread count.
    """
    pixel_tensors = np.asarray(pixel_tensors, dtype=float)
    if pixel_tensors.ndim != 4 or pixel_tensors.shape[2:] != (4, 4):
        raise ValueError("pixel tensors must have shape (H, W, 4, 4)")
    height, width = pixel_tensors.shape[:2]
    n_params = 1 if model == "isotropic" else 3
    values = np.full((height, width, n_params), np.nan)
    residuals = np.full((height, width), np.nan)
    converged = np.zeros((height, width), dtype=bool)

    def run(idx):
        h, w = idx
        try:
            fit = fit_diagonal(k_in, pixel_tensors[h, w], model=model)
            return idx, fit.params, fit.residual, fit.converged
        except Exception:
            return idx, None, np.nan, False

    if threads is None:
        threads = int(os.environ.get("QPOL2_THREADS", "1"))
    indices = [(h, w) for h in range(height) for w in range(width)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, indices))
    else:
        results = [run(idx) for idx in indices]
    for (h, w), params, resid, ok in results:
        if params is not None:
            values[h, w] = params
        residuals[h, w] = resid
        converged[h, w] = ok
    return PixelMap(width, height, model, values, residuals, converged)


def mueller_similarity(m_a, m_b) -> float:
    """Normalized Frobenius agreement 1 - |A - B| / (|A| + |B|), in [0, 1]."""
    m_a = np.asarray(m_a, dtype=float)
    m_b = np.asarray(m_b, dtype=float)
    return float(1.0 - np.linalg.norm(m_a - m_b) / (np.linalg.norm(m_a) + np.linalg.norm(m_b)))
