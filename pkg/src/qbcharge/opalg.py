"""Dense complex operator algebra on small composite Hilbert spaces.

Conventions used throughout the toolkit (fixed here once):

* composite states live on ``H_C (x) H_B``: charger factor first, battery second;
* within a two-level system, index 0 is the excited state ``|e>`` and index 1
  the ground state ``|g>``, so ``sigma_plus()[0, 1] = 1``;
* oscillator factors use the usual Fock ordering ``|0>, |1>, ...``;
* frequencies are in units of the battery frequency, hbar = 1.

Everything is dense ``numpy`` ``complex128``; dimensions stay below ~512 so
sparse formats and iterative eigensolvers are unnecessary.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimMismatch, NotHermitian

# hermiticity tolerances: construction-time flags vs runtime checks
HERM_TOL_BUILD = 1e-12
HERM_TOL_RUNTIME = 1e-10


class SpectralDecomp(NamedTuple):
    """Eigendecomposition of a hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray  # real, nondecreasing
    eigenvectors: np.ndarray  # unitary; columns are eigenvectors


def sigma_plus() -> np.ndarray:
    """Raising operator |e><g| in the (e, g) basis."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_minus() -> np.ndarray:
    return np.array([[0, 0], [1, 0]], dtype=complex)


def sigma_z() -> np.ndarray:
    return np.array([[1, 0], [0, -1]], dtype=complex)


def sigma_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def destroy(cutoff: int) -> np.ndarray:
    """Truncated annihilation operator, a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1.0, cutoff)), 1).astype(complex)


def number(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff, dtype=float)).astype(complex)


def basis_ket(dim: int, index: int) -> np.ndarray:
    ket = np.zeros(dim, dtype=complex)
    ket[index] = 1.0
    return ket


def coherent_ket(alpha: complex, cutoff: int) -> np.ndarray:
    """Truncated coherent state, renormalized after truncation."""
    n = np.arange(cutoff)
    from scipy.special import gammaln

    log_amp = n * np.log(np.abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1.0)
    ket = np.exp(log_amp - 0.5 * np.abs(alpha) ** 2) * np.exp(1j * n * np.angle(alpha))
    return ket / np.linalg.norm(ket)


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def dm(ket: np.ndarray) -> np.ndarray:
    """Density matrix |psi><psi| of a (normalized) ket."""
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def herm_defect(a: np.ndarray) -> float:
    """max |A - A^dag| elementwise."""
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERM_TOL_RUNTIME) -> bool:
    return herm_defect(a) <= tol


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two square operators (left factor varies slowest)."""
    a = _check_square(a, "left factor")
    b = _check_square(b, "right factor")
    return np.kron(a, b)


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = _check_square(ops[0])
    for op in ops[1:]:
        out = np.kron(out, _check_square(op))
    return out


def herm_eig(a: np.ndarray, tol: float = HERM_TOL_RUNTIME) -> SpectralDecomp:
    """Spectral decomposition of a hermitian matrix.

    Raises NotHermitian if the symmetry defect exceeds ``tol``.
    """
    a = _check_square(a)
    defect = herm_defect(a)
    if defect > tol:
        raise NotHermitian(f"hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    w, v = np.linalg.eigh(a)
    return SpectralDecomp(eigenvalues=w, eigenvectors=v)


def expect(op: np.ndarray, rho: np.ndarray, trace_tol: float = 1e-8) -> complex:
    """Expectation value Tr[rho op] for a unit-trace state."""
    op = _check_square(op, "operator")
    rho = _check_square(rho, "state")
    if op.shape != rho.shape:
        raise DimMismatch(f"operator dim {op.shape[0]} != state dim {rho.shape[0]}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise DimMismatch(f"state trace {tr} deviates from 1 beyond {trace_tol:.1e}")
    return complex(np.einsum("ij,ji->", rho, op))


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: int) -> np.ndarray:
    """Reduced state of subsystem ``keep`` of a state on (x)_k H_k.

    ``dims`` lists the factor dimensions in tensor order; their product must
    equal the dimension of ``rho``.
    """
    rho = _check_square(rho, "state")
    dims = list(int(d) for d in dims)
    if int(np.prod(dims)) != rho.shape[0]:
        raise DimMismatch(f"prod(dims)={np.prod(dims)} != dim(rho)={rho.shape[0]}")
    if not 0 <= keep < len(dims):
        raise DimMismatch(f"keep={keep} does not index a subsystem of {dims}")
    n = len(dims)
    reshaped = rho.reshape(dims + dims)
    # contract bra with ket index of every factor except `keep`
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[:n])
    col[keep] = letters[n]
    subscript = "".join(row) + "".join(col) + "->" + row[keep] + col[keep]
    return np.einsum(subscript, reshaped)
