"""Small dense linear algebra for states and operators on few-qubit Hilbert spaces.

States are plain numpy arrays: kets are 1-D complex arrays, density matrices
and operators are square 2-D complex arrays. Two time-bin qubits use the basis
order (EE, EL, LE, LL), i.e. index ``2*q1 + q2`` with E -> 0 and L -> 1.
"""

from __future__ import annotations

import numpy as np

# tolerance ladder shared by every module
ATOL_ARITH = 1e-12
ATOL_STATE = 1e-10
ATOL_SPECTRUM = 1e-9
ATOL_RECON = 1e-8
# eigenvalues in [-NEG_CLAMP, 0) are treated as round-off and set to zero
NEG_CLAMP = 1e-6
# eigenvalues below this are numerical noise; their square roots would be ~1e-7
NOISE_FLOOR = 1e-14

KET_E = np.array([1.0, 0.0], dtype=complex)
KET_L = np.array([0.0, 1.0], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)

TWO_QUBIT_LABELS = ("EE", "EL", "LE", "LL")


class InvalidStateError(ValueError):
    """Raised when an array violates the density-matrix invariants."""


class DimensionError(ValueError):
    """Raised when operand dimensions are incompatible."""


def normalize(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise InvalidStateError("cannot normalize the zero vector")
    return vec / norm


def projector(vec) -> np.ndarray:
    """Return |v><v| for a (re)normalized ket."""
    vec = normalize(vec)
    return np.outer(vec, vec.conj())


def bell_state(name: str) -> np.ndarray:
    """Time-bin Bell kets: 'phi+', 'phi-', 'psi+', 'psi-'."""
    s = 1 / np.sqrt(2)
    table = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    try:
        return np.array(table[name.lower()], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown Bell state {name!r}") from None


def tensor(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the major index.

    Both operands must be of the same kind: two kets (1-D) or two operators (2-D).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise DimensionError(
            f"tensor needs two kets or two operators, got ndim {a.ndim} and {b.ndim}"
        )
    return np.kron(a, b)


def is_hermitian(op, atol: float = ATOL_ARITH) -> bool:
    op = np.asarray(op)
    scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
    return bool(np.allclose(op, op.conj().T, rtol=0, atol=atol * scale))


def check_density_matrix(rho, dim: int | None = None) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return a complex copy.

    Tolerances: Hermitian and unit trace within 1e-10, eigenvalues >= -1e-9.
    """
    rho = np.array(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {rho.shape[0]}")
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=ATOL_STATE):
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > ATOL_STATE:
        raise InvalidStateError(f"trace is {tr.real:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lam_min < -ATOL_SPECTRUM:
        raise InvalidStateError(f"negative eigenvalue {lam_min:.3e}")
    return rho


def partial_trace(rho, dims: tuple[int, int], keep: str = "A") -> np.ndarray:
    """Reduce a bipartite operator to subsystem ``keep`` ('A' or 'B')."""
    rho = np.asarray(rho, dtype=complex)
    d_a, d_b = dims
    if d_a * d_b != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"dims {dims} do not factor a {rho.shape[0]}-dim operator")
    t = rho.reshape(d_a, d_b, d_a, d_b)
    keep = keep.upper()
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def herm_eigs(op, return_vectors: bool = False):
    """Eigenvalues of a Hermitian operator in descending order.

    With ``return_vectors`` the matching eigenvectors are returned as columns.
    """
    op = np.asarray(op, dtype=complex)
    if not is_hermitian(op):
        raise ValueError("herm_eigs requires a Hermitian operator")
    vals, vecs = np.linalg.eigh(0.5 * (op + op.conj().T))
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    if return_vectors:
        return vals, vecs
    return vals


def psd_sqrt(rho) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in [-1e-6, 0) are clamped to zero; anything more negative is an
    invalid state.
    """
    vals, vecs = herm_eigs(rho, return_vectors=True)
    scale = max(1.0, float(vals[0])) if vals.size else 1.0
    if vals.size and vals[-1] < -NEG_CLAMP * scale:
        raise InvalidStateError(f"matrix has significantly negative eigenvalue {vals[-1]:.3e}")
    vals = np.where(vals < NOISE_FLOOR * scale, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def expectation(rho, op) -> complex:
    """trace(rho @ op)."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise DimensionError(f"shape mismatch {rho.shape} vs {op.shape}")
    return complex(np.einsum("ij,ji->", rho, op))


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed random state of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
