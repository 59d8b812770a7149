"""Single-qubit matrix algebra in the circular polarization basis.

Basis states are |L> = (1, 0) and |R> = (0, 1). Linear polarizations are
superpositions of these, e.g. |H> = (|L> + |R>)/sqrt(2).

Pauli vectors follow the rotation convention

    M = c0*s0 - i*(c1*s1 + c2*s2 + c3*s3)

so a real unit Pauli vector is exactly an SU(2) matrix.
"""

import numpy as np

ATOL = 1e-12

SIGMA0 = np.eye(2, dtype=complex)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA0, SIGMA1, SIGMA2, SIGMA3])

KET_L = np.array([1, 0], dtype=complex)
KET_R = np.array([0, 1], dtype=complex)
KET_H = (KET_L + KET_R) / np.sqrt(2)
KET_D = (KET_L + 1j * KET_R) / np.sqrt(2)


class InvalidStateError(ValueError):
    """Raised when a matrix is not a valid density matrix."""


def is_hermitian(m, tol=ATOL):
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def is_unitary(m, tol=ATOL):
    m = np.asarray(m)
    return bool(np.max(np.abs(m.conj().T @ m - SIGMA0)) <= tol)


def is_psd(m, tol=ATOL):
    m = np.asarray(m)
    if not is_hermitian(m, tol):
        return False
    return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)


def pauli_decompose(m):
    """Return the Pauli vector ``(c0, c1, c2, c3)`` of a 2x2 matrix.

    ``c0 = Tr(m)/2`` and ``c_a = i*Tr(m @ sigma_a)/2`` so that
    :func:`pauli_compose` inverts this map exactly.
    """
    m = np.asarray(m, dtype=complex)
    traces = np.einsum("ij,aji->a", m, PAULIS) / 2
    traces[1:] *= 1j
    return traces


def pauli_compose(v):
    """Build ``c0*s0 - i*(c1*s1 + c2*s2 + c3*s3)`` from a Pauli vector."""
    v = np.asarray(v, dtype=complex)
    return v[0] * SIGMA0 - 1j * np.einsum("a,aij->ij", v[1:], PAULIS[1:])


def su2_from_pauli(u):
    """Vectorized :func:`pauli_compose` for real vectors, shape ``(..., 4)``."""
    u = np.asarray(u, dtype=float)
    u0, u1, u2, u3 = np.moveaxis(u, -1, 0)
    out = np.empty(u.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = u0 - 1j * u3
    out[..., 0, 1] = -1j * u1 - u2
    out[..., 1, 0] = -1j * u1 + u2
    out[..., 1, 1] = u0 + 1j * u3
    return out


def validate_density(rho, tol=ATOL):
    """Return ``rho`` as a complex array or raise :class:`InvalidStateError`."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise InvalidStateError(f"expected a 2x2 matrix, got shape {rho.shape}")
    if not is_hermitian(rho, tol):
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidStateError(f"density matrix has trace {np.trace(rho).real:.3g}")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise InvalidStateError("density matrix has a negative eigenvalue")
    return rho


def pure_density(ket):
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return np.outer(ket, ket.conj())


def bloch_from_density(rho):
    """Stokes parameters ``s_i = Tr(rho @ sigma_i)``."""
    rho = validate_density(rho)
    return np.einsum("ij,aji->a", rho, PAULIS[1:]).real


def density_from_bloch(s, tol=ATOL):
    s = np.asarray(s, dtype=float)
    if s.shape != (3,):
        raise InvalidStateError(f"expected 3 Stokes parameters, got shape {s.shape}")
    if s @ s > 1 + tol:
        raise InvalidStateError(f"Bloch vector length {np.sqrt(s @ s):.6g} exceeds 1")
    return (SIGMA0 + np.einsum("a,aij->ij", s, PAULIS[1:])) / 2


EIG_FLOOR = 1e-15


def _clipped_eigh(m):
    # eigenvalues at rounding level are zeroed so pure states stay exactly pure
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return np.where(w > EIG_FLOOR, w, 0.0), v


def psd_sqrt(m):
    """Square root of a Hermitian PSD 2x2 matrix via its eigendecomposition."""
    w, v = _clipped_eigh(m)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho_th, rho_exp):
    """Uhlmann fidelity ``[Tr sqrt(sqrt(rho_th) rho_exp sqrt(rho_th))]^2``.

    Both arguments must be valid density matrices. For a PSD 2x2 matrix X,
    ``(Tr sqrt X)^2 = Tr X + 2 sqrt(det X)`` with
    ``det X = det(rho_th) det(rho_exp)``, which avoids square roots of
    rounding-level eigenvalues when a state is nearly pure. The result is
    clipped to ``[0, 1]``.
    """
    a = validate_density(rho_th)
    b = validate_density(rho_exp)
    wa, va = _clipped_eigh(a)
    wb, _ = _clipped_eigh(b)
    root = (va * np.sqrt(wa)) @ va.conj().T
    x = root @ b @ root
    det = wa.prod() * wb.prod()
    return float(np.clip(np.trace(x).real + 2 * np.sqrt(det), 0.0, 1.0))
