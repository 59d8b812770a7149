"""Pure numpy implementations of the hot kernels.

Signatures mirror the compiled ``_ckernels`` module exactly; see
:mod:`latticenoise.kernels` for backend selection.
"""

import numpy as np


def _plate_pauli(delta, theta):
    # W = cos(d/2) s0 + i sin(d/2)(cos 2t s1 + sin 2t s2) in the -i convention
    delta = np.asarray(delta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    half = 0.5 * np.broadcast_to(delta, theta.shape)
    s = np.sin(half)
    out = np.zeros(theta.shape + (4,))
    out[..., 0] = np.cos(half)
    out[..., 1] = -s * np.cos(2 * theta)
    out[..., 2] = -s * np.sin(2 * theta)
    return out


def _mul(a, b):
    """Product of real Pauli vectors (quaternion product)."""
    a0, av = a[..., :1], a[..., 1:]
    b0, bv = b[..., :1], b[..., 1:]
    scalar = a0 * b0 - np.sum(av * bv, axis=-1, keepdims=True)
    vector = a0 * bv + b0 * av + np.cross(av, bv)
    return np.concatenate([scalar, vector], axis=-1)


def stack_pauli(theta1, theta2, theta3, delta, offset):
    """Pauli vectors of ``W3 @ W2 @ W1`` at every sample, shape ``(Q, 4)``."""
    w1 = _plate_pauli(delta[0], np.asarray(theta1) + offset[0])
    w2 = _plate_pauli(delta[1], np.asarray(theta2) + offset[1])
    w3 = _plate_pauli(delta[2], np.asarray(theta3) + offset[2])
    return _mul(_mul(w3, w2), w1)


def average_conjugation(u, rho):
    """``mean_j U_j rho U_j^dag`` for real Pauli vectors ``u`` of shape (Q, 4)."""
    u = np.asarray(u, dtype=float)
    mats = np.empty(u.shape[:-1] + (2, 2), dtype=complex)
    mats[..., 0, 0] = u[..., 0] - 1j * u[..., 3]
    mats[..., 0, 1] = -1j * u[..., 1] - u[..., 2]
    mats[..., 1, 0] = -1j * u[..., 1] + u[..., 2]
    mats[..., 1, 1] = u[..., 0] + 1j * u[..., 3]
    out = np.einsum("...qij,jk,...qlk->...il", mats, rho, mats.conj())
    return out / u.shape[-2]


def monte_carlo_outputs(theta, deltas, offsets, rho):
    """Stack outputs for R perturbed realizations, shape ``(R, 2, 2)``.

    ``theta`` has shape (3, Q); ``deltas`` and ``offsets`` have shape (R, 3).
    """
    theta = np.asarray(theta, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    plates = [
        _plate_pauli(deltas[:, i, None], theta[i][None, :] + offsets[:, i, None])
        for i in range(3)
    ]
    u = _mul(_mul(plates[2], plates[1]), plates[0])
    return average_conjugation(u, np.asarray(rho, dtype=complex))


def unit_norm_jacobian(coeffs, basis):
    """Residuals ``|u(q_j)|^2 - 1`` and their Jacobian w.r.t. ``coeffs``.

    ``coeffs`` is (4, K) and ``basis`` is (Q, K); the Jacobian is (Q, 4K)
    with coefficient index ``i*K + k``.
    """
    values = coeffs @ basis.T
    resid = np.einsum("iq,iq->q", values, values) - 1.0
    jac = 2.0 * values.T[:, :, None] * basis[:, None, :]
    return resid, jac.reshape(basis.shape[0], -1)
