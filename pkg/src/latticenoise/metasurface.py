"""Optic-axis patterns of a QWP-HWP-QWP stack realizing a unitary field.

At each transverse sample the stack ``W3(t3) W2(t2) W1(t1)`` has Pauli
vector

    l0 = -cos(a) cos(b),  l1 = -sin(b) sin(g),
    l2 =  sin(b) cos(g),  l3 =  sin(a) cos(b)

with ``a = t1 - t3``, ``b = t1 - 2 t2 + t3`` and ``g = t1 + t3``. Matching
it to the target rotation gives two exact angle branches per sample; the
pattern is stitched sample by sample to stay continuous. Each plate angle
is only defined modulo pi, which the stitching uses to lift angles.
"""

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .pauli import su2_from_pauli

EPS_DEGENERATE = 1e-9
EPS_FREE_ANGLE = 1e-10
JUMP_THRESHOLD = np.pi / 4
RECONSTRUCTION_TOL = 1e-8
DEFAULT_PERIOD_MM = 2.5
CSV_HEADER = ("x_mm", "theta1_rad", "theta2_rad", "theta3_rad")


class UnresolvableJump(RuntimeError):
    pass


class ReconstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlateSpec:
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 2 * np.pi:
            raise ValueError(f"retardation must lie in (0, 2pi), got {self.delta}")


QWP = PlateSpec(np.pi / 2)
HWP = PlateSpec(np.pi)
CANONICAL_STACK = (QWP, HWP, QWP)


@dataclass(frozen=True)
class AxisAngleField:
    grid: np.ndarray
    chi: np.ndarray
    axis: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True)
class PatternProfile:
    period: float
    grid: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray

    @property
    def thetas(self):
        return np.stack([self.theta1, self.theta2, self.theta3])

    def __len__(self):
        return len(self.grid)


def axis_angle(values, grid=None):
    """Rotation angle and axis of each unit Pauli vector in ``values`` (Q, 4).

    ``chi = 2*atan2(|u_vec|, u0)``, equal to ``2*arccos(u0)`` on unit vectors
    but stable near the identity. Axes of samples with ``sin(chi/2)`` below
    :data:`EPS_DEGENERATE` are copied from the nearest regular sample, or
    set to ``(1, 0, 0)`` if every sample is degenerate.
    """
    values = np.asarray(values, dtype=float)
    if grid is None:
        grid = 2 * np.pi * np.arange(len(values)) / len(values)
    vec = values[:, 1:]
    half_sin = np.linalg.norm(vec, axis=1)
    chi = 2 * np.arctan2(half_sin, values[:, 0])
    degenerate = half_sin <= EPS_DEGENERATE
    axis = np.zeros_like(vec)
    regular = ~degenerate
    axis[regular] = vec[regular] / half_sin[regular, None]
    if regular.any():
        good = np.flatnonzero(regular)
        n = len(values)
        for j in np.flatnonzero(degenerate):
            # circular distance: the grid is periodic
            dist = np.abs(good - j)
            dist = np.minimum(dist, n - dist)
            axis[j] = axis[good[np.argmin(dist)]]
    else:
        axis[:] = (1.0, 0.0, 0.0)
    return AxisAngleField(np.asarray(grid, dtype=float), chi, axis, degenerate)


def waveplate_matrix(plate, theta):
    """Jones matrix of a retarder with optic axis at ``theta`` (circular basis)."""
    d = plate.delta if isinstance(plate, PlateSpec) else float(plate)
    c, s = np.cos(d / 2), np.sin(d / 2)
    return np.array(
        [[c, 1j * s * np.exp(-2j * theta)], [1j * s * np.exp(2j * theta), c]],
        dtype=complex,
    )


def stack_matrix(theta1, theta2, theta3, plates=CANONICAL_STACK):
    w1 = waveplate_matrix(plates[0], theta1)
    w2 = waveplate_matrix(plates[1], theta2)
    w3 = waveplate_matrix(plates[2], theta3)
    return w3 @ w2 @ w1


def triple_product_coefficients(theta1, theta2, theta3):
    """Closed-form Pauli vector of the canonical QWP-HWP-QWP stack."""
    a = theta1 - theta3
    b = theta1 - 2 * theta2 + theta3
    g = theta1 + theta3
    return np.array(
        [
            -np.cos(a) * np.cos(b),
            -np.sin(b) * np.sin(g),
            np.sin(b) * np.cos(g),
            np.sin(a) * np.cos(b),
        ]
    )


def branch_angles(chi, axis):
    """Both exact ``(alpha, beta, gamma)`` solutions for every sample.

    Returns an array of shape (2, Q, 3) plus boolean masks marking samples
    where gamma (``sin beta = 0``) or alpha (``cos beta = 0``) is free.
    """
    half = np.asarray(chi) / 2
    sh, ch = np.sin(half), np.cos(half)
    n1, n2, n3 = np.asarray(axis).T
    vartheta = np.arccos(np.clip(n3, -1.0, 1.0))
    varphi = np.arctan2(n2, n1)
    st = np.sin(vartheta)
    alpha1 = np.arctan2(-sh * np.cos(vartheta), ch)
    beta1 = np.arctan2(sh * st, -np.sqrt(np.clip(1 - (sh * st) ** 2, 0.0, None)))
    gamma1 = varphi - np.pi / 2
    first = np.stack([alpha1, beta1, gamma1], axis=-1)
    second = np.stack([np.pi + alpha1, np.pi - beta1, gamma1], axis=-1)
    gamma_free = np.abs(sh * st) <= EPS_FREE_ANGLE
    alpha_free = np.abs(np.cos(beta1)) <= EPS_FREE_ANGLE
    return np.stack([first, second]), gamma_free, alpha_free


def thetas_from_abg(alpha, beta, gamma):
    t1 = (alpha + gamma) / 2
    t3 = (gamma - alpha) / 2
    t2 = (gamma - beta) / 2
    return np.stack([t1, t2, t3], axis=-1)


def _lift(values, reference):
    """Shift each angle by a multiple of pi to sit closest to ``reference``."""
    return values - np.pi * np.round((values - reference) / np.pi)


def stitch_branches(branches, gamma_free, alpha_free, threshold=JUMP_THRESHOLD):
    """Scan samples in order and pick the continuous branch at each one.

    ``branches`` has shape (2, Q, 3) holding (alpha, beta, gamma). Free
    angles are pinned to the previous sample's value. Returns lifted
    ``(theta1, theta2, theta3)`` of shape (3, Q) and the chosen branch
    indices.
    """
    n = branches.shape[1]
    out = np.empty((n, 3))
    chosen = np.zeros(n, dtype=int)
    prev = None
    for j in range(n):
        best = None
        for b in (0, 1):
            alpha, beta, gamma = branches[b, j]
            if prev is not None:
                if gamma_free[j]:
                    gamma = prev[0] + prev[2]
                if alpha_free[j]:
                    alpha = prev[0] - prev[2]
            theta = thetas_from_abg(alpha, beta, gamma)
            if prev is None:
                best = (0.0, b, theta)
                break
            theta = _lift(theta, prev)
            cost = np.abs(theta - prev).sum()
            if best is None or cost < best[0]:
                best = (cost, b, theta)
        _, chosen[j], out[j] = best
        if prev is not None and np.abs(out[j] - prev).max() > threshold:
            raise UnresolvableJump(
                f"both branches jump by more than {threshold:.3g} rad at sample {j}"
            )
        prev = out[j]
    return out.T, chosen


def solve_angles(a, period=DEFAULT_PERIOD_MM):
    """Stitched optic-axis profile for an :class:`AxisAngleField`."""
    branches, gamma_free, alpha_free = branch_angles(a.chi, a.axis)
    thetas, _ = stitch_branches(branches, gamma_free, alpha_free)
    grid = period * np.arange(len(a.chi)) / len(a.chi)
    return PatternProfile(float(period), grid, *thetas)


def pattern_from_field(values, period=DEFAULT_PERIOD_MM):
    return solve_angles(axis_angle(values), period)


def profile_pauli(profile, plates=CANONICAL_STACK, offsets=(0.0, 0.0, 0.0)):
    """Pauli vectors of the (optionally perturbed) stack at every sample."""
    delta = np.array([p.delta if isinstance(p, PlateSpec) else p for p in plates])
    return kernels.stack_pauli(
        profile.theta1, profile.theta2, profile.theta3, delta, np.asarray(offsets, float)
    )


def reconstruction_errors(profile, values):
    """Frobenius error ``||W3 W2 W1 - U||`` at every sample."""
    built = su2_from_pauli(profile_pauli(profile))
    target = su2_from_pauli(values)
    return np.linalg.norm(built - target, axis=(1, 2))


def check_reconstruction(profile, values, tol=RECONSTRUCTION_TOL):
    err = reconstruction_errors(profile, values)
    if err.max() > tol:
        j = int(np.argmax(err))
        raise ReconstructionError(f"stack misses the field by {err[j]:.3g} at sample {j}")
    return float(err.max())


def wrap_angle(theta):
    """Reduce angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2 * np.pi)


def max_adjacent_jump(profile):
    return float(np.abs(np.diff(profile.thetas, axis=1)).max(initial=0.0))


def closure_gap(profile):
    """Distance modulo pi between the last and first sample of each pattern."""
    d = profile.thetas[:, -1] - profile.thetas[:, 0]
    return np.abs(d - np.pi * np.round(d / np.pi))


def export_pattern(profile, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    wrapped = wrap_angle(profile.thetas)
    for j, x in enumerate(profile.grid):
        writer.writerow([repr(float(x))] + [repr(float(t)) for t in wrapped[:, j]])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    return Path(path)


def import_pattern(path, period=None):
    """Read a pattern CSV; the period is inferred from the grid spacing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    if period is None:
        period = data[1, 0] * len(data) if len(data) > 1 else DEFAULT_PERIOD_MM
    return PatternProfile(float(period), data[:, 0], data[:, 1], data[:, 2], data[:, 3])
