"""Virtual experiment: state preparation, plate stack, tomography, Monte Carlo.

The lattice environment is traced out by averaging ``U(x_j) rho U(x_j)^dag``
uniformly over the pattern samples.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .channels import ChannelSpec, apply_channel
from .metasurface import CANONICAL_STACK, DEFAULT_PERIOD_MM, profile_pauli, waveplate_matrix
from .pauli import (
    KET_H,
    InvalidStateError,
    bloch_from_density,
    density_from_bloch,
    fidelity,
    validate_density,
)
from .solver import SolverConfig

log = logging.getLogger(__name__)

NAMED_INPUTS = {"H": (1.0, 0.0, 0.0), "D": (0.0, 1.0, 0.0), "L": (0.0, 0.0, 1.0)}
NOMINAL_DELTA = np.array([p.delta for p in CANONICAL_STACK])

# (QWP angle, HWP angle) before a horizontal polarizer; each pair makes the
# analyzer transmit exactly the named polarization.
ANALYZER_SETTINGS = {
    "H": (0.0, 0.0),
    "V": (0.0, np.pi / 4),
    "D": (np.pi / 4, np.pi / 8),
    "A": (np.pi / 4, 3 * np.pi / 8),
    "L": (0.0, np.pi / 8),
    "R": (0.0, 3 * np.pi / 8),
}
STOKES_PAIRS = (("H", "V"), ("D", "A"), ("L", "R"))

TRAJECTORY_HEADER = (
    "channel", "input", "p",
    "s1_th", "s2_th", "s3_th",
    "s1_sim", "s2_sim", "s3_sim",
    "s1_std", "s2_std", "s3_std",
    "fidelity",
)


@dataclass(frozen=True)
class InputState:
    kind: str
    custom_bloch: tuple | None = None

    def __post_init__(self):
        kind = self.kind.upper() if self.kind.lower() != "custom" else "custom"
        object.__setattr__(self, "kind", kind)
        if kind == "custom":
            if self.custom_bloch is None:
                raise InvalidStateError("custom input needs a Bloch vector")
            s = np.asarray(self.custom_bloch, dtype=float)
            if s.shape != (3,) or s @ s > 1 + 1e-12:
                raise InvalidStateError(f"invalid custom Bloch vector {self.custom_bloch}")
        elif kind not in NAMED_INPUTS:
            raise InvalidStateError(f"unknown input state {self.kind!r}")

    @property
    def bloch(self):
        if self.kind == "custom":
            return np.asarray(self.custom_bloch, dtype=float)
        return np.array(NAMED_INPUTS[self.kind])

    @property
    def label(self):
        if self.kind == "custom":
            return "custom(" + ";".join(f"{v:g}" for v in self.bloch) + ")"
        return self.kind


def prepare_state(s):
    if isinstance(s, str):
        s = InputState(s)
    return density_from_bloch(s.bloch)


@dataclass(frozen=True)
class MonteCarloConfig:
    realizations: int = 100
    sigma_rel: float = 0.05
    seed: int = 0
    alignment_scale: float = np.pi / 2

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if self.sigma_rel < 0:
            raise ValueError("sigma_rel must be non-negative")


@dataclass(frozen=True)
class PerturbedStack:
    """Rigid per-plate retardations and optic-axis offsets."""

    delta: np.ndarray
    offset: np.ndarray

    @classmethod
    def nominal(cls):
        return cls(NOMINAL_DELTA.copy(), np.zeros(3))

    @classmethod
    def draw(cls, cfg, index):
        # one stream per (seed, realization): order-independent
        rng = np.random.default_rng([cfg.seed, index])
        eps = rng.standard_normal(3)
        eta = rng.standard_normal(3)
        delta = NOMINAL_DELTA * (1 + cfg.sigma_rel * eps)
        offset = cfg.sigma_rel * cfg.alignment_scale * eta
        return cls(delta, offset)


def apply_stack(profile, rho, perturbation=None):
    """Qubit state after the plate stack with the lattice traced out."""
    rho = validate_density(rho)
    pert = perturbation or PerturbedStack.nominal()
    u = profile_pauli(profile, pert.delta, pert.offset)
    return kernels.average_conjugation(u, rho)


def analyzer_matrix(setting):
    qwp, hwp = ANALYZER_SETTINGS[setting]
    return waveplate_matrix(np.pi, hwp) @ waveplate_matrix(np.pi / 2, qwp)


def analyzer_intensities(rho):
    """Transmitted intensity behind the Q-H-P analyzer for all six settings."""
    rho = np.asarray(rho, dtype=complex)
    out = {}
    for name in ANALYZER_SETTINGS:
        a = analyzer_matrix(name)
        out[name] = float(np.vdot(KET_H, a @ rho @ a.conj().T @ KET_H).real)
    return out


def tomography(rho):
    """Stokes parameters by linear inversion of the six analyzer intensities."""
    inten = analyzer_intensities(validate_density(rho))
    return np.array([(inten[a] - inten[b]) / (inten[a] + inten[b]) for a, b in STOKES_PAIRS])


def physical_state(bloch):
    """Density matrix of a measured Bloch vector, shrunk onto the ball if needed."""
    s = np.asarray(bloch, dtype=float)
    norm = np.sqrt(s @ s)
    if norm > 1:
        s = s / norm
    return density_from_bloch(s)


@dataclass(frozen=True)
class TrajectoryEntry:
    channel: str
    input: str
    p: float
    theory: np.ndarray
    ideal: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    fidelity: float
    samples: np.ndarray = field(repr=False, default=None)

    def row(self):
        return [self.channel, self.input, repr(float(self.p))] + [
            repr(float(v)) for v in (*self.theory, *self.mean, *self.std, self.fidelity)
        ]


@dataclass
class TrajectoryResult:
    entries: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.failures


def monte_carlo(profile, input_state, cfg=None, target=None, channel="", p=float("nan")):
    """Perturbed-stack realizations for one input.

    ``target`` is the Kraus set giving the theoretical output; without it
    the unperturbed stack output serves as theory.
    """
    cfg = cfg or MonteCarloConfig()
    if isinstance(input_state, str):
        input_state = InputState(input_state)
    rho_in = prepare_state(input_state)
    rho_ideal = apply_stack(profile, rho_in)
    rho_th = apply_channel(target, rho_in) if target is not None else rho_ideal
    perts = [PerturbedStack.draw(cfg, k) for k in range(cfg.realizations)]
    outputs = kernels.monte_carlo_outputs(
        profile.thetas,
        np.stack([pt.delta for pt in perts]),
        np.stack([pt.offset for pt in perts]),
        rho_in,
    )
    samples = np.stack([tomography(_hermitize(r)) for r in outputs])
    fids = [fidelity(rho_th, physical_state(s)) for s in samples]
    std = samples.std(axis=0, ddof=1) if cfg.realizations > 1 else np.zeros(3)
    return TrajectoryEntry(
        channel,
        input_state.label,
        float(p),
        bloch_from_density(rho_th),
        tomography(rho_ideal),
        samples.mean(axis=0),
        std,
        float(np.mean(fids)),
        samples,
    )


def _hermitize(rho):
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def trajectory(kind, p_values, inputs, mc_cfg=None, solver_cfg=None, period=DEFAULT_PERIOD_MM,
               designs=None):
    """Sweep a named channel over ``p_values`` for each input state.

    Each p is designed (or taken from ``designs``, a mapping p -> profile).
    Failures are recorded per p and the sweep continues.
    """
    from .pipeline import design_with_pattern

    result = TrajectoryResult()
    for p in p_values:
        spec = ChannelSpec(kind, p=p)
        try:
            if designs is not None and p in designs:
                profile = designs[p]
            else:
                _, profile = design_with_pattern(spec, solver_cfg or SolverConfig(), period)
        except Exception as exc:  # noqa: BLE001 - reported per point
            log.warning("design failed for %s p=%g: %s", kind, p, exc)
            result.failures[p] = f"{type(exc).__name__}: {exc}"
            continue
        for inp in inputs:
            result.entries.append(
                monte_carlo(profile, inp, mc_cfg, spec.kraus(), spec.kind, p)
            )
    return result


def write_trajectory_csv(entries, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for e in entries:
        writer.writerow(e.row())
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    return Path(path)


def read_trajectory_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: unexpected trajectory header")
        return [
            {k: (v if k in ("channel", "input") else float(v)) for k, v in row.items()}
            for row in reader
        ]


def sampled_channel(profile_or_values, rho):
    """Average conjugation by sampled SU(2) values, or by a profile's stack."""
    if hasattr(profile_or_values, "thetas"):
        return apply_stack(profile_or_values, rho)
    return kernels.average_conjugation(np.asarray(profile_or_values, float), rho)

