"""Kraus-set channels, their Pauli Gram matrices and dilation feasibility."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pauli import PAULIS, SIGMA0, pauli_decompose, validate_density

TP_TOL = 1e-10

NAMED_KINDS = ("bit_flip", "bit_phase_flip", "phase_flip", "depolarizing")
_FLIP_PAULI = {"bit_flip": 1, "bit_phase_flip": 2, "phase_flip": 3}


class ChannelError(ValueError):
    """Invalid channel specification or Kraus set."""


@dataclass(frozen=True)
class KrausSet:
    operators: tuple
    label: str = "custom"

    def __post_init__(self):
        ops = tuple(np.array(op, dtype=complex) for op in self.operators)
        if not ops:
            raise ChannelError("a Kraus set needs at least one operator")
        for op in ops:
            if op.shape != (2, 2):
                raise ChannelError(f"Kraus operators must be 2x2, got {op.shape}")
            op.flags.writeable = False
        object.__setattr__(self, "operators", ops)

    def __len__(self):
        return len(self.operators)


@dataclass(frozen=True)
class ChannelSpec:
    """User-facing description of a target channel.

    ``kind`` is one of :data:`NAMED_KINDS` or ``"custom"``. Named kinds need
    ``p``; custom channels carry their own :class:`KrausSet`.
    """

    kind: str
    p: float | None = None
    custom_kraus: KrausSet | None = None

    def __post_init__(self):
        kind = normalize_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == "custom":
            if self.custom_kraus is None:
                raise ChannelError("custom channel requires Kraus operators")
        elif self.p is None:
            raise ChannelError(f"channel {kind!r} requires a coupling strength p")

    def kraus(self):
        if self.kind == "custom":
            return self.custom_kraus
        return standard_channel(self.kind, self.p)

    def to_json(self):
        if self.kind == "custom":
            ops = [
                [[float(z.real), float(z.imag)] for z in np.asarray(op).ravel()]
                for op in self.custom_kraus.operators
            ]
            return {"kind": "custom", "kraus": ops}
        return {"kind": self.kind, "p": float(self.p)}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ChannelError("channel spec must be an object with a 'kind' field")
        kind = normalize_kind(obj["kind"])
        if kind == "custom":
            raw = obj.get("kraus")
            if not raw:
                raise ChannelError("custom channel spec needs a non-empty 'kraus' list")
            ops = []
            for entry in raw:
                arr = np.asarray(entry, dtype=float)
                if arr.shape != (4, 2):
                    raise ChannelError(
                        "each Kraus operator must be 4 row-major [re, im] pairs"
                    )
                ops.append((arr[:, 0] + 1j * arr[:, 1]).reshape(2, 2))
            return cls("custom", custom_kraus=KrausSet(tuple(ops), obj.get("label", "custom")))
        if "p" not in obj:
            raise ChannelError(f"channel {kind!r} requires 'p'")
        return cls(kind, p=float(obj["p"]))

    @property
    def label(self):
        if self.kind == "custom":
            return self.custom_kraus.label
        return self.kind


def normalize_kind(kind):
    kind = str(kind).strip().lower().replace("-", "_")
    aliases = {"depolarization": "depolarizing", "depolarising": "depolarizing"}
    kind = aliases.get(kind, kind)
    if kind not in NAMED_KINDS + ("custom",):
        raise ChannelError(f"unknown channel kind {kind!r}")
    return kind


def load_channel_spec(path):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ChannelError(f"{path}: invalid JSON ({exc})") from exc
    return ChannelSpec.from_json(obj)


def standard_channel(kind, p):
    """Kraus set of a named Pauli channel with coupling strength ``p``.

    Flip channels use ``{sqrt(1-p) s0, sqrt(p) s_i}``; depolarizing uses
    ``sqrt(1-p) s0`` and ``sqrt(p/3) s_i`` for i = 1, 2, 3. Zero-weight
    operators are dropped.
    """
    kind = normalize_kind(kind)
    if kind == "custom":
        raise ChannelError("custom channels have no standard Kraus set")
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"p must lie in [0, 1], got {p}")
    if kind == "depolarizing":
        weights = [(0, 1 - p), (1, p / 3), (2, p / 3), (3, p / 3)]
    else:
        weights = [(0, 1 - p), (_FLIP_PAULI[kind], p)]
    ops = tuple(np.sqrt(w) * PAULIS[i] for i, w in weights if w > 0)
    return KrausSet(ops, f"{kind}(p={p:g})")


def amplitude_damping(gamma):
    g = float(gamma)
    a0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
    a1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
    return KrausSet((a0, a1), f"amplitude_damping(gamma={g:g})")


@dataclass(frozen=True)
class TraceCheck:
    tp: bool
    unital: bool
    tp_residual: float
    unital_residual: float


def check_trace_preserving(k, tol=TP_TOL):
    """Report trace preservation (sum A^dag A = 1) and unitality separately."""
    ops = np.stack(k.operators)
    tp_sum = np.einsum("kji,kjl->il", ops.conj(), ops)
    un_sum = np.einsum("kij,klj->il", ops, ops.conj())
    tp_res = float(np.linalg.norm(tp_sum - SIGMA0))
    un_res = float(np.linalg.norm(un_sum - SIGMA0))
    return TraceCheck(tp_res <= tol, un_res <= tol, tp_res, un_res)


def apply_channel(k, rho):
    """Return ``sum_k A_k rho A_k^dag``."""
    rho = validate_density(rho)
    check = check_trace_preserving(k)
    if not check.tp:
        raise ChannelError(
            f"Kraus set {k.label!r} is not trace preserving "
            f"(residual {check.tp_residual:.3g})"
        )
    ops = np.stack(k.operators)
    return np.einsum("kij,jl,kml->im", ops, rho, ops.conj())


def gram_matrix(k):
    """Pauli second moments ``M_ij = sum_k c_i^(k) conj(c_j^(k))``."""
    coeffs = np.stack([pauli_decompose(op) for op in k.operators])
    return np.einsum("ki,kj->ij", coeffs, coeffs.conj())


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str = ""
    magnitude: float = 0.0
    entry: tuple | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.feasible

    def describe(self):
        if self.feasible:
            return "feasible: real symmetric PSD Gram matrix with unit trace"
        where = f" at entry M[{self.entry[0]},{self.entry[1]}]" if self.entry else ""
        return f"infeasible: {self.reason}{where} (magnitude {self.magnitude:.3g})"


def feasibility(g, tol=TP_TOL):
    """Decide whether a Gram matrix is reachable by a real SU(2) field.

    Averages of ``U(q) rho U(q)^dag`` with real Pauli vectors only produce
    real symmetric, PSD, unit-trace moment matrices (mixtures of unitaries).
    Conditions are checked in that order and the first failure is reported.
    """
    g = np.asarray(g, dtype=complex)
    imag = np.abs(g.imag)
    if imag.max() > tol:
        # entries equal up to rounding count as ties; report the first one
        flat = np.flatnonzero(imag >= imag.max() * (1 - 1e-9))[0]
        worst = np.unravel_index(flat, imag.shape)
        bad = [(int(i), int(j)) for i, j in zip(*np.nonzero(imag > tol)) if i <= j]
        return Feasibility(
            False,
            "Gram matrix has a non-real entry; the channel is not a mixture of unitaries",
            float(imag[worst]),
            (int(worst[0]), int(worst[1])),
            {"non_real_entries": bad},
        )
    herm = np.max(np.abs(g - g.conj().T))
    if herm > tol:
        return Feasibility(False, "Gram matrix is not Hermitian", float(herm))
    w = np.linalg.eigvalsh(g.real)
    if w.min() < -tol:
        return Feasibility(False, "Gram matrix is not positive semidefinite", float(-w.min()))
    tr = abs(np.trace(g).real - 1)
    if tr > tol:
        return Feasibility(False, "Gram matrix trace differs from 1", float(tr))
    return Feasibility(True, details={"eigenvalues": w.tolist()})
