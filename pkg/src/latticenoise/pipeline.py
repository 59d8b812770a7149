"""Design orchestration: channel spec -> Fourier design -> optic-axis pattern."""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channels import ChannelSpec, gram_matrix
from .metasurface import (
    DEFAULT_PERIOD_MM,
    UnresolvableJump,
    check_reconstruction,
    pattern_from_field,
)
from .solver import FourierSolution, SolverConfig, SolverReport, evaluate_field, solve

log = logging.getLogger(__name__)


class DesignFileError(ValueError):
    pass


@dataclass(frozen=True)
class Design:
    spec: ChannelSpec
    config: SolverConfig
    solution: FourierSolution
    report: SolverReport

    def field(self, grid_q=None):
        return evaluate_field(self.solution, grid_q or self.config.grid_q)

    def to_json(self):
        return {
            "channel": self.spec.to_json(),
            "config": self.config.to_json(),
            "n_max": self.solution.n_max,
            "dc": self.solution.dc.tolist(),
            "cos": self.solution.cos_coeffs.tolist(),
            "sin": self.solution.sin_coeffs.tolist(),
            "report": self.report.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        try:
            spec = ChannelSpec.from_json(obj["channel"])
            cfg = SolverConfig.from_json(obj.get("config", {}))
            sol = FourierSolution(obj["dc"], obj["cos"], obj["sin"])
            report = SolverReport.from_json(obj["report"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DesignFileError(f"malformed design: {exc!r}") from exc
        if np.shape(obj["cos"]) != (4, sol.n_max):
            raise DesignFileError("cos block must be 4 x N")
        return cls(spec, cfg, sol, report)

    def save(self, path):
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path):
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DesignFileError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json(obj)


def design_channel(spec, cfg=None):
    cfg = cfg or SolverConfig()
    solution, report = solve(gram_matrix(spec.kraus()), cfg)
    return Design(spec, cfg, solution, report)


def design_pattern(design, period=DEFAULT_PERIOD_MM, grid_q=None):
    """Optic-axis profile of a design, checked against the sampled field."""
    field = design.field(grid_q)
    profile = pattern_from_field(field.values, period)
    check_reconstruction(profile, field.values)
    return profile


def design_with_pattern(spec, cfg=None, period=DEFAULT_PERIOD_MM, attempts=8):
    """Design a channel and its pattern, reseeding if stitching fails.

    Seeds ``cfg.seed, cfg.seed + 1, ...`` are tried in order so the result
    is deterministic.
    """
    cfg = cfg or SolverConfig()
    last = None
    for k in range(attempts):
        design = design_channel(spec, replace(cfg, seed=cfg.seed + k))
        try:
            return design, design_pattern(design, period)
        except UnresolvableJump as exc:
            log.info("seed %d: %s; reseeding", cfg.seed + k, exc)
            last = exc
    raise last
