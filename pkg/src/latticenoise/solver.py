"""Fourier-series inverse design of the quasi-momentum unitary field.

The field ``u(q) = (u0, u1, u2, u3)(q)`` is a real Fourier series of order
``N``. Its second moments must equal the real part of the target Gram
matrix (cost ``f1``) while ``|u(q_j)| = 1`` on a grid of ``Q`` points
(cost ``f2``). The two costs are minimized alternately, each stage starting
from the other's output, until the coefficient vectors of consecutive
stages agree.

Coefficients are stored as a ``(4, 2N+1)`` matrix with columns
``[dc, cos 1..N, sin 1..N]``.
"""

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import jv

from . import kernels
from .channels import feasibility
from .pauli import su2_from_pauli

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-10
SUPPORT_TOL = 1e-12


class InfeasibleTarget(ValueError):
    def __init__(self, diagnosis):
        super().__init__(diagnosis.describe())
        self.diagnosis = diagnosis


class NonConvergence(RuntimeError):
    def __init__(self, message, solution=None, report=None):
        super().__init__(message)
        self.solution = solution
        self.report = report


class NormCollapse(ValueError):
    pass


@dataclass(frozen=True)
class FourierSolution:
    dc: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        dc = np.array(self.dc, dtype=float).reshape(4)
        cc = np.array(self.cos_coeffs, dtype=float).reshape(4, -1)
        ss = np.array(self.sin_coeffs, dtype=float).reshape(4, -1)
        if cc.shape != ss.shape:
            raise ValueError("cosine and sine coefficient blocks differ in shape")
        for arr in (dc, cc, ss):
            arr.flags.writeable = False
        object.__setattr__(self, "dc", dc)
        object.__setattr__(self, "cos_coeffs", cc)
        object.__setattr__(self, "sin_coeffs", ss)

    @property
    def n_max(self):
        return self.cos_coeffs.shape[1]

    def matrix(self):
        return np.hstack([self.dc[:, None], self.cos_coeffs, self.sin_coeffs])

    @classmethod
    def from_matrix(cls, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        n = (coeffs.shape[1] - 1) // 2
        return cls(coeffs[:, 0], coeffs[:, 1 : n + 1], coeffs[:, n + 1 :])

    @classmethod
    def constant(cls, u, n_max=0):
        return cls(u, np.zeros((4, n_max)), np.zeros((4, n_max)))

    def __call__(self, q):
        """Evaluate the four series at quasi-momenta ``q``; shape ``(len(q), 4)``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return fourier_basis(q, self.n_max) @ self.matrix().T


@dataclass(frozen=True)
class SolverConfig:
    n_max: int = 20
    grid_q: int = 125
    max_outer_iters: int = 200
    convergence_tol: float = 1e-12
    seed: int = 0
    restarts: int = 4
    inner_method: str = "lm"
    inner_max_iters: int = 20
    gradient_tol: float = 1e-15
    harmonic_amplitude: float = 0.3
    # early exits and final refinement, see decisions ledger
    cost_floor: float = 1e-24
    stall_window: int = 10
    polish: bool = True
    polish_max_iters: int = 300
    success_tol: float = SUCCESS_TOL

    def __post_init__(self):
        if min(self.n_max, self.grid_q, self.max_outer_iters, self.restarts) < 1:
            raise ValueError("n_max, grid_q, max_outer_iters and restarts must be positive")
        if self.grid_q < 2 * self.n_max + 1:
            raise ValueError(f"grid_q={self.grid_q} aliases N={self.n_max}; need >= 2N+1")
        if self.inner_method not in ("lm", "bfgs"):
            raise ValueError(f"unknown inner method {self.inner_method!r}")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in obj.items() if k in known})


@dataclass(frozen=True)
class SolverReport:
    f1_final: float
    f2_final: float
    outer_iters: int
    converged: bool
    restarts_used: int
    polished: bool = False
    history: tuple = field(default=(), repr=False, compare=False)

    def to_json(self):
        return {
            "f1": self.f1_final,
            "f2": self.f2_final,
            "iters": self.outer_iters,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "polished": self.polished,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            float(obj["f1"]),
            float(obj["f2"]),
            int(obj["iters"]),
            bool(obj["converged"]),
            int(obj.get("restarts_used", 1)),
            bool(obj.get("polished", False)),
        )


@dataclass(frozen=True)
class UnitaryField:
    grid: np.ndarray
    values: np.ndarray

    def matrices(self):
        return su2_from_pauli(self.values)


def quasi_momentum_grid(grid_q):
    """Uniform samples ``2*pi*j/Q``, endpoint excluded."""
    return 2 * np.pi * np.arange(grid_q) / grid_q


def fourier_basis(q, n_max):
    n = np.arange(1, n_max + 1)
    phase = np.outer(q, n)
    return np.hstack([np.ones((len(q), 1)), np.cos(phase), np.sin(phase)])


def _weights(n_max):
    w = np.ones(2 * n_max + 1)
    w[0] = 2.0
    return w


def second_moments(s):
    """Exact ``(1/2pi) int u_i u_j dq`` from the Fourier coefficients."""
    c = s.matrix()
    return 0.5 * (c * _weights(s.n_max)) @ c.T


def _target(g):
    return np.asarray(g).real


def _f1_residual(coeffs, target):
    return (coeffs * _weights((coeffs.shape[1] - 1) // 2)) @ coeffs.T - 2 * target


def cost_f1(s, g):
    """Sum over all 16 entries of ``[2*moment_ij - 2*Re M_ij]^2``."""
    r = _f1_residual(s.matrix(), _target(g))
    return float(np.sum(r * r))


def gradient_f1(s, g):
    """Analytic gradient of :func:`cost_f1`, shaped like ``s.matrix()``."""
    c = s.matrix()
    r = _f1_residual(c, _target(g))
    return 4 * r @ (c * _weights(s.n_max))


def cost_f2(s, grid_q):
    """Sum over the grid of ``(|u(q_j)|^2 - 1)^2``."""
    return sample_cost_f2(s(quasi_momentum_grid(grid_q)))


def sample_cost_f2(values):
    """Unit-norm cost of field samples ``values`` with shape ``(Q, 4)``."""
    v = np.asarray(values, dtype=float)
    resid = np.einsum("ja,ja->j", v, v) - 1
    return float(resid @ resid)


def gradient_f2(s, grid_q):
    """Analytic gradient of :func:`cost_f2`, shaped like ``s.matrix()``."""
    resid, jac = kernels.unit_norm_jacobian(
        s.matrix(), fourier_basis(quasi_momentum_grid(grid_q), s.n_max)
    )
    return (2 * jac.T @ resid).reshape(4, -1)


def _f1_jacobian(coeffs):
    k = coeffs.shape[1]
    cw = coeffs * _weights((k - 1) // 2)
    jac = np.zeros((4, 4, 4, k))
    for a in range(4):
        jac[a, :, a, :] += cw
        jac[:, a, a, :] += cw
    return jac.reshape(16, 4 * k)


class _Problem:
    """Residual maps for both costs in coordinates of the Gram support.

    A zero eigenvalue of Re(M) forces the matching field component to vanish
    identically, so the field is parameterized as ``basis @ w`` with
    ``basis`` the eigenvectors of the nonzero eigenvalues.
    """

    def __init__(self, target, cfg):
        self.target = target
        self.cfg = cfg
        self.k = 2 * cfg.n_max + 1
        self.grid_basis = fourier_basis(quasi_momentum_grid(cfg.grid_q), cfg.n_max)
        evals, evecs = np.linalg.eigh(target)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        keep = evals > SUPPORT_TOL
        self.eigenvalues = evals[keep]
        self.support = evecs[:, keep]
        self.rank = int(keep.sum())

    def coeffs(self, w):
        return self.support @ w.reshape(self.rank, self.k)

    def _reduce(self, jac):
        m = jac.shape[0]
        return np.einsum("mak,ar->mrk", jac.reshape(m, 4, self.k), self.support).reshape(m, -1)

    def f1(self, w):
        c = self.coeffs(w)
        return _f1_residual(c, self.target).ravel(), self._reduce(_f1_jacobian(c))

    def f2(self, w):
        resid, jac = kernels.unit_norm_jacobian(self.coeffs(w), self.grid_basis)
        return resid, self._reduce(jac)

    def joint(self, w):
        r1, j1 = self.f1(w)
        r2, j2 = self.f2(w)
        return np.concatenate([r1, r2]), np.vstack([j1, j2])

    def costs(self, w):
        c = self.coeffs(w)
        r1 = _f1_residual(c, self.target)
        r2, _ = kernels.unit_norm_jacobian(c, self.grid_basis)
        return float(np.sum(r1 * r1)), float(r2 @ r2)


def _levenberg_marquardt(fun, x, max_iters, floor):
    """Damped Gauss-Newton on ``sum(fun(x)[0]**2)``; returns the best point."""
    r, jac = fun(x)
    cost = r @ r
    mu = 1e-6
    n = x.size
    for _ in range(max_iters):
        if cost <= floor:
            break
        a = np.vstack([jac, np.sqrt(mu) * np.eye(n)])
        step = np.linalg.lstsq(a, np.concatenate([r, np.zeros(n)]), rcond=None)[0]
        trial = x - step
        r_new, jac_new = fun(trial)
        cost_new = r_new @ r_new
        if cost_new < cost:
            x, r, jac, cost = trial, r_new, jac_new, cost_new
            mu = max(mu / 10, 1e-15)
        else:
            mu *= 10
            if mu > 1e8:
                break
    return x


def _bfgs(fun, x, max_iters, gtol):
    def value_and_grad(y):
        r, jac = fun(y)
        return r @ r, 2 * jac.T @ r

    res = minimize(
        value_and_grad,
        x,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iters, "gtol": gtol, "ftol": 0.0, "maxcor": 30},
    )
    return res.x


def _jacobi_anger_pair(gap, n_max):
    """Coefficients of ``cos(a sin q)`` and ``sin(a sin q)`` truncated at n_max.

    ``a`` solves ``J0(2a) = gap`` so the pair's second moments are
    ``(1 + gap)/2`` and ``(1 - gap)/2``.
    """
    a = 0.0 if gap >= 1 else brentq(lambda t: jv(0, 2 * t) - gap, 0.0, 1.5)
    k = 2 * n_max + 1
    c, s = np.zeros(k), np.zeros(k)
    c[0] = jv(0, a)
    for n in range(1, n_max + 1):
        if n % 2 == 0:
            c[n] = 2 * jv(n, a)
        else:
            s[n_max + n] = 2 * jv(n, a)
    return c, s


def initial_guess(problem, rng, cfg):
    """Starting point in support coordinates, shape ``(rank * (2N+1),)``."""
    w = np.zeros((problem.rank, problem.k))
    lam = problem.eigenvalues
    if problem.rank == 1:
        w[0, 0] = np.sqrt(lam[0])
    elif problem.rank == 2:
        c, s = _jacobi_anger_pair(lam[0] - lam[1], cfg.n_max)
        # a random shift q -> q + q0 and sign keep restarts distinct
        q0 = rng.uniform(0, 2 * np.pi)
        n = np.arange(1, cfg.n_max + 1)
        w[0] = _shift(c, q0, n)
        w[1] = _shift(s, q0, n) * rng.choice([-1.0, 1.0])
    else:
        # 1/n^2 envelope keeps the field smooth enough to stitch into patterns
        n = np.arange(1, cfg.n_max + 1)
        envelope = np.concatenate([[0.0], 1.0 / n**2, 1.0 / n**2])
        amp = cfg.harmonic_amplitude * np.sqrt(lam)[:, None] * envelope
        w = rng.uniform(-1.0, 1.0, w.shape) * amp
        w[0, 0] = np.sqrt(lam[0])
    return w.ravel()


def _shift(row, q0, n):
    """Coefficients of ``f(q + q0)`` for the series ``row``."""
    nmax = len(n)
    a, b = row[1 : nmax + 1], row[nmax + 1 :]
    cs, sn = np.cos(n * q0), np.sin(n * q0)
    out = row.copy()
    out[1 : nmax + 1] = a * cs + b * sn
    out[nmax + 1 :] = b * cs - a * sn
    return out


def _alternate(problem, w, cfg):
    inner = {
        "lm": lambda f, x: _levenberg_marquardt(f, x, cfg.inner_max_iters, cfg.cost_floor),
        "bfgs": lambda f, x: _bfgs(f, x, cfg.inner_max_iters, cfg.gradient_tol),
    }[cfg.inner_method]
    history = []
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        w1 = inner(problem.f1, w)
        w2 = inner(problem.f2, w1)
        diff = float(np.abs(problem.coeffs(w2) - problem.coeffs(w1)).sum())
        w = w2
        f1, f2 = problem.costs(w)
        history.append((f1, f2, diff))
        if diff < cfg.convergence_tol or max(f1, f2) <= cfg.cost_floor:
            break
        win = cfg.stall_window
        if len(history) > win and max(f1, f2) > 0.1 * max(history[-win - 1][:2]):
            log.debug("alternation stalled at iteration %d (f1=%.3g f2=%.3g)", it, f1, f2)
            break
    return w, it, history


def solve(g, cfg=None):
    """Design Fourier coefficients whose field realizes Gram matrix ``g``.

    Returns ``(FourierSolution, SolverReport)``. Raises
    :class:`InfeasibleTarget` when ``g`` cannot come from a real SU(2)
    field and :class:`NonConvergence` when every restart ends with a cost
    above ``cfg.success_tol``.
    """
    cfg = cfg or SolverConfig()
    diag = feasibility(g)
    if not diag.feasible:
        raise InfeasibleTarget(diag)
    problem = _Problem(_target(g), cfg)
    best = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        w, iters, history = _alternate(problem, initial_guess(problem, rng, cfg), cfg)
        f1, f2 = problem.costs(w)
        polished = False
        if cfg.polish and max(f1, f2) > cfg.success_tol * 1e-6:
            w_pol = _levenberg_marquardt(problem.joint, w, cfg.polish_max_iters, cfg.cost_floor)
            p1, p2 = problem.costs(w_pol)
            if p1 + p2 < f1 + f2:
                w, f1, f2, polished = w_pol, p1, p2, True
        converged = f1 <= cfg.success_tol and f2 <= cfg.success_tol
        report = SolverReport(f1, f2, iters, converged, restart + 1, polished, tuple(history))
        sol = FourierSolution.from_matrix(problem.coeffs(w))
        log.info(
            "restart %d: iters=%d f1=%.3g f2=%.3g polished=%s", restart, iters, f1, f2, polished
        )
        if converged:
            return sol, report
        if best is None or f1 + f2 < best[1].f1_final + best[1].f2_final:
            best = (sol, report)
    raise NonConvergence(
        f"no restart reached f1, f2 <= {cfg.success_tol:g} "
        f"(best f1={best[1].f1_final:.3g}, f2={best[1].f2_final:.3g})",
        *best,
    )


def evaluate_field(s, grid_q):
    """Sample the designed field on the grid and renormalize each sample."""
    q = quasi_momentum_grid(grid_q)
    raw = s(q)
    norms = np.linalg.norm(raw, axis=1)
    if norms.min() < 0.5:
        j = int(np.argmin(norms))
        raise NormCollapse(f"field norm {norms[j]:.3g} at sample {j} (q={q[j]:.4f})")
    return UnitaryField(q, raw / norms[:, None])


def field_moments(field):
    """Grid-average second moments of a sampled field (the realized Gram matrix)."""
    v = field.values
    return v.T @ v / len(v)


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
