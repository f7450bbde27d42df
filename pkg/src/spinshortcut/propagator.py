"""Two-level Schrodinger propagation with exactly unitary steps.

Hamiltonians are given by real coefficient triples (hx, hy, hz) in rad/ns,

    H(t) = (hbar/2) [[hz, hx + i hy], [hx - i hy, -hz]],

i.e. H = (hbar/2) m.sigma with m = (hx, -hy, hz).  Each step applies the
closed-form SU(2) exponential of a fourth-order Magnus generator (two
Gauss-Legendre nodes plus the commutator term), or of the midpoint
Hamiltonian with ``method="midpoint"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .params import HBAR

DEFAULT_STEPS_PER_NS = 10000  # 20000 steps for t_f = 2 ns
NORM_TOL = 1e-10
GAP_FLOOR = 1e-12

_GAUSS = math.sqrt(3.0) / 6.0


class NotNormalizedError(ValueError):
    pass


@dataclass(frozen=True)
class QuantumState:
    """Amplitudes on |1> = (1, 0) and |-1> = (0, 1)."""

    amp_up: complex
    amp_down: complex

    def __post_init__(self):
        n = abs(self.amp_up) ** 2 + abs(self.amp_down) ** 2
        if abs(n - 1.0) > NORM_TOL:
            raise NotNormalizedError(f"state norm^2 = {n!r}")

    @classmethod
    def up(cls):
        return cls(1.0 + 0j, 0j)

    @classmethod
    def down(cls):
        return cls(0j, 1.0 + 0j)

    @classmethod
    def from_vector(cls, vec, normalize: bool = False):
        vec = np.asarray(vec, dtype=complex)
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(complex(vec[0]), complex(vec[1]))

    def vector(self) -> np.ndarray:
        return np.array([self.amp_up, self.amp_down], dtype=complex)

    @property
    def populations(self):
        return abs(self.amp_up) ** 2, abs(self.amp_down) ** 2


@dataclass(frozen=True)
class HamiltonianTrace:
    """Sampled coefficients; ``func`` (if given) evaluates them in closed
    form at arbitrary times and is preferred over interpolation."""

    t: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    func: Optional[Callable] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing with >= 2 samples")
        for name in ("hx", "hy", "hz"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != t.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid has {t.shape}")

    def coefficients(self, t):
        if self.func is not None:
            return tuple(np.asarray(c, dtype=float) for c in self.func(t))
        if not hasattr(self, "_splines"):
            object.__setattr__(
                self, "_splines", [CubicSpline(self.t, c) for c in (self.hx, self.hy, self.hz)]
            )
        return tuple(s(t) for s in self._splines)

    def matrix(self, i=None) -> np.ndarray:
        """H/hbar in rad/ns, shape (n, 2, 2)."""
        sl = slice(None) if i is None else i
        return coefficient_matrix(self.hx[sl], self.hy[sl], self.hz[sl])


def coefficient_matrix(hx, hy, hz) -> np.ndarray:
    hx, hy, hz = np.broadcast_arrays(np.asarray(hx, float), np.asarray(hy, float), np.asarray(hz, float))
    H = np.empty(hx.shape + (2, 2), dtype=complex)
    H[..., 0, 0] = 0.5 * hz
    H[..., 1, 1] = -0.5 * hz
    H[..., 0, 1] = 0.5 * (hx + 1j * hy)
    H[..., 1, 0] = 0.5 * (hx - 1j * hy)
    return H


@dataclass(frozen=True)
class EvolutionResult:
    t: np.ndarray
    up: np.ndarray
    down: np.ndarray
    steps: int
    norm_drift: float

    @property
    def P1(self):
        return np.abs(self.up) ** 2

    @property
    def Pm1(self):
        return np.abs(self.down) ** 2

    @property
    def final_state(self) -> QuantumState:
        return QuantumState.from_vector([self.up[-1], self.down[-1]], normalize=True)

    def columns(self) -> dict:
        return {
            "t_ns": self.t,
            "P1": self.P1,
            "Pm1": self.Pm1,
            "ReUp": self.up.real,
            "ImUp": self.up.imag,
            "ReDown": self.down.real,
            "ImDown": self.down.imag,
        }


def su2_exponential(wx, wy, wz):
    """exp(-(i/2) w.sigma) as (a, b) with U = [[a, b], [-b*, a*]]."""
    norm = np.sqrt(wx * wx + wy * wy + wz * wz)
    half = 0.5 * norm
    c = np.cos(half)
    s = np.where(norm > 0, np.sin(half) / np.where(norm > 0, norm, 1.0), 0.5)
    a = c - 1j * s * wz
    b = -1j * s * (wx - 1j * wy)
    return a, b


def step_generators(coeffs: Callable, starts, h, method: str = "magnus4"):
    """Rotation vectors w for each step starting at ``starts`` of length ``h``.

    ``coeffs(t)`` returns (hx, hy, hz); extra leading (batch) axes are kept.
    """
    starts = np.asarray(starts, dtype=float)
    h = np.asarray(h, dtype=float)
    if method == "midpoint":
        hx, hy, hz = coeffs(starts + 0.5 * h)
        return h * hx, -h * hy, h * hz
    if method != "magnus4":
        raise ValueError(f"unknown method {method!r}")
    x1, y1, z1 = coeffs(starts + (0.5 - _GAUSS) * h)
    x2, y2, z2 = coeffs(starts + (0.5 + _GAUSS) * h)
    # m = (hx, -hy, hz)
    m1 = (x1, -y1, z1)
    m2 = (x2, -y2, z2)
    k = math.sqrt(3.0) / 12.0 * h * h
    cross = (
        m2[1] * m1[2] - m2[2] * m1[1],
        m2[2] * m1[0] - m2[0] * m1[2],
        m2[0] * m1[1] - m2[1] * m1[0],
    )
    return tuple(0.5 * h * (m1[i] + m2[i]) + k * cross[i] for i in range(3))


def _substeps(t, steps):
    per = max(1, int(math.ceil(steps / (len(t) - 1))))
    frac = np.arange(per) / per
    dt = np.diff(t)
    starts = (t[:-1, None] + dt[:, None] * frac[None, :]).ravel()
    h = np.repeat(dt / per, per)
    return starts, h, per


def _run(a, b, up, down, per):
    """Sequential application of step unitaries, recording every ``per`` steps."""
    a = a.tolist()
    b = b.tolist()
    rec_up = [up]
    rec_down = [down]
    for i, (ai, bi) in enumerate(zip(a, b), 1):
        up, down = ai * up + bi * down, -bi.conjugate() * up + ai.conjugate() * down
        if i % per == 0:
            rec_up.append(up)
            rec_down.append(down)
    return np.array(rec_up), np.array(rec_down)


def _propagate_once(trace, initial, steps, method):
    t = np.asarray(trace.t, dtype=float)
    starts, h, per = _substeps(t, steps)
    a, b = su2_exponential(*step_generators(trace.coefficients, starts, h, method))
    up, down = _run(a, b, complex(initial.amp_up), complex(initial.amp_down), per)
    return up, down, per * (len(t) - 1)


def propagate(
    trace: HamiltonianTrace,
    initial: QuantumState = None,
    steps: Optional[int] = None,
    tol: Optional[float] = 1e-8,
    method: str = "magnus4",
    max_doublings: int = 6,
    z0=None,
) -> EvolutionResult:
    """Solve i d/dt psi = (H/hbar) psi on ``trace.t``.

    ``steps`` is the total number of unitary steps (default 10000 per ns).
    With ``tol`` set the step count is doubled until halving it changes the
    final populations by less than ``tol``.  ``z0`` (rad/ns, sampled on the
    grid) optionally restores the removed diagonal shift as a global phase.
    """
    if initial is None:
        initial = QuantumState.down()
    if not isinstance(initial, QuantumState):
        initial = QuantumState.from_vector(initial)
    t = np.asarray(trace.t, dtype=float)
    if steps is None:
        steps = int(math.ceil(DEFAULT_STEPS_PER_NS * (t[-1] - t[0])))
    steps = max(int(steps), len(t) - 1)

    up, down, n = _propagate_once(trace, initial, steps, method)
    if tol is not None:
        for _ in range(max_doublings):
            up2, down2, n2 = _propagate_once(trace, initial, 2 * n, method)
            change = abs(abs(up2[-1]) ** 2 - abs(up[-1]) ** 2)
            up, down, n = up2, down2, n2
            if change < tol:
                break
        else:
            raise RuntimeError(f"populations not converged to {tol:g} after {n} steps")

    if z0 is not None:
        phase = cumulative_trapezoid(np.asarray(z0, dtype=float), t, initial=0.0)
        factor = np.exp(-1j * phase)
        up, down = up * factor, down * factor

    norm = np.abs(up) ** 2 + np.abs(down) ** 2
    return EvolutionResult(t=t, up=up, down=down, steps=n, norm_drift=float(np.max(np.abs(norm - 1.0))))


def propagate_final_batch(coeffs: Callable, t_f: float, steps: int, initial: QuantumState = None,
                          method: str = "magnus4"):
    """Final amplitudes for a batch of Hamiltonians sharing one time grid.

    ``coeffs(t)`` returns (hx, hy, hz), each of shape (batch, len(t)).
    """
    if initial is None:
        initial = QuantumState.down()
    h = t_f / steps
    starts = np.arange(steps) * h
    a, b = su2_exponential(*step_generators(coeffs, starts, h, method))
    if a.shape[0] == 1:
        u, d = _run(a[0], b[0], complex(initial.amp_up), complex(initial.amp_down), steps)
        return u[-1:], d[-1:]
    up = np.full(a.shape[0], initial.amp_up, dtype=complex)
    down = np.full(a.shape[0], initial.amp_down, dtype=complex)
    for k in range(steps):
        ak, bk = a[:, k], b[:, k]
        up, down = ak * up + bk * down, -np.conj(bk) * up + np.conj(ak) * down
    return up, down


def instantaneous_eigenstates(hy, hz):
    """Eigenvectors of H0 = (hbar/2)[[hz, i hy], [-i hy, -hz]].

    Returns ``(chi_plus, chi_minus, E_plus, E_minus)``; the states have shape
    (..., 2) and the energies are in meV.
    """
    hy = np.asarray(hy, dtype=float)
    hz = np.asarray(hz, dtype=float)
    gap = np.hypot(hy, hz)
    if np.any(gap < GAP_FLOOR):
        raise ValueError("gap closed: hy = hz = 0")
    theta = np.arctan2(hy, hz)
    return _eigvecs(theta) + (0.5 * HBAR * gap, -0.5 * HBAR * gap)


def _eigvecs(theta):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    plus = np.stack([1j * c, s + 0j], axis=-1)
    minus = np.stack([s + 0j, 1j * c], axis=-1)
    return plus, minus


def adiabatic_reference(trace: HamiltonianTrace) -> EvolutionResult:
    """chi_+(t) dressed with the dynamical phase -(1/hbar) int E_+ dt.

    Only hy and hz are used; hx is ignored (this is the H0 reference).
    """
    t = np.asarray(trace.t, dtype=float)
    gap = np.hypot(trace.hy, trace.hz)
    if np.any(gap < GAP_FLOOR):
        raise ValueError("gap closed: hy = hz = 0")
    theta = np.unwrap(np.arctan2(trace.hy, trace.hz))
    plus, _ = _eigvecs(theta)
    phase = np.exp(-0.5j * cumulative_trapezoid(gap, t, initial=0.0))
    up = plus[:, 0] * phase
    down = plus[:, 1] * phase
    norm = np.abs(up) ** 2 + np.abs(down) ** 2
    return EvolutionResult(t=t, up=up, down=down, steps=0, norm_drift=float(np.max(np.abs(norm - 1.0))))


def transfer_fidelity(result: EvolutionResult, target: QuantumState) -> float:
    """|<target|psi(t_f)>|^2."""
    tv = target.vector()
    return float(abs(np.conj(tv[0]) * result.up[-1] + np.conj(tv[1]) * result.down[-1]) ** 2)


def overlap_history(result: EvolutionResult, states) -> np.ndarray:
    """|<chi(t)|psi(t)>|^2 at every sample for states of shape (n, 2)."""
    states = np.asarray(states)
    amp = np.conj(states[:, 0]) * result.up + np.conj(states[:, 1]) * result.down
    return np.abs(amp) ** 2
