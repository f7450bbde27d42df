"""Reference pulses, effective couplings, mixing angle and the
counter-diabatic correction.

The reduced two-level Hamiltonian is

    H = (hbar/2) [[Z, X + iY], [X - iY, -Z]]

with hbar Z = -J - Delta + (u1 + u2), hbar Y = -r (u1 - u2) and X the
counter-diabatic coupling.  All derivative channels are closed form; finite
differences only appear in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .params import HBAR, PhysicalParams, zeeman_splitting

DEFAULT_GRID = 4001
GAP_FLOOR = 1e-6  # rad/ns
THETA_TOL = 1e-3  # rad
Y_FLOOR = -1e-9  # rad/ns


class GapClosedError(ValueError):
    pass


class GridTooCoarseError(ValueError):
    pass


class AnsatzRejected(ValueError):
    pass


@dataclass(frozen=True)
class PulseSamples:
    """Reduced x-drive energies u1, u2 (meV) and their first three time
    derivatives, sampled on ``t``."""

    t: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    du1: np.ndarray
    du2: np.ndarray
    ddu1: np.ndarray
    ddu2: np.ndarray
    dddu1: np.ndarray
    dddu2: np.ndarray


def _tanh_channels(t, U0, a, w, t_f):
    k = 1.0 / (w * t_f)
    th = np.tanh((t - a * t_f) * k)
    sech2 = 1.0 - th * th
    u = U0 * th
    du = U0 * k * sech2
    ddu = -2.0 * U0 * k**2 * th * sech2
    dddu = U0 * k**3 * sech2 * (4.0 * th * th - 2.0 * sech2)
    return u, du, ddu, dddu


@dataclass(frozen=True)
class PulseAnsatz:
    """Tanh reference pulses u_j(t) = U0 tanh[(t - a_j t_f) / (w_j t_f)].

    U0 is in meV, a_j and w_j are fractions of t_f (ns).  With U0 > 0 the
    second pulse has to lead (u2 >= u1) for the off-diagonal Y to stay
    non-negative.
    """

    U0: float
    a1: float
    w1: float
    a2: float
    w2: float
    t_f: float = 2.0

    def __post_init__(self):
        for name in ("U0", "a1", "w1", "a2", "w2", "t_f"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = (self.U0, self.a1, self.w1, self.a2, self.w2, self.t_f)
        if not all(np.isfinite(vals)):
            raise AnsatzRejected(f"non-finite ansatz parameters {vals}")
        if self.U0 <= 0 or self.t_f <= 0:
            raise AnsatzRejected("U0 and t_f must be positive")
        if self.w1 <= 0 or self.w2 <= 0:
            raise AnsatzRejected("widths must be positive")
        if not (0 < self.a1 < 1 and 0 < self.a2 < 1):
            raise AnsatzRejected("centres a1, a2 must lie in (0, 1)")

    def pulses(self, t) -> PulseSamples:
        t = np.asarray(t, dtype=float)
        c1 = _tanh_channels(t, self.U0, self.a1, self.w1, self.t_f)
        c2 = _tanh_channels(t, self.U0, self.a2, self.w2, self.t_f)
        return PulseSamples(t, c1[0], c2[0], c1[1], c2[1], c1[2], c2[2], c1[3], c2[3])

    def endpoint_mismatch(self) -> float:
        """max(|u1 - u2|) at t = 0 and t = t_f, relative to U0."""
        s = self.pulses(np.array([0.0, self.t_f]))
        return float(np.max(np.abs(s.u1 - s.u2)) / self.U0)

    def stretched(self, k: float, mode: str = "shape") -> "PulseAnsatz":
        """Time-stretch by ``k``.

        ``shape`` keeps a_j, w_j (pulse shape scales with t_f); ``fixed_width``
        keeps the absolute widths w_j t_f.
        """
        if k <= 0:
            raise ValueError("stretch factor must be positive")
        if mode == "shape":
            return replace(self, t_f=self.t_f * k)
        if mode == "fixed_width":
            return replace(self, t_f=self.t_f * k, w1=self.w1 / k, w2=self.w2 / k)
        raise ValueError(f"unknown stretch mode {mode!r}")

    def as_tuple(self):
        return (self.U0, self.a1, self.w1, self.a2, self.w2)


def reference_pulses(ansatz: PulseAnsatz, grid) -> PulseSamples:
    return ansatz.pulses(grid)


def make_grid(t_f: float, grid=None) -> np.ndarray:
    if grid is None:
        grid = DEFAULT_GRID
    if np.isscalar(grid):
        n = int(grid)
        if n < 2:
            raise ValueError("grid needs at least two samples")
        return np.linspace(0.0, t_f, n)
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("grid must be strictly increasing")
    return t


@dataclass(frozen=True)
class DriveTrace:
    """Effective couplings on a time grid (rad/ns, and rad/ns^k for the
    k-th derivative).  Theta and X channels stay ``None`` until filled."""

    t: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    du1: np.ndarray
    du2: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    dY: np.ndarray
    dZ: np.ndarray
    ddY: np.ndarray
    ddZ: np.ndarray
    dddY: np.ndarray
    dddZ: np.ndarray
    theta: Optional[np.ndarray] = None
    dtheta: Optional[np.ndarray] = None
    ddtheta: Optional[np.ndarray] = None
    dddtheta: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None
    dX: Optional[np.ndarray] = None
    ddX: Optional[np.ndarray] = None

    @property
    def gap(self):
        return np.hypot(self.Y, self.Z)

    @property
    def max_eta(self) -> float:
        if self.eta is None:
            raise ValueError("adiabaticity metric not computed")
        return float(np.max(self.eta))


@dataclass(frozen=True)
class FieldTrace:
    t: np.ndarray
    Ex1: np.ndarray  # V/m
    Ex2: np.ndarray
    EyD: np.ndarray

    @property
    def max_Ex(self) -> float:
        return float(max(np.max(np.abs(self.Ex1)), np.max(np.abs(self.Ex2))))

    @property
    def max_EyD(self) -> float:
        return float(np.max(np.abs(self.EyD)))


def _couplings_raw(p: PhysicalParams, s: PulseSamples):
    r = p.so_ratio
    bias = -p.J - zeeman_splitting(p)
    Z = (bias + s.u1 + s.u2) / HBAR
    Y = -r * (s.u1 - s.u2) / HBAR
    dZ = (s.du1 + s.du2) / HBAR
    dY = -r * (s.du1 - s.du2) / HBAR
    ddZ = (s.ddu1 + s.ddu2) / HBAR
    ddY = -r * (s.ddu1 - s.ddu2) / HBAR
    dddZ = (s.dddu1 + s.dddu2) / HBAR
    dddY = -r * (s.dddu1 - s.dddu2) / HBAR
    return Y, Z, dY, dZ, ddY, ddZ, dddY, dddZ


def couplings(p: PhysicalParams, pulses: PulseSamples) -> DriveTrace:
    """Y, Z and their derivatives from the reduced x-drives."""
    Y, Z, dY, dZ, ddY, ddZ, dddY, dddZ = _couplings_raw(p, pulses)
    gap2 = Y * Y + Z * Z
    if np.any(gap2 < GAP_FLOOR**2):
        i = int(np.argmin(gap2))
        raise GapClosedError(
            f"gap closes at t = {pulses.t[i]:.6g} ns (|Y|,|Z| = {abs(Y[i]):.3g}, {abs(Z[i]):.3g} rad/ns)"
        )
    return DriveTrace(
        t=pulses.t, u1=pulses.u1, u2=pulses.u2, du1=pulses.du1, du2=pulses.du2,
        Y=Y, Z=Z, dY=dY, dZ=dZ, ddY=ddY, ddZ=ddZ, dddY=dddY, dddZ=dddZ,
    )


def theta_derivatives(Y, Z, dY, dZ, ddY, ddZ, dddY, dddZ):
    """First three derivatives of atan2(Y, Z) via the quotient rule on
    N = dY Z - Y dZ and D = Y^2 + Z^2."""
    D = Y * Y + Z * Z
    N = dY * Z - Y * dZ
    dN = ddY * Z - Y * ddZ
    ddN = dddY * Z + ddY * dZ - dY * ddZ - Y * dddZ
    dD = 2.0 * (Y * dY + Z * dZ)
    ddD = 2.0 * (dY * dY + Y * ddY + dZ * dZ + Z * ddZ)
    d1 = N / D
    d2 = dN / D - N * dD / D**2
    d3 = ddN / D - 2.0 * dN * dD / D**2 - N * ddD / D**2 + 2.0 * N * dD**2 / D**3
    return d1, d2, d3


def unwrap_angle(angle, t=None, what="angle"):
    """Continuous unwrap; raises if adjacent samples jump by more than pi/2."""
    out = np.unwrap(angle)
    jumps = np.abs(np.diff(out))
    if jumps.size and jumps.max() > np.pi / 2:
        i = int(np.argmax(jumps))
        where = f" near t = {t[i]:.6g} ns" if t is not None else ""
        raise GridTooCoarseError(f"{what} jumps by {jumps[i]:.3g} rad{where}; refine the grid")
    return out


def mixing_angle(trace: DriveTrace) -> DriveTrace:
    theta = unwrap_angle(np.arctan2(trace.Y, trace.Z), trace.t, "theta")
    # pin the branch so theta(0) lies in (-pi/2, 3pi/2]
    theta = theta - 2 * np.pi * np.floor((theta[0] + np.pi / 2) / (2 * np.pi))
    d1, d2, d3 = theta_derivatives(
        trace.Y, trace.Z, trace.dY, trace.dZ, trace.ddY, trace.ddZ, trace.dddY, trace.dddZ
    )
    return replace(trace, theta=theta, dtheta=d1, ddtheta=d2, dddtheta=d3)


def adiabaticity_metric(trace: DriveTrace):
    """Return ``(trace_with_eta, max_eta)``,
    eta = |dY Z - Y dZ| / (Y^2 + Z^2)^(3/2)."""
    eta = np.abs(trace.dY * trace.Z - trace.Y * trace.dZ) / (trace.Y**2 + trace.Z**2) ** 1.5
    return replace(trace, eta=eta), float(np.max(eta))


def counterdiabatic_term(trace: DriveTrace):
    """Counter-diabatic coupling X = dtheta/dt (rad/ns) and v = hbar X (meV),
    the energy carried by the y-field difference."""
    if trace.dtheta is None:
        trace = mixing_angle(trace)
    X = trace.dtheta
    return X, HBAR * X


def with_counterdiabatic(trace: DriveTrace) -> DriveTrace:
    if trace.dtheta is None:
        trace = mixing_angle(trace)
    return replace(trace, X=trace.dtheta, dX=trace.ddtheta, ddX=trace.dddtheta)


def field_traces(p: PhysicalParams, trace: DriveTrace) -> FieldTrace:
    """Lab fields: Ex_j = -(du_j/dt) / c_beta, EyD = -hbar theta'' / c_alpha."""
    if trace.ddtheta is None:
        trace = mixing_angle(trace)
    units = p.units
    return FieldTrace(
        t=trace.t,
        Ex1=units.field_from_rate(trace.du1, "beta"),
        Ex2=units.field_from_rate(trace.du2, "beta"),
        EyD=units.field_from_rate(HBAR * trace.ddtheta, "alpha"),
    )


def build_drive(p: PhysicalParams, ansatz: PulseAnsatz, grid=None) -> DriveTrace:
    """Full trace (couplings, theta, eta, X) for a tanh ansatz."""
    t = make_grid(ansatz.t_f, grid)
    trace = with_counterdiabatic(mixing_angle(couplings(p, ansatz.pulses(t))))
    trace, _ = adiabaticity_metric(trace)
    return trace


def transfer_violations(trace: DriveTrace, theta_tol: float = THETA_TOL, y_floor: float = Y_FLOOR):
    """Constraint violations for a |-1> -> |1> transfer pulse (empty if accepted)."""
    if trace.theta is None:
        trace = mixing_angle(trace)
    out = []
    if abs(trace.theta[0] - np.pi) > theta_tol:
        out.append(f"theta(0) = {trace.theta[0]:.6g}, expected pi within {theta_tol:g}")
    if abs(trace.theta[-1]) > theta_tol:
        out.append(f"theta(t_f) = {trace.theta[-1]:.6g}, expected 0 within {theta_tol:g}")
    if trace.Y.min() < y_floor:
        out.append(f"Y dips to {trace.Y.min():.3g} rad/ns (pulse ordering: u2 must lead u1)")
    if not (trace.Z[0] < 0 < trace.Z[-1]):
        out.append("Z does not change sign from negative to positive")
    return out


def accept_ansatz(p: PhysicalParams, ansatz: PulseAnsatz, grid=None, theta_tol: float = THETA_TOL,
                  endpoint_tol: Optional[float] = None) -> DriveTrace:
    """Build the drive and raise :class:`AnsatzRejected` unless it is a
    transfer pulse.  ``endpoint_tol`` optionally also bounds
    :meth:`PulseAnsatz.endpoint_mismatch`."""
    try:
        trace = build_drive(p, ansatz, grid)
    except (GapClosedError, GridTooCoarseError) as exc:
        raise AnsatzRejected(str(exc)) from exc
    problems = transfer_violations(trace, theta_tol)
    if endpoint_tol is not None:
        m = ansatz.endpoint_mismatch()
        if m > endpoint_tol:
            problems.append(f"endpoint mismatch |u1-u2|/U0 = {m:.3g} > {endpoint_tol:g}")
    if problems:
        raise AnsatzRejected("; ".join(problems))
    return trace


def global_shift(p: PhysicalParams, pulses: PulseSamples):
    """Diagonal shift Z0/hbar (rad/ns) removed from the full Hamiltonian."""
    return (-p.J / 4 + zeeman_splitting(p) / 2 - 0.5 * (pulses.u1 + pulses.u2)) / HBAR


def full_hamiltonian(p: PhysicalParams, pulses: PulseSamples, v=0.0):
    """Unshifted Hamiltonian (meV) before removing Z0, shape (..., 2, 2).

    ``v`` is the counter-diabatic energy (meV) carried by the y fields.
    """
    r = p.so_ratio
    Z1 = -1.5 * p.J
    Z2 = 0.5 * p.J + 2 * zeeman_splitting(p) - 2 * (pulses.u1 + pulses.u2)
    hX = np.broadcast_to(np.asarray(v, dtype=float), np.shape(pulses.u1))
    hY = -r * (pulses.u1 - pulses.u2)
    H = np.empty(np.shape(pulses.u1) + (2, 2), dtype=complex)
    H[..., 0, 0] = 0.5 * Z1
    H[..., 1, 1] = 0.5 * Z2
    H[..., 0, 1] = 0.5 * (hX + 1j * hY)
    H[..., 1, 0] = 0.5 * (hX - 1j * hY)
    return H


def coefficient_function(p: PhysicalParams, ansatz: PulseAnsatz, counterdiabatic: bool = True):
    """Closed-form ``t -> (hx, hy, hz)`` for H0 (+ H1)."""

    def coeffs(t):
        Y, Z, dY, dZ, *_ = _couplings_raw(p, ansatz.pulses(t))
        if counterdiabatic:
            X = (dY * Z - Y * dZ) / (Y * Y + Z * Z)
        else:
            X = np.zeros_like(Y)
        return X, Y, Z

    return coeffs


def hamiltonian_trace(p: PhysicalParams, ansatz: PulseAnsatz, grid=None, counterdiabatic: bool = True):
    from .propagator import HamiltonianTrace

    t = make_grid(ansatz.t_f, grid)
    func = coefficient_function(p, ansatz, counterdiabatic)
    hx, hy, hz = func(t)
    return HamiltonianTrace(t=t, hx=hx, hy=hy, hz=hz, func=func)


def drive_columns(trace: DriveTrace, fields: FieldTrace) -> dict:
    """Columns of the drive/field CSV."""
    X = trace.X if trace.X is not None else np.zeros_like(trace.t)
    return {
        "t_ns": trace.t,
        "u1_meV": trace.u1,
        "u2_meV": trace.u2,
        "X_radns": X,
        "Y_radns": trace.Y,
        "Z_radns": trace.Z,
        "theta_rad": trace.theta,
        "eta": trace.eta,
        "Ex1_Vpm": fields.Ex1,
        "Ex2_Vpm": fields.Ex2,
        "EyD_Vpm": fields.EyD,
    }
