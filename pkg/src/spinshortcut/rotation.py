"""z-axis picture change that removes the sigma_x drive.

Writing the off-diagonal as X + iY = Q exp(i phi), the diagonal unitary
U = diag(exp(i(phi - pi/2)/2), exp(-i(phi - pi/2)/2)) maps H onto

    H' = (hbar/2) [[Z + dphi, iQ], [-iQ, -Z - dphi]],

which has the same shape as H0 and can therefore be produced by x fields
alone.  Populations are unchanged at every time because U is diagonal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .drive import (
    DriveTrace,
    PulseAnsatz,
    _couplings_raw,
    build_drive,
    make_grid,
    theta_derivatives,
    unwrap_angle,
    with_counterdiabatic,
)
from .params import HBAR, PhysicalParams, zeeman_splitting

Q_FLOOR = 1e-9  # rad/ns


class RemovableSingularityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PolarData:
    Q: np.ndarray
    dQ: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    singular: np.ndarray  # bool mask of patched samples


@dataclass(frozen=True)
class RotatedDrive:
    t: np.ndarray
    Q: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    Zeff: np.ndarray
    dQ: np.ndarray
    dZeff: np.ndarray
    u1n: Optional[np.ndarray] = None
    u2n: Optional[np.ndarray] = None
    du1n: Optional[np.ndarray] = None
    du2n: Optional[np.ndarray] = None
    Ex1n: Optional[np.ndarray] = None
    Ex2n: Optional[np.ndarray] = None
    singular: Optional[np.ndarray] = None

    def matrix(self) -> np.ndarray:
        """H'/hbar in rad/ns, shape (n, 2, 2)."""
        H = np.empty(self.t.shape + (2, 2), dtype=complex)
        H[:, 0, 0] = 0.5 * self.Zeff
        H[:, 1, 1] = -0.5 * self.Zeff
        H[:, 0, 1] = 0.5j * self.Q
        H[:, 1, 0] = -0.5j * self.Q
        return H

    @property
    def max_Exn(self) -> float:
        return float(max(np.max(np.abs(self.Ex1n)), np.max(np.abs(self.Ex2n))))

    def columns(self) -> dict:
        return {
            "t_ns": self.t,
            "Q_radns": self.Q,
            "phi_rad": self.phi,
            "dphi_radns": self.dphi,
            "Zeff_radns": self.Zeff,
            "u1n_meV": self.u1n,
            "u2n_meV": self.u2n,
            "Ex1n_Vpm": self.Ex1n,
            "Ex2n_Vpm": self.Ex2n,
        }


def _polar_closed_form(X, dX, ddX, Y, dY, ddY):
    Q2 = X * X + Y * Y
    Q = np.sqrt(Q2)
    safe = np.where(Q2 > 0, Q2, 1.0)
    P = X * dX + Y * dY  # Q dQ
    M = dY * X - Y * dX  # Q^2 dphi
    dM = ddY * X - Y * ddX
    dQ = np.where(Q2 > 0, P / np.sqrt(safe), 0.0)
    dphi = M / safe
    ddphi = dM / safe - 2.0 * M * P / safe**2
    return Q, dQ, dphi, ddphi


def polar_offdiagonal(trace: DriveTrace, q_floor: float = Q_FLOOR) -> PolarData:
    """Q = |X + iY|, phi = arg(X + iY) (unwrapped) and phi', phi''.

    Interior samples with Q below ``q_floor`` are patched by linear
    interpolation from their neighbours with a warning; end samples take the
    nearest regular value.
    """
    if trace.X is None:
        trace = with_counterdiabatic(trace)
    X, dX, ddX = trace.X, trace.dX, trace.ddX
    Q, dQ, dphi, ddphi = _polar_closed_form(X, dX, ddX, trace.Y, trace.dY, trace.ddY)
    singular = Q < q_floor
    phi_raw = np.arctan2(trace.Y, X)
    if singular.any():
        ok = ~singular
        if not ok.any():
            raise ValueError("off-diagonal vanishes on the whole grid")
        interior = singular.copy()
        interior[[0, -1]] = False
        if interior.any():
            warnings.warn(
                f"Q < {q_floor:g} rad/ns at {int(interior.sum())} interior sample(s); "
                "phi and its derivatives interpolated",
                RemovableSingularityWarning,
                stacklevel=2,
            )
        t = trace.t
        phi_ok = np.unwrap(phi_raw[ok])
        phi = np.interp(t, t[ok], phi_ok)
        dphi = np.where(ok, dphi, np.interp(t, t[ok], dphi[ok]))
        ddphi = np.where(ok, ddphi, np.interp(t, t[ok], ddphi[ok]))
        dQ = np.where(ok, dQ, np.interp(t, t[ok], dQ[ok]))
    else:
        phi = unwrap_angle(phi_raw, trace.t, "phi")
    return PolarData(Q=Q, dQ=dQ, phi=phi, dphi=dphi, ddphi=ddphi, singular=singular)


def rotated_hamiltonian(trace: DriveTrace, polar: PolarData) -> RotatedDrive:
    """Diagonal Z + phi', off-diagonal iQ."""
    return RotatedDrive(
        t=trace.t,
        Q=polar.Q,
        phi=polar.phi,
        dphi=polar.dphi,
        Zeff=trace.Z + polar.dphi,
        dQ=polar.dQ,
        dZeff=trace.dZ + polar.ddphi,
        singular=polar.singular,
    )


def invert_to_x_drives(p: PhysicalParams, rotated: RotatedDrive) -> RotatedDrive:
    """Solve hbar Zeff = -J - Delta + (u1n + u2n) and hbar Q = -r (u1n - u2n),
    then convert the new drive rates to x fields."""
    r = p.so_ratio
    total = HBAR * rotated.Zeff + p.J + zeeman_splitting(p)
    diff = -HBAR * rotated.Q / r
    dtotal = HBAR * rotated.dZeff
    ddiff = -HBAR * rotated.dQ / r
    u1n = 0.5 * (total + diff)
    u2n = 0.5 * (total - diff)
    du1n = 0.5 * (dtotal + ddiff)
    du2n = 0.5 * (dtotal - ddiff)
    units = p.units
    return replace(
        rotated,
        u1n=u1n,
        u2n=u2n,
        du1n=du1n,
        du2n=du2n,
        Ex1n=units.field_from_rate(du1n, "beta"),
        Ex2n=units.field_from_rate(du2n, "beta"),
    )


def build_rotated(p: PhysicalParams, ansatz: PulseAnsatz, grid=None, trace: DriveTrace = None) -> RotatedDrive:
    if trace is None:
        trace = build_drive(p, ansatz, grid)
    return invert_to_x_drives(p, rotated_hamiltonian(trace, polar_offdiagonal(trace)))


def picture_unitary(phi) -> np.ndarray:
    """U(t) = diag(exp(i beta), exp(-i beta)) with beta = (phi - pi/2)/2."""
    beta = 0.5 * (np.asarray(phi, dtype=float) - np.pi / 2)
    U = np.zeros(beta.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = np.exp(1j * beta)
    U[..., 1, 1] = np.exp(-1j * beta)
    return U


def endpoint_mismatch(trace: DriveTrace, rotated: RotatedDrive):
    """Frobenius norm ||H' - H||/hbar (rad/ns) at t = 0 and t = t_f."""
    X = trace.X if trace.X is not None else np.zeros_like(trace.t)
    out = []
    for i in (0, -1):
        H = np.array([[trace.Z[i], X[i] + 1j * trace.Y[i]], [X[i] - 1j * trace.Y[i], -trace.Z[i]]])
        Hn = np.array([[rotated.Zeff[i], 1j * rotated.Q[i]], [-1j * rotated.Q[i], -rotated.Zeff[i]]])
        out.append(0.5 * float(np.linalg.norm(Hn - H)))
    return tuple(out)


def rotated_coefficient_function(p: PhysicalParams, ansatz: PulseAnsatz, q_floor: float = Q_FLOOR):
    """Closed-form ``t -> (0, Q, Z + phi')`` for propagating H'."""

    def coeffs(t):
        Y, Z, dY, dZ, ddY, ddZ, dddY, dddZ = _couplings_raw(p, ansatz.pulses(t))
        X, dX, ddX = theta_derivatives(Y, Z, dY, dZ, ddY, ddZ, dddY, dddZ)
        Q, _, dphi, _ = _polar_closed_form(X, dX, ddX, Y, dY, ddY)
        dphi = np.where(Q < q_floor, 0.0, dphi)
        return np.zeros_like(Q), Q, Z + dphi

    return coeffs


def rotated_hamiltonian_trace(p: PhysicalParams, ansatz: PulseAnsatz, grid=None):
    from .propagator import HamiltonianTrace

    t = make_grid(ansatz.t_f, grid)
    func = rotated_coefficient_function(p, ansatz)
    hx, hy, hz = func(t)
    return HamiltonianTrace(t=t, hx=hx, hy=hy, hz=hz, func=func)
