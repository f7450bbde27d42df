"""Physical constants, device parameters and the internal unit system.

Everything downstream works in meV, ns, rad/ns and V/m.  The reduced drive
energies ``u_j`` and ``v`` replace the Gaussian-unit vector potentials, so the
only place where laboratory fields enter is through the two conversion
constants ``c_beta`` and ``c_alpha`` computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from scipy.constants import physical_constants

# CODATA values converted to internal units
HBAR = physical_constants["reduced Planck constant in eV s"][0] * 1e3 * 1e9  # meV ns
MU_B = physical_constants["Bohr magneton in eV/T"][0] * 1e3  # meV / T

# 1 meV.cm / (meV.ns) = 1e-2 m / 1e-9 s; times e * (1 V/m) -> eV/s -> meV/ns
_CM_PER_NS_TO_M_PER_S = 1e-2 / 1e-9
_EV_PER_S_TO_MEV_PER_NS = 1e3 * 1e-9

DEFAULT_VALIDITY_THRESHOLD = 0.2


class ParameterError(ValueError):
    """Raised for physically inadmissible device parameters or config files."""


@dataclass(frozen=True)
class PhysicalParams:
    """Device parameters in laboratory units.

    g is the Lande factor, B the field in tesla, J the singlet-triplet gap in
    meV, hbar_alpha / hbar_beta the Rashba / Dresselhaus strengths in meV.cm
    and t_f the protocol duration in ns.
    """

    g: float = -0.44
    B: float = 3.43
    J: float = 0.1
    hbar_alpha: float = 1.2e-6
    hbar_beta: float = 0.3e-6
    t_f: float = 2.0
    allow_positive_g: bool = False

    def __post_init__(self):
        for name in ("J", "t_f", "hbar_alpha", "hbar_beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value!r}")
        if not math.isfinite(self.B) or not math.isfinite(self.g):
            raise ParameterError("g and B must be finite")
        if self.g >= 0 and not self.allow_positive_g:
            raise ParameterError(
                f"g = {self.g} is not negative; pass allow_positive_g=True to override"
            )

    @property
    def delta(self) -> float:
        return zeeman_splitting(self)

    @property
    def so_ratio(self) -> float:
        """r = sqrt(2) alpha / beta, the lever arm of u1 - u2 on Y."""
        return math.sqrt(2.0) * self.hbar_alpha / self.hbar_beta

    @property
    def units(self) -> "UnitSystem":
        return field_conversion_constants(self)

    def with_tf(self, t_f: float) -> "PhysicalParams":
        from dataclasses import replace

        return replace(self, t_f=t_f)


@dataclass(frozen=True)
class UnitSystem:
    hbar: float  # meV ns
    mu_B: float  # meV / T
    c_beta: float  # meV per (V/m ns)
    c_alpha: float  # meV per (V/m ns)

    def field_from_rate(self, rate, channel: str = "beta"):
        """Lab field (V/m) for a drive-energy rate (meV/ns), E = -rate / c."""
        return -rate / self._c(channel)

    def rate_from_field(self, field, channel: str = "beta"):
        return -field * self._c(channel)

    def _c(self, channel):
        if channel == "beta":
            return self.c_beta
        if channel == "alpha":
            return self.c_alpha
        raise ValueError(f"unknown channel {channel!r}")


def zeeman_splitting(p: PhysicalParams) -> float:
    """Signed Zeeman energy g mu_B B in meV."""
    return p.g * MU_B * p.B


def reduction_validity(p: PhysicalParams, threshold: float = DEFAULT_VALIDITY_THRESHOLD):
    """Return ``(ratio, valid)`` with ratio = |J + Delta| / J.

    The two-level reduction onto the singlet and the lowest triplet needs the
    ratio to be small; ``valid`` is ``ratio < threshold``.
    """
    if not p.J > 0:
        raise ParameterError("J must be positive")
    ratio = abs(p.J + zeeman_splitting(p)) / p.J
    return ratio, ratio < threshold


def spin_orbit_velocity(hbar_strength: float) -> float:
    """Spin-orbit velocity (m/s) from a strength hbar*alpha given in meV.cm."""
    return hbar_strength / HBAR * _CM_PER_NS_TO_M_PER_S


def field_conversion_constants(p: PhysicalParams) -> UnitSystem:
    """Constants turning lab fields into drive-energy rates.

    A field of 1 V/m held for 1 ns shifts u_j by ``c_beta`` meV and v by
    ``c_alpha`` meV.
    """
    if not (p.hbar_alpha > 0 and p.hbar_beta > 0):
        raise ParameterError("spin-orbit strengths must be positive")
    # e * velocity * (1 V/m) is velocity in eV/s
    c_beta = spin_orbit_velocity(p.hbar_beta) * _EV_PER_S_TO_MEV_PER_NS
    c_alpha = math.sqrt(2.0) * spin_orbit_velocity(p.hbar_alpha) * _EV_PER_S_TO_MEV_PER_NS
    return UnitSystem(hbar=HBAR, mu_B=MU_B, c_beta=c_beta, c_alpha=c_alpha)


# config file keys -> PhysicalParams fields
CONFIG_KEYS = {
    "g": "g",
    "B_tesla": "B",
    "J_meV": "J",
    "hbar_alpha_meVcm": "hbar_alpha",
    "hbar_beta_meVcm": "hbar_beta",
    "tf_ns": "t_f",
}


def parse_config(text: str, extra_keys=(), source: str = "<config>"):
    """Parse ``key = value`` lines.

    Returns ``(params, extras)`` where extras holds the raw string values of
    any key listed in ``extra_keys``.  Blank lines and ``#`` comments are
    skipped; unknown or repeated keys raise :class:`ParameterError`.
    """
    fields = {}
    extras = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ParameterError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in CONFIG_KEYS:
            try:
                fields[CONFIG_KEYS[key]] = float(value)
            except ValueError:
                raise ParameterError(f"{source}:{lineno}: {key} is not a number: {value!r}") from None
        elif key in extra_keys:
            extras[key] = value
        else:
            raise ParameterError(f"{source}:{lineno}: unknown key {key!r}")
    return PhysicalParams(**fields), extras


def load_config(path, extra_keys=()):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), extra_keys, source=str(path))
