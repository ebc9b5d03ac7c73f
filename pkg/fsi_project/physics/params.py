"""
Physical coefficients of the coupled model and the phase-dependent
viscosity / permeability functions.
"""

from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.errors import ConfigurationError

PROFILES = ("smoothstep", "linear", "constant")

# Range of phase values on which coefficient bounds are checked.
CHECK_RANGE = (-0.5, 1.5)


def smoothstep(x: np.ndarray) -> np.ndarray:
    return x * x * (3.0 - 2.0 * x)


def _profile(kind: str, phi: np.ndarray, lo: float, hi: float) -> np.ndarray:
    s = np.clip(phi, 0.0, 1.0)
    if kind == "smoothstep":
        return lo + (hi - lo) * smoothstep(s)
    if kind == "linear":
        return lo + (hi - lo) * s
    return np.full_like(s, lo, dtype=np.float64)


def _profile_prime(kind: str, phi: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """d/dphi of ``_profile``; 0 where the clamp is active."""
    phi = np.asarray(phi, dtype=np.float64)
    inside = (phi > 0.0) & (phi < 1.0)
    if kind == "smoothstep":
        slope = 6.0 * phi * (1.0 - phi) * (hi - lo)
    elif kind == "linear":
        slope = np.full_like(phi, hi - lo)
    else:
        slope = np.zeros_like(phi)
    return np.where(inside, slope, 0.0)


@dataclass(frozen=True)
class ModelParams:
    """
    Coefficients of the governing system.

    ``eta_range`` / ``kappa_range`` give (value at phi=0, value at phi=1) of the
    viscosity and permeability profiles; both must lie inside [alpha, beta].
    ``stabilization`` defaults to 1/(2 h^2), the maximum of f'' on [0, 1].
    """
    rho: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    tau: float = 1.0
    lam_e: float = 1.0
    h: float = 0.05
    alpha: float = 0.1
    beta: float = 10.0
    eta_profile: str = "smoothstep"
    eta_range: Tuple[float, float] = (1.0, 1.0)
    kappa_profile: str = "smoothstep"
    kappa_range: Tuple[float, float] = (1.0, 1.0)
    stabilization: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "eta_range", tuple(float(v) for v in self.eta_range))
        object.__setattr__(self, "kappa_range", tuple(float(v) for v in self.kappa_range))
        if self.stabilization is None:
            object.__setattr__(self, "stabilization", 1.0 / (2.0 * self.h ** 2) if self.h > 0 else 0.0)
        problems = self.validate()
        if problems:
            raise ConfigurationError("invalid model parameters: " + "; ".join(problems))

    def validate(self) -> List[str]:
        problems = []
        for name in ("rho", "lam", "gamma", "tau", "h", "alpha", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                problems.append(f"{name} must be positive, got {value}")
        # lam_e = 0 switches the elastic coupling off
        if not np.isfinite(self.lam_e) or self.lam_e < 0:
            problems.append(f"lam_e must be non-negative, got {self.lam_e}")
        if problems:
            return problems
        if self.alpha > self.beta:
            problems.append(f"alpha ({self.alpha}) must not exceed beta ({self.beta})")
        for name, kind, rng in (("eta", self.eta_profile, self.eta_range),
                                ("kappa", self.kappa_profile, self.kappa_range)):
            if kind not in PROFILES:
                problems.append(f"{name}_profile must be one of {PROFILES}, got '{kind}'")
                continue
            if len(rng) != 2:
                problems.append(f"{name}_range must have two entries")
                continue
            samples = np.linspace(*CHECK_RANGE, 201)
            values = _profile(kind, samples, *rng)
            if values.min() < self.alpha or values.max() > self.beta:
                problems.append(
                    f"{name} leaves [alpha, beta] = [{self.alpha}, {self.beta}] "
                    f"(range {values.min():.4g}..{values.max():.4g})")
        s_min = 1.0 / (4.0 * self.h ** 2)
        if self.stabilization < s_min * (1.0 - 1e-12):
            problems.append(f"stabilization must be >= max f''/2 = {s_min:.6g}, got {self.stabilization}")
        return problems

    @property
    def model_h(self) -> bool:
        """True when the elastic coupling is switched off (classical CH-NS)."""
        return self.lam_e == 0.0

    def eta(self, phi: np.ndarray) -> np.ndarray:
        return _profile(self.eta_profile, np.asarray(phi, dtype=np.float64), *self.eta_range)

    def kappa(self, phi: np.ndarray) -> np.ndarray:
        return _profile(self.kappa_profile, np.asarray(phi, dtype=np.float64), *self.kappa_range)

    def eta_prime(self, phi: np.ndarray) -> np.ndarray:
        return _profile_prime(self.eta_profile, phi, *self.eta_range)

    def as_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["eta_range"] = list(self.eta_range)
        data["kappa_range"] = list(self.kappa_range)
        return data
