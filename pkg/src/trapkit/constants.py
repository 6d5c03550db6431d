"""Physical constants and ion species definitions.

All quantities are SI unless a name says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import atomic_mass as AMU
from scipy.constants import e as ELEMENTARY_CHARGE
from scipy.constants import epsilon_0 as EPSILON_0
from scipy.constants import hbar as HBAR
from scipy.constants import k as K_BOLTZMANN

#: Coulomb prefactor e^2 / (4 pi eps0), J*m
COULOMB_E2 = ELEMENTARY_CHARGE**2 / (4.0 * np.pi * EPSILON_0)


@dataclass(frozen=True)
class IonSpecies:
    """A trapped ion: mass in kg, charge in coulomb.

    The charge is signed and must be a (nonzero) multiple of the
    elementary charge for a physical ion; this is not enforced beyond
    charge != 0 so that test scenarios can use scaled charges.
    """

    mass: float
    charge: float = ELEMENTARY_CHARGE

    def __post_init__(self):
        if not np.isfinite(self.mass) or self.mass <= 0.0:
            raise ValueError(f"ion mass must be positive and finite, got {self.mass}")
        if not np.isfinite(self.charge) or self.charge == 0.0:
            raise ValueError(f"ion charge must be nonzero and finite, got {self.charge}")

    @property
    def charge_number(self) -> float:
        """Charge in units of the elementary charge."""
        return self.charge / ELEMENTARY_CHARGE

    @classmethod
    def yb171(cls) -> "IonSpecies":
        """Singly ionized ytterbium-171."""
        return cls(mass=170.936323 * AMU)

    @classmethod
    def yb172(cls) -> "IonSpecies":
        """Singly ionized ytterbium-172."""
        return cls(mass=171.936386 * AMU)


YB171 = IonSpecies.yb171()
YB172 = IonSpecies.yb172()
