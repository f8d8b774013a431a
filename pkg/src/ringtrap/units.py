"""Physical constants and the single wavenumber -> angular-frequency conversion.

Energies and frequencies are carried in cm^-1 everywhere, times in ps and
rates in ps^-1.  Energies enter the equations of motion only through
:func:`cm_to_rad_ps`.
"""

import math

#: speed of light in cm/ps
SPEED_OF_LIGHT = 2.99792458e-2
#: Boltzmann constant in cm^-1/K
K_BOLTZMANN = 0.69503480
#: 1 cm^-1 expressed as an angular frequency in rad/ps
CM_TO_RAD_PS = 2.0 * math.pi * SPEED_OF_LIGHT


def cm_to_rad_ps(value):
    """Convert an energy in cm^-1 to an angular frequency in rad/ps."""
    return value * CM_TO_RAD_PS
