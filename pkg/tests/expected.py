"""Frozen reference values (computed once, independently of the code under test)."""

import math

E = math.e
TORSION_CENTRE = 0.07367135328  # double sine series, converged to 11 digits
TORSION_BAND = (0.0730, 0.0742)
NARROW_GAMMA0_K1 = 1.0 / math.sqrt(math.e)  # 0.6065306597126334
PL_ROOT_RHO1_GAMMA0_BETA1 = math.sqrt(8.0)
PL_ROOT_RHO1_GAMMA1_BETA1 = 1.0 + math.sqrt(11.0)
PL_ROOT_RHO1_GAMMA0_BETA11 = math.sqrt(9.24)
