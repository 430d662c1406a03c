"""
Simulator and verification lab for the coupled squeeze film model.

Gas pressure u follows a quasilinear Reynolds equation, the membrane gap w a
semilinear wave equation driven by electrostatic attraction and pressure.
"""
from .const import DOMAIN

__all__ = ["DOMAIN"]
