"""Unit bookkeeping for the eV / Angstrom / ps / amu system."""

# 1 eV/(Angstrom amu) expressed in Angstrom/ps^2
ACCEL = 9648.533212
# amu Angstrom^2/ps^2 expressed in eV
KINETIC = 1.0 / ACCEL
# 1 eV/Angstrom^3 in GPa
EV_A3_TO_GPA = 160.21766208
# Boltzmann constant, eV/K
KB = 8.617333262e-5
# 1/s expressed in 1/ps
PER_SECOND = 1e-12

MASS = {"Fe": 55.845, "C": 12.011}
