"""Physical constants and default material parameters.

CODATA values are rounded to 6 significant figures. Frequencies are ordinary
(MHz), fields in mT, times in microseconds unless a name says otherwise.
"""

PLANCK = 6.62607e-34  # J s
BOLTZMANN = 1.38065e-23  # J / K
AVOGADRO = 6.02214e23  # 1 / mol

# h / k_B expressed for frequencies in MHz: E/kT = H_OVER_K_MHZ * f / T
H_OVER_K_MHZ = PLANCK * 1e6 / BOLTZMANN

GAMMA_NV = 28.032  # MHz / mT (2.8032 MHz/G)
GAMMA_13C = 10.705  # MHz / T
GAMMA_1H = 42.576  # MHz / T
GAMMA_14N = 3.077  # MHz / T

D_NV = 2869.0  # MHz, fitted zero-field splitting of the powders
DD_DT = -0.074  # MHz / K, temperature coefficient of D

DIAMOND_ATOM_DENSITY = 1.76e23  # cm^-3

# 14N hyperfine and quadrupole constants for NV- (Felton et al. 2009), MHz
N14_A_PAR = -2.14
N14_A_PERP = -2.70
N14_QUADRUPOLE = -4.95

# Working point of the hyperpolarization experiment
NU_XBAND = 9600.0  # MHz
B_POLARIZATION = 287.0  # mT
