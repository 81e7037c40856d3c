"""Constants shared by the numpy and numba kernels.

Rational-approximation coefficients are W. J. Cody's (Math. Comp. 1969,
CALERF in SPECFUN) for erf/erfc/erfcx in double precision.
"""
import math

import numpy as np

CODY_A = np.array([3.16112374387056560e00, 1.13864154151050156e02,
                   3.77485237685302021e02, 3.20937758913846947e03,
                   1.85777706184603153e-1])
CODY_B = np.array([2.36012909523441209e01, 2.44024637934444173e02,
                   1.28261652607737228e03, 2.84423683343917062e03])
CODY_C = np.array([5.64188496988670089e-1, 8.88314979438837594e00,
                   6.61191906371416295e01, 2.98635138197400131e02,
                   8.81952221241769090e02, 1.71204761263407058e03,
                   2.05107837782607147e03, 1.23033935479799725e03,
                   2.15311535474403846e-8])
CODY_D = np.array([1.57449261107098347e01, 1.17693950891312499e02,
                   5.37181101862009858e02, 1.62138957456669019e03,
                   3.29079923573345963e03, 4.36261909014324716e03,
                   3.43936767414372164e03, 1.23033935480374942e03])
CODY_P = np.array([3.05326634961232344e-1, 3.60344899949804439e-1,
                   1.25781726111229246e-1, 1.60837851487422766e-2,
                   6.58749161529837803e-4, 1.63153871373020978e-2])
CODY_Q = np.array([2.56852019228982242e00, 1.87295284992346725e00,
                   5.27905102951428412e-1, 6.05183413124413191e-2,
                   2.33520497626869185e-3])

INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
SQRT2 = math.sqrt(2.0)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG2 = math.log(2.0)

# exp(t^2) overflows below this
ERFCX_NEG_LIMIT = -26.628
# above this the log-erfcx slope switches to its asymptotic series
ASYMPTOTIC_U = 100.0

# rows of the array returned by emg_terms
NLN, NLE = 0, 1
N_MU, N_MUMU, N_S, N_SS = 2, 3, 4, 5
E_MU, E_MUMU, E_S, E_SS, E_L, E_LL = 6, 7, 8, 9, 10, 11
N_ROWS = 12
