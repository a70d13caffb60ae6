"""Numerical tolerances shared across the package.

Energy balances are checked much tighter than money comparisons: balance
residuals come from sums of a handful of floats, while money values pass
through price * quantity products and longer accumulations.
"""

# energy balance residuals (MWh)
BAL_TOL = 1e-9

# money comparisons: profits, dual values, uplifts ($)
MONEY_TOL = 1e-6

# exact-match tolerance for schedule comparison (per-period sup norm)
X_EPS = 1e-9

# bonus-scaling scan: hard cap and bisection resolution
NU_CAP = 64.0
NU_TOL = 1e-6
