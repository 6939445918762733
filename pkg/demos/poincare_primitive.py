"""Primitive of a closed polynomial form by the averaged Poincare operator."""

import numpy as np

from starforms import PoincareConfig, apply_poincare_poly, apply_poincare_quad, build_bump, random_closed_form

cfg = PoincareConfig(build_bump([0.1, 0.0], 0.8), 1)
u = random_closed_form(2, 1, 3, seed=1)
v = apply_poincare_poly(cfg, u)
x0 = np.array([0.3, -0.2])
print("u at", x0, "=", u.evaluate(x0).coeffs, "; v = P u there =", v.evaluate(x0).coeffs)
print("max |dv - u| over coefficients:", v.d().max_abs_diff(u))

X = np.random.default_rng(0).uniform(-1, 1, (4, 2))
print("exact path vs quadrature path at 4 points:", np.max(np.abs(v(X) - apply_poincare_quad(cfg, u, X))))

# a 2-form in R^3: P maps closed 2-forms to 1-forms whose d recovers the input
u3 = random_closed_form(3, 2, 2, seed=2)
v3 = apply_poincare_poly(PoincareConfig(build_bump([0.0, 0.0, 0.0], 1.0), 2), u3)
print("n=3, degree 2: max |dv - u| =", v3.d().max_abs_diff(u3))
