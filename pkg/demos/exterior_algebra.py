"""Wedge, Hodge star and contraction on constant-coefficient forms in R^3."""

import numpy as np

from starforms import FormValue, contract, hodge_star, wedge

dx1 = FormValue(3, 1, np.array([1.0, 0.0, 0.0]))
dx2 = FormValue(3, 1, np.array([0.0, 1.0, 0.0]))

area = wedge(dx1, dx2)
print("dx1 ^ dx2 has coefficients", area.coeffs, "on the basis (1,2), (1,3), (2,3)")
print("dx2 ^ dx1 =", wedge(dx2, dx1).coeffs, "(anticommutes)")
print("*(dx1 ^ dx2) =", hodge_star(area).coeffs, "which is dx3")
print("contracting e1 into dx1 ^ dx2 gives", contract([1.0, 0.0, 0.0], area).coeffs, "which is dx2")

rng = np.random.default_rng(0)
a = FormValue(3, 2, rng.normal(size=3))
print("** a = a for 2-forms in R^3:", np.allclose(hodge_star(hodge_star(a)).coeffs, a.coeffs))
