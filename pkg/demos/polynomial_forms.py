"""Polynomial differential forms: exterior derivative, closedness and text round trip."""

import numpy as np

from starforms import MultiPoly, PolyForm, random_closed_form

x, y = MultiPoly.variable(2, 0), MultiPoly.variable(2, 1)
f = PolyForm.scalar(x * x * y)
df = f.d()
print("f = x^2 y; df in text form (degree; index; exponent; coefficient):")
print(df.to_text())
print("d(df) vanishes:", df.d().is_zero())

u = random_closed_form(2, 1, 3, seed=7)
print("a random closed 1-form of degree 3 is closed:", u.d().max_abs_coeff())

text = u.to_text()
back = PolyForm.from_text(text, 2)
print("text round trip is exact:", back == u)
print("u at (0.2, -0.4):", u.evaluate(np.array([0.2, -0.4])).coeffs)
