"""Compactly supported primitive by the averaged Bogovskii operator on the unit disk."""

import numpy as np

from starforms import Ball, BogovskiiConfig, PolyForm, apply_bogovskii, build_bump
from starforms.polyform import bump_cut_form

disk = Ball([0.0, 0.0], 1.0, ball=([0.0, 0.0], 0.3))
cfg = BogovskiiConfig(build_bump([0.0, 0.0], 0.3), 1, disk)

# u = d(beta p) is exact and supported in the ball of radius 0.3 about c
c, r = np.array([0.45, 0.1]), 0.3
u = bump_cut_form(PolyForm.random(2, 0, 2, np.random.default_rng(3)), c, r).d()

inside = np.array([[0.45, 0.1], [0.3, 0.0]])
outside = np.array([[-0.5, 0.6], [0.1, -0.8]])
print("B u near the support of u:", apply_bogovskii(cfg, u, inside).ravel())
print("B u away from the hull of the ball and the support:", apply_bogovskii(cfg, u, outside).ravel())

# dB u = u, checked by central differences of the scalar output
h = 1e-4
x = np.array([[0.5, 0.15]])
grad = np.array([(apply_bogovskii(cfg, u, x + h * e) - apply_bogovskii(cfg, u, x - h * e))[0, 0] / (2 * h)
                 for e in np.eye(2)])
print("d(B u) at", x[0], "=", grad, " u =", u(x)[0])
