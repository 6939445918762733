"""A smooth bump supported in a ball: unit mass, vanishing odd moments, scaling."""

from starforms import build_bump, c_phi_constant

mol = build_bump([0.0, 0.0], 0.5, moment_degree=4)
print("mass:", mol.moment((0, 0)))
print("odd moments about the center vanish:", mol.moment((1, 0)), mol.moment((0, 3)), mol.moment((1, 1)))
print("second moments are equal by symmetry:", mol.moment((2, 0)), mol.moment((0, 2)))

shifted = build_bump([0.3, -0.1], 0.5)
print("moments are raw, so a shifted bump has first moments equal to its center:", shifted.moment((1, 0)), shifted.moment((0, 1)))
for r in (1.0, 0.5, 0.25):
    print(f"radius {r}, second moment {build_bump([0.0, 0.0], r).moment((2, 0)):.6e}")
print("the derivative constant for the unit disk:", c_phi_constant(build_bump([0.0, 0.0], 1.0)))
