"""Star-shaped domains with an inscribed ball: containment, ray exits, ratios, quadrature."""

import numpy as np

from starforms import Ball, Cigar, Ellipsoid, RadialStar2D
from starforms.geometry import Crescent, ray_exit, verify_star_shape

domains = {
    "disk": Ball([0.0, 0.0], 1.0),
    "ellipse": Ellipsoid([0.0, 0.0], [2.0, 0.5]),
    "cigar": Cigar([-1.0, 0.0], [1.0, 0.0], 0.5),
    "flower": RadialStar2D([0.0, 0.0], 1.0, cos_coeffs=[0.0, 0.0, 0.0, 0.0, 0.2], ball=([0.0, 0.0], 0.5)),
}
for name, dom in domains.items():
    s = dom.stats()
    X, W = dom.quadrature_nodes(6)
    print(f"{name:8s} diameter/ball {s.ratio_diam:6.3f}  volume/ball {s.ratio_vol:6.3f}  "
          f"quadrature volume {W.sum():.4f} vs {dom.volume():.4f}")

disk = domains["disk"]
print("a ray from the center through (0.5, 0) leaves the disk at parameter", ray_exit(disk, [0.0, 0.0], [0.5, 0.0]))

crescent = Crescent([0, 0], 1.0, [0.45, 0], 0.75, ball=([-0.8, 0], 0.1))
check = verify_star_shape(crescent, 2000, 0)
print("crescent is star-shaped w.r.t. its ball:", check.ok, "witness segment", check.witness)
