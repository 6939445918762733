"""Shape-dependent constants: kappa, the calibrated H^1 bound and its growth on elongated domains."""

from starforms import bound_sweep, cigar_family, h1_bound, kappa
from starforms.constants import poincare_branch

for n in range(2, 7):
    print(f"n={n}: Poincare branch per degree", [poincare_branch(n, l) for l in range(1, n + 1)])

family = cigar_family((1, 2, 4))
for dom in family:
    s = dom.stats()
    print(f"cigar R/rho={s.ratio_diam:.0f}: kappa {kappa('poincare', 2, 1, s, floor=True):.3f}, "
          f"unscaled bound {h1_bound('poincare', 2, 1, s, kappa_floor=True):.3f}")

reports = bound_sweep("poincare", family, 2, ensemble_size=4)
for r in reports:
    print(f"R/rho={r.stats.ratio_diam:.0f}: empirical ratio {r.empirical_ratio:.3f} <= bound {r.bound_value:.3f}")
