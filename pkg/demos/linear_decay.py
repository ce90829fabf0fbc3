"""Dispersive decay of the linear flow exp(-itH) phi in 2D and 3D.

Fits log ||exp(-itH) phi||_{L^q} against log t and compares with the
expected exponents -d/2 (q = inf) and 0 (q = 2).
"""

import numpy as np

from gpscatter.analysis import expected_decay_exponent, linear_decay_experiment
from gpscatter.spectral import make_grid
from gpscatter.verification import gaussian_datum


def main():
    cases = [(2, 128, 128.0, np.geomspace(5.0, 30.0, 16)), (3, 48, 48.0, np.geomspace(3.0, 10.0, 12))]
    print(f"{'dim':>3} {'q':>4} {'fitted':>8} {'expected':>9} {'r^2':>7}")
    for dim, n, L, times in cases:
        phi = gaussian_datum(make_grid(dim, n, L), 1.5, 1.5 if dim == 2 else 1.0)
        for q in (np.inf, 2):
            fit = linear_decay_experiment(phi, q, times)
            print(f"{dim:>3} {q:>4} {fit.exponent:>8.3f} {expected_decay_exponent(dim, q):>9.3f} {fit.r_squared:>7.4f}")


if __name__ == "__main__":
    main()
