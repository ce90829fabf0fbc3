"""Lower bounds of the bilinear phases over their frequency regions.

Each scan samples the region log-uniformly and reports the smallest ratio
of the phase to its claimed lower bound.
"""

from gpscatter.analysis import SCAN_PAIRS, phase_lower_bound_scan, phi_plus_time_bound_scan


def main(n_samples=100_000):
    print(f"{'phase':>8} {'region':>7} {'min ratio':>10} {'in region':>10}")
    for kind, region in SCAN_PAIRS:
        r = phase_lower_bound_scan(kind, region, n_samples=n_samples, delta=0.05, seed=0)
        print(f"{kind.value:>8} {region.value:>7} {r['min_ratio']:>10.4f} {r['n_in_region']:>10d}")
    t = phi_plus_time_bound_scan(n_samples=n_samples, delta=0.05, seed=0)
    print(f"Phi+ time bound on DX: case 1 {t['case1']:.3f}, case 2 {t['case2']:.3f} (small factor {t['small_factor']:g})")


if __name__ == "__main__":
    main()
