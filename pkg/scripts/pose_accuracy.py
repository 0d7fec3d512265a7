"""Registration error of direct query/candidate pairs under random SE(3) offsets."""
import argparse

import numpy as np

from treeloc.experiments import pose_accuracy

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-shift", type=float, default=5.0)
    ap.add_argument("--max-tilt", type=float, default=15.0, help="degrees")
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--base-noise", type=float, default=0.01)
    ap.add_argument("--dropout", type=float, default=0.1)
    a = ap.parse_args()
    r = pose_accuracy(a.pairs, a.seed, a.max_shift, a.max_tilt, a.noise, a.base_noise, a.dropout)
    for name, v, unit in (("ATE", r.ate * 100, "cm"), ("ARE", r.are_deg, "deg"),
                          ("ATE 2D", r.ate_2d * 100, "cm"), ("ARE 2D", r.are_2d_deg, "deg")):
        p50, p95, mx = np.percentile(v, [50, 95, 100])
        print(f"{name:7s} median {p50:.3f}  p95 {p95:.3f}  max {mx:.3f} {unit}")
    print(f"failures {r.failures}  2D within 3D on every pair: {r.planar_within_spatial}  ({r.seconds:.1f} s)")
