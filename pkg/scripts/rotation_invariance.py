"""R@1 of a 50-scene database re-queried under random 3D rotations, with the stability ratio."""
import argparse

from treeloc.evaluation import stability_ratio
from treeloc.experiments import rotation_invariance

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rotations", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, default=0.02, help="center noise sigma, m")
    a = ap.parse_args()
    r = rotation_invariance(a.rotations, a.seed, a.noise)
    print("per-rotation R@1: " + " ".join(f"{x:.3f}" for x in r.recall_per_rotation))
    s = stability_ratio(r.recall_per_rotation)
    print(f"mean {r.mean:.3f}  std {r.std:.4f}  stability {s:.3f}  ({r.seconds:.1f} s)")
