"""Mean end-to-end localization latency on a large synthetic grid database."""
import argparse

import numpy as np

from treeloc.experiments import latency

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=7000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    r = latency(a.scenes, a.queries, a.seed)
    p50, p95, p99 = np.percentile(r.latencies_ms, [50, 95, 99])
    print(f"scenes {r.n_scenes}  build {r.build_seconds:.1f} s  same-scene hit rate {r.same_scene_rate:.3f}")
    print(f"latency ms: mean {r.mean_ms:.2f}  p50 {p50:.2f}  p95 {p95:.2f}  p99 {p99:.2f}")
    print("mean stage time us: " + "  ".join(f"{k} {v:.0f}" for k, v in r.stage_us.items()))
