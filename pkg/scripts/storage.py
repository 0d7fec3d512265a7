"""Serialized size of a fused multi-session global inventory."""
import argparse

from treeloc.experiments import fused_storage

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trees", type=int, default=2000)
    ap.add_argument("--sessions", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    r = fused_storage(a.trees, a.sessions, a.seed)
    print(f"{r.n_trees} trees from {r.n_sessions} sessions: {r.size_bytes} bytes "
          f"({r.size_bytes / 1024:.1f} KB, {r.size_bytes / max(r.n_trees, 1):.1f} B/tree)")
