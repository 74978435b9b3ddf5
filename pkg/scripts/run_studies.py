"""Run the reference studies into the shared results store.

    python scripts/run_studies.py [study ...] [--workers N]

Each study also writes a summary JSON to results/<study>.json.
"""
import argparse
import json
import time
from pathlib import Path

from erasure_qec.experiments.studies import STUDIES, default_store

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("studies", nargs="*", default=list(STUDIES))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    store = default_store()
    for name in args.studies:
        t = time.time()
        out = STUDIES[name](store=store, workers=args.workers)
        path = ROOT / "results" / f"{name}.json"
        path.parent.mkdir(exist_ok=True)
        path.write_text(json.dumps(out, indent=1, default=float))
        print(f"{name}: done in {time.time() - t:.0f}s -> {path}", flush=True)


if __name__ == "__main__":
    main()
