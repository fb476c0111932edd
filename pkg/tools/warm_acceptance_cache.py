"""Pre-train every run the acceptance tests consume.

Uses the exact cache-key logic from the test module so the warmed files
are hits, not near misses. Safe to re-run; finished runs are skipped.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import test_acceptance as acc  # noqa: E402


def main() -> int:
    jobs = []
    for variant in acc.CRL_VARIANTS:
        for seed in acc.SEEDS:
            jobs.append((f"crl-{variant}", acc.short_crl_config(variant), seed))
    for seed in acc.SEEDS:
        jobs.append(("sanity-bo", acc.sanity_config(), seed))

    for i, (tag, cfg, seed) in enumerate(jobs, 1):
        started = time.perf_counter()
        path = acc.cached_run(tag, cfg, seed)
        print(f"[{i}/{len(jobs)}] {tag} seed {seed} -> {path.name} "
              f"({time.perf_counter() - started:.0f}s)", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
