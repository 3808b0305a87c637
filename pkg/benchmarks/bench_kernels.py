"""Time the compiled and numpy chunk kernels on the bundled scenarios.

    python benchmarks/bench_kernels.py [--pulses N] [--repeat K]

Both backends consume the same uniforms, so the script also checks that
their counts agree before reporting timings.
"""
import argparse
import time

from wdbs_qkd import kernel
from wdbs_qkd.config import load_config
from wdbs_qkd.simulation import run_simulation


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pulses", type=int, default=2_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = sorted(kernel.BACKENDS)
    print(f"backends available: {', '.join(backends)} (default {kernel.BACKEND})")
    print(f"{'scenario':<10} {'backend':<8} {'seconds':>8} {'Mpulse/s':>9}")
    for name in ("no_eve", "attack"):
        cfg = load_config(f"bundled:{name}.cfg")
        reports = {}
        for b in backends:
            secs, rep = best_of(lambda: run_simulation(cfg, pulses=args.pulses, backend=b), args.repeat)
            reports[b] = rep
            print(f"{name:<10} {b:<8} {secs:8.3f} {args.pulses / secs / 1e6:9.2f}")
        first = next(iter(reports.values()))
        if any(r != first for r in reports.values()):
            raise SystemExit(f"{name}: backends disagree")
    print("counts identical across backends")


if __name__ == "__main__":
    main()
