"""Time the compiled and pure-numpy kernels on batched network passes.

    python benchmarks/bench_kernels.py [--depth 6] [--batch 40] [--repeat 20]
"""
import argparse
import time

import numpy as np

from matnet.datagen import SamplingConfig, sample_orthotropic
from matnet.kernels import get_backend
from matnet.network import Topology, backward_batch, forward_batch
from matnet.training import init_params


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--batch", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cfg = SamplingConfig()
    Cp1 = np.array([sample_orthotropic(cfg, rng) for _ in range(args.batch)])
    Cp2 = np.array([sample_orthotropic(cfg, rng) for _ in range(args.batch)])
    backends = {"numpy": get_backend("numpy")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled kernels not built; timing numpy only")

    print(f"depth {args.depth}, batch {args.batch}, best of {args.repeat} (ms)")
    print(f"{'model':6} {'backend':8} {'forward':>9} {'fwd+bwd':>9}")
    for mt in ("dmn", "imn"):
        p = init_params(mt, Topology(args.depth), rng)
        times = {}
        for name, be in backends.items():
            fwd = best_of(lambda: forward_batch(p, Cp1, Cp2, backend=be), args.repeat)

            def both():
                top, rec = forward_batch(p, Cp1, Cp2, tape=True, backend=be)
                backward_batch(p, rec, np.ones_like(top), backend=be)
            times[name] = (fwd, best_of(both, args.repeat))
            print(f"{mt:6} {name:8} {1e3 * times[name][0]:9.2f} {1e3 * times[name][1]:9.2f}")
        if "cython" in times:
            print(f"{mt:6} speed-up {times['numpy'][0] / times['cython'][0]:8.2f}x "
                  f"{times['numpy'][1] / times['cython'][1]:8.2f}x")


if __name__ == "__main__":
    main()
