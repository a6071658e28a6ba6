"""Benchmark the compiled kernel lane against the numpy fallback.

Times forward and input-gradient ops at the batch-100 shapes of the two
bundled convolutional models, plus one full training iteration per lane.

    python benchmarks/bench_kernels.py [--batch 100] [--reps 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import convae
from convae import kernels
from convae.nets import net_path
from convae.network import Network, init_params
from convae.solver import SolverConfig, sgd_step


def best_of(fn, reps):
    fn()  # warmup
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def kernel_cases(batch):
    rng = np.random.default_rng(0)
    cases = []
    for model, fm1, fm2, hid in (("model1", 4, 2, 125), ("model2", 8, 4, 250)):
        x_in = rng.random((batch, 1, 28, 28))
        w1 = rng.random((fm1, 1, 9, 9))
        x1 = rng.random((batch, fm1, 20, 20))
        w2 = rng.random((fm2, fm1, 9, 9))
        dy2 = rng.random((batch, fm2, 12, 12))
        xl = rng.random((batch, hid, 1, 1))
        wd2 = rng.random((hid, fm2, 12, 12))
        xd = rng.random((batch, fm2, 12, 12))
        wd1 = rng.random((fm2, fm2, 17, 17))
        dyd = rng.random((batch, fm2, 28, 28))
        cases += [
            (f"{model} conv1 fwd", "conv_fwd", (x_in, w1, np.zeros(fm1))),
            (f"{model} conv2 fwd", "conv_fwd", (x1, w2, np.zeros(fm2))),
            (f"{model} conv2 dx", "conv_dx", (w2, dy2, 20, 20)),
            (f"{model} deconv2 fwd", "deconv_fwd", (xl, wd2, np.zeros(fm2))),
            (f"{model} deconv1 fwd", "deconv_fwd", (xd, wd1, np.zeros(fm2))),
            (f"{model} deconv1 dx", "deconv_dx", (wd1, dyd, 12, 12)),
        ]
    return cases


def bench_kernels(batch, reps):
    lanes = kernels.available_backends()
    print(f"kernel ops, batch {batch} (best of {reps}, ms)")
    header = f"{'op':<24}" + "".join(f"{lane:>10}" for lane in lanes)
    if len(lanes) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, op, args in kernel_cases(batch):
        times = []
        for lane in lanes:
            fn = getattr(kernels.get_backend(lane), op)
            times.append(best_of(lambda: fn(*args), reps))
        line = f"{label:<24}" + "".join(f"{t:>10.2f}" for t in times)
        if len(times) == 2:
            line += f"{times[1] / times[0]:>9.1f}x"
        print(line)


def bench_training_iteration(batch, reps):
    import convae.kernels as K

    print(f"\nfull training iteration, model1, batch {batch} (best of {reps}, ms)")
    rng = np.random.default_rng(1)
    images = convae.Tensor(rng.random((batch, 1, 28, 28)))
    cfg = SolverConfig(base_lr=0.006, max_iter=1, weight_decay=0.0005, batch_size=batch)
    for lane in kernels.available_backends():
        K._backend = kernels.get_backend(lane)
        net = convae.parse_netspec(net_path("model1").read_text())
        params = init_params(net, np.random.default_rng(2))
        network = Network(net, params)

        def step():
            network.forward_backward(images, images)
            sgd_step(params, cfg, 0.006)

        print(f"{lane:<10} {best_of(step, reps):>10.2f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=100)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()
    print(f"active backend: {kernels.backend_name()}")
    bench_kernels(args.batch, args.reps)
    bench_training_iteration(args.batch, args.reps)


if __name__ == "__main__":
    main()
