"""Wall-time scaling of the cross-block update as q grows.

Times sample_w12 (the dominant per-sweep cost) and a full Gibbs sweep
over a geometric grid of q at fixed p, and reports the growth ratio per
doubling.  The structured factorization should stay near cubic in q; a
dense factorization of the pq x pq conditional precision would grow with
the same exponent but a (p/1)^3 larger constant.
"""

import argparse
import time

import numpy as np

from bmb import HyperParams, PartitionedCov, RngStream
from bmb.sampler import (
    build_structured_precision,
    gibbs_sweep,
    initial_state,
    sample_w12,
)


def time_call(fn, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return float(np.median(best))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=4)
    ap.add_argument("--q", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    gen = np.random.default_rng(0)
    rng = RngStream(1)
    p = args.p
    prev_w12 = prev_sweep = None
    print(f"{'q':>6} {'w12 ms':>10} {'sweep ms':>10} {'w12 ratio':>10} {'sweep ratio':>12}")
    for q in args.q:
        x = gen.standard_normal((p + q, p + q + 4))
        s = x @ x.T
        cov = PartitionedCov(s[:p, :p], s[:p, p:], s[p:, p:], n=p + q + 4)
        s12 = cov.s12
        prec = build_structured_precision(cov.s22)
        w11 = np.eye(p)
        scales = gen.uniform(0.5, 2.0, (p, q))
        state = initial_state(p, q)
        hyper = HyperParams(gamma=1.0)

        sample_w12(rng, prec, w11, scales, s12)
        t_w12 = time_call(lambda: sample_w12(rng, prec, w11, scales, s12),
                          args.repeats)
        gibbs_sweep(rng, state, cov, prec, hyper)
        t_sweep = time_call(lambda: gibbs_sweep(rng, state, cov, prec, hyper),
                            args.repeats)

        r1 = "" if prev_w12 is None else f"{t_w12 / prev_w12:>10.2f}"
        r2 = "" if prev_sweep is None else f"{t_sweep / prev_sweep:>12.2f}"
        print(f"{q:>6} {t_w12 * 1e3:>10.2f} {t_sweep * 1e3:>10.2f} {r1:>10} {r2:>12}")
        prev_w12, prev_sweep = t_w12, t_sweep


if __name__ == "__main__":
    main()
