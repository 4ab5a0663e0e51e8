"""Compare the numba and numpy LSTM kernels, and a full training step under each backend.

    python3 benchmarks/bench_kernels.py [--repeat N] [--no-step]

Kernel timings call both implementations directly in this process. The
training-step timing starts one subprocess per backend with
``GAZEDEP_NUMBA`` set, since the backend is fixed at import time.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from gazedep.nn import kernels

# (label, batch, max length, input dim, hidden per direction)
SHAPES = [
    ("char, desk", 64, 12, 3, 3),
    ("word, desk", 8, 30, 86, 40),
    ("char, full", 64, 12, 30, 25),
    ("word, full", 8, 30, 170, 400),
]

STEP_SCRIPT = """
import json, sys, time
import numpy as np
from gazedep.nn import Hyperparams, Tagger, Vocabs, SGD, autograd as ag, kernels
from gazedep.synthetic import random_treebank
from gazedep.vocab import Vocab
scale, repeat = sys.argv[1], int(sys.argv[2])
sents = random_treebank(8, seed=1, min_len=20, max_len=30)
seqs = [(list(s.forms), list(s.pos_tags)) for s in sents]
labels = {"head": Vocab([f"h{k}" for k in range(40)]), "rel": Vocab([f"r{k}" for k in range(30)])}
hp = Hyperparams.desk() if scale == "desk" else Hyperparams()
model = Tagger(hp, Vocabs.build(seqs, labels))
opt = SGD(model.params, hp.lr0, hp.decay, hp.momentum)
batch = model.make_batch(seqs)
rng = np.random.default_rng(0)
gold = {t: rng.integers(1, len(v), size=batch.n_tokens) for t, v in labels.items()}
def step():
    model.zero_grad()
    out = model.forward(batch, train=True)
    ag.backward(ag.add_all([ag.cross_entropy(out[t], gold[t]) for t in out]))
    opt.step(0)
step()  # warm-up (and JIT compilation)
times = []
for _ in range(repeat):
    t0 = time.perf_counter(); step(); times.append(time.perf_counter() - t0)
print(json.dumps({"backend": kernels.BACKEND, "median": float(np.median(times))}))
"""


def _median(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_kernels(repeat: int) -> list[tuple]:
    rows = []
    rng = np.random.default_rng(0)
    for label, B, T, D, H in SHAPES:
        lengths = rng.integers(T // 2, T + 1, size=B).astype(np.int64)
        lengths[0] = T
        xw = rng.normal(size=(B, T, 4 * H)) * 0.5
        wh = rng.normal(size=(H, 4 * H)) * 0.1
        dh = rng.normal(size=(B, T, H))
        for t in range(T):
            xw[lengths <= t, t] = 0.0
            dh[lengths <= t, t] = 0.0
        res = {}
        for name, fwd, bwd in (("numpy", kernels.lstm_forward_numpy, kernels.lstm_backward_numpy),
                               ("numba", getattr(kernels, "lstm_forward_numba", None),
                                getattr(kernels, "lstm_backward_numba", None))):
            if fwd is None or not kernels.HAVE_NUMBA and name == "numba":
                continue
            h, c, g = fwd(xw, lengths, wh, False)
            res[name] = (_median(lambda: fwd(xw, lengths, wh, False), repeat),
                         _median(lambda: bwd(dh, h, c, g, lengths, wh, False), repeat))
        rows.append((label, B, T, H, res))
    return rows


def bench_step(scale: str, repeat: int) -> dict[str, float]:
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, GAZEDEP_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", STEP_SCRIPT, scale, str(repeat)], env=env,
                             capture_output=True, text=True, check=True)
        info = json.loads(res.stdout.strip().splitlines()[-1])
        out[info["backend"]] = info["median"]
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--no-step", action="store_true", help="skip the full training-step comparison")
    args = ap.parse_args(argv)

    print(f"{'shape':<12} {'B':>3} {'T':>3} {'H':>4}  {'numpy fwd':>10} {'numba fwd':>10} {'speedup':>7}"
          f"  {'numpy bwd':>10} {'numba bwd':>10} {'speedup':>7}")
    for label, B, T, H, res in bench_kernels(args.repeat):
        np_f, np_b = res["numpy"]
        nb_f, nb_b = res.get("numba", (float("nan"), float("nan")))
        print(f"{label:<12} {B:>3} {T:>3} {H:>4}  {np_f * 1e3:>8.2f}ms {nb_f * 1e3:>8.2f}ms {np_f / nb_f:>6.1f}x"
              f"  {np_b * 1e3:>8.2f}ms {nb_b * 1e3:>8.2f}ms {np_b / nb_b:>6.1f}x")
    if not args.no_step:
        print()
        for scale in ("desk", "full"):
            t = bench_step(scale, max(3, args.repeat // 4))
            line = "  ".join(f"{k} {v * 1e3:.1f}ms" for k, v in sorted(t.items()))
            ratio = t["numpy"] / t["numba"] if "numba" in t else float("nan")
            print(f"train step, {scale} scale, 8 sentences: {line}  (numpy/numba {ratio:.1f}x)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
