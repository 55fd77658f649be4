"""Timing harness for the dual-backend kernels.

Runs every kernel that ships in both numba and numpy form on representative
shapes, reports best-of-N wall time per implementation, the speedup, and the
worst output disagreement between the two. Optionally times end-to-end
feature extraction on a synthetic corpus under the active backend.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9 --extraction
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from abaf import backend
from abaf import forest as forest_mod
from abaf import preprocess as pre_mod
from abaf.features import llds as llds_mod
from abaf.nn import kernels as k_mod


def _best_of(fn, args, repeats: int) -> float:
    fn(*args)  # warm-up; also triggers JIT compilation for numba kernels
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _flatten(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in parts])


def _cases(rng: np.random.Generator):
    """(name, numpy_impl, numba_impl, args) for every kernel pair."""
    x_img = rng.normal(size=(8, 16, 64, 64))
    kernel = rng.normal(size=(32, 16, 3, 3))
    g_conv = rng.normal(size=(8, 32, 64, 64))
    pooled, idx = k_mod._maxpool_forward_np(x_img)
    g_pool = rng.normal(size=pooled.shape)

    frames = rng.normal(size=(300, 400))
    signal = rng.normal(size=44100)
    h = pre_mod._design_lowpass(160, 441)

    v = np.sort(rng.normal(size=4000))
    t = (rng.random(4000) < 0.5).astype(np.float64)

    cases = [
        ("conv2d_forward", k_mod._conv2d_forward_np, (x_img, kernel)),
        ("conv2d_backward", k_mod._conv2d_backward_np, (x_img, kernel, g_conv)),
        ("maxpool_forward", k_mod._maxpool_forward_np, (x_img,)),
        ("maxpool_backward", k_mod._maxpool_backward_np, (g_pool, idx, 64, 64)),
        ("autocorr", llds_mod._autocorr_np, (frames, 256)),
        ("resample_core", pre_mod._resample_core_np,
         (signal, h, 160, 441, round(44100 * 160 / 441))),
        ("forest_scan", forest_mod._scan_feature_np, (v, t, 1)),
    ]
    numba_impls = {}
    if backend.HAS_NUMBA:
        numba_impls = {
            "conv2d_forward": k_mod._conv2d_forward_nb,
            "conv2d_backward": k_mod._conv2d_backward_nb_wrap,
            "maxpool_forward": k_mod._maxpool_forward_nb,
            "maxpool_backward": k_mod._maxpool_backward_nb,
            "autocorr": llds_mod._autocorr_nb,
            "resample_core": pre_mod._resample_core_nb,
            "forest_scan": forest_mod._scan_feature_nb,
        }
    return [(name, np_impl, numba_impls.get(name), args)
            for name, np_impl, args in cases]


def bench_kernels(repeats: int) -> None:
    rng = np.random.default_rng(0)
    print(f"backend active in package: {backend.backend_name()}")
    print(f"{'kernel':<18} {'numpy (ms)':>11} {'numba (ms)':>11} "
          f"{'speedup':>8} {'max|diff|':>10}")
    for name, np_impl, nb_impl, args in _cases(rng):
        t_np = _best_of(np_impl, args, repeats)
        if nb_impl is None:
            print(f"{name:<18} {t_np * 1e3:>11.3f} {'n/a':>11} {'n/a':>8} {'n/a':>10}")
            continue
        t_nb = _best_of(nb_impl, args, repeats)
        diff = float(np.max(np.abs(_flatten(np_impl(*args)) - _flatten(nb_impl(*args)))))
        print(f"{name:<18} {t_np * 1e3:>11.3f} {t_nb * 1e3:>11.3f} "
              f"{t_np / t_nb:>8.2f} {diff:>10.2e}")


def bench_extraction(n_clips: int, jobs: int) -> None:
    from abaf.config import profile_config
    from abaf.corpus.synth import SynthSpec, generate_synthetic_corpus
    from abaf.features.extract import extract_corpus

    cfg = profile_config("desk")
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp) / "corpus"
        manifest = generate_synthetic_corpus(
            SynthSpec(n_per_class=n_clips // 2, duration_s=3.0), seed=0,
            out_dir=root,
        )
        t0 = time.perf_counter()
        _, n_computed = extract_corpus(manifest, root, Path(tmp) / "cache", cfg,
                                       jobs=jobs)
        dt = time.perf_counter() - t0
    print(f"\nextraction ({backend.backend_name()}): {n_computed} clips in "
          f"{dt:.2f} s -> {dt / n_computed * 1e3:.0f} ms/clip at jobs={jobs}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats per kernel (best is kept)")
    ap.add_argument("--extraction", action="store_true",
                    help="also time end-to-end feature extraction")
    ap.add_argument("--clips", type=int, default=20,
                    help="corpus size for --extraction")
    ap.add_argument("--jobs", type=int, default=4,
                    help="worker processes for --extraction")
    args = ap.parse_args()
    bench_kernels(args.repeats)
    if args.extraction:
        bench_extraction(args.clips, args.jobs)


if __name__ == "__main__":
    main()
