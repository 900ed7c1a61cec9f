"""Time the numba and numpy kernel backends on the hot paths.

    python3 benchmarks/bench_backends.py [--level 5] [--degree 2] [--repeat 5]

Reports best-of-N wall time for element geometry, local matrices, full
matrix assembly and the quadric closest-point projection, and checks that
both backends agree.
"""
import argparse
import time

import numpy as np

from esfem import LevelSetSurface, set_backend
from esfem._accel import HAVE_NUMBA
from esfem.assembly import assemble_matrices, tabulation
from esfem.experiment import level_mesh
from esfem.kernels import element_geometry, local_matrices, quadric_projection


def best_of(fn, repeat):
    fn()  # warm-up (jit compile on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--level", type=int, default=5)
    parser.add_argument("--degree", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    surface = LevelSetSurface.from_name("ellipsoid")
    mesh = level_mesh(surface, args.level, args.degree)
    mesh.advance(0.3)
    tab = tabulation(mesh)
    coords = mesh.element_coords
    x, meas, tgrad, _ = element_geometry(coords, tab.values, tab.grads)
    rng = np.random.default_rng(0)
    pts = x.reshape(-1, 3) * (1.0 + 0.05 * rng.standard_normal((x.shape[0] * x.shape[1], 1)))
    q = surface.coefficients(0.3)

    cases = {
        "element_geometry": lambda: element_geometry(coords, tab.values, tab.grads),
        "local_matrices": lambda: local_matrices(tab.values, tab.rule.weights, meas, tgrad),
        "assemble_matrices": lambda: assemble_matrices(mesh),
        "quadric_projection": lambda: quadric_projection(pts, q),
    }
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"mesh: level {args.level}, k={args.degree}, {mesh.n_elements} elements, {mesh.n_nodes} nodes, {pts.shape[0]} projection points")
    results = {}
    outputs = {}
    for name in backends:
        set_backend(name)
        results[name] = {case: best_of(fn, args.repeat) for case, fn in cases.items()}
        M, A = assemble_matrices(mesh)
        outputs[name] = (M.toarray() if M.shape[0] < 3000 else M.data, quadric_projection(pts, q)[0])
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for case in cases:
        row = f"{case:<20}" + "".join(f"{results[b][case] * 1e3:10.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"   {results['numpy'][case] / results['numba'][case]:7.2f}x"
        print(row)
    if len(backends) == 2:
        dm = np.max(np.abs(outputs["numpy"][0] - outputs["numba"][0]))
        dp = np.max(np.abs(outputs["numpy"][1] - outputs["numba"][1]))
        print(f"max |numpy - numba|: mass {dm:.2e}, projection {dp:.2e}")


if __name__ == "__main__":
    main()
