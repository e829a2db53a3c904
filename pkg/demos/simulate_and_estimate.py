"""Simulate paired event streams and recover the triggering kernel.

Two streams are drawn from the same self-exciting model, merged pair by
pair, and the merged data is fed to the histogram EM fitter on grids of
increasing resolution.  The printed tables show the fitted bin heights
against the true bin averages of the exponential kernel: a coarse grid
lumps the decay into one step, finer grids trace its shape.  Mass in the
thin tail that a finite horizon cannot pin down is partly absorbed by
the background rate, so the fitted branching ratio sits slightly below
the truth.  Runs in a few seconds.
"""

import argparse

import numpy as np

from hawkes_gof.em import em_fit_null
from hawkes_gof.kernels import BinGrid, ExponentialKernel, HawkesModel, grid_from_spec
from hawkes_gof.sequences import merge_sequences
from hawkes_gof.simulate import simulate_dataset


def true_bin_heights(amplitude, decay, grid):
    """Average of amplitude * exp(-decay * t) over each bin of the grid."""
    lo = np.asarray(grid.endpoints[:-1])
    hi = np.asarray(grid.endpoints[1:])
    mass = amplitude / decay * (np.exp(-decay * lo) - np.exp(-decay * hi))
    return mass / grid.widths


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mu", type=float, default=2.0, help="background rate per stream")
    parser.add_argument("--amplitude", type=float, default=1.6)
    parser.add_argument("--decay", type=float, default=4.0)
    parser.add_argument("--horizon", type=float, default=30.0)
    parser.add_argument("--n-seqs", type=int, default=40)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    model = HawkesModel(
        mu=args.mu, kernel=ExponentialKernel(amplitude=args.amplitude, decay=args.decay)
    )
    d1 = simulate_dataset(model, args.horizon, args.n_seqs, args.seed)
    d2 = simulate_dataset(model, args.horizon, args.n_seqs, args.seed + 1)
    merged = [merge_sequences(a, b) for a, b in zip(d1, d2)]
    n_events = sum(seq.n_events for seq in merged)
    branching = args.amplitude / args.decay

    print(f"simulated {args.n_seqs} pairs on [0, {args.horizon}], {n_events} merged events")
    print(f"true background (merged) {2 * args.mu:.2f}, true branching ratio {branching:.3f}")
    print()

    grids = [
        ("2 bins", BinGrid((0.0, 0.6, 2.0))),
        ("3 bins", grid_from_spec("paper3")),
        ("14 bins", grid_from_spec("paper14")),
    ]
    for label, grid in grids:
        report = em_fit_null(merged, grid, tol=1e-4, max_iter=2000)
        fit = report.params
        truth = true_bin_heights(args.amplitude, args.decay, grid)
        print(f"{label}: mu_hat={fit.mu:.3f}  alpha_hat={fit.alpha:.3f}  "
              f"em_iters={report.n_iter}")
        print("  fitted heights", np.array2string(fit.heights, precision=3))
        print("  true averages ", np.array2string(truth, precision=3))
        print()

    print("finer grids trace the decay; the faint tail beyond ~1 time unit is")
    print("partly credited to the background, which is why alpha_hat trails the")
    print("true branching ratio slightly.")


if __name__ == "__main__":
    main()
