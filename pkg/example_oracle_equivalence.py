import numpy as np

import fockspec as fs
from fockspec import bs, friedrichs, oracle

# script compares the Birman-Schwinger count with the eigenvalues of the
# brute-force Fock matrix on a coarse grid
# - both counts have to agree exactly whenever Delta > 0 on every node
# - the dense spectrum is printed for the first few eigenvalues
#
# CLI-Version of this is:
# fockspec oracle --n 4 --c 31.344 --z -1 --z -0.5 --z -0.1

if __name__ == "__main__":

    grid = fs.TorusGrid(4)
    c_star = friedrichs.tune_resonance(fs.ModelSpec.cubic(), fs.GridLadder())
    model = fs.ModelSpec.cubic(c=c_star)

    print(f"Fock dimension = {oracle.fock_dimension(grid.size)}, c* = {c_star:.6f}")
    print(f"lowest eigenvalues = {np.round(oracle.low_spectrum(model, grid, 5), 6).tolist()}")

    for z in np.linspace(-2.0, -0.05, 8):
        via_bs = bs.count_below(model, grid, z)
        via_h = oracle.count_below(model, grid, z)
        status = "ok" if via_bs.count == via_h.count else "MISMATCH"
        print(f"z = {z:8.4f} \t-> bs = {via_bs.count}, oracle = {via_h.count} \t{status}")
