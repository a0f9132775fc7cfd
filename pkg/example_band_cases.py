import fockspec as fs
from fockspec import bands

# script sweeps the fibers of the nearest-neighbour model for three shifts c
# - a deep shift gives an isolated two-particle branch below the threshold (case i)
# - a shift between both extremes of Delta(., m) merges that branch with [m, M] (case ii)
# - a large shift removes the branch entirely (case iii)
#
# CLI-Version of this is:
# fockspec bands --c -5 --n 12 --p-res 9

if __name__ == "__main__":

    model = fs.ModelSpec.cubic()
    grid = fs.TorusGrid(12)

    shifts = {"deep": -5.0, "merged": bands.case_two_shift(model, grid, p_resolution=9), "high": 60.0}

    for label, c in shifts.items():
        result = bands.band_structure(model.replace(c=c), grid, p_resolution=9, workers=4)
        print(
            f"{label:6} c = {c:8.4f} \t-> case ({result.case}), "
            f"tau_ess = {result.tau_ess:.6f}, intervals = {result.intervals}, "
            f"gap = {result.gap:.3e}"
        )
        bands.profile_frame(result.reports).to_csv(f"./bands_{label}.csv", index=False)
