import numpy as np

import fockspec as fs
from fockspec import bs, efimov, friedrichs

# script follows the eigenvalue count N(z) towards the threshold z -> m
# for the nearest-neighbour model at its threshold resonance
# - the threshold constant of D(0, zeta) on a graded grid
# - the Hilbert-Schmidt norm of T11 at z = m under grading towards q = 0,
#   growing for v(0) != 0 and bounded for v(q) = 1 - cos q1
# - N(z) against |log(m - z)|, the slope is compared with U0
#
# CLI-Version of this is:
# fockspec hs-norm --n 6 --tune
# fockspec asymptotics --n 8 --grading 12 --decades 4 8 9

if __name__ == "__main__":

    model = fs.ModelSpec.cubic()
    # 5888 nodes, the dense Birman-Schwinger matrix takes about 0.3 GB
    graded = fs.TorusGrid(8, grading_levels=12)

    slope = friedrichs.d_zeta_slope(model, graded)
    print(
        f"D slope = {slope.numeric:.6f}, pi^2 = {slope.predicted:.6f}, "
        f"2 pi^2 = {slope.alternative:.6f} -> {slope.agrees_with}"
    )

    for label, form in (("v = 1", fs.FormFactor()), ("v = 1 - cos q1", fs.FormFactor("one_minus_cos", (1.0, 0)))):
        frame = bs.hs_norm_profile(fs.ModelSpec.cubic(v=form), n=6, gradings=(0, 2, 4, 6), margin=1e-3)
        print(f"{label:15} \t-> |T11|_HS on gradings 0, 2, 4, 6: {np.round(frame['hs_norm'], 4).tolist()}")

    c_star = friedrichs.tune_resonance(model, graded)
    tuned = model.replace(c=c_star + 10 * graded.min_spacing)
    zs = tuned.m - 10.0 ** (-np.linspace(4.0, 8.0, 9))
    frame = bs.count_sweep(tuned, graded, zs)
    fit = efimov.fit_log_asymptotics(list(zip(frame["z"], frame["count"])), tuned.m)

    U0 = efimov.u_of_mu(efimov.EfimovParams.from_quadratic(fs.extract_quadratic_data(tuned))).U0
    print(frame[["z", "count", "residual_gap"]].to_string(index=False))
    print(f"slope = {fit.slope:.5f}, U0 = {U0:.5f}, relative deviation = {abs(fit.slope - U0) / U0:.2%}")
