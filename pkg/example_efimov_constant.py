from fockspec import efimov

# script computes the constant U0 of the logarithmic eigenvalue growth
# for the mass ratio s = 1/2 of the nearest-neighbour model
# - root y* of the zero harmonic at level 1 and the resulting lower bound
# - contribution of every harmonic to the super-level measure
# - the counting function of the truncated operator S_r against 2 r U0
#
# CLI-Version of this is:
# fockspec efimov --s 0.5 --r 25 --r 50 --r 100

if __name__ == "__main__":

    params = efimov.EfimovParams.from_s(0.5)

    estimate = efimov.u_of_mu(params, mu=1.0, l_max=8)
    print(f"y* = {estimate.y_star:.8f}, U0 = {estimate.U0:.6f}, lower bound = {estimate.U0_lower:.6f}")
    print(estimate.to_frame().to_string(index=False))

    check = efimov.fourier_check(params)
    print(f"angle convention: {check.winner} (deviation {check.deviation[check.winner]:.2e})")

    report = efimov.sobolev_limit_check(params, r_list=(25, 50, 100, 200))
    print(report.frame.to_string(index=False))
    print(f"within {100 * report.tolerance:.0f} %: {report.passed}, gaps shrinking: {report.gaps_shrinking}")
