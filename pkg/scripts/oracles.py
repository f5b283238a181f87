"""Independent high-precision reference values used to freeze test expectations.

Runs with mpmath only; nothing here imports the fairbasis package.
"""
import mpmath as mp

mp.mp.dps = 40


def cir_survival_ode(kappa, theta, sigma, lam0, tau):
    """Survival via numerical integration of the Riccati ODEs (not the closed form)."""
    # d/dtau B = 1 - kappa*B - 0.5*sigma^2*B^2 ; d/dtau lnA = -kappa*theta*B
    f = lambda t, y: [1 - kappa * y[0] - sigma**2 * y[0] ** 2 / 2, -kappa * theta * y[0]]
    sol = mp.odefun(f, 0, [mp.mpf(0), mp.mpf(0)])
    b, ln_a = sol(tau)
    return mp.e ** (ln_a - b * lam0)


def basel_k(pd, lgd, m, avc):
    pd = mp.mpf(pd)
    w = (1 - mp.e ** (-50 * pd)) / (1 - mp.e ** (-50))
    rho = avc * (mp.mpf("0.12") * w + mp.mpf("0.24") * (1 - w))
    b = (mp.mpf("0.11852") - mp.mpf("0.05478") * mp.log(pd)) ** 2
    ma = (1 + (m - mp.mpf("2.5")) * b) / (1 - mp.mpf("1.5") * b)
    ninv = lambda p: mp.sqrt(2) * mp.erfinv(2 * p - 1)
    cond = mp.ncdf((ninv(pd) + mp.sqrt(rho) * ninv(mp.mpf("0.999"))) / mp.sqrt(1 - rho))
    return rho, b, ma, lgd * (cond - pd) * ma


if __name__ == "__main__":
    print("cir survival k=.5 th=.04 s=.1 l0=.02 T=5:", mp.nstr(cir_survival_ode(0.5, 0.04, 0.1, 0.02, 5), 12))
    for l0 in (0.01, 0.02, 0.05):
        for T in (1, 5, 10):
            print(f"  cir q l0={l0} T={T}:", mp.nstr(cir_survival_ode(0.5, 0.04, 0.1, l0, T), 12))
    print("cir 1y pd l0=.02:", mp.nstr(1 - cir_survival_ode(0.5, 0.04, 0.1, 0.02, 1), 12))
    rho, b, ma, k = basel_k("0.01", mp.mpf("0.45"), mp.mpf("2.5"), 1)
    print("rho(0.01):", mp.nstr(rho, 12), "b:", mp.nstr(b, 12), "MA:", mp.nstr(ma, 12), "K:", mp.nstr(k, 12))
    print("MA(pd=1):", mp.nstr(basel_k(1, 1, mp.mpf("2.5"), 1)[2], 12))
    print("K(pd=1-1e-6):", mp.nstr(basel_k(1 - mp.mpf("1e-6"), mp.mpf("0.45"), mp.mpf("2.5"), 1)[3], 12))
    print("N_c fixed .05:", mp.nstr(0.05 * k, 12), " .016:", mp.nstr(mp.mpf("0.016") * k, 12))
    # constant-intensity closed forms
    lam, r, R, T = mp.mpf("0.03"), mp.mpf("0.02"), mp.mpf("0.4"), 5
    apv = (1 - mp.e ** (-(r + lam) * T)) / (r + lam)
    dpv = (1 - R) * lam * apv
    print("apv:", mp.nstr(apv, 12), "dpv:", mp.nstr(dpv, 12), "floater S_b=.01:", mp.nstr(1 - dpv + mp.mpf("0.01") * apv, 12))
    lam = mp.mpf("0.091")
    print("bond .05 lam .091:", mp.nstr(mp.e ** (-lam * 10) + mp.mpf("0.05") * (1 - mp.e ** (-lam * 10)) / lam, 12))
    print("jtd l:", mp.nstr(mp.mpf("0.05") * (1 - mp.e ** (-lam * 10)) / lam, 12))
    # mbar with constant coefficients: integral_0^t e^{r(t-u)} lam*l du
    print("mbar:", mp.nstr(mp.quad(lambda u: mp.e ** (mp.mpf("0.02") * (5 - u)) * mp.mpf("0.009"), [0, 5]), 12))
    print("eq22 v:", mp.nstr(apv * mp.mpf("0.005"), 12), mp.nstr(apv * mp.mpf("0.0015"), 12))
    print("N^-1(0.999):", mp.nstr(mp.sqrt(2) * mp.erfinv(2 * mp.mpf("0.999") - 1), 12))
