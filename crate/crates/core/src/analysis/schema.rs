//! Column documentation for every CSV the tool writes.

use serde_json::{json, Value};

pub fn output_schema() -> Value {
    json!({
        "common": "First line of every CSV is '# spinsqueeze <version> <tag> config=<hash>'. Numbers carry 17 significant digits; NaN marks an absent value.",
        "realization_<k>.csv": {
            "t": "time in units of 1/J",
            "Sx,Sy,Sz": "collective spin means",
            "Vyy,Vzz,Vyz": "symmetrized covariances of S^y, S^z",
            "xi2,xi2_err": "squeezing parameter and its propagated error",
            "mxy,mxy_err": "in-plane magnetization 2 sqrt(<Sx^2>+<Sy^2>)/N",
            "flags": "bit 0: <Sx>^2 below 10 squared standard errors; bit 1: single realization",
            "Sx_err..Vyz_err": "standard errors of the means and second moments"
        },
        "ensemble.csv": {
            "header": "second comment line '# n_spins=<N per realization>'",
            "t": "time in units of 1/J",
            "<o>,<o>_sem,<o>_dis,<o>_err2": "for o in Sx,Sy,Sz,Vyy,Vzz,Vyz,xi2,mxy: disorder mean, combined standard error sqrt(dis^2 + err2/R), disorder scatter, mean squared per-realization error",
            "flags": "as for realization files"
        },
        "xi_opt.csv": {
            "p,delta,L,N": "point and mean spin count",
            "xi2_opt,err": "selected squeezing minimum",
            "t_opt,t_opt_err": "its time and half the local sample spacing",
            "class": "scalable-candidate | global-fallback"
        },
        "mbar.csv": {
            "p,delta,L,N": "point and mean spin count",
            "mbar,err": "plateau over the final 10% of samples and the mean error there",
            "m1,m2,sigma": "means of the last two 10% windows and their typical error",
            "projected_change": "|slope x window duration| of a linear fit over the final window",
            "converged": "both convergence criteria hold"
        },
        "exponents.csv": {
            "p,delta": "row",
            "exponent": "nu (xi2_opt ~ N^-nu) or alpha (mbar ~ N^-alpha)",
            "value,err": "exponent and Gaussian-likelihood error",
            "intercept,intercept_err": "ln of the prefactor",
            "n_sizes": "sizes available",
            "chi2": "weighted residual sum",
            "status": "fit | no-fit",
            "hatched": "some magnetization plateau failed convergence"
        },
        "phase_diagram.csv": {
            "p,delta,alpha,alpha_err,nu,nu_err,hatched": "exponent grid"
        },
        "boundary.csv": {
            "delta": "row",
            "diagnostic": "nu | alpha",
            "threshold": "threshold the exponent is compared with",
            "kind": "crossing | lower-bound | upper-bound",
            "p_c,dp_c": "interpolated boundary and its uncertainty"
        },
        "topt.csv": {
            "delta": "row",
            "quantity": "mu (per p) or gamma (per reference N)",
            "p": "vacancy for mu rows, p_c for gamma rows",
            "n_ref": "reference size",
            "value,err": "exponent and error",
            "t_ref,t_ref_err": "fitted t_opt at n_ref (mu rows)",
            "status": "fit | no-fit"
        },
        "overlay.csv": {
            "t,xi2_dtwa,xi2_ctwa,combined_err": "dTWA and cTWA squeezing on a shared grid"
        },
        "hist_jeff.csv": {
            "bin_left,bin_right,density": "log-binned density of per-spin summed couplings"
        },
        "oracle.csv": {
            "t,Sx_exact,xi2_exact,Sx_<m>,Sx_<m>_err,xi2_<m>,xi2_<m>_err": "exact reference and semiclassical estimates"
        }
    })
}
