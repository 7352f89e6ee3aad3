//! Existence condition, moment-growth and Hölder exponents.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernels::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponents {
    pub rho: f64,
    pub kappa: f64,
    pub rho_capped: f64,
    pub kappa_capped: f64,
    /// False for `beta = 2` unless `alpha gamma > 2 - 2H`.
    pub time_holder_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub exists: bool,
    /// Left side minus right side of the existence inequality.
    pub margin: f64,
    pub theta: f64,
    pub lambda_exp: Option<f64>,
    pub p_exp: Option<f64>,
    pub t_exp: Option<f64>,
    pub rho: Option<f64>,
    pub kappa: Option<f64>,
    pub rho_capped: Option<f64>,
    pub kappa_capped: Option<f64>,
    pub time_holder_valid: Option<bool>,
}

/// The exponent-relevant coefficients, without the range checks of [`ModelParams`].
///
/// Lets boundary cases such as `H = 1/2` (space-time white noise) be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub h0: f64,
    pub h: f64,
}

impl From<&ModelParams> for Exponents {
    fn from(p: &ModelParams) -> Self {
        Self {
            alpha: p.alpha(),
            beta: p.beta(),
            gamma: p.gamma(),
            h0: p.h0(),
            h: p.h(),
        }
    }
}

impl Exponents {
    pub fn is_wave(&self) -> bool {
        self.beta == 2.0
    }

    /// Left side minus right side of the existence inequality.
    pub fn margin(&self) -> f64 {
        let Self {
            alpha: al,
            beta: be,
            gamma: ga,
            h0,
            h,
        } = *self;
        let lhs = if self.is_wave() {
            al * (1.0 + ga).min(2.0)
        } else {
            let m = (2.0 * ga - 2.0 + 2.0 * h0)
                .min(2.0 * ga - 1.0 + be * (1.0 - 2.0 * h) / al)
                .min(0.0);
            2.0 * al + al / be * m
        };
        lhs - (3.0 - 4.0 * h)
    }

    pub fn theta(&self) -> f64 {
        let Self {
            alpha: al,
            beta: be,
            gamma: ga,
            h0,
            h,
        } = *self;
        (2.0 * be + 2.0 * ga - 2.0 - be * (2.0 - 2.0 * h) / al) / (2.0 * h0)
    }

    pub fn rho(&self) -> f64 {
        let Self {
            alpha: al,
            beta: be,
            gamma: ga,
            h0,
            h,
        } = *self;
        be + ga - 1.0 - be * (1.0 - h) / al + h0
    }

    pub fn kappa(&self) -> f64 {
        let Self {
            alpha: al,
            beta: be,
            gamma: ga,
            h0,
            h,
        } = *self;
        if self.is_wave() {
            0.5 * al * (1.0 + ga).min(2.0) - 1.0 + h
        } else {
            al - 1.0 + h + al / be * (ga - 1.0 + h0).min(0.0)
        }
    }
}

/// Existence verdict and signed margin. Ties count as failure.
pub fn check_existence(p: &ModelParams) -> (bool, f64) {
    let margin = Exponents::from(p).margin();
    (margin > 0.0, margin)
}

pub fn theta(p: &ModelParams) -> f64 {
    Exponents::from(p).theta()
}

fn require_existence(p: &ModelParams) -> Result<()> {
    let (ok, margin) = check_existence(p);
    if !ok {
        return domain(format!("existence condition fails (margin {margin})"));
    }
    Ok(())
}

/// Exponents `(lambda, p, t)` of the moment bounds `exp(C lambda^lambda_exp p^(1+p_exp) t^t_exp)`.
pub fn growth_exponents(p: &ModelParams) -> Result<(f64, f64, f64)> {
    require_existence(p)?;
    let th = theta(p);
    let d = 2.0 * p.h0() * th + 1.0;
    Ok((2.0 / d, 1.0 / d, 2.0 * p.h0() * (th + 1.0) / d))
}

pub fn holder_exponents(p: &ModelParams) -> Result<HolderExponents> {
    require_existence(p)?;
    let e = Exponents::from(p);
    let (rho, kappa) = (e.rho(), e.kappa());
    Ok(HolderExponents {
        rho,
        kappa,
        rho_capped: rho.min(1.0),
        kappa_capped: kappa.min(1.0),
        time_holder_valid: !p.is_wave() || e.alpha * e.gamma > 2.0 - 2.0 * e.h,
    })
}

/// At `H0 = 1/2` the existence condition is also necessary.
pub fn necessity_white_time(p: &ModelParams) -> Result<bool> {
    if p.h0() != 0.5 {
        return domain(format!(
            "necessity is only established for H0 = 1/2, got {}",
            p.h0()
        ));
    }
    Ok(check_existence(p).0)
}

pub fn regime_report(p: &ModelParams) -> RegimeReport {
    let (exists, margin) = check_existence(p);
    let th = theta(p);
    let mut r = RegimeReport {
        exists,
        margin,
        theta: th,
        lambda_exp: None,
        p_exp: None,
        t_exp: None,
        rho: None,
        kappa: None,
        rho_capped: None,
        kappa_capped: None,
        time_holder_valid: None,
    };
    if let (Ok((l, pe, te)), Ok(hx)) = (growth_exponents(p), holder_exponents(p)) {
        r.lambda_exp = Some(l);
        r.p_exp = Some(pe);
        r.t_exp = Some(te);
        r.rho = Some(hx.rho);
        r.kappa = Some(hx.kappa);
        r.rho_capped = Some(hx.rho_capped);
        r.kappa_capped = Some(hx.kappa_capped);
        r.time_holder_valid = Some(hx.time_holder_valid);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_without_existence_has_no_exponents() {
        let p = ModelParams::builder().h(0.2).build().unwrap();
        let r = regime_report(&p);
        assert!(!r.exists);
        assert!(r.lambda_exp.is_none() && r.rho.is_none());
        assert!(growth_exponents(&p).is_err());
    }

    #[test]
    fn tie_is_not_existence() {
        // heat with H0 = 1/2 has margin 4H - 1
        let p = ModelParams::builder().h(0.25).build().unwrap();
        let (ok, m) = check_existence(&p);
        assert_eq!(m, 0.0);
        assert!(!ok);
    }
}
