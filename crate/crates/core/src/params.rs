//! Physical constants of the stretching model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unvalidated parameter record as it appears in configuration files (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParameters {
    pub rho: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eps1: f64,
    pub eps3: f64,
    pub mu: f64,
    pub h: f64,
    #[serde(rename = "L", alias = "length")]
    pub length: f64,
}

impl RawParameters {
    /// All constants equal to one. Used throughout the test-suite.
    pub const TOY: RawParameters = RawParameters {
        rho: 1.0,
        alpha: 1.0,
        gamma: 1.0,
        eps1: 1.0,
        eps3: 1.0,
        mu: 1.0,
        h: 1.0,
        length: 1.0,
    };

    /// A PZT-like strip: 10 cm long, 1 mm thick.
    pub const PZT_STRIP: RawParameters = RawParameters {
        rho: 7600.0,
        alpha: 6.1e10,
        gamma: -10.4,
        eps1: 1.5e-8,
        eps3: 1.3e-8,
        mu: 1.2e-6,
        h: 1.0e-3,
        length: 0.1,
    };
}

/// Validated constants plus the derived length² constant `xi = eps1*h²/(12*eps3)`.
///
/// `gamma` may carry either sign (poling direction); everything else is
/// strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameters<T> {
    rho: T,
    alpha: T,
    gamma: T,
    eps1: T,
    eps3: T,
    mu: T,
    h: T,
    length: T,
    xi: T,
}

fn positive<T: Real>(name: &'static str, value: T) -> Result<T> {
    if value > T::zero() && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositiveParameter(name))
    }
}

impl<T: Real> BeamParameters<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(rho: T, alpha: T, gamma: T, eps1: T, eps3: T, mu: T, h: T, length: T) -> Result<Self> {
        let rho = positive("rho", rho)?;
        let alpha = positive("alpha", alpha)?;
        if !gamma.is_finite() {
            return Err(Error::InvalidConfig("gamma must be finite".into()));
        }
        let eps1 = positive("eps1", eps1)?;
        let eps3 = positive("eps3", eps3)?;
        let mu = positive("mu", mu)?;
        let h = positive("h", h)?;
        let length = positive("L", length)?;
        let xi = eps1 * h * h / (T::lit(12.0) * eps3);
        if !(xi > T::zero()) || !xi.is_finite() {
            return Err(Error::DegenerateXi);
        }
        Ok(Self { rho, alpha, gamma, eps1, eps3, mu, h, length, xi })
    }

    pub fn from_raw(raw: &RawParameters) -> Result<Self> {
        Self::new(
            T::lit(raw.rho),
            T::lit(raw.alpha),
            T::lit(raw.gamma),
            T::lit(raw.eps1),
            T::lit(raw.eps3),
            T::lit(raw.mu),
            T::lit(raw.h),
            T::lit(raw.length),
        )
    }

    pub fn toy() -> Self {
        Self::from_raw(&RawParameters::TOY).expect("toy parameters are valid")
    }

    pub fn to_raw(&self) -> RawParameters {
        RawParameters {
            rho: self.rho.as_f64(),
            alpha: self.alpha.as_f64(),
            gamma: self.gamma.as_f64(),
            eps1: self.eps1.as_f64(),
            eps3: self.eps3.as_f64(),
            mu: self.mu.as_f64(),
            h: self.h.as_f64(),
            length: self.length.as_f64(),
        }
    }

    /// Copy with a different piezoelectric coupling.
    pub fn with_gamma(&self, gamma: T) -> Self {
        Self { gamma, ..*self }
    }

    /// Copy with a different elastic stiffness.
    pub fn with_alpha(&self, alpha: T) -> Result<Self> {
        Ok(Self { alpha: positive("alpha", alpha)?, ..*self })
    }

    pub fn rho(&self) -> T {
        self.rho
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn eps1(&self) -> T {
        self.eps1
    }
    pub fn eps3(&self) -> T {
        self.eps3
    }
    pub fn mu(&self) -> T {
        self.mu
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn length(&self) -> T {
        self.length
    }
    pub fn xi(&self) -> T {
        self.xi
    }

    /// Inertia weight of the θ̇ field, `eps1*h²/12` (equal to `xi*eps3`).
    pub fn theta_inertia(&self) -> T {
        self.eps1 * self.h * self.h / T::lit(12.0)
    }

    /// Coefficient `gamma²/eps3` of the nonlocal stiffening term.
    pub fn nonlocal_stiffness(&self) -> T {
        self.gamma * self.gamma / self.eps3
    }

    /// Mechanical wave speed `sqrt(alpha/rho)` without piezoelectric stiffening.
    pub fn wave_speed(&self) -> T {
        (self.alpha / self.rho).sqrt()
    }
}
