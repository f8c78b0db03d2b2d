//! Conversion of physical parameters to the dimensionless ones used by the solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicScales {
    /// time, s
    pub t0: f64,
    /// length, m
    pub l0: f64,
    /// mass density
    pub rho0: f64,
    /// molar density
    pub n0: f64,
    /// temperature, K
    pub temp0: f64,
}

impl CharacteristicScales {
    pub fn validate(&self) -> Result<()> {
        let all = [self.t0, self.l0, self.rho0, self.n0, self.temp0];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("characteristic scales must all be positive".into()))
        }
    }

    /// pressure scale `rho0 l0^2 / t0^2`
    pub fn pressure(&self) -> f64 {
        self.rho0 * self.l0 * self.l0 / (self.t0 * self.t0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalComponent {
    /// K
    pub tc: f64,
    /// Pa
    pub pc: f64,
    pub omega: f64,
    /// kg/mol
    pub molar_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub mobility: f64,
    /// shear viscosities
    pub eta_s: [f64; 2],
    /// volumetric viscosities
    pub eta_v: [f64; 2],
    /// gradient coefficients `[k11, k12, k22]`
    pub kappa: [f64; 3],
    /// `"mass"` or `"molar"`; selects the scaling rule for `kappa`
    pub kappa_units: crate::io_cli::config::KappaUnits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_gas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<[PhysicalComponent; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessComponent {
    pub tc: f64,
    pub pc: f64,
    pub omega: f64,
    pub molar_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub mobility: f64,
    pub re_s: [f64; 2],
    pub re_v: [f64; 2],
    pub kappa: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_gas: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<[DimensionlessComponent; 2]>,
}

pub fn nondimensionalize(s: &CharacteristicScales, p: &PhysicalParams) -> Result<Dimensionless> {
    use crate::io_cli::config::KappaUnits;
    s.validate()?;
    let (t0, l0, r0, n0) = (s.t0, s.l0, s.rho0, s.n0);
    let kscale = match p.kappa_units {
        KappaUnits::Mass => r0 * t0 * t0 / l0.powi(4),
        KappaUnits::Molar => n0 * n0 * t0 * t0 / (r0 * l0.powi(4)),
    };
    // Re = rho0 l0^2 / (eta t0)
    let re = |eta: f64| -> Result<f64> {
        if eta > 0.0 {
            Ok(r0 * l0 * l0 / (eta * t0))
        } else {
            Err(Error::Config(format!("viscosity must be positive, got {eta}")))
        }
    };
    let components = p.components.map(|cs| {
        cs.map(|c| DimensionlessComponent {
            tc: c.tc / s.temp0,
            pc: c.pc / s.pressure(),
            omega: c.omega,
            molar_mass: c.molar_mass * n0 / r0,
        })
    });
    Ok(Dimensionless {
        mobility: p.mobility / (t0 * r0),
        re_s: [re(p.eta_s[0])?, re(p.eta_s[1])?],
        re_v: [re(p.eta_v[0])?, re(p.eta_v[1])?],
        kappa: p.kappa.map(|k| k * kscale),
        temperature: p.temperature.map(|t| t / s.temp0),
        r_gas: p.r_gas.map(|r| r * s.temp0 * n0 / s.pressure()),
        components,
    })
}
