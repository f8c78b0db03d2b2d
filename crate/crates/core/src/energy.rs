//! Bulk Helmholtz free-energy densities and the energy-quadratization variable.
//!
//! The scheme works with mass densities `rho_i`. Peng-Robinson is naturally
//! written in molar densities `n_i = rho_i / m_i`; the conversion is applied
//! inside [`EnergyModel`] so callers never see molar units unless they ask
//! for them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    /// critical temperature
    pub tc: f64,
    /// critical pressure
    pub pc: f64,
    /// acentric factor
    pub omega: f64,
    pub molar_mass: f64,
}

impl Component {
    pub fn b(&self, r: f64) -> f64 {
        0.07780 * r * self.tc / self.pc
    }

    pub fn a(&self, r: f64, t: f64) -> f64 {
        let w = self.omega;
        let kappa = 0.37464 + 1.54226 * w - 0.26992 * w * w;
        let alpha = 1.0 + kappa * (1.0 - (t / self.tc).sqrt());
        0.45724 * r * r * self.tc * self.tc / self.pc * alpha * alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PengRobinson {
    pub r_gas: f64,
    pub temperature: f64,
    pub components: [Component; 2],
    /// binary interaction coefficient k_12
    pub k12: f64,
    /// molar density below which the ideal part switches to its quadratic extension
    pub eps: f64,
}

/// Mixing rule output of [`PengRobinson::mixture_coeffs`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureCoeffs {
    pub a: f64,
    pub b: f64,
    pub a_i: [f64; 2],
    pub b_i: [f64; 2],
}

impl PengRobinson {
    fn validate(&self) -> Result<()> {
        let ok = self.r_gas > 0.0
            && self.temperature > 0.0
            && self.eps > 0.0
            && self.components.iter().all(|c| c.tc > 0.0 && c.pc > 0.0 && c.molar_mass > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("Peng-Robinson constants must be positive".into()))
        }
    }

    fn aij(&self) -> [[f64; 2]; 2] {
        let (r, t) = (self.r_gas, self.temperature);
        let a = [self.components[0].a(r, t), self.components[1].a(r, t)];
        let x = (a[0] * a[1]).sqrt() * (1.0 - self.k12);
        [[a[0], x], [x, a[1]]]
    }

    fn bi(&self) -> [f64; 2] {
        [self.components[0].b(self.r_gas), self.components[1].b(self.r_gas)]
    }

    /// Mixture energy and co-volume parameters at molar densities `n`.
    pub fn mixture_coeffs(&self, n: [f64; 2]) -> Result<MixtureCoeffs> {
        let nt = n[0] + n[1];
        if !(nt > 0.0) {
            return Err(Error::Domain(format!("total molar density {nt} is not positive")));
        }
        let aij = self.aij();
        let bi = self.bi();
        let y = [n[0] / nt, n[1] / nt];
        let mut a = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                a += y[i] * y[j] * aij[i][j];
            }
        }
        Ok(MixtureCoeffs { a, b: y[0] * bi[0] + y[1] * bi[1], a_i: [aij[0][0], aij[1][1]], b_i: bi })
    }

    /// `(Q, dQ/dn_i, B, L(B), L'(B))` with `Q = a n^2`, `B = b n`.
    fn parts(&self, n: [f64; 2]) -> Result<(f64, [f64; 2], f64, f64, f64)> {
        let nt = n[0] + n[1];
        if !(nt > 0.0) {
            return Err(Error::Domain(format!("total molar density {nt} is not positive")));
        }
        let aij = self.aij();
        let bi = self.bi();
        let q1 = 2.0 * (aij[0][0] * n[0] + aij[0][1] * n[1]);
        let q2 = 2.0 * (aij[1][0] * n[0] + aij[1][1] * n[1]);
        let q = 0.5 * (q1 * n[0] + q2 * n[1]);
        let bb = bi[0] * n[0] + bi[1] * n[1];
        if !(bb < 1.0) {
            return Err(Error::Domain(format!("packing fraction b n = {bb} is not below 1")));
        }
        if !(bb > 0.0) {
            return Err(Error::Domain(format!("packing fraction b n = {bb} is not positive")));
        }
        let lo = 1.0 + (1.0 - SQRT2) * bb;
        let hi = 1.0 + (1.0 + SQRT2) * bb;
        let l = (lo / hi).ln();
        let dl = -2.0 * SQRT2 / (lo * hi);
        Ok((q, [q1, q2], bb, l, dl))
    }

    fn ideal(&self, ni: f64) -> (f64, f64) {
        let rt = self.r_gas * self.temperature;
        let e = self.eps;
        if ni >= e {
            (rt * ni * (ni.ln() - 1.0), rt * ni.ln())
        } else {
            (rt * (ni * (e.ln() - 1.0) + ni * ni / (2.0 * e) - e / 2.0), rt * (e.ln() - 1.0 + ni / e))
        }
    }

    /// Helmholtz free-energy density in molar variables.
    pub fn h_molar(&self, n: [f64; 2]) -> Result<f64> {
        let rt = self.r_gas * self.temperature;
        let (q, _, bb, l, _) = self.parts(n)?;
        let nt = n[0] + n[1];
        let ideal = self.ideal(n[0]).0 + self.ideal(n[1]).0;
        let rep = -nt * rt * (1.0 - bb).ln();
        let att = q / (2.0 * SQRT2 * bb) * l;
        Ok(ideal + rep + att)
    }

    /// Chemical potentials `dh/dn_i`.
    pub fn mu_molar(&self, n: [f64; 2]) -> Result<[f64; 2]> {
        let rt = self.r_gas * self.temperature;
        let (q, dq, bb, l, dl) = self.parts(n)?;
        let bi = self.bi();
        let nt = n[0] + n[1];
        let mut mu = [0.0; 2];
        for i in 0..2 {
            let ideal = self.ideal(n[i]).1;
            let rep = -rt * (1.0 - bb).ln() + nt * rt * bi[i] / (1.0 - bb);
            let att = (dq[i] * bb - q * bi[i]) / (2.0 * SQRT2 * bb * bb) * l + q / (2.0 * SQRT2 * bb) * dl * bi[i];
            mu[i] = ideal + rep + att;
        }
        Ok(mu)
    }

    /// Hessian by central differences of the analytic chemical potentials.
    pub fn hess_molar(&self, n: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let mut hess = [[0.0; 2]; 2];
        for j in 0..2 {
            let step = 1e-5 * n[j].abs().max(1.0);
            let (mut p, mut m) = (n, n);
            p[j] += step;
            m[j] -= step;
            let (mp, mm) = (self.mu_molar(p)?, self.mu_molar(m)?);
            for i in 0..2 {
                hess[i][j] = (mp[i] - mm[i]) / (2.0 * step);
            }
        }
        let off = 0.5 * (hess[0][1] + hess[1][0]);
        hess[0][1] = off;
        hess[1][0] = off;
        Ok(hess)
    }

    /// Bulk pressure `n . mu - h`.
    pub fn pressure(&self, n: [f64; 2]) -> Result<f64> {
        let mu = self.mu_molar(n)?;
        Ok(n[0] * mu[0] + n[1] * mu[1] - self.h_molar(n)?)
    }

    /// Tangent-plane-subtracted density `h(n) - mu0 . n`.
    pub fn modified_h(&self, n: [f64; 2], mu0: [f64; 2]) -> Result<f64> {
        Ok(self.h_molar(n)? - mu0[0] * n[0] - mu0[1] * n[1])
    }

    /// Two-phase coexistence by Newton iteration: equal chemical potentials and
    /// pressures, with the first gas density held at its initial value.
    /// Returns `(liquid, gas)`.
    pub fn coexistence(&self, liquid: [f64; 2], gas: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
        let residual = |x: [f64; 3]| -> Result<[f64; 3]> {
            let l = [x[0], x[1]];
            let g = [gas[0], x[2]];
            let (ml, mg) = (self.mu_molar(l)?, self.mu_molar(g)?);
            Ok([ml[0] - mg[0], ml[1] - mg[1], self.pressure(l)? - self.pressure(g)?])
        };
        let mut x = [liquid[0], liquid[1], gas[1]];
        for _ in 0..100 {
            let r = residual(x)?;
            let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if r.iter().all(|v| v.abs() < 1e-12 * scale) {
                return Ok(([x[0], x[1]], [gas[0], x[2]]));
            }
            let mut jac = nalgebra::Matrix3::zeros();
            for k in 0..3 {
                let h = 1e-7 * x[k].abs().max(1e-3);
                let (mut p, mut m) = (x, x);
                p[k] += h;
                m[k] -= h;
                let (rp, rm) = (residual(p)?, residual(m)?);
                for i in 0..3 {
                    jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let dx = jac
                .lu()
                .solve(&nalgebra::Vector3::new(-r[0], -r[1], -r[2]))
                .ok_or_else(|| Error::Domain("singular coexistence Jacobian".into()))?;
            // damp steps that would leave the admissible region
            let mut t = 1.0;
            loop {
                let trial = [x[0] + t * dx[0], x[1] + t * dx[1], x[2] + t * dx[2]];
                if trial.iter().all(|v| *v > 0.0) && residual(trial).is_ok() {
                    x = trial;
                    break;
                }
                t *= 0.5;
                if t < 1e-8 {
                    return Err(Error::Domain("coexistence iteration left the admissible region".into()));
                }
            }
        }
        Err(Error::Domain("coexistence iteration did not converge".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BulkEnergy {
    /// `rho1^2 (rho1 - 1)^2 + rho2^2 (rho2 - 1)^2`
    DoubleWell,
    /// Flory-Huggins mixing energy with chain lengths `n1`, `n2`.
    FloryHuggins {
        kbt_over_m: f64,
        n1: f64,
        n2: f64,
        chi: f64,
    },
    PengRobinson(PengRobinson),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqVars {
    pub q: f64,
    pub dq: [f64; 2],
}

/// A bulk energy together with the quadratization shift `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyModel {
    pub bulk: BulkEnergy,
    pub shift: f64,
}

impl EnergyModel {
    pub fn new(bulk: BulkEnergy, shift: f64) -> Result<Self> {
        if !(shift.is_finite() && shift > 0.0) {
            return Err(Error::InvalidParameter(format!("quadratization shift must be positive, got {shift}")));
        }
        match &bulk {
            BulkEnergy::DoubleWell => {}
            BulkEnergy::FloryHuggins { kbt_over_m, n1, n2, chi } => {
                if !(*kbt_over_m > 0.0 && *n1 > 0.0 && *n2 > 0.0 && chi.is_finite()) {
                    return Err(Error::InvalidParameter("Flory-Huggins needs kbt/m, N1, N2 > 0".into()));
                }
            }
            BulkEnergy::PengRobinson(pr) => pr.validate()?,
        }
        Ok(EnergyModel { bulk, shift })
    }

    /// Shift chosen as `1 + |min h|` over a 64x64 sample of the box
    /// `[lo1, hi1] x [lo2, hi2]` in mass densities; inadmissible samples are skipped.
    pub fn with_auto_shift(bulk: BulkEnergy, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let probe = EnergyModel::new(bulk, 1.0)?;
        let mut hmin = f64::INFINITY;
        for a in 0..64 {
            for b in 0..64 {
                let r1 = lo[0] + (hi[0] - lo[0]) * a as f64 / 63.0;
                let r2 = lo[1] + (hi[1] - lo[1]) * b as f64 / 63.0;
                if let Ok(h) = probe.h([r1, r2]) {
                    hmin = hmin.min(h);
                }
            }
        }
        if !hmin.is_finite() {
            return Err(Error::InvalidParameter("no admissible density in the shift sampling box".into()));
        }
        EnergyModel::new(bulk, 1.0 + hmin.abs())
    }

    /// Molar masses used to convert between mass and molar densities.
    pub fn molar_masses(&self) -> [f64; 2] {
        match &self.bulk {
            BulkEnergy::PengRobinson(pr) => [pr.components[0].molar_mass, pr.components[1].molar_mass],
            _ => [1.0, 1.0],
        }
    }

    pub fn to_molar(&self, rho: [f64; 2]) -> [f64; 2] {
        let m = self.molar_masses();
        [rho[0] / m[0], rho[1] / m[1]]
    }

    pub fn to_mass(&self, n: [f64; 2]) -> [f64; 2] {
        let m = self.molar_masses();
        [n[0] * m[0], n[1] * m[1]]
    }

    /// Bulk energy density `h(rho1, rho2)`.
    pub fn h(&self, rho: [f64; 2]) -> Result<f64> {
        check_finite(rho)?;
        let [r1, r2] = rho;
        match self.bulk {
            BulkEnergy::DoubleWell => Ok(r1 * r1 * (r1 - 1.0).powi(2) + r2 * r2 * (r2 - 1.0).powi(2)),
            BulkEnergy::FloryHuggins { kbt_over_m, n1, n2, chi } => {
                fh_domain(rho)?;
                let r = r1 + r2;
                let (p1, p2) = (r1 / r, r2 / r);
                Ok(kbt_over_m * (r1 / n1 * p1.ln() + r2 / n2 * p2.ln() + chi * r1 * r2 / r))
            }
            BulkEnergy::PengRobinson(pr) => pr.h_molar(self.to_molar(rho)),
        }
    }

    /// `(dh/drho1, dh/drho2)`.
    pub fn grad(&self, rho: [f64; 2]) -> Result<[f64; 2]> {
        check_finite(rho)?;
        let [r1, r2] = rho;
        match self.bulk {
            BulkEnergy::DoubleWell => {
                let d = |r: f64| 2.0 * r * (r - 1.0) * (2.0 * r - 1.0);
                Ok([d(r1), d(r2)])
            }
            BulkEnergy::FloryHuggins { kbt_over_m: c, n1, n2, chi } => {
                fh_domain(rho)?;
                let r = r1 + r2;
                let (p1, p2) = (r1 / r, r2 / r);
                Ok([
                    c * ((p1.ln() + 1.0 - p1) / n1 - p2 / n2 + chi * p2 * p2),
                    c * ((p2.ln() + 1.0 - p2) / n2 - p1 / n1 + chi * p1 * p1),
                ])
            }
            BulkEnergy::PengRobinson(pr) => {
                let m = self.molar_masses();
                let mu = pr.mu_molar(self.to_molar(rho))?;
                Ok([mu[0] / m[0], mu[1] / m[1]])
            }
        }
    }

    /// Hessian of `h` in mass densities.
    pub fn hessian(&self, rho: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        check_finite(rho)?;
        let [r1, r2] = rho;
        match self.bulk {
            BulkEnergy::DoubleWell => {
                let d = |r: f64| 12.0 * r * r - 12.0 * r + 2.0;
                Ok([[d(r1), 0.0], [0.0, d(r2)]])
            }
            BulkEnergy::FloryHuggins { kbt_over_m: c, n1, n2, chi } => {
                fh_domain(rho)?;
                let r = r1 + r2;
                let (p1, p2) = (r1 / r, r2 / r);
                let h11 = c * p2 / r * (p2 / (p1 * n1) + 1.0 / n2 - 2.0 * chi * p2);
                let h22 = c * p1 / r * (p1 / (p2 * n2) + 1.0 / n1 - 2.0 * chi * p1);
                let h12 = c / r * (-p2 / n1 - p1 / n2 + 2.0 * chi * p1 * p2);
                Ok([[h11, h12], [h12, h22]])
            }
            BulkEnergy::PengRobinson(pr) => {
                let m = self.molar_masses();
                let hn = pr.hess_molar(self.to_molar(rho))?;
                Ok([
                    [hn[0][0] / (m[0] * m[0]), hn[0][1] / (m[0] * m[1])],
                    [hn[1][0] / (m[1] * m[0]), hn[1][1] / (m[1] * m[1])],
                ])
            }
        }
    }

    /// `q = sqrt(h + A)` and `dq/drho_i = (dh/drho_i) / (2 q)`.
    pub fn eq_vars(&self, rho: [f64; 2]) -> Result<EqVars> {
        let h = self.h(rho)?;
        let s = h + self.shift;
        if !(s > 0.0) {
            return Err(Error::Domain(format!("h + A = {s} is not positive at rho = {rho:?}")));
        }
        let q = s.sqrt();
        let g = self.grad(rho)?;
        Ok(EqVars { q, dq: [g[0] / (2.0 * q), g[1] / (2.0 * q)] })
    }

    /// Tangent-plane-subtracted density in molar variables; for models
    /// without molar masses the molar and mass densities coincide.
    pub fn modified_h(&self, n: [f64; 2], mu0: [f64; 2]) -> Result<f64> {
        let h = self.h(self.to_mass(n))?;
        Ok(h - mu0[0] * n[0] - mu0[1] * n[1])
    }
}

/// Gradient-coefficient matrix conversion from molar to mass form:
/// `kappa_rho_ij = kappa_n_ij / (m_i m_j)`.
pub fn kappa_molar_to_mass(kappa_n: [f64; 3], m: [f64; 2]) -> [f64; 3] {
    [kappa_n[0] / (m[0] * m[0]), kappa_n[1] / (m[0] * m[1]), kappa_n[2] / (m[1] * m[1])]
}

fn check_finite(rho: [f64; 2]) -> Result<()> {
    if rho.iter().all(|r| r.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite density {rho:?}")))
    }
}

fn fh_domain(rho: [f64; 2]) -> Result<()> {
    if rho[0] > 0.0 && rho[1] > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Flory-Huggins needs positive densities, got {rho:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fh() -> EnergyModel {
        EnergyModel::new(BulkEnergy::FloryHuggins { kbt_over_m: 1.0, n1: 1.0, n2: 1.0, chi: 2.5 }, 1.0).unwrap()
    }

    pub(crate) fn decane_methane() -> PengRobinson {
        PengRobinson {
            r_gas: 1.4566,
            temperature: 1.2088,
            components: [
                Component { tc: 2.2626, pc: 1.3495, omega: 0.4884, molar_mass: 8.8688 },
                Component { tc: 0.6980, pc: 2.9513, omega: 0.01142, molar_mass: 1.0 },
            ],
            k12: 0.0,
            eps: 1e-6,
        }
    }

    #[test]
    fn double_well_values() {
        let m = EnergyModel::new(BulkEnergy::DoubleWell, 1.0).unwrap();
        assert_eq!(m.h([0.5, 0.5]).unwrap(), 0.125);
        assert_eq!(m.grad([0.5, 0.5]).unwrap(), [0.0, 0.0]);
        assert_eq!(m.hessian([0.5, 0.5]).unwrap(), [[-1.0, 0.0], [0.0, -1.0]]);
        let eq = m.eq_vars([0.5, 0.5]).unwrap();
        assert!((eq.q - 1.125_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flory_huggins_midpoint() {
        let m = fh();
        let h = m.h([0.5, 0.5]).unwrap();
        assert!((h - (0.5_f64.ln() + 0.625)).abs() < 1e-14);
        let hs = m.hessian([0.5, 0.5]).unwrap();
        // curvature along the exchange direction (1, -1)
        let s = hs[0][0] - 2.0 * hs[0][1] + hs[1][1];
        assert!((s + 1.0).abs() < 1e-13, "{s}");
    }

    #[test]
    fn flory_huggins_gradient_matches_difference_quotient() {
        let m = fh();
        let r = [0.3, 0.55];
        let g = m.grad(r).unwrap();
        for k in 0..2 {
            let e = 1e-6;
            let (mut p, mut q) = (r, r);
            p[k] += e;
            q[k] -= e;
            let fd = (m.h(p).unwrap() - m.h(q).unwrap()) / (2.0 * e);
            assert!((fd - g[k]).abs() < 1e-8, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn flory_huggins_rejects_nonpositive_density() {
        assert!(matches!(fh().h([0.0, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(fh().grad([-0.1, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn eq_vars_fail_when_shifted_energy_not_positive() {
        let m =
            EnergyModel::new(BulkEnergy::FloryHuggins { kbt_over_m: 1.0, n1: 1.0, n2: 1.0, chi: 2.5 }, 0.01).unwrap();
        assert!(matches!(m.eq_vars([0.5, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn peng_robinson_liquid_is_admissible() {
        let pr = decane_methane();
        let c = pr.mixture_coeffs([3.8146, 3.5132]).unwrap();
        let bn = c.b * (3.8146 + 3.5132);
        assert!(bn < 1.0 && bn > 0.8, "{bn}");
    }

    #[test]
    fn peng_robinson_rejects_overpacked_state() {
        let pr = decane_methane();
        assert!(matches!(pr.h_molar([10.0, 10.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn peng_robinson_chemical_potential_is_gradient() {
        let pr = decane_methane();
        for n in [[3.8146, 3.5132], [0.0265, 7.1339], [1.0, 4.0]] {
            let mu = pr.mu_molar(n).unwrap();
            for k in 0..2 {
                let e = 1e-6;
                let (mut p, mut q) = (n, n);
                p[k] += e;
                q[k] -= e;
                let fd = (pr.h_molar(p).unwrap() - pr.h_molar(q).unwrap()) / (2.0 * e);
                assert!((fd - mu[k]).abs() < 1e-6 * (1.0 + mu[k].abs()), "{n:?} {k}: {fd} vs {}", mu[k]);
            }
        }
    }

    #[test]
    fn regularised_ideal_part_is_c2_at_switch() {
        let pr = decane_methane();
        let e = pr.eps;
        let (lo, hi) = (pr.ideal(e * (1.0 - 1e-9)), pr.ideal(e * (1.0 + 1e-9)));
        assert!((lo.0 - hi.0).abs() < 1e-12);
        assert!((lo.1 - hi.1).abs() < 1e-6);
    }

    #[test]
    fn mass_and_molar_gradients_agree_by_chain_rule() {
        let pr = decane_methane();
        let m = EnergyModel::new(BulkEnergy::PengRobinson(pr), 1.0).unwrap();
        let n = [1.2, 5.0];
        let rho = m.to_mass(n);
        assert!((m.h(rho).unwrap() - pr.h_molar(n).unwrap()).abs() < 1e-13);
        let g = m.grad(rho).unwrap();
        let mu = pr.mu_molar(n).unwrap();
        assert!((g[0] * 8.8688 - mu[0]).abs() < 1e-12);
        assert!((g[1] - mu[1]).abs() < 1e-12);
    }

    #[test]
    fn common_tangent_equalises_modified_energy() {
        let pr = decane_methane();
        let (l, g) = pr.coexistence([3.8146, 3.5132], [0.0265, 7.1339]).unwrap();
        let mu0 = pr.mu_molar(l).unwrap();
        let (hl, hg) = (pr.modified_h(l, mu0).unwrap(), pr.modified_h(g, mu0).unwrap());
        assert!((hl - hg).abs() < 1e-9 * (1.0 + hl.abs()), "{hl} vs {hg}");
        // the shipped bulk states sit close to coexistence
        assert!((l[0] - 3.8146).abs() < 0.05 * 3.8146, "{l:?}");
    }
}
