//! Benchmark systems with their initial states and named observables.

use stt_core::linalg::c;
use stt_core::liouville::HilbertSystem;
use stt_core::models::{chain, pauli_x, pauli_y, pauli_z, ring_displacements, site_state, spin_boson};
use stt_core::propagator::check_density_matrix;
use stt_core::CMat;

use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct Model {
    pub system: HilbertSystem,
    pub rho0: CMat,
    /// Observables known by name; the first `defaults` are reported when the
    /// config does not choose.
    pub observables: Vec<(String, CMat)>,
    pub defaults: usize,
}

impl Model {
    /// Starts in the `σz = +1` state.
    pub fn spin_boson(omega: f64, epsilon: f64, alpha: f64) -> Self {
        let mut rho0 = CMat::zeros(2, 2);
        rho0[(0, 0)] = c(1.0, 0.0);
        let observables = vec![("sx".into(), pauli_x()), ("sy".into(), pauli_y()), ("sz".into(), pauli_z())];
        Self { system: spin_boson(omega, epsilon, alpha), rho0, observables, defaults: 3 }
    }

    /// Excitation on `site`; reports site populations `p<n>` (1-based) and
    /// the mean squared ring displacement `msd` from the starting site.
    pub fn chain(d: usize, epsilon: f64, omega: f64, alpha: f64, site: usize) -> Self {
        let mut observables = populations(d);
        let disp = ring_displacements(d);
        let mut msd = CMat::zeros(d, d);
        for n in 0..d {
            let r = disp[(n + d - site) % d];
            msd[(n, n)] = c(r * r, 0.0);
        }
        observables.push(("msd".into(), msd));
        Self { system: chain(d, epsilon, omega, alpha), rho0: site_state(d, site), observables, defaults: d + 1 }
    }

    pub fn custom(h0: CMat, v: CMat, rho0: Option<CMat>) -> Result<Self, CliError> {
        let d = h0.nrows();
        let system = HilbertSystem::new(h0, v)?;
        let rho0 = rho0.unwrap_or_else(|| site_state(d, 0));
        check_density_matrix(&rho0, d)?;
        Ok(Self { system, rho0, observables: populations(d), defaults: d })
    }

    /// Named observables in the requested order.
    pub fn select(&self, names: &[String]) -> Result<Vec<(String, CMat)>, CliError> {
        if names.is_empty() {
            return Ok(self.observables[..self.defaults].to_vec());
        }
        names
            .iter()
            .map(|n| {
                self.observables
                    .iter()
                    .find(|(m, _)| m == n)
                    .cloned()
                    .ok_or_else(|| CliError::Config(format!("unknown observable `{n}`")))
            })
            .collect()
    }
}

fn populations(d: usize) -> Vec<(String, CMat)> {
    (0..d).map(|n| (format!("p{}", n + 1), site_state(d, n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_msd_measures_distance_from_start() {
        let m = Model::chain(8, 1.0, 1.0, 0.5, 2);
        let msd = &m.select(&["msd".into()]).unwrap()[0].1;
        assert_eq!(msd[(2, 2)], c(0.0, 0.0));
        assert_eq!(msd[(3, 3)], c(1.0, 0.0));
        assert_eq!(msd[(6, 6)], c(16.0, 0.0));
        assert_eq!(msd[(7, 7)], c(9.0, 0.0));
        assert_eq!(m.rho0[(2, 2)], c(1.0, 0.0));
    }

    #[test]
    fn default_observables() {
        let sb = Model::spin_boson(1.0, 0.5, 0.75);
        let names: Vec<String> = sb.select(&[]).unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["sx", "sy", "sz"]);
        let ch = Model::chain(4, 1.0, 1.0, 0.5, 0);
        assert_eq!(ch.select(&[]).unwrap().len(), 5);
        assert!(sb.select(&["p1".into()]).is_err());
    }
}
