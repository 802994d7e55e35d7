use crate::grid::{PolarizationParams, Section};

/// Electrode potential jump `DV = Vm - V` (metal minus electrolyte side) of
/// the linear polarization law, given the outward normal potential gradient
/// `grad_n = dV/dn` in V/m on the electrolyte side.
///
/// Anodic:   `DV =  eR - kA * sigma * grad_n`
/// Cathodic: `DV = -eR - kC * sigma * grad_n`
///
/// With current leaving an anode (`grad_n < 0`) the electrolyte sits
/// `eR + kA |J.n|` below the metal; with current entering a cathode it sits
/// `eR + kC |J.n|` above it. Both jumps oppose the current.
#[inline]
pub fn electrode_dv(section: Section, params: &PolarizationParams, conductivity: f64, grad_n: f64) -> f64 {
    match section {
        Section::Anodic => params.equilibrium - params.anodic_slope * conductivity * grad_n,
        Section::Cathodic => -params.equilibrium - params.cathodic_slope * conductivity * grad_n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_current_intercepts() {
        let p = PolarizationParams::new(0.5, 0.0, 0.0);
        assert_eq!(electrode_dv(Section::Anodic, &p, 50.0, 3.0), 0.5);
        assert_eq!(electrode_dv(Section::Cathodic, &p, 50.0, 3.0), -0.5);
    }

    #[test]
    fn cathodic_slope_term() {
        let p = PolarizationParams::new(0.5, 0.0, 0.1);
        // -0.5 - 0.1 * 50 * (-2)
        assert!((electrode_dv(Section::Cathodic, &p, 50.0, -2.0) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn ideal_electrode_has_no_jump() {
        let p = PolarizationParams::IDEAL;
        assert_eq!(electrode_dv(Section::Anodic, &p, 50.0, -7.0), 0.0);
        assert_eq!(electrode_dv(Section::Cathodic, &p, 50.0, 7.0), 0.0);
    }

    #[test]
    fn jumps_oppose_current() {
        let p = PolarizationParams::new(0.2, 0.01, 0.01);
        let sigma = 40.0;
        // anode emitting: gradient into electrolyte negative
        let dv_a = electrode_dv(Section::Anodic, &p, sigma, -5.0);
        assert!(dv_a > 0.2);
        // cathode receiving: gradient into electrolyte positive
        let dv_c = electrode_dv(Section::Cathodic, &p, sigma, 5.0);
        assert!(dv_c < -0.2);
    }
}
