//! Hartree atomic units and the conversions used at I/O boundaries.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, TAU};

/// 1 hartree in eV.
pub const HARTREE_EV: f64 = 27.2114;
/// 1 atomic unit of time in fs.
pub const AU_TIME_FS: f64 = 0.0241888;
/// 1 atomic unit of electric field in V/m.
pub const AU_FIELD_V_PER_M: f64 = 5.142_206_747_63e11;
/// 1 atomic unit of electric field in MV/cm.
pub const AU_FIELD_MV_PER_CM: f64 = AU_FIELD_V_PER_M * 1e-8;

pub fn ev_to_au(ev: f64) -> f64 {
    ev / HARTREE_EV
}

pub fn au_to_ev(au: f64) -> f64 {
    au * HARTREE_EV
}

pub fn fs_to_au(fs: f64) -> f64 {
    fs / AU_TIME_FS
}

pub fn au_to_fs(au: f64) -> f64 {
    au * AU_TIME_FS
}

/// Cyclic frequency in THz to angular frequency in a.u.
pub fn thz_to_au(thz: f64) -> f64 {
    TAU * thz * 1e12 * AU_TIME_FS * 1e-15
}

/// Angular frequency in a.u. to cyclic frequency in THz.
pub fn au_to_thz(omega: f64) -> f64 {
    omega / (TAU * AU_TIME_FS * 1e-3)
}

pub fn mv_per_cm_to_au(field: f64) -> f64 {
    field / AU_FIELD_MV_PER_CM
}

pub fn au_to_mv_per_cm(field: f64) -> f64 {
    field * AU_FIELD_MV_PER_CM
}

/// Standard deviation of a Gaussian field envelope from its FWHM.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

pub fn sigma_to_fwhm(sigma: f64) -> f64 {
    sigma * 2.0 * (2.0 * LN_2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "eV")]
    ElectronVolt,
    #[serde(rename = "au")]
    Hartree,
}

impl EnergyUnit {
    pub fn to_au(self, x: f64) -> f64 {
        match self {
            EnergyUnit::ElectronVolt => ev_to_au(x),
            EnergyUnit::Hartree => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    #[serde(rename = "fs")]
    Femtosecond,
    #[serde(rename = "au")]
    Atomic,
}

impl TimeUnit {
    pub fn to_au(self, x: f64) -> f64 {
        match self {
            TimeUnit::Femtosecond => fs_to_au(x),
            TimeUnit::Atomic => x,
        }
    }
}

/// Frequency units: cyclic THz, or angular frequency in a.u.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    #[serde(rename = "THz")]
    Terahertz,
    #[serde(rename = "au")]
    Atomic,
}

impl FrequencyUnit {
    pub fn to_au(self, x: f64) -> f64 {
        match self {
            FrequencyUnit::Terahertz => thz_to_au(x),
            FrequencyUnit::Atomic => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldUnit {
    #[serde(rename = "au")]
    Atomic,
    #[serde(rename = "MV/cm")]
    MegavoltPerCm,
}

impl FieldUnit {
    pub fn to_au(self, x: f64) -> f64 {
        match self {
            FieldUnit::Atomic => x,
            FieldUnit::MegavoltPerCm => mv_per_cm_to_au(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hydrogen_like_ground_state() {
        // 13.6 eV is quoted as 0.5 a.u.; with 27.2114 eV/hartree it is 0.49979.
        assert!((ev_to_au(13.6) - 0.499_790_5).abs() < 1e-6);
        assert!((ev_to_au(13.6) - 0.5).abs() < 5e-4);
        assert_eq!(ev_to_au(0.0), 0.0);
        assert!((ev_to_au(27.2114) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn paper_probe_parameters() {
        // 5 fs field FWHM
        assert!((fwhm_to_sigma(fs_to_au(5.0)) - 87.78).abs() < 0.01);
        // 4 THz carrier
        assert!((thz_to_au(4.0) - 6.0793e-4).abs() < 1e-7);
        // 0.001 a.u. is roughly 5 MV/cm
        assert!((au_to_mv_per_cm(0.001) - 5.142).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn conversions_round_trip(x in -1e6f64..1e6) {
            let tol = 1e-12 * x.abs().max(1e-300);
            prop_assert!((au_to_ev(ev_to_au(x)) - x).abs() <= tol);
            prop_assert!((au_to_fs(fs_to_au(x)) - x).abs() <= tol);
            prop_assert!((au_to_thz(thz_to_au(x)) - x).abs() <= tol);
            prop_assert!((au_to_mv_per_cm(mv_per_cm_to_au(x)) - x).abs() <= tol);
            prop_assert!((sigma_to_fwhm(fwhm_to_sigma(x)) - x).abs() <= tol);
        }
    }
}
