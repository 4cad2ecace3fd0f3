//! Published value ranges of the reference datasets, in the units the
//! datasets are distributed in. Used to flag suspicious rows at ingestion.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRange {
    pub name: &'static str,
    pub unit: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ReferenceRange {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

const fn r(
    name: &'static str,
    unit: &'static str,
    lo: f64,
    hi: f64,
    count: usize,
) -> ReferenceRange {
    ReferenceRange {
        name,
        unit,
        lo,
        hi,
        count,
    }
}

pub const RHO: ReferenceRange = r("rho", "g/cm^3", 0.770, 2.868, 1032);
pub const KAPPA: ReferenceRange = r("kappa", "W/(m K)", 0.013, 23.0, 110);
pub const C_P: ReferenceRange = r("c_p", "cal/(g C)", 0.085, 2.520, 243);
pub const ETA_C: ReferenceRange = r("eta_c", "J/(g K)", 20.291, 1527.251, 88);
pub const H_C: ReferenceRange = r("h_c", "kJ/g", 3.823, 46.528, 88);
pub const D_T: ReferenceRange = r("dT", "K", 46.093, 333.964, 88);
pub const T_P: ReferenceRange = r("T_p", "K", 386.285, 765.922, 88);
pub const EXP_T_IG: ReferenceRange = r("t_ig_s", "s", 1.0, 538.0, 45);
pub const EXP_PHRR: ReferenceRange = r("phrr_kw_m2", "kW/m^2", 19.0, 1761.0, 45);
pub const EXP_SEA: ReferenceRange = r("sea_m2_kg", "m^2/kg", 33.0, 1300.0, 38);
pub const SYN_T_IG: ReferenceRange = r("t_ig", "s", 20.2, 600.0, 3237);
pub const SYN_PHRR: ReferenceRange = r("phrr", "kW/m^2", 0.117, 1864.828, 3237);
