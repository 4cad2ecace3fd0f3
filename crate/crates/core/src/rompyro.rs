//! Reduced-order cone calorimeter.
//!
//! A slab heated on its front face by a constant external flux, modeled as
//! 1D transient conduction on a vertex-centered grid (half-volume end nodes)
//! with backward-Euler time stepping. The quartic reradiation loss is
//! linearized about the previous surface temperature, so each step is one
//! tridiagonal solve. Fuel in every node decomposes by a single first-order
//! Arrhenius reaction integrated exactly over the step at the new
//! temperature. Once the fuel mass flux reaches the ignition criterion a
//! flame flux is added to the front face.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{exp, ln, powi, KahanSum};
use crate::polygen::{ConeLabels, PolymerRecord};

pub const GAS_CONSTANT: f64 = 8.314;
pub const STEFAN_BOLTZMANN: f64 = 5.670_374_419e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("numerical instability at step {step}: {what}")]
    NumericalInstability { step: usize, what: String },
}

fn domain(msg: impl Into<String>) -> SimError {
    SimError::DomainError(msg.into())
}

/// The seven solver inputs, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialInput {
    /// kg/m³
    pub rho: f64,
    /// W/(m·K)
    pub kappa: f64,
    /// J/(kg·K)
    pub c_p: f64,
    /// J/kg
    pub h_c: f64,
    /// Char (non-volatile) mass fraction.
    pub mu: f64,
    #[serde(rename = "dT")]
    pub d_t: f64,
    #[serde(rename = "T_p")]
    pub t_p: f64,
}

impl MaterialInput {
    /// `mu == 1` is allowed here and means an inert solid.
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("c_p", self.c_p),
            ("h_c", self.h_c),
            ("dT", self.d_t),
            ("T_p", self.t_p),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(alloc::format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(domain(alloc::format!(
                "mu must lie in [0, 1], got {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// Builds solver inputs from a labeled record. Group-contribution h_c is
    /// in kJ/g and converted here.
    pub fn from_record(rec: &PolymerRecord) -> Result<Self, SimError> {
        let th = rec
            .thermophysical
            .ok_or_else(|| domain("missing thermophysical properties"))?;
        let gc = rec
            .gc
            .ok_or_else(|| domain("missing group-contribution properties"))?;
        let d_t = rec.d_t.ok_or_else(|| domain("missing dT"))?;
        let t_p = rec.t_p.ok_or_else(|| domain("missing T_p"))?;
        Ok(MaterialInput {
            rho: th.rho,
            kappa: th.kappa,
            c_p: th.c_p,
            h_c: gc.h_c * 1e6,
            mu: gc.mu,
            d_t,
            t_p,
        })
    }
}

/// First-order Arrhenius parameters. `ln_a` is kept because `a` overflows
/// for very narrow pyrolysis ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinetics {
    /// 1/s
    pub a: f64,
    pub ln_a: f64,
    /// J/mol
    pub e: f64,
}

impl Kinetics {
    /// Rate constant in 1/s at temperature `t`.
    pub fn rate(&self, t: f64) -> f64 {
        exp(self.ln_a - self.e / (GAS_CONSTANT * t))
    }
}

/// Reference-temperature conversion from (T_p, dT, mu) to (A, E).
pub fn derive_kinetics(
    t_p: f64,
    d_t: f64,
    mu: f64,
    heating_rate: f64,
) -> Result<Kinetics, SimError> {
    if !(t_p > 0.0 && d_t > 0.0 && heating_rate > 0.0) || !t_p.is_finite() || !d_t.is_finite() {
        return Err(domain("T_p, dT and heating rate must be positive"));
    }
    if !(0.0..1.0).contains(&mu) {
        return Err(domain(alloc::format!("mu must lie in [0, 1), got {mu}")));
    }
    let r_p = 2.0 * heating_rate * (1.0 - mu) / d_t;
    let e_const = core::f64::consts::E;
    let e = e_const * r_p * GAS_CONSTANT * t_p * t_p / heating_rate;
    let ln_a = ln(e_const * r_p) + e / (GAS_CONSTANT * t_p);
    Ok(Kinetics {
        a: exp(ln_a),
        ln_a,
        e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IgnitionCriterion {
    /// kg/(m²·s)
    CriticalMassFlux { m_crit: f64 },
    /// K
    CriticalSurfaceTemperature { t_crit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackBoundary {
    Adiabatic,
    /// Convective loss to ambient, W/(m²·K).
    Convective {
        h: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// W/m²
    pub q_ext: f64,
    /// Added after ignition, W/m².
    pub q_flame: f64,
    pub t_max: f64,
    /// m
    pub thickness: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub emissivity: f64,
    pub h_conv: f64,
    #[serde(rename = "T_amb")]
    pub t_amb: f64,
    /// K/s, used to derive kinetics.
    pub heating_rate_ref: f64,
    pub ignition: IgnitionCriterion,
    pub back: BackBoundary,
    /// Endothermic heat of pyrolysis, J/kg of volatiles.
    pub heat_of_pyrolysis: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            q_ext: 50_000.0,
            q_flame: 25_000.0,
            t_max: 600.0,
            thickness: 0.006,
            n_cells: 60,
            dt: 0.05,
            emissivity: 0.95,
            h_conv: 10.0,
            t_amb: 293.15,
            heating_rate_ref: 5.0 / 60.0,
            ignition: IgnitionCriterion::CriticalMassFlux { m_crit: 0.0025 },
            back: BackBoundary::Adiabatic,
            heat_of_pyrolysis: 1.0e6,
        }
    }
}

/// Largest accepted time step, s.
pub const MAX_DT: f64 = 1.0;

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let nonneg = [
            ("q_ext", self.q_ext),
            ("q_flame", self.q_flame),
            ("h_conv", self.h_conv),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(alloc::format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        let pos = [
            ("t_max", self.t_max),
            ("thickness", self.thickness),
            ("dt", self.dt),
            ("emissivity", self.emissivity),
            ("T_amb", self.t_amb),
            ("heating_rate_ref", self.heating_rate_ref),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        if self.emissivity > 1.0 {
            return Err(domain("emissivity must not exceed 1"));
        }
        if self.n_cells < 10 {
            return Err(domain(alloc::format!(
                "n_cells must be at least 10, got {}",
                self.n_cells
            )));
        }
        if self.dt > MAX_DT || self.dt > self.t_max {
            return Err(domain(alloc::format!(
                "dt = {} exceeds min(t_max, {MAX_DT}) s",
                self.dt
            )));
        }
        if !(self.heat_of_pyrolysis.is_finite() && self.heat_of_pyrolysis >= 0.0) {
            return Err(domain("heat_of_pyrolysis must be non-negative"));
        }
        match self.ignition {
            IgnitionCriterion::CriticalMassFlux { m_crit: v }
            | IgnitionCriterion::CriticalSurfaceTemperature { t_crit: v }
                if !(v.is_finite() && v > 0.0) =>
            {
                return Err(domain("ignition threshold must be positive"));
            }
            _ => {}
        }
        if let BackBoundary::Convective { h } = self.back {
            if !(h.is_finite() && h >= 0.0) {
                return Err(domain("back-face h must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeResult {
    /// Ignition time, or `t_max` if the sample never ignited.
    pub t_ig: f64,
    pub ignited: bool,
    /// HRR in kW/m² at the end of each step; step k ends at `(k + 1) * dt`.
    pub hrr: Vec<f64>,
    pub dt: f64,
    pub phrr: f64,
    pub residual_mass_fraction: f64,
    /// kg/m²
    pub initial_mass: f64,
    pub residual_mass: f64,
    pub volatilized_mass: f64,
}

impl ConeResult {
    pub fn labels(&self, t_max: f64) -> ConeLabels {
        ConeLabels {
            t_ig: self.t_ig,
            phrr: self.phrr,
            ignitable: self.t_ig < t_max,
        }
    }

    /// Relative mass-balance error of the run.
    pub fn mass_balance_error(&self) -> f64 {
        if self.initial_mass == 0.0 {
            return 0.0;
        }
        crate::math::abs(self.initial_mass - self.residual_mass - self.volatilized_mass)
            / self.initial_mass
    }
}

/// Time-stepping state of one cone run.
#[derive(Debug, Clone)]
pub struct ConeSim {
    mat: MaterialInput,
    cfg: SimConfig,
    kinetics: Option<Kinetics>,
    dx: f64,
    weights: Vec<f64>,
    temperature: Vec<f64>,
    fuel: Vec<f64>,
    // volatiles released per unit volume over the last step, kg/(m³·s);
    // drives the lagged pyrolysis heat sink
    release: Vec<f64>,
    step: usize,
    ignited: bool,
    t_ig: Option<f64>,
    mass_flux: f64,
    volatilized: KahanSum,
    // tridiagonal scratch
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl ConeSim {
    pub fn new(mat: MaterialInput, cfg: SimConfig) -> Result<Self, SimError> {
        mat.validate()?;
        cfg.validate()?;
        let kinetics = if mat.mu < 1.0 {
            Some(derive_kinetics(
                mat.t_p,
                mat.d_t,
                mat.mu,
                cfg.heating_rate_ref,
            )?)
        } else {
            None
        };
        let n = cfg.n_cells + 1;
        let dx = cfg.thickness / cfg.n_cells as f64;
        let mut weights = alloc::vec![dx; n];
        weights[0] = dx / 2.0;
        weights[n - 1] = dx / 2.0;
        Ok(ConeSim {
            mat,
            cfg,
            kinetics,
            dx,
            weights,
            temperature: alloc::vec![cfg.t_amb; n],
            fuel: alloc::vec![1.0; n],
            release: alloc::vec![0.0; n],
            step: 0,
            ignited: false,
            t_ig: None,
            mass_flux: 0.0,
            volatilized: KahanSum::default(),
            lower: alloc::vec![0.0; n],
            diag: alloc::vec![0.0; n],
            upper: alloc::vec![0.0; n],
            rhs: alloc::vec![0.0; n],
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Total steps in a full run.
    pub fn total_steps(&self) -> usize {
        libm::round(self.cfg.t_max / self.cfg.dt) as usize
    }

    pub fn temperature(&self) -> &[f64] {
        &self.temperature
    }

    pub fn surface_temperature(&self) -> f64 {
        self.temperature[0]
    }

    /// Remaining fuel fraction per node.
    pub fn fuel(&self) -> &[f64] {
        &self.fuel
    }

    pub fn kinetics(&self) -> Option<Kinetics> {
        self.kinetics
    }

    pub fn ignited(&self) -> bool {
        self.ignited
    }

    pub fn ignition_time(&self) -> Option<f64> {
        self.t_ig
    }

    /// Fuel mass flux over the last step, kg/(m²·s).
    pub fn mass_flux(&self) -> f64 {
        self.mass_flux
    }

    /// HRR over the last step, kW/m².
    pub fn hrr(&self) -> f64 {
        self.mat.h_c * self.mass_flux / 1000.0
    }

    pub fn initial_mass(&self) -> f64 {
        self.mat.rho * self.cfg.thickness
    }

    pub fn residual_mass(&self) -> f64 {
        let mut s = KahanSum::default();
        for (w, y) in self.weights.iter().zip(&self.fuel) {
            s.add(w * self.mat.rho * (self.mat.mu + (1.0 - self.mat.mu) * y));
        }
        s.value()
    }

    pub fn volatilized_mass(&self) -> f64 {
        self.volatilized.value()
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let cfg = &self.cfg;
        let mat = &self.mat;
        let n = self.temperature.len();
        let dt = cfg.dt;
        let a = mat.kappa / self.dx;
        let cap = mat.rho * mat.c_p * self.dx / dt;
        let fuel_density = mat.rho * (1.0 - mat.mu);
        let eps_sigma = cfg.emissivity * STEFAN_BOLTZMANN;
        let q_in = cfg.emissivity * (cfg.q_ext + if self.ignited { cfg.q_flame } else { 0.0 });

        for i in 0..n {
            let c = cap * self.weights[i] / self.dx;
            let sink = cfg.heat_of_pyrolysis * self.release[i] * self.weights[i];
            self.lower[i] = if i > 0 { -a } else { 0.0 };
            self.upper[i] = if i + 1 < n { -a } else { 0.0 };
            self.diag[i] = c + if i > 0 { a } else { 0.0 } + if i + 1 < n { a } else { 0.0 };
            self.rhs[i] = c * self.temperature[i] - sink;
        }
        let ts = self.temperature[0];
        let ts3 = powi(ts, 3);
        self.diag[0] += 4.0 * eps_sigma * ts3 + cfg.h_conv;
        self.rhs[0] +=
            q_in + eps_sigma * (3.0 * ts3 * ts + powi(cfg.t_amb, 4)) + cfg.h_conv * cfg.t_amb;
        if let BackBoundary::Convective { h } = cfg.back {
            self.diag[n - 1] += h;
            self.rhs[n - 1] += h * cfg.t_amb;
        }
        solve_tridiagonal(&self.lower, &mut self.diag, &self.upper, &mut self.rhs);
        for (i, &t) in self.rhs.iter().enumerate() {
            if !t.is_finite() || t <= 0.0 {
                return Err(SimError::NumericalInstability {
                    step: self.step,
                    what: alloc::format!("temperature {t} at node {i}"),
                });
            }
        }
        self.temperature.copy_from_slice(&self.rhs);

        let mut lost = KahanSum::default();
        if let Some(k) = self.kinetics {
            for i in 0..n {
                let r = k.rate(self.temperature[i]);
                let y_old = self.fuel[i];
                let y_new = y_old * exp(-r * dt);
                self.fuel[i] = y_new;
                self.release[i] = fuel_density * (y_old - y_new) / dt;
                lost.add(self.weights[i] * fuel_density * (y_old - y_new));
            }
        }
        let lost = lost.value();
        self.volatilized.add(lost);
        self.mass_flux = lost / dt;
        self.step += 1;

        if !self.ignited {
            let hit = match self.cfg.ignition {
                IgnitionCriterion::CriticalMassFlux { m_crit } => self.mass_flux >= m_crit,
                IgnitionCriterion::CriticalSurfaceTemperature { t_crit } => {
                    self.temperature[0] >= t_crit && self.mass_flux > 0.0
                }
            };
            let t = self.time();
            if hit && t < self.cfg.t_max {
                self.ignited = true;
                self.t_ig = Some(t);
            }
        }
        Ok(())
    }

    /// Runs the remaining steps and summarizes the run.
    pub fn run(mut self) -> Result<ConeResult, SimError> {
        let total = self.total_steps();
        let mut hrr = Vec::with_capacity(total.saturating_sub(self.step));
        while self.step < total {
            self.step()?;
            hrr.push(self.hrr());
        }
        let phrr = hrr.iter().copied().fold(0.0, f64::max);
        let initial_mass = self.initial_mass();
        let residual_mass = self.residual_mass();
        Ok(ConeResult {
            t_ig: self.t_ig.unwrap_or(self.cfg.t_max),
            ignited: self.ignited,
            hrr,
            dt: self.cfg.dt,
            phrr,
            residual_mass_fraction: residual_mass / initial_mass,
            initial_mass,
            residual_mass,
            volatilized_mass: self.volatilized_mass(),
        })
    }
}

/// Thomas algorithm; the solution overwrites `rhs`.
fn solve_tridiagonal(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

pub fn simulate_cone(mat: &MaterialInput, cfg: &SimConfig) -> Result<ConeResult, SimError> {
    ConeSim::new(*mat, *cfg)?.run()
}

/// Surface temperature at which absorbed flux balances reradiation and
/// convection (no reaction, adiabatic back), by bisection.
pub fn steady_surface_temperature(cfg: &SimConfig, q: f64) -> f64 {
    let bal = |t: f64| {
        cfg.emissivity * q
            - cfg.emissivity * STEFAN_BOLTZMANN * (powi(t, 4) - powi(cfg.t_amb, 4))
            - cfg.h_conv * (t - cfg.t_amb)
    };
    let (mut lo, mut hi) = (cfg.t_amb, cfg.t_amb + 1.0);
    while bal(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bal(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn label_record(mut rec: PolymerRecord, cfg: &SimConfig) -> PolymerRecord {
    match MaterialInput::from_record(&rec).and_then(|m| simulate_cone(&m, cfg)) {
        Ok(res) => {
            rec.labels = Some(res.labels(cfg.t_max));
            rec.error = None;
        }
        Err(e) => {
            rec.labels = None;
            rec.error = Some(alloc::format!("{e}"));
        }
    }
    rec
}

/// Simulates every record, filling labels or the per-record error. Order is
/// preserved.
pub fn batch_simulate(records: Vec<PolymerRecord>, cfg: &SimConfig) -> Vec<PolymerRecord> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        records
            .into_par_iter()
            .map(|r| label_record(r, cfg))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        records.into_iter().map(|r| label_record(r, cfg)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pe_like() -> MaterialInput {
        MaterialInput {
            rho: 940.0,
            kappa: 0.4,
            c_p: 2150.0,
            h_c: 43.6e6,
            mu: 0.0,
            d_t: 80.0,
            t_p: 750.0,
        }
    }

    #[test]
    fn kinetics_scaling() {
        let k1 = derive_kinetics(700.0, 80.0, 0.1, 1.0 / 12.0).unwrap();
        let k2 = derive_kinetics(700.0, 160.0, 0.1, 1.0 / 12.0).unwrap();
        assert!((k1.e / k2.e - 2.0).abs() < 1e-12);
        assert!(derive_kinetics(700.0, 0.0, 0.1, 1.0).is_err());
        assert!(derive_kinetics(700.0, 80.0, 1.0, 1.0).is_err());
        // huge E stays finite in log space
        let k = derive_kinetics(700.0, 0.5, 0.0, 1.0 / 12.0).unwrap();
        assert!(k.ln_a.is_finite());
        assert!(k.rate(700.0).is_finite());
    }

    #[test]
    fn inert_never_ignites() {
        let mut m = pe_like();
        m.mu = 1.0;
        let r = simulate_cone(&m, &SimConfig::default()).unwrap();
        assert!(!r.ignited);
        assert_eq!(r.t_ig, 600.0);
        assert_eq!(r.phrr, 0.0);
    }

    #[test]
    fn zero_flux_is_equilibrium() {
        let cfg = SimConfig {
            q_ext: 0.0,
            t_max: 50.0,
            ..Default::default()
        };
        let mut sim = ConeSim::new(pe_like(), cfg).unwrap();
        for _ in 0..1000 {
            sim.step().unwrap();
        }
        for &t in sim.temperature() {
            assert!((t - cfg.t_amb).abs() < 1e-9);
        }
        assert_eq!(sim.hrr(), 0.0);
    }

    #[test]
    fn pe_like_ignites() {
        let r = simulate_cone(&pe_like(), &SimConfig::default()).unwrap();
        assert!(r.ignited);
        assert!(r.t_ig < 600.0);
        assert!(r.mass_balance_error() < 1e-8);
    }

    #[test]
    fn bad_inputs() {
        let mut m = pe_like();
        m.mu = 1.2;
        assert!(matches!(
            simulate_cone(&m, &SimConfig::default()),
            Err(SimError::DomainError(_))
        ));
        let cfg = SimConfig {
            n_cells: 5,
            ..Default::default()
        };
        assert!(simulate_cone(&pe_like(), &cfg).is_err());
    }

    #[test]
    fn tridiagonal_small() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let lower = [0.0, -1.0, -1.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut diag = [2.0, 2.0, 2.0];
        let mut rhs = [1.0, 0.0, 1.0];
        solve_tridiagonal(&lower, &mut diag, &upper, &mut rhs);
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }
}
