//! Algorithmic core of the polytrinity pipeline.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (only `alloc` is required). File formats, the CLI and
//! dataset ingestion live in the `polytrinity` companion crate.
//!
//! Modules, in pipeline order:
//!
//! * [`chemio`]: polymer SMILES parsing, canonicalization, fingerprints and
//!   repeat-unit assembly.
//! * [`groups`]: molar-group tables and the group-contribution estimator.
//! * [`polygen`]: enumeration of hypothetical polymers from divalent groups.
//! * [`forest`]: CART regression trees and random forests.
//! * [`rompyro`]: reduced-order cone-calorimeter simulator.
//! * [`uqpcm`]: Gauss-Hermite / Smolyak collocation for uncertainty propagation.
//! * [`twophase`]: MLP regressors/classifiers and the pretrain/finetune protocol.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod chemio;
pub mod forest;
pub mod groups;
pub mod polygen;
pub mod reference;
pub mod rng;
pub mod rompyro;
pub mod twophase;
pub mod uqpcm;

mod math;
