use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::MolecularGraph;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_N_BITS: usize = 2048;

/// Count-based circular fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub counts: Vec<u32>,
    pub radius: u32,
}

impl Fingerprint {
    pub fn n_bits(&self) -> usize {
        self.counts.len()
    }

    /// `ln(1 + count)` per bin, the feature scaling used by the learners.
    pub fn log_features(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| libm::log1p(c as f64)).collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix(mut h: u64, word: u64) -> u64 {
    for byte in word.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Morgan-like environment hashing.
///
/// Radius 0 hashes the atom alone (element, charge, aromatic flag). Each
/// further layer hashes the previous identifier together with degree,
/// hydrogen count and the sorted (bond order, neighbor identifier) list.
/// Every identifier of every layer increments one bin.
///
/// # Panics
/// If `n_bits < 16`.
pub fn fingerprint(graph: &MolecularGraph, radius: u32, n_bits: usize) -> Fingerprint {
    assert!(n_bits >= 16, "fingerprint needs at least 16 bins");
    let n = graph.atom_count();
    let mut counts = alloc::vec![0u32; n_bits];
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = graph.atom(i);
            let mut h = mix(FNV_OFFSET, 0);
            h = mix(h, a.element.0 as u64);
            h = mix(h, a.charge as i64 as u64);
            mix(h, a.aromatic as u64)
        })
        .collect();
    for &id in &ids {
        counts[(crate::rng::splitmix64(id) % n_bits as u64) as usize] += 1;
    }
    for layer in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|u| {
                let mut env: Vec<(u8, u64)> = graph
                    .neighbors(u)
                    .iter()
                    .map(|&(v, bi)| (graph.bonds()[bi].order.code(), ids[v]))
                    .collect();
                env.sort_unstable();
                let mut h = mix(FNV_OFFSET, layer as u64);
                h = mix(h, ids[u]);
                h = mix(h, graph.degree(u) as u64);
                h = mix(h, graph.atom(u).h_count as u64);
                for (order, id) in env {
                    h = mix(h, order as u64);
                    h = mix(h, id);
                }
                h
            })
            .collect();
        ids = next;
        for &id in &ids {
            counts[(crate::rng::splitmix64(id) % n_bits as u64) as usize] += 1;
        }
    }
    Fingerprint { counts, radius }
}
