//! Shared fixtures for the criterion benchmarks.

use solitons::{resolve_preset, Locus, PhaseState, Preset, PresetName, ShootSpec, TwoSummandsParams};

/// Steady soliton on the quaternionic Hopf preset with `m = 1`.
pub fn steady_hp() -> TwoSummandsParams {
    resolve_preset(Preset { name: PresetName::Hp, m: 1 }).expect("preset exists").with_c(-1.0)
}

pub fn steady_seed(p: &TwoSummandsParams) -> PhaseState {
    solitons::seed_unstable(p, &ShootSpec::new(vec![1.0, 1.0], Locus::Soliton)).expect("seed on the soliton locus")
}
