#![allow(dead_code)]

use cocycle_lab::arithmetic::{cf_expand, AlphaInput, Frequency};
use cocycle_lab::trigmat::{CocycleSpec, Group, Symmetry, TrigMatrixMap};

pub fn golden() -> Frequency {
    cf_expand(&AlphaInput::golden(), 30).unwrap()
}

pub fn spec(map: TrigMatrixMap, group: Group) -> CocycleSpec {
    CocycleSpec::new(golden(), map, group, Symmetry::None).unwrap()
}

/// `S(x + alpha) B(x) S(x)^{-1}`, brought back to period 1.
pub fn conjugated(s: &TrigMatrixMap, b: &TrigMatrixMap, group: Group) -> CocycleSpec {
    let freq = golden();
    let inv = match group {
        Group::HSp(_) => s.hsp_inverse(),
        Group::SL2R | Group::SL2C => s.sl2_inverse().unwrap(),
        _ => s.symplectic_inverse(),
    };
    let b = if s.period() == 2 { b.to_period2() } else { b.clone() };
    let mut a = s
        .shift(freq.value())
        .mul(&b)
        .unwrap()
        .mul(&inv)
        .unwrap()
        .to_period1(1e-9)
        .unwrap()
        .truncate(1e-15);
    if !matches!(group, Group::HSp(_) | Group::SL2C) {
        a.enforce_real();
    }
    CocycleSpec::new(freq, a, group, Symmetry::None).unwrap()
}
