//! Fixtures shared by the benchmarks.

use iphsem_core::scaling::{FamilyKind, ScalingFamily};
use iphsem_core::study::simulate_panel;
use iphsem_core::{InitialDistribution, PanelObservationSet, SubIntensityMatrix, TimeScaledModel};

/// Three-state matrix-Gompertz model.
pub fn gompertz_model() -> TimeScaledModel {
    TimeScaledModel::new(
        ScalingFamily::new(FamilyKind::Gompertz, 0.1019).unwrap(),
        InitialDistribution::new(vec![0.0451, 0.1303, 0.8246]).unwrap(),
        SubIntensityMatrix::from_rows(&[
            vec![-0.1357, 0.1214, 0.0],
            vec![0.0130, -0.0421, 0.0288],
            vec![0.1415, 0.0184, -0.1620],
        ])
        .unwrap(),
    )
    .unwrap()
}

/// `k` Gompertz paths observed yearly up to 60.
pub fn gompertz_panel(k: usize, seed: u64) -> PanelObservationSet {
    let grid: Vec<f64> = (0..=60).map(f64::from).collect();
    simulate_panel(&gompertz_model(), k, &grid, seed).unwrap()
}
