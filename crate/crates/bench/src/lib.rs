//! Fixtures shared by the benchmarks under `benches/`.

use stochalloc::{Pmf, PopulationModel};

/// Five equally weighted components with supports up to 4, 10, 16, 22 and 28.
pub fn five_component_population() -> PopulationModel {
    let comps = (0..5)
        .map(|c| {
            let k = 4 + 6 * c;
            let w: Vec<f64> = (0..=k).map(|j| 1.0 + ((j * 7 + c * 3) % 5) as f64).collect();
            let total: f64 = w.iter().sum();
            (
                0.2,
                Pmf::new(w.iter().map(|x| x / total).collect()).expect("normalized"),
            )
        })
        .collect();
    PopulationModel::new(comps).expect("weights sum to one")
}

/// `n` members cycling through the population's components.
pub fn frontier(p: &PopulationModel, n: usize) -> Vec<Pmf> {
    let comps = p.components();
    (0..n).map(|i| comps[i % comps.len()].pmf.clone()).collect()
}
