//! The restricted likelihood is evaluated from cached cross-products, so its
//! cost depends on K and L only.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use svcscale::eigenbasis::{default_connectivity, moran_eigenbasis, EigenBasis};
use svcscale::reesf::{restricted_loglik, ReEsfSystem};
use svcscale::simulation::{stream, Purpose};
use svcscale::{Geometry, SpatialDataset};

const L: usize = 20;

fn system(n: usize) -> ReEsfSystem {
    let mut rng = stream(31, n as u64, 0, Purpose::Design);
    let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
    let x = DMatrix::from_fn(n, 2, |_, _| rng.sample(StandardNormal));
    let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    let data = SpatialDataset::with_intercept(coords, &x, y).unwrap();
    let full = moran_eigenbasis(&default_connectivity(&Geometry::new(data.coords()).unwrap()).unwrap()).unwrap();
    let basis = EigenBasis {
        vectors: full.vectors.columns(0, L).into_owned(),
        values: full.values.rows(0, L).into_owned(),
        connectivity_sum: full.connectivity_sum,
        spectrum: full.spectrum.clone(),
    };
    ReEsfSystem::new(&data, &basis).unwrap()
}

/// Fastest of several batches, in seconds per evaluation.
fn cost(sys: &ReEsfSystem) -> f64 {
    let d = sys.shrinkage(&[1.0; 3], &[0.5; 3]).unwrap();
    let per_batch = 200;
    (0..15)
        .map(|_| {
            let start = Instant::now();
            let mut acc = 0.0;
            for _ in 0..per_batch {
                acc += restricted_loglik(sys, &d).unwrap();
            }
            assert!(acc.is_finite());
            start.elapsed().as_secs_f64() / per_batch as f64
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn evaluation_cost_does_not_grow_with_n() {
    let small = system(200);
    let large = system(800);
    assert_eq!(small.l(), large.l());
    let (t_small, t_large) = (cost(&small), cost(&large));
    let ratio = t_large / t_small;
    assert!((0.8..=1.2).contains(&ratio), "N=800 / N=200 cost ratio {ratio} ({t_large:e} s vs {t_small:e} s)");
}
