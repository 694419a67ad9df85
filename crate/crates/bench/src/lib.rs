//! Fixtures for the benchmarks in `benches/`.

use murp::{Curvature, GeometryKind, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn poincare() -> GeometryKind {
    GeometryKind::Poincare(Curvature::new(1.0).expect("c = 1"))
}

/// A model with spread-out parameters, closer to a trained one than a fresh init.
pub fn spread_model(
    geometry: GeometryKind,
    n_entities: usize,
    n_relations: usize,
    dim: usize,
    seed: u64,
) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::init(
        geometry,
        n_entities,
        n_relations,
        dim,
        0.3 / (dim as f64).sqrt(),
        &mut rng,
    );
    for v in p.rel_diag.iter_mut() {
        *v = rng.gen_range(0.5..1.5);
    }
    for b in p.bias_subject.iter_mut().chain(p.bias_object.iter_mut()) {
        *b = rng.gen_range(-1.0..1.0);
    }
    p
}

/// Points well inside the unit ball.
pub fn ball_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.gen_range(-0.5..0.5) / (dim as f64).sqrt())
                .collect()
        })
        .collect()
}
