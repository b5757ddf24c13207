//! Seeded random Gaussian-mixture densities for property checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gaussian::Gaussian;
use crate::grid::{Axis, GridDensity};

/// Grid half-width shared by every corpus member.
pub const HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub gaussian: Gaussian,
}

/// One Gaussian with mean in [-3, 3] per axis, standard deviations in
/// [0.3, 2] and correlations within ±0.45, which keeps the covariance
/// positive definite for up to three axes.
pub fn random_gaussian<R: Rng>(rng: &mut R, dims: usize) -> Gaussian {
    let mean: Vec<f64> = (0..dims).map(|_| rng.random_range(-3.0..3.0)).collect();
    let sd: Vec<f64> = (0..dims).map(|_| rng.random_range(0.3..2.0)).collect();
    let mut corr = DMatrix::identity(dims, dims);
    for i in 0..dims {
        for j in 0..i {
            let r = rng.random_range(-0.45..0.45);
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    let cov = DMatrix::from_fn(dims, dims, |i, j| corr[(i, j)] * sd[i] * sd[j]);
    Gaussian::new(mean, cov).expect("diagonally dominant correlation")
}

/// [`random_gaussian`] from a fresh stream seeded with `seed`.
pub fn seeded_gaussian(seed: u64, dims: usize) -> Gaussian {
    random_gaussian(&mut ChaCha8Rng::seed_from_u64(seed), dims)
}

/// 1 to 4 weighted [`random_gaussian`] components.
pub fn random_mixture<R: Rng>(rng: &mut R, dims: usize) -> Vec<MixtureComponent> {
    let count = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter()
        .map(|w| MixtureComponent {
            weight: w / total,
            gaussian: random_gaussian(rng, dims),
        })
        .collect()
}

/// [`random_mixture`] from a fresh stream seeded with `seed`.
pub fn seeded_mixture(seed: u64, dims: usize) -> Vec<MixtureComponent> {
    random_mixture(&mut ChaCha8Rng::seed_from_u64(seed), dims)
}

/// The mixture sampled on `axes` and normalized there.
pub fn mixture_density(components: &[MixtureComponent], axes: Vec<Axis>) -> Result<GridDensity> {
    GridDensity::from_fn(axes, |x| {
        components.iter().map(|c| c.weight * c.gaussian.pdf(x)).sum()
    })?
    .normalized()
}

/// One corpus member and the three window widths it is checked with.
#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub id: usize,
    pub density: GridDensity,
    pub widths: [f64; 3],
}

/// Grid step and window widths per dimension. Every width divides the
/// grid span `2 * HALF_WIDTH` and is a multiple of the step.
pub fn geometry(dims: usize) -> (f64, [f64; 3]) {
    match dims {
        1 => (1.0 / 16.0, [0.5, 1.0, 2.0]),
        2 => (0.125, [0.5, 1.0, 2.0]),
        _ => (0.5, [1.0, 2.0, 4.0]),
    }
}

/// `cases_1d + cases_2d + cases_3d` members drawn from one seeded stream.
/// Members are generated lazily so a large corpus never sits in memory.
pub fn gaussian_mixture_corpus(
    seed: u64,
    cases_1d: usize,
    cases_2d: usize,
    cases_3d: usize,
) -> impl Iterator<Item = Result<CorpusCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = std::iter::repeat_n(1, cases_1d)
        .chain(std::iter::repeat_n(2, cases_2d))
        .chain(std::iter::repeat_n(3, cases_3d));
    plan.enumerate().map(move |(id, dims)| {
        let (step, widths) = geometry(dims);
        let components = random_mixture(&mut rng, dims);
        let axis = Axis::symmetric(HALF_WIDTH, step)?;
        Ok(CorpusCase {
            id,
            density: mixture_density(&components, vec![axis; dims])?,
            widths,
        })
    })
}
