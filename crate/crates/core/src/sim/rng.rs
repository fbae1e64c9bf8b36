use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Stream ids per unit: normals, then uniforms for each member of a pair.
const STREAMS_PER_UNIT: u64 = 4;

pub(crate) fn stream(seed: u64, unit: usize, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit as u64 * STREAMS_PER_UNIT + slot);
    rng
}

#[inline]
pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub(crate) fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Normal and uniform sources for one path; the mirrored member of an
/// antithetic pair reads the same normals with the sign flipped.
pub(crate) struct PathRng {
    normals: ChaCha8Rng,
    uniforms: ChaCha8Rng,
    sign: f64,
}

impl PathRng {
    pub fn new(seed: u64, unit: usize, mirrored: bool) -> Self {
        PathRng {
            normals: stream(seed, unit, 0),
            uniforms: stream(seed, unit, if mirrored { 2 } else { 1 }),
            sign: if mirrored { -1.0 } else { 1.0 },
        }
    }

    #[inline]
    pub fn z(&mut self) -> f64 {
        self.sign * normal(&mut self.normals)
    }

    #[inline]
    pub fn u(&mut self) -> f64 {
        uniform(&mut self.uniforms)
    }
}
