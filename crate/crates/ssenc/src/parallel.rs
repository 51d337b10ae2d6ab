//! Rayon-backed section evaluation and a wall clock for training.

use std::time::Instant;

use rayon::prelude::*;
use ssenc_core::loss::section_terms;
use ssenc_core::model::NormalizedData;
use ssenc_core::optim::Clock;
use ssenc_core::{Real, SectionEvaluator, SsEncoderModel};

use crate::error::{Error, Result};

/// Evaluates sections on a rayon pool.
///
/// Sections are processed in chunks; each chunk's per-section results are
/// collected in start order and then summed sequentially, so the result is
/// bit-identical to [`ssenc_core::Sequential`] for any number of workers.
pub struct Parallel {
    pool: rayon::ThreadPool,
    chunk: usize,
}

impl Parallel {
    /// `workers = 0` uses one thread per available core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {workers} worker threads: {e}")))?;
        Ok(Self { pool, chunk: 256 })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl<S: Real> SectionEvaluator<S> for Parallel {
    fn accumulate(
        &self,
        model: &SsEncoderModel<S>,
        data: &NormalizedData<S>,
        starts: &[usize],
        horizon: usize,
        burn_in: usize,
        grad: &mut [S],
    ) -> ssenc_core::Result<S> {
        let mut total = S::zero();
        for chunk in starts.chunks(self.chunk) {
            let terms: Vec<_> = self.pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&s| section_terms(model, data, s, horizon, burn_in))
                    .collect()
            });
            for t in terms {
                let (sq, g) = t?;
                total += sq;
                g.add_into(grad);
            }
        }
        Ok(total)
    }
}

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
