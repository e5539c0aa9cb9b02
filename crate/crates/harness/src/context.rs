//! Lazily built ingredients shared by the experiments of one run.

use std::sync::OnceLock;

use horolab::density::{discretize_lebesgue, estimate_delta, AtomicBoundaryMeasure, DeltaEstimate, PattersonSullivan};
use horolab::dynamics::{generic_frame, TestFunction};
use horolab::hypgeom::{GroupElement, HPoint};
use horolab::measures::{bm_conditional, bm_quadrature, br_quadrature, MeasureError, QuadratureMeasure};
use horolab::schottky::SchottkyData;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::output::Row;
use crate::HarnessError;

/// Word length of the backward endpoints of generic frames.
pub const FRAME_DEPTH: usize = 12;
const MAX_FRAME_DRAWS: usize = 1000;

pub struct Context {
    pub config: ExperimentConfig,
    pub group_id: String,
    pub group: SchottkyData,
    pub hash: String,
    delta: OnceLock<DeltaEstimate>,
    ps: OnceLock<PattersonSullivan>,
    nu_o: OnceLock<AtomicBoundaryMeasure>,
    bm_forward: OnceLock<AtomicBoundaryMeasure>,
    bm: OnceLock<QuadratureMeasure>,
    lambda: OnceLock<AtomicBoundaryMeasure>,
    br: OnceLock<QuadratureMeasure>,
    suite: OnceLock<Vec<TestFunction>>,
}

fn get_or_try<T>(cell: &OnceLock<T>, f: impl FnOnce() -> Result<T, HarnessError>) -> Result<&T, HarnessError> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    Ok(cell.get_or_init(|| v))
}

impl Context {
    pub fn new(config: ExperimentConfig, group_id: String, group: SchottkyData) -> Self {
        let hash = config.hash();
        Context {
            config,
            group_id,
            group,
            hash,
            delta: OnceLock::new(),
            ps: OnceLock::new(),
            nu_o: OnceLock::new(),
            bm_forward: OnceLock::new(),
            bm: OnceLock::new(),
            lambda: OnceLock::new(),
            br: OnceLock::new(),
            suite: OnceLock::new(),
        }
    }

    pub fn delta_estimate(&self) -> Result<&DeltaEstimate, HarnessError> {
        get_or_try(&self.delta, || Ok(estimate_delta(&self.group, self.config.k)?))
    }

    pub fn delta(&self) -> Result<f64, HarnessError> {
        Ok(self.delta_estimate()?.value)
    }

    pub fn ps(&self) -> Result<&PattersonSullivan, HarnessError> {
        get_or_try(&self.ps, || Ok(PattersonSullivan::new(&self.group, self.delta()?, self.config.k)?))
    }

    /// `ν̂_o` at the full cutoff.
    pub fn nu_o(&self) -> Result<&AtomicBoundaryMeasure, HarnessError> {
        get_or_try(&self.nu_o, || Ok(self.ps()?.measure_at(&HPoint::BASE)))
    }

    /// `ν̂_o` coarsened to the BM coding level; both endpoints of `m̂_BM`.
    pub fn bm_forward(&self) -> Result<&AtomicBoundaryMeasure, HarnessError> {
        get_or_try(&self.bm_forward, || Ok(self.nu_o()?.coarsen(&self.group, self.config.bm_level)))
    }

    pub fn bm(&self) -> Result<&QuadratureMeasure, HarnessError> {
        get_or_try(&self.bm, || {
            let c = &self.config;
            Ok(bm_quadrature(&self.group, self.bm_forward()?, self.delta()?, c.t_window, c.t_step)?)
        })
    }

    pub fn lambda(&self) -> Result<&AtomicBoundaryMeasure, HarnessError> {
        get_or_try(&self.lambda, || Ok(discretize_lebesgue(&HPoint::BASE, self.config.lebesgue_resolution)?))
    }

    pub fn br(&self) -> Result<&QuadratureMeasure, HarnessError> {
        get_or_try(&self.br, || {
            let c = &self.config;
            let backward = self.nu_o()?.coarsen(&self.group, c.br_level);
            Ok(br_quadrature(&self.group, &backward, self.lambda()?, self.delta()?, c.br_window, c.br_t_step)?)
        })
    }

    pub fn suite(&self) -> Result<&[TestFunction], HarnessError> {
        get_or_try(&self.suite, || Ok(TestFunction::suite(&self.group, self.config.test_window)?))
            .map(|v| v.as_slice())
    }

    /// Independent random stream per experiment, derived from the seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        rng
    }

    /// Generic radial frames: backward endpoint a periodic limit point,
    /// forward endpoint Lebesgue-random off the disks, `t = 0`.
    pub fn lebesgue_frames(&self, n: usize, stream: u64) -> Vec<GroupElement> {
        let mut rng = self.rng(stream);
        (0..n).map(|_| generic_frame(&self.group, &mut rng, FRAME_DEPTH, false)).collect()
    }

    /// Generic frames whose unit BM-conditional ball carries mass; frames
    /// with an empty ball are redrawn.
    pub fn bm_frames(&self, n: usize, stream: u64) -> Result<Vec<GroupElement>, HarnessError> {
        let mut rng = self.rng(stream);
        let (nu, delta) = (self.nu_o()?, self.delta()?);
        let mut frames = Vec::with_capacity(n);
        for _ in 0..MAX_FRAME_DRAWS {
            if frames.len() == n {
                return Ok(frames);
            }
            let f = generic_frame(&self.group, &mut rng, FRAME_DEPTH, false);
            match bm_conditional(&f, nu, delta, 1.0, 64) {
                Ok(_) => frames.push(f),
                Err(MeasureError::EmptySupport) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Err(HarnessError::Numerical(format!("no frame with BM mass on its unit ball in {MAX_FRAME_DRAWS} draws")))
    }

    pub fn row(&self) -> Row {
        Row {
            experiment: self.config.experiment.clone(),
            group_id: self.group_id.clone(),
            seed: self.config.seed,
            config_hash: self.hash.clone(),
            ..Default::default()
        }
    }
}
