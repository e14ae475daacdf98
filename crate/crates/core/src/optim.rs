//! Analog beamforming search over {−1, +1}^N: exhaustive enumeration,
//! cross-entropy optimization, a 1-bit co-phasing baseline and a random floor.

use rand::Rng;
use thiserror::Error;

use crate::channel::{ChannelMatrix, FeederGains, SystemConfig};
use crate::precoding::{AnalogBeamformer, PrecodingError, RateEvaluator};

/// Largest N the exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("exhaustive search refused: N = {n} exceeds the limit of {EXHAUSTIVE_LIMIT}")]
    TooLarge { n: usize },
    #[error("invalid CEO parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
}

/// Cross-entropy optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CeoParams {
    pub iterations: usize,
    pub candidates: usize,
    pub elite_ratio: f64,
    /// Weight of the elite frequency in the probability update.
    pub smoothing: f64,
    /// Probabilities are clamped to `[p_floor, 1 - p_floor]`.
    pub p_floor: f64,
}

impl Default for CeoParams {
    fn default() -> Self {
        Self {
            iterations: 30,
            candidates: 200,
            elite_ratio: 0.1,
            smoothing: 0.7,
            p_floor: 0.05,
        }
    }
}

impl CeoParams {
    pub fn elite_count(&self) -> usize {
        (self.elite_ratio * self.candidates as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |m: &str| Err(OptimError::InvalidParams(m.to_string()));
        if self.iterations == 0 || self.candidates == 0 {
            return bad("iterations and candidates must be at least 1");
        }
        if !(self.elite_ratio > 0.0 && self.elite_ratio < 1.0) {
            return bad("elite_ratio must lie in (0, 1)");
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return bad("smoothing must lie in (0, 1]");
        }
        if !(self.p_floor > 0.0 && self.p_floor < 0.5) {
            return bad("p_floor must lie in (0, 0.5)");
        }
        if self.elite_count() < 1 {
            return bad("elite set is empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub phi: AnalogBeamformer,
    /// Sum-rate of `phi` in bits/s/Hz.
    pub rate: f64,
    /// Number of sum-rate evaluations spent.
    pub evaluations: u64,
    /// Best rate found after each iteration.
    pub trace: Vec<f64>,
}

/// Optimal sign vector by full enumeration; ties go to the lexicographically
/// smallest vector with −1 < +1.
pub fn exhaustive_search(h: &ChannelMatrix, g: &FeederGains, cfg: &SystemConfig) -> Result<OptimResult, OptimError> {
    let n = h.elements();
    if n > EXHAUSTIVE_LIMIT {
        return Err(OptimError::TooLarge { n });
    }
    let eval = RateEvaluator::for_config(h, g, cfg)?;
    let mut phi = vec![-1i8; n];
    let mut best_rate = f64::NEG_INFINITY;
    let mut best_index = 0u64;
    let total = 1u64 << n;
    for index in 0..total {
        for (i, s) in phi.iter_mut().enumerate() {
            *s = if (index >> (n - 1 - i)) & 1 == 1 { 1 } else { -1 };
        }
        let r = eval.rate(&phi);
        if r > best_rate {
            best_rate = r;
            best_index = index;
        }
    }
    Ok(OptimResult {
        phi: AnalogBeamformer::from_index(best_index, n),
        rate: best_rate,
        evaluations: total,
        trace: vec![best_rate],
    })
}

/// Cross-entropy search: per-element Bernoulli probabilities refined from
/// the elite candidates of each iteration. Spends exactly `I·S` evaluations
/// and returns the best vector ever sampled.
pub fn ceo_optimize(
    h: &ChannelMatrix,
    g: &FeederGains,
    cfg: &SystemConfig,
    params: &CeoParams,
    rng: &mut impl Rng,
) -> Result<OptimResult, OptimError> {
    params.validate()?;
    let eval = RateEvaluator::for_config(h, g, cfg)?;
    let n = h.elements();
    let s = params.candidates;
    let elite = params.elite_count();
    let mut prob = vec![0.5f64; n];
    let mut pool = vec![0i8; s * n];
    let mut rates = vec![0.0f64; s];
    let mut order: Vec<usize> = (0..s).collect();
    let mut best = vec![1i8; n];
    let mut best_rate = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        for (cand, rate) in pool.chunks_exact_mut(n).zip(rates.iter_mut()) {
            for (x, &p) in cand.iter_mut().zip(&prob) {
                *x = if rng.random::<f64>() < p { 1 } else { -1 };
            }
            *rate = eval.rate(cand);
        }
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        order.sort_by(|&a, &b| rates[b].total_cmp(&rates[a]).then(a.cmp(&b)));
        let top = order[0];
        if rates[top] > best_rate {
            best_rate = rates[top];
            best.copy_from_slice(&pool[top * n..(top + 1) * n]);
        }
        trace.push(best_rate);

        for (j, p) in prob.iter_mut().enumerate() {
            let ones = order[..elite].iter().filter(|&&c| pool[c * n + j] > 0).count();
            let freq = ones as f64 / elite as f64;
            *p = ((1.0 - params.smoothing) * *p + params.smoothing * freq)
                .clamp(params.p_floor, 1.0 - params.p_floor);
        }
    }

    Ok(OptimResult {
        phi: AnalogBeamformer::new(best)?,
        rate: best_rate,
        evaluations: (params.iterations * s) as u64,
        trace,
    })
}

/// 1-bit co-phasing: sub-surface `m` serves user `m`, and element `n` takes
/// the sign of `Re(h*_{m,n} g_{m,n})` (ties to +1).
pub fn matched_filter_baseline(
    h: &ChannelMatrix,
    g: &FeederGains,
    cfg: &SystemConfig,
) -> Result<OptimResult, OptimError> {
    let hm = h.matrix();
    let n = h.elements();
    let ns = g.subsurface_size();
    let signs = (0..n)
        .map(|e| {
            let user = (e / ns).min(h.users() - 1);
            // H stores h_k^H, so H[m][n] is already the conjugated entry.
            if (hm[(user, e)] * g.element_gain(e)).re >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let phi = AnalogBeamformer::new(signs)?;
    let rate = RateEvaluator::for_config(h, g, cfg)?.rate(phi.signs());
    Ok(OptimResult {
        phi,
        rate,
        evaluations: 1,
        trace: vec![rate],
    })
}

/// I.i.d. uniform signs.
pub fn random_phi(rng: &mut impl Rng, n: usize) -> AnalogBeamformer {
    AnalogBeamformer::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        .expect("signs are ±1")
}

/// Negates whole sub-surfaces so that each one starts with +1.
///
/// Negating sub-surface `m` negates column `m` of `H Φ G`, which the ZF
/// precoder absorbs, so the sum-rate is unchanged. The canonical form picks
/// one representative of the 2^M equivalent vectors.
pub fn canonicalize_subsurfaces(phi: &AnalogBeamformer, ns: usize) -> AnalogBeamformer {
    let mut signs = phi.signs().to_vec();
    for block in signs.chunks_mut(ns) {
        if block[0] < 0 {
            for s in block.iter_mut() {
                *s = -*s;
            }
        }
    }
    AnalogBeamformer::new(signs).expect("negation keeps ±1")
}
