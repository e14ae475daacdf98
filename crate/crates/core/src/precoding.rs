//! Effective channel, zero-forcing digital precoder, SINR and sum-rate.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelMatrix, FeederGains, SystemConfig};
use crate::numerics::{hpd_inverse, ComplexMatrix, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecodingError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("phase entry {index} is {value}, expected -1 or +1")]
    InvalidSign { index: usize, value: i64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Diagonal of the 1-bit RIS matrix: every entry is exactly −1 or +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnalogBeamformer {
    signs: Vec<i8>,
}

impl AnalogBeamformer {
    pub fn new(signs: Vec<i8>) -> Result<Self, PrecodingError> {
        if let Some((index, &value)) = signs.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(PrecodingError::InvalidSign {
                index,
                value: value.into(),
            });
        }
        Ok(Self { signs })
    }

    pub fn all(n: usize, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1);
        Self { signs: vec![sign; n] }
    }

    /// Vector number `index` in lexicographic order with −1 < +1: element
    /// `i` is +1 iff bit `n - 1 - i` of `index` is set.
    pub fn from_index(index: u64, n: usize) -> Self {
        let signs = (0..n)
            .map(|i| if (index >> (n - 1 - i)) & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { signs }
    }

    /// Maps labels in {0, 1} back to signs.
    pub fn from_labels(labels: &[u8]) -> Result<Self, PrecodingError> {
        Self::new(
            labels
                .iter()
                .map(|&l| match l {
                    0 => -1,
                    1 => 1,
                    other => other as i8,
                })
                .collect(),
        )
    }

    #[inline]
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        f64::from(self.signs[n])
    }

    pub fn negated(&self) -> Self {
        Self {
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    pub fn flip(&mut self, n: usize) {
        self.signs[n] = -self.signs[n];
    }

    /// `(phi + 1) / 2` per element.
    pub fn labels(&self) -> Vec<u8> {
        self.signs.iter().map(|&s| u8::from(s > 0)).collect()
    }
}

/// M×K digital precoder, column `k` serving user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalPrecoder {
    f: ComplexMatrix,
    gain: f64,
}

impl DigitalPrecoder {
    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.f
    }

    /// Real scalar `c` with `H_eq F = c I`.
    #[inline]
    pub fn gain(&self) -> f64 {
        self.gain
    }
}

/// `H diag(phi) G`.
pub fn effective_channel(
    h: &ChannelMatrix,
    phi: &AnalogBeamformer,
    g: &FeederGains,
) -> Result<ComplexMatrix, PrecodingError> {
    let hm = h.matrix();
    if hm.cols() != phi.len() || g.matrix().rows() != phi.len() {
        return Err(PrecodingError::Shape(format!(
            "H is {:?}, phi has {} entries, G is {:?}",
            hm.shape(),
            phi.len(),
            g.matrix().shape()
        )));
    }
    let mut scaled = hm.clone();
    for r in 0..hm.rows() {
        for c in 0..hm.cols() {
            scaled[(r, c)] *= phi.get(c);
        }
    }
    Ok(scaled.matmul(g.matrix())?)
}

/// Zero-forcing precoder `sqrt(rho) P / ||P||_F` with `P` the right
/// pseudo-inverse of `h_eq`.
pub fn zf_precoder(h_eq: &ComplexMatrix, rho: f64) -> Result<DigitalPrecoder, PrecodingError> {
    let p = h_eq.right_pinv()?;
    let norm = p.frobenius_norm();
    let gain = rho.sqrt() / norm;
    let f = p.scale(Complex64::new(gain, 0.0));
    if !f.is_finite() {
        return Err(NumericsError::Singular {
            condition: f64::INFINITY,
        }
        .into());
    }
    Ok(DigitalPrecoder { f, gain })
}

fn received_gains(
    h: &ChannelMatrix,
    phi: &AnalogBeamformer,
    g: &FeederGains,
    f: &DigitalPrecoder,
) -> Result<ComplexMatrix, PrecodingError> {
    let h_eq = effective_channel(h, phi, g)?;
    Ok(h_eq.matmul(f.matrix())?)
}

fn sinr_from_gains(gains: &ComplexMatrix, sigma2: f64, k: usize) -> f64 {
    let row = gains.row(k);
    let signal = row[k].norm_sqr();
    let interference: f64 = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    signal / (interference + sigma2)
}

/// SINR of user `k`: `|h_k^H Φ G f_k|² / (Σ_{k'≠k} |h_k^H Φ G f_k'|² + σ²)`.
pub fn user_sinr(
    h: &ChannelMatrix,
    phi: &AnalogBeamformer,
    g: &FeederGains,
    f: &DigitalPrecoder,
    sigma2: f64,
    k: usize,
) -> Result<f64, PrecodingError> {
    if k >= h.users() {
        return Err(PrecodingError::Shape(format!("user {k} out of range 0..{}", h.users())));
    }
    Ok(sinr_from_gains(&received_gains(h, phi, g, f)?, sigma2, k))
}

/// `Σ_k log2(1 + γ_k)` in bits/s/Hz.
pub fn sum_rate(
    h: &ChannelMatrix,
    phi: &AnalogBeamformer,
    g: &FeederGains,
    f: &DigitalPrecoder,
    sigma2: f64,
) -> Result<f64, PrecodingError> {
    let gains = received_gains(h, phi, g, f)?;
    Ok((0..h.users()).map(|k| (1.0 + sinr_from_gains(&gains, sigma2, k)).log2()).sum())
}

/// Sum-rate of `phi` with its ZF precoder; a singular effective channel
/// scores 0.
pub fn zf_sum_rate(
    h: &ChannelMatrix,
    phi: &AnalogBeamformer,
    g: &FeederGains,
    cfg: &SystemConfig,
) -> Result<f64, PrecodingError> {
    let h_eq = effective_channel(h, phi, g)?;
    match zf_precoder(&h_eq, cfg.rho) {
        Ok(f) => sum_rate(h, phi, g, &f, cfg.sigma2),
        Err(PrecodingError::Numerics(NumericsError::Singular { .. })) => Ok(0.0),
        Err(e) => Err(e),
    }
}

const MAX_DIM: usize = 8;

/// Allocation-free ZF sum-rate for repeated evaluation on one channel.
///
/// With ZF every user sees `γ = ρ / (σ² tr((H_eq H_eq^H)^{-1}))`, so the
/// rate is `K log2(1 + γ)`. `H diag(phi) G` is built from the precomputed
/// products `H[k][n] g_n` using the block structure of `G`.
#[derive(Debug, Clone)]
pub struct RateEvaluator {
    users: usize,
    chains: usize,
    ns: usize,
    weighted: Vec<Complex64>,
    rho: f64,
    sigma2: f64,
}

impl RateEvaluator {
    pub fn new(h: &ChannelMatrix, g: &FeederGains, rho: f64, sigma2: f64) -> Result<Self, PrecodingError> {
        let hm = h.matrix();
        let (users, elements) = hm.shape();
        let chains = g.matrix().cols();
        if g.matrix().rows() != elements || chains == 0 || elements % chains != 0 {
            return Err(PrecodingError::Shape(format!(
                "H is {:?} but G is {:?}",
                hm.shape(),
                g.matrix().shape()
            )));
        }
        if users > MAX_DIM || chains > MAX_DIM {
            return Err(PrecodingError::Shape(format!(
                "fast evaluator supports at most {MAX_DIM} users and RF chains"
            )));
        }
        let mut weighted = Vec::with_capacity(users * elements);
        for k in 0..users {
            for n in 0..elements {
                weighted.push(hm[(k, n)] * g.element_gain(n));
            }
        }
        Ok(Self {
            users,
            chains,
            ns: g.subsurface_size(),
            weighted,
            rho,
            sigma2,
        })
    }

    pub fn for_config(h: &ChannelMatrix, g: &FeederGains, cfg: &SystemConfig) -> Result<Self, PrecodingError> {
        Self::new(h, g, cfg.rho, cfg.sigma2)
    }

    #[inline]
    pub fn elements(&self) -> usize {
        self.chains * self.ns
    }

    /// Evaluates the sum-rate with noise power `sigma2` instead of the configured one.
    pub fn with_sigma2(&self, sigma2: f64) -> Self {
        Self { sigma2, ..self.clone() }
    }

    /// Common per-user SINR, or `None` if the effective channel is singular.
    pub fn common_sinr(&self, phi: &[i8]) -> Option<f64> {
        debug_assert_eq!(phi.len(), self.elements());
        let zero = Complex64::new(0.0, 0.0);
        let (k_n, m_n, ns) = (self.users, self.chains, self.ns);
        let n_total = m_n * ns;
        let mut h_eq = [zero; MAX_DIM * MAX_DIM];
        for k in 0..k_n {
            let row = &self.weighted[k * n_total..(k + 1) * n_total];
            for m in 0..m_n {
                let mut s = zero;
                for (w, &p) in row[m * ns..(m + 1) * ns].iter().zip(&phi[m * ns..(m + 1) * ns]) {
                    if p > 0 {
                        s += w;
                    } else {
                        s -= w;
                    }
                }
                h_eq[k * m_n + m] = s;
            }
        }
        let mut gram = [zero; MAX_DIM * MAX_DIM];
        for i in 0..k_n {
            for j in 0..k_n {
                let mut s = zero;
                for m in 0..m_n {
                    s += h_eq[i * m_n + m] * h_eq[j * m_n + m].conj();
                }
                gram[i * k_n + j] = s;
            }
        }
        let mut inv = [zero; MAX_DIM * MAX_DIM];
        hpd_inverse(&gram[..k_n * k_n], k_n, &mut inv[..k_n * k_n]).ok()?;
        let trace: f64 = (0..k_n).map(|i| inv[i * k_n + i].re).sum();
        Some(self.rho / (self.sigma2 * trace))
    }

    pub fn rate(&self, phi: &[i8]) -> f64 {
        match self.common_sinr(phi) {
            Some(gamma) => self.users as f64 * (1.0 + gamma).log2(),
            None => 0.0,
        }
    }
}
