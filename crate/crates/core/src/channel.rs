//! Channel generation: system geometry, UPA steering vectors, the
//! Saleh-Valenzuela and simplified 3GPP link models, feeder gains and the
//! assembly of the K×N channel matrix.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::numerics::ComplexMatrix;
use crate::seeding::{domain, substream, StreamRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, ChannelError> {
    Err(ChannelError::Config(msg.into()))
}

/// Dimensions, power budget and array geometry shared by every module.
///
/// `n = m * ns` RIS elements split into `m` sub-surfaces, one per RF chain;
/// `k = m` single-antenna users. Element spacings are in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub ns: usize,
    pub ns1: usize,
    pub ns2: usize,
    pub d1: f64,
    pub d2: f64,
    pub rho: f64,
    pub sigma2: f64,
    pub rng_seed: u64,
}

impl SystemConfig {
    /// `users` users and RF chains, `ns` elements per sub-surface laid out as
    /// an `ns × 1` half-wavelength array, unit power and 5 dB SNR.
    pub fn new(users: usize, ns: usize) -> Self {
        Self {
            n: users * ns,
            m: users,
            k: users,
            ns,
            ns1: ns,
            ns2: 1,
            d1: 0.5,
            d2: 0.5,
            rho: 1.0,
            sigma2: 1.0,
            rng_seed: 0,
        }
        .with_snr_db(5.0)
    }

    /// N = 16, K = M = 2, Ns = 8.
    pub fn desk_scale() -> Self {
        Self::new(2, 8)
    }

    /// Replaces the sub-surface grid by `ns1 × ns2`, keeping everything else.
    pub fn with_grid(mut self, ns1: usize, ns2: usize) -> Self {
        self.ns1 = ns1;
        self.ns2 = ns2;
        self.ns = ns1 * ns2;
        self.n = self.m * self.ns;
        self
    }

    /// SNR is `rho / sigma2`; this keeps `rho` and sets the noise power.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.sigma2 = self.rho / 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.rho / self.sigma2).log10()
    }

    /// Sub-surface index of element `n`.
    #[inline]
    pub fn subsurface_of(&self, n: usize) -> usize {
        n / self.ns
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n == 0 || self.m == 0 || self.k == 0 || self.ns == 0 || self.ns1 == 0 || self.ns2 == 0 {
            return config_err("all counts must be at least 1");
        }
        if self.m != self.k {
            return config_err(format!("M = {} must equal K = {}", self.m, self.k));
        }
        if self.n != self.m * self.ns {
            return config_err(format!("N = {} must equal M·Ns = {}", self.n, self.m * self.ns));
        }
        if self.ns != self.ns1 * self.ns2 {
            return config_err(format!(
                "Ns = {} must equal Ns1·Ns2 = {}",
                self.ns,
                self.ns1 * self.ns2
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return config_err("rho must be positive");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return config_err("sigma2 must be positive");
        }
        if !(self.d1.is_finite() && self.d2.is_finite()) {
            return config_err("element spacings must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvChannelConfig {
    /// Paths per (user, sub-surface) link.
    pub paths: usize,
    /// Variance of the complex path gains.
    pub gain_variance: f64,
}

impl Default for SvChannelConfig {
    fn default() -> Self {
        Self {
            paths: 3,
            gain_variance: 1.0,
        }
    }
}

impl SvChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.paths == 0 {
            return config_err("SV path count must be at least 1");
        }
        if !(self.gain_variance > 0.0 && self.gain_variance.is_finite()) {
            return config_err("SV gain variance must be positive");
        }
        Ok(())
    }
}

/// Narrowband Ricean/clustered link model.
///
/// Field patterns are isotropic, polarization is single, and the delay taps
/// of each cluster are summed into one snapshot taken at `snapshot_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct GppChannelConfig {
    /// Ricean K-factor (linear).
    pub k_factor: f64,
    /// Per-cluster power fractions; their count is the cluster count P.
    pub cluster_powers: Vec<f64>,
    /// Rays per cluster (J).
    pub rays_per_cluster: usize,
    /// Standard deviation of the per-ray angle offset around the cluster center, radians.
    pub angle_spread: f64,
    /// Maximum Doppler shift in cycles per unit time.
    pub doppler: f64,
    pub snapshot_time: f64,
}

impl Default for GppChannelConfig {
    /// 9 dB K-factor, six clusters with powers decaying by 3 dB per cluster,
    /// ten rays each, 0.1 rad intra-cluster spread, static snapshot.
    fn default() -> Self {
        let raw: Vec<f64> = (0..6).map(|p| 10f64.powf(-0.3 * p as f64)).collect();
        let total: f64 = raw.iter().sum();
        Self {
            k_factor: 10f64.powf(0.9),
            cluster_powers: raw.iter().map(|p| p / total).collect(),
            rays_per_cluster: 10,
            angle_spread: 0.1,
            doppler: 0.0,
            snapshot_time: 0.0,
        }
    }
}

impl GppChannelConfig {
    pub fn clusters(&self) -> usize {
        self.cluster_powers.len()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.k_factor.is_nan() || self.k_factor < 0.0 {
            return config_err("K-factor must be nonnegative");
        }
        if self.cluster_powers.is_empty() {
            return config_err("at least one cluster is required");
        }
        if self.rays_per_cluster == 0 {
            return config_err("rays per cluster must be at least 1");
        }
        if self.cluster_powers.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return config_err("cluster powers must be nonnegative");
        }
        let total: f64 = self.cluster_powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config_err(format!("cluster powers sum to {total}, expected 1"));
        }
        if !self.angle_spread.is_finite() || self.angle_spread < 0.0 {
            return config_err("angle spread must be nonnegative");
        }
        if !self.doppler.is_finite() || !self.snapshot_time.is_finite() {
            return config_err("Doppler and snapshot time must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Sv,
    Gpp,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Sv => "sv",
            ChannelKind::Gpp => "gpp",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sv" => Ok(ChannelKind::Sv),
            "gpp" | "3gpp" => Ok(ChannelKind::Gpp),
            other => config_err(format!("unknown channel model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    Sv(SvChannelConfig),
    Gpp(GppChannelConfig),
}

impl ChannelModel {
    pub fn kind(&self) -> ChannelKind {
        match self {
            ChannelModel::Sv(_) => ChannelKind::Sv,
            ChannelModel::Gpp(_) => ChannelKind::Gpp,
        }
    }

    pub fn default_for(kind: ChannelKind) -> Self {
        match kind {
            ChannelKind::Sv => ChannelModel::Sv(SvChannelConfig::default()),
            ChannelKind::Gpp => ChannelModel::Gpp(GppChannelConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match self {
            ChannelModel::Sv(c) => c.validate(),
            ChannelModel::Gpp(c) => c.validate(),
        }
    }

    /// One `Ns`-vector `h_{k,m}` drawn from `rng`.
    pub fn link(&self, cfg: &SystemConfig, rng: &mut impl Rng) -> Result<Vec<Complex64>, ChannelError> {
        match self {
            ChannelModel::Sv(sv) => Ok(sv_link(cfg, sv, rng)),
            ChannelModel::Gpp(gpp) => gpp_link(cfg, gpp, rng),
        }
    }
}

/// UPA steering vector `a_az(phi) ⊗ a_el(theta)`, unit norm.
pub fn array_response(phi: f64, theta: f64, cfg: &SystemConfig) -> Vec<Complex64> {
    let (s_az, s_el) = (phi.sin(), theta.sin());
    let scale = 1.0 / ((cfg.ns1 * cfg.ns2) as f64).sqrt();
    let mut out = Vec::with_capacity(cfg.ns1 * cfg.ns2);
    for i in 0..cfg.ns1 {
        let az = 2.0 * PI * i as f64 * cfg.d1 * s_az;
        for j in 0..cfg.ns2 {
            let el = 2.0 * PI * j as f64 * cfg.d2 * s_el;
            out.push(Complex64::from_polar(scale, az + el));
        }
    }
    out
}

/// One propagation term: complex gain applied to a unit-norm steering vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub gain: Complex64,
    pub azimuth: f64,
    pub elevation: f64,
}

fn accumulate(out: &mut [Complex64], scale: Complex64, ray: &Ray, cfg: &SystemConfig) {
    let a = array_response(ray.azimuth, ray.elevation, cfg);
    let g = scale * ray.gain;
    for (o, ai) in out.iter_mut().zip(a) {
        *o += g * ai;
    }
}

/// `sqrt(N/L) Σ_l α_l a(φ_l, θ_l)` over exactly `paths.len()` terms.
pub fn sv_link_from_paths(cfg: &SystemConfig, paths: &[Ray]) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); cfg.ns];
    if paths.is_empty() {
        return h;
    }
    let scale = Complex64::new((cfg.n as f64 / paths.len() as f64).sqrt(), 0.0);
    for p in paths {
        accumulate(&mut h, scale, p, cfg);
    }
    h
}

fn complex_gaussian(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

fn uniform_angle(rng: &mut impl Rng) -> f64 {
    rng.random_range(-PI..PI)
}

/// Saleh-Valenzuela link: `L` paths with CN(0, σ²) gains and azimuth and
/// elevation both uniform on (−π, π).
pub fn sv_link(cfg: &SystemConfig, sv: &SvChannelConfig, rng: &mut impl Rng) -> Vec<Complex64> {
    let paths: Vec<Ray> = (0..sv.paths)
        .map(|_| {
            let gain = complex_gaussian(rng, sv.gain_variance);
            let azimuth = uniform_angle(rng);
            let elevation = uniform_angle(rng);
            Ray {
                gain,
                azimuth,
                elevation,
            }
        })
        .collect();
    sv_link_from_paths(cfg, &paths)
}

/// LOS and NLOS parts of a clustered link, before the Ricean weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct GppLink {
    pub los: Vec<Complex64>,
    pub nlos: Vec<Complex64>,
}

impl GppLink {
    /// `sqrt(K/(K+1)) los + sqrt(1/(K+1)) nlos`.
    pub fn combine(&self, k_factor: f64) -> Vec<Complex64> {
        let (w_los, w_nlos) = ricean_weights(k_factor);
        self.los
            .iter()
            .zip(&self.nlos)
            .map(|(l, n)| l * w_los + n * w_nlos)
            .collect()
    }
}

fn ricean_weights(k_factor: f64) -> (f64, f64) {
    if k_factor.is_infinite() {
        return (1.0, 0.0);
    }
    ((k_factor / (k_factor + 1.0)).sqrt(), (1.0 / (k_factor + 1.0)).sqrt())
}

/// `Σ_p sqrt(P_p / J) Σ_j g_{p,j} a(φ_{p,j}, θ_{p,j})`; `clusters[p]` holds
/// the rays of cluster `p`, `powers[p]` its power fraction.
pub fn nlos_from_clusters(cfg: &SystemConfig, powers: &[f64], clusters: &[Vec<Ray>]) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); cfg.ns];
    for (power, rays) in powers.iter().zip(clusters) {
        if rays.is_empty() {
            continue;
        }
        let scale = Complex64::new((power / rays.len() as f64).sqrt(), 0.0);
        for ray in rays {
            accumulate(&mut h, scale, ray, cfg);
        }
    }
    h
}

/// Draws the LOS and NLOS parts of a clustered link.
///
/// Each term is a unit-norm steering vector scaled by `sqrt(Ns)` and a
/// uniform random phase, so both parts have mean power `Ns`. The LOS phase
/// stands in for the distance-dependent phase of a fixed deployment.
pub fn gpp_link_parts(
    cfg: &SystemConfig,
    gpp: &GppChannelConfig,
    rng: &mut impl Rng,
) -> Result<GppLink, ChannelError> {
    gpp.validate()?;
    let amp = (cfg.ns as f64).sqrt();
    let doppler_phase = |azimuth: f64| 2.0 * PI * gpp.doppler * azimuth.cos() * gpp.snapshot_time;

    let los_az = uniform_angle(rng);
    let los_el = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    let los_phase = uniform_angle(rng) + doppler_phase(los_az);
    let mut los = vec![Complex64::new(0.0, 0.0); cfg.ns];
    accumulate(
        &mut los,
        Complex64::new(1.0, 0.0),
        &Ray {
            gain: Complex64::from_polar(amp, los_phase),
            azimuth: los_az,
            elevation: los_el,
        },
        cfg,
    );

    let j = gpp.rays_per_cluster;
    let clusters: Vec<Vec<Ray>> = (0..gpp.clusters())
        .map(|_| {
            let center_az = uniform_angle(rng);
            let center_el = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            (0..j)
                .map(|_| {
                    let daz: f64 = StandardNormal.sample(rng);
                    let del: f64 = StandardNormal.sample(rng);
                    let azimuth = center_az + gpp.angle_spread * daz;
                    let elevation = center_el + gpp.angle_spread * del;
                    let phase = uniform_angle(rng) + doppler_phase(azimuth);
                    Ray {
                        gain: Complex64::from_polar(amp, phase),
                        azimuth,
                        elevation,
                    }
                })
                .collect()
        })
        .collect();
    let nlos = nlos_from_clusters(cfg, &gpp.cluster_powers, &clusters);
    Ok(GppLink { los, nlos })
}

pub fn gpp_link(cfg: &SystemConfig, gpp: &GppChannelConfig, rng: &mut impl Rng) -> Result<Vec<Complex64>, ChannelError> {
    Ok(gpp_link_parts(cfg, gpp, rng)?.combine(gpp.k_factor))
}

/// Stream for link `(k, m)` of channel draw `sample` under `seed`.
pub fn link_stream(seed: u64, sample: u64, k: usize, m: usize) -> StreamRng {
    substream(seed, &[domain::CHANNEL, sample, k as u64, m as u64])
}

/// K×N channel matrix `H = [h_1, ..., h_K]^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(ComplexMatrix);

impl ChannelMatrix {
    pub fn new(h: ComplexMatrix) -> Self {
        Self(h)
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    #[inline]
    pub fn users(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn elements(&self) -> usize {
        self.0.cols()
    }

    /// Recovers `h_{k,m}` (un-conjugated) for sub-surfaces of `ns` elements.
    pub fn link(&self, k: usize, m: usize, ns: usize) -> Vec<Complex64> {
        self.0.row(k)[m * ns..(m + 1) * ns].iter().map(|z| z.conj()).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.scale(Complex64::new(c, 0.0)))
    }
}

/// Stacks a K×M grid of `Ns`-vectors into `H`, row `k` being `h_k^H`.
pub fn assemble_h(links: &[Vec<Vec<Complex64>>]) -> Result<ChannelMatrix, ChannelError> {
    let k = links.len();
    let m = links.first().map_or(0, Vec::len);
    let ns = links.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if k == 0 || m == 0 || ns == 0 {
        return Err(ChannelError::Shape("empty link grid".into()));
    }
    let mut data = Vec::with_capacity(k * m * ns);
    for (ki, row) in links.iter().enumerate() {
        if row.len() != m {
            return Err(ChannelError::Shape(format!("user {ki} has {} links, expected {m}", row.len())));
        }
        for (mi, h) in row.iter().enumerate() {
            if h.len() != ns {
                return Err(ChannelError::Shape(format!(
                    "link ({ki}, {mi}) has length {}, expected {ns}",
                    h.len()
                )));
            }
            data.extend(h.iter().map(|z| z.conj()));
        }
    }
    let h = ComplexMatrix::from_vec(k, m * ns, data).map_err(|e| ChannelError::Shape(e.to_string()))?;
    Ok(ChannelMatrix(h))
}

/// Generates channel draw `sample` of the dataset keyed by `seed`.
pub fn generate_channel(
    cfg: &SystemConfig,
    model: &ChannelModel,
    seed: u64,
    sample: u64,
) -> Result<ChannelMatrix, ChannelError> {
    let links = (0..cfg.k)
        .map(|k| {
            (0..cfg.m)
                .map(|m| model.link(cfg, &mut link_stream(seed, sample, k, m)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    assemble_h(&links)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeederMode {
    AllOnes,
    RandomPhase,
}

impl FeederMode {
    pub fn name(self) -> &'static str {
        match self {
            FeederMode::AllOnes => "all_ones",
            FeederMode::RandomPhase => "random_phase",
        }
    }
}

impl std::str::FromStr for FeederMode {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all_ones" => Ok(FeederMode::AllOnes),
            "random_phase" => Ok(FeederMode::RandomPhase),
            other => config_err(format!("unknown feeder mode {other:?}")),
        }
    }
}

/// Block-diagonal N×M feeder matrix `G`; column `m` is nonzero only on the
/// rows of sub-surface `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederGains {
    g: ComplexMatrix,
    ns: usize,
}

impl FeederGains {
    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.g
    }

    #[inline]
    pub fn subsurface_size(&self) -> usize {
        self.ns
    }

    /// Gain `g_{m, n}` of element `n` on its own sub-surface.
    #[inline]
    pub fn element_gain(&self, n: usize) -> Complex64 {
        self.g[(n, n / self.ns)]
    }

    /// Builds gains from per-element values, element `n` feeding sub-surface `n / ns`.
    pub fn from_element_gains(gains: &[Complex64], m: usize) -> Result<Self, ChannelError> {
        if m == 0 || !gains.len().is_multiple_of(m) {
            return Err(ChannelError::Shape(format!(
                "{} gains cannot be split into {m} sub-surfaces",
                gains.len()
            )));
        }
        let ns = gains.len() / m;
        let mut g = ComplexMatrix::zeros(gains.len(), m);
        for (n, &v) in gains.iter().enumerate() {
            g[(n, n / ns)] = v;
        }
        Ok(Self { g, ns })
    }
}

pub fn feeder_gains(cfg: &SystemConfig, mode: FeederMode, rng: &mut impl Rng) -> FeederGains {
    let gains: Vec<Complex64> = (0..cfg.n)
        .map(|_| match mode {
            FeederMode::AllOnes => Complex64::new(1.0, 0.0),
            FeederMode::RandomPhase => Complex64::from_polar(1.0, uniform_angle(rng)),
        })
        .collect();
    FeederGains::from_element_gains(&gains, cfg.m).expect("n = m * ns by construction")
}

/// Feeder gains for a dataset keyed by `seed`.
pub fn seeded_feeder_gains(cfg: &SystemConfig, mode: FeederMode, seed: u64) -> FeederGains {
    feeder_gains(cfg, mode, &mut substream(seed, &[domain::FEEDER]))
}
