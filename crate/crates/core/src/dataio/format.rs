//! Dataset file.
//!
//! Framed by [`crate::container`] with magic `RISDSET\0`, version 1. Payload:
//!
//! ```text
//! system   u32 n, m, k, ns, ns1, ns2; f64 d1, d2, rho, sigma2; u64 rng_seed
//! channel  u8 kind (0 = sv, 1 = gpp)
//!            sv:  u32 paths; f64 gain_variance
//!            gpp: f64 k_factor; u32 P, P × f64 cluster powers; u32 rays;
//!                 f64 angle_spread, doppler, snapshot_time
//! feeder   u8 (0 = all ones, 1 = random phase)
//! ceo      u32 iterations, candidates; f64 elite_ratio, smoothing, p_floor
//! seed     u64
//! split    u8 present; if 1: u32 count + u32 indices for train, validation, test
//! samples  u32 Q, then per sample:
//!            u64 sample_index; f64 rate_label;
//!            K·N × (f64 re, f64 im), row-major; N × i8 signs
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{DataError, DataSample, Dataset, DatasetConfig, Split};
use crate::channel::{ChannelMatrix, ChannelModel, FeederMode, GppChannelConfig, SvChannelConfig, SystemConfig};
use crate::container::{frame, unframe, write_atomic, FormatError, Reader, Writer};
use crate::numerics::ComplexMatrix;
use crate::optim::CeoParams;
use crate::precoding::AnalogBeamformer;

pub const MAGIC: &[u8; 8] = b"RISDSET\0";
pub const VERSION: u32 = 1;

fn write_config(w: &mut Writer, c: &DatasetConfig) {
    let s = &c.system;
    for v in [s.n, s.m, s.k, s.ns, s.ns1, s.ns2] {
        w.usize32(v);
    }
    for v in [s.d1, s.d2, s.rho, s.sigma2] {
        w.f64(v);
    }
    w.u64(s.rng_seed);
    match &c.channel {
        ChannelModel::Sv(sv) => {
            w.u8(0);
            w.usize32(sv.paths);
            w.f64(sv.gain_variance);
        }
        ChannelModel::Gpp(g) => {
            w.u8(1);
            w.f64(g.k_factor);
            w.usize32(g.cluster_powers.len());
            g.cluster_powers.iter().for_each(|&p| w.f64(p));
            w.usize32(g.rays_per_cluster);
            w.f64(g.angle_spread);
            w.f64(g.doppler);
            w.f64(g.snapshot_time);
        }
    }
    w.u8(match c.feeder {
        FeederMode::AllOnes => 0,
        FeederMode::RandomPhase => 1,
    });
    w.usize32(c.ceo.iterations);
    w.usize32(c.ceo.candidates);
    w.f64(c.ceo.elite_ratio);
    w.f64(c.ceo.smoothing);
    w.f64(c.ceo.p_floor);
    w.u64(c.seed);
}

fn read_config(r: &mut Reader) -> Result<DatasetConfig, FormatError> {
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.usize32()?;
    }
    let [n, m, k, ns, ns1, ns2] = dims;
    let system = SystemConfig {
        n,
        m,
        k,
        ns,
        ns1,
        ns2,
        d1: r.f64()?,
        d2: r.f64()?,
        rho: r.f64()?,
        sigma2: r.f64()?,
        rng_seed: r.u64()?,
    };
    let channel = match r.u8()? {
        0 => ChannelModel::Sv(SvChannelConfig {
            paths: r.usize32()?,
            gain_variance: r.f64()?,
        }),
        1 => {
            let k_factor = r.f64()?;
            let count = r.count(8)?;
            let cluster_powers = (0..count).map(|_| r.f64()).collect::<Result<_, _>>()?;
            ChannelModel::Gpp(GppChannelConfig {
                k_factor,
                cluster_powers,
                rays_per_cluster: r.usize32()?,
                angle_spread: r.f64()?,
                doppler: r.f64()?,
                snapshot_time: r.f64()?,
            })
        }
        other => return Err(FormatError::Malformed(format!("unknown channel kind tag {other}"))),
    };
    let feeder = match r.u8()? {
        0 => FeederMode::AllOnes,
        1 => FeederMode::RandomPhase,
        other => return Err(FormatError::Malformed(format!("unknown feeder tag {other}"))),
    };
    let ceo = CeoParams {
        iterations: r.usize32()?,
        candidates: r.usize32()?,
        elite_ratio: r.f64()?,
        smoothing: r.f64()?,
        p_floor: r.f64()?,
    };
    let seed = r.u64()?;
    let cfg = DatasetConfig {
        system,
        channel,
        feeder,
        ceo,
        seed,
    };
    cfg.validate().map_err(|e| FormatError::Malformed(format!("stored configuration is invalid: {e}")))?;
    Ok(cfg)
}

pub fn dataset_to_bytes(ds: &Dataset) -> Vec<u8> {
    let mut w = Writer::new();
    write_config(&mut w, &ds.config);
    match &ds.split {
        None => w.u8(0),
        Some(split) => {
            w.u8(1);
            for part in [&split.train, &split.validation, &split.test] {
                w.usize32(part.len());
                part.iter().for_each(|&i| w.usize32(i));
            }
        }
    }
    w.usize32(ds.samples.len());
    for s in &ds.samples {
        w.u64(s.sample_index);
        w.f64(s.rate_label);
        for z in s.h.matrix().as_slice() {
            w.f64(z.re);
            w.f64(z.im);
        }
        s.phi_label.signs().iter().for_each(|&v| w.i8(v));
    }
    frame(MAGIC, VERSION, &w.into_inner())
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset, DataError> {
    let (_, payload) = unframe(bytes, MAGIC, "dataset", VERSION)?;
    let mut r = Reader::new(payload);
    let config = read_config(&mut r)?;
    let split = match r.u8()? {
        0 => None,
        1 => {
            let mut parts = Vec::with_capacity(3);
            for _ in 0..3 {
                let count = r.count(4)?;
                parts.push((0..count).map(|_| r.usize32()).collect::<Result<Vec<_>, _>>()?);
            }
            let test = parts.pop().expect("three parts");
            let validation = parts.pop().expect("three parts");
            let train = parts.pop().expect("three parts");
            Some(Split {
                train,
                validation,
                test,
            })
        }
        other => return Err(FormatError::Malformed(format!("bad split flag {other}")).into()),
    };
    let (k, n) = (config.system.k, config.system.n);
    let sample_size = 16 + 16 * k * n + n;
    let count = r.count(sample_size)?;
    let kind = config.channel.kind();
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let sample_index = r.u64()?;
        let rate_label = r.f64()?;
        let mut data = Vec::with_capacity(k * n);
        for _ in 0..k * n {
            data.push(Complex64::new(r.f64()?, r.f64()?));
        }
        let signs = (0..n).map(|_| r.i8()).collect::<Result<Vec<_>, _>>()?;
        let phi_label = AnalogBeamformer::new(signs)
            .map_err(|e| FormatError::Malformed(format!("sample {sample_index}: {e}")))?;
        if rate_label.is_nan() || rate_label < 0.0 {
            return Err(FormatError::Malformed(format!("sample {sample_index}: negative rate label")).into());
        }
        let h = ComplexMatrix::from_vec(k, n, data).expect("k·n entries read");
        samples.push(DataSample {
            h: ChannelMatrix::new(h),
            phi_label,
            rate_label,
            channel_model: kind,
            sample_index,
        });
    }
    r.finish()?;
    if let Some(split) = &split {
        let mut seen = vec![false; samples.len()];
        for &i in split.train.iter().chain(&split.validation).chain(&split.test) {
            if i >= samples.len() || std::mem::replace(&mut seen[i], true) {
                return Err(FormatError::Malformed(format!("split index {i} is out of range or repeated")).into());
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(FormatError::Malformed("split does not cover every sample".into()).into());
        }
    }
    Ok(Dataset {
        config,
        samples,
        split,
    })
}

/// Writes the dataset atomically, plus a `<path>.meta` sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    write_atomic(path, &dataset_to_bytes(ds)).map_err(FormatError::from)?;
    write_atomic(&super::meta::sidecar_path(path), super::meta::describe(ds).as_bytes()).map_err(FormatError::from)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let bytes = fs::read(path).map_err(FormatError::from)?;
    dataset_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::{generate_dataset, split_dataset};
    use super::*;
    use crate::channel::ChannelKind;
    use crate::precoding::RateEvaluator;

    fn dataset(kind: ChannelKind) -> Dataset {
        let mut cfg = DatasetConfig::new(SystemConfig::new(2, 2), ChannelModel::default_for(kind), 42);
        cfg.ceo.iterations = 3;
        cfg.ceo.candidates = 20;
        cfg.feeder = FeederMode::RandomPhase;
        split_dataset(generate_dataset(10, &cfg).unwrap(), 0.2, 0.25, 1).unwrap()
    }

    #[test]
    fn round_trip_is_byte_exact() {
        for kind in [ChannelKind::Sv, ChannelKind::Gpp] {
            let ds = dataset(kind);
            let bytes = dataset_to_bytes(&ds);
            let back = dataset_from_bytes(&bytes).unwrap();
            assert_eq!(back, ds);
            assert_eq!(dataset_to_bytes(&back), bytes);
        }
    }

    #[test]
    fn stored_rates_recompute_exactly() {
        let ds = dataset_from_bytes(&dataset_to_bytes(&dataset(ChannelKind::Sv))).unwrap();
        let g = ds.config.feeder_gains();
        for s in &ds.samples {
            let r = RateEvaluator::for_config(&s.h, &g, &ds.config.system).unwrap().rate(s.phi_label.signs());
            assert!((r - s.rate_label).abs() <= 1e-9 * s.rate_label.max(1e-300));
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = dataset_to_bytes(&dataset(ChannelKind::Sv));
        let mut bad = bytes.clone();
        let mid = bytes.len() / 2;
        bad[mid] ^= 0x10;
        assert!(matches!(dataset_from_bytes(&bad), Err(DataError::Format(FormatError::Checksum { .. }))));
        assert!(matches!(
            dataset_from_bytes(&bytes[..bytes.len() - 1]),
            Err(DataError::Format(FormatError::Truncated { .. }))
        ));
        let mut newer = bytes.clone();
        newer[8..12].copy_from_slice(&(VERSION + 1).to_le_bytes());
        assert!(matches!(dataset_from_bytes(&newer), Err(DataError::Format(FormatError::Version { .. }))));
    }

    #[test]
    fn invalid_sign_is_rejected_even_with_valid_checksum() {
        let ds = dataset(ChannelKind::Sv);
        let bytes = dataset_to_bytes(&ds);
        // The last byte is the final sign of the last sample.
        let mut payload = bytes[crate::container::HEADER_LEN..].to_vec();
        *payload.last_mut().unwrap() = 0;
        let reframed = frame(MAGIC, VERSION, &payload);
        assert!(matches!(dataset_from_bytes(&reframed), Err(DataError::Format(FormatError::Malformed(_)))));
    }

    #[test]
    fn save_writes_file_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.bin");
        let ds = dataset(ChannelKind::Gpp);
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
        let meta = fs::read_to_string(super::super::meta::sidecar_path(&path)).unwrap();
        assert!(meta.contains("channel_model = gpp"));
    }
}
