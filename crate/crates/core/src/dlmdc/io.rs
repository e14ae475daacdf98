//! Model file.
//!
//! Framed by [`crate::container`] with magic `RISBANK\0`, version 1. Payload:
//!
//! ```text
//! u64   training seed
//! u32   classifier count C
//! u32   layer-size count S, then S × u32 layer sizes (input first, 1 last)
//! C ×   for each layer: outputs × inputs weights (row-major), then outputs biases, f64
//! ```

use std::fs;
use std::path::Path;

use super::mlp::{Layer, MlpClassifier};
use super::{ClassifierBank, DlmdcError};
use crate::container::{frame, unframe, write_atomic, FormatError, Reader, Writer};

pub const MAGIC: &[u8; 8] = b"RISBANK\0";
pub const VERSION: u32 = 1;

pub fn bank_to_bytes(bank: &ClassifierBank) -> Vec<u8> {
    let mut w = Writer::new();
    w.u64(bank.seed());
    w.usize32(bank.len());
    w.usize32(bank.layer_sizes().len());
    for &s in bank.layer_sizes() {
        w.usize32(s);
    }
    for clf in bank.classifiers() {
        for layer in clf.layers() {
            layer.weights.iter().chain(&layer.biases).for_each(|&x| w.f64(x));
        }
    }
    frame(MAGIC, VERSION, &w.into_inner())
}

pub fn bank_from_bytes(bytes: &[u8]) -> Result<ClassifierBank, DlmdcError> {
    let (_, payload) = unframe(bytes, MAGIC, "model", VERSION)?;
    let mut r = Reader::new(payload);
    let seed = r.u64()?;
    let count = r.count(8)?;
    let size_count = r.count(4)?;
    let sizes = (0..size_count).map(|_| r.usize32()).collect::<Result<Vec<_>, _>>()?;
    if count == 0 || size_count < 2 || sizes.contains(&0) {
        return Err(FormatError::Malformed("empty bank or degenerate layer sizes".into()).into());
    }
    let mut classifiers = Vec::with_capacity(count);
    for _ in 0..count {
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for win in sizes.windows(2) {
            let (inputs, outputs) = (win[0], win[1]);
            let mut read = |len: usize| -> Result<Vec<f64>, FormatError> {
                if len.saturating_mul(8) > r.remaining() {
                    return Err(FormatError::Malformed("tensor extends past payload".into()));
                }
                (0..len).map(|_| r.f64()).collect()
            };
            let weights = read(inputs * outputs)?;
            let biases = read(outputs)?;
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                biases,
            });
        }
        classifiers.push(MlpClassifier::from_layers(layers)?);
    }
    r.finish()?;
    ClassifierBank::new(classifiers, seed)
}

pub fn save_bank(bank: &ClassifierBank, path: &Path) -> Result<(), DlmdcError> {
    write_atomic(path, &bank_to_bytes(bank)).map_err(FormatError::from)?;
    Ok(())
}

pub fn load_bank(path: &Path) -> Result<ClassifierBank, DlmdcError> {
    let bytes = fs::read(path).map_err(FormatError::from)?;
    bank_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bank() -> ClassifierBank {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nets = (0..3).map(|_| MlpClassifier::init(&[4, 5, 3, 1], 0.3, &mut rng).unwrap()).collect();
        ClassifierBank::new(nets, 77).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let b = bank();
        let bytes = bank_to_bytes(&b);
        let back = bank_from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.seed(), 77);
        assert_eq!(bank_to_bytes(&back), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.bin");
        save_bank(&bank(), &path).unwrap();
        assert_eq!(load_bank(&path).unwrap(), bank());
    }

    #[test]
    fn every_single_byte_corruption_is_detected() {
        let bytes = bank_to_bytes(&bank());
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(bank_from_bytes(&bad).is_err(), "byte {i}");
        }
    }

    #[test]
    fn newer_version_is_refused() {
        let mut bytes = bank_to_bytes(&bank());
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            bank_from_bytes(&bytes),
            Err(DlmdcError::Format(FormatError::Version { found: 2, .. }))
        ));
    }
}
