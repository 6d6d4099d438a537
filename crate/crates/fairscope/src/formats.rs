//! Raw frame files, checkpoints and PGM images.

use std::fs;
use std::io::Write;
use std::path::Path;

use fairscope_core::model::{MlpParams, BLOCK_NAMES};
use fairscope_core::Tensor2D;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Frames stored back to back as little-endian `f32`, row-major.
pub fn write_frames(path: &Path, frames: &[Tensor2D]) -> AppResult<()> {
    let mut bytes = Vec::with_capacity(frames.iter().map(|f| f.len() * 4).sum());
    for f in frames {
        for &v in f.values() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(AppError::io(path))
}

pub fn read_frames(path: &Path, count: usize, height: usize, width: usize) -> AppResult<Vec<Tensor2D>> {
    let bytes = fs::read(path).map_err(AppError::io(path))?;
    let expected = count * height * width * 4;
    if bytes.len() != expected {
        return Err(AppError::corrupt(path, format!("{} bytes, expected {expected} for {count} frames of {height}x{width}", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AppError::corrupt(path, "non-finite pixel"));
    }
    values
        .chunks_exact(height * width)
        .map(|px| Tensor2D::new(height, width, px.to_vec()).map_err(AppError::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub input: usize,
    pub hidden: usize,
    pub feature: usize,
    pub classes: usize,
    pub seed: u64,
    pub epoch: usize,
    /// Block names and lengths in file order.
    pub blocks: Vec<(String, usize)>,
}

const CHECKPOINT_FORMAT: &str = "fairscope-checkpoint";

pub fn checkpoint_bytes(params: &MlpParams, seed: u64, epoch: usize) -> Vec<u8> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        input: params.input,
        hidden: params.hidden,
        feature: params.feature,
        classes: params.classes,
        seed,
        epoch,
        blocks: BLOCK_NAMES.iter().zip(params.blocks()).map(|(n, b)| (n.to_string(), b.len())).collect(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for block in params.blocks() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_checkpoint(path: &Path, params: &MlpParams, seed: u64, epoch: usize) -> AppResult<()> {
    fs::write(path, checkpoint_bytes(params, seed, epoch)).map_err(AppError::io(path))
}

pub fn read_checkpoint(path: &Path) -> AppResult<(CheckpointHeader, MlpParams)> {
    let bytes = fs::read(path).map_err(AppError::io(path))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| AppError::corrupt(path, "missing header line"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| AppError::corrupt(path, format!("header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT || header.version != 1 {
        return Err(AppError::corrupt(path, "not a version-1 checkpoint"));
    }
    let mut params = MlpParams::zeros(header.input, header.hidden, header.feature, header.classes);
    let declared: Vec<(&str, usize)> = header.blocks.iter().map(|(n, l)| (n.as_str(), *l)).collect();
    let actual: Vec<(&str, usize)> = BLOCK_NAMES.iter().copied().zip(params.blocks().map(|b| b.len())).collect();
    if declared != actual {
        return Err(AppError::corrupt(path, "block table disagrees with the declared dimensions"));
    }
    let body = &bytes[split + 1..];
    if body.len() != params.num_params() * 8 {
        return Err(AppError::corrupt(path, format!("{} payload bytes, expected {}", body.len(), params.num_params() * 8)));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for block in params.blocks_mut() {
        for slot in block.iter_mut() {
            *slot = values.next().expect("length checked");
        }
    }
    params.validate().map_err(|e| AppError::corrupt(path, e.to_string()))?;
    Ok((header, params))
}

/// Binary PGM, min-max normalized to 0..=255.
pub fn pgm_bytes(image: &Tensor2D) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.min_max_normalized().values().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(path: &Path, image: &Tensor2D) -> AppResult<()> {
    let mut f = fs::File::create(path).map_err(AppError::io(path))?;
    f.write_all(&pgm_bytes(image)).map_err(AppError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairscope_core::Rng;

    #[test]
    fn frames_roundtrip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.f32");
        let frames = vec![Tensor2D::from_fn(2, 3, |r, c| (r * 3 + c) as f64 * 0.25).unwrap(); 2];
        write_frames(&path, &frames).unwrap();
        assert_eq!(read_frames(&path, 2, 2, 3).unwrap(), frames);
        assert!(matches!(read_frames(&path, 3, 2, 3), Err(AppError::Corrupt { .. })));
        fs::write(&path, f32::NAN.to_le_bytes().repeat(6)).unwrap();
        assert!(matches!(read_frames(&path, 1, 2, 3), Err(AppError::Corrupt { .. })));
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let p = MlpParams::init(12, 5, 3, 2, &mut Rng::new(9));
        write_checkpoint(&path, &p, 9, 10).unwrap();
        let (h, q) = read_checkpoint(&path).unwrap();
        assert_eq!(q, p);
        assert_eq!((h.seed, h.epoch), (9, 10));
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(AppError::Corrupt { .. })));
    }

    #[test]
    fn pgm_header_and_payload() {
        let img = Tensor2D::from_fn(2, 3, |r, c| (r * 3 + c) as f64).unwrap();
        let bytes = pgm_bytes(&img);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 51, 102, 153, 204, 255]);
    }
}
