//! Weight-file persistence.
//!
//! Little-endian binary layout:
//!
//! ```text
//! magic "FSCRNNW1" (8 bytes)
//! format version  u32
//! base_channels   u32
//! n_classes       u32
//! repeated tensor blocks, fixed architectural order:
//!     name length u32, name bytes,
//!     dim count   u32, dims u32...,
//!     data        f64 x prod(dims)
//! crc32 of all preceding bytes  u32
//! ```

use std::path::Path;

use super::unet::UNetModel;
use super::SegNetError;

const MAGIC: &[u8; 8] = b"FSCRNNW1";
const VERSION: u32 = 1;

pub fn save_weights(model: &UNetModel, path: &Path) -> Result<(), SegNetError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.base_channels() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.n_classes() as u32).to_le_bytes());
    for (name, dims, data) in model.state_tensors() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        debug_assert_eq!(dims.iter().product::<usize>(), data.len(), "{name}");
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<UNetModel, SegNetError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MAGIC.len() + 12 + 4 {
        return Err(SegNetError::Corrupt("file too short".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(SegNetError::BadMagic);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored_crc {
        return Err(SegNetError::Corrupt("checksum mismatch".into()));
    }

    let mut cur = Cursor {
        bytes: body,
        pos: 8,
    };
    let version = cur.read_u32()?;
    if version != VERSION {
        return Err(SegNetError::UnsupportedVersion(version));
    }
    let base_channels = cur.read_u32()? as usize;
    let n_classes = cur.read_u32()? as usize;
    if base_channels == 0 || n_classes < 2 {
        return Err(SegNetError::Corrupt("implausible header".into()));
    }

    let mut model = UNetModel::new(base_channels, n_classes, 0);
    for (name, dims, data) in model.state_tensors_mut() {
        let got_name = cur.read_string()?;
        if got_name != name {
            return Err(SegNetError::Corrupt(format!(
                "expected tensor {name}, found {got_name}"
            )));
        }
        let ndims = cur.read_u32()? as usize;
        let mut got_dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            got_dims.push(cur.read_u32()? as usize);
        }
        if got_dims != dims {
            return Err(SegNetError::Corrupt(format!(
                "tensor {name}: dims {got_dims:?}, expected {dims:?}"
            )));
        }
        for slot in data.iter_mut() {
            *slot = cur.read_f64()?;
        }
    }
    if cur.pos != body.len() {
        return Err(SegNetError::Corrupt("trailing bytes after tensors".into()));
    }
    Ok(model)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], SegNetError> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| SegNetError::Corrupt("unexpected end of file".into()))?;
        self.pos += n;
        Ok(chunk)
    }

    fn read_u32(&mut self) -> Result<u32, SegNetError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn read_f64(&mut self) -> Result<f64, SegNetError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn read_string(&mut self) -> Result<String, SegNetError> {
        let len = self.read_u32()? as usize;
        if len > 4096 {
            return Err(SegNetError::Corrupt("tensor name too long".into()));
        }
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| SegNetError::Corrupt("tensor name not utf8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segnet::Tensor4;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("fundus-weights-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip_preserves_forward_outputs() {
        let mut model = UNetModel::new(2, 3, 21);
        // push some training state into the running stats
        let x = Tensor4::from_vec(
            2,
            1,
            16,
            16,
            (0..512).map(|i| (i % 7) as f64 / 7.0).collect(),
        )
        .unwrap();
        let _ = model.forward_train(&x).unwrap();

        let path = tmp("roundtrip.bin");
        save_weights(&model, &path).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(loaded, model);

        let a = model.forward_infer(&x).unwrap();
        let b = loaded.forward_infer(&x).unwrap();
        assert_eq!(a.tensor().data(), b.tensor().data());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let model = UNetModel::new(2, 3, 1);
        let path = tmp("truncated.bin");
        save_weights(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_weights(&path), Err(SegNetError::Corrupt(_))));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let model = UNetModel::new(2, 3, 1);
        let path = tmp("magic.bin");
        save_weights(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_weights(&path), Err(SegNetError::BadMagic)));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let model = UNetModel::new(2, 3, 1);
        let path = tmp("version.bin");
        save_weights(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99; // version field
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_weights(&path),
            Err(SegNetError::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn bit_flip_fails_the_checksum() {
        let model = UNetModel::new(2, 3, 1);
        let path = tmp("bitflip.bin");
        save_weights(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_weights(&path), Err(SegNetError::Corrupt(_))));
    }
}
