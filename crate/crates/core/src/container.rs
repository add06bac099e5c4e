//! On-disk GSR containers.
//!
//! Directory form: `frame_0001.png` ... `frame_TTTT.png` plus `meta.json`.
//!
//! Raw form (`*.gsr`): magic `GSR1`, little-endian `u32` T, height, width,
//! `u8` channels (3), three zero pad bytes, then `T*H*W*3` bytes of RGB8 frames
//! in time order. Metadata for a raw file lives in the sidecar `<file>.meta.json`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::canonical::to_canonical_string;
use crate::error::{Error, Result};
use crate::gsr::{GsrMeta, GsrSequence};
use crate::raster::RgbImage;

pub const RAW_MAGIC: &[u8; 4] = b"GSR1";
const RAW_HEADER_LEN: usize = 20;

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{:04}.png", t + 1)
}

/// Sidecar metadata path of a raw container.
pub fn raw_meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn is_raw_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gsr")
}

pub fn encode_raw(frames: &[RgbImage]) -> Result<Vec<u8>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Format("cannot encode an empty GSR sequence".into()))?;
    let (w, h) = (first.width(), first.height());
    if frames.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(Error::Format("frames differ in size".into()));
    }
    let to_u32 = |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")));
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + frames.len() * w * h * 3);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&to_u32(frames.len(), "frame count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(h, "height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(w, "width")?.to_le_bytes());
    out.extend_from_slice(&[3, 0, 0, 0]);
    for f in frames {
        out.extend_from_slice(f.as_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<Vec<RgbImage>> {
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(Error::Format("missing GSR1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (t, h, w) = (word(4), word(8), word(12));
    if bytes[16] != 3 {
        return Err(Error::Format(format!("unsupported channel count {}", bytes[16])));
    }
    let frame_len = h * w * 3;
    let expected = t
        .checked_mul(frame_len)
        .and_then(|n| n.checked_add(RAW_HEADER_LEN))
        .ok_or_else(|| Error::Format("GSR1 header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "GSR1 payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    bytes[RAW_HEADER_LEN..]
        .chunks_exact(frame_len.max(1))
        .take(t)
        .map(|chunk| RgbImage::from_raw(w, h, chunk.to_vec()))
        .collect()
}

fn write_meta(meta: &GsrMeta, path: &Path) -> Result<()> {
    fs::write(path, to_canonical_string(meta)?).map_err(|e| Error::io(path, e))
}

fn read_meta(path: &Path) -> Result<GsrMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: GsrMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: malformed meta.json: {e}", path.display())))?;
    if meta.version != 1 {
        return Err(Error::Format(format!("unsupported GSR meta version {}", meta.version)));
    }
    Ok(meta)
}

fn check_frames(meta: &GsrMeta, frames: &[RgbImage]) -> Result<()> {
    if frames.len() != meta.t {
        return Err(Error::Format(format!(
            "container holds {} frames, meta says t = {}",
            frames.len(),
            meta.t
        )));
    }
    let (h, w) = meta.frame_dims();
    if let Some(f) = frames.iter().find(|f| f.width() != w || f.height() != h) {
        return Err(Error::Format(format!(
            "frame is {}x{}, meta grid x patch implies {w}x{h}",
            f.width(),
            f.height()
        )));
    }
    Ok(())
}

pub fn write_dir(seq: &GsrSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, frame) in seq.frames.iter().enumerate() {
        frame.save_png(&dir.join(frame_file_name(t)))?;
    }
    write_meta(&seq.meta, &dir.join("meta.json"))
}

pub fn read_dir(dir: &Path) -> Result<GsrSequence> {
    let meta = read_meta(&dir.join("meta.json"))?;
    let frames = (0..meta.t)
        .map(|t| RgbImage::load(&dir.join(frame_file_name(t))))
        .collect::<Result<Vec<_>>>()?;
    // a stray extra frame means meta and frames disagree
    if dir.join(frame_file_name(meta.t)).exists() {
        return Err(Error::Format(format!(
            "{} holds more frames than meta t = {}",
            dir.display(),
            meta.t
        )));
    }
    check_frames(&meta, &frames)?;
    Ok(GsrSequence { frames, meta })
}

pub fn write_raw(seq: &GsrSequence, path: &Path) -> Result<()> {
    fs::write(path, encode_raw(&seq.frames)?).map_err(|e| Error::io(path, e))?;
    write_meta(&seq.meta, &raw_meta_path(path))
}

pub fn read_raw(path: &Path) -> Result<GsrSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let frames = decode_raw(&bytes)?;
    let meta = read_meta(&raw_meta_path(path))?;
    check_frames(&meta, &frames)?;
    Ok(GsrSequence { frames, meta })
}

/// Writes a raw file when `path` ends in `.gsr`, a frame directory otherwise.
pub fn save(seq: &GsrSequence, path: &Path) -> Result<()> {
    if is_raw_path(path) {
        write_raw(seq, path)
    } else {
        write_dir(seq, path)
    }
}

pub fn load(path: &Path) -> Result<GsrSequence> {
    if path.is_dir() {
        read_dir(path)
    } else {
        read_raw(path)
    }
}
