//! Tensor and sample-point files.
//!
//! A tensor file is raw little-endian interleaved `(re, im)` pairs in
//! row-major order. Its header lives next to it in `<path>.json`:
//!
//! ```json
//! {"schema_version": 1, "dims": [8, 8], "dtype": "f64", "layout": "row_major_interleaved"}
//! ```
//!
//! `dtype` is `f64` or `f32` (per component). A points file is JSON with
//! one list of `[re, im]` pairs per dimension:
//!
//! ```json
//! {"schema_version": 1, "points": [[[1.0, 0.0], [0.0, 1.0]]]}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, PrecisionMode};
use crate::vandermonde::SamplePoints;

pub const FILE_SCHEMA_VERSION: u32 = 1;
pub const LAYOUT: &str = "row_major_interleaved";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn for_precision(mode: PrecisionMode) -> Self {
        match mode {
            PrecisionMode::F64Reference => Dtype::F64,
            PrecisionMode::F32 | PrecisionMode::Bf16Split3 => Dtype::F32,
        }
    }

    fn component_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub schema_version: u32,
    pub dims: Vec<usize>,
    pub dtype: Dtype,
    pub layout: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn encode_tensor(x: &ComplexTensor, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(x.len() * 2 * dtype.component_bytes());
    for (re, im) in x.re().iter().zip(x.im()) {
        match dtype {
            Dtype::F64 => {
                out.extend_from_slice(&re.to_le_bytes());
                out.extend_from_slice(&im.to_le_bytes());
            }
            Dtype::F32 => {
                out.extend_from_slice(&(*re as f32).to_le_bytes());
                out.extend_from_slice(&(*im as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_tensor(bytes: &[u8], header: &TensorHeader) -> Result<ComplexTensor> {
    if header.layout != LAYOUT {
        return Err(Error::Io(format!("unsupported layout {:?}", header.layout)));
    }
    let len: usize = header.dims.iter().product();
    let width = header.dtype.component_bytes();
    if bytes.len() != len * 2 * width {
        return Err(Error::Io(format!(
            "expected {} bytes for dims {:?} ({:?}), found {}",
            len * 2 * width,
            header.dims,
            header.dtype,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(width)
        .map(|c| match header.dtype {
            Dtype::F64 => f64::from_le_bytes(c.try_into().unwrap()),
            Dtype::F32 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
        })
        .collect();
    let re = values.iter().step_by(2).copied().collect();
    let im = values.iter().skip(1).step_by(2).copied().collect();
    ComplexTensor::new(header.dims.clone(), re, im)
}

/// Writes the raw data to `path` and the header to `<path>.json`.
pub fn write_tensor(path: &Path, x: &ComplexTensor, dtype: Dtype) -> Result<()> {
    let header = TensorHeader {
        schema_version: FILE_SCHEMA_VERSION,
        dims: x.shape().to_vec(),
        dtype,
        layout: LAYOUT.to_string(),
    };
    write_file(path, &encode_tensor(x, dtype))?;
    write_file(&sidecar_path(path), serde_json::to_string_pretty(&header)?.as_bytes())
}

pub fn read_tensor(path: &Path) -> Result<ComplexTensor> {
    let side = sidecar_path(path);
    let header: TensorHeader = serde_json::from_slice(&read_file(&side)?)
        .map_err(|e| Error::Io(format!("bad header {}: {e}", side.display())))?;
    if header.schema_version != FILE_SCHEMA_VERSION {
        return Err(Error::Io(format!("unsupported schema_version {}", header.schema_version)));
    }
    decode_tensor(&read_file(path)?, &header)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PointsFile {
    schema_version: u32,
    points: Vec<Vec<[f64; 2]>>,
}

pub fn parse_points(text: &str) -> Result<Vec<SamplePoints>> {
    let file: PointsFile =
        serde_json::from_str(text).map_err(|e| Error::Io(format!("bad points file: {e}")))?;
    if file.schema_version != FILE_SCHEMA_VERSION {
        return Err(Error::Io(format!("unsupported schema_version {}", file.schema_version)));
    }
    file.points
        .into_iter()
        .map(|dim| SamplePoints::arbitrary(dim.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()))
        .collect()
}

pub fn points_to_json(samples: &[SamplePoints]) -> Result<String> {
    let file = PointsFile {
        schema_version: FILE_SCHEMA_VERSION,
        points: samples.iter().map(|s| s.points().iter().map(|z| [z.re, z.im]).collect()).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn read_points(path: &Path) -> Result<Vec<SamplePoints>> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_points(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip_f64_and_f32() {
        let dir = tempfile::tempdir().unwrap();
        let x = ComplexTensor::from_fn(vec![2, 3], |i| Complex64::new(i[0] as f64 + 0.1, -(i[1] as f64))).unwrap();
        let p = dir.path().join("x.bin");
        write_tensor(&p, &x, Dtype::F64).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), x);
        assert_eq!(fs::metadata(&p).unwrap().len(), 6 * 16);

        write_tensor(&p, &x, Dtype::F32).unwrap();
        let y = read_tensor(&p).unwrap();
        assert_eq!(y, x.to_precision(PrecisionMode::F32));
        assert_eq!(fs::metadata(&p).unwrap().len(), 6 * 8);
        let header: TensorHeader = serde_json::from_slice(&fs::read(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(header.dims, vec![2, 3]);
        assert_eq!(header.dtype, Dtype::F32);
    }

    #[test]
    fn interleaved_little_endian() {
        let x = ComplexTensor::from_complex(vec![1], &[Complex64::new(1.0, -2.0)]).unwrap();
        let bytes = encode_tensor(&x, Dtype::F32);
        assert_eq!(bytes, [1.0f32.to_le_bytes(), (-2.0f32).to_le_bytes()].concat());
    }

    #[test]
    fn truncated_data_is_rejected() {
        let header =
            TensorHeader { schema_version: 1, dims: vec![4], dtype: Dtype::F64, layout: LAYOUT.into() };
        assert!(matches!(decode_tensor(&[0u8; 63], &header), Err(Error::Io(_))));
        assert!(read_tensor(Path::new("/nonexistent/x.bin")).is_err());
    }

    #[test]
    fn points_round_trip() {
        let s = vec![SamplePoints::uniform(4).unwrap()];
        let back = parse_points(&points_to_json(&s).unwrap()).unwrap();
        assert_eq!(back[0].points(), s[0].points());
        assert!(parse_points(r#"{"schema_version":1,"points":[[[0.0,0.0]]]}"#).is_err());
        assert!(parse_points("[1,2]").is_err());
    }
}
