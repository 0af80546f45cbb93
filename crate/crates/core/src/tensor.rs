//! Binary tensor container used for every on-disk artifact.
//!
//! Two layouts share one envelope (magic `USBF`, little-endian throughout):
//!
//! * single tensor: magic, `u32` version, `u32` ndim, `ndim × u64` dims,
//!   then row-major `f32` data;
//! * record sequence: magic, `u32` version, `u64` record count, `u64` header
//!   length, UTF-8 header text, then per record `u32` ndim, dims, data.
//!
//! The plain-text header carries generation parameters so a record file is a
//! self-describing artifact. Readers report malformed input as a format error
//! carrying the byte offset where parsing stopped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"USBF";
pub const VERSION: u32 = 1;

/// Dimension-count sanity bound; nothing in the lab needs more than 4 axes.
const MAX_NDIM: u32 = 8;
/// Record-count sanity bound, to fail fast on corrupt headers.
const MAX_RECORDS: u64 = 1 << 30;

/// Row-major `f32` tensor with explicit dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u64>, data: Vec<f32>) -> Result<Tensor> {
        let expect = checked_len(&dims).ok_or_else(|| {
            Error::InvalidArgument(format!("tensor dims {dims:?} overflow"))
        })?;
        if expect != data.len() {
            return Err(Error::InvalidArgument(format!(
                "tensor dims {dims:?} imply {expect} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_slice(dims: &[usize], data: &[f32]) -> Result<Tensor> {
        Tensor::new(dims.iter().map(|&d| d as u64).collect(), data.to_vec())
    }

    pub fn n_elements(&self) -> usize {
        self.data.len()
    }

    /// Dimensions as `usize`, for indexing.
    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }
}

fn checked_len(dims: &[u64]) -> Option<usize> {
    let mut n: usize = 1;
    for &d in dims {
        n = n.checked_mul(usize::try_from(d).ok()?)?;
    }
    // Keep a hard ceiling well under addressable memory so corrupt dims fail
    // before any huge allocation is attempted.
    if n > (1 << 33) {
        return None;
    }
    Some(n)
}

/// Contents of a record-sequence file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub header: String,
    pub records: Vec<Tensor>,
}

struct Writer<W: Write> {
    w: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b)?;
        Ok(())
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn tensor_body(&mut self, t: &Tensor) -> Result<()> {
        self.u32(t.dims.len() as u32)?;
        for &d in &t.dims {
            self.u64(d)?;
        }
        let mut buf = Vec::with_capacity(t.data.len() * 4);
        for &v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }
}

struct Reader<R: Read> {
    r: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format { offset: self.offset, message: message.into() }
    }
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        match self.r.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(self.fail(format!("file truncated; needed {} more bytes", buf.len())))
            }
            Err(e) => Err(Error::Io(e)),
        }
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b).map_err(|e| annotate(e, what))?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b).map_err(|e| annotate(e, what))?;
        Ok(u64::from_le_bytes(b))
    }
    fn envelope(&mut self) -> Result<()> {
        let mut magic = [0u8; 4];
        self.bytes(&mut magic).map_err(|e| annotate(e, "magic"))?;
        if magic != MAGIC {
            self.offset = 0;
            return Err(self.fail(format!("bad magic {magic:?}, expected {MAGIC:?}")));
        }
        let version = self.u32("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion { found: version, expected: VERSION });
        }
        Ok(())
    }
    fn tensor_body(&mut self) -> Result<Tensor> {
        let ndim = self.u32("tensor ndim")?;
        if ndim > MAX_NDIM {
            return Err(self.fail(format!("ndim {ndim} exceeds limit {MAX_NDIM}")));
        }
        let mut dims = Vec::with_capacity(ndim as usize);
        for i in 0..ndim {
            dims.push(self.u64(&format!("dim {i}"))?);
        }
        let n = checked_len(&dims)
            .ok_or_else(|| self.fail(format!("dims {dims:?} imply an impossible size")))?;
        let mut raw = vec![0u8; n * 4];
        self.bytes(&mut raw).map_err(|e| annotate(e, "tensor data"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Tensor { dims, data })
    }
}

fn annotate(e: Error, what: &str) -> Error {
    match e {
        Error::Format { offset, message } => {
            Error::Format { offset, message: format!("{message} (while reading {what})") }
        }
        other => other,
    }
}

/// Writes a single tensor file.
pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut w = Writer { w: BufWriter::new(File::create(path)?) };
    w.bytes(&MAGIC)?;
    w.u32(VERSION)?;
    w.tensor_body(tensor)?;
    w.w.flush()?;
    Ok(())
}

/// Reads a single tensor file.
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut r = Reader { r: BufReader::new(File::open(path)?), offset: 0 };
    r.envelope()?;
    let t = r.tensor_body()?;
    expect_eof(&mut r)?;
    Ok(t)
}

/// Writes a record-sequence file with a plain-text header.
pub fn write_records(path: &Path, header: &str, records: &[Tensor]) -> Result<()> {
    let mut w = Writer { w: BufWriter::new(File::create(path)?) };
    w.bytes(&MAGIC)?;
    w.u32(VERSION)?;
    w.u64(records.len() as u64)?;
    w.u64(header.len() as u64)?;
    w.bytes(header.as_bytes())?;
    for t in records {
        w.tensor_body(t)?;
    }
    w.w.flush()?;
    Ok(())
}

/// Reads a record-sequence file.
pub fn read_records(path: &Path) -> Result<RecordFile> {
    let mut r = Reader { r: BufReader::new(File::open(path)?), offset: 0 };
    r.envelope()?;
    let count = r.u64("record count")?;
    if count > MAX_RECORDS {
        return Err(r.fail(format!("record count {count} exceeds limit {MAX_RECORDS}")));
    }
    let header_len = r.u64("header length")?;
    if header_len > (1 << 24) {
        return Err(r.fail(format!("header length {header_len} is implausible")));
    }
    let mut raw = vec![0u8; header_len as usize];
    r.bytes(&mut raw).map_err(|e| annotate(e, "header text"))?;
    let header_start = r.offset - header_len;
    let header = String::from_utf8(raw).map_err(|e| Error::Format {
        offset: header_start + e.utf8_error().valid_up_to() as u64,
        message: "header is not valid UTF-8".into(),
    })?;
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        records.push(r.tensor_body()?);
    }
    expect_eof(&mut r)?;
    Ok(RecordFile { header, records })
}

fn expect_eof<R: Read>(r: &mut Reader<R>) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.r.read(&mut probe) {
        Ok(0) => Ok(()),
        Ok(_) => Err(r.fail("trailing bytes after the final tensor")),
        Err(e) => Err(Error::Io(e)),
    }
}

/// Parses the `key = value` lines of a record-file header into pairs,
/// ignoring blank lines. Malformed lines are format errors (offset 0: the
/// header is one logical unit).
pub fn parse_header(header: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for line in header.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            offset: 0,
            message: format!("header line `{line}` is not `key = value`"),
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Renders `key = value` pairs as header text.
pub fn render_header(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn temp_path(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("usbf-tensor-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_tensor() -> Tensor {
        let dims = vec![2u64, 3, 4];
        let data: Vec<f32> = (0..24).map(|i| (i as f32) * 0.5 - 3.0).collect();
        Tensor::new(dims, data).unwrap()
    }

    #[test]
    fn single_tensor_round_trip_is_bit_exact() {
        let path = temp_path("single.usbf");
        let t = sample_tensor();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back.dims, t.dims);
        let a: Vec<u32> = t.data.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn record_round_trip_preserves_header_and_records() {
        let path = temp_path("records.usbf");
        let header = "kind = test\ncount = 2\n";
        let records =
            vec![sample_tensor(), Tensor::from_slice(&[5], &[1.0, -2.0, 3.5, 0.0, -0.0]).unwrap()];
        write_records(&path, header, &records).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back.header, header);
        assert_eq!(back.records.len(), 2);
        for (a, b) in back.records.iter().zip(&records) {
            assert_eq!(a.dims, b.dims);
            let ab: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }

    #[test]
    fn empty_records_and_empty_header_are_valid() {
        let path = temp_path("empty.usbf");
        write_records(&path, "", &[]).unwrap();
        let back = read_records(&path).unwrap();
        assert!(back.header.is_empty());
        assert!(back.records.is_empty());
    }

    #[test]
    fn truncation_reports_offset() {
        let path = temp_path("trunc-src.usbf");
        write_tensor(&path, &sample_tensor()).unwrap();
        let full = std::fs::read(&path).unwrap();
        // Cut in the middle of the data section and in the middle of the dims.
        for cut in [full.len() - 10, 14] {
            let cut_path = temp_path(&format!("trunc-{cut}.usbf"));
            std::fs::write(&cut_path, &full[..cut]).unwrap();
            match read_tensor(&cut_path) {
                Err(Error::Format { offset, message }) => {
                    assert!(offset <= cut as u64, "offset {offset} beyond cut {cut}");
                    assert!(message.contains("truncated"), "{message}");
                }
                other => panic!("expected format error, got {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let path = temp_path("magic.usbf");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let path = temp_path("version.usbf");
        write_tensor(&path, &sample_tensor()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9; // bump the version field
        std::fs::write(&path, &bytes).unwrap();
        match read_tensor(&path) {
            Err(Error::UnsupportedVersion { found, expected }) => {
                assert_eq!(found, 9);
                assert_eq!(expected, VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn absurd_dims_are_rejected_before_allocation() {
        let path = temp_path("dims.usbf");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let path = temp_path("trailing.usbf");
        write_tensor(&path, &sample_tensor()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn header_parse_round_trip() {
        let header = render_header(&[("kind", "x".into()), ("n", "7".into())]);
        let pairs = parse_header(&header).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0], ("kind".into(), "x".into()));
        assert_eq!(pairs[1], ("n".into(), "7".into()));
        assert!(parse_header("not a pair\n").is_err());
    }

    #[test]
    fn tensor_shape_validation() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![], vec![0.5]).is_ok()); // scalar: empty dims, one value
        assert!(Tensor::new(vec![0], vec![]).is_ok());
    }
}
