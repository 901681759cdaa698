//! Snapshot hand-off between solvers and consumers, and the on-disk stream.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! header:  b"BSNP"  u16 version (=1)  u16 reserved (=0)
//! record:  u8 tag (0 = spectral, 1 = grid)
//!          u64 trajectory id
//!          f64 t
//!          u32 size (K for spectral, n for grid)
//!          f64 × len   spectral: 2K values a_1, a_-1, a_2, a_-2, …, a_K, a_-K
//!                      grid:     n cell averages, cell j covering [j/n, (j+1)/n)
//! ```
//!
//! The plain-text export writes one record per line:
//! `tag trajectory t size v_1 … v_len`, tag spelled `spectral` or `grid`,
//! floats in shortest round-trip decimal form.

use std::io::{self, BufRead, Read, Write};

use crate::entropy::GridField;
use crate::error::{Error, Result};
use crate::spectral::SpectralField;

pub const MAGIC: &[u8; 4] = b"BSNP";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug)]
pub enum FieldRef<'a> {
    Spectral(&'a SpectralField),
    Grid(&'a GridField),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OwnedField {
    Spectral(SpectralField),
    Grid(GridField),
}

impl OwnedField {
    pub fn as_ref(&self) -> FieldRef<'_> {
        match self {
            OwnedField::Spectral(f) => FieldRef::Spectral(f),
            OwnedField::Grid(g) => FieldRef::Grid(g),
        }
    }
}

impl FieldRef<'_> {
    pub fn to_owned(self) -> OwnedField {
        match self {
            FieldRef::Spectral(f) => OwnedField::Spectral(f.clone()),
            FieldRef::Grid(g) => OwnedField::Grid(g.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub trajectory: u64,
    pub t: f64,
    pub field: OwnedField,
}

/// Receives snapshots in time order for one trajectory.
pub trait SnapshotSink {
    fn accept(&mut self, trajectory: u64, t: f64, field: FieldRef<'_>) -> Result<()>;
}

impl<F> SnapshotSink for F
where
    F: FnMut(u64, f64, FieldRef<'_>) -> Result<()>,
{
    fn accept(&mut self, trajectory: u64, t: f64, field: FieldRef<'_>) -> Result<()> {
        self(trajectory, t, field)
    }
}

impl SnapshotSink for Vec<Snapshot> {
    fn accept(&mut self, trajectory: u64, t: f64, field: FieldRef<'_>) -> Result<()> {
        self.push(Snapshot {
            trajectory,
            t,
            field: field.to_owned(),
        });
        Ok(())
    }
}

pub struct SnapshotWriter<W: Write> {
    out: W,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&0u16.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn write(&mut self, trajectory: u64, t: f64, field: FieldRef<'_>) -> Result<()> {
        let (tag, size) = match field {
            FieldRef::Spectral(f) => (0u8, f.k()),
            FieldRef::Grid(g) => (1u8, g.n()),
        };
        let size = u32::try_from(size).map_err(|_| Error::SnapshotFormat("field too large".into()))?;
        self.out.write_all(&[tag])?;
        self.out.write_all(&trajectory.to_le_bytes())?;
        self.out.write_all(&t.to_le_bytes())?;
        self.out.write_all(&size.to_le_bytes())?;
        match field {
            FieldRef::Spectral(f) => {
                for (_, a) in f.modes() {
                    self.out.write_all(&a.to_le_bytes())?;
                }
            }
            FieldRef::Grid(g) => {
                for v in g.cells() {
                    self.out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> SnapshotSink for SnapshotWriter<W> {
    fn accept(&mut self, trajectory: u64, t: f64, field: FieldRef<'_>) -> Result<()> {
        self.write(trajectory, t, field)
    }
}

pub struct SnapshotReader<R: Read> {
    input: R,
}

impl<R: Read> SnapshotReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut header = [0u8; 8];
        input.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::SnapshotFormat("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(Error::SnapshotFormat(format!("unsupported version {version}")));
        }
        Ok(Self { input })
    }

    fn read_record(&mut self) -> Result<Option<Snapshot>> {
        let mut tag = [0u8; 1];
        match self.input.read_exact(&mut tag) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let trajectory = u64::from_le_bytes(self.read_array()?);
        let t = f64::from_le_bytes(self.read_array()?);
        let size = u32::from_le_bytes(self.read_array()?) as usize;
        let field = match tag[0] {
            0 => {
                if size == 0 {
                    return Err(Error::SnapshotFormat("spectral record with K = 0".into()));
                }
                let mut cos = Vec::with_capacity(size);
                let mut sin = Vec::with_capacity(size);
                for _ in 0..size {
                    cos.push(f64::from_le_bytes(self.read_array()?));
                    sin.push(f64::from_le_bytes(self.read_array()?));
                }
                OwnedField::Spectral(SpectralField::from_parts(cos, sin))
            }
            1 => {
                let cells = (0..size)
                    .map(|_| self.read_array().map(f64::from_le_bytes))
                    .collect::<Result<Vec<_>>>()?;
                OwnedField::Grid(GridField::new(cells))
            }
            other => return Err(Error::SnapshotFormat(format!("unknown tag {other}"))),
        };
        Ok(Some(Snapshot { trajectory, t, field }))
    }

    fn read_array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input
            .read_exact(&mut buf)
            .map_err(|e| match e.kind() {
                io::ErrorKind::UnexpectedEof => Error::SnapshotFormat("truncated record".into()),
                _ => e.into(),
            })?;
        Ok(buf)
    }
}

impl<R: Read> Iterator for SnapshotReader<R> {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

/// Writes snapshots in the plain-text layout.
pub fn write_text<W: Write>(out: &mut W, snapshots: &[Snapshot]) -> Result<()> {
    for snap in snapshots {
        let (tag, size, values): (&str, usize, Vec<f64>) = match &snap.field {
            OwnedField::Spectral(f) => ("spectral", f.k(), f.modes().map(|(_, a)| a).collect()),
            OwnedField::Grid(g) => ("grid", g.n(), g.cells().to_vec()),
        };
        write!(out, "{tag} {} {} {size}", snap.trajectory, snap.t)?;
        for v in values {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(input: R) -> Result<Vec<Snapshot>> {
    let bad = |line: usize, what: &str| Error::SnapshotFormat(format!("line {line}: {what}"));
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_ascii_whitespace();
        let tag = parts.next().ok_or_else(|| bad(i + 1, "missing tag"))?;
        let trajectory: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(i + 1, "bad trajectory id"))?;
        let t: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(i + 1, "bad time"))?;
        let size: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(i + 1, "bad size"))?;
        let values = parts
            .map(|s| s.parse::<f64>().map_err(|_| bad(i + 1, "bad value")))
            .collect::<Result<Vec<_>>>()?;
        let field = match tag {
            "spectral" if values.len() == 2 * size && size > 0 => {
                let cos = values.iter().step_by(2).copied().collect();
                let sin = values.iter().skip(1).step_by(2).copied().collect();
                OwnedField::Spectral(SpectralField::from_parts(cos, sin))
            }
            "grid" if values.len() == size => OwnedField::Grid(GridField::new(values)),
            _ => return Err(bad(i + 1, "tag and value count disagree")),
        };
        out.push(Snapshot { trajectory, t, field });
    }
    Ok(out)
}
