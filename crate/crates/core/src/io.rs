//! Flat binary and CSV layouts for sample batches and discriminators.
//!
//! Binary batch (little endian):
//!
//! ```text
//! b"NSPB" | version u8 = 1 | n u64 | d u64 | has_tag u8 | [master u64 | stream u64] | n·d f64
//! ```
//!
//! Binary discriminator:
//!
//! ```text
//! b"NSPD" | version u8 = 1 | family u8 (0 real, 1 complex, 2 conv) | m u64 | d u64 | params f64
//! ```
//!
//! CSV batch: a `n,d,master_seed,stream` header, one metadata row (seed
//! fields empty when untagged), then `n` rows of `d` values.
//!
//! CSV discriminator: a `family,m,d` header, one metadata row, then `m`
//! rows of per-feature parameters (complex rows hold `re` then `im`).

use std::io::{BufRead, Read, Write};

use crate::discriminator::{Discriminator, Family, Shape};
use crate::error::{Error, Result};
use crate::process::SampleBatch;
use crate::rng::SeedTag;

const BATCH_MAGIC: &[u8; 4] = b"NSPB";
const DISC_MAGIC: &[u8; 4] = b"NSPD";
const VERSION: u8 = 1;

fn family_code(f: Family) -> u8 {
    match f {
        Family::Real => 0,
        Family::ComplexFourier => 1,
        Family::Convolutional => 2,
    }
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated input: {e}")))?;
    Ok(buf)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<_, 8>(r)?))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    (0..count).map(|_| Ok(f64::from_le_bytes(read_exact::<_, 8>(r)?))).collect()
}

fn check_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let got = read_exact::<_, 4>(r)?;
    if &got != magic {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let [version] = read_exact::<_, 1>(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

fn size(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("size {v} out of range")))
}

pub fn write_batch_binary<W: Write>(batch: &SampleBatch, mut w: W) -> Result<()> {
    w.write_all(BATCH_MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(batch.n() as u64).to_le_bytes())?;
    w.write_all(&(batch.d() as u64).to_le_bytes())?;
    match batch.seed_tag() {
        Some(tag) => {
            w.write_all(&[1])?;
            w.write_all(&tag.master_seed.to_le_bytes())?;
            w.write_all(&tag.stream.to_le_bytes())?;
        }
        None => w.write_all(&[0])?,
    }
    for v in batch.paths() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_batch_binary<R: Read>(mut r: R) -> Result<SampleBatch> {
    check_header(&mut r, BATCH_MAGIC)?;
    let n = size(read_u64(&mut r)?)?;
    let d = size(read_u64(&mut r)?)?;
    let tag = match read_exact::<_, 1>(&mut r)? {
        [0] => None,
        [1] => Some(SeedTag { master_seed: read_u64(&mut r)?, stream: read_u64(&mut r)? }),
        [x] => return Err(Error::Format(format!("bad tag flag {x}"))),
    };
    let count = n.checked_mul(d).ok_or_else(|| Error::Format("batch size overflows".into()))?;
    let paths = read_f64s(&mut r, count)?;
    SampleBatch::from_paths(d, paths, tag)
}

pub fn write_batch_csv<W: Write>(batch: &SampleBatch, mut w: W) -> Result<()> {
    writeln!(w, "n,d,master_seed,stream")?;
    match batch.seed_tag() {
        Some(t) => writeln!(w, "{},{},{},{}", batch.n(), batch.d(), t.master_seed, t.stream)?,
        None => writeln!(w, "{},{},,", batch.n(), batch.d())?,
    }
    for row in batch.rows() {
        write_row(&mut w, row)?;
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> Result<()> {
    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

fn parse_row(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = line
        .split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {f:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(Error::Format(format!("expected {expected} fields, got {}", vals.len())));
    }
    Ok(vals)
}

fn csv_lines<R: BufRead>(r: R) -> Result<Vec<String>> {
    let lines = r.lines().collect::<std::io::Result<Vec<_>>>()?;
    Ok(lines.into_iter().filter(|l| !l.trim().is_empty()).collect())
}

pub fn read_batch_csv<R: BufRead>(r: R) -> Result<SampleBatch> {
    let lines = csv_lines(r)?;
    if lines.len() < 2 || lines[0].trim() != "n,d,master_seed,stream" {
        return Err(Error::Format("missing batch CSV header".into()));
    }
    let meta: Vec<&str> = lines[1].split(',').map(str::trim).collect();
    if meta.len() != 4 {
        return Err(Error::Format("batch metadata needs 4 fields".into()));
    }
    let num = |s: &str| s.parse::<u64>().map_err(|e| Error::Format(format!("bad integer {s:?}: {e}")));
    let (n, d) = (size(num(meta[0])?)?, size(num(meta[1])?)?);
    let tag = match (meta[2], meta[3]) {
        ("", "") => None,
        (m, s) => Some(SeedTag { master_seed: num(m)?, stream: num(s)? }),
    };
    if lines.len() - 2 != n {
        return Err(Error::Format(format!("expected {n} rows, got {}", lines.len() - 2)));
    }
    let mut paths = Vec::with_capacity(n * d);
    for line in &lines[2..] {
        paths.extend(parse_row(line, d)?);
    }
    SampleBatch::from_paths(d, paths, tag)
}

pub fn write_disc_binary<W: Write>(disc: &Discriminator, mut w: W) -> Result<()> {
    w.write_all(DISC_MAGIC)?;
    w.write_all(&[VERSION, family_code(disc.family())])?;
    w.write_all(&(disc.m() as u64).to_le_bytes())?;
    w.write_all(&(disc.d() as u64).to_le_bytes())?;
    for v in disc.to_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_disc_binary<R: Read>(mut r: R) -> Result<Discriminator> {
    check_header(&mut r, DISC_MAGIC)?;
    let family = match read_exact::<_, 1>(&mut r)? {
        [0] => Family::Real,
        [1] => Family::ComplexFourier,
        [2] => Family::Convolutional,
        [x] => return Err(Error::Format(format!("unknown family code {x}"))),
    };
    let m = size(read_u64(&mut r)?)?;
    let d = size(read_u64(&mut r)?)?;
    let shape = Shape { family, d, m };
    if m == 0 || (family == Family::Real && m != 1) {
        return Err(Error::Format(format!("invalid feature count {m}")));
    }
    let flat = read_f64s(&mut r, shape.param_count())?;
    rebuild(shape, &flat)
}

fn rebuild(shape: Shape, flat: &[f64]) -> Result<Discriminator> {
    let disc = Discriminator::from_flat(shape, flat)?;
    if let Discriminator::Real { beta, .. } = &disc {
        // Re-applies the norm constraint.
        return Discriminator::real(beta.as_slice().to_vec());
    }
    Ok(disc)
}

pub fn write_disc_csv<W: Write>(disc: &Discriminator, mut w: W) -> Result<()> {
    writeln!(w, "family,m,d")?;
    writeln!(w, "{},{},{}", disc.family().tag(), disc.m(), disc.d())?;
    let flat = disc.to_flat();
    for row in flat.chunks_exact(flat.len() / disc.m()) {
        write_row(&mut w, row)?;
    }
    Ok(())
}

pub fn read_disc_csv<R: BufRead>(r: R) -> Result<Discriminator> {
    let lines = csv_lines(r)?;
    if lines.len() < 2 || lines[0].trim() != "family,m,d" {
        return Err(Error::Format("missing discriminator CSV header".into()));
    }
    let meta: Vec<&str> = lines[1].split(',').map(str::trim).collect();
    if meta.len() != 3 {
        return Err(Error::Format("discriminator metadata needs 3 fields".into()));
    }
    let family = Family::from_tag(meta[0]).ok_or_else(|| Error::Format(format!("unknown family {:?}", meta[0])))?;
    let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(format!("bad integer {s:?}: {e}")));
    let shape = Shape { family, m: num(meta[1])?, d: num(meta[2])? };
    if shape.m == 0 || lines.len() - 2 != shape.m {
        return Err(Error::Format(format!("expected {} feature rows, got {}", shape.m, lines.len() - 2)));
    }
    let width = shape.param_count() / shape.m;
    let mut flat = Vec::with_capacity(shape.param_count());
    for line in &lines[2..] {
        flat.extend(parse_row(line, width)?);
    }
    rebuild(shape, &flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::fourier_basis_discriminator;
    use crate::process::sample_white_noise;
    use crate::rng::Role;
    use std::io::Cursor;

    #[test]
    fn batch_round_trips() {
        let b = sample_white_noise(7, 4, SeedTag::simple(3, Role::Data)).unwrap();
        let mut bin = Vec::new();
        write_batch_binary(&b, &mut bin).unwrap();
        assert_eq!(bin.len(), 4 + 1 + 16 + 1 + 16 + 7 * 4 * 8);
        let back = read_batch_binary(Cursor::new(&bin)).unwrap();
        assert_eq!(back.paths(), b.paths());
        assert_eq!(back.seed_tag(), b.seed_tag());

        let mut csv = Vec::new();
        write_batch_csv(&b, &mut csv).unwrap();
        let back = read_batch_csv(Cursor::new(&csv)).unwrap();
        assert_eq!(back.paths(), b.paths());
        assert_eq!(back.seed_tag(), b.seed_tag());

        let untagged = SampleBatch::from_paths(2, vec![1.0, 2.0], None).unwrap();
        let mut csv = Vec::new();
        write_batch_csv(&untagged, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv.clone()).unwrap(), "n,d,master_seed,stream\n1,2,,\n1,2\n");
        assert_eq!(read_batch_csv(Cursor::new(&csv)).unwrap().seed_tag(), None);
    }

    #[test]
    fn discriminator_round_trips() {
        let discs = [
            fourier_basis_discriminator(4).unwrap(),
            Discriminator::convolutional(vec![vec![0.5, -0.25, 1.0]; 3]).unwrap(),
            Discriminator::real(vec![0.6, 0.8]).unwrap(),
        ];
        for disc in discs {
            let mut bin = Vec::new();
            write_disc_binary(&disc, &mut bin).unwrap();
            assert_eq!(read_disc_binary(Cursor::new(&bin)).unwrap(), disc);
            let mut csv = Vec::new();
            write_disc_csv(&disc, &mut csv).unwrap();
            assert_eq!(read_disc_csv(Cursor::new(&csv)).unwrap(), disc);
        }
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(read_batch_binary(Cursor::new(b"XXXX\x01")), Err(Error::Format(_))));
        let b = SampleBatch::from_paths(2, vec![1.0, 2.0, 3.0, 4.0], None).unwrap();
        let mut bin = Vec::new();
        write_batch_binary(&b, &mut bin).unwrap();
        bin.truncate(bin.len() - 3);
        assert!(matches!(read_batch_binary(Cursor::new(&bin)), Err(Error::Format(_))));
        assert!(read_batch_csv(Cursor::new("n,d,master_seed,stream\n2,2,,\n1,2\n")).is_err());
        assert!(read_disc_csv(Cursor::new("family,m,d\nreal,1,2\n1,1\n")).is_err());
        assert!(read_disc_csv(Cursor::new("family,m,d\nnope,1,2\n1,0\n")).is_err());
    }
}
