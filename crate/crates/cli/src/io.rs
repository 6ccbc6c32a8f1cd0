//! File formats: CSV exports, the linking-matrix container and text inputs.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use stt_core::linalg::c;
use stt_core::propagator::ObservableSeries;
use stt_core::stt::{ChebyshevBasis, LinkingSet, TrainingCurve, TransferTrain};
use stt_core::{CMat, C64};

use crate::error::CliError;

pub const LINK_MAGIC: &[u8; 8] = b"STTLINK\0";
pub const LINK_VERSION: u32 = 1;
/// Little-endian `(re, im)` pairs of IEEE-754 doubles.
pub const DTYPE_C128: u32 = 1;

fn writer(path: &Path, header_comment: Option<&str>) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut file = BufWriter::new(File::create(path).map_err(|e| CliError::Resource(format!("{}: {e}", path.display())))?);
    if let Some(line) = header_comment {
        writeln!(file, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(file))
}

fn num(x: f64) -> String {
    // shortest round-trip representation keeps reruns byte-identical
    format!("{x:e}")
}

/// `t,<obs...>,trace_dev,herm_dev`.
pub fn write_series(path: &Path, s: &ObservableSeries, header_comment: Option<&str>) -> Result<(), CliError> {
    let mut w = writer(path, header_comment)?;
    let mut head = vec!["t".to_string()];
    head.extend(s.names.iter().cloned());
    head.extend(["trace_dev".into(), "herm_dev".into()]);
    w.write_record(&head)?;
    for k in 0..s.times.len() {
        let mut row = vec![num(s.times[k])];
        row.extend(s.values[k].iter().map(|&v| num(v)));
        row.push(num(s.trace_dev[k]));
        row.push(num(s.herm_dev[k]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `step,max_bond,bytes`.
pub fn write_bonds(path: &Path, log: &[(usize, usize, usize)]) -> Result<(), CliError> {
    let mut w = writer(path, None)?;
    w.write_record(["step", "max_bond", "bytes"])?;
    for &(s, b, m) in log {
        w.write_record([s.to_string(), b.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `step,loss`.
pub fn write_curve(path: &Path, curve: &TrainingCurve) -> Result<(), CliError> {
    let mut w = writer(path, None)?;
    w.write_record(["step", "loss"])?;
    for &(s, l) in &curve.points {
        w.write_record([s.to_string(), num(l)])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with an optional `# ...` first line.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>], header_comment: Option<&str>) -> Result<(), CliError> {
    let mut w = writer(path, header_comment)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`] or [`write_series`]; returns the
/// comment line (without `# `), the header and the rows.
pub fn read_table(path: &Path) -> Result<(Option<String>, Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path)?;
    let (comment, body) = match text.strip_prefix("# ") {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            (Some(line.to_string()), body)
        }
        None => (None, text.as_str()),
    };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| CliError::Config(format!("{}: bad number `{f}`: {e}", path.display()))))
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    Ok((comment, header, rows))
}

/// Serializes trained transfer trains together with the hash of the
/// configuration that produced them.
pub fn write_linking(path: &Path, set: &LinkingSet, hash: &[u8; 32]) -> Result<(), CliError> {
    let mut out = Vec::new();
    out.extend_from_slice(LINK_MAGIC);
    let n_basis = set.bases.first().map_or(0, |b| b.n_basis);
    for v in [LINK_VERSION, DTYPE_C128, n_basis as u32, set.memory as u32, set.channels as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(hash);
    for b in &set.bases {
        out.extend_from_slice(&b.lo.to_le_bytes());
        out.extend_from_slice(&b.hi.to_le_bytes());
    }
    for t in &set.trains {
        out.extend_from_slice(&(t.n_vars() as u32).to_le_bytes());
        for &b in &t.bonds {
            out.extend_from_slice(&(b as u32).to_le_bytes());
        }
        for z in t.coeffs.iter().flatten() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| CliError::Resource(format!("{}: {e}", path.display())))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CliError::Config("linking file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_linking(path: &Path) -> Result<(LinkingSet, [u8; 32]), CliError> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(8)? != LINK_MAGIC {
        return Err(CliError::Config(format!("{} is not a linking-matrix file", path.display())));
    }
    let version = cur.u32()?;
    if version != LINK_VERSION as usize {
        return Err(CliError::Config(format!("unsupported linking file version {version}")));
    }
    let dtype = cur.u32()?;
    if dtype != DTYPE_C128 as usize {
        return Err(CliError::Config(format!("unsupported coefficient type {dtype}")));
    }
    let n_basis = cur.u32()?;
    let memory = cur.u32()?;
    let channels = cur.u32()?;
    let hash: [u8; 32] = cur.take(32)?.try_into().expect("32 bytes");
    let mut bases = Vec::with_capacity(channels);
    for _ in 0..channels {
        let (lo, hi) = (cur.f64()?, cur.f64()?);
        bases.push(ChebyshevBasis::new(n_basis, lo, hi)?);
    }
    let mut trains = Vec::with_capacity(memory + 1);
    for j in 1..=memory + 1 {
        let n_vars = cur.u32()?;
        if n_vars != j * channels {
            return Err(CliError::Config(format!("transfer train {j} has {n_vars} variables")));
        }
        let bonds = (0..=n_vars).map(|_| cur.u32()).collect::<Result<Vec<_>, _>>()?;
        if bonds[0] != 1 || bonds[n_vars] != 1 {
            return Err(CliError::Config("transfer trains must have unit edge bonds".into()));
        }
        let mut coeffs = Vec::with_capacity(n_vars);
        for v in 0..n_vars {
            let len = n_basis * bonds[v] * bonds[v + 1];
            let core = (0..len).map(|_| Ok(c(cur.f64()?, cur.f64()?))).collect::<Result<Vec<C64>, CliError>>()?;
            coeffs.push(core);
        }
        trains.push(TransferTrain { n_basis, bonds, coeffs });
    }
    if cur.pos != buf.len() {
        return Err(CliError::Config("trailing bytes after linking matrices".into()));
    }
    Ok((LinkingSet { memory, channels, bases, trains }, hash))
}

fn numbers(line: &str) -> impl Iterator<Item = &str> {
    line.split(|ch: char| ch.is_whitespace() || ch == ',').filter(|s| !s.is_empty())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Two columns `ω J(ω)` separated by whitespace or commas; `#` starts a
/// comment.
pub fn read_spectral_density(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (mut w, mut j) = (Vec::new(), Vec::new());
    for (line_no, line) in data_lines(&text) {
        let vals: Vec<f64> = numbers(line)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{}:{line_no}: {e}", path.display())))?;
        if vals.len() != 2 {
            return Err(CliError::Config(format!("{}:{line_no}: expected two columns", path.display())));
        }
        w.push(vals[0]);
        j.push(vals[1]);
    }
    Ok((w, j))
}

/// Square complex matrix, one row per line: either `d` real entries or `d`
/// `re im` pairs.
pub fn read_matrix(path: &Path) -> Result<CMat, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = data_lines(&text)
        .map(|(line_no, line)| {
            numbers(line)
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("{}:{line_no}: {e}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let d = rows.len();
    if d == 0 {
        return Err(CliError::Config(format!("{} holds no matrix", path.display())));
    }
    let complex = rows[0].len() == 2 * d;
    let mut m = CMat::zeros(d, d);
    for (i, r) in rows.iter().enumerate() {
        match (complex, r.len()) {
            (false, n) if n == d => (0..d).for_each(|j| m[(i, j)] = c(r[j], 0.0)),
            (true, n) if n == 2 * d => (0..d).for_each(|j| m[(i, j)] = c(r[2 * j], r[2 * j + 1])),
            _ => return Err(CliError::Config(format!("{}: row {} has {} entries for d = {d}", path.display(), i + 1, r.len()))),
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_set() -> LinkingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bases = vec![ChebyshevBasis::new(4, -1.5, 1.5).unwrap(), ChebyshevBasis::new(4, -0.5, 2.0).unwrap()];
        let trains = (1..=2).map(|j| TransferTrain::initialized(4, 2 * j, 3, 0.3, &mut rng)).collect();
        LinkingSet { memory: 1, channels: 2, bases, trains }
    }

    #[test]
    fn linking_container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("set.sttlink");
        let set = sample_set();
        write_linking(&p, &set, &[7u8; 32]).unwrap();
        let (back, hash) = read_linking(&p).unwrap();
        assert_eq!(back, set);
        assert_eq!(hash, [7u8; 32]);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], LINK_MAGIC);
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_linking(&p).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        fs::write(&p, &bad).unwrap();
        assert!(read_linking(&p).is_err());
    }

    #[test]
    fn matrix_and_density_readers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.txt");
        fs::write(&p, "# H0\n1 0  0.5 -0.25\n0.5 0.25  -1 0\n").unwrap();
        let m = read_matrix(&p).unwrap();
        assert_eq!(m[(0, 1)], c(0.5, -0.25));
        assert_eq!(m[(1, 1)], c(-1.0, 0.0));
        fs::write(&p, "1 2\n3\n").unwrap();
        assert!(read_matrix(&p).is_err());
        let j = dir.path().join("j.txt");
        fs::write(&j, "0, 0\n0.5 0.3 # comment\n\n1.0,0.4\n").unwrap();
        assert_eq!(read_spectral_density(&j).unwrap(), (vec![0.0, 0.5, 1.0], vec![0.0, 0.3, 0.4]));
        fs::write(&j, "0 1 2\n").unwrap();
        assert!(read_spectral_density(&j).is_err());
    }

    #[test]
    fn series_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = ObservableSeries {
            names: vec!["sz".into()],
            times: vec![0.0, 0.25],
            values: vec![vec![1.0], vec![0.5]],
            trace_dev: vec![0.0, 1e-9],
            herm_dev: vec![0.0, 0.0],
            bond_log: vec![],
        };
        write_series(&p, &s, Some("config_hash=abc")).unwrap();
        let (comment, header, rows) = read_table(&p).unwrap();
        assert_eq!(comment.as_deref(), Some("config_hash=abc"));
        assert_eq!(header, ["t", "sz", "trace_dev", "herm_dev"]);
        assert_eq!(rows[1], vec![0.25, 0.5, 1e-9, 0.0]);
    }
}
