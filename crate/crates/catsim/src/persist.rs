//! Binary snapshot persistence: one file per run holding a text header
//! (cutoff, parameters, time scaling, element ordering) followed by fixed
//! size binary records, one per snapshot, each containing the snapshot
//! time and the row-major density-matrix elements as interleaved re/im
//! little-endian 64-bit floats. A sidecar text manifest lists the byte
//! offset of every record for random access and integrity checks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CatsimError, Result};
use crate::fock::FockDensityMatrix;
use crate::params::{ScaledParams, TimeUnit};
use crate::propagator::Snapshot;

const MAGIC: &str = "#catsim-snapshots v1";
const HEADER_END: &str = "end-header";

/// Identity of a stored run: enough to rebuild the parameter set and
/// interpret the records.
#[derive(Debug, Clone)]
pub struct RunHeader {
    pub cutoff: usize,
    pub unit: TimeUnit,
    pub params: ScaledParams,
}

impl RunHeader {
    fn record_bytes(&self) -> u64 {
        8 + 16 * (self.cutoff as u64) * (self.cutoff as u64)
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        s.push_str(&format!("cutoff={}\n", self.cutoff));
        s.push_str(&format!("unit={}\n", self.unit));
        if self.params.is_lossless() {
            s.push_str("mode=lossless\n");
            s.push_str(&format!("pump_t={:.17e}\n", self.params.pump_t()));
            s.push_str(&format!("chi={:.17e}\n", self.params.chi()));
            s.push_str(&format!("delta_t={:.17e}\n", self.params.delta_t()));
        } else {
            s.push_str("mode=lossy\n");
            s.push_str(&format!("lambda={:.17e}\n", self.params.lambda()));
            s.push_str(&format!("g={:.17e}\n", self.params.g()));
            s.push_str(&format!("chi_prime={:.17e}\n", self.params.chi_prime()));
            s.push_str(&format!("delta={:.17e}\n", self.params.delta()));
        }
        s.push_str(&format!("n_thermal={:.17e}\n", self.params.n_thermal()));
        s.push_str("ordering=row-major\n");
        s.push_str(HEADER_END);
        s.push('\n');
        s
    }
}

fn parse_field(fields: &[(String, String)], key: &str) -> Result<String> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| CatsimError::Format(format!("snapshot header misses field '{key}'")))
}

fn parse_f64(fields: &[(String, String)], key: &str) -> Result<f64> {
    let raw = parse_field(fields, key)?;
    raw.parse::<f64>()
        .map_err(|_| CatsimError::Format(format!("field '{key}' is not a number: {raw}")))
}

fn parse_header(text: &str) -> Result<RunHeader> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(CatsimError::Format(format!(
            "not a snapshot file (expected leading '{MAGIC}')"
        )));
    }
    let mut fields = Vec::new();
    for line in lines {
        if line == HEADER_END {
            break;
        }
        match line.split_once('=') {
            Some((k, v)) => fields.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(CatsimError::Format(format!(
                    "malformed header line: {line}"
                )))
            }
        }
    }
    let cutoff: usize = parse_field(&fields, "cutoff")?
        .parse()
        .map_err(|_| CatsimError::Format("cutoff is not an integer".into()))?;
    let unit = match parse_field(&fields, "unit")?.as_str() {
        "tau" => TimeUnit::Tau,
        "T" => TimeUnit::BigT,
        "script-T" => TimeUnit::ScriptT,
        other => {
            return Err(CatsimError::Format(format!(
                "unknown time unit '{other}'"
            )))
        }
    };
    let n_thermal = parse_f64(&fields, "n_thermal")?;
    let params = match parse_field(&fields, "mode")?.as_str() {
        "lossless" => ScaledParams::lossless(
            parse_f64(&fields, "pump_t")?,
            parse_f64(&fields, "chi")?,
            parse_f64(&fields, "delta_t")?,
            n_thermal,
        )?,
        "lossy" => ScaledParams::new(
            parse_f64(&fields, "lambda")?,
            parse_f64(&fields, "g")?,
            parse_f64(&fields, "chi_prime")?,
            parse_f64(&fields, "delta")?,
            n_thermal,
        )?,
        other => {
            return Err(CatsimError::Format(format!(
                "unknown parameter mode '{other}'"
            )))
        }
    };
    let ordering = parse_field(&fields, "ordering")?;
    if ordering != "row-major" {
        return Err(CatsimError::Format(format!(
            "unsupported element ordering '{ordering}'"
        )));
    }
    Ok(RunHeader {
        cutoff,
        unit,
        params,
    })
}

/// Incremental writer: create with the run identity, append snapshots,
/// then finish to flush the data file and emit the sidecar manifest
/// (`<path>.manifest`).
pub struct SnapshotWriter {
    out: BufWriter<File>,
    path: PathBuf,
    header: RunHeader,
    next_offset: u64,
    records: Vec<(u64, f64)>,
}

impl SnapshotWriter {
    pub fn create(path: &Path, params: &ScaledParams, cutoff: usize, unit: TimeUnit) -> Result<Self> {
        let header = RunHeader {
            cutoff,
            unit,
            params: params.clone(),
        };
        let text = header.to_text();
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        out.write_all(text.as_bytes())?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
            header,
            next_offset: text.len() as u64,
            records: Vec::new(),
        })
    }

    pub fn append(&mut self, snapshot: &Snapshot) -> Result<()> {
        self.append_state(snapshot.time, &snapshot.rho)
    }

    pub fn append_state(&mut self, time: f64, rho: &FockDensityMatrix) -> Result<()> {
        if rho.cutoff() != self.header.cutoff {
            return Err(CatsimError::CutoffMismatch {
                expected: self.header.cutoff,
                got: rho.cutoff(),
            });
        }
        if !time.is_finite() {
            return Err(CatsimError::NonFinite(format!(
                "snapshot time {time} is not finite"
            )));
        }
        self.out.write_all(&time.to_le_bytes())?;
        for z in rho.data().iter() {
            self.out.write_all(&z.re.to_le_bytes())?;
            self.out.write_all(&z.im.to_le_bytes())?;
        }
        self.records.push((self.next_offset, time));
        self.next_offset += self.header.record_bytes();
        Ok(())
    }

    /// Flush the data file and write the sidecar manifest; returns the
    /// manifest path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        drop(self.out);
        let manifest_path = manifest_path_for(&self.path);
        let mut m = BufWriter::new(File::create(&manifest_path)?);
        writeln!(m, "# snapshot manifest for {}", file_name(&self.path))?;
        writeln!(m, "record_bytes={}", self.header.record_bytes())?;
        writeln!(m, "count={}", self.records.len())?;
        writeln!(m, "index,offset,time")?;
        for (i, (offset, time)) in self.records.iter().enumerate() {
            writeln!(m, "{i},{offset},{time:.17e}")?;
        }
        m.flush()?;
        Ok(manifest_path)
    }
}

/// `<path>.manifest` next to the data file.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".manifest");
    PathBuf::from(name)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// One manifest row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub offset: u64,
    pub time: f64,
}

/// Parse a sidecar manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for line in text.lines().skip(1) {
        if line.starts_with("record_bytes=") || line.starts_with("count=") || line == "index,offset,time" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CatsimError::Format(format!(
                "malformed manifest row: {line}"
            )));
        }
        entries.push(ManifestEntry {
            index: parts[0]
                .parse()
                .map_err(|_| CatsimError::Format(format!("bad index in: {line}")))?,
            offset: parts[1]
                .parse()
                .map_err(|_| CatsimError::Format(format!("bad offset in: {line}")))?,
            time: parts[2]
                .parse()
                .map_err(|_| CatsimError::Format(format!("bad time in: {line}")))?,
        });
    }
    Ok(entries)
}

/// A fully loaded run.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub header: RunHeader,
    pub snapshots: Vec<(f64, FockDensityMatrix)>,
}

/// Read a snapshot file back: header plus every record, in file order.
pub fn read_run(path: &Path) -> Result<StoredRun> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);

    // The header is short; scan byte-wise until the terminator line.
    let mut header_bytes = Vec::with_capacity(256);
    let mut byte = [0u8; 1];
    let terminator = format!("{HEADER_END}\n");
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(CatsimError::Format(
                "snapshot file ended inside the header".into(),
            ));
        }
        header_bytes.push(byte[0]);
        if header_bytes.ends_with(terminator.as_bytes()) {
            break;
        }
        if header_bytes.len() > 64 * 1024 {
            return Err(CatsimError::Format(
                "snapshot header exceeds 64 KiB; file is corrupt".into(),
            ));
        }
    }
    let header_text = String::from_utf8(header_bytes)
        .map_err(|_| CatsimError::Format("snapshot header is not UTF-8".into()))?;
    let header = parse_header(&header_text)?;

    let nc = header.cutoff;
    let elems = nc * nc;
    let mut snapshots = Vec::new();
    let mut buf8 = [0u8; 8];
    loop {
        // Record boundary: either clean end of file or a full record.
        match reader.read(&mut buf8)? {
            0 => break,
            8 => {}
            partial => {
                let mut total = partial;
                while total < 8 {
                    let n = reader.read(&mut buf8[total..])?;
                    if n == 0 {
                        return Err(CatsimError::Format(
                            "snapshot file ends inside a record".into(),
                        ));
                    }
                    total += n;
                }
            }
        }
        let time = f64::from_le_bytes(buf8);
        let mut payload = vec![0u8; 16 * elems];
        reader.read_exact(&mut payload).map_err(|_| {
            CatsimError::Format("snapshot file ends inside a record".into())
        })?;
        let mut data = Array2::zeros((nc, nc));
        for (k, chunk) in payload.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(chunk[0..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(chunk[8..16].try_into().expect("8 bytes"));
            data[[k / nc, k % nc]] = Complex64::new(re, im);
        }
        let rho = FockDensityMatrix::from_matrix(data)?;
        snapshots.push((time, rho));
    }
    Ok(StoredRun { header, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::SuperOperator;
    use crate::propagator::{evolve, EvolutionPlan};

    #[test]
    fn snapshot_file_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.snap");
        let params = ScaledParams::new(2.0, 1.2, 0.7, 0.4, 0.3).unwrap();
        let nc = 16;
        let op = SuperOperator::build(&params, nc, TimeUnit::Tau).unwrap();
        let rho0 = FockDensityMatrix::coherent(nc, Complex64::new(0.4, -0.1)).unwrap();
        let plan = EvolutionPlan::new(0.02, 1e-4)
            .unwrap()
            .with_snapshots(&[0.0, 0.01, 0.02])
            .unwrap();
        let result = evolve(&op, &rho0, &plan).unwrap();

        let mut writer = SnapshotWriter::create(&path, &params, nc, TimeUnit::Tau).unwrap();
        for snap in &result.snapshots {
            writer.append(snap).unwrap();
        }
        let manifest_path = writer.finish().unwrap();

        let run = read_run(&path).unwrap();
        assert_eq!(run.header.cutoff, nc);
        assert_eq!(run.header.unit, TimeUnit::Tau);
        assert_eq!(run.header.params.lambda(), params.lambda());
        assert_eq!(run.header.params.g(), params.g());
        assert_eq!(run.header.params.n_thermal(), params.n_thermal());
        assert_eq!(run.snapshots.len(), 3);
        for (stored, original) in run.snapshots.iter().zip(result.snapshots.iter()) {
            assert_eq!(stored.0, original.time);
            assert_eq!(stored.1.data(), original.rho.data());
        }

        let manifest = read_manifest(&manifest_path).unwrap();
        assert_eq!(manifest.len(), 3);
        let record = 8 + 16 * (nc as u64) * (nc as u64);
        assert_eq!(manifest[1].offset - manifest[0].offset, record);
        assert_eq!(manifest[2].offset - manifest[1].offset, record);
        // Offsets really point at the stored times.
        let raw = std::fs::read(&path).unwrap();
        for (entry, snap) in manifest.iter().zip(result.snapshots.iter()) {
            let at = entry.offset as usize;
            let t = f64::from_le_bytes(raw[at..at + 8].try_into().unwrap());
            assert_eq!(t, snap.time);
            assert_eq!(entry.time, snap.time);
        }
    }

    #[test]
    fn lossless_header_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lossless.snap");
        let params = ScaledParams::lossless(6.25, 0.5, 0.0, 0.0).unwrap();
        let nc = 6;
        let mut writer =
            SnapshotWriter::create(&path, &params, nc, TimeUnit::ScriptT).unwrap();
        let vac = FockDensityMatrix::vacuum(nc).unwrap();
        writer.append_state(0.0, &vac).unwrap();
        writer.finish().unwrap();

        let run = read_run(&path).unwrap();
        assert!(run.header.params.is_lossless());
        assert_eq!(run.header.params.pump_t(), 6.25);
        assert_eq!(run.header.params.chi(), 0.5);
        assert_eq!(run.header.unit, TimeUnit::ScriptT);
        assert_eq!(run.snapshots[0].1.data(), vac.data());
    }

    #[test]
    fn writer_and_reader_reject_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let params = ScaledParams::new(1.0, 1.0, 0.0, 0.0, 0.0).unwrap();

        // Cutoff mismatch on append.
        let path = dir.path().join("bad-append.snap");
        let mut writer = SnapshotWriter::create(&path, &params, 8, TimeUnit::Tau).unwrap();
        let wrong = FockDensityMatrix::vacuum(6).unwrap();
        assert!(matches!(
            writer.append_state(0.0, &wrong),
            Err(CatsimError::CutoffMismatch { .. })
        ));

        // Not a snapshot file.
        let junk = dir.path().join("junk.snap");
        std::fs::write(&junk, b"hello world\n").unwrap();
        assert!(read_run(&junk).is_err());

        // Truncated record.
        let short = dir.path().join("short.snap");
        let mut writer = SnapshotWriter::create(&short, &params, 4, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(4).unwrap();
        writer.append_state(0.0, &vac).unwrap();
        writer.finish().unwrap();
        let mut bytes = std::fs::read(&short).unwrap();
        bytes.truncate(bytes.len() - 5);
        std::fs::write(&short, &bytes).unwrap();
        let err = read_run(&short).unwrap_err();
        assert!(err.to_string().contains("record"), "{err}");
    }
}
