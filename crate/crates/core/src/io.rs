//! CSV tables with round-trippable floats, trajectory CSVs and the binary
//! modal-state dump.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::Trajectory;

/// Marker line appended to a trajectory CSV whose run stopped early.
pub const TRUNCATED_FOOTER: &str = "# TRUNCATED";
pub const DUMP_MAGIC: &[u8; 8] = b"MOFBDUMP";
pub const DUMP_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // 17 significant digits: parses back to the same bits
            Cell::Float(v) => write!(f, "{v:.16e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Cell {
    fn parse(s: &str) -> Self {
        if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            Cell::Float(v)
        } else {
            Cell::Text(s.to_string())
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Comment lines written after the rows, without the leading `#`.
    pub footer: Vec<String>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.headers.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}`")))
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .as_f64()
                    .ok_or_else(|| Error::InvalidArgument(format!("non-numeric entry in `{name}`")))
            })
            .collect()
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_string))?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        for line in &self.footer {
            writeln!(inner, "#{line}")?;
        }
        inner.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut text = String::new();
        std::io::BufReader::new(input).read_to_string(&mut text)?;
        let mut body = String::new();
        let mut footer = Vec::new();
        for line in text.lines() {
            match line.strip_prefix('#') {
                Some(c) => footer.push(c.to_string()),
                None => {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok(Self { headers, rows, footer })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn is_truncated(&self) -> bool {
        self.footer
            .iter()
            .any(|l| format!("#{l}").starts_with(TRUNCATED_FOOTER))
    }
}

/// `t, norm_p, norm_eps, norm_z, u_1..u_N`, with a `TRUNCATED` footer when
/// the run stopped early.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut headers: Vec<String> = ["t", "norm_p", "norm_eps", "norm_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    headers.extend((1..=traj.controls).map(|i| format!("u_{i}")));
    let mut table = Table::new(headers);
    for s in &traj.samples {
        let mut row: Vec<Cell> = vec![s.t.into(), s.norm_p.into(), s.norm_eps.into(), s.norm_z.into()];
        row.extend(s.u.iter().map(|&v| Cell::Float(v)));
        row.resize(table.headers.len(), Cell::Float(0.0));
        table.rows.push(row);
    }
    if let Some(reason) = &traj.failure {
        table.footer.push(format!("{} {reason}", &TRUNCATED_FOOTER[1..]));
    }
    table
}

/// Little-endian dump: magic, version, flags, mode count, sample count,
/// then per sample `t` followed by the modal coefficients.
pub fn write_state_dump<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let states: Vec<(f64, &Vec<f64>)> = traj
        .samples
        .iter()
        .map(|s| {
            s.state
                .as_ref()
                .map(|v| (s.t, v))
                .ok_or_else(|| Error::InvalidArgument("trajectory was run without keeping states".into()))
        })
        .collect::<Result<_>>()?;
    let modes = states.first().map_or(0, |s| s.1.len());
    let flags: u32 = if traj.failure.is_some() { 1 } else { 0 };
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&flags.to_le_bytes())?;
    out.write_all(&(modes as u64).to_le_bytes())?;
    out.write_all(&(states.len() as u64).to_le_bytes())?;
    for (t, v) in states {
        out.write_all(&t.to_le_bytes())?;
        for x in v {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateDump {
    pub truncated: bool,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

pub fn read_state_dump<R: Read>(mut input: R) -> Result<StateDump> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::InvalidArgument("not a modal state dump".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported dump version {version}")));
    }
    input.read_exact(&mut b4)?;
    let flags = u32::from_le_bytes(b4);
    input.read_exact(&mut b8)?;
    let modes = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut read_f64 = |input: &mut R| -> Result<f64> {
        input.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(read_f64(&mut input)?);
        states.push((0..modes).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?);
    }
    Ok(StateDump {
        truncated: flags & 1 == 1,
        times,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{IntegratorStats, Kind, Sample};
    use proptest::prelude::*;

    fn traj(failure: Option<&str>) -> Trajectory {
        Trajectory {
            kind: Kind::StateFeedback,
            samples: (0..3)
                .map(|i| Sample {
                    t: i as f64 * 0.1,
                    norm_p: 1.0 / (i + 1) as f64,
                    norm_eps: 0.0,
                    norm_z: 0.3,
                    u: vec![0.1, -2.0e-17],
                    subdomain_eps: vec![],
                    state: Some(vec![i as f64, std::f64::consts::PI]),
                })
                .collect(),
            config_hash: 1,
            stats: IntegratorStats::default(),
            controls: 2,
            certified: Some(false),
            margin: None,
            failure: failure.map(String::from),
        }
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let t = traj(None);
        let table = trajectory_table(&t);
        assert_eq!(table.headers, vec!["t", "norm_p", "norm_eps", "norm_z", "u_1", "u_2"]);
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let back = Table::read(buf.as_slice()).unwrap();
        assert_eq!(back, table);
        assert!(!back.is_truncated());
        assert_eq!(back.column("norm_p").unwrap()[2], 1.0 / 3.0);
    }

    #[test]
    fn truncated_footer() {
        let table = trajectory_table(&traj(Some("non-finite state at t = 0.2")));
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.trim_end().ends_with("# TRUNCATED non-finite state at t = 0.2"));
        assert!(Table::read(buf.as_slice()).unwrap().is_truncated());
    }

    #[test]
    fn dump_round_trip() {
        let t = traj(Some("stop"));
        let mut buf = Vec::new();
        write_state_dump(&t, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"MOFBDUMP");
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 + 8 + 3 * 3 * 8);
        let d = read_state_dump(buf.as_slice()).unwrap();
        assert!(d.truncated);
        assert_eq!(d.times, vec![0.0, 0.1, 0.2]);
        assert_eq!(d.states[2], vec![2.0, std::f64::consts::PI]);
        assert!(read_state_dump(&b"NOTADUMP0000"[..]).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exactly(v in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
            let mut table = Table::new(["x"]);
            for x in &v {
                table.push(vec![Cell::Float(*x)]).unwrap();
            }
            let mut buf = Vec::new();
            table.write(&mut buf).unwrap();
            let back = Table::read(buf.as_slice()).unwrap().column("x").unwrap();
            for (a, b) in v.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
