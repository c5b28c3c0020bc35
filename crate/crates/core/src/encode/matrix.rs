use std::io::{Read, Write};

use super::EncodeError;

pub const MATRIX_MAGIC: &[u8; 8] = b"FGRMTX1\n";

/// Dense row-major matrix with row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub fg_fingerprint: String,
    pub mfg_fingerprint: String,
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    pub data: Vec<f64>,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }
}

/// Layout: magic, u64 rows, u64 cols, the two fingerprints, column labels,
/// row labels (all u32-length-prefixed UTF-8), then f64 values. Integers
/// and floats are little-endian.
pub fn write_matrix<W: Write>(m: &EncodedMatrix, mut w: W) -> Result<(), EncodeError> {
    if m.data.len() != m.n_rows() * m.n_cols() {
        return Err(EncodeError::Format("data length does not match shape".into()));
    }
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.n_rows() as u64).to_le_bytes())?;
    w.write_all(&(m.n_cols() as u64).to_le_bytes())?;
    put_str(&mut w, &m.fg_fingerprint)?;
    put_str(&mut w, &m.mfg_fingerprint)?;
    for s in m.columns.iter().chain(&m.rows) {
        put_str(&mut w, s)?;
    }
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<EncodedMatrix, EncodeError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(EncodeError::Format("bad magic".into()));
    }
    let rows = get_u64(&mut r)? as usize;
    let cols = get_u64(&mut r)? as usize;
    let fg_fingerprint = get_str(&mut r)?;
    let mfg_fingerprint = get_str(&mut r)?;
    let columns = (0..cols).map(|_| get_str(&mut r)).collect::<Result<_, _>>()?;
    let row_labels = (0..rows).map(|_| get_str(&mut r)).collect::<Result<_, _>>()?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok(EncodedMatrix {
        fg_fingerprint,
        mfg_fingerprint,
        columns,
        rows: row_labels,
        data,
    })
}

/// Debug view: a header row of column labels, then one line per row. Values
/// use Rust's shortest round-trip float formatting.
pub fn write_matrix_tsv<W: Write>(m: &EncodedMatrix, mut w: W) -> Result<(), EncodeError> {
    writeln!(w, "# fg={} mfg={}", m.fg_fingerprint, m.mfg_fingerprint)?;
    write!(w, "smiles")?;
    for c in &m.columns {
        write!(w, "\t{c}")?;
    }
    writeln!(w)?;
    for (i, label) in m.rows.iter().enumerate() {
        write!(w, "{label}")?;
        for v in m.row(i) {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64, EncodeError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str<R: Read>(r: &mut R) -> Result<String, EncodeError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    let mut s = vec![0u8; u32::from_le_bytes(b) as usize];
    r.read_exact(&mut s)?;
    String::from_utf8(s).map_err(|_| EncodeError::Format("label is not UTF-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let m = EncodedMatrix {
            fg_fingerprint: "ab".into(),
            mfg_fingerprint: String::new(),
            columns: vec!["hydroxyl".into(), "CC".into()],
            rows: vec!["CCO".into(), "C".into(), "c1ccccc1".into()],
            data: vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.5],
        };
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert_eq!(&buf[..8], MATRIX_MAGIC);
        assert_eq!(read_matrix(&buf[..]).unwrap(), m);
        let mut tsv = Vec::new();
        write_matrix_tsv(&m, &mut tsv).unwrap();
        let text = String::from_utf8(tsv).unwrap();
        assert_eq!(text.lines().nth(1), Some("smiles\thydroxyl\tCC"));
        assert_eq!(text.lines().nth(4), Some("c1ccccc1\t0\t0.5"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_matrix(&b"NOTAMTRX"[..]).is_err());
        let bad = EncodedMatrix {
            fg_fingerprint: String::new(),
            mfg_fingerprint: String::new(),
            columns: vec!["a".into()],
            rows: vec![],
            data: vec![1.0],
        };
        assert!(write_matrix(&bad, Vec::new()).is_err());
    }
}
