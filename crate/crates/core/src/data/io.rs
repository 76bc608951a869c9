//! Dataset and basis persistence.
//!
//! Snapshot container (magic `AESNAP01`), little-endian:
//!
//! ```text
//! magic[8] version:u32 N:u64 N_t:u64 dt:f64 grid_kind:u8 grid_payload data
//! ```
//!
//! grid_kind 0 (cartesian-2d): `nx:u64 ny:u64 x[nx]:f64 y[ny]:f64`;
//! grid_kind 1 (polar): `nr:u64 na:u64 radii[nr] angles[na] areas[nr*na]`.
//! The data block is `N * N_t` f64 values, column-major, one snapshot per
//! column. POD bases use the same conventions under magic `AEPOD001`.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pod::{GridMeta, PodBasis, SnapshotMatrix};
use std::io::{Read, Write};
use std::path::Path;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"AESNAP01";
pub const BASIS_MAGIC: &[u8; 8] = b"AEPOD001";
pub const FORMAT_VERSION: u32 = 1;

/// CSV orientation: what one row of the file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvLayout {
    /// Each row is one grid point's time series (internal canon).
    RowsAreSpace,
    /// Each row is one snapshot.
    RowsAreTime,
}

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64_slice(&mut self, vs: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(vs.len() * 8);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        Ok(())
    }
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "truncated file: needed {n} bytes for {what} at offset {}, only {} remain",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn grid_kind(grid: &GridMeta) -> u8 {
    match grid {
        GridMeta::Cartesian2d { .. } => 0,
        GridMeta::Polar { .. } => 1,
    }
}

fn write_grid<W: Write>(w: &mut Writer<W>, grid: &GridMeta) -> Result<()> {
    match grid {
        GridMeta::Cartesian2d { x, y } => {
            w.u64(x.len() as u64)?;
            w.u64(y.len() as u64)?;
            w.f64_slice(x)?;
            w.f64_slice(y)?;
        }
        GridMeta::Polar { radii, angles, cell_areas } => {
            w.u64(radii.len() as u64)?;
            w.u64(angles.len() as u64)?;
            w.f64_slice(radii)?;
            w.f64_slice(angles)?;
            w.f64_slice(cell_areas)?;
        }
    }
    Ok(())
}

fn read_grid(r: &mut Reader, kind: u8) -> Result<GridMeta> {
    match kind {
        0 => {
            let nx = r.u64("nx")? as usize;
            let ny = r.u64("ny")? as usize;
            let x = r.f64_vec(nx, "x coordinates")?;
            let y = r.f64_vec(ny, "y coordinates")?;
            Ok(GridMeta::Cartesian2d { x, y })
        }
        1 => {
            let nr = r.u64("n_radial")? as usize;
            let na = r.u64("n_azimuthal")? as usize;
            let radii = r.f64_vec(nr, "radii")?;
            let angles = r.f64_vec(na, "angles")?;
            let cell_areas = r.f64_vec(nr * na, "cell areas")?;
            Ok(GridMeta::Polar { radii, angles, cell_areas })
        }
        other => Err(Error::Format(format!("unknown grid kind {other}"))),
    }
}

/// Size in bytes of the header (everything before the data block).
pub fn header_len(grid: &GridMeta) -> usize {
    let grid_payload = match grid {
        GridMeta::Cartesian2d { x, y } => 16 + 8 * (x.len() + y.len()),
        GridMeta::Polar { radii, angles, cell_areas } => {
            16 + 8 * (radii.len() + angles.len() + cell_areas.len())
        }
    };
    8 + 4 + 8 + 8 + 8 + 1 + grid_payload
}

/// Write a snapshot matrix to the binary container.
pub fn save(q: &SnapshotMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = Writer { inner: std::io::BufWriter::new(file) };
    w.inner.write_all(SNAPSHOT_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u64(q.n_points() as u64)?;
    w.u64(q.n_snapshots() as u64)?;
    w.f64(q.dt)?;
    w.inner.write_all(&[grid_kind(&q.grid)])?;
    write_grid(&mut w, &q.grid)?;
    w.f64_slice(q.values.data())?;
    w.inner.flush()?;
    Ok(())
}

/// Read a snapshot matrix from the binary container.
pub fn load(path: &Path) -> Result<SnapshotMatrix> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };

    let magic = r.take(8, "magic")?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(SNAPSHOT_MAGIC)
        )));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = r.u64("N")? as usize;
    let nt = r.u64("N_t")? as usize;
    if nt == 0 {
        return Err(Error::Format("N_t = 0: a dataset needs at least one snapshot".into()));
    }
    if n == 0 {
        return Err(Error::Format("N = 0: a dataset needs at least one point".into()));
    }
    let dt = r.f64("dt")?;
    let kind = r.take(1, "grid kind")?[0];
    let grid = read_grid(&mut r, kind)?;
    if grid.n_points() != n {
        return Err(Error::Format(format!(
            "header N = {n} does not match grid point count {}",
            grid.n_points()
        )));
    }
    let expected = n
        .checked_mul(nt)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Format("data block size overflows".into()))?;
    if r.buf.len() - r.pos != expected {
        return Err(Error::Format(format!(
            "payload length mismatch: expected {expected} bytes of data at offset {}, found {}",
            r.pos,
            r.buf.len() - r.pos
        )));
    }
    let data = r.f64_vec(n * nt, "data block")?;
    let values = Matrix::from_col_major(n, nt, data)
        .map_err(|e| Error::Format(format!("invalid data block: {e}")))?;
    SnapshotMatrix::new(values, grid, dt)
}

/// Import a numeric CSV as a snapshot matrix on a synthetic 1-D grid.
pub fn csv_import(path: &Path, layout: CsvLayout, has_header: bool) -> Result<SnapshotMatrix> {
    let m = read_csv_matrix(path, has_header)?;
    let values = match layout {
        CsvLayout::RowsAreSpace => m,
        CsvLayout::RowsAreTime => m.transpose(),
    };
    let n = values.rows();
    let grid = GridMeta::Cartesian2d { x: (0..n).map(|i| i as f64).collect(), y: vec![0.0] };
    SnapshotMatrix::new(values, grid, 1.0)
}

/// Read a rectangular numeric CSV (RFC-4180-style, no quoting needed for
/// numbers). Ragged or non-numeric rows fail with the 1-based line number.
pub fn read_csv_matrix(path: &Path, has_header: bool) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "line {}: field {:?} is not a number",
                    lineno + 1,
                    field.trim()
                ))
            })?;
            row.push(v);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::Format(format!(
                    "line {}: ragged row with {} fields, expected {w}",
                    lineno + 1,
                    row.len()
                )));
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::Format("CSV contains no data rows".into()))?;
    let values = Matrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    if !values.is_finite() {
        return Err(Error::Format("CSV contains non-finite values".into()));
    }
    Ok(values)
}

/// Write a matrix as CSV with optional column headers.
pub fn write_csv_matrix(path: &Path, m: &Matrix, headers: Option<&[String]>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    if let Some(h) = headers {
        writeln!(w, "{}", h.join(","))?;
    }
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:.17e}", m.get(i, j))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Write a POD basis to the binary basis container.
pub fn save_basis(basis: &PodBasis, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = Writer { inner: std::io::BufWriter::new(file) };
    w.inner.write_all(BASIS_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u64(basis.modes.rows() as u64)?;
    w.u64(basis.modes.cols() as u64)?;
    w.u64(basis.eigenvalues.len() as u64)?;
    w.u64(basis.coeffs.cols() as u64)?;
    w.f64_slice(&basis.eigenvalues)?;
    w.f64_slice(&basis.weights)?;
    w.f64_slice(basis.modes.data())?;
    w.f64_slice(basis.coeffs.data())?;
    w.inner.flush()?;
    Ok(())
}

/// Read a POD basis from the binary basis container.
pub fn load_basis(path: &Path) -> Result<PodBasis> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != BASIS_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(BASIS_MAGIC)
        )));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = r.u64("n_points")? as usize;
    let k = r.u64("n_retained")? as usize;
    let n_eigen = r.u64("n_eigenvalues")? as usize;
    let nt = r.u64("n_snapshots")? as usize;
    let eigenvalues = r.f64_vec(n_eigen, "eigenvalues")?;
    let weights = r.f64_vec(n, "weights")?;
    let modes = Matrix::from_col_major(n, k, r.f64_vec(n * k, "modes")?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let coeffs = Matrix::from_col_major(k, nt, r.f64_vec(k * nt, "coefficients")?)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(PodBasis::from_parts(modes, eigenvalues, coeffs, weights))
}

/// Export the modes of a basis as CSV, one mode per column.
pub fn write_modes_csv(basis: &PodBasis, path: &Path) -> Result<()> {
    let headers: Vec<String> = (1..=basis.n_retained()).map(|i| format!("mode_{i}")).collect();
    write_csv_matrix(path, &basis.modes, Some(&headers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_turbulent, TurbulentSurrogateConfig};
    use crate::numerics::SeededRng;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("latentlens-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn snapshot_roundtrip_is_byte_identical() {
        let dir = tmpdir();
        let mut rng = SeededRng::new(1);
        let values = Matrix::from_fn(2, 3, |_, _| rng.uniform(-1.0, 1.0));
        let grid = GridMeta::Cartesian2d { x: vec![0.0, 1.0], y: vec![0.0] };
        let q = SnapshotMatrix::new(values, grid, 0.25).unwrap();
        let p1 = dir.join("roundtrip1.snap");
        let p2 = dir.join("roundtrip2.snap");
        save(&q, &p1).unwrap();
        let q2 = load(&p1).unwrap();
        save(&q2, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(q.values.data(), q2.values.data());
        assert_eq!(q.dt, q2.dt);
    }

    #[test]
    fn polar_roundtrip_preserves_grid() {
        let dir = tmpdir();
        let q = generate_turbulent(&TurbulentSurrogateConfig { n_t: 32, ..Default::default() }).unwrap();
        let p = dir.join("polar.snap");
        save(&q, &p).unwrap();
        let q2 = load(&p).unwrap();
        assert_eq!(q.grid, q2.grid);
        assert_eq!(q.weights, q2.weights);
        let expected_len = header_len(&q.grid) + q.n_points() * q.n_snapshots() * 8;
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, expected_len);
    }

    #[test]
    fn rejects_zero_snapshots_and_bad_magic() {
        let dir = tmpdir();
        let path = dir.join("empty.snap");
        // header claiming N=2, N_t=0, cartesian grid 2x1
        let mut bytes = Vec::new();
        bytes.extend_from_slice(SNAPSHOT_MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&0.1f64.to_le_bytes());
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("N_t = 0"), "{err}");

        let bad = dir.join("bad.snap");
        std::fs::write(&bad, b"NOTMAGIC-rest").unwrap();
        let err = load(&bad).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let dir = tmpdir();
        let q = generate_turbulent(&TurbulentSurrogateConfig { n_t: 64, ..Default::default() }).unwrap();
        let p = dir.join("trunc.snap");
        save(&q, &p).unwrap();
        let full = std::fs::read(&p).unwrap();
        let cut = full.len() - 100;
        std::fs::write(&p, &full[..cut]).unwrap();
        let err = load(&p).unwrap_err();
        let expected_offset = header_len(&q.grid);
        let msg = err.to_string();
        assert!(
            msg.contains(&format!("offset {expected_offset}")),
            "error should name offset {expected_offset}: {msg}"
        );
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn csv_import_layouts_and_ragged_rows() {
        let dir = tmpdir();
        let p = dir.join("data.csv");
        std::fs::write(&p, "a,b,c\n1,2,3\n4,5,6\n").unwrap();
        let by_space = csv_import(&p, CsvLayout::RowsAreSpace, true).unwrap();
        assert_eq!((by_space.n_points(), by_space.n_snapshots()), (2, 3));
        let by_time = csv_import(&p, CsvLayout::RowsAreTime, true).unwrap();
        assert_eq!((by_time.n_points(), by_time.n_snapshots()), (3, 2));
        assert_eq!(by_time.values.get(0, 0), 1.0);
        assert_eq!(by_time.values.get(0, 1), 4.0);

        let ragged = dir.join("ragged.csv");
        std::fs::write(&ragged, "1,2,3\n4,5\n").unwrap();
        let err = csv_import(&ragged, CsvLayout::RowsAreSpace, false).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn basis_roundtrip() {
        let dir = tmpdir();
        let q = generate_turbulent(&TurbulentSurrogateConfig { n_t: 64, ..Default::default() }).unwrap();
        let basis = crate::pod::compute_pod(&q).unwrap();
        let p = dir.join("basis.pod");
        save_basis(&basis, &p).unwrap();
        let b2 = load_basis(&p).unwrap();
        assert_eq!(basis.eigenvalues, b2.eigenvalues);
        assert_eq!(basis.modes.data(), b2.modes.data());
        assert_eq!(basis.coeffs.data(), b2.coeffs.data());
        assert_eq!(basis.weights, b2.weights);
    }
}
