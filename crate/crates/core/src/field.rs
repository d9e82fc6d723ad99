//! Uniform periodic grids and the sampled scalar fields living on them.
//!
//! A grid covers `cells` unit cells with `points_per_cell` nodes each, so the
//! spatial shift by one cell is an integer rotation of the node array. All
//! index arithmetic is modulo the total node count.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest resolution the five-point stencils tolerate.
pub const MIN_POINTS_PER_CELL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    cells: usize,
    points_per_cell: usize,
}

impl GridSpec {
    pub fn new(cells: usize, points_per_cell: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::NoCells);
        }
        if points_per_cell < MIN_POINTS_PER_CELL {
            return Err(Error::ResolutionTooSmall { points_per_cell });
        }
        Ok(Self {
            cells,
            points_per_cell,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn points_per_cell(&self) -> usize {
        self.points_per_cell
    }

    /// Total number of nodes on the circle.
    pub fn len(&self) -> usize {
        self.cells * self.points_per_cell
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.points_per_cell as f64
    }

    /// Circumference of the circle, equal to the number of cells.
    pub fn circumference(&self) -> f64 {
        self.cells as f64
    }

    pub fn node_x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Index of the node nearest to `x`, wrapped onto the circle.
    pub fn nearest_node(&self, x: f64) -> usize {
        let n = self.len() as i64;
        ((x / self.dx()).round() as i64).rem_euclid(n) as usize
    }

    /// Same grid with a different number of cells.
    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        Self::new(cells, self.points_per_cell)
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} cells x {} points)", self.cells, self.points_per_cell)
    }
}

pub fn make_grid(cells: usize, points_per_cell: usize) -> Result<GridSpec> {
    GridSpec::new(cells, points_per_cell)
}

/// A periodic profile sampled at the nodes `x_j = j dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for grid {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { x: grid.node_x(j) });
        }
        Ok(Self { grid, values })
    }

    /// Construction without the finiteness check, for hot loops whose callers check it.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a (possibly negative or out-of-range) node index.
    pub fn at(&self, j: i64) -> f64 {
        self.values[j.rem_euclid(self.values.len() as i64) as usize]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup-norm of `self - other`.
    pub fn distance(&self, other: &Field) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `(1 - weight) * self + weight * other`.
    pub fn blend(&self, other: &Field, weight: f64) -> Result<Field> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - weight) * a + weight * b)
                .collect(),
        ))
    }

    /// Repeats a field periodically onto a grid with `cells` cells.
    ///
    /// The source must consist of whole periods, i.e. `cells` is a multiple of
    /// the source cell count.
    pub fn tile(&self, cells: usize) -> Result<Field> {
        let src = self.grid.cells();
        if cells % src != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot tile {src} cells onto {cells}"
            )));
        }
        let grid = self.grid.with_cells(cells)?;
        let values = (0..grid.len())
            .map(|j| self.values[j % self.values.len()])
            .collect();
        Ok(Self::from_raw(grid, values))
    }
}

/// Samples `f` at every node of `grid`.
pub fn sample(f: impl Fn(f64) -> f64, grid: GridSpec) -> Result<Field> {
    let values: Vec<f64> = (0..grid.len()).map(|j| f(grid.node_x(j))).collect();
    Field::from_values(grid, values)
}

/// Centered fourth-order periodic first derivative.
pub fn derivative(u: &Field) -> Field {
    let inv = 1.0 / (12.0 * u.grid.dx());
    let n = u.len() as i64;
    let values = (0..n)
        .map(|j| {
            ((u.at(j - 2) - u.at(j + 2)) + 8.0 * (u.at(j + 1) - u.at(j - 1))) * inv
        })
        .collect();
    Field::from_raw(u.grid, values)
}

/// Derivative at a single node, with the same stencil as [`derivative`].
pub fn derivative_at(u: &Field, j: usize) -> f64 {
    let j = j as i64;
    ((u.at(j - 2) - u.at(j + 2)) + 8.0 * (u.at(j + 1) - u.at(j - 1))) / (12.0 * u.grid.dx())
}

/// The unit spatial shift applied `k` times: `(S^k u)(x) = u(x - k)`.
pub fn shift_cell(u: &Field, k: i64) -> Field {
    let n = u.len();
    let offset = (k * u.grid.points_per_cell() as i64).rem_euclid(n as i64) as usize;
    let mut values = u.values.clone();
    values.rotate_right(offset);
    Field::from_raw(u.grid, values)
}

/// Per-cell integrals by the periodic trapezoidal rule.
pub fn mass_per_cell(u: &Field) -> Vec<f64> {
    let dx = u.grid.dx();
    u.values
        .chunks(u.grid.points_per_cell())
        .map(|cell| cell.iter().sum::<f64>() * dx)
        .collect()
}

/// Mean of the per-cell masses (the integral over one period in the bounded case).
pub fn mass(u: &Field) -> f64 {
    let cells = mass_per_cell(u);
    cells.iter().sum::<f64>() / cells.len() as f64
}

/// Writes `x,value` rows.
pub fn write_csv<W: Write>(u: &Field, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "value"])?;
    for (j, v) in u.values.iter().enumerate() {
        w.serialize((u.grid.node_x(j), v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(u: &Field, path: &Path) -> Result<()> {
    write_csv(u, std::fs::File::create(path)?)
}

/// Little-endian checkpoint: `cells: u64`, `points_per_cell: u64`, then the values as `f64`.
pub fn write_binary<W: Write>(u: &Field, mut writer: W) -> Result<()> {
    writer.write_all(&(u.grid.cells() as u64).to_le_bytes())?;
    writer.write_all(&(u.grid.points_per_cell() as u64).to_le_bytes())?;
    for v in &u.values {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<Field> {
    let mut word = [0u8; 8];
    reader.read_exact(&mut word)?;
    let cells = u64::from_le_bytes(word) as usize;
    reader.read_exact(&mut word)?;
    let points = u64::from_le_bytes(word) as usize;
    let grid = GridSpec::new(cells, points)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        reader
            .read_exact(&mut word)
            .map_err(|e| Error::Checkpoint(format!("truncated values: {e}")))?;
        values.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Field::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_sizes() {
        let g = make_grid(1, 128).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.dx(), 1.0 / 128.0);
        let g = make_grid(8, 64).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!(g.circumference(), 8.0);
        assert!(matches!(
            make_grid(1, 4),
            Err(Error::ResolutionTooSmall { points_per_cell: 4 })
        ));
        assert!(matches!(make_grid(0, 16), Err(Error::NoCells)));
    }

    #[test]
    fn sampling() {
        let g = make_grid(1, 128).unwrap();
        let u = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        for (j, v) in u.values().iter().enumerate() {
            assert_eq!(*v, (2.0 * PI * j as f64 / 128.0).sin());
        }
        assert_eq!(sample(|_| 0.0, g).unwrap(), Field::zeros(g));
        let saw = sample(|x| x, g).unwrap();
        assert_eq!(saw.values()[127], 127.0 / 128.0);
        assert!(matches!(
            sample(|x| 1.0 / (x - 0.5), g),
            Err(Error::NonFiniteSample { .. })
        ));
    }

    #[test]
    fn derivative_of_resolved_modes() {
        let g = make_grid(1, 256).unwrap();
        let u = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        assert!((derivative(&u).values()[0] - 2.0 * PI).abs() < 1e-6);
        let c = Field::constant(g, 0.7);
        assert!(derivative(&c).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_is_fourth_order() {
        let err = |n: usize| {
            let g = make_grid(1, n).unwrap();
            let u = sample(|x| (4.0 * PI * x).sin(), g).unwrap();
            let exact = sample(|x| 4.0 * PI * (4.0 * PI * x).cos(), g).unwrap();
            derivative(&u).distance(&exact).unwrap()
        };
        let (coarse, fine) = (err(128), err(256));
        assert!(coarse / fine >= 16.0 * 0.95, "ratio {}", coarse / fine);
        assert!((coarse / fine).log2() >= 3.7);
    }

    #[test]
    fn shifts() {
        let g = make_grid(8, 16).unwrap();
        let u = sample(|x| (0.3 * x).sin() + x * x * 0.01, g).unwrap();
        assert_eq!(shift_cell(&u, 0), u);
        assert_eq!(shift_cell(&shift_cell(&u, 3), -3), u);
        assert_eq!(shift_cell(&u, 8), u);
        // (S u)(x) = u(x - 1)
        let s = shift_cell(&u, 1);
        assert_eq!(s.values()[16], u.values()[0]);
    }

    #[test]
    fn masses() {
        let g = make_grid(1, 128).unwrap();
        assert!((mass(&Field::constant(g, 0.3)) - 0.3).abs() <= 1e-15);
        let u = sample(|x| (2.0 * PI * x).sin(), g).unwrap();
        assert!(mass(&u).abs() <= 1e-15);
    }

    #[test]
    fn per_cell_mass_of_concatenated_profiles() {
        // Letters a, b, a on three cells, with masses computed by direct quadrature.
        let g1 = make_grid(1, 64).unwrap();
        let pa = sample(|x| 0.5 + (2.0 * PI * x).sin(), g1).unwrap();
        let pb = sample(|x| -0.25 + 0.1 * (4.0 * PI * x).cos(), g1).unwrap();
        let (ma, mb) = (mass(&pa), mass(&pb));
        let g3 = make_grid(3, 64).unwrap();
        let mut vals = pa.values().to_vec();
        vals.extend_from_slice(pb.values());
        vals.extend_from_slice(pa.values());
        let u = Field::from_values(g3, vals).unwrap();
        assert_eq!(mass_per_cell(&u), vec![ma, mb, ma]);
        assert!((ma - 0.5).abs() < 1e-15 && (mb + 0.25).abs() < 1e-15);
    }

    #[test]
    fn binary_checkpoint_layout() {
        let g = make_grid(2, 8).unwrap();
        let u = sample(|x| x.cos(), g).unwrap();
        let mut buf = Vec::new();
        write_binary(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 16);
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        assert_eq!(&buf[8..16], &8u64.to_le_bytes());
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
        assert_eq!(read_binary(&buf[..]).unwrap(), u);
        assert!(read_binary(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn csv_rows() {
        let g = make_grid(1, 8).unwrap();
        let u = Field::constant(g, 1.5);
        let mut buf = Vec::new();
        write_csv(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,value");
        assert_eq!(lines[1], "0.0,1.5");
        assert_eq!(lines.len(), 9);
    }

    fn arb_field() -> impl Strategy<Value = Field> {
        (1usize..4, 8usize..24).prop_flat_map(|(cells, n)| {
            prop::collection::vec(-10.0f64..10.0, cells * n)
                .prop_map(move |v| Field::from_values(make_grid(cells, n).unwrap(), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn shift_preserves_mass_and_sup(u in arb_field(), k in -10i64..10) {
            let s = shift_cell(&u, k);
            prop_assert_eq!(s.sup_norm(), u.sup_norm());
            let mut a = mass_per_cell(&u);
            let mut b = mass_per_cell(&s);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            prop_assert_eq!(shift_cell(&s, -k), u);
        }

        #[test]
        fn derivative_commutes_with_rotation(u in arb_field(), k in -5i64..5) {
            let lhs = derivative(&shift_cell(&u, k));
            let rhs = shift_cell(&derivative(&u), k);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
