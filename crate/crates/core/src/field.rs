use std::sync::Arc;

use crate::grid::{check_same_grid, Grid};

/// Real scalar samples on a periodic grid, row-major with x fastest.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every collocation point.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                f(x, y)
            })
            .collect();
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Field {
        assert_eq!(values.len(), grid.len(), "value length must match grid");
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a * self + b * other`, pointwise.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Field {
        check_same_grid(&self.grid, &other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| a * x).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Field) {
        check_same_grid(&self.grid, &other.grid);
        for (x, &y) in self.values.iter_mut().zip(&other.values) {
            *x += y;
        }
    }

    pub fn add_scaled_assign(&mut self, a: f64, other: &Field) {
        check_same_grid(&self.grid, &other.grid);
        for (x, &y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn shift_assign(&mut self, c: f64) {
        for x in self.values.iter_mut() {
            *x += c;
        }
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute entry.
    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lin_comb_and_scaling() {
        let g = Grid::square(4).unwrap();
        let a = Field::constant(&g, 2.0);
        let b = Field::constant(&g, 3.0);
        let c = a.lin_comb(2.0, &b, -1.0);
        assert!(c.values().iter().all(|&v| v == 1.0));
        assert_eq!(a.scaled(0.5).values()[0], 1.0);
    }

    #[test]
    #[should_panic(expected = "grid mismatch")]
    fn mismatched_grids_panic() {
        let g1 = Grid::square(4).unwrap();
        let g2 = Grid::square(8).unwrap();
        let a = Field::zeros(&g1);
        let b = Field::zeros(&g2);
        let _ = a.lin_comb(1.0, &b, 1.0);
    }
}
