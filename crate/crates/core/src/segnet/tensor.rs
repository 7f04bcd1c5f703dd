//! Dense rank-4 arrays laid out (batch, channel, row, col), row-major.

use super::SegNetError;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(
        n: usize,
        c: usize,
        h: usize,
        w: usize,
        data: Vec<f64>,
    ) -> Result<Self, SegNetError> {
        if data.len() != n * c * h * w {
            return Err(SegNetError::ShapeMismatch(format!(
                "buffer has {} elements, dims ({n},{c},{h},{w}) need {}",
                data.len(),
                n * c * h * w
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn rows(&self) -> usize {
        self.h
    }

    pub fn cols(&self) -> usize {
        self.w
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, y: usize, x: usize) -> &mut f64 {
        let i = self.index(b, c, y, x);
        &mut self.data[i]
    }

    /// Contiguous row (b, c, y, 0..w).
    #[inline]
    pub fn row(&self, b: usize, c: usize, y: usize) -> &[f64] {
        let start = self.index(b, c, y, 0);
        &self.data[start..start + self.w]
    }

    #[inline]
    pub fn row_mut(&mut self, b: usize, c: usize, y: usize) -> &mut [f64] {
        let start = self.index(b, c, y, 0);
        &mut self.data[start..start + self.w]
    }

    pub fn same_dims(&self, other: &Tensor4) -> bool {
        self.dims() == other.dims()
    }

    /// Debug-mode guard: every entry must stay finite after each op.
    pub fn debug_assert_finite(&self) {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "tensor contains non-finite values"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let mut t = Tensor4::zeros(2, 3, 4, 5);
        *t.at_mut(1, 2, 3, 4) = 9.0;
        assert_eq!(t.data()[t.numel() - 1], 9.0);
        *t.at_mut(0, 0, 0, 1) = 5.0;
        assert_eq!(t.data()[1], 5.0);
    }

    #[test]
    fn from_vec_validates_length() {
        assert!(Tensor4::from_vec(1, 1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Tensor4::from_vec(1, 1, 2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn rows_are_contiguous() {
        let t = Tensor4::from_vec(1, 2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(0, 1, 1), &[9.0, 10.0, 11.0]);
    }
}
