use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

/// Orthonormal type-II cosine coefficients of a nodal field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients(Vec<f64>);

impl ModeCoefficients {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Planned orthonormal DCT-II / DCT-III pair of a fixed length.
#[derive(Clone)]
pub struct CosineTransform {
    len: usize,
    plan: Arc<dyn TransformType2And3<f64>>,
    scale_zero: f64,
    scale_rest: f64,
}

impl std::fmt::Debug for CosineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosineTransform").field("len", &self.len).finish()
    }
}

impl CosineTransform {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "cosine transform needs at least one sample");
        let plan = DctPlanner::new().plan_dct2(len);
        let n = len as f64;
        Self {
            len,
            plan,
            scale_zero: (1.0 / n).sqrt(),
            scale_rest: (2.0 / n).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, values: &[f64]) -> ModeCoefficients {
        let mut buf = values.to_vec();
        self.forward_in_place(&mut buf);
        ModeCoefficients(buf)
    }

    pub fn inverse(&self, coeffs: &ModeCoefficients) -> Vec<f64> {
        let mut buf = coeffs.0.clone();
        self.inverse_in_place(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [f64]) {
        assert_eq!(buf.len(), self.len);
        self.plan.process_dct2(buf);
        buf[0] *= self.scale_zero;
        for c in &mut buf[1..] {
            *c *= self.scale_rest;
        }
    }

    pub fn inverse_in_place(&self, buf: &mut [f64]) {
        assert_eq!(buf.len(), self.len);
        // rustdct's DCT-III halves the zeroth input
        buf[0] *= 2.0 * self.scale_zero;
        for c in &mut buf[1..] {
            *c *= self.scale_rest;
        }
        self.plan.process_dct3(buf);
    }
}

/// Band-limited cosine interpolation of nodal values onto `n_out` cell-centred
/// nodes. Modes above the coarser grid's range are dropped; a same-size
/// resample returns the input unchanged.
pub fn resample(values: &[f64], n_out: usize) -> Vec<f64> {
    let n_in = values.len();
    if n_in == n_out {
        return values.to_vec();
    }
    let coeffs = CosineTransform::new(n_in).forward(values);
    let scale = (n_out as f64 / n_in as f64).sqrt();
    let mut padded = vec![0.0; n_out];
    for (dst, src) in padded.iter_mut().zip(coeffs.as_slice()) {
        *dst = src * scale;
    }
    CosineTransform::new(n_out).inverse(&ModeCoefficients(padded))
}

/// Continuous cosine interpolant `Σ α_m cos(π m x / W)` of nodal samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSeries {
    width: f64,
    amplitudes: Vec<f64>,
}

impl CosineSeries {
    pub fn from_nodes(values: &[f64], width: f64) -> Self {
        let n = values.len();
        let coeffs = CosineTransform::new(n).forward(values);
        let mut amplitudes: Vec<f64> = coeffs
            .as_slice()
            .iter()
            .map(|c| c * (2.0 / n as f64).sqrt())
            .collect();
        amplitudes[0] = coeffs.as_slice()[0] / (n as f64).sqrt();
        Self { width, amplitudes }
    }

    pub fn value(&self, x: f64) -> f64 {
        let base = std::f64::consts::PI * x / self.width;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(m, a)| a * (base * m as f64).cos())
            .sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k1 = std::f64::consts::PI / self.width;
        let base = k1 * x;
        self.amplitudes
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, a)| -a * k1 * m as f64 * (base * m as f64).sin())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_maps_to_mode_zero() {
        let t = CosineTransform::new(16);
        let c = t.forward(&[1.0; 16]);
        assert!((c.as_slice()[0] - 4.0).abs() < 1e-14);
        assert!(c.as_slice()[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn basis_vector_maps_to_single_mode() {
        let n = 24;
        let m0 = 5;
        let t = CosineTransform::new(n);
        let v: Vec<f64> = (0..n)
            .map(|j| (PI * (j as f64 + 0.5) * m0 as f64 / n as f64).cos())
            .collect();
        let c = t.forward(&v);
        for (m, &cm) in c.as_slice().iter().enumerate() {
            if m == m0 {
                assert!((cm - (n as f64 / 2.0).sqrt()).abs() < 1e-13);
            } else {
                assert!(cm.abs() < 1e-13, "mode {m}: {cm}");
            }
        }
    }

    #[test]
    fn resample_preserves_band_limited_modes() {
        let (w, n, m) = (2.0, 16, 3);
        let coarse: Vec<f64> = (0..n)
            .map(|j| (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos())
            .collect();
        let fine = resample(&coarse, 64);
        for (j, v) in fine.iter().enumerate() {
            let x = (j as f64 + 0.5) * w / 64.0;
            assert!((v - (PI * m as f64 * x / w).cos()).abs() < 1e-13);
        }
        let back = resample(&fine, n);
        for (a, b) in back.iter().zip(&coarse) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn series_interpolates_nodes_and_differentiates() {
        let (w, n) = (1.5, 32);
        let nodes: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * w / n as f64).collect();
        let f = |x: f64| 0.2 + 0.1 * (PI * x / w).cos() - 0.05 * (4.0 * PI * x / w).cos();
        let series = CosineSeries::from_nodes(&nodes.iter().map(|&x| f(x)).collect::<Vec<_>>(), w);
        for &x in &[0.0, 0.3, 0.77, w] {
            assert!((series.value(x) - f(x)).abs() < 1e-13);
        }
        let df = |x: f64| -0.1 * PI / w * (PI * x / w).sin() + 0.05 * 4.0 * PI / w * (4.0 * PI * x / w).sin();
        for &x in &[0.0, 0.3, 0.77, w] {
            assert!((series.derivative(x) - df(x)).abs() < 1e-12);
        }
        assert_eq!(series.derivative(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1.0f64..1.0, 2..80)) {
            let t = CosineTransform::new(values.len());
            let back = t.inverse(&t.forward(&values));
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for (a, b) in back.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }
}
