//! Thin multidimensional wrapper over `rustfft`.
//!
//! Data is a flat row-major `Vec<Complex64>` with an explicit shape
//! (`shape[0]` slowest). Forward transforms are unnormalised; inverse
//! transforms divide by the length of each transformed axis, so a
//! forward/inverse round trip is the identity.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Transform direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place FFT along each axis in `axes` of a row-major array of `shape`.
///
/// Panics if `data.len()` does not match the product of `shape` or an axis
/// index is out of range — these are programmer errors, not runtime inputs.
pub fn transform_axes(
    data: &mut [Complex64],
    shape: &[usize],
    axes: &[usize],
    dir: Direction,
) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total, "shape/product mismatch");
    let mut planner = FftPlanner::<f64>::new();
    for &axis in axes {
        assert!(axis < shape.len(), "axis out of range");
        let len = shape[axis];
        if len <= 1 {
            continue;
        }
        let fft = match dir {
            Direction::Forward => planner.plan_fft_forward(len),
            Direction::Inverse => planner.plan_fft_inverse(len),
        };
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut line = vec![Complex64::ZERO; len];
        let scale = 1.0 / len as f64;
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * inner];
                }
                fft.process(&mut line);
                if dir == Direction::Inverse {
                    for slot in line.iter_mut() {
                        *slot *= scale;
                    }
                }
                for (k, &v) in line.iter().enumerate() {
                    data[base + k * inner] = v;
                }
            }
        }
    }
}

/// Forward FFT over every axis of the array.
pub fn forward(data: &mut [Complex64], shape: &[usize]) {
    let axes: Vec<usize> = (0..shape.len()).collect();
    transform_axes(data, shape, &axes, Direction::Forward);
}

/// Inverse FFT over every axis of the array (normalised).
pub fn inverse(data: &mut [Complex64], shape: &[usize]) {
    let axes: Vec<usize> = (0..shape.len()).collect();
    transform_axes(data, shape, &axes, Direction::Inverse);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn round_trip_identity_2d() {
        let shape = [6, 8];
        let orig: Vec<Complex64> = (0..48)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut data = orig.clone();
        forward(&mut data, &shape);
        inverse(&mut data, &shape);
        assert!(max_err(&data, &orig) < 1e-12);
    }

    #[test]
    fn delta_transforms_to_constant() {
        let shape = [8];
        let mut data = vec![Complex64::ZERO; 8];
        data[0] = Complex64::new(1.0, 0.0);
        forward(&mut data, &shape);
        for v in &data {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_hits_single_bin() {
        // e^{2πi·3j/16} concentrates in bin 3 with weight N.
        let n = 16usize;
        let shape = [n];
        let mut data: Vec<Complex64> = (0..n)
            .map(|j| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * j as f64 / n as f64)
            })
            .collect();
        forward(&mut data, &shape);
        for (k, v) in data.iter().enumerate() {
            let expect = if k == 3 { n as f64 } else { 0.0 };
            assert!((v.norm() - expect).abs() < 1e-10, "bin {k}: {v}");
        }
    }

    #[test]
    fn middle_axis_only() {
        let shape = [2, 4, 3];
        let orig: Vec<Complex64> = (0..24).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let mut data = orig.clone();
        transform_axes(&mut data, &shape, &[1], Direction::Forward);
        transform_axes(&mut data, &shape, &[1], Direction::Inverse);
        assert!(max_err(&data, &orig) < 1e-12);
    }
}
