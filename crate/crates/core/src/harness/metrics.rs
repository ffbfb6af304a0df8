use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigid_body::Vec3;

/// Relative error above which a truncation is considered to have lost the trajectory.
pub const ONSET_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerKind {
    /// Norm of the reference at the first sample.
    Initial,
    /// Largest reference norm over the horizon (initial value is zero).
    HorizonMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub value: f64,
    pub kind: NormalizerKind,
}

/// Initial norm of `reference`, or its maximum over the horizon when the initial value vanishes.
pub fn choose_normalizer(quantity: &str, reference: &[Vec3]) -> Result<Normalizer> {
    let first = reference.first().map_or(0.0, |v| v.norm());
    if first > 0.0 {
        return Ok(Normalizer { value: first, kind: NormalizerKind::Initial });
    }
    let max = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max > 0.0 {
        Ok(Normalizer { value: max, kind: NormalizerKind::HorizonMax })
    } else {
        Err(Error::ZeroNormalizer(quantity.to_string()))
    }
}

/// `|reference - approx| / normalizer`, sample by sample over the common prefix.
pub fn error_metric(reference: &[Vec3], approx: &[Vec3], normalizer: &Normalizer) -> Vec<f64> {
    reference.iter().zip(approx).map(|(r, a)| (r - a).norm() / normalizer.value).collect()
}

/// `a - b` wrapped to `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Componentwise wrapped difference of two Euler-angle triples.
pub fn euler_difference(a: &Vec3, b: &Vec3) -> Vec3 {
    Vec3::from_fn(|i, _| angle_difference(a[i], b[i]))
}

/// First sample time at which `errors` exceeds `threshold`.
pub fn onset_time(times: &[f64], errors: &[f64], threshold: f64) -> Option<f64> {
    times.iter().zip(errors).find(|(_, e)| **e > threshold).map(|(t, _)| *t)
}

/// Value of `errors` at the sample closest to `t`.
pub fn value_at(times: &[f64], errors: &[f64], t: f64) -> Option<f64> {
    let n = times.len().min(errors.len());
    if n == 0 {
        return None;
    }
    let i = times[..n].partition_point(|x| *x < t);
    let i = match i {
        0 => 0,
        i if i >= n => n - 1,
        i if (times[i] - t).abs() < (t - times[i - 1]).abs() => i,
        i => i - 1,
    };
    Some(errors[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_have_zero_error() {
        let a = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.0, 0.5)];
        let n = choose_normalizer("nu", &a).unwrap();
        assert!(error_metric(&a, &a, &n).iter().all(|e| *e == 0.0));
    }

    #[test]
    fn zero_approximation_has_unit_error() {
        let a = vec![Vec3::new(0.3, -0.4, 0.0); 5];
        let z = vec![Vec3::zeros(); 5];
        let n = choose_normalizer("nu", &a).unwrap();
        assert_eq!(n.kind, NormalizerKind::Initial);
        assert!(error_metric(&a, &z, &n).iter().all(|e| (*e - 1.0).abs() < 1e-15));
    }

    #[test]
    fn normalizer_fallback() {
        let a = vec![Vec3::zeros(), Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let n = choose_normalizer("p", &a).unwrap();
        assert_eq!(n, Normalizer { value: 2.0, kind: NormalizerKind::HorizonMax });
        assert!(matches!(choose_normalizer("p", &[Vec3::zeros(); 3]), Err(Error::ZeroNormalizer(_))));
        assert!(choose_normalizer("p", &[]).is_err());
    }

    #[test]
    fn angle_wrapping() {
        assert!((angle_difference(PI - 0.1, -PI + 0.1) + 0.2).abs() < 1e-12);
        assert!((angle_difference(0.3, 0.1) - 0.2).abs() < 1e-15);
        assert_eq!(angle_difference(1.0, 1.0), 0.0);
    }

    #[test]
    fn onset_and_lookup() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let e = [0.0, 0.5, 1.5, 3.0];
        assert_eq!(onset_time(&t, &e, 1.0), Some(2.0));
        assert_eq!(onset_time(&t, &e, 5.0), None);
        assert_eq!(value_at(&t, &e, 1.4), Some(0.5));
        assert_eq!(value_at(&t, &e, 1.6), Some(1.5));
        assert_eq!(value_at(&t, &e, 10.0), Some(3.0));
        assert_eq!(value_at(&t, &e, -1.0), Some(0.0));
    }
}
