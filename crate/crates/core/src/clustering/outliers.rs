use std::fmt;

use super::ClusterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutlierClass {
    Normal,
    Outlier,
    Extreme,
}

impl fmt::Display for OutlierClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutlierClass::Normal => "normal",
            OutlierClass::Outlier => "outlier",
            OutlierClass::Extreme => "extreme",
        })
    }
}

/// First and third quartiles by linear interpolation at `0.25(n-1)` and
/// `0.75(n-1)` of the sorted values.
pub fn quartiles(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Some((at(0.25), at(0.75)))
}

/// Tukey fences: beyond `extreme_factor * IQR` is extreme, beyond
/// `outlier_factor * IQR` is an outlier.
pub fn iqr_outliers(
    values: &[f64],
    outlier_factor: f64,
    extreme_factor: f64,
) -> Result<Vec<OutlierClass>, ClusterError> {
    if !(outlier_factor > 0.0 && extreme_factor >= outlier_factor) {
        return Err(ClusterError::BadFactors {
            outlier: outlier_factor,
            extreme: extreme_factor,
        });
    }
    let (q1, q3) = quartiles(values).ok_or(ClusterError::EmptyInput)?;
    let iqr = q3 - q1;
    let beyond = |v: f64, f: f64| v > q3 + f * iqr || v < q1 - f * iqr;
    Ok(values
        .iter()
        .map(|&v| {
            if beyond(v, extreme_factor) {
                OutlierClass::Extreme
            } else if beyond(v, outlier_factor) {
                OutlierClass::Outlier
            } else {
                OutlierClass::Normal
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use OutlierClass::*;

    #[test]
    fn flags_single_extreme() {
        let v = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(quartiles(&v), Some((2.0, 4.0)));
        assert_eq!(
            iqr_outliers(&v, 1.5, 3.0).unwrap(),
            vec![Normal, Normal, Normal, Normal, Extreme]
        );
    }

    #[test]
    fn outlier_band_between_fences() {
        // Q1=2, Q3=4, IQR=2: outlier fence 7, extreme fence 10
        let v = [1.0, 2.0, 3.0, 4.0, 8.0];
        assert_eq!(quartiles(&v), Some((2.0, 4.0)));
        assert_eq!(iqr_outliers(&v, 1.5, 3.0).unwrap()[4], Outlier);
        let v = [-8.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(iqr_outliers(&v, 1.5, 3.0).unwrap()[0], Extreme);
    }

    #[test]
    fn constant_values_are_normal() {
        assert!(iqr_outliers(&[7.0; 6], 1.5, 3.0).unwrap().iter().all(|&c| c == Normal));
    }

    #[test]
    fn one_to_ten_is_normal() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        // Q1=3.25, Q3=7.75, fences -3.5 and 14.5
        assert_eq!(quartiles(&v), Some((3.25, 7.75)));
        assert!(iqr_outliers(&v, 1.5, 3.0).unwrap().iter().all(|&c| c == Normal));
    }

    #[test]
    fn errors() {
        assert_eq!(iqr_outliers(&[], 1.5, 3.0), Err(ClusterError::EmptyInput));
        assert!(iqr_outliers(&[1.0], 0.0, 3.0).is_err());
        assert!(iqr_outliers(&[1.0], 3.0, 1.5).is_err());
    }
}
