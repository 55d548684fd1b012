use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Queries × models matrix of 0/1 outcomes (1 = rank-1 correct).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryOutcomeMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryOutcomeMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols < 2 {
            return Err(Error::invalid("outcome matrix needs >= 1 query and >= 2 models"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::invalid(format!("outcome row {i} has {} entries, expected {cols}", rows[i].len())));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::invalid("outcome entries must be 0 or 1"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CochranResult {
    pub q: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Cochran's Q with a chi-square(k - 1) p-value. When every query has the
/// same outcome under all models the statistic is defined as 0 with p = 1.
pub fn cochran_q(m: &BinaryOutcomeMatrix) -> Result<CochranResult> {
    let k = m.cols();
    if k < 2 {
        return Err(Error::invalid("cochran q needs at least two models"));
    }
    let mut col_sums = vec![0f64; k];
    let (mut sum_l, mut sum_l2) = (0f64, 0f64);
    for r in 0..m.rows() {
        let mut l = 0f64;
        for (c, g) in col_sums.iter_mut().enumerate() {
            let v = f64::from(m.get(r, c));
            *g += v;
            l += v;
        }
        sum_l += l;
        sum_l2 += l * l;
    }
    let kf = k as f64;
    let denom = kf * sum_l - sum_l2;
    let df = k - 1;
    if denom == 0.0 {
        return Ok(CochranResult { q: 0.0, df, p_value: 1.0 });
    }
    let mean = col_sums.iter().sum::<f64>() / kf;
    let spread: f64 = col_sums.iter().map(|g| (g - mean).powi(2)).sum();
    let q = kf * (kf - 1.0) * spread / denom;
    Ok(CochranResult {
        q,
        df,
        p_value: chi_square_sf(q, df as f64),
    })
}

/// McNemar statistic without continuity correction from the discordant
/// counts `b` (first right, second wrong) and `c` (the reverse).
pub fn mcnemar(b: u64, c: u64) -> f64 {
    if b + c == 0 {
        0.0
    } else {
        (b as f64 - c as f64).powi(2) / (b + c) as f64
    }
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        regularized_gamma_q(df / 2.0, x / 2.0)
    }
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x)`: a power series for
/// `x < a + 1`, a Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_columns() {
        let m = BinaryOutcomeMatrix::new(vec![vec![1, 1, 1], vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        assert_eq!(cochran_q(&m).unwrap(), CochranResult { q: 0.0, df: 2, p_value: 1.0 });
    }

    #[test]
    fn hand_example() {
        // Column sums 3 and 1, row sums 1, 1, 2, 0: Q = 2 * 2 / (8 - 6).
        let m = BinaryOutcomeMatrix::new(vec![vec![1, 0], vec![1, 0], vec![1, 1], vec![0, 0]]).unwrap();
        let r = cochran_q(&m).unwrap();
        assert!((r.q - 2.0).abs() < 1e-12);
        assert!((r.q - mcnemar(2, 0)).abs() < 1e-12);
    }

    #[test]
    fn chi_square_known_values() {
        // df = 2 has closed form exp(-x/2).
        for x in [0.1, 1.0, 3.0, 10.0, 40.0] {
            assert!((chi_square_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-14);
        }
        assert!((chi_square_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-12);
        assert_eq!(chi_square_sf(0.0, 3.0), 1.0);
    }

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "{n}");
            fact *= n as f64;
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(BinaryOutcomeMatrix::new(vec![vec![1]]).is_err());
        assert!(BinaryOutcomeMatrix::new(vec![]).is_err());
        assert!(BinaryOutcomeMatrix::new(vec![vec![1, 2]]).is_err());
        assert!(BinaryOutcomeMatrix::new(vec![vec![1, 0], vec![1]]).is_err());
    }
}
