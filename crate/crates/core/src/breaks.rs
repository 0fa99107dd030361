//! Choropleth class breaks: Jenks, equal interval, standard deviation,
//! arithmetic progression and quantile, for 2 to 7 classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Field, Real};

pub const MIN_CLASSES: usize = 2;
pub const MAX_CLASSES: usize = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BreaksError {
    #[error("no values to classify")]
    EmptyInput,
    #[error("class count {0} outside 2..=7")]
    BadK(usize),
    #[error("values must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Jenks,
    EqualInterval,
    StdDeviation,
    ArithmeticProgression,
    Quantile,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Jenks,
        Method::EqualInterval,
        Method::StdDeviation,
        Method::ArithmeticProgression,
        Method::Quantile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Jenks => "jenks",
            Method::EqualInterval => "equal_interval",
            Method::StdDeviation => "std_deviation",
            Method::ArithmeticProgression => "arithmetic_progression",
            Method::Quantile => "quantile",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphabetic()).collect();
        match key.as_str() {
            "jenks" | "naturalbreaks" | "jenksnaturalbreaks" => Ok(Method::Jenks),
            "equal" | "equalinterval" => Ok(Method::EqualInterval),
            "std" | "stddev" | "stddeviation" | "standarddeviation" => Ok(Method::StdDeviation),
            "arithmetic" | "arithmeticprogression" => Ok(Method::ArithmeticProgression),
            "quantile" | "quantiles" => Ok(Method::Quantile),
            _ => Err(format!("unknown classification method {s:?}")),
        }
    }
}

/// Class boundaries. Class `i` holds values `<= bounds[i]`; the last class
/// holds everything above the last bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBreaks<T> {
    pub method: Method,
    /// Number of classes after duplicate bounds were merged.
    pub k: usize,
    pub bounds: Vec<T>,
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> ClassBreaks<T> {
    /// Smallest class whose upper bound is `>= v`, else the last class.
    pub fn classify(&self, v: T) -> usize {
        self.bounds.iter().position(|b| v <= *b).unwrap_or(self.bounds.len())
    }
}

pub fn classify<T: PartialOrd + Copy>(v: T, cb: &ClassBreaks<T>) -> usize {
    cb.classify(v)
}

fn check_k(k: usize) -> Result<(), BreaksError> {
    if (MIN_CLASSES..=MAX_CLASSES).contains(&k) {
        Ok(())
    } else {
        Err(BreaksError::BadK(k))
    }
}

fn from_usize<T: Field>(n: usize) -> T {
    T::from_usize(n).expect("small integer representable")
}

/// `min + i (max - min) / k` for `i = 1..k`.
pub fn equal_interval_bounds<T: Field>(min: T, max: T, k: usize) -> Vec<T> {
    let kk: T = from_usize(k);
    (1..k).map(|i| min + from_usize::<T>(i) * (max - min) / kk).collect()
}

/// Widths proportional to `1, 2, ..., k` summing to `max - min`.
pub fn arithmetic_progression_bounds<T: Field>(min: T, max: T, k: usize) -> Vec<T> {
    let unit = (max - min) * from_usize(2) / from_usize(k * (k + 1));
    (1..k).map(|j| min + unit * from_usize(j * (j + 1) / 2)).collect()
}

/// Nearest-rank quantiles of sorted data: the `ceil(i n / k)`-th value.
pub fn quantile_bounds<T: Copy>(sorted: &[T], k: usize) -> Vec<T> {
    let n = sorted.len();
    (1..k).map(|i| sorted[(i * n).div_ceil(k).max(1) - 1]).collect()
}

/// Mean-centred breaks at whole (even `k`) or half (odd `k`) standard
/// deviations, clamped to the data range.
pub fn std_deviation_bounds<T: Real>(values: &[T], min: T, max: T, k: usize) -> Vec<T> {
    let n = T::from_count(values.len() as u64);
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
    let var = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
    let sd = var.sqrt();
    let half = T::lit(0.5);
    let offsets: Vec<T> = if k % 2 == 0 {
        let m = (k / 2 - 1) as i64;
        (-m..=m).map(|j| T::lit(j as f64)).collect()
    } else {
        let m = ((k - 1) / 2) as i64;
        (-m..m).map(|j| T::lit(j as f64) + half).collect()
    };
    offsets.into_iter().map(|o| (mean + o * sd).max(min).min(max)).collect()
}

/// Within-class sum of squared deviations for `sorted[i..j]`, from prefix
/// sums.
fn ssd<T: Real>(s1: &[T], s2: &[T], i: usize, j: usize) -> T {
    let m = T::from_count((j - i) as u64);
    let sum = s1[j] - s1[i];
    let sq = s2[j] - s2[i];
    (sq - sum * sum / m).max(T::zero())
}

/// Exact Fisher-Jenks optimal partition of sorted data into `k` contiguous
/// classes. Returns the class end indices (exclusive), last one `n`.
pub fn jenks_partition<T: Real>(sorted: &[T], k: usize) -> Vec<usize> {
    let n = sorted.len();
    assert!(k >= 1 && k <= n, "jenks needs 1 <= k <= n");
    let mut s1 = vec![T::zero(); n + 1];
    let mut s2 = vec![T::zero(); n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    // cost[c][j]: best cost of splitting sorted[..j] into c+1 classes
    let mut cost = vec![vec![T::infinity(); n + 1]; k];
    let mut split = vec![vec![0usize; n + 1]; k];
    for j in 1..=n {
        cost[0][j] = ssd(&s1, &s2, 0, j);
    }
    for c in 1..k {
        for j in (c + 1)..=n {
            for i in c..j {
                let candidate = cost[c - 1][i] + ssd(&s1, &s2, i, j);
                if candidate < cost[c][j] {
                    cost[c][j] = candidate;
                    split[c][j] = i;
                }
            }
        }
    }
    let mut ends = vec![n];
    let mut j = n;
    for c in (1..k).rev() {
        j = split[c][j];
        ends.push(j);
    }
    ends.reverse();
    ends
}

/// Total within-class squared deviation of a partition given by class ends.
pub fn partition_cost<T: Real>(sorted: &[T], ends: &[usize]) -> T {
    let mut start = 0;
    let mut total = T::zero();
    for &end in ends {
        let class = &sorted[start..end];
        let m = T::from_count(class.len() as u64);
        let mean = class.iter().fold(T::zero(), |a, &v| a + v) / m;
        total = total + class.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
        start = end;
    }
    total
}

fn dedup_bounds<T: PartialOrd + Copy>(mut bounds: Vec<T>) -> Vec<T> {
    bounds.dedup_by(|a, b| a <= b);
    bounds
}

/// Compute class breaks for `values`.
///
/// Duplicate bounds are merged, which lowers the effective class count. For
/// Jenks, `k` is clamped to the number of distinct values.
pub fn compute_breaks<T: Real>(values: &[T], method: Method, k: usize) -> Result<ClassBreaks<T>, BreaksError> {
    check_k(k)?;
    if values.is_empty() {
        return Err(BreaksError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BreaksError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let bounds = match method {
        Method::EqualInterval => equal_interval_bounds(min, max, k),
        Method::ArithmeticProgression => arithmetic_progression_bounds(min, max, k),
        Method::Quantile => quantile_bounds(&sorted, k),
        Method::StdDeviation => std_deviation_bounds(&sorted, min, max, k),
        Method::Jenks => {
            let mut distinct = sorted.clone();
            distinct.dedup();
            let kk = k.min(distinct.len());
            if kk < 2 {
                vec![min]
            } else {
                let ends = jenks_partition(&sorted, kk);
                ends[..kk - 1].iter().map(|&e| sorted[e - 1]).collect()
            }
        }
    };
    let bounds = dedup_bounds(bounds);
    Ok(ClassBreaks { method, k: bounds.len() + 1, bounds, min, max })
}
