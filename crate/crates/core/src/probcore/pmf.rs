use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::NORMALIZATION_TOLERANCE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("mass entry {index} is negative or not finite ({value})")]
    InvalidMass { index: usize, value: f64 },
    #[error("deficit {0} is outside [0, 1]")]
    InvalidDeficit(f64),
    #[error("total probability {0} differs from 1")]
    NotNormalized(f64),
    #[error("cannot normalize a measure with zero mass")]
    Empty,
}

/// Probability mass function on consecutive integers `offset, offset + 1, ...`
/// plus a `deficit` sitting at `+inf` (lost packets).
///
/// Always normalized: `sum(mass) + deficit = 1` within
/// [`NORMALIZATION_TOLERANCE`]. Partial or conditional measures are built as
/// [`SubPmf`] and converted explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf")]
pub struct Pmf {
    offset: i64,
    mass: Vec<f64>,
    deficit: f64,
}

#[derive(Deserialize)]
struct RawPmf {
    offset: i64,
    mass: Vec<f64>,
    deficit: f64,
}

impl TryFrom<RawPmf> for Pmf {
    type Error = PmfError;

    fn try_from(raw: RawPmf) -> Result<Self, Self::Error> {
        Pmf::new(raw.offset, raw.mass, raw.deficit)
    }
}

impl Pmf {
    pub fn new(offset: i64, mass: Vec<f64>, deficit: f64) -> Result<Self, PmfError> {
        for (index, &value) in mass.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(PmfError::InvalidMass { index, value });
            }
        }
        if !(0.0..=1.0 + NORMALIZATION_TOLERANCE).contains(&deficit) {
            return Err(PmfError::InvalidDeficit(deficit));
        }
        let total = mass.iter().sum::<f64>() + deficit;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PmfError::NotNormalized(total));
        }
        Ok(Self {
            offset,
            mass,
            deficit,
        })
    }

    /// Unit mass at `value`.
    pub fn point(value: i64) -> Self {
        Self {
            offset: value,
            mass: vec![1.0],
            deficit: 0.0,
        }
    }

    /// All mass at `+inf`.
    pub fn lost() -> Self {
        Self {
            offset: 0,
            mass: Vec::new(),
            deficit: 1.0,
        }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// Mass on finite values.
    pub fn finite_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `Pr[X = value]`.
    pub fn prob(&self, value: i64) -> f64 {
        let idx = value - self.offset;
        if idx < 0 {
            return 0.0;
        }
        self.mass.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// `Pr[X < value]`.
    pub fn cdf_below(&self, value: i64) -> f64 {
        let upto = (value - self.offset).clamp(0, self.mass.len() as i64) as usize;
        self.mass[..upto].iter().sum()
    }

    /// Largest value carrying mass, if any.
    pub fn max_value(&self) -> Option<i64> {
        self.mass
            .iter()
            .rposition(|&m| m > 0.0)
            .map(|i| self.offset + i as i64)
    }

    /// `(value, mass)` pairs, including zero entries.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .map(move |(i, &m)| (self.offset + i as i64, m))
    }

    pub fn mean(&self) -> Option<f64> {
        if self.deficit > 0.0 {
            return None;
        }
        Some(self.iter().map(|(v, m)| v as f64 * m).sum())
    }

    /// Distribution conditioned on being finite.
    pub fn conditional(&self) -> Result<Pmf, PmfError> {
        SubPmf::from_parts(self.offset, self.mass.clone()).normalize()
    }

    /// Total variation distance, counting the deficits as one more atom.
    pub fn total_variation(&self, other: &Pmf) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = (self.offset + self.mass.len() as i64).max(other.offset + other.mass.len() as i64);
        let body: f64 = (lo..hi).map(|v| (self.prob(v) - other.prob(v)).abs()).sum();
        0.5 * (body + (self.deficit - other.deficit).abs())
    }

    pub fn into_sub(self) -> SubPmf {
        SubPmf::from_parts(self.offset, self.mass)
    }
}

/// Discrete convolution of independent variables; deficits combine as
/// `1 - (1 - a)(1 - b)`.
pub fn convolve(a: &Pmf, b: &Pmf) -> Pmf {
    let mass = convolve_slices(&a.mass, &b.mass);
    let deficit = 1.0 - (1.0 - a.deficit) * (1.0 - b.deficit);
    Pmf {
        offset: a.offset + b.offset,
        mass,
        deficit,
    }
}

fn convolve_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Percentile of a PMF using the strict-inequality definition
/// `max { n : Pr[X < n] < level }`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Percentile {
    Finite(i64),
    Infinite,
}

impl Percentile {
    pub fn is_finite(self) -> bool {
        matches!(self, Percentile::Finite(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Percentile::Finite(v) => Some(v),
            Percentile::Infinite => None,
        }
    }
}

impl fmt::Display for Percentile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Percentile::Finite(v) => write!(f, "{v}"),
            Percentile::Infinite => f.write_str("INFINITE"),
        }
    }
}

impl core::str::FromStr for Percentile {
    type Err = core::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "INFINITE" {
            Ok(Percentile::Infinite)
        } else {
            s.parse().map(Percentile::Finite)
        }
    }
}

impl Serialize for Percentile {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Percentile::Finite(v) => s.serialize_i64(*v),
            Percentile::Infinite => s.serialize_str("INFINITE"),
        }
    }
}

impl<'de> Deserialize<'de> for Percentile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = Percentile;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or \"INFINITE\"")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Percentile, E> {
                Ok(Percentile::Finite(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Percentile, E> {
                i64::try_from(v)
                    .map(Percentile::Finite)
                    .map_err(|_| E::custom("percentile out of range"))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Percentile, E> {
                if v == "INFINITE" {
                    Ok(Percentile::Infinite)
                } else {
                    Err(E::custom("expected \"INFINITE\""))
                }
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// `max { n : Pr[X < n] < level }`, or [`Percentile::Infinite`] when the
/// finite mass never reaches `level`.
pub fn percentile(x: &Pmf, level: f64) -> Percentile {
    // Pr[X < n] = 0 for n <= offset, so the answer is at least offset.
    let mut below = 0.0;
    for (i, &m) in x.mass.iter().enumerate() {
        // below = Pr[X < offset + i]
        below += m;
        // now below = Pr[X < offset + i + 1]
        if below >= level {
            return Percentile::Finite(x.offset + i as i64);
        }
    }
    Percentile::Infinite
}

/// Non-normalized measure on consecutive integers. Used for conditional
/// families and intermediate sums before they become a [`Pmf`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubPmf {
    offset: i64,
    mass: Vec<f64>,
}

impl SubPmf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(offset: i64, mass: Vec<f64>) -> Self {
        Self { offset, mass }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn get(&self, value: i64) -> f64 {
        let idx = value - self.offset;
        if idx < 0 {
            return 0.0;
        }
        self.mass.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// Add `weight` at `value`, growing the support as needed.
    pub fn add(&mut self, value: i64, weight: f64) {
        if self.mass.is_empty() {
            self.offset = value;
            self.mass.push(weight);
            return;
        }
        if value < self.offset {
            let grow = (self.offset - value) as usize;
            let mut mass = vec![0.0; grow];
            mass.append(&mut self.mass);
            self.mass = mass;
            self.offset = value;
        }
        let idx = (value - self.offset) as usize;
        if idx >= self.mass.len() {
            self.mass.resize(idx + 1, 0.0);
        }
        self.mass[idx] += weight;
    }

    /// `self += weight * shift(other, by)`.
    pub fn add_scaled(&mut self, other: &SubPmf, weight: f64, by: i64) {
        if other.mass.is_empty() || weight == 0.0 {
            return;
        }
        let start = other.offset + by;
        let end = start + other.mass.len() as i64 - 1;
        // Reserve the range once.
        self.add(start, 0.0);
        self.add(end, 0.0);
        let base = (start - self.offset) as usize;
        for (dst, &m) in self.mass[base..].iter_mut().zip(&other.mass) {
            *dst += weight * m;
        }
    }

    pub fn scaled(mut self, weight: f64) -> Self {
        self.mass.iter_mut().for_each(|m| *m *= weight);
        self
    }

    pub fn shifted(mut self, by: i64) -> Self {
        self.offset += by;
        self
    }

    pub fn convolve(&self, other: &SubPmf) -> SubPmf {
        SubPmf {
            offset: self.offset + other.offset,
            mass: convolve_slices(&self.mass, &other.mass),
        }
    }

    /// `sum_{e >= 0} ratio^e * shift(self, e * period)`, cut once the captured
    /// mass reaches `1 - tol` of the full series; the residual goes to the
    /// last support point.
    pub fn geometric_repeat(&self, period: i64, ratio: f64, tol: f64) -> SubPmf {
        self.geometric_repeat_capped(period, ratio, tol, usize::MAX)
            .0
    }

    /// As [`Self::geometric_repeat`], but stops adding terms once the support
    /// would exceed `max_points`. The second value is the series mass left
    /// out in that case (zero otherwise).
    pub fn geometric_repeat_capped(
        &self,
        period: i64,
        ratio: f64,
        tol: f64,
        max_points: usize,
    ) -> (SubPmf, f64) {
        assert!((0.0..1.0).contains(&ratio), "ratio must lie in [0, 1)");
        assert!(period > 0);
        let base_total = self.total();
        if base_total == 0.0 || ratio == 0.0 {
            return (self.clone(), 0.0);
        }
        let series_total = base_total / (1.0 - ratio);
        let mut out = SubPmf::new();
        let mut weight = 1.0;
        let mut captured = 0.0;
        let mut e = 0i64;
        loop {
            out.add_scaled(self, weight, e * period);
            captured += weight * base_total;
            if captured >= (1.0 - tol) * series_total {
                break;
            }
            if out.mass.len().saturating_add(period as usize) > max_points {
                return (out, (series_total - captured).max(0.0));
            }
            weight *= ratio;
            e += 1;
        }
        let residual = series_total - captured;
        if residual > 0.0 {
            if let Some(last) = out.mass.iter().rposition(|&m| m > 0.0) {
                out.mass[last] += residual;
            }
        }
        (out, 0.0)
    }

    /// Divide by the total mass.
    pub fn normalize(self) -> Result<Pmf, PmfError> {
        let total = self.total();
        if total <= 0.0 {
            return Err(PmfError::Empty);
        }
        Pmf::new(
            self.offset,
            self.mass.into_iter().map(|m| m / total).collect(),
            0.0,
        )
    }

    /// Treat the measure as a sub-distribution and put the missing mass at
    /// `+inf`.
    pub fn with_deficit(self) -> Result<Pmf, PmfError> {
        let total = self.total();
        if total > 1.0 + NORMALIZATION_TOLERANCE {
            return Err(PmfError::NotNormalized(total));
        }
        Pmf::new(self.offset, self.mass, (1.0 - total).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(offset: i64, mass: &[f64]) -> Pmf {
        Pmf::new(offset, mass.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn convolve_identity_and_coin() {
        let x = pmf(3, &[0.2, 0.5, 0.3]);
        assert_eq!(convolve(&Pmf::point(0), &x), x);
        let coin = pmf(0, &[0.5, 0.5]);
        let two = convolve(&coin, &coin);
        assert_eq!(two.offset(), 0);
        assert_eq!(two.mass(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn convolve_combines_deficits() {
        let a = Pmf::new(0, vec![0.8], 0.2).unwrap();
        let b = Pmf::new(1, vec![0.5], 0.5).unwrap();
        let c = convolve(&a, &b);
        assert!((c.deficit() - 0.6).abs() < 1e-15);
        assert!((c.prob(1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn percentile_strict_definition() {
        assert_eq!(percentile(&pmf(0, &[0.5, 0.5]), 0.9), Percentile::Finite(1));
        let lossy = Pmf::new(2, vec![0.5, 0.35], 0.15).unwrap();
        assert_eq!(percentile(&lossy, 0.9), Percentile::Infinite);
        // The two definitions differ at atoms: Pr[X < 1] = 0.9 is not < 0.9.
        assert_eq!(percentile(&pmf(0, &[0.9, 0.1]), 0.9), Percentile::Finite(0));
        assert_eq!(percentile(&Pmf::point(7), 0.9), Percentile::Finite(7));
    }

    #[test]
    fn percentile_ordering() {
        assert!(Percentile::Finite(i64::MAX) < Percentile::Infinite);
        assert!(Percentile::Finite(3) < Percentile::Finite(4));
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(
            Pmf::new(0, vec![0.5], 0.0),
            Err(PmfError::NotNormalized(_))
        ));
        assert!(matches!(
            Pmf::new(0, vec![-0.1, 1.1], 0.0),
            Err(PmfError::InvalidMass { .. })
        ));
    }

    #[test]
    fn geometric_repeat_totals_series() {
        let base = SubPmf::from_parts(1, vec![0.1, 0.2]);
        let g = base.geometric_repeat(5, 0.7, 1e-9);
        let want = 0.3 / 0.3;
        assert!((g.total() - want).abs() < 1e-12);
        assert!((g.get(1) - 0.1).abs() < 1e-15);
        assert!((g.get(7) - 0.2 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn sub_pmf_add_grows_both_ways() {
        let mut s = SubPmf::new();
        s.add(5, 0.25);
        s.add(2, 0.25);
        s.add(9, 0.5);
        assert_eq!(s.offset(), 2);
        assert_eq!(s.mass().len(), 8);
        let p = s.normalize().unwrap();
        assert_eq!(p.prob(9), 0.5);
    }

    #[test]
    fn percentile_parses_display_form() {
        let v: Percentile = "INFINITE".parse().unwrap();
        assert_eq!(v, Percentile::Infinite);
        assert_eq!("12".parse::<Percentile>().unwrap(), Percentile::Finite(12));
    }
}
