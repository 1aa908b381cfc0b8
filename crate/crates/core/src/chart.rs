//! Coordinate charts, points, and derivative multi-indices.
//!
//! Each equation family lives in a fixed chart; expressions, points and jet
//! tables all record theirs so that mismatched evaluations are caught early.

use crate::scalar::Scalar;
use std::fmt;

/// The named coordinate charts used across the toolkit. The first position of
/// a four-variable chart plays the role of `t` and the second the role of `x`
/// in divergence/recursion formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Chart {
    /// (t, x, y, z) — mixed/first/second heavenly, linear, asymmetric.
    Txyz,
    /// (t, p, y, z) — the chiral-model form.
    Tpyz,
    /// (t, p, q, y) — the two-variable Legendre image of Txyz.
    Tpqy,
    /// (eta, xi, q, y) — null-rotated variables of the linear lift system.
    EtaXiQY,
    /// (s, t, y) — translational reduction.
    Sty,
    /// (r, t, y) — Legendre image of the reduction.
    Rty,
}

impl Chart {
    pub fn vars(&self) -> &'static [&'static str] {
        match self {
            Chart::Txyz => &["t", "x", "y", "z"],
            Chart::Tpyz => &["t", "p", "y", "z"],
            Chart::Tpqy => &["t", "p", "q", "y"],
            Chart::EtaXiQY => &["eta", "xi", "q", "y"],
            Chart::Sty => &["s", "t", "y"],
            Chart::Rty => &["r", "t", "y"],
        }
    }

    pub fn dim(&self) -> usize {
        self.vars().len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars().iter().position(|v| *v == name)
    }

    pub fn parse(name: &str) -> Option<Chart> {
        match name.to_ascii_lowercase().as_str() {
            "txyz" => Some(Chart::Txyz),
            "tpyz" => Some(Chart::Tpyz),
            "tpqy" => Some(Chart::Tpqy),
            "etaxiqy" | "eta-xi-q-y" => Some(Chart::EtaXiQY),
            "sty" => Some(Chart::Sty),
            "rty" => Some(Chart::Rty),
        _ => None,
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.vars().join(","))
    }
}

/// A point of a chart; coordinate count always matches the chart dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    chart: Chart,
    coords: Vec<Scalar>,
}

impl Point {
    pub fn new(chart: Chart, coords: Vec<Scalar>) -> Self {
        assert_eq!(coords.len(), chart.dim(), "coordinate count vs chart dim");
        Point { chart, coords }
    }

    pub fn origin(chart: Chart) -> Self {
        Point::new(chart, vec![Scalar::zero(); chart.dim()])
    }

    pub fn from_ints(chart: Chart, coords: &[i64]) -> Self {
        Point::new(chart, coords.iter().map(|&c| Scalar::from_int(c)).collect())
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coords(&self) -> &[Scalar] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &Scalar {
        &self.coords[i]
    }

    pub fn is_exact(&self) -> bool {
        self.coords.iter().all(Scalar::is_exact)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Derivative multi-index: per-position derivative counts (at most 4 chart
/// positions; unused positions stay zero for 3-variable charts).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(pub [u8; 4]);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex([0; 4])
    }

    pub fn first(pos: usize) -> Self {
        let mut idx = [0u8; 4];
        idx[pos] = 1;
        MultiIndex(idx)
    }

    pub fn second(a: usize, b: usize) -> Self {
        let mut idx = [0u8; 4];
        idx[a] += 1;
        idx[b] += 1;
        MultiIndex(idx)
    }

    pub fn order(&self) -> u8 {
        self.0.iter().sum()
    }

    /// Index with one extra derivative in position `pos`.
    pub fn bump(&self, pos: usize) -> MultiIndex {
        let mut idx = self.0;
        idx[pos] += 1;
        MultiIndex(idx)
    }

    /// Index with one derivative removed at `pos`, or `None` if there is none.
    pub fn lower(&self, pos: usize) -> Option<MultiIndex> {
        if self.0[pos] == 0 {
            return None;
        }
        let mut idx = self.0;
        idx[pos] -= 1;
        Some(MultiIndex(idx))
    }

    /// All multi-indices over `dim` positions with total order <= `order`,
    /// in lexicographic order.
    pub fn all_up_to(dim: usize, order: u8) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut idx = [0u8; 4];
        fn rec(idx: &mut [u8; 4], pos: usize, dim: usize, left: u8, out: &mut Vec<MultiIndex>) {
            if pos == dim {
                out.push(MultiIndex(*idx));
                return;
            }
            for k in 0..=left {
                idx[pos] = k;
                rec(idx, pos + 1, dim, left - k, out);
            }
            idx[pos] = 0;
        }
        rec(&mut idx, 0, dim, order, &mut out);
        out.sort();
        out
    }

    /// Product of factorials of the entries, as i64 (orders are small).
    pub fn factorial(&self) -> i64 {
        self.0
            .iter()
            .map(|&k| (1..=k as i64).product::<i64>().max(1))
            .product()
    }

    /// Subscript like "txy" against the chart's variable names; empty for the
    /// zeroth-order index.
    pub fn subscript(&self, chart: Chart) -> String {
        let mut s = String::new();
        for (pos, &count) in self.0.iter().enumerate() {
            for _ in 0..count {
                s.push_str(chart.vars().get(pos).copied().unwrap_or("?"));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        // C(4+4,4) = 70 indices of order <= 4 in four variables
        assert_eq!(MultiIndex::all_up_to(4, 4).len(), 70);
        assert_eq!(MultiIndex::all_up_to(3, 2).len(), 10);
    }

    #[test]
    fn subscript_uses_chart_names() {
        let idx = MultiIndex([1, 0, 0, 2]);
        assert_eq!(idx.subscript(Chart::Txyz), "tzz");
        assert_eq!(idx.subscript(Chart::Tpqy), "tyy");
        assert_eq!(MultiIndex::zero().subscript(Chart::Txyz), "");
    }

    #[test]
    fn factorials() {
        assert_eq!(MultiIndex([2, 1, 0, 3]).factorial(), 12);
        assert_eq!(MultiIndex::zero().factorial(), 1);
    }
}
