//! Exact symbolic expressions: finite sums of
//! `coefficient * monomial * exp(linear form) * sin|cos(linear form)`.
//!
//! The class is closed under addition, multiplication (trig products expand
//! through product-to-sum identities), scalar multiples, partial
//! differentiation, one-variable antidifferentiation, and invertible linear
//! changes of chart. Terms are kept in a canonical order so that structural
//! equality is decidable; an expression is zero iff it has no terms.

use crate::chart::{Chart, MultiIndex, Point};
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unknown variable `{0}` in chart {1}")]
    UnknownVariable(String, Chart),
    #[error("chart mismatch: expression in {expected}, argument in {found}")]
    ChartMismatch { expected: Chart, found: Chart },
    #[error("jet order {0} exceeds the supported maximum of 4")]
    OrderTooHigh(u8),
    #[error("chart map is singular")]
    SingularMap,
    #[error("chart map requires exact rational entries")]
    InexactMap,
    #[error("chart map dimensions do not match ({0} -> {1})")]
    MapDimension(Chart, Chart),
}

/// Linear form `c0*v0 + c1*v1 + ... + constant` over a chart's variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearForm {
    chart: Chart,
    coeffs: [Scalar; 4],
    constant: Scalar,
}

impl LinearForm {
    pub fn zero(chart: Chart) -> Self {
        LinearForm {
            chart,
            coeffs: std::array::from_fn(|_| Scalar::zero()),
            constant: Scalar::zero(),
        }
    }

    pub fn new(chart: Chart, coeffs: Vec<Scalar>, constant: Scalar) -> Self {
        assert_eq!(coeffs.len(), chart.dim(), "coefficient count vs chart dim");
        let mut cs = std::array::from_fn(|_| Scalar::zero());
        for (i, c) in coeffs.into_iter().enumerate() {
            cs[i] = c;
        }
        LinearForm {
            chart,
            coeffs: cs,
            constant,
        }
    }

    pub fn var(chart: Chart, pos: usize) -> Self {
        let mut lf = LinearForm::zero(chart);
        lf.coeffs[pos] = Scalar::one();
        lf
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coeff(&self, pos: usize) -> &Scalar {
        &self.coeffs[pos]
    }

    pub fn constant(&self) -> &Scalar {
        &self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero) && self.constant.is_zero()
    }

    pub fn add(&self, other: &LinearForm) -> LinearForm {
        assert_eq!(self.chart, other.chart);
        LinearForm {
            chart: self.chart,
            coeffs: std::array::from_fn(|i| &self.coeffs[i] + &other.coeffs[i]),
            constant: &self.constant + &other.constant,
        }
    }

    pub fn sub(&self, other: &LinearForm) -> LinearForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> LinearForm {
        LinearForm {
            chart: self.chart,
            coeffs: std::array::from_fn(|i| -&self.coeffs[i]),
            constant: -&self.constant,
        }
    }

    pub fn scale(&self, s: &Scalar) -> LinearForm {
        LinearForm {
            chart: self.chart,
            coeffs: std::array::from_fn(|i| &self.coeffs[i] * s),
            constant: &self.constant * s,
        }
    }

    pub fn eval(&self, pt: &Point) -> Scalar {
        let mut acc = self.constant.clone();
        for i in 0..self.chart.dim() {
            acc = &acc + &(&self.coeffs[i] * pt.coord(i));
        }
        acc
    }

    /// Sign of the leading (first nonzero) entry, used for trig normalization.
    fn leading_is_negative(&self) -> bool {
        for c in self.coeffs.iter().take(self.chart.dim()) {
            if !c.is_zero() {
                return c.is_negative();
            }
        }
        self.constant.is_negative()
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut write_part = |f: &mut fmt::Formatter<'_>, c: &Scalar, var: Option<&str>| {
            if c.is_zero() {
                return Ok(());
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match var {
                Some(v) => {
                    if mag.is_one() && mag.is_exact() {
                        write!(f, "{v}")
                    } else {
                        write!(f, "{mag}*{v}")
                    }
                }
                None => write!(f, "{mag}"),
            }
        };
        for i in 0..self.chart.dim() {
            write_part(f, &self.coeffs[i], Some(self.chart.vars()[i]))?;
        }
        write_part(f, &self.constant, None)?;
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// Canonical term shape; the coefficient lives in the expression's term map.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    powers: [u32; 4],
    exp: Option<LinearForm>,
    trig: Option<(TrigKind, LinearForm)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    chart: Chart,
    terms: BTreeMap<TermKey, Scalar>,
}

impl Expression {
    pub fn zero(chart: Chart) -> Self {
        Expression {
            chart,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(chart: Chart, c: Scalar) -> Self {
        let mut e = Expression::zero(chart);
        e.push_term(
            c,
            TermKey {
                powers: [0; 4],
                exp: None,
                trig: None,
            },
        );
        e
    }

    pub fn one(chart: Chart) -> Self {
        Expression::constant(chart, Scalar::one())
    }

    pub fn var(chart: Chart, name: &str) -> Result<Self, ExprError> {
        let pos = chart
            .var_index(name)
            .ok_or_else(|| ExprError::UnknownVariable(name.into(), chart))?;
        Ok(Expression::var_pos(chart, pos))
    }

    pub fn var_pos(chart: Chart, pos: usize) -> Self {
        assert!(pos < chart.dim());
        let mut powers = [0u32; 4];
        powers[pos] = 1;
        let mut e = Expression::zero(chart);
        e.push_term(
            Scalar::one(),
            TermKey {
                powers,
                exp: None,
                trig: None,
            },
        );
        e
    }

    pub fn from_linear_form(lf: &LinearForm) -> Self {
        let chart = lf.chart();
        let mut e = Expression::constant(chart, lf.constant().clone());
        for i in 0..chart.dim() {
            e = e.add(&Expression::var_pos(chart, i).scale(lf.coeff(i)));
        }
        e
    }

    pub fn exp_of(lf: LinearForm) -> Self {
        let chart = lf.chart();
        let mut e = Expression::zero(chart);
        e.push_term(
            Scalar::one(),
            TermKey {
                powers: [0; 4],
                exp: Some(lf),
                trig: None,
            },
        );
        e
    }

    pub fn sin_of(lf: LinearForm) -> Self {
        let chart = lf.chart();
        let mut e = Expression::zero(chart);
        e.push_term(
            Scalar::one(),
            TermKey {
                powers: [0; 4],
                exp: None,
                trig: Some((TrigKind::Sin, lf)),
            },
        );
        e
    }

    pub fn cos_of(lf: LinearForm) -> Self {
        let chart = lf.chart();
        let mut e = Expression::zero(chart);
        e.push_term(
            Scalar::one(),
            TermKey {
                powers: [0; 4],
                exp: None,
                trig: Some((TrigKind::Cos, lf)),
            },
        );
        e
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// True when every coefficient and every linear-form entry is exact.
    pub fn is_exact(&self) -> bool {
        self.terms.iter().all(|(k, c)| {
            c.is_exact()
                && k.exp.as_ref().map_or(true, |l| {
                    l.coeffs.iter().all(Scalar::is_exact) && l.constant.is_exact()
                })
                && k.trig.as_ref().map_or(true, |(_, l)| {
                    l.coeffs.iter().all(Scalar::is_exact) && l.constant.is_exact()
                })
        })
    }

    /// True when no term carries an exp or trig factor.
    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(|k| k.exp.is_none() && k.trig.is_none())
    }

    /// Total polynomial degree; `None` for the zero expression.
    pub fn degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|k| k.powers.iter().sum::<u32>())
            .max()
    }

    /// Normalizing insertion: handles zero trig/exp arguments, trig parity,
    /// and coefficient merging.
    fn push_term(&mut self, coeff: Scalar, key: TermKey) {
        if coeff.is_zero() {
            return;
        }
        let TermKey { powers, exp, trig } = key;
        let exp = match exp {
            Some(l) if l.is_zero() => None,
            other => other,
        };
        let (coeff, trig) = match trig {
            Some((TrigKind::Sin, m)) if m.is_zero() => return, // sin(0) = 0
            Some((TrigKind::Cos, m)) if m.is_zero() => (coeff, None), // cos(0) = 1
            Some((kind, m)) => {
                if m.leading_is_negative() {
                    // sin is odd, cos is even
                    match kind {
                        TrigKind::Sin => (-coeff, Some((TrigKind::Sin, m.neg()))),
                        TrigKind::Cos => (coeff, Some((TrigKind::Cos, m.neg()))),
                    }
                } else {
                    (coeff, Some((kind, m)))
                }
            }
            None => (coeff, None),
        };
        let key = TermKey { powers, exp, trig };
        let entry = self.terms.entry(key);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = &*o.get() + &coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Expression) -> Expression {
        assert_eq!(self.chart, other.chart, "chart mismatch in add");
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.push_term(c.clone(), k.clone());
        }
        out
    }

    pub fn sub(&self, other: &Expression) -> Expression {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expression {
        let mut out = Expression::zero(self.chart);
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), -c);
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Expression {
        let mut out = Expression::zero(self.chart);
        if s.is_zero() {
            return out;
        }
        for (k, c) in &self.terms {
            out.push_term(c * s, k.clone());
        }
        out
    }

    pub fn mul(&self, other: &Expression) -> Expression {
        assert_eq!(self.chart, other.chart, "chart mismatch in mul");
        let mut out = Expression::zero(self.chart);
        let half = Scalar::rational(1, 2);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let coeff = ca * cb;
                let powers = std::array::from_fn(|i| ka.powers[i] + kb.powers[i]);
                let exp = match (&ka.exp, &kb.exp) {
                    (None, None) => None,
                    (Some(l), None) | (None, Some(l)) => Some(l.clone()),
                    (Some(l1), Some(l2)) => Some(l1.add(l2)),
                };
                match (&ka.trig, &kb.trig) {
                    (None, None) => out.push_term(
                        coeff,
                        TermKey {
                            powers,
                            exp,
                            trig: None,
                        },
                    ),
                    (Some(tm), None) | (None, Some(tm)) => out.push_term(
                        coeff,
                        TermKey {
                            powers,
                            exp,
                            trig: Some(tm.clone()),
                        },
                    ),
                    (Some((k1, a)), Some((k2, b))) => {
                        // product-to-sum: the class keeps one trig factor per term
                        let sum = a.add(b);
                        let diff = a.sub(b);
                        let c2 = &coeff * &half;
                        use TrigKind::*;
                        let parts: [(Scalar, TrigKind, LinearForm); 2] = match (k1, k2) {
                            // sin A sin B = (cos(A-B) - cos(A+B))/2
                            (Sin, Sin) => [(c2.clone(), Cos, diff), (-&c2, Cos, sum)],
                            // cos A cos B = (cos(A-B) + cos(A+B))/2
                            (Cos, Cos) => [(c2.clone(), Cos, diff), (c2.clone(), Cos, sum)],
                            // sin A cos B = (sin(A+B) + sin(A-B))/2
                            (Sin, Cos) => [(c2.clone(), Sin, sum), (c2.clone(), Sin, diff)],
                            // cos A sin B = (sin(A+B) - sin(A-B))/2
                            (Cos, Sin) => [(c2.clone(), Sin, sum), (-&c2, Sin, diff)],
                        };
                        for (c, kind, arg) in parts {
                            out.push_term(
                                c,
                                TermKey {
                                    powers,
                                    exp: exp.clone(),
                                    trig: Some((kind, arg)),
                                },
                            );
                        }
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Expression {
        let mut out = Expression::one(self.chart);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn differentiate(&self, var: &str) -> Result<Expression, ExprError> {
        let pos = self
            .chart
            .var_index(var)
            .ok_or_else(|| ExprError::UnknownVariable(var.into(), self.chart))?;
        Ok(self.differentiate_pos(pos))
    }

    pub fn differentiate_pos(&self, pos: usize) -> Expression {
        assert!(pos < self.chart.dim());
        let mut out = Expression::zero(self.chart);
        for (k, c) in &self.terms {
            // power rule
            if k.powers[pos] > 0 {
                let mut powers = k.powers;
                powers[pos] -= 1;
                out.push_term(
                    c * &Scalar::from_int(k.powers[pos] as i64),
                    TermKey {
                        powers,
                        exp: k.exp.clone(),
                        trig: k.trig.clone(),
                    },
                );
            }
            // exp chain rule
            if let Some(l) = &k.exp {
                let a = l.coeff(pos);
                if !a.is_zero() {
                    out.push_term(c * a, k.clone());
                }
            }
            // trig chain rule
            if let Some((kind, m)) = &k.trig {
                let b = m.coeff(pos);
                if !b.is_zero() {
                    let (coeff, new_kind) = match kind {
                        TrigKind::Sin => (c * b, TrigKind::Cos),
                        TrigKind::Cos => (-&(c * b), TrigKind::Sin),
                    };
                    out.push_term(
                        coeff,
                        TermKey {
                            powers: k.powers,
                            exp: k.exp.clone(),
                            trig: Some((new_kind, m.clone())),
                        },
                    );
                }
            }
        }
        out
    }

    /// Derivative along a multi-index.
    pub fn differentiate_multi(&self, idx: &MultiIndex) -> Expression {
        let mut e = self.clone();
        for pos in 0..self.chart.dim() {
            for _ in 0..idx.0[pos] {
                e = e.differentiate_pos(pos);
            }
        }
        e
    }

    pub fn evaluate(&self, pt: &Point) -> Result<Scalar, ExprError> {
        if pt.chart() != self.chart {
            return Err(ExprError::ChartMismatch {
                expected: self.chart,
                found: pt.chart(),
            });
        }
        let mut acc = Scalar::zero();
        for (k, c) in &self.terms {
            let mut v = c.clone();
            for i in 0..self.chart.dim() {
                if k.powers[i] > 0 {
                    v = &v * &pt.coord(i).pow(k.powers[i]);
                }
            }
            if let Some(l) = &k.exp {
                let arg = l.eval(pt);
                if !arg.is_zero() {
                    // exp of a nonzero rational is irrational: promote
                    v = &v * &Scalar::float(arg.to_f64().exp());
                }
            }
            if let Some((kind, m)) = &k.trig {
                let arg = m.eval(pt);
                match (kind, arg.is_zero()) {
                    (TrigKind::Sin, true) => continue, // term contributes 0
                    (TrigKind::Cos, true) => {}
                    (TrigKind::Sin, false) => v = &v * &Scalar::float(arg.to_f64().sin()),
                    (TrigKind::Cos, false) => v = &v * &Scalar::float(arg.to_f64().cos()),
                }
            }
            acc = &acc + &v;
        }
        Ok(acc)
    }

    /// All partial derivatives up to `order` (at most 4) at `pt`, by repeated
    /// exact differentiation followed by evaluation.
    pub fn jet(&self, pt: &Point, order: u8) -> Result<JetTable, ExprError> {
        if order > 4 {
            return Err(ExprError::OrderTooHigh(order));
        }
        if pt.chart() != self.chart {
            return Err(ExprError::ChartMismatch {
                expected: self.chart,
                found: pt.chart(),
            });
        }
        let dim = self.chart.dim();
        let mut derivs: BTreeMap<MultiIndex, Expression> = BTreeMap::new();
        derivs.insert(MultiIndex::zero(), self.clone());
        let mut entries = BTreeMap::new();
        for idx in MultiIndex::all_up_to(dim, order) {
            if idx.order() > 0 {
                let pos = (0..dim).find(|&p| idx.0[p] > 0).unwrap();
                let parent = idx.lower(pos).unwrap();
                let d = derivs[&parent].differentiate_pos(pos);
                derivs.insert(idx, d);
            }
            entries.insert(idx, derivs[&idx].evaluate(pt)?);
        }
        Ok(JetTable {
            chart: self.chart,
            point: pt.clone(),
            order,
            entries,
        })
    }

    /// One-variable antiderivative (no integration constant); the class is
    /// closed under this because exp/trig arguments are linear.
    pub fn antiderivative_pos(&self, pos: usize) -> Expression {
        let mut out = Expression::zero(self.chart);
        for (k, c) in &self.terms {
            out = out.add(&antiderivative_term(self.chart, c, k, pos));
        }
        out
    }

    /// The expression as a linear form, when it is one (degree <= 1, no
    /// exp/trig factors).
    pub fn as_linear_form(&self) -> Option<LinearForm> {
        let mut lf = LinearForm::zero(self.chart);
        for (k, c) in &self.terms {
            if k.exp.is_some() || k.trig.is_some() {
                return None;
            }
            match k.powers.iter().sum::<u32>() {
                0 => lf.constant = &lf.constant + c,
                1 => {
                    let pos = (0..4).find(|&i| k.powers[i] == 1).unwrap();
                    lf.coeffs[pos] = &lf.coeffs[pos] + c;
                }
                _ => return None,
            }
        }
        Some(lf)
    }

    /// Coefficient of the plain monomial with the given powers (no exp/trig).
    pub fn monomial_coeff(&self, powers: [u32; 4]) -> Scalar {
        self.terms
            .get(&TermKey {
                powers,
                exp: None,
                trig: None,
            })
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }
}

fn antiderivative_term(chart: Chart, c: &Scalar, k: &TermKey, pos: usize) -> Expression {
    let a = k.exp.as_ref().map(|l| l.coeff(pos).clone()).unwrap_or_else(Scalar::zero);
    let b = k
        .trig
        .as_ref()
        .map(|(_, m)| m.coeff(pos).clone())
        .unwrap_or_else(Scalar::zero);
    let n = k.powers[pos];
    if a.is_zero() && b.is_zero() {
        // exp/trig (if any) do not involve the variable: plain power rule
        let mut powers = k.powers;
        powers[pos] = n + 1;
        let coeff = c
            .checked_div(&Scalar::from_int((n + 1) as i64))
            .expect("n+1 nonzero");
        let mut e = Expression::zero(chart);
        e.push_term(
            coeff,
            TermKey {
                powers,
                exp: k.exp.clone(),
                trig: k.trig.clone(),
            },
        );
        return e;
    }
    // F = antiderivative of exp(E)*trig(M) in the variable:
    //   a=0: trig only;  b=0: exp only;  otherwise exp*trig combination
    let base = |kind: Option<TrigKind>| {
        let mut e = Expression::zero(chart);
        e.push_term(
            Scalar::one(),
            TermKey {
                powers: [0; 4],
                exp: k.exp.clone(),
                trig: kind.map(|kd| (kd, k.trig.as_ref().unwrap().1.clone())),
            },
        );
        e
    };
    let f_lower = match (&k.trig, a.is_zero(), b.is_zero()) {
        (None, false, _) => {
            // int exp(a v + ..) = exp(..)/a
            base(None).scale(&Scalar::one().checked_div(&a).unwrap())
        }
        (Some((kind, _)), _, false) | (Some((kind, _)), false, true) => {
            let denom = &(&a * &a) + &(&b * &b);
            match kind {
                // int e^{av}cos(bv+..) = e(a cos + b sin)/(a^2+b^2)
                TrigKind::Cos => base(Some(TrigKind::Cos))
                    .scale(&a)
                    .add(&base(Some(TrigKind::Sin)).scale(&b))
                    .scale(&Scalar::one().checked_div(&denom).unwrap()),
                // int e^{av}sin(bv+..) = e(a sin - b cos)/(a^2+b^2)
                TrigKind::Sin => base(Some(TrigKind::Sin))
                    .scale(&a)
                    .sub(&base(Some(TrigKind::Cos)).scale(&b))
                    .scale(&Scalar::one().checked_div(&denom).unwrap()),
            }
        }
        _ => unreachable!("a or b nonzero by the branch above"),
    };
    // v^n * f: integrate by parts n times
    let mut powers_only = Expression::zero(chart);
    powers_only.push_term(
        c.clone(),
        TermKey {
            powers: k.powers,
            exp: None,
            trig: None,
        },
    );
    if n == 0 {
        return powers_only.mul(&f_lower);
    }
    let term_noexp = powers_only; // c * v^n (and other variables' powers)
    let first = term_noexp.mul(&f_lower);
    let reduced = term_noexp.differentiate_pos(pos).mul(&f_lower);
    // int u f = u F - int u' F with u = c v^n ...
    first.sub(&reduced.antiderivative_pos(pos))
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            let mut factors: Vec<String> = Vec::new();
            for i in 0..self.chart.dim() {
                match k.powers[i] {
                    0 => {}
                    1 => factors.push(self.chart.vars()[i].to_string()),
                    n => factors.push(format!("{}^{}", self.chart.vars()[i], n)),
                }
            }
            if let Some(l) = &k.exp {
                factors.push(format!("exp({l})"));
            }
            if let Some((kind, m)) = &k.trig {
                let name = match kind {
                    TrigKind::Sin => "sin",
                    TrigKind::Cos => "cos",
                };
                factors.push(format!("{name}({m})"));
            }
            let neg = c.is_negative();
            let mag = c.abs();
            let coeff_str = if mag.is_exact() && mag.is_one() && !factors.is_empty() {
                None
            } else {
                Some(mag.to_string())
            };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let body = match coeff_str {
                Some(cs) if factors.is_empty() => cs,
                Some(cs) => format!("{}*{}", cs, factors.join("*")),
                None => factors.join("*"),
            };
            write!(f, "{body}")?;
        }
        Ok(())
    }
}

/// Invertible affine change of chart: each source variable is replaced by a
/// linear form over the target chart.
#[derive(Clone, Debug)]
pub struct ChartMap {
    from: Chart,
    to: Chart,
    forms: Vec<LinearForm>,
}

impl ChartMap {
    pub fn new(from: Chart, to: Chart, forms: Vec<LinearForm>) -> Result<Self, ExprError> {
        if from.dim() != to.dim() || forms.len() != from.dim() {
            return Err(ExprError::MapDimension(from, to));
        }
        for lf in &forms {
            if lf.chart() != to {
                return Err(ExprError::MapDimension(from, to));
            }
            if !lf.constant().is_exact()
                || (0..to.dim()).any(|i| !lf.coeff(i).is_exact())
            {
                return Err(ExprError::InexactMap);
            }
        }
        let dim = from.dim();
        let mat: Vec<Vec<Scalar>> = (0..dim)
            .map(|r| (0..dim).map(|c| forms[r].coeff(c).clone()).collect())
            .collect();
        if crate::linalg::invert(&mat).is_none() {
            return Err(ExprError::SingularMap);
        }
        Ok(ChartMap { from, to, forms })
    }

    pub fn identity(chart: Chart) -> Self {
        let forms = (0..chart.dim())
            .map(|i| LinearForm::var(chart, i))
            .collect();
        ChartMap {
            from: chart,
            to: chart,
            forms,
        }
    }

    pub fn from_chart(&self) -> Chart {
        self.from
    }

    pub fn to_chart(&self) -> Chart {
        self.to
    }

    pub fn form(&self, i: usize) -> &LinearForm {
        &self.forms[i]
    }

    pub fn inverse(&self) -> ChartMap {
        let dim = self.from.dim();
        let mat: Vec<Vec<Scalar>> = (0..dim)
            .map(|r| (0..dim).map(|c| self.forms[r].coeff(c).clone()).collect())
            .collect();
        let (inv, _det) = crate::linalg::invert(&mat).expect("validated invertible");
        // x_from = A x_to + c  =>  x_to = A^{-1} (x_from - c)
        let forms = (0..dim)
            .map(|r| {
                let mut coeffs = vec![Scalar::zero(); dim];
                let mut constant = Scalar::zero();
                for c in 0..dim {
                    coeffs[c] = inv[r][c].clone();
                    constant = &constant - &(&inv[r][c] * self.forms[c].constant());
                }
                LinearForm::new(self.from, coeffs, constant)
            })
            .collect();
        ChartMap {
            from: self.to,
            to: self.from,
            forms,
        }
    }

    fn compose_form(&self, lf: &LinearForm) -> LinearForm {
        let mut out = LinearForm::zero(self.to);
        out.constant = lf.constant().clone();
        for i in 0..self.from.dim() {
            out = out.add(&self.forms[i].scale(lf.coeff(i)));
        }
        out
    }

    /// Exact substitution of the map into an expression.
    pub fn apply(&self, e: &Expression) -> Result<Expression, ExprError> {
        if e.chart() != self.from {
            return Err(ExprError::ChartMismatch {
                expected: self.from,
                found: e.chart(),
            });
        }
        let mut out = Expression::zero(self.to);
        for (k, c) in &e.terms {
            let mut term = Expression::constant(self.to, c.clone());
            for i in 0..self.from.dim() {
                if k.powers[i] > 0 {
                    term = term.mul(&Expression::from_linear_form(&self.forms[i]).pow(k.powers[i]));
                }
            }
            if let Some(l) = &k.exp {
                term = term.mul(&Expression::exp_of(self.compose_form(l)));
            }
            if let Some((kind, m)) = &k.trig {
                let arg = self.compose_form(m);
                let trig = match kind {
                    TrigKind::Sin => Expression::sin_of(arg),
                    TrigKind::Cos => Expression::cos_of(arg),
                };
                term = term.mul(&trig);
            }
            out = out.add(&term);
        }
        Ok(out)
    }
}

/// All partial derivatives of an expression at a point, up to a fixed order.
#[derive(Clone, Debug)]
pub struct JetTable {
    chart: Chart,
    point: Point,
    order: u8,
    entries: BTreeMap<MultiIndex, Scalar>,
}

impl JetTable {
    /// Assemble a table from raw entries (used by numeric transforms and
    /// tests); entries must cover every index up to `order`.
    pub fn from_entries(
        chart: Chart,
        point: Point,
        order: u8,
        entries: BTreeMap<MultiIndex, Scalar>,
    ) -> Self {
        for idx in MultiIndex::all_up_to(chart.dim(), order) {
            assert!(entries.contains_key(&idx), "missing jet entry {idx:?}");
        }
        JetTable {
            chart,
            point,
            order,
            entries,
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn get(&self, idx: &MultiIndex) -> Option<&Scalar> {
        self.entries.get(idx)
    }

    pub fn value(&self) -> &Scalar {
        &self.entries[&MultiIndex::zero()]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, &Scalar)> {
        self.entries.iter()
    }

    pub fn is_exact(&self) -> bool {
        self.entries.values().all(Scalar::is_exact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expression;

    fn parse(chart: Chart, s: &str) -> Expression {
        parse_expression(chart, s).unwrap()
    }

    #[test]
    fn polynomial_derivative() {
        let e = parse(Chart::Txyz, "t*y + x*z");
        let dt = e.differentiate("t").unwrap();
        assert_eq!(dt, parse(Chart::Txyz, "y"));
    }

    #[test]
    fn trig_chain_rule() {
        let e = parse(Chart::EtaXiQY, "sin(2*xi + q - y)");
        let d = e.differentiate("xi").unwrap();
        assert_eq!(d, parse(Chart::EtaXiQY, "2*cos(2*xi + q - y)"));
    }

    #[test]
    fn exp_fixed_point() {
        let e = parse(Chart::EtaXiQY, "exp(eta)*cos(xi)");
        let d = e.differentiate("eta").unwrap();
        assert_eq!(d, e);
    }

    #[test]
    fn unknown_variable_is_an_error() {
        let e = parse(Chart::Txyz, "t");
        assert!(matches!(
            e.differentiate("q"),
            Err(ExprError::UnknownVariable(..))
        ));
    }

    #[test]
    fn product_rule_with_trig() {
        let a = parse(Chart::Txyz, "sin(t)");
        let b = parse(Chart::Txyz, "cos(t)");
        let prod = a.mul(&b); // = sin(2t)/2
        let d = prod.differentiate("t").unwrap(); // = cos(2t)
        assert_eq!(d, parse(Chart::Txyz, "cos(2*t)"));
    }

    #[test]
    fn trig_squares_sum_to_one() {
        let s = parse(Chart::Txyz, "sin(t + 2*x)");
        let c = parse(Chart::Txyz, "cos(t + 2*x)");
        let sum = s.mul(&s).add(&c.mul(&c));
        assert_eq!(sum, Expression::one(Chart::Txyz));
    }

    #[test]
    fn jet_of_quartic_at_origin() {
        let e = parse(Chart::EtaXiQY, "(xi + q - y)^4");
        let jt = e.jet(&Point::origin(Chart::EtaXiQY), 4).unwrap();
        assert!(jt.value().is_zero());
        for (idx, v) in jt.entries() {
            if idx.order() <= 3 {
                assert!(v.is_zero(), "order-{} entry {idx:?}", idx.order());
            }
        }
        // d^4/dq^4 = 24, d^4/dxi^2 dq^2 = 24
        assert_eq!(jt.get(&MultiIndex([0, 0, 4, 0])).unwrap(), &Scalar::from_int(24));
        assert_eq!(jt.get(&MultiIndex([0, 2, 2, 0])).unwrap(), &Scalar::from_int(24));
    }

    #[test]
    fn jet_of_bilinear() {
        let e = parse(Chart::Txyz, "t*y + x*z");
        let pt = Point::from_ints(Chart::Txyz, &[1, 2, 3, 4]);
        let jt = e.jet(&pt, 3).unwrap();
        assert_eq!(jt.value(), &Scalar::from_int(11));
        assert_eq!(jt.get(&MultiIndex([1, 0, 1, 0])).unwrap(), &Scalar::one());
        assert_eq!(jt.get(&MultiIndex([0, 1, 0, 1])).unwrap(), &Scalar::one());
        for (idx, v) in jt.entries() {
            if idx.order() == 3 {
                assert!(v.is_zero());
            }
        }
    }

    #[test]
    fn jet_exp_cos_at_origin() {
        let e = parse(Chart::EtaXiQY, "exp(eta)*cos(xi)");
        let jt = e.jet(&Point::origin(Chart::EtaXiQY), 2).unwrap();
        assert_eq!(jt.value(), &Scalar::one());
        assert_eq!(jt.get(&MultiIndex([1, 0, 0, 0])).unwrap(), &Scalar::one());
        assert_eq!(jt.get(&MultiIndex([0, 2, 0, 0])).unwrap(), &Scalar::from_int(-1));
        assert!(jt.get(&MultiIndex([1, 1, 0, 0])).unwrap().is_zero());
    }

    #[test]
    fn exact_polynomial_evaluation_stays_exact() {
        let e = parse(Chart::Txyz, "t^3*y/3 + 7/5*x*z");
        let pt = Point::new(
            Chart::Txyz,
            vec![
                Scalar::rational(1, 2),
                Scalar::rational(2, 3),
                Scalar::rational(-1, 7),
                Scalar::from_int(3),
            ],
        );
        let v = e.evaluate(&pt).unwrap();
        assert!(v.is_exact());
    }

    #[test]
    fn chart_map_round_trip() {
        // eta = p + t, xi = p - t
        let map = ChartMap::new(
            Chart::EtaXiQY,
            Chart::Tpqy,
            vec![
                LinearForm::new(
                    Chart::Tpqy,
                    vec![Scalar::one(), Scalar::one(), Scalar::zero(), Scalar::zero()],
                    Scalar::zero(),
                ),
                LinearForm::new(
                    Chart::Tpqy,
                    vec![-Scalar::one(), Scalar::one(), Scalar::zero(), Scalar::zero()],
                    Scalar::zero(),
                ),
                LinearForm::var(Chart::Tpqy, 2),
                LinearForm::var(Chart::Tpqy, 3),
            ],
        )
        .unwrap();
        let e = parse(Chart::EtaXiQY, "(xi + q - y)^4 + exp(eta)*sin(xi)");
        let mapped = map.apply(&e).unwrap();
        let back = map.inverse().apply(&mapped).unwrap();
        assert_eq!(back, e);
        // quartic maps to (p - t + q - y)^4
        let quartic = parse(Chart::EtaXiQY, "(xi + q - y)^4");
        assert_eq!(
            map.apply(&quartic).unwrap(),
            parse(Chart::Tpqy, "(p - t + q - y)^4")
        );
    }

    #[test]
    fn chain_rule_through_map() {
        let map = ChartMap::new(
            Chart::EtaXiQY,
            Chart::Tpqy,
            vec![
                LinearForm::new(
                    Chart::Tpqy,
                    vec![Scalar::one(), Scalar::one(), Scalar::zero(), Scalar::zero()],
                    Scalar::zero(),
                ),
                LinearForm::new(
                    Chart::Tpqy,
                    vec![-Scalar::one(), Scalar::one(), Scalar::zero(), Scalar::zero()],
                    Scalar::zero(),
                ),
                LinearForm::var(Chart::Tpqy, 2),
                LinearForm::var(Chart::Tpqy, 3),
            ],
        )
        .unwrap();
        let e = parse(Chart::EtaXiQY, "eta^2*xi + sin(xi + q)");
        // d/dp of mapped e == mapped (de/deta + de/dxi)
        let lhs = map.apply(&e).unwrap().differentiate("p").unwrap();
        let rhs = map
            .apply(&e.differentiate("eta").unwrap().add(&e.differentiate("xi").unwrap()))
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn identity_map_is_structural_identity() {
        let map = ChartMap::identity(Chart::Txyz);
        let e = parse(Chart::Txyz, "t*y + exp(2*t)*cos(x - z) + 3/2");
        assert_eq!(map.apply(&e).unwrap(), e);
    }

    #[test]
    fn singular_map_rejected() {
        let err = ChartMap::new(
            Chart::EtaXiQY,
            Chart::Tpqy,
            vec![
                LinearForm::var(Chart::Tpqy, 0),
                LinearForm::var(Chart::Tpqy, 0),
                LinearForm::var(Chart::Tpqy, 2),
                LinearForm::var(Chart::Tpqy, 3),
            ],
        );
        assert_eq!(err.unwrap_err(), ExprError::SingularMap);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        for text in ["t^2*y + x", "exp(2*t + x)", "sin(3*t - y)", "t*exp(t)*cos(2*t)"] {
            let e = parse(Chart::Txyz, text);
            let f = e.antiderivative_pos(0);
            assert_eq!(f.differentiate_pos(0), e, "antiderivative of {text}");
        }
    }
}
