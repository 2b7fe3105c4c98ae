//! Closed-form likelihood of the observable `(d, y_tau, y)` cells and its gradient.

use std::ops::{Add, Mul, Neg, Sub};

use rayon::prelude::*;

use crate::copula::{check_theta, clayton_kernel, theta_transform, INDEPENDENCE_EPS};
use crate::error::{Error, Result};
use crate::logistic::Margin;
use crate::model::{indices_unchecked, linear_indices, ImpressionRecord, LinearIndices, ParameterSet};

/// Floor applied to a cell probability before taking its log.
pub const CELL_FLOOR: f64 = 1e-300;

/// Records per reduction chunk. Partial sums are combined in chunk order, so
/// results do not depend on the worker count.
pub const CHUNK: usize = 1024;

/// The six observable cells of `(d, y_tau, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbabilities {
    /// d=0, y_tau=0
    pub p00: f64,
    /// d=0, y_tau=1, y=0
    pub p010: f64,
    /// d=0, y_tau=1, y=1
    pub p011: f64,
    /// d=1, y_tau=0
    pub p10: f64,
    /// d=1, y_tau=1, y=0
    pub p110: f64,
    /// d=1, y_tau=1, y=1
    pub p111: f64,
}

impl CellProbabilities {
    pub fn as_array(&self) -> [f64; 6] {
        [self.p00, self.p010, self.p011, self.p10, self.p110, self.p111]
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Probability of the observed outcome triple.
    pub fn get(&self, d: bool, y_tau: bool, y: bool) -> f64 {
        match Cell::of(d, y_tau, y) {
            Cell::D0N => self.p00,
            Cell::D0YN => self.p010,
            Cell::D0YY => self.p011,
            Cell::D1N => self.p10,
            Cell::D1YN => self.p110,
            Cell::D1YY => self.p111,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    D0N,
    D0YN,
    D0YY,
    D1N,
    D1YN,
    D1YY,
}

impl Cell {
    fn of(d: bool, y_tau: bool, y: bool) -> Cell {
        match (d, y_tau, y) {
            (false, false, _) => Cell::D0N,
            (false, true, false) => Cell::D0YN,
            (false, true, true) => Cell::D0YY,
            (true, false, _) => Cell::D1N,
            (true, true, false) => Cell::D1YN,
            (true, true, true) => Cell::D1YY,
        }
    }
}

/// Value with derivatives with respect to `(a, b, c, θ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dual4 {
    pub v: f64,
    pub g: [f64; 4],
}

impl Dual4 {
    fn constant(v: f64) -> Self {
        Dual4 { v, g: [0.0; 4] }
    }

    fn lower(m: &Margin, slot: usize) -> Self {
        let mut g = [0.0; 4];
        g[slot] = m.du_dx();
        Dual4 { v: m.u, g }
    }
}

impl Add for Dual4 {
    type Output = Dual4;
    fn add(self, o: Dual4) -> Dual4 {
        let mut g = self.g;
        for (a, b) in g.iter_mut().zip(o.g) {
            *a += b;
        }
        Dual4 { v: self.v + o.v, g }
    }
}

impl Sub for Dual4 {
    type Output = Dual4;
    fn sub(self, o: Dual4) -> Dual4 {
        self + (-o)
    }
}

impl Neg for Dual4 {
    type Output = Dual4;
    fn neg(self) -> Dual4 {
        Dual4 {
            v: -self.v,
            g: self.g.map(|x| -x),
        }
    }
}

impl Mul<f64> for Dual4 {
    type Output = Dual4;
    fn mul(self, s: f64) -> Dual4 {
        Dual4 {
            v: self.v * s,
            g: self.g.map(|x| x * s),
        }
    }
}

/// Margins and copula terms for one treatment arm.
struct ArmTerms {
    a: Margin,
    b: Margin,
    c: Margin,
    theta: f64,
    independent: bool,
}

impl ArmTerms {
    fn new(a: f64, b: f64, c: f64, theta: f64) -> Self {
        ArmTerms {
            a: Margin::from_index(a),
            b: Margin::from_index(b),
            c: Margin::from_index(c),
            theta,
            independent: theta.abs() < INDEPENDENCE_EPS,
        }
    }

    fn copula(&self, slots: &[usize]) -> Dual4 {
        let margins: Vec<Margin> = slots
            .iter()
            .map(|&s| match s {
                0 => self.a,
                1 => self.b,
                _ => self.c,
            })
            .collect();
        let k = clayton_kernel(&margins, self.theta);
        let mut out = Dual4::constant(k.value);
        for (i, &s) in slots.iter().enumerate() {
            out.g[s] = k.d_index[i];
        }
        out.g[3] = k.d_theta;
        out
    }

    fn cell(&self, cell: Cell) -> Dual4 {
        let ua = Dual4::lower(&self.a, 0);
        let ub = Dual4::lower(&self.b, 1);
        let uc = Dual4::lower(&self.c, 2);
        let one = Dual4::constant(1.0);
        let mut out = match cell {
            Cell::D0N => self.copula(&[0, 1]),
            Cell::D0YN => self.copula(&[0, 2]) - self.copula(&[0, 1, 2]),
            Cell::D0YY => ua - self.copula(&[0, 1]) - self.copula(&[0, 2]) + self.copula(&[0, 1, 2]),
            Cell::D1N => ub - self.copula(&[0, 1]),
            Cell::D1YN => {
                uc - self.copula(&[0, 2]) - self.copula(&[1, 2]) + self.copula(&[0, 1, 2])
            }
            Cell::D1YY => {
                one - ua - ub - uc
                    + self.copula(&[0, 1])
                    + self.copula(&[0, 2])
                    + self.copula(&[1, 2])
                    - self.copula(&[0, 1, 2])
            }
        };
        if self.independent {
            // Product form keeps the factorisation exact in floating point.
            let (a, b, c) = (&self.a, &self.b, &self.c);
            out.v = match cell {
                Cell::D0N => a.u * b.u,
                Cell::D0YN => a.u * b.complement * c.u,
                Cell::D0YY => a.u * b.complement * c.complement,
                Cell::D1N => a.complement * b.u,
                Cell::D1YN => a.complement * b.complement * c.u,
                Cell::D1YY => a.complement * (b.complement * c.complement),
            };
        } else {
            out.v = self.difference_value(cell);
        }
        out
    }

    /// Cell value from differences of `h(s) = (1 + s)^(-1/theta)`, where the
    /// copula is `h(sum of excess_i)`. Each first difference is taken in
    /// ratio form, so small cells do not lose digits to cancellation.
    fn difference_value(&self, cell: Cell) -> f64 {
        let t = self.theta;
        let (x, y, z) = (excess(&self.a, t), excess(&self.b, t), excess(&self.c, t));
        let h = |s: f64| if 1.0 + s <= 0.0 { 0.0 } else { (-s.ln_1p() / t).exp() };
        // h(s) - h(s + e)
        let q = |s: f64, e: f64| {
            if 1.0 + s <= 0.0 {
                0.0
            } else if 1.0 + s + e <= 0.0 {
                h(s)
            } else {
                -h(s) * (-(e / (1.0 + s)).ln_1p() / t).exp_m1()
            }
        };
        match cell {
            Cell::D0N => h(x + y),
            Cell::D0YN => q(x + z, y),
            Cell::D0YY => q(x, y) - q(x + z, y),
            Cell::D1N => q(y, x),
            Cell::D1YN => q(z, x) - q(z + y, x),
            Cell::D1YY => (q(0.0, x) - q(y, x)) - (q(z, x) - q(z + y, x)),
        }
    }
}

/// `u^(-theta) - 1`, with `ln u` taken from the complement when `u` is near one.
fn excess(m: &Margin, theta: f64) -> f64 {
    let ln_u = if m.u > 0.5 { (-m.complement).ln_1p() } else { m.u.ln() };
    (-theta * ln_u).exp_m1()
}

/// Joint probability that both outcome events occur at the given arm,
/// `1 - u_b - u_c + C2(u_b, u_c)`.
pub(crate) fn both_outcomes(b: f64, c: f64, theta: f64) -> f64 {
    let mb = Margin::from_index(b);
    let mc = Margin::from_index(c);
    if theta.abs() < INDEPENDENCE_EPS {
        return mb.complement * mc.complement;
    }
    let c2 = clayton_kernel(&[mb, mc], theta).value;
    1.0 - mb.u - mc.u + c2
}

pub(crate) fn cells_from_indices(idx: &LinearIndices, theta: f64) -> CellProbabilities {
    let arm0 = ArmTerms::new(idx.a, idx.b0, idx.c0, theta);
    let arm1 = ArmTerms::new(idx.a, idx.b1, idx.c1, theta);
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    CellProbabilities {
        p00: clamp(arm0.cell(Cell::D0N).v),
        p010: clamp(arm0.cell(Cell::D0YN).v),
        p011: clamp(arm0.cell(Cell::D0YY).v),
        p10: clamp(arm1.cell(Cell::D1N).v),
        p110: clamp(arm1.cell(Cell::D1YN).v),
        p111: clamp(arm1.cell(Cell::D1YY).v),
    }
}

/// The six cell probabilities for one record.
pub fn cell_probabilities(record: &ImpressionRecord, params: &ParameterSet) -> Result<CellProbabilities> {
    let theta = params.theta();
    check_theta(theta)?;
    let idx = linear_indices(record, params)?;
    Ok(cells_from_indices(&idx, theta))
}

fn check_dims(record: &ImpressionRecord, params: &ParameterSet) -> Result<()> {
    if record.x1.len() != params.gamma.len()
        || record.x2.len() != params.beta.len()
        || record.z.len() != params.alpha1.len()
    {
        linear_indices(record, params)?;
    }
    Ok(())
}

fn prepare(dataset: &[ImpressionRecord], params: &ParameterSet) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset has no records".into()));
    }
    let theta = params.theta();
    check_theta(theta)?;
    Ok(theta)
}

fn record_log_lik(record: &ImpressionRecord, params: &ParameterSet, theta: f64) -> f64 {
    let idx = indices_unchecked(record, params);
    let arm = ArmTerms::new(idx.a, idx.b(record.d), idx.c(record.d), theta);
    let p = arm.cell(Cell::of(record.d, record.y_tau, record.y)).v;
    p.max(CELL_FLOOR).ln()
}

/// Total log-likelihood, summed in fixed chunk order.
pub fn log_likelihood(dataset: &[ImpressionRecord], params: &ParameterSet) -> Result<f64> {
    let theta = prepare(dataset, params)?;
    let partials: Vec<Result<f64>> = dataset
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = 0.0;
            for r in chunk {
                check_dims(r, params)?;
                s += record_log_lik(r, params, theta);
            }
            Ok(s)
        })
        .collect();
    partials.into_iter().sum()
}

/// Adds one record's contribution to `(loglik, grad)`.
fn accumulate(record: &ImpressionRecord, params: &ParameterSet, theta: f64, dtheta: f64, acc: &mut (f64, Vec<f64>)) {
    let idx = indices_unchecked(record, params);
    let arm = ArmTerms::new(idx.a, idx.b(record.d), idx.c(record.d), theta);
    let cell = arm.cell(Cell::of(record.d, record.y_tau, record.y));
    if cell.v < CELL_FLOOR {
        acc.0 += CELL_FLOOR.ln();
        return;
    }
    acc.0 += cell.v.ln();
    let inv = 1.0 / cell.v;
    let [ga, gb, gc, gt] = cell.g.map(|x| x * inv);

    let k1 = params.gamma.len();
    let kz = params.alpha1.len();
    let k2 = params.beta.len();
    let grad = &mut acc.1;
    for (g, x) in grad[..k1].iter_mut().zip(&record.x1) {
        *g += ga * x;
    }
    if record.d {
        for (g, z) in grad[k1..k1 + kz].iter_mut().zip(&record.z) {
            *g += gb * z;
        }
    }
    let gbeta = gb + gc * params.w1;
    for (g, x) in grad[k1 + kz..k1 + kz + k2].iter_mut().zip(&record.x2) {
        *g += gbeta * x;
    }
    let tail = k1 + kz + k2;
    if record.d {
        grad[tail] += gc;
    }
    grad[tail + 1] += gc * idx.utility;
    grad[tail + 2] += gc;
    grad[tail + 3] += gt * dtheta;
}

/// Log-likelihood together with its gradient in flattened-parameter order.
pub fn log_likelihood_with_gradient(
    dataset: &[ImpressionRecord],
    params: &ParameterSet,
) -> Result<(f64, Vec<f64>)> {
    let theta = prepare(dataset, params)?;
    let dtheta = theta_transform(params.theta_tilde).1;
    let dim = params.gamma.len() + params.alpha1.len() + params.beta.len() + 4;
    let partials: Vec<Result<(f64, Vec<f64>)>> = dataset
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = (0.0, vec![0.0; dim]);
            for r in chunk {
                check_dims(r, params)?;
                accumulate(r, params, theta, dtheta, &mut acc);
            }
            Ok(acc)
        })
        .collect();
    let mut total = (0.0, vec![0.0; dim]);
    for p in partials {
        let (ll, g) = p?;
        total.0 += ll;
        for (t, x) in total.1.iter_mut().zip(g) {
            *t += x;
        }
    }
    Ok(total)
}

pub fn log_likelihood_gradient(dataset: &[ImpressionRecord], params: &ParameterSet) -> Result<Vec<f64>> {
    Ok(log_likelihood_with_gradient(dataset, params)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{clayton_cdf2, clayton_cdf3};
    use crate::logistic::logistic_cdf;
    use crate::model::ParamLayout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(d: bool, yt: bool, y: bool) -> ImpressionRecord {
        ImpressionRecord::new(d, yt, y, vec![1.0], vec![1.0], vec![1.0]).unwrap()
    }

    /// Parameters that produce the given indices for a record with unit covariates.
    fn params_for(a: f64, b: f64, c: f64, theta: f64) -> ParameterSet {
        let mut p = ParameterSet::zeros(&ParamLayout::anonymous(1, 1, 1));
        p.gamma = vec![a];
        p.beta = vec![b];
        p.w1 = 0.0;
        p.w2 = c;
        p.set_theta(theta);
        p
    }

    #[test]
    fn independence_with_zero_indices() {
        let p = params_for(0.0, 0.0, 0.0, 0.0);
        let cells = cell_probabilities(&record(true, true, true), &p).unwrap();
        let expect = [0.25, 0.125, 0.125, 0.25, 0.125, 0.125];
        for (c, e) in cells.as_array().iter().zip(expect) {
            assert!((c - e).abs() < 1e-15);
        }
        let ll = log_likelihood(&[record(true, true, true)], &p).unwrap();
        assert!((ll - 0.125f64.ln()).abs() < 1e-12);
        assert!((ll + 2.0794).abs() < 1e-4);
    }

    /// Direct translation of the cell formulas through the public copula API.
    fn naive_cells(a: f64, b: [f64; 2], c: [f64; 2], theta: f64) -> [f64; 6] {
        let ua = logistic_cdf(-a);
        let ub = b.map(|x| logistic_cdf(-x));
        let uc = c.map(|x| logistic_cdf(-x));
        let c2 = |x, y| clayton_cdf2(x, y, theta).unwrap();
        let c3 = |x, y, z| clayton_cdf3(x, y, z, theta).unwrap();
        [
            c2(ua, ub[0]),
            c2(ua, uc[0]) - c3(ua, ub[0], uc[0]),
            ua - c2(ua, ub[0]) - c2(ua, uc[0]) + c3(ua, ub[0], uc[0]),
            ub[1] - c2(ua, ub[1]),
            uc[1] - c2(ua, uc[1]) - c2(ub[1], uc[1]) + c3(ua, ub[1], uc[1]),
            1.0 - ua - ub[1] - uc[1] + c2(ua, ub[1]) + c2(ua, uc[1]) + c2(ub[1], uc[1])
                - c3(ua, ub[1], uc[1]),
        ]
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, layout: &ParamLayout) -> Vec<ImpressionRecord> {
        (0..n)
            .map(|_| {
                let mut x1 = vec![1.0];
                x1.extend((1..layout.k1()).map(|_| rng.random_range(-1.0..1.0)));
                let mut x2 = vec![1.0];
                x2.extend((1..layout.k2()).map(|_| rng.random_range(-1.0..1.0)));
                let mut z = vec![1.0];
                z.extend((1..layout.kz()).map(|_| f64::from(rng.random_range(0..2u8))));
                let d = rng.random_bool(0.5);
                let yt = rng.random_bool(0.5);
                let y = yt && rng.random_bool(0.5);
                ImpressionRecord::new(d, yt, y, x1, x2, z).unwrap()
            })
            .collect()
    }

    fn random_params(rng: &mut ChaCha8Rng, layout: &ParamLayout) -> ParameterSet {
        let v: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-0.8..0.8)).collect();
        let mut p = ParameterSet::from_slice(layout, &v).unwrap();
        p.w1 = rng.random_range(0.2..1.2);
        p.set_theta(rng.random_range(-0.45..3.0));
        p
    }

    #[test]
    fn matches_naive_reference_on_random_dataset() {
        let layout = ParamLayout::anonymous(3, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = random_dataset(&mut rng, 1000, &layout);
        let p = random_params(&mut rng, &layout);
        let theta = p.theta();
        let mut naive = 0.0;
        for r in &data {
            let idx = linear_indices(r, &p).unwrap();
            let cells = naive_cells(idx.a, [idx.b0, idx.b1], [idx.c0, idx.c1], theta);
            let k = match (r.d, r.y_tau, r.y) {
                (false, false, _) => 0,
                (false, true, false) => 1,
                (false, true, true) => 2,
                (true, false, _) => 3,
                (true, true, false) => 4,
                (true, true, true) => 5,
            };
            naive += cells[k].max(CELL_FLOOR).ln();
        }
        let fast = log_likelihood(&data, &p).unwrap();
        assert!((fast - naive).abs() < 1e-9, "{fast} vs {naive}");
        let with_grad = log_likelihood_with_gradient(&data, &p).unwrap().0;
        assert!((with_grad - naive).abs() < 1e-9);
    }

    #[test]
    fn small_cells_keep_relative_precision() {
        // Upper tail in the first margin, lower in the second, strong dependence:
        // the cell is tiny. Oracle: integrate dC/du1 over (u_a, 1) by Simpson.
        let (theta, a, b) = (3.0, -6.0, 4.0);
        let arm = ArmTerms::new(a, b, 0.0, theta);
        let (ua, ub) = (arm.a.u, arm.b.u);
        let dc = |u: f64| u.powf(-theta - 1.0) * (u.powf(-theta) + ub.powf(-theta) - 1.0).powf(-1.0 / theta - 1.0);
        let n = 2000;
        let w = (1.0 - ua) / n as f64;
        let oracle: f64 = (0..=n)
            .map(|i| {
                let k = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                k * dc(ua + i as f64 * w)
            })
            .sum::<f64>()
            * w
            / 3.0;
        let p = arm.difference_value(Cell::D1N);
        assert!(p < 1e-6, "{p}");
        assert!((p / oracle - 1.0).abs() < 1e-12, "{p} {oracle}");
        // Refined differences agree with the coarse value to many digits
        // when nothing cancels.
        let mid = ArmTerms::new(0.3, -0.2, 0.4, 1.5);
        for cell in [Cell::D0N, Cell::D0YN, Cell::D0YY, Cell::D1N, Cell::D1YN, Cell::D1YY] {
            let v = mid.difference_value(cell);
            let ie = ie_value(&mid, cell);
            assert!((v - ie).abs() < 1e-14 * v.max(1e-3), "{v} {ie}");
        }
    }

    fn ie_value(arm: &ArmTerms, cell: Cell) -> f64 {
        let c = |s: &[usize]| arm.copula(s).v;
        let (ua, ub, uc) = (arm.a.u, arm.b.u, arm.c.u);
        match cell {
            Cell::D0N => c(&[0, 1]),
            Cell::D0YN => c(&[0, 2]) - c(&[0, 1, 2]),
            Cell::D0YY => ua - c(&[0, 1]) - c(&[0, 2]) + c(&[0, 1, 2]),
            Cell::D1N => ub - c(&[0, 1]),
            Cell::D1YN => uc - c(&[0, 2]) - c(&[1, 2]) + c(&[0, 1, 2]),
            Cell::D1YY => 1.0 - ua - ub - uc + c(&[0, 1]) + c(&[0, 2]) + c(&[1, 2]) - c(&[0, 1, 2]),
        }
    }

    #[test]
    fn cells_match_naive_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = rng.random_range(-3.0..3.0);
            let b = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let c = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let theta = rng.random_range(-0.45..5.0);
            let idx = LinearIndices {
                a,
                b0: b[0],
                b1: b[1],
                c0: c[0],
                c1: c[1],
                utility: 0.0,
            };
            let fast = cells_from_indices(&idx, theta).as_array();
            let slow = naive_cells(a, b, c, theta);
            for (f, s) in fast.iter().zip(slow) {
                assert!((f - s.clamp(0.0, 1.0)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn duplicated_dataset_scales() {
        let layout = ParamLayout::anonymous(2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_dataset(&mut rng, 37, &layout);
        let p = random_params(&mut rng, &layout);
        let (ll1, g1) = log_likelihood_with_gradient(&data, &p).unwrap();
        let k = 3;
        let big: Vec<_> = (0..k).flat_map(|_| data.clone()).collect();
        let (llk, gk) = log_likelihood_with_gradient(&big, &p).unwrap();
        assert!((llk - k as f64 * ll1).abs() < 1e-9 * llk.abs());
        for (a, b) in gk.iter().zip(&g1) {
            assert!((a - k as f64 * b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn zero_covariate_has_zero_gradient() {
        let layout = ParamLayout::anonymous(3, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = random_dataset(&mut rng, 200, &layout);
        for r in &mut data {
            r.x1[2] = 0.0;
            r.x2[1] = 0.0;
        }
        let p = random_params(&mut rng, &layout);
        let g = log_likelihood_gradient(&data, &p).unwrap();
        assert_eq!(g[2], 0.0);
        assert_eq!(g[layout.beta_offset() + 1], 0.0);
    }

    fn fd_check(data: &[ImpressionRecord], p: &ParameterSet, layout: &ParamLayout) -> f64 {
        let g = log_likelihood_gradient(data, p).unwrap();
        let x = p.to_vec();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = log_likelihood(data, &ParameterSet::from_slice(layout, &xp).unwrap()).unwrap();
            let fm = log_likelihood(data, &ParameterSet::from_slice(layout, &xm).unwrap()).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(1.0));
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let layout = ParamLayout::anonymous(3, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let data = random_dataset(&mut rng, 60, &layout);
            let p = random_params(&mut rng, &layout);
            let err = fd_check(&data, &p, &layout);
            assert!(err < 1e-6, "relative error {err}");
        }
    }

    #[test]
    fn marginal_consistency_and_independence_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let idx = LinearIndices {
                a: rng.random_range(-4.0..4.0),
                b0: rng.random_range(-4.0..4.0),
                b1: rng.random_range(-4.0..4.0),
                c0: rng.random_range(-4.0..4.0),
                c1: rng.random_range(-4.0..4.0),
                utility: 0.0,
            };
            let th = rng.random_range(-0.45..5.0);
            let cells = cells_from_indices(&idx, th);
            let ua = logistic_cdf(-idx.a);
            assert!((cells.p00 + cells.p010 + cells.p011 - ua).abs() < 1e-12);
            assert!((cells.p10 + cells.p110 + cells.p111 - (1.0 - ua)).abs() < 1e-12);

            let ind = cells_from_indices(&idx, 5e-9);
            let pa = 1.0 - ua;
            let pb = [logistic_cdf(idx.b0), logistic_cdf(idx.b1)];
            let pc = [logistic_cdf(idx.c0), logistic_cdf(idx.c1)];
            let expect = [
                ua * (1.0 - pb[0]),
                ua * pb[0] * (1.0 - pc[0]),
                ua * pb[0] * pc[0],
                pa * (1.0 - pb[1]),
                pa * pb[1] * (1.0 - pc[1]),
                pa * pb[1] * pc[1],
            ];
            for (c, e) in ind.as_array().iter().zip(expect) {
                assert!((c - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn positive_dependence_raises_upper_orthant() {
        let idx = LinearIndices {
            a: 0.0,
            b0: 0.0,
            b1: 0.0,
            c0: 0.0,
            c1: 0.0,
            utility: 0.0,
        };
        assert!(cells_from_indices(&idx, 2.0).p111 >= cells_from_indices(&idx, 0.0).p111);
    }

    #[test]
    fn domain_and_empty_errors() {
        let layout = ParamLayout::anonymous(1, 1, 1);
        let mut p = ParameterSet::zeros(&layout);
        p.theta_tilde = -0.8; // θ = -0.96
        assert!(matches!(log_likelihood(&[record(true, true, true)], &p), Err(Error::Domain(_))));
        p.theta_tilde = 0.0;
        assert!(matches!(log_likelihood(&[], &p), Err(Error::Empty(_))));
        let bad = ImpressionRecord::new(true, true, true, vec![1.0, 2.0], vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(log_likelihood(&[bad], &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn clamped_cells_are_floored() {
        // Strong negative dependence with extreme indices pushes cells to zero.
        let p = params_for(8.0, 8.0, 8.0, -0.49);
        let r = record(false, false, false);
        let cells = cell_probabilities(&r, &p).unwrap();
        assert!(cells.p00 >= 0.0);
        let (ll, g) = log_likelihood_with_gradient(&[r], &p).unwrap();
        assert!(ll.is_finite());
        assert!(g.iter().all(|x| x.is_finite()));
    }
}
