//! Parzen density estimation over mixed parameter spaces.
//!
//! Each member contributes one product kernel; mixture weights are uniform.
//!
//! * continuous: Gaussian truncated to `[lo, hi]` and renormalized,
//! * integer: Gaussian restricted to the lattice `lo..=hi` and renormalized,
//! * categorical: `(1 - w) * [x == center] + w / K`, so every label keeps mass `w / K`.
//!
//! Bandwidths follow Scott's rule per numeric dimension, floored at
//! `width / min(n + 1, 100)` for `n` members so small models stay broad. Densities are evaluated in log space; the exponentiated values
//! are products of up to `m` per-dimension factors and can leave `f64` range
//! long before the log does.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::space::{Config, DomainKind, ParamSpace, Value};

pub const DEFAULT_FLOOR_WEIGHT: f64 = 0.1;

/// The bandwidth floor never shrinks below this fraction of the domain width.
const MIN_FLOOR_FRACTION: f64 = 1e-2;

/// Lattice kernel weights beyond this many bandwidths are treated as zero.
const LATTICE_CUTOFF_SIGMAS: f64 = 8.0;

const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone)]
enum DimKernel {
    Continuous {
        lo: f64,
        hi: f64,
        bandwidth: f64,
        /// ln of the truncated mass, one per component.
        log_mass: Vec<f64>,
    },
    Integer {
        lo: i64,
        hi: i64,
        bandwidth: f64,
        /// `exp(-d^2 / 2h^2)` for lattice offsets `d = 0, 1, ...`.
        weights: Vec<f64>,
        /// ln of the in-range lattice sum, one per component.
        log_mass: Vec<f64>,
    },
    Categorical {
        n_choices: usize,
        floor_weight: f64,
    },
}

/// A fitted Parzen mixture. Immutable after [`KdeModel::fit`].
#[derive(Debug, Clone)]
pub struct KdeModel {
    space: ParamSpace,
    centers: Vec<Config>,
    kernels: Vec<DimKernel>,
}

impl KdeModel {
    pub fn fit<'a, I>(members: I, space: &ParamSpace, floor_weight: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Config>,
    {
        if !(floor_weight > 0.0 && floor_weight <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "floor weight must lie in (0, 1], got {floor_weight}"
            )));
        }
        let centers: Vec<Config> = members.into_iter().cloned().collect();
        if centers.is_empty() {
            return Err(Error::EmptyMembers);
        }
        for c in &centers {
            space.check(c)?;
        }

        let n = centers.len();
        let n_cont = space
            .domains()
            .iter()
            .filter(|d| matches!(d.kind, DomainKind::Continuous { .. }))
            .count();
        let scott = (n as f64).powf(-1.0 / (n_cont as f64 + 4.0));

        let kernels = space
            .domains()
            .iter()
            .enumerate()
            .map(|(dim, domain)| match &domain.kind {
                DomainKind::Continuous { lo, hi } => {
                    let (lo, hi) = (*lo, *hi);
                    let column: Vec<f64> = centers.iter().map(|c| c[dim].as_f64()).collect();
                    let bandwidth =
                        (sample_std(&column) * scott).max(floor_fraction(n) * (hi - lo));
                    let log_mass = column
                        .iter()
                        .map(|&c| truncated_mass(lo, hi, c, bandwidth).ln())
                        .collect();
                    DimKernel::Continuous {
                        lo,
                        hi,
                        bandwidth,
                        log_mass,
                    }
                }
                DomainKind::Integer { lo, hi } => {
                    let (lo, hi) = (*lo, *hi);
                    let column: Vec<f64> = centers.iter().map(|c| c[dim].as_f64()).collect();
                    let width = (hi - lo) as f64;
                    let bandwidth = (sample_std(&column) * scott).max(floor_fraction(n) * width);
                    let reach = (LATTICE_CUTOFF_SIGMAS * bandwidth).ceil().min(width) as usize + 1;
                    let weights: Vec<f64> = (0..=reach)
                        .map(|d| {
                            let z = d as f64 / bandwidth;
                            (-0.5 * z * z).exp()
                        })
                        .collect();
                    // prefix[k] = sum of weights[0..=k]
                    let prefix: Vec<f64> = weights
                        .iter()
                        .scan(0.0, |acc, w| {
                            *acc += w;
                            Some(*acc)
                        })
                        .collect();
                    let cumulative = |k: i64| prefix[(k as usize).min(reach)];
                    let log_mass = centers
                        .iter()
                        .map(|c| {
                            let Value::Int(center) = c[dim] else {
                                unreachable!("validated")
                            };
                            (cumulative(center - lo) + cumulative(hi - center) - weights[0]).ln()
                        })
                        .collect();
                    DimKernel::Integer {
                        lo,
                        hi,
                        bandwidth,
                        weights,
                        log_mass,
                    }
                }
                DomainKind::Categorical { choices } => DimKernel::Categorical {
                    n_choices: choices.len(),
                    floor_weight,
                },
            })
            .collect();

        Ok(Self {
            space: space.clone(),
            centers,
            kernels,
        })
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn n_components(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Config] {
        &self.centers
    }

    /// Bandwidth of each numeric dimension; `None` for categorical ones.
    pub fn bandwidths(&self) -> Vec<Option<f64>> {
        self.kernels
            .iter()
            .map(|k| match k {
                DimKernel::Continuous { bandwidth, .. } | DimKernel::Integer { bandwidth, .. } => {
                    Some(*bandwidth)
                }
                DimKernel::Categorical { .. } => None,
            })
            .collect()
    }

    /// Marginal probability table of a categorical dimension: the empirical label
    /// frequencies mixed with the uniform distribution at the floor weight.
    pub fn categorical_table(&self, dim: usize) -> Option<Vec<f64>> {
        let DimKernel::Categorical {
            n_choices,
            floor_weight,
        } = self.kernels.get(dim)?
        else {
            return None;
        };
        let n = self.centers.len() as f64;
        let mut table = vec![floor_weight / *n_choices as f64; *n_choices];
        for c in &self.centers {
            if let Value::Choice(i) = c[dim] {
                table[i] += (1.0 - floor_weight) / n;
            }
        }
        Some(table)
    }

    pub fn log_density(&self, config: &Config) -> Result<f64> {
        self.space.check(config)?;
        Ok(self.log_density_unchecked(config))
    }

    pub fn density(&self, config: &Config) -> Result<f64> {
        self.log_density(config).map(f64::exp)
    }

    pub(crate) fn log_density_unchecked(&self, config: &Config) -> f64 {
        let log_terms: Vec<f64> = (0..self.centers.len())
            .map(|i| self.component_log_density(i, config))
            .collect();
        log_sum_exp(&log_terms) - (self.centers.len() as f64).ln()
    }

    fn component_log_density(&self, component: usize, config: &Config) -> f64 {
        let center = &self.centers[component];
        self.kernels
            .iter()
            .enumerate()
            .map(|(dim, kernel)| match kernel {
                DimKernel::Continuous {
                    bandwidth,
                    log_mass,
                    ..
                } => {
                    let z = (config[dim].as_f64() - center[dim].as_f64()) / bandwidth;
                    -0.5 * z * z - (bandwidth * (2.0 * PI).sqrt()).ln() - log_mass[component]
                }
                DimKernel::Integer {
                    bandwidth,
                    log_mass,
                    ..
                } => {
                    let z = (config[dim].as_f64() - center[dim].as_f64()) / bandwidth;
                    -0.5 * z * z - log_mass[component]
                }
                DimKernel::Categorical {
                    n_choices,
                    floor_weight,
                } => {
                    let uniform = floor_weight / *n_choices as f64;
                    if config[dim] == center[dim] {
                        (1.0 - floor_weight + uniform).ln()
                    } else {
                        uniform.ln()
                    }
                }
            })
            .sum()
    }

    /// Draws a configuration: a component uniformly, then each dimension from its kernel.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        let center = &self.centers[rng.random_range(0..self.centers.len())];
        let values = self
            .kernels
            .iter()
            .enumerate()
            .map(|(dim, kernel)| match kernel {
                DimKernel::Continuous {
                    lo, hi, bandwidth, ..
                } => {
                    let c = center[dim].as_f64();
                    let mut draw = c;
                    for _ in 0..MAX_REJECTIONS {
                        let z: f64 = StandardNormal.sample(rng);
                        let x = c + bandwidth * z;
                        if (*lo..=*hi).contains(&x) {
                            draw = x;
                            break;
                        }
                    }
                    Value::Real(draw)
                }
                DimKernel::Integer {
                    lo, hi, weights, ..
                } => {
                    let Value::Int(c) = center[dim] else {
                        unreachable!("validated")
                    };
                    let reach = weights.len() as i64 - 1;
                    let from = (c - reach).max(*lo);
                    let to = (c + reach).min(*hi);
                    let weight = |j: i64| weights[(j - c).unsigned_abs() as usize];
                    let total: f64 = (from..=to).map(weight).sum();
                    let mut u = rng.random::<f64>() * total;
                    let mut draw = to;
                    for j in from..=to {
                        u -= weight(j);
                        if u < 0.0 {
                            draw = j;
                            break;
                        }
                    }
                    Value::Int(draw)
                }
                DimKernel::Categorical {
                    n_choices,
                    floor_weight,
                } => {
                    if rng.random::<f64>() < *floor_weight {
                        Value::Choice(rng.random_range(0..*n_choices))
                    } else {
                        center[dim]
                    }
                }
            })
            .collect();
        Config::new(values)
    }
}

fn floor_fraction(n: usize) -> f64 {
    (1.0 / (n as f64 + 1.0)).max(MIN_FLOOR_FRACTION)
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Mass of `N(center, h^2)` inside `[lo, hi]`; `center` lies in the interval.
fn truncated_mass(lo: f64, hi: f64, center: f64, h: f64) -> f64 {
    let a = (center - lo) / (h * SQRT_2);
    let b = (hi - center) / (h * SQRT_2);
    0.5 * (libm::erf(a) + libm::erf(b))
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamDomain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space_1d() -> ParamSpace {
        ParamSpace::new(vec![ParamDomain::continuous("x", 0.0, 1.0)]).unwrap()
    }

    fn real(x: f64) -> Config {
        Config::new(vec![Value::Real(x)])
    }

    #[test]
    fn single_member_peaks_at_center() {
        let space = space_1d();
        let kde = KdeModel::fit([&real(0.5)], &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        let center = kde.density(&real(0.5)).unwrap();
        assert!(center > kde.density(&real(0.0)).unwrap());
        assert!(center > kde.density(&real(1.0)).unwrap());
        assert!(kde.density(&real(0.0)).unwrap() > 0.0);
    }

    #[test]
    fn categorical_all_same_label() {
        let space = ParamSpace::new(vec![ParamDomain::categorical("c", ["A", "B"])]).unwrap();
        let a = Config::new(vec![Value::Choice(0)]);
        let b = Config::new(vec![Value::Choice(1)]);
        let kde = KdeModel::fit([&a, &a, &a], &space, 0.1).unwrap();
        assert!((kde.density(&a).unwrap() - 0.95).abs() < 1e-12);
        assert!((kde.density(&b).unwrap() - 0.05).abs() < 1e-12);
        let table = kde.categorical_table(0).unwrap();
        assert!((table[0] - 0.95).abs() < 1e-12 && (table[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_density_integrates_to_one() {
        let space = space_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let members: Vec<Config> = (0..10).map(|_| space.sample_uniform(&mut rng)).collect();
        let kde = KdeModel::fit(&members, &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| kde.density(&space.sample_uniform(&mut rng)).unwrap())
            .sum();
        // domain volume is 1
        let integral = total / n as f64;
        assert!((integral - 1.0).abs() < 0.05, "{integral}");
    }

    #[test]
    fn integer_lattice_pmf_sums_to_one() {
        let space = ParamSpace::new(vec![ParamDomain::integer("n", 1, 40)]).unwrap();
        let members: Vec<Config> = [1, 3, 3, 20, 40]
            .iter()
            .map(|&v| Config::new(vec![Value::Int(v)]))
            .collect();
        let kde = KdeModel::fit(&members, &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        let total: f64 = (1..=40)
            .map(|v| kde.density(&Config::new(vec![Value::Int(v)])).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn center_beats_far_tail() {
        let space = space_1d();
        let kde = KdeModel::fit([&real(0.2), &real(0.25)], &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        assert!(kde.density(&real(0.2)).unwrap() > kde.density(&real(0.95)).unwrap());
    }

    #[test]
    fn member_order_is_irrelevant() {
        let space = ParamSpace::new(vec![
            ParamDomain::continuous("x", -2.0, 3.0),
            ParamDomain::integer("n", 0, 30),
            ParamDomain::categorical("c", ["a", "b", "c"]),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let members: Vec<Config> = (0..4).map(|_| space.sample_uniform(&mut rng)).collect();
        let reversed: Vec<Config> = members.iter().rev().cloned().collect();
        let one = KdeModel::fit(&members, &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        let two = KdeModel::fit(&reversed, &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        for _ in 0..100 {
            let x = space.sample_uniform(&mut rng);
            let (a, b) = (one.log_density(&x).unwrap(), two.log_density(&x).unwrap());
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_categorical_closed_form() {
        let space = ParamSpace::new(vec![
            ParamDomain::categorical("a", ["x", "y"]),
            ParamDomain::categorical("b", ["x", "y", "z"]),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let members: Vec<Config> = (0..4).map(|_| space.sample_uniform(&mut rng)).collect();
        let kde = KdeModel::fit(&members, &space, 1.0).unwrap();
        for _ in 0..20 {
            let x = space.sample_uniform(&mut rng);
            assert!((kde.density(&x).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bandwidth_floor_applies_to_coincident_members() {
        let space = ParamSpace::new(vec![ParamDomain::continuous("x", 0.0, 10.0)]).unwrap();
        let kde = KdeModel::fit([&real(4.0), &real(4.0)], &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        assert_eq!(kde.bandwidths(), vec![Some(10.0 * (1.0 / 3.0))]);
        let many = vec![real(4.0); 500];
        let kde = KdeModel::fit(&many, &space, DEFAULT_FLOOR_WEIGHT).unwrap();
        assert_eq!(kde.bandwidths(), vec![Some(0.1)]);
        assert!(kde.log_density(&real(10.0)).unwrap().is_finite());
    }

    #[test]
    fn errors() {
        let space = space_1d();
        let empty: Vec<&Config> = vec![];
        assert!(matches!(
            KdeModel::fit(empty, &space, 0.1),
            Err(Error::EmptyMembers)
        ));
        assert!(KdeModel::fit([&real(2.0)], &space, 0.1).is_err());
        let kde = KdeModel::fit([&real(0.5)], &space, 0.1).unwrap();
        assert!(kde.density(&real(-0.1)).is_err());
        assert!(KdeModel::fit([&real(0.5)], &space, 0.0).is_err());
    }

    #[test]
    fn samples_stay_in_bounds() {
        let space = ParamSpace::new(vec![
            ParamDomain::continuous("x", 0.0, 1.0),
            ParamDomain::integer("n", 2, 9),
            ParamDomain::categorical("c", ["a", "b"]),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let members: Vec<Config> = (0..5).map(|_| space.sample_uniform(&mut rng)).collect();
        let kde = KdeModel::fit(&members, &space, 0.1).unwrap();
        for _ in 0..1000 {
            assert!(space.validate(&kde.sample(&mut rng)).is_ok());
        }
    }
}
