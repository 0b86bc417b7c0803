//! Stochastic mean-variance optimization on the nonnegative simplex,
//! maximizing expected return per unit standard deviation, plus the
//! equal-weight / inverse-volatility / risk-parity baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AllocationError, PortfolioWeights};
use crate::backtest::PnlSeries;
use crate::rng::rng_from_seed;

/// Mean vector and sample covariance of alpha daily PnLs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MvoInputs {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl MvoInputs {
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self, AllocationError> {
        let n = mu.len();
        if sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
            return Err(AllocationError::BadInputs("sigma not square".into()));
        }
        for i in 0..n {
            if sigma[i][i] < 0.0 {
                return Err(AllocationError::BadInputs(format!(
                    "negative variance at {i}"
                )));
            }
            for j in 0..i {
                if (sigma[i][j] - sigma[j][i]).abs() > 1e-9 {
                    return Err(AllocationError::BadInputs("sigma not symmetric".into()));
                }
            }
        }
        Ok(Self { mu, sigma })
    }

    /// Sample mean/covariance (n-1) of daily PnL series on one calendar.
    pub fn from_pnls(pnls: &[PnlSeries]) -> Result<Self, AllocationError> {
        let k = pnls.len();
        if k == 0 {
            return Err(AllocationError::BadInputs("no series".into()));
        }
        let n = pnls[0].daily_pnl.len();
        if pnls.iter().any(|p| p.daily_pnl.len() != n) {
            return Err(AllocationError::CalendarMismatch);
        }
        if n < 2 {
            return Err(AllocationError::BadInputs("need at least 2 days".into()));
        }
        let mu: Vec<f64> = pnls
            .iter()
            .map(|p| p.daily_pnl.iter().sum::<f64>() / n as f64)
            .collect();
        let mut sigma = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let mut acc = 0.0;
                for t in 0..n {
                    acc += (pnls[i].daily_pnl[t] - mu[i]) * (pnls[j].daily_pnl[t] - mu[j]);
                }
                let cov = acc / (n as f64 - 1.0);
                sigma[i][j] = cov;
                sigma[j][i] = cov;
            }
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MvoConstraints {
    /// Restrict support to a random subset of this size.
    pub cardinality: Option<usize>,
    pub n_steps: usize,
    pub step_size: f64,
}

impl Default for MvoConstraints {
    fn default() -> Self {
        Self {
            cardinality: None,
            n_steps: 10_000,
            step_size: 0.05,
        }
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &mut [f64]) {
    let n = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut acc = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (k, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (k as f64 + 1.0);
        if u - candidate > 0.0 {
            rho = k + 1;
            theta = candidate;
        }
    }
    debug_assert!(rho > 0);
    for w in v.iter_mut() {
        *w = (*w - theta).max(0.0);
    }
    // fix any residual drift so budgets hold to float precision
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > 1e-15 {
        for w in v.iter_mut() {
            *w /= sum;
        }
    }
    let _ = n;
}

/// Objective: expected return per unit standard deviation.
fn objective(w: &[f64], inputs: &MvoInputs) -> f64 {
    let mut ret = 0.0;
    let mut var = 0.0;
    for i in 0..w.len() {
        ret += w[i] * inputs.mu[i];
        let mut acc = 0.0;
        for j in 0..w.len() {
            acc += inputs.sigma[i][j] * w[j];
        }
        var += w[i] * acc;
    }
    if var < 1e-16 {
        f64::NEG_INFINITY
    } else {
        ret / var.sqrt()
    }
}

/// Hill climb with pairwise perturbations: one coordinate up, one down by
/// the same amount, re-projected to the simplex, accepted only on strict
/// improvement. Deterministic in the seed.
pub fn mvo_hill_climb(
    seed: u64,
    inputs: &MvoInputs,
    constraints: &MvoConstraints,
) -> Result<PortfolioWeights, AllocationError> {
    let n = inputs.dim();
    if n == 0 {
        return Err(AllocationError::BadInputs("empty mu".into()));
    }
    let mut rng = rng_from_seed(seed);

    let support: Vec<usize> = match constraints.cardinality {
        Some(k) => {
            if k < 1 || k > n {
                return Err(AllocationError::InfeasibleCardinality { k, n });
            }
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.random_range(i..n);
                pool.swap(i, j);
            }
            let mut s = pool[..k].to_vec();
            s.sort_unstable();
            s
        }
        None => (0..n).collect(),
    };

    let mut w = vec![0.0; n];
    for &i in &support {
        w[i] = 1.0 / support.len() as f64;
    }
    let mut best = objective(&w, inputs);

    // single-asset support has nowhere to climb
    if support.len() < 2 {
        return Ok(PortfolioWeights { weights: w });
    }

    let mut sub: Vec<f64> = support.iter().map(|&i| w[i]).collect();
    for _ in 0..constraints.n_steps {
        let a = rng.random_range(0..support.len());
        let mut b = rng.random_range(0..support.len() - 1);
        if b >= a {
            b += 1;
        }
        let delta = constraints.step_size * rng.random::<f64>();
        let mut candidate_sub = sub.clone();
        candidate_sub[a] += delta;
        candidate_sub[b] -= delta;
        project_to_simplex(&mut candidate_sub);
        let mut candidate = vec![0.0; n];
        for (k, &i) in support.iter().enumerate() {
            candidate[i] = candidate_sub[k];
        }
        let score = objective(&candidate, inputs);
        if score > best {
            best = score;
            sub = candidate_sub;
            w = candidate;
        }
    }
    Ok(PortfolioWeights { weights: w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Equal,
    InverseVolatility,
    RiskParity,
}

/// Per-asset risk contributions w_i * (Sigma w)_i.
pub fn risk_contributions(w: &[f64], sigma: &[Vec<f64>]) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += sigma[i][j] * w[j];
            }
            w[i] * acc
        })
        .collect()
}

pub fn baseline_allocate(
    method: BaselineMethod,
    inputs: &MvoInputs,
) -> Result<PortfolioWeights, AllocationError> {
    let n = inputs.dim();
    if n == 0 {
        return Err(AllocationError::BadInputs("empty mu".into()));
    }
    match method {
        BaselineMethod::Equal => Ok(PortfolioWeights {
            weights: vec![1.0 / n as f64; n],
        }),
        BaselineMethod::InverseVolatility => {
            let mut raw = Vec::with_capacity(n);
            for i in 0..n {
                let var = inputs.sigma[i][i];
                if var <= 0.0 {
                    return Err(AllocationError::ZeroVolatilityAsset(i));
                }
                raw.push(1.0 / var.sqrt());
            }
            let total: f64 = raw.iter().sum();
            Ok(PortfolioWeights {
                weights: raw.into_iter().map(|r| r / total).collect(),
            })
        }
        BaselineMethod::RiskParity => risk_parity(inputs),
    }
}

/// Equal-risk-contribution weights via cyclical coordinate descent on the
/// log-barrier formulation: at the optimum of
/// min (1/2) x' Sigma x - c * sum(ln x_i), every x_i (Sigma x)_i equals c,
/// so the normalized x has equal risk contributions.
fn risk_parity(inputs: &MvoInputs) -> Result<PortfolioWeights, AllocationError> {
    let n = inputs.dim();
    let sigma = &inputs.sigma;
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let var = sigma[i][i];
        if var <= 0.0 {
            return Err(AllocationError::ZeroVolatilityAsset(i));
        }
        x.push(1.0 / var.sqrt());
    }
    let c = 1.0;
    const TOL: f64 = 1e-10;
    const MAX_SWEEPS: usize = 10_000;
    for _ in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut cross = 0.0;
            for j in 0..n {
                if j != i {
                    cross += sigma[i][j] * x[j];
                }
            }
            // positive root of sigma_ii x^2 + <cross> x - c = 0
            let next = (-cross + (cross * cross + 4.0 * sigma[i][i] * c).sqrt())
                / (2.0 * sigma[i][i]);
            moved = moved.max((next - x[i]).abs());
            x[i] = next;
        }
        if moved < TOL {
            let total: f64 = x.iter().sum();
            return Ok(PortfolioWeights {
                weights: x.into_iter().map(|v| v / total).collect(),
            });
        }
    }
    Err(AllocationError::NoConvergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve;

    fn three_asset_fixture() -> MvoInputs {
        MvoInputs::new(
            vec![0.10, 0.05, 0.02],
            vec![
                vec![0.04, 0.0, 0.0],
                vec![0.0, 0.01, 0.0],
                vec![0.0, 0.0, 0.0025],
            ],
        )
        .unwrap()
    }

    #[test]
    fn projection_lands_on_simplex() {
        use rand::Rng;
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let n = rng.random_range(2..8);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            project_to_simplex(&mut v);
            assert!(v.iter().all(|w| *w >= 0.0));
            let sum: f64 = v.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
        }
        // already-feasible points are fixed points
        let mut v = vec![0.25, 0.75];
        project_to_simplex(&mut v);
        assert!((v[0] - 0.25).abs() < 1e-12 && (v[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn reaches_closed_form_tangency_on_diagonal_fixture() {
        let inputs = three_asset_fixture();
        // closed form: w* proportional to Sigma^{-1} mu (all positive here)
        let direction = solve(&inputs.sigma, &inputs.mu).unwrap();
        let total: f64 = direction.iter().sum();
        let w_star: Vec<f64> = direction.iter().map(|d| d / total).collect();
        assert!((w_star[0] - 0.1613).abs() < 1e-4);
        assert!((w_star[1] - 0.3226).abs() < 1e-4);
        assert!((w_star[2] - 0.5161).abs() < 1e-4);
        let f_star = objective(&w_star, &inputs);

        let found = mvo_hill_climb(7, &inputs, &MvoConstraints::default()).unwrap();
        found.check().unwrap();
        let f_found = objective(&found.weights, &inputs);
        assert!(
            f_found >= f_star * 0.99,
            "f_found {f_found} vs f_star {f_star}"
        );
    }

    #[test]
    fn identical_assets_equal_weights_already_optimal() {
        let n = 4;
        let inputs = MvoInputs::new(
            vec![0.05; n],
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 0.01 } else { 0.0 }).collect())
                .collect(),
        )
        .unwrap();
        let equal = vec![1.0 / n as f64; n];
        let f_equal = objective(&equal, &inputs);
        let found = mvo_hill_climb(3, &inputs, &MvoConstraints::default()).unwrap();
        let f_found = objective(&found.weights, &inputs);
        assert!(f_equal >= f_found - 1e-12);
    }

    #[test]
    fn climb_is_deterministic_and_feasible() {
        let inputs = three_asset_fixture();
        let a = mvo_hill_climb(42, &inputs, &MvoConstraints::default()).unwrap();
        let b = mvo_hill_climb(42, &inputs, &MvoConstraints::default()).unwrap();
        assert_eq!(a, b);
        a.check().unwrap();
    }

    #[test]
    fn cardinality_constraint_respected() {
        let inputs = three_asset_fixture();
        let constraints = MvoConstraints {
            cardinality: Some(2),
            ..MvoConstraints::default()
        };
        let w = mvo_hill_climb(9, &inputs, &constraints).unwrap();
        w.check().unwrap();
        let n_active = w.weights.iter().filter(|v| **v > 0.0).count();
        assert!(n_active <= 2);
        assert!(matches!(
            mvo_hill_climb(
                9,
                &inputs,
                &MvoConstraints {
                    cardinality: Some(5),
                    ..MvoConstraints::default()
                }
            ),
            Err(AllocationError::InfeasibleCardinality { k: 5, n: 3 })
        ));
    }

    #[test]
    fn inverse_volatility_fixture() {
        let inputs = MvoInputs::new(
            vec![0.0, 0.0],
            vec![vec![0.01, 0.0], vec![0.0, 0.04]],
        )
        .unwrap();
        let w = baseline_allocate(BaselineMethod::InverseVolatility, &inputs).unwrap();
        assert!((w.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w.weights[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn risk_parity_matches_inverse_vol_on_diagonal() {
        let inputs = three_asset_fixture();
        let rp = baseline_allocate(BaselineMethod::RiskParity, &inputs).unwrap();
        let iv = baseline_allocate(BaselineMethod::InverseVolatility, &inputs).unwrap();
        for (a, b) in rp.weights.iter().zip(&iv.weights) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn risk_parity_equalizes_contributions_on_random_pd_matrices() {
        use rand::Rng;
        let mut rng = rng_from_seed(12);
        for _ in 0..20 {
            let n = 5;
            // Sigma = A A' + eps I is positive definite
            let a: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
                .collect();
            let mut sigma = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += a[i][k] * a[j][k];
                    }
                    sigma[i][j] = acc + if i == j { 0.05 } else { 0.0 };
                }
            }
            let inputs = MvoInputs::new(vec![0.0; n], sigma).unwrap();
            let w = baseline_allocate(BaselineMethod::RiskParity, &inputs).unwrap();
            w.check().unwrap();
            let rc = risk_contributions(&w.weights, &inputs.sigma);
            let total: f64 = rc.iter().sum();
            for c in &rc {
                assert!(
                    (c / total - 1.0 / n as f64).abs() <= 1e-8,
                    "contribution share {} off equal",
                    c / total
                );
            }
        }
    }

    #[test]
    fn zero_volatility_asset_rejected() {
        let inputs = MvoInputs::new(
            vec![0.0, 0.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.01]],
        )
        .unwrap();
        assert!(matches!(
            baseline_allocate(BaselineMethod::InverseVolatility, &inputs),
            Err(AllocationError::ZeroVolatilityAsset(0))
        ));
        assert!(matches!(
            baseline_allocate(BaselineMethod::RiskParity, &inputs),
            Err(AllocationError::ZeroVolatilityAsset(0))
        ));
    }

    #[test]
    fn from_pnls_builds_sample_moments() {
        let a = PnlSeries::from_daily(vec![0.01, -0.01, 0.02, 0.0]);
        let b = PnlSeries::from_daily(vec![0.0, 0.01, -0.01, 0.02]);
        let inputs = MvoInputs::from_pnls(&[a.clone(), b]).unwrap();
        assert_eq!(inputs.dim(), 2);
        assert!((inputs.mu[0] - 0.005).abs() < 1e-15);
        // diagonal equals the sample variance of each series
        let mean_a = 0.005;
        let var_a: f64 = a
            .daily_pnl
            .iter()
            .map(|x| (x - mean_a) * (x - mean_a))
            .sum::<f64>()
            / 3.0;
        assert!((inputs.sigma[0][0] - var_a).abs() < 1e-15);
        assert!((inputs.sigma[0][1] - inputs.sigma[1][0]).abs() < 1e-15);
    }
}
