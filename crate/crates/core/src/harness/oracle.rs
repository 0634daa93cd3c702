//! Numerical reference solver for the retargeting objective.
//!
//! Multi-start Nelder-Mead over all seven joints, with joint limits handled
//! by clamping inside the objective. It shares nothing with the closed-form
//! solver beyond forward kinematics and the cost terms, which makes it a
//! usable optimality check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::geometry::rotation_about;
use crate::harness::random_unit;
use crate::model::{ArmPair, JointVector, RobotArmModel, Side, NUM_JOINTS};
use crate::retarget::{costs, input_from_pose, sew_mimic, ArmInput};

pub const DEFAULT_STARTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub q: JointVector,
    pub cost: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub starts: usize,
    pub seed: u64,
    /// Initial simplex edge, radians.
    pub step: f64,
    /// Evaluation budget per local search.
    pub max_evals: usize,
    pub exec: Exec,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            starts: DEFAULT_STARTS,
            seed: 0,
            step: 0.4,
            max_evals: 6000,
            exec: Exec::default(),
        }
    }
}

/// Total objective at `q`, with `q` clamped into the joint limits.
pub fn objective(model: &RobotArmModel, input: &ArmInput, q: &[f64; NUM_JOINTS]) -> f64 {
    let q = model.clamp(&JointVector(*q));
    costs(model, &q, input).total()
}

/// Best result over `options.starts` uniformly random in-limit starts.
pub fn oracle_solve(
    model: &RobotArmModel,
    input: &ArmInput,
    options: &OracleOptions,
) -> OracleResult {
    let starts: Vec<JointVector> = (0..options.starts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                options.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let mut q = JointVector::zeros();
            for j in 0..NUM_JOINTS {
                let (lo, hi) = model.limits(j + 1);
                q[j] = rng.random_range(lo..hi);
            }
            q
        })
        .collect();
    oracle_solve_from(model, input, &starts, options)
}

/// Best result over local searches from the given starts.
pub fn oracle_solve_from(
    model: &RobotArmModel,
    input: &ArmInput,
    starts: &[JointVector],
    options: &OracleOptions,
) -> OracleResult {
    assert!(!starts.is_empty(), "oracle needs a start");
    let results = options.exec.map_slice(starts, |q0| {
        let f = |x: &[f64; NUM_JOINTS]| objective(model, input, x);
        // A restart from the first optimum escapes most stalls.
        let (x1, _, e1) = nelder_mead(&f, q0.0, options.step, options.max_evals);
        let (x2, c2, e2) = nelder_mead(&f, x1, 0.1 * options.step, options.max_evals);
        OracleResult {
            q: model.clamp(&JointVector(x2)),
            cost: c2,
            evaluations: e1 + e2,
        }
    });
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let best = results
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("non-empty");
    OracleResult {
        evaluations,
        ..best
    }
}

/// Nelder-Mead simplex minimization with the standard coefficients.
/// Returns the best point, its value and the number of evaluations.
pub fn nelder_mead<const N: usize>(
    f: &impl Fn(&[f64; N]) -> f64,
    x0: [f64; N],
    step: f64,
    max_evals: usize,
) -> ([f64; N], f64, usize) {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += step;
        simplex.push((x, f(&x)));
    }
    let mut evals = N + 1;

    let combine = |a: &[f64; N], b: &[f64; N], t: f64| {
        let mut out = [0.0; N];
        for k in 0..N {
            out[k] = a[k] + t * (b[k] - a[k]);
        }
        out
    };

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[N].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        if (worst - best).abs() <= 1e-16 * (1.0 + best.abs()) && size < 1e-9 {
            break;
        }
        if size < 1e-12 {
            break;
        }

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for k in 0..N {
                centroid[k] += x[k] / N as f64;
            }
        }
        let worst_x = simplex[N].0;
        let reflected = combine(&centroid, &worst_x, -ALPHA);
        let fr = f(&reflected);
        evals += 1;

        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst_x, -GAMMA);
            let fe = f(&expanded);
            evals += 1;
            simplex[N] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
        } else {
            let (target, ft) = if fr < simplex[N].1 {
                (reflected, fr)
            } else {
                (worst_x, simplex[N].1)
            };
            let contracted = combine(&centroid, &target, RHO);
            let fc = f(&contracted);
            evals += 1;
            if fc < ft {
                simplex[N] = (contracted, fc);
            } else {
                let x_best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x = combine(&x_best, &entry.0, SIGMA);
                    *entry = (x, f(&x));
                }
                evals += N;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, evals)
}

/// Settings for [`audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Instances per arm.
    pub instances: usize,
    pub seed: u64,
    /// Elbow and wrist displacement from the robot pose, meters.
    pub noise: f64,
    /// Hand rotation away from the robot pose, radians.
    pub hand_noise: f64,
    /// Widen every joint range to (-2pi, 2pi) so limits never bind.
    pub widen: bool,
    pub oracle: OracleOptions,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            instances: 100,
            seed: 0,
            noise: 0.03,
            hand_noise: 0.3,
            widen: true,
            oracle: OracleOptions::default(),
        }
    }
}

/// One instance of an optimality audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub instance: usize,
    pub side: Side,
    pub sew_cost: f64,
    pub oracle_cost: f64,
    /// `sew_cost - oracle_cost`; positive when the oracle did better.
    pub excess: f64,
    pub clamped: bool,
}

/// A random in-limit pose turned into an input, with the elbow, wrist and
/// hand perturbed away from it. The optimum is nonzero only where joint
/// limits bind.
pub fn random_instance(
    model: &RobotArmModel,
    rng: &mut impl Rng,
    noise: f64,
    hand_noise: f64,
) -> ArmInput {
    let mut q = JointVector::zeros();
    for j in 0..NUM_JOINTS {
        let (lo, hi) = model.limits(j + 1);
        q[j] = rng.random_range(lo..hi);
    }
    let mut input = input_from_pose(model, &q);
    input.elbow += random_unit(rng) * noise;
    input.wrist += random_unit(rng) * noise;
    input.hand *= rotation_about(&random_unit(rng), hand_noise);
    input
}

/// Closed-form cost against the multi-start oracle on random instances for
/// both arms of `pair`. Instances are drawn sequentially from `seed` and
/// solved in parallel when the oracle's `exec` allows it.
pub fn audit(pair: &ArmPair, options: &AuditOptions) -> Vec<AuditRow> {
    let widen = |m: &RobotArmModel| -> RobotArmModel {
        if !options.widen {
            return m.clone();
        }
        (1..=NUM_JOINTS).fold(m.clone(), |m, i| {
            m.with_limits(i, -std::f64::consts::TAU, std::f64::consts::TAU)
                .expect("valid limits")
        })
    };
    let models = [
        (Side::Left, widen(&pair.left)),
        (Side::Right, widen(&pair.right)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut jobs = Vec::with_capacity(2 * options.instances);
    for instance in 0..options.instances {
        for (k, (side, model)) in models.iter().enumerate() {
            let input = random_instance(model, &mut rng, options.noise, options.hand_noise);
            jobs.push((instance, k, *side, input));
        }
    }
    // Parallelism goes over instances; each oracle runs its starts in turn.
    let inner = OracleOptions {
        exec: Exec::Sequential,
        ..options.oracle
    };
    options
        .oracle
        .exec
        .map_slice(&jobs, |(instance, k, side, input)| {
            let model = &models[*k].1;
            let r = sew_mimic(model, &JointVector::zeros(), input);
            let oracle = oracle_solve(
                model,
                input,
                &OracleOptions {
                    seed: options.oracle.seed ^ (2 * *instance as u64 + *k as u64),
                    ..inner
                },
            );
            AuditRow {
                instance: *instance,
                side: *side,
                sew_cost: r.costs.total(),
                oracle_cost: oracle.cost,
                excess: r.costs.total() - oracle.cost,
                clamped: r.flags.clamped(),
            }
        })
}
