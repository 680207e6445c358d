//! Neural-tangent-kernel condition number.
//!
//! A divergent condition number (zero spectrum, untrainable network) is
//! carried as `f64::INFINITY` and serialized as the string `"divergent"`;
//! it sorts above every finite value.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::metrics::schedule::{init_for_repeat, MetricConfig, SeedSchedule};
use crate::nn::{JacobianMode, Network};
use crate::rng::normal_tensor;
use crate::tensor::Tensor;

/// Denominator clamp: κ = λ0 / max(λm, 1e-12·λ0).
const LAMBDA_CLAMP: f64 = 1e-12;
/// A Gram spectrum may dip this far below zero before we call it a bug.
const PSD_SLACK: f64 = 1e-6;

/// Spectrum and condition number of one NTK evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NtkEval {
    /// Eigenvalues sorted descending.
    pub eigenvalues: Vec<f64>,
    #[serde(with = "kappa_repr")]
    pub kappa: f64,
}

/// Condition numbers across initialization repeats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NtkReport {
    pub per_repeat: Vec<NtkEval>,
    #[serde(with = "kappa_repr")]
    pub kappa_mean: f64,
}

impl NtkReport {
    pub fn kappas(&self) -> Vec<f64> {
        self.per_repeat.iter().map(|e| e.kappa).collect()
    }

    pub fn is_divergent(&self) -> bool {
        self.kappa_mean.is_infinite()
    }
}

/// `Θ = J Jᵀ` over the batch; symmetric by construction since every pair is
/// computed once and mirrored.
pub fn compute_ntk(net: &Network, batch: &Tensor, mode: JacobianMode) -> Result<Matrix> {
    let jac = net.jacobian(batch, mode)?;
    Ok(jac.gram())
}

/// κ from a descending eigenvalue list. A zero (or empty) spectrum is
/// divergent; small negative λm from roundoff is clamped away.
pub fn kappa_from_eigenvalues(evs: &[f64]) -> f64 {
    let lam0 = evs.first().copied().unwrap_or(0.0);
    if lam0 <= 0.0 {
        return f64::INFINITY;
    }
    let lam_m = *evs.last().unwrap();
    lam0 / lam_m.max(LAMBDA_CLAMP * lam0)
}

/// Mean over repeats; one divergent repeat makes the mean divergent.
pub fn mean_kappa(kappas: &[f64]) -> f64 {
    if kappas.iter().any(|k| k.is_infinite()) {
        f64::INFINITY
    } else {
        kappas.iter().sum::<f64>() / kappas.len() as f64
    }
}

/// Difference with divergence-aware arithmetic: ∞ − ∞ = 0, ∞ − finite = +∞,
/// finite − ∞ = −∞.
pub fn kappa_delta(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        0.0
    } else {
        a - b
    }
}

pub fn kappa(template: &Network, cfg: &MetricConfig, schedule: &SeedSchedule) -> Result<NtkReport> {
    kappa_with_inputs(template, cfg, schedule, None)
}

/// One κ per repeat: re-initialize parameters with the repeat's derived seed,
/// draw a fresh standard-normal batch (or slice the provided one), build the
/// NTK and take the eigenvalue ratio.
pub fn kappa_with_inputs(
    template: &Network,
    cfg: &MetricConfig,
    schedule: &SeedSchedule,
    inputs: Option<&Tensor>,
) -> Result<NtkReport> {
    if cfg.batch_size < 2 {
        return Err(Error::Config("NTK batch_size must be >= 2".into()));
    }
    if cfg.repeats < 1 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let mut net = template.clone();
    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        init_for_repeat(&mut net, schedule, "ntk", r);
        let batch = match inputs {
            Some(t) => slice_batch(t, cfg.batch_size, net.input_shape())?,
            None => {
                let mut shape = vec![cfg.batch_size];
                shape.extend_from_slice(net.input_shape());
                normal_tensor(&shape, schedule.data_seed("ntk", Some(r)))
            }
        };
        let theta = compute_ntk(&net, &batch, cfg.ntk_mode)?;
        let evs = symmetric_eigenvalues(&theta)?;
        let lam0 = evs.first().copied().unwrap_or(0.0);
        let lam_m = evs.last().copied().unwrap_or(0.0);
        if lam_m < -PSD_SLACK * lam0.max(0.0) {
            return Err(Error::Internal(format!(
                "NTK spectrum is not PSD: λ0 = {lam0}, λm = {lam_m}"
            )));
        }
        per_repeat.push(NtkEval {
            eigenvalues: evs,
            kappa: kappa_from_eigenvalues_checked(lam0, lam_m),
        });
    }
    let kappa_mean = mean_kappa(&per_repeat.iter().map(|e| e.kappa).collect::<Vec<_>>());
    Ok(NtkReport {
        per_repeat,
        kappa_mean,
    })
}

fn kappa_from_eigenvalues_checked(lam0: f64, lam_m: f64) -> f64 {
    if lam0 <= 0.0 {
        f64::INFINITY
    } else {
        lam0 / lam_m.max(LAMBDA_CLAMP * lam0)
    }
}

fn slice_batch(t: &Tensor, batch_size: usize, input_shape: &[usize]) -> Result<Tensor> {
    if t.shape().len() != input_shape.len() + 1 || t.shape()[1..] != *input_shape {
        return Err(Error::Config(format!(
            "provided inputs have per-sample shape {:?}, network expects {:?}",
            &t.shape()[1..],
            input_shape
        )));
    }
    if t.shape()[0] < batch_size {
        return Err(Error::Insufficient(format!(
            "provided inputs hold {} samples, batch needs {batch_size}",
            t.shape()[0]
        )));
    }
    let per = t.per_sample();
    let mut shape = vec![batch_size];
    shape.extend_from_slice(input_shape);
    Tensor::from_vec(&shape, t.data()[..batch_size * per].to_vec())
}

/// JSON value for a κ: a number, or `"divergent"` for +∞.
pub fn kappa_to_json(kappa: f64) -> serde_json::Value {
    if kappa.is_finite() {
        serde_json::json!(kappa)
    } else {
        serde_json::Value::String("divergent".to_string())
    }
}

pub(crate) mod kappa_repr {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text("divergent".to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "divergent" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad kappa value `{t}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkBuilder;

    fn linear_probe(dim: usize) -> Network {
        let (mut b, x) = NetworkBuilder::new(&[dim]);
        let out = b.linear(x, "w", 1, false);
        b.finish(out).unwrap()
    }

    #[test]
    fn linear_model_ntk_is_the_input_gram() {
        let mut net = linear_probe(3);
        net.init_with_seed(4);
        let batch = crate::rng::normal_tensor(&[5, 3], 40);
        let theta = compute_ntk(&net, &batch, JacobianMode::SumLogits).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want: f64 = (0..3).map(|k| batch.sample(i)[k] * batch.sample(j)[k]).sum();
                assert!((theta.get(i, j) - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn kappa_of_diag_1_4_gram_is_4() {
        let net = linear_probe(2);
        // Rows (1,0) and (0,2): Gram = diag(1,4).
        let inputs = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let cfg = MetricConfig {
            batch_size: 2,
            repeats: 3,
            ..MetricConfig::default()
        };
        let schedule = SeedSchedule::shared(7);
        let report = kappa_with_inputs(&net, &cfg, &schedule, Some(&inputs)).unwrap();
        for eval in &report.per_repeat {
            assert!((eval.kappa - 4.0).abs() < 1e-12, "kappa = {}", eval.kappa);
        }
        assert!((report.kappa_mean - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_network_is_divergent() {
        let (mut b, _x) = NetworkBuilder::new(&[2]);
        let z = b.zeros(&[4], "zero");
        let head = b.linear(z, "head", 3, false);
        let net = b.finish(head).unwrap();
        let cfg = MetricConfig {
            batch_size: 4,
            repeats: 2,
            ..MetricConfig::default()
        };
        let report = kappa(&net, &cfg, &SeedSchedule::shared(1)).unwrap();
        assert!(report.is_divergent());
        assert!(report.per_repeat.iter().all(|e| e.kappa.is_infinite()));
    }

    #[test]
    fn divergence_arithmetic() {
        let inf = f64::INFINITY;
        assert_eq!(kappa_delta(inf, inf), 0.0);
        assert_eq!(kappa_delta(inf, 3.0), inf);
        assert_eq!(kappa_delta(3.0, inf), f64::NEG_INFINITY);
        assert_eq!(kappa_delta(5.0, 3.0), 2.0);
        assert_eq!(mean_kappa(&[1.0, inf]), inf);
        assert_eq!(mean_kappa(&[1.0, 3.0]), 2.0);
    }

    #[test]
    fn kappa_is_at_least_one_and_deterministic() {
        let (mut b, x) = NetworkBuilder::new(&[3]);
        let l = b.linear(x, "l", 5, true);
        let r = b.relu(l, "l.relu");
        let h = b.linear(r, "h", 2, false);
        let net = b.finish(h).unwrap();
        let cfg = MetricConfig {
            batch_size: 6,
            repeats: 3,
            ..MetricConfig::default()
        };
        let schedule = SeedSchedule::shared(9);
        let a = kappa(&net, &cfg, &schedule).unwrap();
        let b2 = kappa(&net, &cfg, &schedule).unwrap();
        assert_eq!(a.kappas(), b2.kappas());
        for k in a.kappas() {
            assert!(k >= 1.0);
        }
    }

    #[test]
    fn scaling_biasfree_params_scales_spectrum_but_not_kappa() {
        // Chain network: every parameter sits on each input-output path, so
        // scaling all parameters by c multiplies every Jacobian entry by the
        // same power of c and the spectrum by its square.
        let (mut b, x) = NetworkBuilder::new(&[3]);
        let l1 = b.linear(x, "l1", 6, false);
        let a1 = b.relu(l1, "l1.relu");
        let h = b.linear(a1, "h", 2, false);
        let mut net = b.finish(h).unwrap();
        net.init_with_seed(12);
        let batch = crate::rng::normal_tensor(&[5, 3], 13);
        let base = symmetric_eigenvalues(&compute_ntk(&net, &batch, JacobianMode::SumLogits).unwrap())
            .unwrap();
        let c = 3.0_f64;
        let mut scaled = net.clone();
        scaled.scale_params(c);
        let evs =
            symmetric_eigenvalues(&compute_ntk(&scaled, &batch, JacobianMode::SumLogits).unwrap())
                .unwrap();
        // Two weight layers: logits are degree-2 in θ, so J is degree-1 and
        // the spectrum scales by c^2.
        let factor = c.powi(2);
        for (s, b0) in evs.iter().zip(base.iter()) {
            assert!((s - b0 * factor).abs() <= 1e-8 * (1.0 + s.abs()));
        }
        let k0 = kappa_from_eigenvalues(&base);
        let k1 = kappa_from_eigenvalues(&evs);
        assert!((k0 - k1).abs() <= 1e-6 * k0);
    }

    #[test]
    fn ntk_matches_the_gram_of_a_finite_difference_jacobian() {
        let (mut b, x) = NetworkBuilder::new(&[3]);
        let l1 = b.linear(x, "l1", 4, true);
        let a1 = b.relu(l1, "l1.relu");
        let l2 = b.linear(a1, "l2", 2, true);
        let mut net = b.finish(l2).unwrap();
        net.init_with_seed(77);
        let batch = crate::rng::normal_tensor(&[3, 3], 78);
        let p = net.param_total();

        // Dense finite-difference Jacobian of the summed logits.
        let sum_logits = |net: &Network, s: usize| -> f64 {
            let (logits, _) = net.forward(&batch).unwrap();
            logits.sample(s).iter().sum()
        };
        let h = 1e-5;
        let mut fd = crate::linalg::Matrix::zeros(3, p);
        for a in 0..p {
            let mut one_hot = vec![0.0; p];
            one_hot[a] = 1.0;
            let mut plus = net.clone();
            plus.apply_update(&one_hot, h);
            let mut minus = net.clone();
            minus.apply_update(&one_hot, -h);
            for s in 0..3 {
                fd.set(s, a, (sum_logits(&plus, s) - sum_logits(&minus, s)) / (2.0 * h));
            }
        }
        let want = fd.gram();
        let got = compute_ntk(&net, &batch, JacobianMode::SumLogits).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (g, w) = (got.get(i, j), want.get(i, j));
                assert!(
                    (g - w).abs() <= 1e-4 * w.abs().max(g.abs()).max(1e-8),
                    "ntk[{i}][{j}] = {g} vs fd gram {w}"
                );
            }
        }
    }

    #[test]
    fn report_serializes_divergent_as_string() {
        let report = NtkReport {
            per_repeat: vec![NtkEval {
                eigenvalues: vec![0.0],
                kappa: f64::INFINITY,
            }],
            kappa_mean: f64::INFINITY,
        };
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"divergent\""));
        let back: NtkReport = serde_json::from_str(&text).unwrap();
        assert!(back.kappa_mean.is_infinite());
    }
}
