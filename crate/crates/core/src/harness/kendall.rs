//! Kendall rank correlation.

use crate::error::{Error, Result};

/// Kendall tau over paired observations: (concordant − discordant) divided by
/// `sqrt((n0 − T_x)(n0 − T_y))` with `n0 = n(n−1)/2` and `T_x`, `T_y` the
/// pair counts tied in each argument. Without ties this is the plain tau-a;
/// with ties it is the tau-b adjustment. Returns 0 when one argument is
/// constant (the normalizer vanishes). Quadratic in `n`, which is fine at the
/// study sizes involved here. Infinities are legal inputs; NaN is rejected.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Insufficient(
            "kendall tau needs at least 2 observations".into(),
        ));
    }
    if xs.iter().chain(ys.iter()).any(|v| v.is_nan()) {
        return Err(Error::Insufficient("kendall tau input contains NaN".into()));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut tie_x = 0i64;
    let mut tie_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xs[i].total_cmp(&xs[j]);
            let dy = ys[i].total_cmp(&ys[j]);
            if dx.is_eq() {
                tie_x += 1;
            }
            if dy.is_eq() {
                tie_y += 1;
            }
            if !dx.is_eq() && !dy.is_eq() {
                if dx == dy {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - tie_x as f64) * (n0 - tie_y as f64)).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}
