use super::{fd::InputBox, MessageFunction, MpnnModel};
use crate::bounds::MixingConstants;
use crate::matrix::norm2;
use crate::spectral::eigendecompose;
use crate::{Error, Matrix, Result};
use serde::{Deserialize, Serialize};

/// `sup |sigmoid'|`
const SIGMOID_D1: f64 = 0.25;
/// `sup |sigmoid''| = 1/(6√3)`
const SIGMOID_D2: f64 = 0.096_225_044_864_937_63;
/// Relative inflation applied to numerical norms so they are safe upper bounds.
const NORM_MARGIN: f64 = 1e-9;

/// Largest singular value by power iteration on `MᵀM`.
pub fn operator_norm(m: &Matrix) -> f64 {
    power_iteration(m).0
}

/// Returns `(σ_max estimate, residual ‖MᵀMx - λx‖)`.
fn power_iteration(m: &Matrix) -> (f64, f64) {
    let gram = m.transpose().matmul(m);
    let n = gram.cols();
    if n == 0 || gram.max_abs() == 0.0 {
        return (0.0, 0.0);
    }
    // A fixed, non-symmetric start vector avoids being orthogonal to the top direction
    // for structured inputs.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|e| *e /= nx);
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let y = gram.matvec(&x);
        let ny = norm2(&y);
        if ny == 0.0 {
            return (0.0, 0.0);
        }
        let next: Vec<f64> = y.iter().map(|e| e / ny).collect();
        let rayleigh = crate::matrix::dot(&next, &gram.matvec(&next));
        let done = (rayleigh - lambda).abs() <= 1e-15 * rayleigh;
        lambda = rayleigh;
        x = next;
        if done {
            break;
        }
    }
    let gx = gram.matvec(&x);
    let residual = norm2(
        &gx.iter()
            .zip(&x)
            .map(|(a, b)| a - lambda * b)
            .collect::<Vec<_>>(),
    );
    (lambda.max(0.0).sqrt(), residual)
}

/// Largest singular value via the Jacobi eigensolver on `MᵀM` (or `MMᵀ` when smaller).
pub fn spectral_norm(m: &Matrix) -> f64 {
    let gram = if m.rows() < m.cols() {
        m.matmul(&m.transpose())
    } else {
        m.transpose().matmul(m)
    };
    if gram.rows() == 0 {
        return 0.0;
    }
    let top = eigendecompose(&gram)
        .map(|s| *s.eigenvalues.last().expect("nonempty"))
        .unwrap_or_else(|_| {
            // Jacobi only fails on non-finite input; fall back to the Frobenius bound.
            m.frobenius_norm().powi(2)
        });
    top.max(0.0).sqrt()
}

/// Upper bound on `‖M‖`: the larger of power iteration (plus its residual) and Jacobi,
/// inflated by a relative margin.
fn certified_norm(m: &Matrix) -> f64 {
    let (power, residual) = power_iteration(m);
    let jacobi = spectral_norm(m);
    let from_power = (power * power + residual).sqrt();
    from_power.max(jacobi) * (1.0 + NORM_MARGIN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCertificate {
    pub omega: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub c2nd: f64,
    /// Sup-norm bound on the layer's inputs (the domain of `ψ`), when it was needed.
    pub input_sup_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub constants: MixingConstants,
    pub layers: Vec<LayerCertificate>,
    pub formulas: Vec<String>,
}

/// Upper bounds on every quantity entering the mixing bound.
///
/// Gated messages need a domain: the first layer sees `input_box`, later layers see the
/// range of the activation (so only bounded activations support more than one gated layer).
pub fn certify_constants(
    model: &MpnnModel,
    input_box: Option<&InputBox>,
) -> Result<CertifiedConstants> {
    model.validate()?;
    let c_sigma = model.activation.c_sigma().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "{:?} activation has unbounded derivatives",
            model.activation
        ))
    })?;
    let mut layers = Vec::with_capacity(model.depth());
    let mut formulas = vec![
        "omega = max_t ||Omega_t||, w = max_t ||W_t|| (power iteration cross-checked by Jacobi)"
            .to_string(),
        format!("c_sigma = {c_sigma} ({:?})", model.activation),
    ];
    let gated = model
        .layers
        .iter()
        .any(|l| matches!(l.message, MessageFunction::Gated { .. }));
    if gated {
        formulas.push(
            "gated: c1 = 1/4 * b * ||G1||, c2 = 1/4 * b * ||G2|| + ||U||, \
             c2nd = sqrt(sum_r (s2 * b_r * ||g_r||^2 + 1/2 * ||g_r|| * ||U_r||)^2), \
             b_r = sup |(U y)_r| over the layer domain, g_r = [G1_r G2_r], s2 = 1/(6 sqrt 3)"
                .to_string(),
        );
    } else {
        formulas.push("linear: c1 = ||C1||, c2 = ||C2||, c2nd = 0".to_string());
    }
    for (t, layer) in model.layers.iter().enumerate() {
        let omega = certified_norm(&layer.omega);
        let w = certified_norm(&layer.w);
        let cert = match &layer.message {
            MessageFunction::Linear { c1, c2 } => LayerCertificate {
                omega,
                w,
                c1: certified_norm(c1),
                c2: certified_norm(c2),
                c2nd: 0.0,
                input_sup_bound: None,
            },
            MessageFunction::Gated { g1, g2, u } => {
                let sup = if t == 0 {
                    let b = input_box.ok_or_else(|| {
                        Error::InvalidParameter(
                            "gated messages need a declared input box to bound c2nd".into(),
                        )
                    })?;
                    b.lo.abs().max(b.hi.abs())
                } else {
                    model.activation.output_bound().ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "hidden states of a {:?} network are unbounded; gated layers after the first \
                             cannot be certified",
                            model.activation
                        ))
                    })?
                };
                gated_certificate(g1, g2, u, omega, w, sup)
            }
        };
        layers.push(cert);
    }
    let max_of = |f: fn(&LayerCertificate) -> f64| layers.iter().map(f).fold(0.0, f64::max);
    let constants = MixingConstants {
        omega: max_of(|l| l.omega),
        w: max_of(|l| l.w),
        c1: max_of(|l| l.c1),
        c2: max_of(|l| l.c2),
        c2nd: max_of(|l| l.c2nd),
        c_sigma,
    };
    Ok(CertifiedConstants {
        constants,
        layers,
        formulas,
    })
}

fn gated_certificate(
    g1: &Matrix,
    g2: &Matrix,
    u: &Matrix,
    omega: f64,
    w: f64,
    sup: f64,
) -> LayerCertificate {
    let d = u.rows();
    // |(U y)_r| <= sum_j |U_rj| * sup|y_j|, with a small relative margin for rounding.
    let b: Vec<f64> = (0..d)
        .map(|r| u.row(r).iter().map(|x| x.abs()).sum::<f64>() * sup * (1.0 + NORM_MARGIN))
        .collect();
    let b_max = b.iter().copied().fold(0.0, f64::max);
    let c1 = SIGMOID_D1 * b_max * certified_norm(g1);
    let c2 = SIGMOID_D1 * b_max * certified_norm(g2) + certified_norm(u);
    let sum_sq: f64 = (0..d)
        .map(|r| {
            let g_sq = norm2(g1.row(r)).powi(2) + norm2(g2.row(r)).powi(2);
            let h = SIGMOID_D2 * b[r] * g_sq + 2.0 * SIGMOID_D1 * g_sq.sqrt() * norm2(u.row(r));
            h * h
        })
        .sum();
    let c2nd = sum_sq.sqrt() * (1.0 + NORM_MARGIN);
    LayerCertificate {
        omega,
        w,
        c1,
        c2,
        c2nd,
        input_sup_bound: Some(sup),
    }
}
