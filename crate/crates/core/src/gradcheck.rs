//! Central-difference verification of [`Tape::backward`].

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(RELATIVE_FLOOR);
    (a - b).abs() / denom
}

/// Worst relative error between backward's gradient of `f` at `x` and
/// central differences with step `eps`.
pub fn finite_difference_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let errs = check_params(
        |tape, vars| f(tape, vars[0]),
        std::slice::from_ref(x),
        eps,
    )?;
    Ok(errs[0])
}

/// Per-parameter worst relative error for a scalar function of several
/// tensors. `build` must record the whole computation on the tape it is
/// given, with the supplied vars as its trainable leaves.
pub fn check_params<F>(build: F, params: &[Tensor], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    check_params_with(build, params, eps, None)
}

/// As [`check_params`], optionally with a corrupted backward rule.
#[doc(hidden)]
pub fn check_params_with<F>(
    build: F,
    params: &[Tensor],
    eps: f64,
    fault: Option<&'static str>,
) -> Result<Vec<f64>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(eps > 0.0, "eps must be positive");
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.param(v.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).get(0, 0))
    };

    let mut tape = Tape::new();
    if let Some(op) = fault {
        tape.inject_fault(op);
    }
    let vars: Vec<Var> = params.iter().map(|v| tape.param(v.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut work = params.to_vec();
    let mut worst = Vec::with_capacity(params.len());
    for (p, &var) in vars.iter().enumerate() {
        let analytic = grads.wrt(var);
        let mut max_err: f64 = 0.0;
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            work[p].data_mut()[i] = orig + eps;
            let plus = eval(&work)?;
            work[p].data_mut()[i] = orig - eps;
            let minus = eval(&work)?;
            work[p].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            max_err = max_err.max(relative_error(analytic.data()[i], numeric));
        }
        worst.push(max_err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_is_exact() {
        let x = Tensor::from_rows(&[[0.3, -0.7], [1.5, 2.0]]);
        let err = finite_difference_check(|t, v| Ok(t.sum(v)), &x, 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sum_sigmoid_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::uniform(3, 3, -1.0, 1.0, &mut rng);
        let err = finite_difference_check(
            |t, v| {
                let s = t.sigmoid(v);
                Ok(t.sum(s))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn corrupted_rule_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::uniform(2, 2, -1.0, 1.0, &mut rng);
        let errs = check_params_with(
            |t, v| {
                let s = t.sigmoid(v[0]);
                Ok(t.sum(s))
            },
            &[x],
            1e-5,
            Some("sigmoid"),
        )
        .unwrap();
        assert!(errs[0] > 0.1);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!(relative_error(1e-9, 2e-9) <= 1e-3);
    }
}
