//! Central-difference gradient verification.

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Denominator floor for the relative error, so components where both
/// gradients vanish do not divide by zero.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Relative error `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares the tape gradient of the scalar function `f` at `x` with central
/// differences of step `eps`, returning the largest component-wise relative
/// error.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let analytic = {
        let tape = Tape::new();
        let xv = tape.input(x.clone(), true);
        let y = f(&tape, xv)?;
        tape.backward(y)?.wrt(xv).expect("input requires grad")
    };
    let eval = |t: Tensor| -> Result<f64> {
        let tape = Tape::new();
        let xv = tape.input(t, false);
        f(&tape, xv)?.value().item()
    };
    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_matches() {
        // f(x) = xᵀ A x with A = [[2, 1], [1, 3]] (via matmul + mul + sum)
        let a = Tensor::new(vec![2, 2], vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        let x = Tensor::new(vec![1, 2], vec![0.7, -1.3]).unwrap();
        let err = grad_check(
            |tape, x| {
                let am = tape.constant(a.clone());
                x.matmul(am)?.mul(x).map(|v| v.sum())
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let x = Tensor::from_vec(vec![1.0, -2.0, 3.0]);
        let tape = Tape::new();
        let xv = tape.input(x.clone(), true);
        let c = tape.constant(Tensor::scalar(4.0));
        let y = c.sum();
        let _ = xv;
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(xv).unwrap().data(), &[0.0; 3]);
        let err = grad_check(|t, _x| Ok(t.constant(Tensor::scalar(4.0)).sum()), &x, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }
}

/// Result of checking one op.
#[derive(Clone, Debug)]
pub struct OpCheck {
    pub op: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl OpCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Tolerance for ops that are linear in the checked input.
pub const LINEAR_TOL: f64 = 1e-6;
/// Tolerance for nonlinear ops.
pub const NONLINEAR_TOL: f64 = 1e-4;

/// Gradient-checks every differentiable op on the tape against central
/// differences (ε = 1e-5), projecting each output onto a fixed random
/// tensor so the scalar loss touches every output component.
pub fn op_suite(seed: u64) -> Result<Vec<OpCheck>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rand_t = |shape: &[usize], scale: f64| -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
            .expect("shape")
    };
    fn project<'t>(tape: &'t Tape, y: Var<'t>, r: &Tensor) -> Result<Var<'t>> {
        let rv = tape.constant(r.clone());
        Ok(y.mul(rv)?.sum())
    }
    let eps = 1e-5;
    let mut out = Vec::new();
    let mut push = |op, err, tol| {
        out.push(OpCheck {
            op,
            max_rel_err: err,
            tolerance: tol,
        })
    };

    let a = rand_t(&[3, 4], 1.0);
    let b = rand_t(&[4, 5], 1.0);
    let r35 = rand_t(&[3, 5], 1.0);
    let (bc, rc) = (b.clone(), r35.clone());
    push("matmul/lhs", grad_check(move |t, x| { let w = t.constant(bc.clone()); project(t, x.matmul(w)?, &rc) }, &a, eps)?, LINEAR_TOL);
    let (ac, rc) = (a.clone(), r35.clone());
    push("matmul/rhs", grad_check(move |t, x| { let l = t.constant(ac.clone()); project(t, l.matmul(x)?, &rc) }, &b, eps)?, LINEAR_TOL);
    let (ac, bc) = (a.clone(), b.clone());
    push("matmul/sum(A·B)", grad_check(move |t, x| { let l = t.constant(ac.clone()); let _ = &bc; Ok(l.matmul(x)?.sum()) }, &b, eps)?, LINEAR_TOL);

    let x3 = rand_t(&[2, 3, 4], 1.0);
    let bias = rand_t(&[4], 1.0);
    let r234 = rand_t(&[2, 3, 4], 1.0);
    let (bc, rc) = (bias.clone(), r234.clone());
    push("add/lhs", grad_check(move |t, x| { let c = t.constant(bc.clone()); project(t, x.add(c)?, &rc) }, &x3, eps)?, LINEAR_TOL);
    let (xc, rc) = (x3.clone(), r234.clone());
    push("add/broadcast", grad_check(move |t, x| { let c = t.constant(xc.clone()); project(t, c.add(x)?, &rc) }, &bias, eps)?, LINEAR_TOL);
    let other = rand_t(&[2, 3, 4], 1.0);
    let (oc, rc) = (other.clone(), r234.clone());
    push("mul", grad_check(move |t, x| { let c = t.constant(oc.clone()); project(t, x.mul(c)?, &rc) }, &x3, eps)?, LINEAR_TOL);
    let rc = r234.clone();
    push("scale", grad_check(move |t, x| project(t, x.scale(-2.5), &rc), &x3, eps)?, LINEAR_TOL);
    let rc = r234.clone();
    push("reshape", grad_check(move |t, x| { let y = x.reshape(&[6, 4])?.reshape(&[2, 3, 4])?; project(t, y, &rc) }, &x3, eps)?, LINEAR_TOL);
    push("sum", grad_check(|_, x| Ok(x.sum()), &x3, eps)?, LINEAR_TOL);
    push("mean", grad_check(|_, x| Ok(x.mean()), &x3, eps)?, LINEAR_TOL);

    let side = rand_t(&[2, 3, 2], 1.0);
    let r236 = rand_t(&[2, 3, 6], 1.0);
    let (sc, rc) = (side.clone(), r236.clone());
    push("concat_last", grad_check(move |t, x| { let c = t.constant(sc.clone()); let y = t.concat_last(&[c, x])?; project(t, y, &rc) }, &x3, eps)?, LINEAR_TOL);

    let table = rand_t(&[5, 3], 1.0);
    let r43 = rand_t(&[2, 2, 3], 1.0);
    let rc = r43.clone();
    push("embedding", grad_check(move |t, x| { let y = t.embedding(x, &[4, 0, 4, 2], &[2, 2])?; project(t, y, &rc) }, &table, eps)?, LINEAR_TOL);

    let logits = rand_t(&[3, 5], 2.0);
    let mask = Tensor::new(vec![3, 5], (0..15).map(|i| if i % 4 == 3 { -1e9 } else { 0.0 }).collect()).expect("shape");
    let (mc, rc) = (mask.clone(), r35.clone());
    push("softmax_last", grad_check(move |t, x| project(t, x.softmax_last(Some(&mc))?, &rc), &logits, eps)?, NONLINEAR_TOL);

    let gain = rand_t(&[4], 1.0);
    let (gc, bc, rc) = (gain.clone(), bias.clone(), r234.clone());
    push("layer_norm/x", grad_check(move |t, x| { let g = t.constant(gc.clone()); let b = t.constant(bc.clone()); project(t, x.layer_norm(g, b, 1e-9)?, &rc) }, &x3, eps)?, NONLINEAR_TOL);
    let (xc, bc, rc) = (x3.clone(), bias.clone(), r234.clone());
    push("layer_norm/gain", grad_check(move |t, g| { let x = t.constant(xc.clone()); let b = t.constant(bc.clone()); project(t, x.layer_norm(g, b, 1e-9)?, &rc) }, &gain, eps)?, LINEAR_TOL);
    let (xc, gc, rc) = (x3.clone(), gain.clone(), r234.clone());
    push("layer_norm/bias", grad_check(move |t, b| { let x = t.constant(xc.clone()); let g = t.constant(gc.clone()); project(t, x.layer_norm(g, b, 1e-9)?, &rc) }, &bias, eps)?, LINEAR_TOL);

    let rc = r234.clone();
    push("gelu", grad_check(move |t, x| project(t, x.scale(2.0).gelu(), &rc), &x3, eps)?, NONLINEAR_TOL);
    let rc = r234.clone();
    push("sigmoid", grad_check(move |t, x| project(t, x.scale(2.0).sigmoid(), &rc), &x3, eps)?, NONLINEAR_TOL);

    let q = rand_t(&[2, 3, 4], 1.0);
    let k = rand_t(&[2, 5, 4], 1.0);
    let v = rand_t(&[2, 5, 4], 1.0);
    let am = Tensor::new(vec![2, 5], vec![0., 0., 0., -1e9, -1e9, 0., 0., 0., 0., 0.]).expect("shape");
    let (kc, vc, mc, rc) = (k.clone(), v.clone(), am.clone(), r234.clone());
    push("attention/q", grad_check(move |t, x| { let k = t.constant(kc.clone()); let v = t.constant(vc.clone()); project(t, t.attention(x, k, v, 2, Some(&mc))?, &rc) }, &q, eps)?, NONLINEAR_TOL);
    let (qc, vc, mc, rc) = (q.clone(), v.clone(), am.clone(), r234.clone());
    push("attention/k", grad_check(move |t, x| { let q = t.constant(qc.clone()); let v = t.constant(vc.clone()); project(t, t.attention(q, x, v, 2, Some(&mc))?, &rc) }, &k, eps)?, NONLINEAR_TOL);
    let (qc, kc, mc, rc) = (q.clone(), k.clone(), am.clone(), r234.clone());
    push("attention/v", grad_check(move |t, x| { let q = t.constant(qc.clone()); let k = t.constant(kc.clone()); project(t, t.attention(q, k, x, 2, Some(&mc))?, &rc) }, &v, eps)?, LINEAR_TOL);
    let rc = r234.clone();
    push("attention/self", grad_check(move |t, x| project(t, t.attention(x, x, x, 1, None)?, &rc), &x3, eps)?, NONLINEAR_TOL);

    Ok(out)
}
