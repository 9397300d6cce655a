use super::{Result, Tape, Tensor, Var};

pub const GRADCHECK_STEP: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    Ok(tape.value(out).item())
}

/// Largest relative error between tape gradients and central differences
/// over every component of every input. `f` must be deterministic.
pub fn gradcheck<F>(f: F, inputs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v)).collect();
    drop(tape);

    let mut probe = inputs.to_vec();
    let mut worst = 0.0f64;
    for i in 0..inputs.len() {
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            probe[i].data_mut()[j] = x + h;
            let up = evaluate(&f, &probe)?;
            probe[i].data_mut()[j] = x - h;
            let down = evaluate(&f, &probe)?;
            probe[i].data_mut()[j] = x;
            worst = worst.max(relative_error(analytic[i].data()[j], (up - down) / (2.0 * h)));
        }
    }
    Ok(worst)
}
