//! Central finite-difference gradient checks.

use crate::nn::Params;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Relative errors below this magnitude floor are measured against the floor,
/// so gradients that are numerically zero do not produce spurious failures.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<String>,
    pub failures: Vec<String>,
}

impl GradReport {
    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
        self.failures.extend(other.failures);
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, name: String, analytic: f64, numeric: f64, tol: f64) {
        let rel = relative_error(analytic, numeric);
        self.checked += 1;
        if rel > self.max_rel_error {
            self.max_rel_error = rel;
            self.worst = Some(name.clone());
        }
        if rel > tol {
            self.failures.push(format!(
                "{name}: analytic {analytic:.6e} numeric {numeric:.6e} rel {rel:.2e}"
            ));
        }
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Checks `grads` against finite differences of `loss` over every element of `params`.
pub fn check_params<T, P, F>(params: &P, grads: &P, mut loss: F, step: f64, tol: f64) -> GradReport
where
    T: Scalar,
    P: Params<T> + Clone,
    F: FnMut(&P) -> T,
{
    let mut report = GradReport::default();
    let mut probe = params.clone();
    let analytic: Vec<(String, Vec<T>)> = grads
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    for (k, (name, ga)) in analytic.iter().enumerate() {
        for i in 0..ga.len() {
            let orig = probe.named()[k].1.data()[i];
            set_elem(&mut probe, k, i, orig + T::lit(step));
            let up = loss(&probe).as_f64();
            set_elem(&mut probe, k, i, orig - T::lit(step));
            let down = loss(&probe).as_f64();
            set_elem(&mut probe, k, i, orig);
            let numeric = (up - down) / (2.0 * step);
            report.record(format!("{name}[{i}]"), ga[i].as_f64(), numeric, tol);
        }
    }
    report
}

fn set_elem<T: Scalar, P: Params<T>>(p: &mut P, k: usize, i: usize, v: T) {
    let mut named = p.named_mut();
    named[k].1.data_mut()[i] = v;
}

/// Checks an input gradient `dx` against finite differences of `loss` around `x`.
pub fn check_input<T, F>(
    name: &str,
    x: &Tensor<T>,
    dx: &Tensor<T>,
    mut loss: F,
    step: f64,
    tol: f64,
) -> GradReport
where
    T: Scalar,
    F: FnMut(&Tensor<T>) -> T,
{
    let mut report = GradReport::default();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + T::lit(step);
        let up = loss(&probe).as_f64();
        probe.data_mut()[i] = orig - T::lit(step);
        let down = loss(&probe).as_f64();
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        report.record(format!("{name}[{i}]"), dx.data()[i].as_f64(), numeric, tol);
    }
    report
}
