use rand::Rng;

use super::init::xavier_uniform;
use super::params::{join_name, Params};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gemm_acc, Tensor};

/// One LSTM cell. Gate columns are laid out as `[input, forget, candidate, output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell<T> {
    /// `in × 4h`
    pub w_input: Tensor<T>,
    /// `h × 4h`
    pub w_hidden: Tensor<T>,
    /// `4h`
    pub bias: Tensor<T>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    pub x: Tensor<T>,
    pub h_prev: Tensor<T>,
    pub c_prev: Tensor<T>,
    /// Post-activation gates, `batch × 4h`.
    pub gates: Tensor<T>,
    pub tanh_c: Tensor<T>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> LstmCell<T> {
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden: usize) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        // forget-gate bias of 1 keeps early gradients alive through time
        for v in &mut bias.data_mut()[hidden..2 * hidden] {
            *v = T::one();
        }
        Self {
            w_input: xavier_uniform(rng, input, 4 * hidden),
            w_hidden: xavier_uniform(rng, hidden, 4 * hidden),
            bias,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Tensor::zeros(&[input, 4 * hidden]),
            w_hidden: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.rows()
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        h_prev: &Tensor<T>,
        c_prev: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, LstmCache<T>)> {
        let hd = self.hidden_dim();
        let b = x.rows();
        if x.cols() != self.input_dim() || h_prev.cols() != hd || c_prev.cols() != hd {
            return Err(shape_err!(
                "lstm cell {}→{} given x {:?}, h {:?}, c {:?}",
                self.input_dim(),
                hd,
                x.shape(),
                h_prev.shape(),
                c_prev.shape()
            ));
        }
        if h_prev.rows() != b || c_prev.rows() != b {
            return Err(shape_err!("lstm batch sizes disagree"));
        }
        let g4 = 4 * hd;
        let mut z = vec![T::zero(); b * g4];
        for row in z.chunks_mut(g4) {
            row.copy_from_slice(self.bias.data());
        }
        gemm_acc(
            x.data(),
            self.w_input.data(),
            &mut z,
            b,
            self.input_dim(),
            g4,
        );
        gemm_acc(h_prev.data(), self.w_hidden.data(), &mut z, b, hd, g4);

        let mut h = vec![T::zero(); b * hd];
        let mut c = vec![T::zero(); b * hd];
        let mut tanh_c = vec![T::zero(); b * hd];
        for r in 0..b {
            let zr = &mut z[r * g4..(r + 1) * g4];
            for k in 0..hd {
                zr[k] = sigmoid(zr[k]);
                zr[hd + k] = sigmoid(zr[hd + k]);
                zr[2 * hd + k] = zr[2 * hd + k].tanh();
                zr[3 * hd + k] = sigmoid(zr[3 * hd + k]);
            }
            let cp = c_prev.row(r);
            for k in 0..hd {
                let cv = zr[hd + k] * cp[k] + zr[k] * zr[2 * hd + k];
                let tc = cv.tanh();
                c[r * hd + k] = cv;
                tanh_c[r * hd + k] = tc;
                h[r * hd + k] = zr[3 * hd + k] * tc;
            }
        }
        let h = Tensor::from_vec(&[b, hd], h)?;
        let c = Tensor::from_vec(&[b, hd], c)?;
        if !h.is_finite() || !c.is_finite() {
            return Err(Error::Numeric("non-finite LSTM activation".into()));
        }
        let cache = LstmCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gates: Tensor::from_vec(&[b, g4], z)?,
            tanh_c: Tensor::from_vec(&[b, hd], tanh_c)?,
        };
        Ok((h, c, cache))
    }

    /// Given `dL/dh` and `dL/dc` at this step's outputs, accumulates parameter
    /// gradients and returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &self,
        cache: &LstmCache<T>,
        dh: &Tensor<T>,
        dc: &Tensor<T>,
        grad: &mut Self,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let hd = self.hidden_dim();
        let b = cache.x.rows();
        let g4 = 4 * hd;
        let mut dz = vec![T::zero(); b * g4];
        let mut dc_prev = vec![T::zero(); b * hd];
        let one = T::one();
        for r in 0..b {
            let g = cache.gates.row(r);
            let tc = cache.tanh_c.row(r);
            let cp = cache.c_prev.row(r);
            let dhr = dh.row(r);
            let dcr = dc.row(r);
            let dzr = &mut dz[r * g4..(r + 1) * g4];
            for k in 0..hd {
                let (i, f, gg, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
                let dct = dcr[k] + dhr[k] * o * (one - tc[k] * tc[k]);
                let d_o = dhr[k] * tc[k];
                let d_i = dct * gg;
                let d_g = dct * i;
                let d_f = dct * cp[k];
                dc_prev[r * hd + k] = dct * f;
                dzr[k] = d_i * i * (one - i);
                dzr[hd + k] = d_f * f * (one - f);
                dzr[2 * hd + k] = d_g * (one - gg * gg);
                dzr[3 * hd + k] = d_o * o * (one - o);
            }
        }
        let dz = Tensor::from_vec(&[b, g4], dz)?;
        cache.x.matmul_tn_acc(&dz, &mut grad.w_input)?;
        cache.h_prev.matmul_tn_acc(&dz, &mut grad.w_hidden)?;
        dz.sum_rows_acc(&mut grad.bias)?;
        let dx = dz.matmul_nt(&self.w_input)?;
        let dh_prev = dz.matmul_nt(&self.w_hidden)?;
        Ok((dx, dh_prev, Tensor::from_vec(&[b, hd], dc_prev)?))
    }
}

impl<T: Scalar> Params<T> for LstmCell<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join_name(prefix, "wx"), &self.w_input));
        out.push((join_name(prefix, "wh"), &self.w_hidden));
        out.push((join_name(prefix, "b"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join_name(prefix, "wx"), &mut self.w_input));
        out.push((join_name(prefix, "wh"), &mut self.w_hidden));
        out.push((join_name(prefix, "b"), &mut self.bias));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::normal_init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct per-unit evaluation of the gate equations.
    fn oracle(cell: &LstmCell<f64>, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = cell.hidden_dim();
        let pre = |gate: usize, k: usize| {
            let col = gate * hd + k;
            let mut s = cell.bias.data()[col];
            for (j, &xv) in x.iter().enumerate() {
                s += xv * cell.w_input.get(j, col);
            }
            for (j, &hv) in h.iter().enumerate() {
                s += hv * cell.w_hidden.get(j, col);
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut hn = vec![0.0; hd];
        let mut cn = vec![0.0; hd];
        for k in 0..hd {
            let i = sig(pre(0, k));
            let f = sig(pre(1, k));
            let g = pre(2, k).tanh();
            let o = sig(pre(3, k));
            cn[k] = f * c[k] + i * g;
            hn[k] = o * cn[k].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_parameters_and_state_give_zero_output() {
        let cell = LstmCell::<f64>::zeros(3, 2);
        let x = Tensor::from_vec(&[1, 3], vec![0.3, -0.7, 1.2]).unwrap();
        let (h, c, _) = cell
            .forward(&x, &Tensor::zeros(&[1, 2]), &Tensor::zeros(&[1, 2]))
            .unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_carries_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cell = LstmCell::<f64>::new(&mut rng, 3, 4);
        for v in &mut cell.bias.data_mut()[4..8] {
            *v = 20.0;
        }
        // input gate shut as well
        for v in &mut cell.bias.data_mut()[0..4] {
            *v = -20.0;
        }
        let c_prev = Tensor::from_vec(&[1, 4], vec![0.5, -0.25, 1.0, 0.0]).unwrap();
        let (_, c, _) = cell
            .forward(&Tensor::zeros(&[1, 3]), &Tensor::zeros(&[1, 4]), &c_prev)
            .unwrap();
        for (a, b) in c.data().iter().zip(c_prev.data()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn matches_gate_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cell = LstmCell::<f64> {
            w_input: normal_init(&mut rng, &[3, 8], 0.5),
            w_hidden: normal_init(&mut rng, &[2, 8], 0.5),
            bias: normal_init(&mut rng, &[8], 0.5),
        };
        let x: Tensor<f64> = normal_init(&mut rng, &[2, 3], 1.0);
        let h: Tensor<f64> = normal_init(&mut rng, &[2, 2], 1.0);
        let c: Tensor<f64> = normal_init(&mut rng, &[2, 2], 1.0);
        let (hn, cn, _) = cell.forward(&x, &h, &c).unwrap();
        for r in 0..2 {
            let (ho, co) = oracle(&cell, x.row(r), h.row(r), c.row(r));
            for k in 0..2 {
                assert!((hn.get(r, k) - ho[k]).abs() <= 1e-12);
                assert!((cn.get(r, k) - co[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_input_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = LstmCell::<f64>::new(&mut rng, 2, 2);
        let x = Tensor::from_vec(&[1, 2], vec![f64::NAN, 0.0]).unwrap();
        let r = cell.forward(&x, &Tensor::zeros(&[1, 2]), &Tensor::zeros(&[1, 2]));
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
