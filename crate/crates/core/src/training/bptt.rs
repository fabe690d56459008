use crate::error::{Error, Result};
use crate::rnn::{Network, RecurrentLayer};

use super::series::Sample;

/// Loss and parameter gradients for one sample or batch.
///
/// `grad` has the same shape as the network it was computed for; layers
/// flagged non-trainable carry all-zero gradients.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub grad: Network,
}

impl Gradients {
    /// Gradients in [`Network::params_flat`] order.
    pub fn flat(&self) -> Vec<f64> {
        self.grad.params_flat()
    }
}

/// Masked-MSE loss of `sample` and its gradient by backpropagation through
/// time, starting from the zero state.
pub fn bptt_gradients(net: &Network, sample: &Sample) -> Result<Gradients> {
    let mut grad = net.zeroed();
    let loss = accumulate_gradients(net, sample, 1.0, &mut grad)?;
    Ok(Gradients { loss, grad })
}

/// Adds `weight * d(loss)/d(theta)` into `grad` and returns the unweighted loss.
pub(crate) fn accumulate_gradients(net: &Network, sample: &Sample, weight: f64, grad: &mut Network) -> Result<f64> {
    let steps = sample.len();
    if sample.inputs.rows() != steps || sample.mask.len() != steps {
        return Err(Error::shape("sample inputs, targets and mask differ in length"));
    }
    if steps > 0 && sample.inputs.cols() != net.features() {
        return Err(Error::shape(format!(
            "network expects {} features, sample has {}",
            net.features(),
            sample.inputs.cols()
        )));
    }
    let n_obs = sample.observed_count();
    if n_obs == 0 {
        return Err(Error::empty("sample has no observed targets"));
    }

    let trainable = net.trainable().to_vec();
    let dense = net.dense();
    let u = net.recurrent().units();
    let is_lstm = matches!(net.recurrent(), RecurrentLayer::Lstm(_));

    // forward pass with caches
    let mut hs = vec![0.0; (steps + 1) * u];
    let mut cs = vec![0.0; if is_lstm { (steps + 1) * u } else { 0 }];
    let mut gates = vec![0.0; if is_lstm { steps * 4 * u } else { 0 }];
    let mut acts: Vec<Vec<f64>> = dense.iter().map(|d| vec![0.0; steps * d.units()]).collect();
    let mut c_scratch = vec![0.0; u];
    let mut h_scratch = vec![0.0; u];

    for t in 0..steps {
        let x = sample.inputs.row(t);
        let (prev, next) = hs.split_at_mut((t + 1) * u);
        let h_prev = &prev[t * u..];
        match net.recurrent() {
            RecurrentLayer::Simple(p) => p.step_into(h_prev, x, &mut next[..u]),
            RecurrentLayer::Lstm(p) => {
                let c_prev = &cs[t * u..(t + 1) * u];
                p.step_into(h_prev, c_prev, x, &mut gates[t * 4 * u..(t + 1) * 4 * u], &mut c_scratch, &mut h_scratch);
                next[..u].copy_from_slice(&h_scratch);
                cs[(t + 1) * u..(t + 2) * u].copy_from_slice(&c_scratch);
            }
        }
        for (l, layer) in dense.iter().enumerate() {
            let n = layer.units();
            let (before, here) = acts.split_at_mut(l);
            let input = if l == 0 {
                &hs[(t + 1) * u..(t + 2) * u]
            } else {
                let m = dense[l - 1].units();
                &before[l - 1][t * m..(t + 1) * m]
            };
            layer.forward_into(input, &mut here[0][t * n..(t + 1) * n]);
        }
    }

    let output = |t: usize| -> f64 {
        match dense.last() {
            Some(last) => acts[dense.len() - 1][t * last.units()],
            None => hs[(t + 1) * u],
        }
    };

    let mut loss = 0.0;
    let mut dh_ext = vec![0.0; steps * u];
    let widest = dense.iter().map(|d| d.units()).max().unwrap_or(0).max(u);
    let mut da = vec![0.0; widest];
    let mut da_prev = vec![0.0; widest];
    let mut dz = vec![0.0; widest];

    // dense stack, only at observed positions
    for t in 0..steps {
        if !sample.mask[t] {
            continue;
        }
        let err = output(t) - sample.targets[t];
        loss += err * err;
        let dy = weight * 2.0 * err / n_obs as f64;

        if dense.is_empty() {
            dh_ext[t * u] += dy;
            continue;
        }
        let out_w = dense[dense.len() - 1].units();
        da[..out_w].fill(0.0);
        da[0] = dy;
        for l in (0..dense.len()).rev() {
            let layer = &dense[l];
            let n = layer.units();
            let a_out = &acts[l][t * n..(t + 1) * n];
            for k in 0..n {
                dz[k] = da[k] * layer.activation.derivative_from_output(a_out[k]);
            }
            let a_in: &[f64] = if l == 0 {
                &hs[(t + 1) * u..(t + 2) * u]
            } else {
                let m = dense[l - 1].units();
                &acts[l - 1][t * m..(t + 1) * m]
            };
            if trainable[l + 1] {
                let g = &mut grad.dense_mut()[l];
                g.weights.add_outer(&dz[..n], a_in);
                for (b, d) in g.bias.iter_mut().zip(&dz[..n]) {
                    *b += d;
                }
            }
            let m = a_in.len();
            da_prev[..m].fill(0.0);
            layer.weights.tr_mul_vec_add(&dz[..n], &mut da_prev[..m]);
            std::mem::swap(&mut da, &mut da_prev);
        }
        for k in 0..u {
            dh_ext[t * u + k] += da[k];
        }
    }
    let loss = loss / n_obs as f64;

    if !trainable[0] {
        return Ok(loss);
    }

    // recurrent layer, backwards in time
    let mut dh_next = vec![0.0; u];
    let mut dh = vec![0.0; u];
    match (net.recurrent(), grad.recurrent_mut()) {
        (RecurrentLayer::Simple(p), RecurrentLayer::Simple(g)) => {
            let mut dzs = vec![0.0; u];
            for t in (0..steps).rev() {
                let h_t = &hs[(t + 1) * u..(t + 2) * u];
                let h_prev = &hs[t * u..(t + 1) * u];
                for k in 0..u {
                    dh[k] = dh_ext[t * u + k] + dh_next[k];
                    dzs[k] = dh[k] * p.activation.derivative_from_output(h_t[k]);
                }
                g.w_x.add_outer(&dzs, sample.inputs.row(t));
                g.w_h.add_outer(&dzs, h_prev);
                for (b, d) in g.b.iter_mut().zip(&dzs) {
                    *b += d;
                }
                dh_next.fill(0.0);
                p.w_h.tr_mul_vec_add(&dzs, &mut dh_next);
            }
        }
        (RecurrentLayer::Lstm(p), RecurrentLayer::Lstm(g)) => {
            let mut dc_next = vec![0.0; u];
            let mut dzg = vec![0.0; 4 * u];
            for t in (0..steps).rev() {
                let gt = &gates[t * 4 * u..(t + 1) * 4 * u];
                let (fg, ig, gg, og) = (&gt[..u], &gt[u..2 * u], &gt[2 * u..3 * u], &gt[3 * u..]);
                let c_t = &cs[(t + 1) * u..(t + 2) * u];
                let c_prev = &cs[t * u..(t + 1) * u];
                let h_prev = &hs[t * u..(t + 1) * u];
                for k in 0..u {
                    let dh_k = dh_ext[t * u + k] + dh_next[k];
                    let tc = p.cell_output_activation.apply(c_t[k]);
                    let d_o = dh_k * tc;
                    let dc = dh_k * og[k] * p.cell_output_activation.derivative_from_output(tc) + dc_next[k];
                    let d_f = dc * c_prev[k];
                    let d_i = dc * gg[k];
                    let d_g = dc * ig[k];
                    dc_next[k] = dc * fg[k];
                    dzg[k] = d_f * fg[k] * (1.0 - fg[k]);
                    dzg[u + k] = d_i * ig[k] * (1.0 - ig[k]);
                    dzg[2 * u + k] = d_g * p.candidate_activation.derivative_from_output(gg[k]);
                    dzg[3 * u + k] = d_o * og[k] * (1.0 - og[k]);
                }
                dh_next.fill(0.0);
                let x = sample.inputs.row(t);
                for gate in 0..4 {
                    let d = &dzg[gate * u..(gate + 1) * u];
                    g.w_x[gate].add_outer(d, x);
                    g.w_h[gate].add_outer(d, h_prev);
                    for (b, v) in g.b[gate].iter_mut().zip(d) {
                        *b += v;
                    }
                    p.w_h[gate].tr_mul_vec_add(d, &mut dh_next);
                }
            }
        }
        _ => return Err(Error::shape("gradient buffer does not match the network")),
    }
    Ok(loss)
}
