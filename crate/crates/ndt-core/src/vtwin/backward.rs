//! Analytic backward pass through readout, message passing, and the
//! embeddings, mirroring the forward pass in reverse.
//!
//! Within each reversed iteration the link update is unwound first: it is
//! the only consumer of that iteration's updated flow states, so its
//! attention contributions must land before the flow GRUs are unwound
//! through their paths. Gradients are raw sums over whatever `d_yhat` the
//! caller supplies; batch scaling belongs to the caller.

use super::forward::{ForwardCache, GruCache, MlpCache, ReadoutCache};
use super::linalg::{add_assign, dot, sigmoid};
use super::{GruCell, Mlp2, Mlp3, ModelWeights, ParamSet};
use crate::features::HeteroGraph;

fn gru_backward(
    p: &GruCell,
    gp: &mut GruCell,
    c: &GruCache,
    dh_next: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = dh_next.len();
    let (x, h, z, r, cand) = (c.x(), c.h(), c.z(), c.r(), c.c());
    // h' = (1-z)*h + z*c
    let mut dz = vec![0.0; n];
    let mut dc = vec![0.0; n];
    let mut dh = vec![0.0; n];
    for i in 0..n {
        dz[i] = dh_next[i] * (cand[i] - h[i]);
        dc[i] = dh_next[i] * z[i];
        dh[i] = dh_next[i] * (1.0 - z[i]);
    }
    // candidate: tanh(Wh x + Uh (r*h) + bh)
    let da_c: Vec<f64> = (0..n).map(|i| dc[i] * (1.0 - cand[i] * cand[i])).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    gp.wh.add_outer(&da_c, x);
    gp.uh.add_outer(&da_c, &rh);
    add_assign(gp.bh.data_mut(), &da_c);
    let mut dx = p.wh.matvec_t(&da_c);
    let drh = p.uh.matvec_t(&da_c);
    let mut dr = vec![0.0; n];
    for i in 0..n {
        dr[i] = drh[i] * h[i];
        dh[i] += drh[i] * r[i];
    }
    // update gate
    let da_z: Vec<f64> = (0..n).map(|i| dz[i] * z[i] * (1.0 - z[i])).collect();
    gp.wz.add_outer(&da_z, x);
    gp.uz.add_outer(&da_z, h);
    add_assign(gp.bz.data_mut(), &da_z);
    add_assign(&mut dx, &p.wz.matvec_t(&da_z));
    add_assign(&mut dh, &p.uz.matvec_t(&da_z));
    // reset gate
    let da_r: Vec<f64> = (0..n).map(|i| dr[i] * r[i] * (1.0 - r[i])).collect();
    gp.wr.add_outer(&da_r, x);
    gp.ur.add_outer(&da_r, h);
    add_assign(gp.br.data_mut(), &da_r);
    add_assign(&mut dx, &p.wr.matvec_t(&da_r));
    add_assign(&mut dh, &p.ur.matvec_t(&da_r));
    (dx, dh)
}

fn mlp2_backward(p: &Mlp2, gp: &mut Mlp2, c: &MlpCache, d_out: &[f64]) {
    let h1: Vec<f64> = c.a1().iter().map(|&v| v.max(0.0)).collect();
    gp.w2.add_outer(d_out, &h1);
    add_assign(gp.b2.data_mut(), d_out);
    let mut da1 = p.w2.matvec_t(d_out);
    for (v, &a) in da1.iter_mut().zip(c.a1()) {
        if a <= 0.0 {
            *v = 0.0;
        }
    }
    gp.w1.add_outer(&da1, c.x());
    add_assign(gp.b1.data_mut(), &da1);
    // input gradients stop here: features are leaves
}

fn mlp3_backward(p: &Mlp3, gp: &mut Mlp3, c: &ReadoutCache, ds: f64) -> Vec<f64> {
    let h2: Vec<f64> = c.a2().iter().map(|&v| v.max(0.0)).collect();
    gp.w3.add_outer(&[ds], &h2);
    add_assign(gp.b3.data_mut(), &[ds]);
    let mut da2 = p.w3.matvec_t(&[ds]);
    for (v, &a) in da2.iter_mut().zip(c.a2()) {
        if a <= 0.0 {
            *v = 0.0;
        }
    }
    let h1: Vec<f64> = c.a1().iter().map(|&v| v.max(0.0)).collect();
    gp.w2.add_outer(&da2, &h1);
    add_assign(gp.b2.data_mut(), &da2);
    let mut da1 = p.w2.matvec_t(&da2);
    for (v, &a) in da1.iter_mut().zip(c.a1()) {
        if a <= 0.0 {
            *v = 0.0;
        }
    }
    gp.w1.add_outer(&da1, c.x());
    add_assign(gp.b1.data_mut(), &da1);
    p.w1.matvec_t(&da1)
}

/// Adds d(loss)/d(theta) to `grads` for a forward pass captured in `cache`,
/// where the loss's gradient with respect to the predicted delays is
/// `d_yhat`.
pub(crate) fn accumulate_gradients(
    g: &HeteroGraph,
    w: &ModelWeights,
    cache: &ForwardCache,
    d_yhat: &[f64],
    grads: &mut ParamSet,
) {
    assert_eq!(d_yhat.len(), g.flows.len(), "one output gradient per flow");
    let (fe_c, le_c, iters, ro_c) = cache.parts();
    let nl = g.links.len();
    let m = w.dims.flow_dim;
    let n = w.dims.link_dim;
    let scale = 1.0 / (w.dims.attn_dim as f64).sqrt();

    // y_t = sum_j occ_j / c_j over the flow's path
    let mut d_occ = vec![0.0; nl];
    for (t, f) in g.flows.iter().enumerate() {
        for &j in &f.links {
            d_occ[j] += d_yhat[t] / (g.links[j].features.capacity_bps * 1e-6);
        }
    }
    let mut d_he: Vec<Vec<f64>> = Vec::with_capacity(nl);
    for (j, rc) in ro_c.iter().enumerate() {
        let ds = d_occ[j] * sigmoid(rc.s());
        d_he.push(mlp3_backward(&w.params.readout, &mut grads.readout, rc, ds));
    }
    let mut d_hf: Vec<Vec<f64>> = vec![vec![0.0; m]; g.flows.len()];

    for ic in iters.iter().rev() {
        let mut d_he_prev: Vec<Vec<f64>> = vec![vec![0.0; n]; nl];
        // link update backward; completes the gradients of this
        // iteration's updated flow states
        for j in 0..nl {
            match &ic.links()[j] {
                None => add_assign(&mut d_he_prev[j], &d_he[j]),
                Some(lc) => {
                    let (d_agg, dh) =
                        gru_backward(&w.params.link_gru, &mut grads.link_gru, lc.gru(), &d_he[j]);
                    add_assign(&mut d_he_prev[j], &dh);
                    let order = lc.order();
                    let alphas = lc.alphas();
                    let keys = lc.keys();
                    let h_f_out = ic.h_f_out();
                    // agg = sum_i alpha_i * v_i with v_i the updated flow state
                    let mut dalpha = Vec::with_capacity(order.len());
                    for (i, &p_) in order.iter().enumerate() {
                        dalpha.push(dot(&d_agg, &h_f_out[p_]));
                        for (acc, v) in d_hf[p_].iter_mut().zip(&d_agg) {
                            *acc += alphas[i] * v;
                        }
                    }
                    let sum_ad: f64 = alphas.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
                    let mut dq = vec![0.0; lc.q().len()];
                    for (i, &p_) in order.iter().enumerate() {
                        let ds_i = alphas[i] * (dalpha[i] - sum_ad);
                        for (acc, kv) in dq.iter_mut().zip(&keys[i]) {
                            *acc += ds_i * kv * scale;
                        }
                        let dk: Vec<f64> = lc.q().iter().map(|&qv| ds_i * qv * scale).collect();
                        grads.attn.wk.add_outer(&dk, &h_f_out[p_]);
                        add_assign(&mut d_hf[p_], &w.params.attn.wk.matvec_t(&dk));
                    }
                    grads.attn.wq.add_outer(&dq, lc.gru().h());
                    add_assign(&mut d_he_prev[j], &w.params.attn.wq.matvec_t(&dq));
                }
            }
        }
        // flow update backward: BPTT across the path, newest step first
        let mut d_hf_prev: Vec<Vec<f64>> = vec![vec![0.0; m]; g.flows.len()];
        for (t, f) in g.flows.iter().enumerate() {
            let mut gh = std::mem::take(&mut d_hf[t]);
            let steps = &ic.flow_steps()[t];
            for (s, &j) in f.links.iter().enumerate().rev() {
                let (dx, dh) =
                    gru_backward(&w.params.flow_gru, &mut grads.flow_gru, &steps[s], &gh);
                add_assign(&mut d_he_prev[j], &dx);
                gh = dh;
            }
            d_hf_prev[t] = gh;
        }
        d_he = d_he_prev;
        d_hf = d_hf_prev;
    }
    for (t, c) in fe_c.iter().enumerate() {
        mlp2_backward(&w.params.flow_embed, &mut grads.flow_embed, c, &d_hf[t]);
    }
    for (j, c) in le_c.iter().enumerate() {
        mlp2_backward(&w.params.link_embed, &mut grads.link_embed, c, &d_he[j]);
    }
}
