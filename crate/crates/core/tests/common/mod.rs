//! Helpers shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sscc::channel::ChannelModel;
use sscc::ecct::{loss_and_grads, sample_batch, EcctArch, EcctModel, TrainConfig};
use sscc::gf2::{BitMatrix, LinearCode};
use sscc::nn::{causal_mask, AttnShape, Graph, Mat, Var};
use sscc::predictor::{AdaptiveNgram, Dictionary, NgramPredictor, Predictor, StaticPredictor, TokenId, UniformPredictor};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, or the absolute gap when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

fn rand_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Worst relative error between backprop and finite differences over every
/// input of `f`. Non-scalar outputs are reduced with fixed random weights.
pub fn gradcheck(inputs: &[Mat], f: &dyn Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Mat], backward: bool| -> (f64, Vec<Mat>) {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|m| g.input(m.clone())).collect();
        let out = f(&mut g, &vars);
        let loss = if g.value(out).shape() == (1, 1) {
            out
        } else {
            let (r, c) = g.value(out).shape();
            let w = g.input(rand_mat(r, c, &mut ChaCha8Rng::seed_from_u64(99)));
            let p = g.mul(out, w);
            g.sum(p)
        };
        let value = g.value(loss).data[0];
        if !backward {
            return (value, Vec::new());
        }
        g.backward(loss);
        let grads = vars
            .iter()
            .zip(xs)
            .map(|(&v, m)| g.grad(v).cloned().unwrap_or_else(|| Mat::zeros(m.rows, m.cols)))
            .collect();
        (value, grads)
    };
    let (_, analytic) = eval(inputs, true);
    let mut worst: f64 = 0.0;
    for (i, m) in inputs.iter().enumerate() {
        let mut numeric = vec![0.0; m.len()];
        for (j, num) in numeric.iter_mut().enumerate() {
            let mut xs = inputs.to_vec();
            xs[i].data[j] = m.data[j] + FD_STEP;
            let up = eval(&xs, false).0;
            xs[i].data[j] = m.data[j] - FD_STEP;
            let down = eval(&xs, false).0;
            *num = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_error(&analytic[i].data, &numeric));
    }
    worst
}

/// Finite-difference check of every differentiable primitive; returns
/// `(name, relative error)` pairs.
pub fn primitive_gradchecks() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = |r, c| rand_mat(r, c, &mut rng);
    let mut out: Vec<(&'static str, f64)> = Vec::new();
    out.push(("matmul", gradcheck(&[m(3, 4), m(4, 2)], &|g, v| g.matmul(v[0], v[1]))));
    out.push(("transpose", gradcheck(&[m(3, 4)], &|g, v| g.transpose(v[0]))));
    out.push(("add", gradcheck(&[m(3, 4), m(3, 4)], &|g, v| g.add(v[0], v[1]))));
    out.push(("mul", gradcheck(&[m(3, 4), m(3, 4)], &|g, v| g.mul(v[0], v[1]))));
    out.push(("add_row", gradcheck(&[m(3, 4), m(1, 4)], &|g, v| g.add_row(v[0], v[1]))));
    out.push(("add_tiled", gradcheck(&[m(6, 4), m(3, 4)], &|g, v| g.add_tiled(v[0], v[1]))));
    out.push(("scale", gradcheck(&[m(3, 4)], &|g, v| g.scale(v[0], -1.7))));
    out.push(("sigmoid", gradcheck(&[m(3, 4)], &|g, v| g.sigmoid(v[0]))));
    let wide = m(3, 4).map(|x| 3.0 * x);
    out.push(("gelu", gradcheck(&[wide], &|g, v| g.gelu(v[0]))));
    out.push(("layer_norm", gradcheck(&[m(3, 5), m(1, 5), m(1, 5)], &|g, v| g.layer_norm(v[0], v[1], v[2]))));
    let smask = Mat::from_vec(
        2,
        3,
        vec![0.0, f64::NEG_INFINITY, 0.0, 0.0, 0.0, f64::NEG_INFINITY],
    );
    out.push(("masked_softmax", gradcheck(&[m(2, 3)], &|g, v| g.masked_softmax(v[0], &smask))));
    let shape = AttnShape {
        batch: 2,
        seq: 3,
        heads: 2,
    };
    out.push((
        "attention",
        gradcheck(&[m(6, 4), m(6, 4), m(6, 4)], &|g, v| g.attention(v[0], v[1], v[2], None, shape)),
    ));
    let causal = Rc::new(causal_mask(3));
    out.push((
        "masked_attention",
        gradcheck(&[m(6, 4), m(6, 4), m(6, 4)], &|g, v| {
            g.attention(v[0], v[1], v[2], Some(&causal), shape)
        }),
    ));
    let scales = Rc::new(vec![0.5, -1.0, 2.0, 1.5, 0.0, -0.3]);
    out.push(("row_scale", gradcheck(&[m(3, 4)], &|g, v| g.row_scale(v[0], scales.clone()))));
    let ids = Rc::new(vec![2, 0, 2, 1]);
    out.push(("embedding", gradcheck(&[m(3, 4)], &|g, v| g.embedding(v[0], ids.clone()))));
    out.push(("concat_cols", gradcheck(&[m(3, 2), m(3, 3)], &|g, v| g.concat_cols(&[v[0], v[1]]))));
    out.push(("reshape", gradcheck(&[m(3, 4)], &|g, v| g.reshape(v[0], 2, 6))));
    out.push(("sum", gradcheck(&[m(3, 4)], &|g, v| g.sum(v[0]))));
    let targets = Rc::new(Mat::from_vec(2, 3, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0]));
    out.push(("bce_with_logits", gradcheck(&[m(2, 3)], &|g, v| g.bce_with_logits(v[0], targets.clone()))));
    let classes = Rc::new(vec![1, 0, 3]);
    out.push((
        "softmax_cross_entropy",
        gradcheck(&[m(3, 4)], &|g, v| g.softmax_cross_entropy(v[0], classes.clone())),
    ));
    out
}

/// End-to-end check of a one-layer, width-8 ECCT on repetition(3,1): every
/// parameter entry against central differences of the training loss.
pub fn ecct_layer_gradcheck() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arch = EcctArch {
        layers: 1,
        dim: 8,
        heads: 2,
        ff_mult: 2,
    };
    let code = LinearCode::resolve("rep_3_1").unwrap();
    let mut model = EcctModel::new(code, arch, &mut rng);
    let cfg = TrainConfig {
        batch: 4,
        snr_db: vec![1.0],
        ..TrainConfig::ci(ChannelModel::awgn())
    };
    let batch = sample_batch(&model, &cfg, &mut rng);
    let (_, grads) = loss_and_grads(&model, &batch).unwrap();
    let ids: Vec<_> = model.params.iter().map(|(id, _, _)| id).collect();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (id, grad) in ids.into_iter().zip(&grads) {
        for j in 0..grad.len() {
            let orig = model.params.get(id).data[j];
            model.params.get_mut(id).data[j] = orig + FD_STEP;
            let up = loss_and_grads(&model, &batch).unwrap().0;
            model.params.get_mut(id).data[j] = orig - FD_STEP;
            let down = loss_and_grads(&model, &batch).unwrap().0;
            model.params.get_mut(id).data[j] = orig;
            analytic.push(grad.data[j]);
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
    }
    rel_error(&analytic, &numeric)
}

/// Connected pairs written as sets: each position with itself, every
/// (bit, check) incidence both ways, and every pair of bits sharing a check.
pub fn mask_oracle(h: &BitMatrix) -> Vec<f64> {
    let (n, m) = (h.cols, h.rows);
    let len = n + m;
    let mut allowed: BTreeSet<(usize, usize)> = (0..len).map(|i| (i, i)).collect();
    for i in 0..m {
        let bits: Vec<usize> = (0..n).filter(|&j| h.get(i, j) == 1).collect();
        for &j in &bits {
            allowed.insert((j, n + i));
            allowed.insert((n + i, j));
            for &l in &bits {
                allowed.insert((j, l));
            }
        }
    }
    (0..len * len)
        .map(|p| if allowed.contains(&(p / len, p % len)) { 0.0 } else { f64::NEG_INFINITY })
        .collect()
}

pub fn random_sparse_h(rng: &mut ChaCha8Rng) -> BitMatrix {
    let rows = rng.random_range(2..9);
    let cols = rng.random_range(rows + 1..rows + 12);
    let mut h = BitMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(0.25) {
                h.set(r, c, 1);
            }
        }
    }
    h
}

pub fn random_weights(rng: &mut impl Rng, tau: usize) -> Vec<f64> {
    (0..tau).map(|_| rng.random_range(0.001..1.0)).collect()
}

/// A predictor of random kind over an alphabet of 2 to 23 letters.
pub fn random_predictor(rng: &mut impl Rng) -> Box<dyn Predictor> {
    let tau = rng.random_range(2..24);
    match rng.random_range(0..4) {
        0 => Box::new(StaticPredictor::iid(&random_weights(rng, tau)).unwrap()),
        1 => Box::new(UniformPredictor::new(Dictionary::from_chars((0..tau as u32).map(|i| char::from_u32(97 + i).unwrap())).unwrap())),
        2 => Box::new(AdaptiveNgram::new(Dictionary::from_chars((0..tau as u32).map(|i| char::from_u32(97 + i).unwrap())).unwrap(), rng.random_range(1..4)).unwrap()),
        _ => {
            let train: Vec<TokenId> = (0..300).map(|_| rng.random_range(0..tau as u32)).collect();
            let dict = Dictionary::from_chars((0..tau as u32).map(|i| char::from_u32(97 + i).unwrap())).unwrap();
            Box::new(NgramPredictor::from_tokens(&train, rng.random_range(1..4), dict))
        }
    }
}

/// Ten thousand symbols with exactly the counts of the source
/// `{1/2, 1/4, 1/8, 1/8}`, shuffled.
pub fn typical_dyadic_sequence(seed: u64) -> Vec<TokenId> {
    let mut tokens: Vec<TokenId> = [(0, 5000), (1, 2500), (2, 1250), (3, 1250)]
        .iter()
        .flat_map(|&(t, n)| std::iter::repeat_n(t, n))
        .collect();
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    tokens
}
