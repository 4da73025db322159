//! Parameter layouts, forward recursions and reverse-mode gradients of the
//! parametric regression families. All quantities live in standardized
//! units; the loss is the plain sum of squared errors over a sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Family, Mode};
use crate::error::{Error, Result};

/// One contiguous parameter block, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    /// Weights are penalized by the ridge term; biases are not.
    pub weight: bool,
}

impl Block {
    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub len: usize,
}

impl Layout {
    fn push(&mut self, name: String, rows: usize, cols: usize, weight: bool) {
        self.blocks.push(Block {
            name,
            offset: self.len,
            rows,
            cols,
            weight,
        });
        self.len += rows * cols;
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm2(&self, p: &[f64]) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.weight)
            .map(|b| p[b.range()].iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Adds the gradient of `alpha * weight_norm2`.
    pub fn add_ridge_grad(&self, p: &[f64], alpha: f64, g: &mut [f64]) {
        for b in self.blocks.iter().filter(|b| b.weight) {
            for i in b.range() {
                g[i] += 2.0 * alpha * p[i];
            }
        }
    }
}

/// Network shape: input dimension, number of hidden layers and their width
/// (the latent dimension for LARX). Unused fields are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub family: Family,
    pub n_in: usize,
    pub layers: usize,
    pub width: usize,
}

impl Arch {
    pub fn layout(&self) -> Layout {
        let mut l = Layout {
            blocks: Vec::new(),
            len: 0,
        };
        let (n, d, p) = (self.n_in, self.layers, self.width);
        match self.family {
            Family::Ann | Family::AnnI => {
                let mut fan = n;
                for i in 0..d {
                    l.push(format!("W{}", i + 1), p, fan, true);
                    l.push(format!("b{}", i + 1), p, 1, false);
                    fan = p;
                }
                l.push("w_out".into(), 1, fan, true);
                l.push("b_out".into(), 1, 1, false);
            }
            Family::Arx => {
                l.push("theta_rho".into(), 1, n, true);
                l.push("theta_h".into(), 1, 1, true);
                l.push("b".into(), 1, 1, false);
            }
            Family::Larx => {
                l.push("Theta_rho".into(), p, n, true);
                l.push("Theta_h".into(), p, p, true);
                l.push("b_h".into(), p, 1, false);
                l.push("theta_out".into(), 1, p, true);
                l.push("b_out".into(), 1, 1, false);
            }
            Family::Rnn | Family::Lstm => {
                let gates = if self.family == Family::Lstm { 4 } else { 1 };
                let mut fan = n;
                for i in 0..d {
                    l.push(format!("W{}", i + 1), gates * p, fan, true);
                    l.push(format!("U{}", i + 1), gates * p, p, true);
                    l.push(format!("b{}", i + 1), gates * p, 1, false);
                    fan = p;
                }
                l.push("w_out".into(), 1, p, true);
                l.push("b_out".into(), 1, 1, false);
            }
            Family::Knn | Family::Gp => {}
        }
        l
    }

    /// Glorot-uniform weights, zero biases, LSTM forget-gate biases one.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let layout = self.layout();
        let mut p = vec![0.0; layout.len];
        for b in &layout.blocks {
            if b.weight {
                let limit = (6.0 / (b.rows + b.cols) as f64).sqrt();
                for v in &mut p[b.range()] {
                    *v = rng.random_range(-limit..limit);
                }
            } else if self.family == Family::Lstm && b.name.starts_with('b') && b.name != "b_out" {
                let w = self.width;
                for v in &mut p[b.offset + w..b.offset + 2 * w] {
                    *v = 1.0;
                }
            }
        }
        p
    }

    pub fn check_mode(&self, mode: Mode) -> Result<()> {
        let ok = match mode {
            Mode::Nonrecursive => self.family == Family::Ann,
            Mode::Nrt => matches!(self.family, Family::Arx | Family::AnnI),
            Mode::Rt => matches!(
                self.family,
                Family::Arx | Family::AnnI | Family::Larx | Family::Rnn | Family::Lstm
            ),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "family {} cannot be trained in mode {}",
                self.family.as_str(),
                mode.as_str()
            )))
        }
    }
}

/// `out += W x` for block `b`.
fn mv(p: &[f64], b: &Block, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate().take(b.rows) {
        let row = &p[b.offset + r * b.cols..b.offset + (r + 1) * b.cols];
        *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// `out += Wᵀ d` for block `b`.
fn mtv(p: &[f64], b: &Block, d: &[f64], out: &mut [f64]) {
    for (r, dr) in d.iter().enumerate().take(b.rows) {
        if *dr == 0.0 {
            continue;
        }
        let row = &p[b.offset + r * b.cols..b.offset + (r + 1) * b.cols];
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * dr;
        }
    }
}

/// `G += d xᵀ` for block `b`.
fn outer(g: &mut [f64], b: &Block, d: &[f64], x: &[f64]) {
    for (r, dr) in d.iter().enumerate().take(b.rows) {
        if *dr == 0.0 {
            continue;
        }
        let row = &mut g[b.offset + r * b.cols..b.offset + (r + 1) * b.cols];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += dr * xv;
        }
    }
}

fn add_vec(g: &mut [f64], b: &Block, d: &[f64]) {
    for (gv, dv) in g[b.range()].iter_mut().zip(d) {
        *gv += dv;
    }
}

fn bias(p: &[f64], b: &Block) -> Vec<f64> {
    p[b.range()].to_vec()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Feed-forward ReLU network with a linear scalar head; returns the output
/// and the layer activations (input first).
fn ffn_forward(layout: &Layout, p: &[f64], x: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let d = (layout.blocks.len() - 2) / 2;
    let mut acts = Vec::with_capacity(d + 1);
    acts.push(x.to_vec());
    for l in 0..d {
        let (wb, bb) = (&layout.blocks[2 * l], &layout.blocks[2 * l + 1]);
        let mut a = bias(p, bb);
        mv(p, wb, &acts[l], &mut a);
        a.iter_mut().for_each(|v| *v = v.max(0.0));
        acts.push(a);
    }
    let wo = &layout.blocks[2 * d];
    let mut y = [p[layout.blocks[2 * d + 1].offset]];
    mv(p, wo, &acts[d], &mut y);
    (y[0], acts)
}

fn ffn_backward(layout: &Layout, p: &[f64], acts: &[Vec<f64>], dout: f64, g: &mut [f64]) {
    let d = acts.len() - 1;
    let wo = &layout.blocks[2 * d];
    outer(g, wo, &[dout], &acts[d]);
    g[layout.blocks[2 * d + 1].offset] += dout;
    let mut dh = vec![0.0; acts[d].len()];
    mtv(p, wo, &[dout], &mut dh);
    for l in (0..d).rev() {
        let da: Vec<f64> = dh
            .iter()
            .zip(&acts[l + 1])
            .map(|(v, h)| if *h > 0.0 { *v } else { 0.0 })
            .collect();
        outer(g, &layout.blocks[2 * l], &da, &acts[l]);
        add_vec(g, &layout.blocks[2 * l + 1], &da);
        if l > 0 {
            dh = vec![0.0; acts[l].len()];
            mtv(p, &layout.blocks[2 * l], &da, &mut dh);
        }
    }
}

/// Runs the recursion of `arch` over one sequence of standardized features.
///
/// `y0` seeds the error-feedback families (ARX, ANN-I). In NRT mode the
/// latent at step `n` is the true previous target, so `targets` is
/// required. When `grad` is given, the gradient of the summed squared error
/// against `targets` is accumulated into it.
pub fn run_sequence(
    arch: &Arch,
    layout: &Layout,
    p: &[f64],
    feats: &[Vec<f64>],
    y0: f64,
    targets: Option<&[f64]>,
    mode: Mode,
    grad: Option<&mut [f64]>,
) -> Result<Vec<f64>> {
    if mode == Mode::Nrt && targets.is_none() {
        return Err(Error::MissingInput("teacher forcing needs the true targets".into()));
    }
    if let Some(t) = targets {
        if t.len() != feats.len() {
            return Err(Error::Shape(format!(
                "{} targets for {} feature vectors",
                t.len(),
                feats.len()
            )));
        }
    }
    if grad.is_some() && targets.is_none() {
        return Err(Error::MissingInput("gradients need targets".into()));
    }
    if let Some(f) = feats.iter().find(|f| f.len() != arch.n_in) {
        return Err(Error::Shape(format!(
            "feature length {} vs model input {}",
            f.len(),
            arch.n_in
        )));
    }
    Ok(match arch.family {
        Family::Ann => run_ann(layout, p, feats, targets, grad),
        Family::Arx => run_arx(layout, p, feats, y0, targets, mode, grad),
        Family::AnnI => run_anni(layout, p, feats, y0, targets, mode, grad),
        Family::Larx => run_larx(arch, layout, p, feats, targets, grad),
        Family::Rnn => run_rnn(arch, layout, p, feats, targets, grad),
        Family::Lstm => run_lstm(arch, layout, p, feats, targets, grad),
        Family::Knn | Family::Gp => {
            return Err(Error::WrongEntryPoint(format!(
                "{} has no parametric recursion",
                arch.family.as_str()
            )))
        }
    })
}

fn residuals(preds: &[f64], targets: &[f64]) -> Vec<f64> {
    preds.iter().zip(targets).map(|(a, b)| 2.0 * (a - b)).collect()
}

fn run_ann(layout: &Layout, p: &[f64], feats: &[Vec<f64>], targets: Option<&[f64]>, grad: Option<&mut [f64]>) -> Vec<f64> {
    let mut preds = Vec::with_capacity(feats.len());
    let mut tapes = Vec::with_capacity(feats.len());
    for x in feats {
        let (y, acts) = ffn_forward(layout, p, x);
        preds.push(y);
        tapes.push(acts);
    }
    if let (Some(g), Some(t)) = (grad, targets) {
        for (e, acts) in residuals(&preds, t).into_iter().zip(&tapes) {
            ffn_backward(layout, p, acts, e, g);
        }
    }
    preds
}

fn latent_at(n: usize, y0: f64, prev: f64, targets: Option<&[f64]>, mode: Mode) -> f64 {
    match mode {
        Mode::Nrt => {
            if n == 0 {
                y0
            } else {
                targets.expect("checked")[n - 1]
            }
        }
        _ => prev,
    }
}

fn run_arx(
    layout: &Layout,
    p: &[f64],
    feats: &[Vec<f64>],
    y0: f64,
    targets: Option<&[f64]>,
    mode: Mode,
    grad: Option<&mut [f64]>,
) -> Vec<f64> {
    let (bt, bh, bb) = (&layout.blocks[0], &layout.blocks[1], &layout.blocks[2]);
    let th = p[bh.offset];
    let mut preds = Vec::with_capacity(feats.len());
    let mut latents = Vec::with_capacity(feats.len());
    let mut prev = y0;
    for (n, x) in feats.iter().enumerate() {
        let h = latent_at(n, y0, prev, targets, mode);
        let mut y = [p[bb.offset] + th * h];
        mv(p, bt, x, &mut y);
        preds.push(y[0]);
        latents.push(h);
        prev = y[0];
    }
    if let (Some(g), Some(t)) = (grad, targets) {
        let e = residuals(&preds, t);
        let mut carry = 0.0;
        for n in (0..feats.len()).rev() {
            let gn = e[n] + if mode == Mode::Rt { th * carry } else { 0.0 };
            outer(g, bt, &[gn], &feats[n]);
            g[bh.offset] += gn * latents[n];
            g[bb.offset] += gn;
            carry = gn;
        }
    }
    preds
}

fn run_anni(
    layout: &Layout,
    p: &[f64],
    feats: &[Vec<f64>],
    y0: f64,
    targets: Option<&[f64]>,
    mode: Mode,
    grad: Option<&mut [f64]>,
) -> Vec<f64> {
    let mut preds = Vec::with_capacity(feats.len());
    let mut tapes = Vec::with_capacity(feats.len());
    let mut prev = y0;
    for (n, x) in feats.iter().enumerate() {
        let h = latent_at(n, y0, prev, targets, mode);
        let (inc, acts) = ffn_forward(layout, p, x);
        let y = h + inc;
        preds.push(y);
        tapes.push(acts);
        prev = y;
    }
    if let (Some(g), Some(t)) = (grad, targets) {
        let e = residuals(&preds, t);
        let mut carry = 0.0;
        for n in (0..feats.len()).rev() {
            let gn = e[n] + if mode == Mode::Rt { carry } else { 0.0 };
            ffn_backward(layout, p, &tapes[n], gn, g);
            carry = gn;
        }
    }
    preds
}

fn run_larx(
    arch: &Arch,
    layout: &Layout,
    p: &[f64],
    feats: &[Vec<f64>],
    targets: Option<&[f64]>,
    grad: Option<&mut [f64]>,
) -> Vec<f64> {
    let nh = arch.width;
    let (br, bh, bbh, bo, bbo) = (
        &layout.blocks[0],
        &layout.blocks[1],
        &layout.blocks[2],
        &layout.blocks[3],
        &layout.blocks[4],
    );
    let mut hs: Vec<Vec<f64>> = vec![vec![0.0; nh]];
    let mut preds = Vec::with_capacity(feats.len());
    for x in feats {
        let mut h = bias(p, bbh);
        mv(p, br, x, &mut h);
        mv(p, bh, hs.last().unwrap(), &mut h);
        let mut y = [p[bbo.offset]];
        mv(p, bo, &h, &mut y);
        preds.push(y[0]);
        hs.push(h);
    }
    if let (Some(g), Some(t)) = (grad, targets) {
        let e = residuals(&preds, t);
        let mut carry = vec![0.0; nh];
        for n in (0..feats.len()).rev() {
            let h = &hs[n + 1];
            outer(g, bo, &[e[n]], h);
            g[bbo.offset] += e[n];
            let mut dh = carry.clone();
            mtv(p, bo, &[e[n]], &mut dh);
            outer(g, br, &dh, &feats[n]);
            outer(g, bh, &dh, &hs[n]);
            add_vec(g, bbh, &dh);
            carry = vec![0.0; nh];
            mtv(p, bh, &dh, &mut carry);
        }
    }
    preds
}

fn run_rnn(
    arch: &Arch,
    layout: &Layout,
    p: &[f64],
    feats: &[Vec<f64>],
    targets: Option<&[f64]>,
    grad: Option<&mut [f64]>,
) -> Vec<f64> {
    let (d, w) = (arch.layers, arch.width);
    let (bo, bbo) = (&layout.blocks[3 * d], &layout.blocks[3 * d + 1]);
    // hs[l][n] is the layer-l hidden state after step n; index 0 is h⁰ = 0.
    let mut hs: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; w]]; d];
    let mut preds = Vec::with_capacity(feats.len());
    for x in feats {
        for l in 0..d {
            let (bw, bu, bb) = (&layout.blocks[3 * l], &layout.blocks[3 * l + 1], &layout.blocks[3 * l + 2]);
            let mut a = bias(p, bb);
            if l == 0 {
                mv(p, bw, x, &mut a);
            } else {
                let below = hs[l - 1].last().unwrap().clone();
                mv(p, bw, &below, &mut a);
            }
            mv(p, bu, hs[l].last().unwrap(), &mut a);
            a.iter_mut().for_each(|v| *v = v.tanh());
            hs[l].push(a);
        }
        let mut y = [p[bbo.offset]];
        mv(p, bo, hs[d - 1].last().unwrap(), &mut y);
        preds.push(y[0]);
    }
    if let (Some(g), Some(t)) = (grad, targets) {
        let e = residuals(&preds, t);
        let mut carry = vec![vec![0.0; w]; d];
        for n in (0..feats.len()).rev() {
            outer(g, bo, &[e[n]], &hs[d - 1][n + 1]);
            g[bbo.offset] += e[n];
            let mut dh = carry[d - 1].clone();
            mtv(p, bo, &[e[n]], &mut dh);
            for l in (0..d).rev() {
                let (bw, bu, bb) = (&layout.blocks[3 * l], &layout.blocks[3 * l + 1], &layout.blocks[3 * l + 2]);
                let h = &hs[l][n + 1];
                let da: Vec<f64> = dh.iter().zip(h).map(|(v, hv)| v * (1.0 - hv * hv)).collect();
                let input: &[f64] = if l == 0 { &feats[n] } else { &hs[l - 1][n + 1] };
                outer(g, bw, &da, input);
                outer(g, bu, &da, &hs[l][n]);
                add_vec(g, bb, &da);
                carry[l] = vec![0.0; w];
                mtv(p, bu, &da, &mut carry[l]);
                if l > 0 {
                    dh = carry[l - 1].clone();
                    mtv(p, bw, &da, &mut dh);
                }
            }
        }
    }
    preds
}

/// Per-step LSTM quantities for one layer.
#[derive(Clone)]
struct LstmStep {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

fn run_lstm(
    arch: &Arch,
    layout: &Layout,
    p: &[f64],
    feats: &[Vec<f64>],
    targets: Option<&[f64]>,
    grad: Option<&mut [f64]>,
) -> Vec<f64> {
    let (d, w) = (arch.layers, arch.width);
    let (bo, bbo) = (&layout.blocks[3 * d], &layout.blocks[3 * d + 1]);
    let zero = LstmStep {
        i: vec![0.0; w],
        f: vec![0.0; w],
        g: vec![0.0; w],
        o: vec![0.0; w],
        c: vec![0.0; w],
        tc: vec![0.0; w],
        h: vec![0.0; w],
    };
    let mut steps: Vec<Vec<LstmStep>> = vec![vec![zero]; d];
    let mut preds = Vec::with_capacity(feats.len());
    for x in feats {
        for l in 0..d {
            let (bw, bu, bb) = (&layout.blocks[3 * l], &layout.blocks[3 * l + 1], &layout.blocks[3 * l + 2]);
            let mut a = bias(p, bb);
            if l == 0 {
                mv(p, bw, x, &mut a);
            } else {
                let below = steps[l - 1].last().unwrap().h.clone();
                mv(p, bw, &below, &mut a);
            }
            let prev = steps[l].last().unwrap();
            mv(p, bu, &prev.h, &mut a);
            let i: Vec<f64> = a[..w].iter().map(|v| sigmoid(*v)).collect();
            let f: Vec<f64> = a[w..2 * w].iter().map(|v| sigmoid(*v)).collect();
            let g: Vec<f64> = a[2 * w..3 * w].iter().map(|v| v.tanh()).collect();
            let o: Vec<f64> = a[3 * w..].iter().map(|v| sigmoid(*v)).collect();
            let c: Vec<f64> = (0..w).map(|j| f[j] * prev.c[j] + i[j] * g[j]).collect();
            let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h: Vec<f64> = (0..w).map(|j| o[j] * tc[j]).collect();
            steps[l].push(LstmStep { i, f, g, o, c, tc, h });
        }
        let mut y = [p[bbo.offset]];
        mv(p, bo, &steps[d - 1].last().unwrap().h, &mut y);
        preds.push(y[0]);
    }
    if let (Some(gr), Some(t)) = (grad, targets) {
        let e = residuals(&preds, t);
        let mut dh_carry = vec![vec![0.0; w]; d];
        let mut dc_carry = vec![vec![0.0; w]; d];
        for n in (0..feats.len()).rev() {
            outer(gr, bo, &[e[n]], &steps[d - 1][n + 1].h);
            gr[bbo.offset] += e[n];
            let mut dh = dh_carry[d - 1].clone();
            mtv(p, bo, &[e[n]], &mut dh);
            for l in (0..d).rev() {
                let (bw, bu, bb) = (&layout.blocks[3 * l], &layout.blocks[3 * l + 1], &layout.blocks[3 * l + 2]);
                let s = &steps[l][n + 1];
                let c_prev = &steps[l][n].c;
                let mut da = vec![0.0; 4 * w];
                for j in 0..w {
                    let dc = dc_carry[l][j] + dh[j] * s.o[j] * (1.0 - s.tc[j] * s.tc[j]);
                    let d_o = dh[j] * s.tc[j];
                    let di = dc * s.g[j];
                    let dg = dc * s.i[j];
                    let df = dc * c_prev[j];
                    da[j] = di * s.i[j] * (1.0 - s.i[j]);
                    da[w + j] = df * s.f[j] * (1.0 - s.f[j]);
                    da[2 * w + j] = dg * (1.0 - s.g[j] * s.g[j]);
                    da[3 * w + j] = d_o * s.o[j] * (1.0 - s.o[j]);
                    dc_carry[l][j] = dc * s.f[j];
                }
                let input: &[f64] = if l == 0 { &feats[n] } else { &steps[l - 1][n + 1].h };
                outer(gr, bw, &da, input);
                outer(gr, bu, &da, &steps[l][n].h);
                add_vec(gr, bb, &da);
                dh_carry[l] = vec![0.0; w];
                mtv(p, bu, &da, &mut dh_carry[l]);
                if l > 0 {
                    dh = dh_carry[l - 1].clone();
                    mtv(p, bw, &da, &mut dh);
                }
            }
        }
    }
    preds
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layouts_have_expected_sizes() {
        let a = Arch {
            family: Family::Lstm,
            n_in: 3,
            layers: 2,
            width: 4,
        };
        assert_eq!(a.layout().len, (16 * 3 + 16 * 4 + 16) + (16 * 4 + 16 * 4 + 16) + 4 + 1);
        let x = Arch {
            family: Family::Arx,
            n_in: 3,
            layers: 0,
            width: 0,
        };
        assert_eq!(x.layout().len, 5);
    }

    #[test]
    fn lstm_forget_bias_starts_at_one() {
        let a = Arch {
            family: Family::Lstm,
            n_in: 2,
            layers: 1,
            width: 3,
        };
        let p = a.init(&mut ChaCha8Rng::seed_from_u64(0));
        let b = &a.layout().blocks[2];
        assert_eq!(&p[b.offset..b.offset + 12], &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn arx_two_step_gradient_by_hand() {
        // y1 = a x1 + c y0 + b, y2 = a x2 + c y1 + b, L = (y1 - t1)² + (y2 - t2)².
        let arch = Arch {
            family: Family::Arx,
            n_in: 1,
            layers: 0,
            width: 0,
        };
        let layout = arch.layout();
        let (a, c, b) = (0.3, 0.7, -0.2);
        let p = vec![a, c, b];
        let (x1, x2, y0, t1, t2) = (1.0, -2.0, 0.5, 0.1, 0.4);
        let mut g = vec![0.0; 3];
        let feats = vec![vec![x1], vec![x2]];
        let y = run_sequence(&arch, &layout, &p, &feats, y0, Some(&[t1, t2]), Mode::Rt, Some(&mut g)).unwrap();
        let y1 = a * x1 + c * y0 + b;
        let y2 = a * x2 + c * y1 + b;
        assert!((y[0] - y1).abs() < 1e-15 && (y[1] - y2).abs() < 1e-15);
        let (e1, e2) = (2.0 * (y1 - t1), 2.0 * (y2 - t2));
        let da = e1 * x1 + e2 * (x2 + c * x1);
        let dc = e1 * y0 + e2 * (y1 + c * y0);
        let db = e1 + e2 * (1.0 + c);
        assert!((g[0] - da).abs() < 1e-13);
        assert!((g[1] - dc).abs() < 1e-13);
        assert!((g[2] - db).abs() < 1e-13);
    }

    #[test]
    fn lstm_output_bias_only() {
        let arch = Arch {
            family: Family::Lstm,
            n_in: 2,
            layers: 1,
            width: 3,
        };
        let layout = arch.layout();
        let mut p = vec![0.0; layout.len];
        p[layout.blocks.last().unwrap().offset] = 0.7;
        let feats = vec![vec![1.0, -1.0]; 4];
        let y = run_sequence(&arch, &layout, &p, &feats, 0.0, None, Mode::Rt, None).unwrap();
        assert!(y.iter().all(|v| (v - 0.7).abs() < 1e-15));
    }
}
