//! DAG-MLP: a small dense neural engine with manual reverse-mode
//! differentiation over the layered merge-DAG recurrence.
//!
//! Forward semantics, per height layer i = 1..=H:
//!
//! ```text
//! F' = MLP_0(F)                          (all rows)
//! X[v] = F'[v]                           for v in L_0
//! X[v] = MLP_i((1 + eps_i) * F'[v] + sum_{u -> v in E_i} mult * X[u])
//!                                        for v in L_i
//! ```
//!
//! Rows outside L_i pass through unchanged, which matches adding X^[i-1]
//! to zero-initialized fresh rows; they are never re-transformed. Each MLP
//! is two dense layers with a rectifier in between and identity output.
//! Everything is f64 and deterministic given the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::merge::LayeredMatrices;
use crate::par::{par_map, Parallelism};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            debug_assert_eq!(row.len(), c);
            data.extend(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// out = x * W + b for a single row.
fn affine(x: &[f64], w: &Mat, b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), w.rows);
    debug_assert_eq!(b.len(), w.cols);
    out.copy_from_slice(b);
    for (t, &xt) in x.iter().enumerate() {
        if xt == 0.0 {
            continue;
        }
        let wrow = &w.data[t * w.cols..(t + 1) * w.cols];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xt * wv;
        }
    }
}

/// Two dense layers: rectifier after the first, identity after the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn init<R: Rng>(rng: &mut R, din: usize, dh: usize, dout: usize) -> Self {
        let glorot = |rng: &mut R, rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Mat {
                rows,
                cols,
                data: (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
            }
        };
        Mlp {
            w1: glorot(rng, din, dh),
            b1: vec![0.0; dh],
            w2: glorot(rng, dh, dout),
            b2: vec![0.0; dout],
        }
    }

    pub fn din(&self) -> usize {
        self.w1.rows
    }

    pub fn dout(&self) -> usize {
        self.w2.cols
    }

    /// Fills hidden pre-activation, hidden activation, and output rows.
    fn apply(&self, x: &[f64], h: &mut [f64], a: &mut [f64], out: &mut [f64]) {
        affine(x, &self.w1, &self.b1, h);
        for (av, &hv) in a.iter_mut().zip(h.iter()) {
            *av = if hv > 0.0 { hv } else { 0.0 };
        }
        affine(a, &self.w2, &self.b2, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    /// Pool roots of every height 0..=H, then average the H+1 pooled rows.
    CombineHeights,
    /// Pool only the maximum-height roots.
    FixedSingleHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pool {
    Mean,
    Sum,
}

/// All parameters of the DAG-MLP plus readout configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpStack {
    /// MLP_0: feature rows to initial embeddings.
    pub mlp0: Mlp,
    /// MLP_i for height layers 1..=H.
    pub layers: Vec<Mlp>,
    /// eps_1..eps_H, learnable.
    pub eps: Vec<f64>,
    /// Linear head mapping the pooled graph embedding to class logits.
    pub head_w: Mat,
    pub head_b: Vec<f64>,
    pub embed_dim: usize,
    pub readout: Readout,
    pub pool: Pool,
}

impl MlpStack {
    pub fn init(
        rng: &mut ChaCha8Rng,
        feature_dim: usize,
        embed_dim: usize,
        num_layers: usize,
        num_classes: usize,
        readout: Readout,
        pool: Pool,
    ) -> Self {
        let mlp0 = Mlp::init(rng, feature_dim, embed_dim, embed_dim);
        let layers = (0..num_layers)
            .map(|_| Mlp::init(rng, embed_dim, embed_dim, embed_dim))
            .collect();
        let bound = (6.0 / (embed_dim + num_classes) as f64).sqrt();
        let head_w = Mat {
            rows: embed_dim,
            cols: num_classes,
            data: (0..embed_dim * num_classes)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
        };
        MlpStack {
            mlp0,
            layers,
            eps: vec![0.0; num_layers],
            head_w,
            head_b: vec![0.0; num_classes],
            embed_dim,
            readout,
            pool,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.head_w.cols
    }

    pub fn num_params(&self) -> usize {
        self.flatten_params().len()
    }

    /// All parameters as one flat vector, in a fixed order (each MLP's
    /// w1, b1, w2, b2; then eps; then the head).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for mlp in std::iter::once(&self.mlp0).chain(self.layers.iter()) {
            out.extend_from_slice(&mlp.w1.data);
            out.extend_from_slice(&mlp.b1);
            out.extend_from_slice(&mlp.w2.data);
            out.extend_from_slice(&mlp.b2);
        }
        out.extend_from_slice(&self.eps);
        out.extend_from_slice(&self.head_w.data);
        out.extend_from_slice(&self.head_b);
        out
    }

    pub fn load_params(&mut self, flat: &[f64]) -> Result<()> {
        let mut pos = 0usize;
        let mut take = |len: usize| -> Result<std::ops::Range<usize>> {
            let r = pos..pos + len;
            pos += len;
            if pos > flat.len() {
                return Err(Error::Argument("flat parameter vector too short".into()));
            }
            Ok(r)
        };
        let mut mlps: Vec<&mut Mlp> = Vec::new();
        mlps.push(&mut self.mlp0);
        mlps.extend(self.layers.iter_mut());
        for mlp in mlps {
            let r = take(mlp.w1.data.len())?;
            mlp.w1.data.copy_from_slice(&flat[r]);
            let r = take(mlp.b1.len())?;
            mlp.b1.copy_from_slice(&flat[r]);
            let r = take(mlp.w2.data.len())?;
            mlp.w2.data.copy_from_slice(&flat[r]);
            let r = take(mlp.b2.len())?;
            mlp.b2.copy_from_slice(&flat[r]);
        }
        let r = take(self.eps.len())?;
        self.eps.copy_from_slice(&flat[r]);
        let r = take(self.head_w.data.len())?;
        self.head_w.data.copy_from_slice(&flat[r]);
        let r = take(self.head_b.len())?;
        self.head_b.copy_from_slice(&flat[r]);
        if pos != flat.len() {
            return Err(Error::Argument("flat parameter vector too long".into()));
        }
        Ok(())
    }
}

/// What feeds the (1 + eps_i) addend for a row in L_i.
pub enum DagAnchor<'a> {
    /// The node's own initial embedding F'[v]; the merge-DAG semantics.
    Initial,
    /// X of a designated lower node per row (the same origin one height
    /// down, on vertex-identity unfolding DAGs): plain message passing.
    PreviousOfOrigin(&'a [Option<usize>]),
}

/// Recorded forward pass.
pub struct Forward {
    /// F' = MLP_0(F), all rows.
    pub fp: Mat,
    /// Final embeddings; row v is X^[height(v)][v].
    pub x: Mat,
    /// Hidden pre-activations of MLP_0, all rows.
    pub h0: Mat,
    /// Hidden activations of MLP_0.
    pub a0: Mat,
    /// Aggregated layer inputs; row v is (1+eps)*anchor + sum of children.
    pub s: Mat,
    /// Hidden pre-activations of the layer MLPs; zero for height-0 rows.
    pub h: Mat,
    /// Hidden activations of the layer MLPs.
    pub a: Mat,
}

fn check_shapes(m: &LayeredMatrices, p: &MlpStack) -> Result<()> {
    if p.mlp0.din() != m.feature_dim {
        return Err(Error::Argument(format!(
            "feature dim {} does not match MLP_0 input {}",
            m.feature_dim,
            p.mlp0.din()
        )));
    }
    if p.layers.len() != m.height {
        return Err(Error::Argument(format!(
            "{} layer MLPs for DAG height {}",
            p.layers.len(),
            m.height
        )));
    }
    if p.mlp0.dout() != p.embed_dim
        || p.layers.iter().any(|l| l.din() != p.embed_dim || l.dout() != p.embed_dim)
    {
        return Err(Error::Argument("embedding dimensions do not chain".into()));
    }
    Ok(())
}

/// Runs the layered recurrence. Root embeddings are read off `x` at
/// `m.root_rows`.
pub fn forward_dag(
    m: &LayeredMatrices,
    p: &MlpStack,
    anchor: &DagAnchor,
    par: Parallelism,
) -> Result<Forward> {
    check_shapes(m, p)?;
    let n = m.num_nodes;
    let d = p.embed_dim;
    let dh = p.mlp0.b1.len();

    let mut fp = Mat::zeros(n, d);
    let mut h0 = Mat::zeros(n, dh);
    let mut a0 = Mat::zeros(n, dh);
    let rows = par_map(par, n, |v| {
        let mut h = vec![0.0; dh];
        let mut a = vec![0.0; dh];
        let mut out = vec![0.0; d];
        p.mlp0.apply(&m.f[v], &mut h, &mut a, &mut out);
        (h, a, out)
    });
    for (v, (h, a, out)) in rows.into_iter().enumerate() {
        h0.row_mut(v).copy_from_slice(&h);
        a0.row_mut(v).copy_from_slice(&a);
        fp.row_mut(v).copy_from_slice(&out);
    }

    let mut x = Mat::zeros(n, d);
    for &v in &m.l[0] {
        let row = fp.row(v).to_vec();
        x.row_mut(v).copy_from_slice(&row);
    }

    let mut s = Mat::zeros(n, d);
    let mut h = Mat::zeros(n, dh);
    let mut a = Mat::zeros(n, dh);
    for i in 1..=m.height {
        let mlp = &p.layers[i - 1];
        let eps = p.eps[i - 1];
        let layer = &m.e_rows[i - 1];
        if let DagAnchor::PreviousOfOrigin(map) = anchor {
            for (v, _) in layer {
                if map[*v].is_none() {
                    return Err(Error::Argument(format!(
                        "node {v} has no same-origin anchor one height down"
                    )));
                }
            }
        }
        let rows = par_map(par, layer.len(), |idx| {
            let (v, children) = &layer[idx];
            let mut sv = vec![0.0; d];
            let anchor_row = match anchor {
                DagAnchor::Initial => fp.row(*v),
                DagAnchor::PreviousOfOrigin(map) => {
                    let u = map[*v].expect("checked above");
                    x.row(u)
                }
            };
            for (t, &av) in sv.iter_mut().zip(anchor_row) {
                *t = (1.0 + eps) * av;
            }
            for &(u, mult) in children {
                for (t, &xv) in sv.iter_mut().zip(x.row(u)) {
                    *t += mult * xv;
                }
            }
            let mut hv = vec![0.0; dh];
            let mut av = vec![0.0; dh];
            let mut out = vec![0.0; d];
            mlp.apply(&sv, &mut hv, &mut av, &mut out);
            (sv, hv, av, out)
        });
        for ((v, _), (sv, hv, av, out)) in layer.iter().zip(rows) {
            s.row_mut(*v).copy_from_slice(&sv);
            h.row_mut(*v).copy_from_slice(&hv);
            a.row_mut(*v).copy_from_slice(&av);
            x.row_mut(*v).copy_from_slice(&out);
        }
    }
    Ok(Forward { fp, x, h0, a0, s, h, a })
}

/// Pools rows of `x`, then combines per-height pools into one graph
/// embedding.
pub fn readout(
    x: &Mat,
    roots_by_height: &[Vec<usize>],
    mode: Readout,
    pool: Pool,
) -> Result<Vec<f64>> {
    let d = x.cols;
    let pool_rows = |rows: &[usize]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for &r in rows {
            for (o, &v) in out.iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        if pool == Pool::Mean && !rows.is_empty() {
            let inv = 1.0 / rows.len() as f64;
            for o in &mut out {
                *o *= inv;
            }
        }
        out
    };
    match mode {
        Readout::FixedSingleHeight => {
            let top = roots_by_height
                .last()
                .filter(|r| !r.is_empty())
                .ok_or_else(|| Error::Argument("no roots at the maximum height".into()))?;
            Ok(pool_rows(top))
        }
        Readout::CombineHeights => {
            if roots_by_height.is_empty() {
                return Err(Error::Argument("no root heights to combine".into()));
            }
            let mut acc = vec![0.0; d];
            for (h, rows) in roots_by_height.iter().enumerate() {
                if rows.is_empty() {
                    return Err(Error::Argument(format!("no roots at height {h}")));
                }
                for (o, v) in acc.iter_mut().zip(pool_rows(rows)) {
                    *o += v;
                }
            }
            let inv = 1.0 / roots_by_height.len() as f64;
            for o in &mut acc {
                *o *= inv;
            }
            Ok(acc)
        }
    }
}

/// One classification target: per-height root rows and the class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphTask {
    pub class: Option<u32>,
    /// Index h holds the root rows of the height-h trees of this graph.
    pub roots_by_height: Vec<Vec<usize>>,
}

/// Loss/accuracy of a forward pass over `tasks` restricted to `batch`.
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// Logits per batch entry, in batch order.
    pub logits: Mat,
}

fn logits_for(x: &Mat, task: &GraphTask, p: &MlpStack) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = readout(x, &task.roots_by_height, p.readout, p.pool)?;
    let mut z = vec![0.0; p.num_classes()];
    affine(&r, &p.head_w, &p.head_b, &mut z);
    Ok((r, z))
}

/// Numerically stable log-softmax cross-entropy; returns (loss, softmax).
fn cross_entropy(z: &[f64], class: usize) -> (f64, Vec<f64>) {
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - zmax).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let logsum = sum.ln() + zmax;
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    (logsum - z[class], probs)
}

/// First index attaining the maximum; ties resolve to the lowest class.
fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(
    m: &LayeredMatrices,
    tasks: &[GraphTask],
    batch: &[usize],
    p: &MlpStack,
    par: Parallelism,
) -> Result<Evaluation> {
    let fwd = forward_dag(m, p, &DagAnchor::Initial, par)?;
    let mut logits = Mat::zeros(batch.len(), p.num_classes());
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (bi, &gi) in batch.iter().enumerate() {
        let task = &tasks[gi];
        let class = task
            .class
            .ok_or_else(|| Error::Data(format!("graph {gi} has no class target")))? as usize;
        if class >= p.num_classes() {
            return Err(Error::Data(format!(
                "class {class} outside {} outputs",
                p.num_classes()
            )));
        }
        let (_, z) = logits_for(&fwd.x, task, p)?;
        let (l, _) = cross_entropy(&z, class);
        loss += l;
        if argmax(&z) == class {
            correct += 1;
        }
        logits.row_mut(bi).copy_from_slice(&z);
    }
    let count = batch.len().max(1) as f64;
    Ok(Evaluation {
        loss: loss / count,
        accuracy: correct as f64 / count,
        logits,
    })
}

/// Gradients for every parameter, in [`MlpStack::flatten_params`] layout.
pub struct Grads {
    pub mlps: Vec<MlpGrad>,
    pub eps: Vec<f64>,
    pub head_w: Mat,
    pub head_b: Vec<f64>,
}

pub struct MlpGrad {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl MlpGrad {
    fn zeros_like(m: &Mlp) -> Self {
        MlpGrad {
            w1: Mat::zeros(m.w1.rows, m.w1.cols),
            b1: vec![0.0; m.b1.len()],
            w2: Mat::zeros(m.w2.rows, m.w2.cols),
            b2: vec![0.0; m.b2.len()],
        }
    }
}

impl Grads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.mlps {
            out.extend_from_slice(&g.w1.data);
            out.extend_from_slice(&g.b1);
            out.extend_from_slice(&g.w2.data);
            out.extend_from_slice(&g.b2);
        }
        out.extend_from_slice(&self.eps);
        out.extend_from_slice(&self.head_w.data);
        out.extend_from_slice(&self.head_b);
        out
    }
}

/// Backprop of one MLP for a single row; accumulates into `g` and returns
/// the gradient w.r.t. the MLP input.
fn mlp_backward_row(
    mlp: &Mlp,
    input: &[f64],
    hidden_pre: &[f64],
    hidden_act: &[f64],
    dout: &[f64],
    g: &mut MlpGrad,
) -> Vec<f64> {
    let dh = mlp.b1.len();
    for (j, &aj) in hidden_act.iter().enumerate() {
        if aj != 0.0 {
            let row = &mut g.w2.data[j * g.w2.cols..(j + 1) * g.w2.cols];
            for (w, &gv) in row.iter_mut().zip(dout) {
                *w += aj * gv;
            }
        }
    }
    for (b, &gv) in g.b2.iter_mut().zip(dout) {
        *b += gv;
    }
    let mut dhid = vec![0.0; dh];
    for (j, dj) in dhid.iter_mut().enumerate() {
        if hidden_pre[j] > 0.0 {
            let row = &mlp.w2.data[j * mlp.w2.cols..(j + 1) * mlp.w2.cols];
            *dj = row.iter().zip(dout).map(|(&w, &gv)| w * gv).sum();
        }
    }
    for (t, &it) in input.iter().enumerate() {
        if it != 0.0 {
            let row = &mut g.w1.data[t * g.w1.cols..(t + 1) * g.w1.cols];
            for (w, &dj) in row.iter_mut().zip(&dhid) {
                *w += it * dj;
            }
        }
    }
    for (b, &dj) in g.b1.iter_mut().zip(&dhid) {
        *b += dj;
    }
    let mut dinput = vec![0.0; mlp.w1.rows];
    for (t, di) in dinput.iter_mut().enumerate() {
        let row = &mlp.w1.data[t * mlp.w1.cols..(t + 1) * mlp.w1.cols];
        *di = row.iter().zip(&dhid).map(|(&w, &dj)| w * dj).sum();
    }
    dinput
}

/// Mean cross-entropy over `batch` plus gradients for every weight, bias,
/// and eps, by reverse accumulation through the layered recurrence.
pub fn gradients(
    m: &LayeredMatrices,
    tasks: &[GraphTask],
    batch: &[usize],
    p: &MlpStack,
    par: Parallelism,
) -> Result<(f64, Grads)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let fwd = forward_dag(m, p, &DagAnchor::Initial, par)?;
    let n = m.num_nodes;
    let d = p.embed_dim;
    let scale = 1.0 / batch.len() as f64;

    let mut grads = Grads {
        mlps: std::iter::once(&p.mlp0)
            .chain(p.layers.iter())
            .map(MlpGrad::zeros_like)
            .collect(),
        eps: vec![0.0; p.eps.len()],
        head_w: Mat::zeros(p.head_w.rows, p.head_w.cols),
        head_b: vec![0.0; p.head_b.len()],
    };
    let mut dx = Mat::zeros(n, d);
    let mut loss = 0.0;

    for &gi in batch {
        let task = &tasks[gi];
        let class = task
            .class
            .ok_or_else(|| Error::Data(format!("graph {gi} has no class target")))?
            as usize;
        let (r, z) = logits_for(&fwd.x, task, p)?;
        let (l, probs) = cross_entropy(&z, class);
        loss += l * scale;
        let mut dz: Vec<f64> = probs;
        dz[class] -= 1.0;
        for v in &mut dz {
            *v *= scale;
        }
        for (t, &rt) in r.iter().enumerate() {
            if rt != 0.0 {
                let row = &mut grads.head_w.data[t * grads.head_w.cols..(t + 1) * grads.head_w.cols];
                for (w, &gz) in row.iter_mut().zip(&dz) {
                    *w += rt * gz;
                }
            }
        }
        for (b, &gz) in grads.head_b.iter_mut().zip(&dz) {
            *b += gz;
        }
        let mut dr = vec![0.0; d];
        for (t, dv) in dr.iter_mut().enumerate() {
            let row = &p.head_w.data[t * p.head_w.cols..(t + 1) * p.head_w.cols];
            *dv = row.iter().zip(&dz).map(|(&w, &gz)| w * gz).sum();
        }
        // Readout backward: distribute dr over the pooled root rows.
        let heights = &task.roots_by_height;
        match p.readout {
            Readout::FixedSingleHeight => {
                let rows = heights.last().expect("checked in forward readout");
                let w = match p.pool {
                    Pool::Mean => 1.0 / rows.len() as f64,
                    Pool::Sum => 1.0,
                };
                for &row in rows {
                    for (o, &dv) in dx.row_mut(row).iter_mut().zip(&dr) {
                        *o += w * dv;
                    }
                }
            }
            Readout::CombineHeights => {
                let hw = 1.0 / heights.len() as f64;
                for rows in heights {
                    let w = hw
                        * match p.pool {
                            Pool::Mean => 1.0 / rows.len() as f64,
                            Pool::Sum => 1.0,
                        };
                    for &row in rows {
                        for (o, &dv) in dx.row_mut(row).iter_mut().zip(&dr) {
                            *o += w * dv;
                        }
                    }
                }
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }

    // Layers top-down: children live strictly below, so dx rows are final
    // when their layer is reached.
    let mut dfp = Mat::zeros(n, d);
    for i in (1..=m.height).rev() {
        let mlp = &p.layers[i - 1];
        let eps = p.eps[i - 1];
        for (v, children) in &m.e_rows[i - 1] {
            let gout = dx.row(*v).to_vec();
            if gout.iter().all(|&g| g == 0.0) {
                continue;
            }
            let ds = mlp_backward_row(
                mlp,
                fwd.s.row(*v),
                fwd.h.row(*v),
                fwd.a.row(*v),
                &gout,
                &mut grads.mlps[i],
            );
            grads.eps[i - 1] += fwd
                .fp
                .row(*v)
                .iter()
                .zip(&ds)
                .map(|(&f, &g)| f * g)
                .sum::<f64>();
            let anchor_scale = 1.0 + eps;
            for (o, &g) in dfp.row_mut(*v).iter_mut().zip(&ds) {
                *o += anchor_scale * g;
            }
            for &(u, mult) in children {
                for (o, &g) in dx.row_mut(u).iter_mut().zip(&ds) {
                    *o += mult * g;
                }
            }
        }
    }
    for &v in &m.l[0] {
        let gout = dx.row(v).to_vec();
        for (o, &g) in dfp.row_mut(v).iter_mut().zip(&gout) {
            *o += g;
        }
    }
    for v in 0..n {
        let gout = dfp.row(v).to_vec();
        if gout.iter().all(|&g| g == 0.0) {
            continue;
        }
        mlp_backward_row(
            &p.mlp0,
            &m.f[v],
            fwd.h0.row(v),
            fwd.a0.row(v),
            &gout,
            &mut grads.mlps[0],
        );
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    /// Classical momentum with the given coefficient.
    Momentum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    CrossEntropy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// 0 trains full-batch; otherwise seeded-shuffle minibatches.
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub loss: LossKind,
    /// Stop once training accuracy reaches this value.
    pub stop_at_train_acc: Option<f64>,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Argument(format!("learning rate {} not positive", self.lr)));
        }
        Ok(())
    }
}

/// Momentum buffers, one velocity per parameter.
pub struct Velocity(Vec<f64>);

impl Velocity {
    pub fn zeros(p: &MlpStack) -> Self {
        Velocity(vec![0.0; p.num_params()])
    }
}

/// One optimizer step on `batch`. Returns the pre-step batch loss; on a
/// non-finite loss no parameter changes.
pub fn backward_and_step(
    m: &LayeredMatrices,
    tasks: &[GraphTask],
    batch: &[usize],
    p: &mut MlpStack,
    vel: &mut Velocity,
    cfg: &TrainConfig,
    par: Parallelism,
) -> Result<f64> {
    cfg.validate()?;
    let (loss, grads) = gradients(m, tasks, batch, p, par)?;
    let gflat = grads.flatten();
    if gflat.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let mut params = p.flatten_params();
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (w, &g) in params.iter_mut().zip(&gflat) {
                *w -= cfg.lr * g;
            }
        }
        Optimizer::Momentum(mu) => {
            for ((w, v), &g) in params.iter_mut().zip(&mut vel.0).zip(&gflat) {
                *v = mu * *v + g;
                *w -= cfg.lr * *v;
            }
        }
    }
    p.load_params(&params)?;
    Ok(loss)
}

/// One metrics row; `split` is "train" or "eval".
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
}

/// Full training loop over all tasks. Emits an epoch-0 row for the initial
/// parameters, then one row per epoch; stops early at the configured
/// training accuracy.
pub fn train(
    m: &LayeredMatrices,
    tasks: &[GraphTask],
    p: &mut MlpStack,
    cfg: &TrainConfig,
    par: Parallelism,
) -> Result<Vec<EpochRow>> {
    cfg.validate()?;
    let all: Vec<usize> = (0..tasks.len()).collect();
    let mut vel = Velocity::zeros(p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut rows = Vec::new();
    let eval = evaluate(m, tasks, &all, p, par)?;
    rows.push(EpochRow { epoch: 0, split: "train", loss: eval.loss, accuracy: eval.accuracy });
    if let Some(target) = cfg.stop_at_train_acc {
        if eval.accuracy >= target {
            return Ok(rows);
        }
    }
    for epoch in 1..=cfg.epochs {
        if cfg.batch_size == 0 || cfg.batch_size >= tasks.len() {
            backward_and_step(m, tasks, &all, p, &mut vel, cfg, par)?;
        } else {
            let mut order = all.clone();
            // Fisher-Yates driven by the run seed, reproducible per epoch.
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.batch_size) {
                backward_and_step(m, tasks, chunk, p, &mut vel, cfg, par)?;
            }
        }
        let eval = evaluate(m, tasks, &all, p, par)?;
        rows.push(EpochRow { epoch, split: "train", loss: eval.loss, accuracy: eval.accuracy });
        if let Some(target) = cfg.stop_at_train_acc {
            if eval.accuracy >= target {
                break;
            }
        }
    }
    Ok(rows)
}

/// Renders metrics rows as the CSV stream `epoch,split,loss,accuracy`.
pub fn metrics_csv(rows: &[EpochRow]) -> String {
    let mut out = String::from("epoch,split,loss,accuracy\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.split, r.loss, r.accuracy));
    }
    out
}

/// Anchor choice for plain per-vertex message passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GinAnchor {
    /// (1 + eps) multiplies the previous layer's own embedding.
    Previous,
    /// (1 + eps) multiplies the initial embedding x_0.
    Initial,
}

/// Per-vertex message passing on the graph itself:
/// x_i(v) = MLP_i((1 + eps_i) * anchor + sum_{u in N(v)} x_{i-1}(u)).
/// Returns x_0..x_L, one row per vertex. The head is not applied.
pub fn forward_gin(
    g: &LabeledGraph,
    features: &Mat,
    p: &MlpStack,
    anchor: GinAnchor,
) -> Result<Vec<Mat>> {
    if features.rows != g.n() || features.cols != p.mlp0.din() {
        return Err(Error::Argument("feature matrix shape mismatch".into()));
    }
    let d = p.embed_dim;
    let dh = p.mlp0.b1.len();
    let mut x0 = Mat::zeros(g.n(), d);
    let mut h = vec![0.0; dh];
    let mut a = vec![0.0; dh];
    for v in 0..g.n() {
        let mut out = vec![0.0; d];
        p.mlp0.apply(features.row(v), &mut h, &mut a, &mut out);
        x0.row_mut(v).copy_from_slice(&out);
    }
    let mut layers = vec![x0];
    for (i, mlp) in p.layers.iter().enumerate() {
        let eps = p.eps[i];
        let prev = &layers[i];
        let first = &layers[0];
        let mut xi = Mat::zeros(g.n(), d);
        for v in 0..g.n() {
            let anchor_row = match anchor {
                GinAnchor::Previous => prev.row(v),
                GinAnchor::Initial => first.row(v),
            };
            let mut sv: Vec<f64> = anchor_row.iter().map(|&t| (1.0 + eps) * t).collect();
            for &u in g.neighbors(v) {
                for (t, &xv) in sv.iter_mut().zip(prev.row(u)) {
                    *t += xv;
                }
            }
            let mut out = vec![0.0; d];
            mlp.apply(&sv, &mut h, &mut a, &mut out);
            xi.row_mut(v).copy_from_slice(&out);
        }
        layers.push(xi);
    }
    Ok(layers)
}

/// One-hot label rows for a graph, width `label_dim`.
pub fn one_hot_features(g: &LabeledGraph, label_dim: usize) -> Mat {
    let mut f = Mat::zeros(g.n(), label_dim);
    for v in 0..g.n() {
        f.row_mut(v)[g.label(v) as usize] = 1.0;
    }
    f
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    stack: MlpStack,
}

const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint<W: std::io::Write>(p: &MlpStack, w: W) -> Result<()> {
    let file = CheckpointFile { version: CHECKPOINT_VERSION, stack: p.clone() };
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn load_checkpoint<R: std::io::Read>(r: R) -> Result<MlpStack> {
    let file: CheckpointFile = serde_json::from_reader(r)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Data(format!(
            "checkpoint version {} unsupported",
            file.version
        )));
    }
    Ok(file.stack)
}
