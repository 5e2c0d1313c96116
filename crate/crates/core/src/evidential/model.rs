use rand::Rng;

use super::dirichlet::{kl_to_uniform_grad, kl_to_uniform_unchecked};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Shared tanh encoder feeding a k-way primary head and a (k + û)-way
/// auxiliary head. All parameters live in one flat vector:
/// `[W_enc | b_enc | W_primary | b_primary | W_aux | b_aux]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DualHeadParams {
    input_dim: usize,
    hidden_dim: usize,
    known: usize,
    aux_width: usize,
    pub gamma: f64,
    pub logit_clamp: f64,
    theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w_enc: usize,
    b_enc: usize,
    w_pri: usize,
    b_pri: usize,
    w_aux: usize,
    b_aux: usize,
    len: usize,
}

impl DualHeadParams {
    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        known: usize,
        aux_width: usize,
        gamma: f64,
    ) -> Self {
        let mut p = Self {
            input_dim,
            hidden_dim,
            known,
            aux_width,
            gamma,
            logit_clamp: super::DEFAULT_LOGIT_CLAMP,
            theta: Vec::new(),
        };
        p.theta = vec![0.0; p.layout().len];
        p
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        known: usize,
        aux_width: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim, known, aux_width, gamma);
        let l = p.layout();
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut p.theta[range] {
                *v = rng.random_range(-limit..limit);
            }
        };
        fill(l.w_enc..l.b_enc, input_dim, hidden_dim);
        fill(l.w_pri..l.b_pri, hidden_dim, known);
        fill(l.w_aux..l.b_aux, hidden_dim, aux_width);
        p
    }

    fn layout(&self) -> Layout {
        let w_enc = 0;
        let b_enc = w_enc + self.hidden_dim * self.input_dim;
        let w_pri = b_enc + self.hidden_dim;
        let b_pri = w_pri + self.known * self.hidden_dim;
        let w_aux = b_pri + self.known;
        let b_aux = w_aux + self.aux_width * self.hidden_dim;
        Layout {
            w_enc,
            b_enc,
            w_pri,
            b_pri,
            w_aux,
            b_aux,
            len: b_aux + self.aux_width,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn known_classes(&self) -> usize {
        self.known
    }

    /// `k + û` (just `k` before any unknowns are labeled).
    pub fn aux_width(&self) -> usize {
        self.aux_width
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn all_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Auxiliary head bias, exposed for constructing degenerate evidence.
    pub fn aux_bias_mut(&mut self) -> &mut [f64] {
        let l = self.layout();
        &mut self.theta[l.b_aux..l.len]
    }

    fn encode(&self, x: &[f64], hidden: &mut [f64]) {
        let l = self.layout();
        let w = &self.theta[l.w_enc..l.b_enc];
        let b = &self.theta[l.b_enc..l.w_pri];
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &w[j * self.input_dim..(j + 1) * self.input_dim];
            let z: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[j];
            *h = z.tanh();
        }
    }

    fn head(w: &[f64], b: &[f64], hidden: &[f64], out: &mut [f64]) {
        let hd = hidden.len();
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * hd..(c + 1) * hd];
            *o = row.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>() + b[c];
        }
    }

    /// Primary and auxiliary logits for one input row.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = self.layout();
        let mut hidden = vec![0.0; self.hidden_dim];
        self.encode(x, &mut hidden);
        let mut primary = vec![0.0; self.known];
        let mut aux = vec![0.0; self.aux_width];
        Self::head(
            &self.theta[l.w_pri..l.b_pri],
            &self.theta[l.b_pri..l.w_aux],
            &hidden,
            &mut primary,
        );
        Self::head(
            &self.theta[l.w_aux..l.b_aux],
            &self.theta[l.b_aux..l.len],
            &hidden,
            &mut aux,
        );
        (primary, aux)
    }

    /// Logits for the given rows: `(primary, auxiliary)`, one row per index.
    pub fn forward_rows(&self, features: &Matrix, rows: &[usize]) -> (Matrix, Matrix) {
        let mut primary = Matrix::zeros(rows.len(), self.known);
        let mut aux = Matrix::zeros(rows.len(), self.aux_width);
        for (r, &i) in rows.iter().enumerate() {
            let (p, a) = self.forward(features.row(i));
            primary.row_mut(r).copy_from_slice(&p);
            aux.row_mut(r).copy_from_slice(&a);
        }
        (primary, aux)
    }
}

/// Which terms of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Cross-entropy on the primary head plus NLL + KL on the auxiliary head.
    Full,
    /// Cross-entropy on the primary head only.
    PrimaryOnly,
}

/// One training example.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a [f64],
    /// Known class, or `None` for a labeled unknown (excluded from CE).
    pub primary: Option<usize>,
    /// Auxiliary class in `[0, k + û)`.
    pub auxiliary: usize,
}

/// Loss terms averaged over the batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub ce: f64,
    pub nll: f64,
    pub kl: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.ce + self.nll + self.kl
    }
}

pub(crate) struct Workspace {
    hidden: Vec<f64>,
    primary: Vec<f64>,
    aux: Vec<f64>,
    d_primary: Vec<f64>,
    d_aux: Vec<f64>,
    d_hidden: Vec<f64>,
    alpha_tilde: Vec<f64>,
    kl_grad: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(p: &DualHeadParams) -> Self {
        Self {
            hidden: vec![0.0; p.hidden_dim],
            primary: vec![0.0; p.known],
            aux: vec![0.0; p.aux_width],
            d_primary: vec![0.0; p.known],
            d_aux: vec![0.0; p.aux_width],
            d_hidden: vec![0.0; p.hidden_dim],
            alpha_tilde: vec![0.0; p.aux_width],
            kl_grad: vec![0.0; p.aux_width],
        }
    }
}

/// `L = CE(primary) + NLL(aux) + KL(aux)` averaged over the batch, with its
/// exact gradient written into `grad` (same layout as the parameters).
pub fn total_loss(
    params: &DualHeadParams,
    batch: &[Example<'_>],
    objective: Objective,
    grad: &mut [f64],
) -> Result<LossBreakdown> {
    let mut ws = Workspace::new(params);
    total_loss_with(params, batch, objective, grad, &mut ws)
}

pub(crate) fn total_loss_with(
    params: &DualHeadParams,
    batch: &[Example<'_>],
    objective: Objective,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainingBatch);
    }
    let l = params.layout();
    if grad.len() != l.len {
        return Err(Error::invalid(
            "gradient buffer",
            format!("{} != {}", grad.len(), l.len),
        ));
    }
    for ex in batch {
        if ex.features.len() != params.input_dim
            || ex.primary.is_some_and(|c| c >= params.known)
            || ex.auxiliary >= params.aux_width
        {
            return Err(Error::invalid(
                "training example",
                "shape or label out of range",
            ));
        }
    }
    grad.iter_mut().for_each(|g| *g = 0.0);

    let hd = params.hidden_dim;
    let din = params.input_dim;
    let theta = &params.theta;
    let scale = 1.0 / batch.len() as f64;
    let gamma = params.gamma;
    let clamp = params.logit_clamp;
    let mut loss = LossBreakdown::default();

    for ex in batch {
        params.encode(ex.features, &mut ws.hidden);
        DualHeadParams::head(
            &theta[l.w_pri..l.b_pri],
            &theta[l.b_pri..l.w_aux],
            &ws.hidden,
            &mut ws.primary,
        );

        ws.d_primary.iter_mut().for_each(|v| *v = 0.0);
        if let Some(y) = ex.primary {
            let max = ws.primary.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = ws.primary.iter().map(|o| (o - max).exp()).sum();
            let log_z = z.ln() + max;
            loss.ce += (log_z - ws.primary[y]) * scale;
            for (d, o) in ws.d_primary.iter_mut().zip(&ws.primary) {
                *d = (o - log_z).exp() * scale;
            }
            ws.d_primary[y] -= scale;
        }

        ws.d_aux.iter_mut().for_each(|v| *v = 0.0);
        let use_aux = objective == Objective::Full;
        if use_aux {
            DualHeadParams::head(
                &theta[l.w_aux..l.b_aux],
                &theta[l.b_aux..l.len],
                &ws.hidden,
                &mut ws.aux,
            );
            let y = ex.auxiliary;
            // α̃ starts as α; the true class is deflated to 1 below
            let mut total_alpha = 0.0;
            for (a, o) in ws.alpha_tilde.iter_mut().zip(&ws.aux) {
                *a = o.clamp(-clamp, clamp).exp() / gamma + 1.0;
                total_alpha += *a;
            }
            let alpha_y = ws.alpha_tilde[y];
            loss.nll += (total_alpha.ln() - alpha_y.ln()) * scale;

            ws.alpha_tilde[y] = 1.0;
            loss.kl += kl_to_uniform_unchecked(&ws.alpha_tilde) * scale;
            kl_to_uniform_grad(&ws.alpha_tilde, &mut ws.kl_grad);

            for c in 0..params.aux_width {
                let o = ws.aux[c];
                if o <= -clamp || o >= clamp {
                    continue;
                }
                // dα_c/do_c = e^{o_c}/γ = α_c − 1
                let alpha_c = if c == y { alpha_y } else { ws.alpha_tilde[c] };
                let mut d_alpha = 1.0 / total_alpha;
                if c == y {
                    d_alpha -= 1.0 / alpha_y;
                } else {
                    d_alpha += ws.kl_grad[c];
                }
                ws.d_aux[c] = d_alpha * (alpha_c - 1.0) * scale;
            }
        }

        // heads → hidden
        ws.d_hidden.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..params.known {
            let d = ws.d_primary[c];
            if d == 0.0 {
                continue;
            }
            let w = &theta[l.w_pri + c * hd..l.w_pri + (c + 1) * hd];
            let gw = &mut grad[l.w_pri + c * hd..l.w_pri + (c + 1) * hd];
            for j in 0..hd {
                gw[j] += d * ws.hidden[j];
                ws.d_hidden[j] += d * w[j];
            }
            grad[l.b_pri + c] += d;
        }
        if use_aux {
            for c in 0..params.aux_width {
                let d = ws.d_aux[c];
                if d == 0.0 {
                    continue;
                }
                let w = &theta[l.w_aux + c * hd..l.w_aux + (c + 1) * hd];
                let gw = &mut grad[l.w_aux + c * hd..l.w_aux + (c + 1) * hd];
                for j in 0..hd {
                    gw[j] += d * ws.hidden[j];
                    ws.d_hidden[j] += d * w[j];
                }
                grad[l.b_aux + c] += d;
            }
        }

        // hidden → encoder
        for j in 0..hd {
            let dz = ws.d_hidden[j] * (1.0 - ws.hidden[j] * ws.hidden[j]);
            if dz == 0.0 {
                continue;
            }
            let gw = &mut grad[l.w_enc + j * din..l.w_enc + (j + 1) * din];
            for (g, x) in gw.iter_mut().zip(ex.features) {
                *g += dz * x;
            }
            grad[l.b_enc + j] += dz;
        }
    }
    Ok(loss)
}
