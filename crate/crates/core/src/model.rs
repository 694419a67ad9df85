//! MuRE and MuRP score functions over a shared parameter container.
//!
//! Both models score a triple as `-dist(subject', object')^2 + b_s + b_o`,
//! where the subject is stretched by a diagonal relation matrix and the
//! object is translated by a relation vector. MuRE does this in Euclidean
//! space; MuRP uses Möbius matrix-vector multiplication and Möbius addition
//! in the Poincaré ball.
//!
//! Gradients are derived by hand. They are returned in the ambient Euclidean
//! sense; ball-constrained parameters still need the Riemannian rescaling that
//! the trainer applies.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{artanh_ratio, dot, norm, norm_sq, Curvature, PoincareBall, CLAMP_EPS};

/// Which space the embeddings live in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryKind {
    Euclidean,
    Poincare(Curvature),
}

impl GeometryKind {
    pub fn ball(&self) -> Option<PoincareBall> {
        match self {
            GeometryKind::Euclidean => None,
            GeometryKind::Poincare(c) => Some(PoincareBall::new(*c)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Poincare(_) => "poincare",
        }
    }
}

/// Logistic sigmoid, stable for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Bernoulli negative log-likelihood of a single score.
#[inline]
pub fn sample_loss(score: f64, label: f64) -> f64 {
    // -y log σ(φ) - (1 - y) log(1 - σ(φ))
    label * softplus(-score) + (1.0 - label) * softplus(score)
}

/// A triple score `φ`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn probability(self) -> f64 {
        sigmoid(self.0)
    }
}

/// Per-sample gradients of the Bernoulli NLL with respect to every parameter
/// that the sample touches.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
    pub score: f64,
    pub loss: f64,
    /// Gradient for entity row `subject`.
    pub subject_emb: Vec<f64>,
    /// Gradient for entity row `object`; add to `subject_emb` when both ids coincide.
    pub object_emb: Vec<f64>,
    pub rel_diag: Vec<f64>,
    pub rel_trans: Vec<f64>,
    pub bias_subject: f64,
    pub bias_object: f64,
}

/// Embedding tables for both models.
///
/// Matrices are stored row-major. Under Poincaré geometry the rows of
/// `entity_emb` and `rel_trans` are points of the ball; `rel_diag` and the
/// biases are ordinary reals for both geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub geometry: GeometryKind,
    pub dim: usize,
    pub n_entities: usize,
    pub n_relations: usize,
    pub entity_emb: Vec<f64>,
    pub rel_diag: Vec<f64>,
    pub rel_trans: Vec<f64>,
    pub bias_subject: Vec<f64>,
    pub bias_object: Vec<f64>,
}

impl ModelParams {
    /// All-zero embeddings, identity relation matrices, zero biases.
    pub fn zeros(geometry: GeometryKind, n_entities: usize, n_relations: usize, dim: usize) -> Self {
        Self {
            geometry,
            dim,
            n_entities,
            n_relations,
            entity_emb: vec![0.0; n_entities * dim],
            rel_diag: vec![1.0; n_relations * dim],
            rel_trans: vec![0.0; n_relations * dim],
            bias_subject: vec![0.0; n_entities],
            bias_object: vec![0.0; n_entities],
        }
    }

    /// Entity and translation components uniform in `[-init_scale, init_scale]`,
    /// relation diagonals all ones, biases zero.
    pub fn init<R: Rng + ?Sized>(
        geometry: GeometryKind,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(geometry, n_entities, n_relations, dim);
        if init_scale > 0.0 {
            for v in p.entity_emb.iter_mut().chain(p.rel_trans.iter_mut()) {
                *v = rng.gen_range(-init_scale..=init_scale);
            }
        }
        p.project_all();
        p
    }

    #[inline]
    pub fn entity(&self, e: usize) -> &[f64] {
        &self.entity_emb[e * self.dim..(e + 1) * self.dim]
    }

    #[inline]
    pub fn entity_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.entity_emb[e * self.dim..(e + 1) * self.dim]
    }

    #[inline]
    pub fn diag(&self, r: usize) -> &[f64] {
        &self.rel_diag[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn diag_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.rel_diag[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn translation(&self, r: usize) -> &[f64] {
        &self.rel_trans[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn translation_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.rel_trans[r * self.dim..(r + 1) * self.dim]
    }

    /// Re-project every ball-constrained row. No-op for Euclidean models.
    pub fn project_all(&mut self) {
        if let Some(ball) = self.geometry.ball() {
            let d = self.dim;
            for row in self.entity_emb.chunks_mut(d).chain(self.rel_trans.chunks_mut(d)) {
                ball.project(row);
            }
        }
    }

    /// True if every ball-constrained row is within the projection shell.
    pub fn is_feasible(&self) -> bool {
        match self.geometry.ball() {
            None => true,
            Some(ball) => {
                let lim = ball.max_norm() * (1.0 + 1e-12);
                self.entity_emb
                    .chunks(self.dim)
                    .chain(self.rel_trans.chunks(self.dim))
                    .all(|row| norm(row) <= lim)
            }
        }
    }

    pub fn check_ids(&self, s: usize, r: usize, o: usize) -> Result<()> {
        for (kind, id, len) in [
            ("entity", s, self.n_entities),
            ("relation", r, self.n_relations),
            ("entity", o, self.n_entities),
        ] {
            if id >= len {
                return Err(Error::IdOutOfRange { kind, id, len });
            }
        }
        Ok(())
    }

    /// Score of `(s, r, o)` under the model's geometry.
    pub fn score(&self, s: usize, r: usize, o: usize) -> Result<Score> {
        self.check_ids(s, r, o)?;
        Ok(Score(self.score_unchecked(s, r, o)))
    }

    pub fn score_unchecked(&self, s: usize, r: usize, o: usize) -> f64 {
        let q = self.prepare_query(s, r);
        q.score(self, o, &mut QueryScratch::new(self.dim))
    }

    /// Precompute the relation-adjusted subject for scoring many objects.
    pub fn prepare_query(&self, s: usize, r: usize) -> PreparedQuery {
        let d = self.dim;
        let hs = self.entity(s);
        let diag = self.diag(r);
        let subject = match self.geometry.ball() {
            None => hs.iter().zip(diag).map(|(e, m)| e * m).collect(),
            Some(ball) => {
                let mut out = vec![0.0; d];
                ball.mobius_matvec_into(diag, hs, &mut out);
                // Stored negated: the distance needs (-subject') ⊕ object'.
                out.iter_mut().for_each(|v| *v = -*v);
                out
            }
        };
        PreparedQuery {
            relation: r,
            subject_bias: self.bias_subject[s],
            subject,
        }
    }

    /// Per-sample loss gradients for label `y` in `{0, 1}`.
    pub fn score_gradients(&self, s: usize, r: usize, o: usize, label: f64) -> Result<GradientBundle> {
        self.check_ids(s, r, o)?;
        Ok(match self.geometry.ball() {
            None => self.mure_gradients(s, r, o, label),
            Some(ball) => self.murp_gradients(&ball, s, r, o, label),
        })
    }

    fn mure_gradients(&self, s: usize, r: usize, o: usize, label: f64) -> GradientBundle {
        let d = self.dim;
        let es = self.entity(s);
        let eo = self.entity(o);
        let diag = self.diag(r);
        let tr = self.translation(r);
        let diff: Vec<f64> = (0..d).map(|i| diag[i] * es[i] - eo[i] - tr[i]).collect();
        let score = -norm_sq(&diff) + self.bias_subject[s] + self.bias_object[o];
        let g = sigmoid(score) - label;
        let object_emb: Vec<f64> = diff.iter().map(|x| 2.0 * g * x).collect();
        GradientBundle {
            subject: s,
            relation: r,
            object: o,
            score,
            loss: sample_loss(score, label),
            subject_emb: (0..d).map(|i| -2.0 * g * diag[i] * diff[i]).collect(),
            rel_diag: (0..d).map(|i| -2.0 * g * es[i] * diff[i]).collect(),
            rel_trans: object_emb.clone(),
            object_emb,
            bias_subject: g,
            bias_object: g,
        }
    }

    fn murp_gradients(&self, ball: &PoincareBall, s: usize, r: usize, o: usize, label: f64) -> GradientBundle {
        let d = self.dim;
        let sqrt_c = ball.sqrt_c();
        let hs = self.entity(s);
        let ho = self.entity(o);
        let diag = self.diag(r);
        let rh = self.translation(r);

        // Forward pass, keeping intermediates.
        let hs_norm = norm(hs);
        let mut u = vec![0.0; d];
        ball.log0_into(hs, &mut u);
        let w: Vec<f64> = u.iter().zip(diag).map(|(a, b)| a * b).collect();
        let w_norm = norm(&w);
        let mut a = vec![0.0; d];
        ball.exp0_into(&w, &mut a);
        let mut b_raw = vec![0.0; d];
        ball.mobius_add_raw_into(ho, rh, &mut b_raw);
        let mut b = b_raw.clone();
        ball.project(&mut b);
        let neg_a: Vec<f64> = a.iter().map(|v| -v).collect();
        let mut m = vec![0.0; d];
        ball.mobius_add_raw_into(&neg_a, &b, &mut m);
        let z = (sqrt_c * norm(&m)).min(1.0 - CLAMP_EPS);
        let dist = 2.0 / sqrt_c * z.atanh();
        let score = -dist * dist + self.bias_subject[s] + self.bias_object[o];
        let g = sigmoid(score) - label;

        // d loss / d m = g * (-2 dist) * d dist/dm, with d dist/dm = 2/(1-z^2) m/|m|.
        let coef = -8.0 * g * artanh_ratio(z) / (1.0 - z * z);
        let cot_m: Vec<f64> = m.iter().map(|v| coef * v).collect();

        let mut g_neg_a = vec![0.0; d];
        let mut g_b = vec![0.0; d];
        ball.mobius_add_vjp(&neg_a, &b, &m, &cot_m, &mut g_neg_a, &mut g_b);

        let mut object_emb = vec![0.0; d];
        let mut rel_trans = vec![0.0; d];
        ball.mobius_add_vjp(ho, rh, &b_raw, &g_b, &mut object_emb, &mut rel_trans);

        // a = exp_0(w): Jacobian is s(t) I + (s'(t)/t) w w^T.
        let se = ball.exp0_scale(w_norm);
        let qe = ball.exp0_scale_deriv_over_t(w_norm);
        // g_a = -g_neg_a
        let wga = -dot(&w, &g_neg_a);
        let g_w: Vec<f64> = (0..d).map(|i| -se * g_neg_a[i] + qe * wga * w[i]).collect();

        let rel_diag: Vec<f64> = (0..d).map(|i| u[i] * g_w[i]).collect();
        let g_u: Vec<f64> = (0..d).map(|i| diag[i] * g_w[i]).collect();

        let sl = ball.log0_scale(hs_norm);
        let ql = ball.log0_scale_deriv_over_t(hs_norm);
        let hgu = dot(hs, &g_u);
        let subject_emb: Vec<f64> = (0..d).map(|i| sl * g_u[i] + ql * hgu * hs[i]).collect();

        GradientBundle {
            subject: s,
            relation: r,
            object: o,
            score,
            loss: sample_loss(score, label),
            subject_emb,
            object_emb,
            rel_diag,
            rel_trans,
            bias_subject: g,
            bias_object: g,
        }
    }

    /// Loss gradients for samples `(o, y)` that share subject `s` and relation
    /// `r`, summed over the samples.
    ///
    /// Subject, diagonal, translation and subject-bias sums are left in `ws`;
    /// each object's embedding and bias gradients are passed to `on_object`.
    /// Returns the summed loss. Ids must be in range.
    pub fn group_gradients<F>(
        &self,
        s: usize,
        r: usize,
        samples: &[(usize, f64)],
        ws: &mut GroupScratch,
        on_object: F,
    ) -> f64
    where
        F: FnMut(usize, &[f64], f64),
    {
        ws.reset(self.dim);
        match self.geometry.ball() {
            None => self.mure_group(s, r, samples, ws, on_object),
            Some(ball) => self.murp_group(&ball, s, r, samples, ws, on_object),
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn mure_group<F>(
        &self,
        s: usize,
        r: usize,
        samples: &[(usize, f64)],
        ws: &mut GroupScratch,
        mut on_object: F,
    ) -> f64
    where
        F: FnMut(usize, &[f64], f64),
    {
        let d = self.dim;
        let es = self.entity(s);
        let diag = self.diag(r);
        let tr = self.translation(r);
        for i in 0..d {
            ws.a[i] = diag[i] * es[i] - tr[i];
        }
        let mut loss = 0.0;
        for &(o, y) in samples {
            let eo = self.entity(o);
            for i in 0..d {
                ws.m[i] = ws.a[i] - eo[i];
            }
            let score = -norm_sq(&ws.m) + self.bias_subject[s] + self.bias_object[o];
            let g = sigmoid(score) - y;
            loss += sample_loss(score, y);
            ws.bias_subject += g;
            for i in 0..d {
                let t = 2.0 * g * ws.m[i];
                ws.g_obj[i] = t;
                ws.rel_trans[i] += t;
                ws.g_a[i] -= t;
            }
            on_object(o, &ws.g_obj, g);
        }
        // a = diag * e_s - r, so d/d e_s = diag * g_a and d/d diag = e_s * g_a.
        for i in 0..d {
            ws.subject_emb[i] = diag[i] * ws.g_a[i];
            ws.rel_diag[i] = es[i] * ws.g_a[i];
        }
        loss
    }

    #[allow(clippy::needless_range_loop)]
    fn murp_group<F>(
        &self,
        ball: &PoincareBall,
        s: usize,
        r: usize,
        samples: &[(usize, f64)],
        ws: &mut GroupScratch,
        mut on_object: F,
    ) -> f64
    where
        F: FnMut(usize, &[f64], f64),
    {
        let d = self.dim;
        let sqrt_c = ball.sqrt_c();
        let hs = self.entity(s);
        let diag = self.diag(r);
        let rh = self.translation(r);

        ball.log0_into(hs, &mut ws.u);
        for i in 0..d {
            ws.w[i] = ws.u[i] * diag[i];
        }
        let w_norm = norm(&ws.w);
        ball.exp0_into(&ws.w, &mut ws.a);
        ws.a.iter_mut().for_each(|v| *v = -*v);

        let mut loss = 0.0;
        for &(o, y) in samples {
            let ho = self.entity(o);
            ball.mobius_add_raw_into(ho, rh, &mut ws.b_raw);
            ws.b.copy_from_slice(&ws.b_raw);
            ball.project(&mut ws.b);
            ball.mobius_add_raw_into(&ws.a, &ws.b, &mut ws.m);
            let z = (sqrt_c * norm(&ws.m)).min(1.0 - CLAMP_EPS);
            let dist = 2.0 / sqrt_c * z.atanh();
            let score = -dist * dist + self.bias_subject[s] + self.bias_object[o];
            let g = sigmoid(score) - y;
            loss += sample_loss(score, y);
            ws.bias_subject += g;

            let coef = -8.0 * g * artanh_ratio(z) / (1.0 - z * z);
            for i in 0..d {
                ws.cot[i] = coef * ws.m[i];
            }
            ws.g_b.iter_mut().for_each(|v| *v = 0.0);
            ball.mobius_add_vjp(&ws.a, &ws.b, &ws.m, &ws.cot, &mut ws.g_a, &mut ws.g_b);
            ws.g_obj.iter_mut().for_each(|v| *v = 0.0);
            ball.mobius_add_vjp(ho, rh, &ws.b_raw, &ws.g_b, &mut ws.g_obj, &mut ws.rel_trans);
            on_object(o, &ws.g_obj, g);
        }

        // ws.a holds -exp_0(w) and ws.g_a its cotangent, so the cotangent of exp_0(w) is -g_a.
        let se = ball.exp0_scale(w_norm);
        let qe = ball.exp0_scale_deriv_over_t(w_norm);
        let wga = -dot(&ws.w, &ws.g_a);
        for i in 0..d {
            let g_w = -se * ws.g_a[i] + qe * wga * ws.w[i];
            ws.rel_diag[i] = ws.u[i] * g_w;
            ws.cot[i] = diag[i] * g_w;
        }
        let hs_norm = norm(hs);
        let sl = ball.log0_scale(hs_norm);
        let ql = ball.log0_scale_deriv_over_t(hs_norm);
        let hgu = dot(hs, &ws.cot);
        for i in 0..d {
            ws.subject_emb[i] = sl * ws.cot[i] + ql * hgu * hs[i];
        }
        loss
    }
}

/// MuRE score. Fails if the model is not Euclidean.
pub fn score_mure(params: &ModelParams, s: usize, r: usize, o: usize) -> Result<Score> {
    match params.geometry {
        GeometryKind::Euclidean => params.score(s, r, o),
        _ => Err(Error::InvalidArgument("score_mure needs a Euclidean model".into())),
    }
}

/// MuRP score. Fails if the model is not Poincaré.
pub fn score_murp(params: &ModelParams, s: usize, r: usize, o: usize) -> Result<Score> {
    match params.geometry {
        GeometryKind::Poincare(_) => params.score(s, r, o),
        _ => Err(Error::InvalidArgument("score_murp needs a Poincaré model".into())),
    }
}

/// Relation-adjusted subject for one `(s, r)` query.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    relation: usize,
    subject_bias: f64,
    // Euclidean: R e_s. Poincaré: -(R ⊗ h_s).
    subject: Vec<f64>,
}

/// Reusable buffers and outputs for [`ModelParams::group_gradients`].
#[derive(Debug, Clone, Default)]
pub struct GroupScratch {
    pub subject_emb: Vec<f64>,
    pub rel_diag: Vec<f64>,
    pub rel_trans: Vec<f64>,
    pub bias_subject: f64,
    u: Vec<f64>,
    w: Vec<f64>,
    a: Vec<f64>,
    g_a: Vec<f64>,
    b_raw: Vec<f64>,
    b: Vec<f64>,
    g_b: Vec<f64>,
    m: Vec<f64>,
    cot: Vec<f64>,
    g_obj: Vec<f64>,
}

impl GroupScratch {
    pub fn new(dim: usize) -> Self {
        let mut ws = Self::default();
        ws.reset(dim);
        ws
    }

    fn reset(&mut self, dim: usize) {
        for v in [
            &mut self.subject_emb,
            &mut self.rel_diag,
            &mut self.rel_trans,
            &mut self.u,
            &mut self.w,
            &mut self.a,
            &mut self.g_a,
            &mut self.b_raw,
            &mut self.b,
            &mut self.g_b,
            &mut self.m,
            &mut self.cot,
            &mut self.g_obj,
        ] {
            v.clear();
            v.resize(dim, 0.0);
        }
        self.bias_subject = 0.0;
    }
}

/// Reusable buffers for [`PreparedQuery::score`].
#[derive(Debug, Clone)]
pub struct QueryScratch {
    obj: Vec<f64>,
    diff: Vec<f64>,
}

impl QueryScratch {
    pub fn new(dim: usize) -> Self {
        Self {
            obj: vec![0.0; dim],
            diff: vec![0.0; dim],
        }
    }
}

impl PreparedQuery {
    /// Score of the prepared query against object `o`.
    pub fn score(&self, params: &ModelParams, o: usize, scratch: &mut QueryScratch) -> f64 {
        let eo = params.entity(o);
        let tr = params.translation(self.relation);
        let dist_sq = match params.geometry.ball() {
            None => self
                .subject
                .iter()
                .zip(eo)
                .zip(tr)
                .map(|((u, e), t)| {
                    let x = u - e - t;
                    x * x
                })
                .sum(),
            Some(ball) => {
                ball.mobius_add_into(eo, tr, &mut scratch.obj);
                ball.mobius_add_raw_into(&self.subject, &scratch.obj, &mut scratch.diff);
                let dist = ball.distance_from_norm(norm(&scratch.diff));
                dist * dist
            }
        };
        -dist_sq + self.subject_bias + params.bias_object[o]
    }
}
