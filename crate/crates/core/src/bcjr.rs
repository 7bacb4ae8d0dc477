//! Soft-in/soft-out trellis decoding for tail-biting blocks, with a
//! hand-derived reverse-mode adjoint.
//!
//! The decoder runs the classic forward-backward recursion in the log
//! domain. Branch metrics combine up to three sources: an a priori LLR on
//! the transition's input bit, a priori LLRs on the coded bits (bipolar
//! tables only), and a Gaussian channel term on real observations. Two ways
//! of handling the circular block boundary are provided: an extended
//! wrap-around window with uniform state beliefs at its ends (differentiable,
//! used inside iterative decoding) and an exact mode that pins each possible
//! boundary state in turn and combines the passes (the reference for
//! oracle-level comparisons; no adjoint).

use crate::tensor::{wrap_index, Tensor};
use crate::trellis::Trellis;
use crate::{Error, Result, Scalar};

/// A priori LLRs are clamped to this magnitude on entry.
pub const LLR_CLIP: f64 = 60.0;

/// Anchored decoding caps: one constrained pass per state.
const ANCHORED_MAX_MEMORY: usize = 12;
const ANCHORED_MAX_LEN: usize = 512;

/// Exact log-domain pairwise sum or its max approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxStarMode {
    LogMap,
    MaxLog,
}

/// Boundary handling for circular blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapMode {
    /// Decode the block extended by `steps` positions on each side, with
    /// uniform state beliefs at the extended ends; the extension is
    /// discarded. Approximate but differentiable.
    Wrap { steps: usize },
    /// One constrained pass per boundary state, combined exactly. The
    /// reference answer for tail-biting blocks; no adjoint.
    Anchored,
}

#[derive(Debug, Clone, Copy)]
pub struct BcjrConfig {
    pub mode: MaxStarMode,
    pub wrap: WrapMode,
    /// Channel noise variance per real dimension (used only when channel
    /// observations are supplied).
    pub sigma2: f64,
    /// Scale on extrinsic outputs, in `(0, 1]`.
    pub damping: f64,
}

impl BcjrConfig {
    /// Default damping: 1 for exact log-domain sums, 0.75 for max-only
    /// (which overestimates reliability and needs the brake).
    pub fn new(mode: MaxStarMode, wrap: WrapMode, sigma2: f64) -> Self {
        let damping = match mode {
            MaxStarMode::LogMap => 1.0,
            MaxStarMode::MaxLog => 0.75,
        };
        BcjrConfig {
            mode,
            wrap,
            sigma2,
            damping,
        }
    }

    fn validate(&self, has_channel: bool) -> Result<()> {
        if has_channel && !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be positive and finite, got {}",
                self.sigma2
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// `log(e^x + e^y)`, exactly or as `max(x, y)`.
pub fn max_star<S: Scalar>(x: S, y: S, mode: MaxStarMode) -> S {
    if x == S::neg_infinity() {
        return y;
    }
    if y == S::neg_infinity() {
        return x;
    }
    let m = x.max(y);
    match mode {
        MaxStarMode::MaxLog => m,
        MaxStarMode::LogMap => m + (-(x - y).abs()).exp().ln_1p(),
    }
}

fn clip_llr<S: Scalar>(v: S) -> S {
    let c = S::of(LLR_CLIP);
    v.max(-c).min(c)
}

/// Derivative of the entry clamp (pass-through on the closed interval).
fn clip_mask<S: Scalar>(v: S) -> S {
    if v.abs() <= S::of(LLR_CLIP) {
        S::one()
    } else {
        S::zero()
    }
}

/// Soft inputs of one decode. All present sources must agree on the block
/// length `n`; at least one must be present.
#[derive(Debug, Clone, Copy)]
pub struct BcjrInput<'a, S> {
    /// Real channel observations, `n x depth`, indexed by coded position.
    pub channel: Option<&'a Tensor<S>>,
    /// A priori LLRs on coded bits, `n x depth` (bipolar trellises only).
    pub coded_apriori: Option<&'a Tensor<S>>,
    /// A priori LLRs on input bits, indexed by input position.
    pub input_apriori: Option<&'a [S]>,
}

impl<'a, S: Scalar> BcjrInput<'a, S> {
    pub fn channel_only(y: &'a Tensor<S>) -> Self {
        BcjrInput {
            channel: Some(y),
            coded_apriori: None,
            input_apriori: None,
        }
    }

    pub fn coded_only(llrs: &'a Tensor<S>) -> Self {
        BcjrInput {
            channel: None,
            coded_apriori: Some(llrs),
            input_apriori: None,
        }
    }

    fn block_len(&self) -> Result<usize> {
        let candidates = [
            self.channel.map(Tensor::positions),
            self.coded_apriori.map(Tensor::positions),
            self.input_apriori.map(<[S]>::len),
        ];
        let mut n = None;
        for c in candidates.into_iter().flatten() {
            match n {
                None => n = Some(c),
                Some(seen) if seen != c => {
                    return Err(Error::invalid(format!(
                        "soft inputs disagree on block length ({seen} vs {c})"
                    )))
                }
                _ => {}
            }
        }
        n.ok_or_else(|| Error::invalid("no soft input supplied"))
    }
}

/// Which LLR outputs to produce.
#[derive(Debug, Clone, Copy)]
pub struct LlrRequest {
    /// LLRs on the trellis's own input (uncoded) bits.
    pub input: bool,
    /// LLRs on the coded bits (bipolar trellises only).
    pub coded: bool,
}

impl LlrRequest {
    pub const INPUT: LlrRequest = LlrRequest {
        input: true,
        coded: false,
    };
    pub const CODED: LlrRequest = LlrRequest {
        input: false,
        coded: true,
    };
    pub const BOTH: LlrRequest = LlrRequest {
        input: true,
        coded: true,
    };
}

/// Soft outputs of one decode. Posteriors are full bit beliefs; extrinsics
/// subtract the matching a priori input and apply damping.
#[derive(Debug, Clone)]
pub struct BcjrOutput<S> {
    pub input_posterior: Option<Vec<S>>,
    pub input_extrinsic: Option<Vec<S>>,
    pub coded_posterior: Option<Tensor<S>>,
    pub coded_extrinsic: Option<Tensor<S>>,
}

/// Saved intermediates of a wrap-mode decode, consumed by the adjoint.
#[derive(Debug, Clone)]
pub struct BcjrState<S> {
    n: usize,
    w: usize,
    /// `n + 2w` rows of per-transition branch metrics.
    gammas: Vec<Vec<S>>,
    /// `n + 2w + 1` rows of normalized forward path metrics.
    alphas: Vec<Vec<S>>,
    /// `n + 2w + 1` rows of normalized backward path metrics.
    betas: Vec<Vec<S>>,
}

/// Upstream loss gradients on whichever outputs were used.
#[derive(Debug, Clone, Copy)]
pub struct BcjrUpstream<'a, S> {
    pub input_posterior: Option<&'a [S]>,
    pub input_extrinsic: Option<&'a [S]>,
    pub coded_posterior: Option<&'a Tensor<S>>,
    pub coded_extrinsic: Option<&'a Tensor<S>>,
}

impl<S> Default for BcjrUpstream<'_, S> {
    fn default() -> Self {
        BcjrUpstream {
            input_posterior: None,
            input_extrinsic: None,
            coded_posterior: None,
            coded_extrinsic: None,
        }
    }
}

/// Gradients with respect to every soft input and the symbol table.
#[derive(Debug, Clone)]
pub struct BcjrGrads<S> {
    pub channel: Option<Tensor<S>>,
    pub coded_apriori: Option<Tensor<S>>,
    pub input_apriori: Option<Vec<S>>,
    /// `transitions x depth`, matching the trellis output table.
    pub symbols: Tensor<S>,
}

fn validate<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    want: &LlrRequest,
) -> Result<usize> {
    cfg.validate(input.channel.is_some())?;
    let n = input.block_len()?;
    if n < trellis.memory() + 1 {
        return Err(Error::invalid(format!(
            "block of {n} positions is shorter than the {}-bit trellis window",
            trellis.memory() + 1
        )));
    }
    if !want.input && !want.coded {
        return Err(Error::invalid("no output requested"));
    }
    if let Some(y) = input.channel {
        if y.depth() != trellis.depth() {
            return Err(Error::invalid(format!(
                "observation depth {} does not match trellis depth {}",
                y.depth(),
                trellis.depth()
            )));
        }
        if !y.is_finite() {
            return Err(Error::invalid("non-finite channel observation"));
        }
    }
    if let Some(lc) = input.coded_apriori {
        if lc.depth() != trellis.depth() {
            return Err(Error::invalid(format!(
                "coded a priori depth {} does not match trellis depth {}",
                lc.depth(),
                trellis.depth()
            )));
        }
        if !lc.is_finite() {
            return Err(Error::invalid("non-finite coded a priori"));
        }
    }
    if (input.coded_apriori.is_some() || want.coded) && !trellis.bipolar() {
        return Err(Error::invalid(
            "coded-bit soft values need a bipolar trellis; this table has real symbols",
        ));
    }
    if let Some(la) = input.input_apriori {
        if la.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite input a priori"));
        }
    }
    match cfg.wrap {
        WrapMode::Wrap { steps } => {
            if steps > n {
                return Err(Error::invalid(format!(
                    "wrap extension {steps} exceeds the block length {n}"
                )));
            }
        }
        WrapMode::Anchored => {
            if trellis.memory() > ANCHORED_MAX_MEMORY || n > ANCHORED_MAX_LEN {
                return Err(Error::TooLarge(format!(
                    "anchored decoding is limited to memory {ANCHORED_MAX_MEMORY} and \
                     {ANCHORED_MAX_LEN} positions (got memory {}, length {n})",
                    trellis.memory()
                )));
            }
        }
    }
    Ok(n)
}

/// Branch metrics for the extended window: `n + 2w` rows, one value per
/// transition. Step `t` consumes the input bit at position `(t - w) mod n`
/// and the observation `delta` positions earlier.
pub(crate) fn build_gammas<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    n: usize,
    w: usize,
) -> Vec<Vec<S>> {
    let half = S::of(0.5);
    let inv_2s2 = S::of(1.0 / (2.0 * cfg.sigma2));
    let n_tr = trellis.num_transitions();
    (0..n + 2 * w)
        .map(|t| {
            let q = wrap_index(t as isize - w as isize, n);
            let p = wrap_index(q as isize - trellis.delta(), n);
            let la_in = input.input_apriori.map(|v| clip_llr(v[q]));
            (0..n_tr)
                .map(|tau| {
                    let x = trellis.output(tau);
                    let mut g = S::zero();
                    if let Some(la) = la_in {
                        g += half * la * trellis.input_symbol(tau);
                    }
                    if let Some(lc) = input.coded_apriori {
                        for (d, &xd) in x.iter().enumerate() {
                            g += half * clip_llr(lc.at(p, d)) * xd;
                        }
                    }
                    if let Some(y) = input.channel {
                        for (d, &xd) in x.iter().enumerate() {
                            let diff = y.at(p, d) - xd;
                            g -= diff * diff * inv_2s2;
                        }
                    }
                    g
                })
                .collect()
        })
        .collect()
}

/// Forward path metrics from `init`, one extra row per step. Each row is
/// shifted so its maximum is zero when `normalize` is set (output LLRs are
/// invariant to per-row constants).
fn sweep_alpha<S: Scalar>(
    trellis: &Trellis<S>,
    gammas: &[Vec<S>],
    init: Vec<S>,
    mode: MaxStarMode,
    normalize: bool,
) -> Vec<Vec<S>> {
    let n_states = trellis.num_states();
    let mut rows = Vec::with_capacity(gammas.len() + 1);
    rows.push(init);
    for g in gammas {
        let prev = rows.last().expect("non-empty");
        let mut next = vec![S::neg_infinity(); n_states];
        for (tau, &gt) in g.iter().enumerate() {
            let to = trellis.to_state(tau);
            next[to] = max_star(next[to], prev[trellis.from_state(tau)] + gt, mode);
        }
        if normalize {
            shift_to_zero_max(&mut next);
        }
        rows.push(next);
    }
    rows
}

/// Backward path metrics from `init` at the far end, filled right to left.
fn sweep_beta<S: Scalar>(
    trellis: &Trellis<S>,
    gammas: &[Vec<S>],
    init: Vec<S>,
    mode: MaxStarMode,
    normalize: bool,
) -> Vec<Vec<S>> {
    let n_states = trellis.num_states();
    let steps = gammas.len();
    let mut rows = vec![Vec::new(); steps + 1];
    rows[steps] = init;
    for t in (0..steps).rev() {
        let mut cur = vec![S::neg_infinity(); n_states];
        for (tau, &gt) in gammas[t].iter().enumerate() {
            let from = trellis.from_state(tau);
            cur[from] = max_star(cur[from], gt + rows[t + 1][trellis.to_state(tau)], mode);
        }
        if normalize {
            shift_to_zero_max(&mut cur);
        }
        rows[t] = cur;
    }
    rows
}

fn shift_to_zero_max<S: Scalar>(row: &mut [S]) {
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    if m.is_finite() {
        for v in row {
            *v -= m;
        }
    }
}

/// Finishes a wrap-mode decode from prebuilt branch metrics. Split out so
/// invariance of the outputs under per-step constant shifts of the metrics
/// can be exercised directly.
pub(crate) fn finish_from_gammas<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    want: &LlrRequest,
    gammas: Vec<Vec<S>>,
    n: usize,
    w: usize,
) -> (BcjrOutput<S>, BcjrState<S>) {
    let n_states = trellis.num_states();
    let alphas = sweep_alpha(trellis, &gammas, vec![S::zero(); n_states], cfg.mode, true);
    let betas = sweep_beta(trellis, &gammas, vec![S::zero(); n_states], cfg.mode, true);
    let mut in_post = want.input.then(|| vec![S::zero(); n]);
    let mut c_post = want.coded.then(|| Tensor::zeros(n, trellis.depth()));
    for t in w..w + n {
        let q = t - w;
        let p = wrap_index(q as isize - trellis.delta(), n);
        let score =
            |tau: usize| alphas[t][trellis.from_state(tau)] + gammas[t][tau] + betas[t + 1][trellis.to_state(tau)];
        if let Some(post) = &mut in_post {
            let mut num = S::neg_infinity();
            let mut den = S::neg_infinity();
            for tau in 0..trellis.num_transitions() {
                if tau & 1 == 0 {
                    num = max_star(num, score(tau), cfg.mode);
                } else {
                    den = max_star(den, score(tau), cfg.mode);
                }
            }
            post[q] = num - den;
        }
        if let Some(post) = &mut c_post {
            for d in 0..trellis.depth() {
                let mut num = S::neg_infinity();
                let mut den = S::neg_infinity();
                for tau in 0..trellis.num_transitions() {
                    if trellis.output(tau)[d] > S::zero() {
                        num = max_star(num, score(tau), cfg.mode);
                    } else {
                        den = max_star(den, score(tau), cfg.mode);
                    }
                }
                *post.at_mut(p, d) = num - den;
            }
        }
    }
    let out = assemble_output(cfg, input, in_post, c_post);
    (
        out,
        BcjrState {
            n,
            w,
            gammas,
            alphas,
            betas,
        },
    )
}

fn assemble_output<S: Scalar>(
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    in_post: Option<Vec<S>>,
    c_post: Option<Tensor<S>>,
) -> BcjrOutput<S> {
    let damp = S::of(cfg.damping);
    let input_extrinsic = in_post.as_ref().map(|post| {
        post.iter()
            .enumerate()
            .map(|(q, &l)| {
                let la = input.input_apriori.map_or(S::zero(), |v| clip_llr(v[q]));
                damp * (l - la)
            })
            .collect()
    });
    let coded_extrinsic = c_post.as_ref().map(|post| {
        Tensor::from_fn(post.positions(), post.depth(), |p, d| {
            let la = input.coded_apriori.map_or(S::zero(), |v| clip_llr(v.at(p, d)));
            damp * (post.at(p, d) - la)
        })
    });
    BcjrOutput {
        input_posterior: in_post,
        input_extrinsic,
        coded_posterior: c_post,
        coded_extrinsic,
    }
}

fn decode_anchored<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    want: &LlrRequest,
    n: usize,
) -> BcjrOutput<S> {
    let gammas = build_gammas(trellis, cfg, input, n, 0);
    let n_states = trellis.num_states();
    let depth = trellis.depth();
    let neg = S::neg_infinity();
    let mut in_num = vec![neg; n];
    let mut in_den = vec![neg; n];
    let mut c_num = Tensor::from_fn(n, depth, |_, _| neg);
    let mut c_den = Tensor::from_fn(n, depth, |_, _| neg);
    for anchor in 0..n_states {
        // Pin the boundary state on both ends; no normalization, so scores
        // from different anchors stay on a common scale.
        let mut pinned = vec![neg; n_states];
        pinned[anchor] = S::zero();
        let alphas = sweep_alpha(trellis, &gammas, pinned.clone(), cfg.mode, false);
        let betas = sweep_beta(trellis, &gammas, pinned, cfg.mode, false);
        for t in 0..n {
            let p = wrap_index(t as isize - trellis.delta(), n);
            for tau in 0..trellis.num_transitions() {
                let sc = alphas[t][trellis.from_state(tau)]
                    + gammas[t][tau]
                    + betas[t + 1][trellis.to_state(tau)];
                if want.input {
                    if tau & 1 == 0 {
                        in_num[t] = max_star(in_num[t], sc, cfg.mode);
                    } else {
                        in_den[t] = max_star(in_den[t], sc, cfg.mode);
                    }
                }
                if want.coded {
                    for d in 0..depth {
                        if trellis.output(tau)[d] > S::zero() {
                            *c_num.at_mut(p, d) = max_star(c_num.at(p, d), sc, cfg.mode);
                        } else {
                            *c_den.at_mut(p, d) = max_star(c_den.at(p, d), sc, cfg.mode);
                        }
                    }
                }
            }
        }
    }
    let in_post = want
        .input
        .then(|| in_num.iter().zip(&in_den).map(|(&a, &b)| a - b).collect());
    let c_post = want
        .coded
        .then(|| Tensor::from_fn(n, depth, |p, d| c_num.at(p, d) - c_den.at(p, d)));
    assemble_output(cfg, input, in_post, c_post)
}

/// Soft-decodes one tail-biting block.
pub fn decode<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    want: LlrRequest,
) -> Result<BcjrOutput<S>> {
    let n = validate(trellis, cfg, input, &want)?;
    match cfg.wrap {
        WrapMode::Wrap { steps } => {
            let gammas = build_gammas(trellis, cfg, input, n, steps);
            Ok(finish_from_gammas(trellis, cfg, input, &want, gammas, n, steps).0)
        }
        WrapMode::Anchored => Ok(decode_anchored(trellis, cfg, input, &want, n)),
    }
}

/// Like [`decode`], additionally returning the intermediates the adjoint
/// needs. Wrap mode only.
pub fn decode_with_state<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    want: LlrRequest,
) -> Result<(BcjrOutput<S>, BcjrState<S>)> {
    let n = validate(trellis, cfg, input, &want)?;
    match cfg.wrap {
        WrapMode::Wrap { steps } => {
            let gammas = build_gammas(trellis, cfg, input, n, steps);
            Ok(finish_from_gammas(trellis, cfg, input, &want, gammas, n, steps))
        }
        WrapMode::Anchored => Err(Error::invalid(
            "the anchored decoder has no adjoint; use wrap mode for gradients",
        )),
    }
}

/// Group weights of a log-domain sum: softmax of the scores for exact sums,
/// a one-hot at the (first) maximum for max-only.
fn group_weights<S: Scalar>(scores: &[S], mode: MaxStarMode) -> Vec<S> {
    let m = scores.iter().copied().fold(S::neg_infinity(), S::max);
    match mode {
        MaxStarMode::LogMap => {
            let mut w: Vec<S> = scores.iter().map(|&s| (s - m).exp()).collect();
            let total: S = w.iter().copied().sum();
            for v in &mut w {
                *v /= total;
            }
            w
        }
        MaxStarMode::MaxLog => {
            let mut w = vec![S::zero(); scores.len()];
            let hit = scores
                .iter()
                .position(|&s| s == m)
                .expect("non-empty score group");
            w[hit] = S::one();
            w
        }
    }
}

/// Reverse-mode adjoint of a wrap-mode [`decode_with_state`] call. `input`
/// and `cfg` must be the very values the forward pass saw.
///
/// Seeds flow from the output LLRs into the per-transition scores (softmax
/// weights within each sign group), then through the two recursions in
/// reverse, and finally from branch metrics into the soft inputs and the
/// symbol table. Per-row normalization constants need no handling: every
/// seed group's weights sum to one on each side of an LLR, so the
/// state-gradient rows sum to zero and shifts cancel exactly.
pub fn decode_backward<S: Scalar>(
    trellis: &Trellis<S>,
    cfg: &BcjrConfig,
    input: &BcjrInput<S>,
    state: &BcjrState<S>,
    upstream: &BcjrUpstream<S>,
) -> Result<BcjrGrads<S>> {
    let n = state.n;
    let w = state.w;
    let steps = n + 2 * w;
    let n_states = trellis.num_states();
    let n_tr = trellis.num_transitions();
    let depth = trellis.depth();
    let damp = S::of(cfg.damping);
    let half = S::of(0.5);

    // Fold extrinsic upstreams into posterior-level seeds plus the direct
    // a priori term of `extrinsic = damping * (posterior - apriori)`.
    let mut d_in_post = vec![S::zero(); n];
    let mut d_c_post = Tensor::zeros(n, depth);
    let mut d_la_in = input.input_apriori.map(|_| vec![S::zero(); n]);
    let mut d_la_c = input.coded_apriori.map(|_| Tensor::zeros(n, depth));
    let mut d_y = input.channel.map(|_| Tensor::zeros(n, depth));
    let mut d_x = Tensor::zeros(n_tr, depth);

    if let Some(up) = upstream.input_posterior {
        if up.len() != n {
            return Err(Error::invalid("upstream length mismatch"));
        }
        for (dst, &u) in d_in_post.iter_mut().zip(up) {
            *dst += u;
        }
    }
    if let Some(up) = upstream.input_extrinsic {
        if up.len() != n {
            return Err(Error::invalid("upstream length mismatch"));
        }
        for q in 0..n {
            d_in_post[q] += damp * up[q];
            if let (Some(d_la), Some(la)) = (&mut d_la_in, input.input_apriori) {
                d_la[q] -= damp * up[q] * clip_mask(la[q]);
            }
        }
    }
    if let Some(up) = upstream.coded_posterior {
        if up.positions() != n || up.depth() != depth {
            return Err(Error::invalid("upstream shape mismatch"));
        }
        for (dst, &u) in d_c_post.data_mut().iter_mut().zip(up.data()) {
            *dst += u;
        }
    }
    if let Some(up) = upstream.coded_extrinsic {
        if up.positions() != n || up.depth() != depth {
            return Err(Error::invalid("upstream shape mismatch"));
        }
        for p in 0..n {
            for d in 0..depth {
                *d_c_post.at_mut(p, d) += damp * up.at(p, d);
                if let (Some(d_la), Some(la)) = (&mut d_la_c, input.coded_apriori) {
                    *d_la.at_mut(p, d) -= damp * up.at(p, d) * clip_mask(la.at(p, d));
                }
            }
        }
    }

    // Seed the score adjoints of the central steps.
    let mut d_alpha = vec![vec![S::zero(); n_states]; steps + 1];
    let mut d_beta = vec![vec![S::zero(); n_states]; steps + 1];
    let mut d_gamma = vec![vec![S::zero(); n_tr]; steps];
    let score = |t: usize, tau: usize| {
        state.alphas[t][trellis.from_state(tau)]
            + state.gammas[t][tau]
            + state.betas[t + 1][trellis.to_state(tau)]
    };
    let seed = |t: usize,
                    group: &[usize],
                    amount: S,
                    d_alpha: &mut Vec<Vec<S>>,
                    d_beta: &mut Vec<Vec<S>>,
                    d_gamma: &mut Vec<Vec<S>>| {
        let scores: Vec<S> = group.iter().map(|&tau| score(t, tau)).collect();
        let weights = group_weights(&scores, cfg.mode);
        for (&tau, &wt) in group.iter().zip(&weights) {
            let g = amount * wt;
            d_alpha[t][trellis.from_state(tau)] += g;
            d_gamma[t][tau] += g;
            d_beta[t + 1][trellis.to_state(tau)] += g;
        }
    };
    for t in w..w + n {
        let q = t - w;
        let p = wrap_index(q as isize - trellis.delta(), n);
        if d_in_post[q] != S::zero() {
            let plus: Vec<usize> = (0..n_tr).filter(|tau| tau & 1 == 0).collect();
            let minus: Vec<usize> = (0..n_tr).filter(|tau| tau & 1 == 1).collect();
            seed(t, &plus, d_in_post[q], &mut d_alpha, &mut d_beta, &mut d_gamma);
            seed(t, &minus, -d_in_post[q], &mut d_alpha, &mut d_beta, &mut d_gamma);
        }
        for d in 0..depth {
            let u = d_c_post.at(p, d);
            if u != S::zero() {
                let plus: Vec<usize> =
                    (0..n_tr).filter(|&tau| trellis.output(tau)[d] > S::zero()).collect();
                let minus: Vec<usize> =
                    (0..n_tr).filter(|&tau| trellis.output(tau)[d] <= S::zero()).collect();
                seed(t, &plus, u, &mut d_alpha, &mut d_beta, &mut d_gamma);
                seed(t, &minus, -u, &mut d_alpha, &mut d_beta, &mut d_gamma);
            }
        }
    }

    // Reverse the forward recursion: distribute each state's gradient over
    // its two incoming transitions by their softmax share.
    let m_bits = trellis.memory();
    for t in (0..steps).rev() {
        let (head, tail) = d_alpha.split_at_mut(t + 1);
        let d_next = &tail[0];
        let d_cur = &mut head[t];
        for (s, &ds) in d_next.iter().enumerate() {
            if ds == S::zero() {
                continue;
            }
            let incoming = [s, s | 1 << m_bits];
            let scores = [
                state.alphas[t][trellis.from_state(incoming[0])] + state.gammas[t][incoming[0]],
                state.alphas[t][trellis.from_state(incoming[1])] + state.gammas[t][incoming[1]],
            ];
            let weights = group_weights(&scores, cfg.mode);
            for (&tau, &wt) in incoming.iter().zip(&weights) {
                let g = ds * wt;
                d_cur[trellis.from_state(tau)] += g;
                d_gamma[t][tau] += g;
            }
        }
    }

    // Reverse the backward recursion symmetrically.
    for t in 0..steps {
        let (head, tail) = d_beta.split_at_mut(t + 1);
        let d_cur = &head[t];
        let d_next = &mut tail[0];
        for (s, &ds) in d_cur.iter().enumerate() {
            if ds == S::zero() {
                continue;
            }
            let outgoing = [s << 1, s << 1 | 1];
            let scores = [
                state.gammas[t][outgoing[0]] + state.betas[t + 1][trellis.to_state(outgoing[0])],
                state.gammas[t][outgoing[1]] + state.betas[t + 1][trellis.to_state(outgoing[1])],
            ];
            let weights = group_weights(&scores, cfg.mode);
            for (&tau, &wt) in outgoing.iter().zip(&weights) {
                let g = ds * wt;
                d_next[trellis.to_state(tau)] += g;
                d_gamma[t][tau] += g;
            }
        }
    }

    // Branch metrics into soft inputs and the symbol table.
    let inv_s2 = S::of(1.0 / cfg.sigma2);
    for (t, d_row) in d_gamma.iter().enumerate() {
        let q = wrap_index(t as isize - w as isize, n);
        let p = wrap_index(q as isize - trellis.delta(), n);
        for (tau, &dg) in d_row.iter().enumerate() {
            if dg == S::zero() {
                continue;
            }
            let x = trellis.output(tau);
            if let (Some(d_la), Some(la)) = (&mut d_la_in, input.input_apriori) {
                d_la[q] += half * trellis.input_symbol(tau) * dg * clip_mask(la[q]);
            }
            if let Some(lc) = input.coded_apriori {
                for (d, &xd) in x.iter().enumerate() {
                    if let Some(d_la) = &mut d_la_c {
                        *d_la.at_mut(p, d) += half * xd * dg * clip_mask(lc.at(p, d));
                    }
                    *d_x.at_mut(tau, d) += half * clip_llr(lc.at(p, d)) * dg;
                }
            }
            if let Some(y) = input.channel {
                for (d, &xd) in x.iter().enumerate() {
                    let diff = y.at(p, d) - xd;
                    if let Some(dy) = &mut d_y {
                        *dy.at_mut(p, d) -= diff * inv_s2 * dg;
                    }
                    *d_x.at_mut(tau, d) += diff * inv_s2 * dg;
                }
            }
        }
    }

    Ok(BcjrGrads {
        channel: d_y,
        coded_apriori: d_la_c,
        input_apriori: d_la_in,
        symbols: d_x,
    })
}
