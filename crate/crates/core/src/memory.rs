//! Key-value memory generator.
//!
//! A query `q` addresses `N` key slots with a softmax over similarity scores.
//! During training the paired full-video features are written into the value
//! slots through sigmoid erase and tanh add gates; the generated feature is
//! the partial feature plus the attention-weighted read of the value slots.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::encoder::{encode_on_tape, BatchStats, EncoderParams, EncoderVars, Mode};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::rng;

/// Score between a query and a key slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Similarity {
    /// `q . k`
    #[default]
    Dot,
    /// `-|q - k|`
    NegL2,
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Dot => "dot",
            Similarity::NegL2 => "neg_l2",
        })
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Similarity::Dot),
            "neg_l2" => Ok(Similarity::NegL2),
            other => Err(Error::Config(format!(
                "unknown similarity `{other}` (expected dot or neg_l2)"
            ))),
        }
    }
}

/// How a batch is written into the value slots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WriteMode {
    /// One update with the batch means of the erase and add terms.
    #[default]
    BatchMean,
    /// One single-sample update per batch element, in batch order.
    Sequential,
}

impl fmt::Display for WriteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WriteMode::BatchMean => "batch_mean",
            WriteMode::Sequential => "sequential",
        })
    }
}

impl FromStr for WriteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch_mean" => Ok(WriteMode::BatchMean),
            "sequential" => Ok(WriteMode::Sequential),
            other => Err(Error::Config(format!(
                "unknown write mode `{other}` (expected batch_mean or sequential)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryState {
    /// `N x h` key slots.
    pub keys: Tensor,
    /// `N x d` value slots.
    pub values: Tensor,
    /// `d x d` erase-gate projection.
    pub w_erase: Tensor,
    /// `d x d` add-gate projection.
    pub w_add: Tensor,
    pub similarity: Similarity,
    pub write_mode: WriteMode,
}

#[derive(Clone, Copy, Debug)]
pub struct MemoryVars {
    pub keys: Var,
    pub values: Var,
    pub w_erase: Var,
    pub w_add: Var,
}

impl MemoryVars {
    pub fn all(&self) -> [Var; 4] {
        [self.keys, self.values, self.w_erase, self.w_add]
    }
}

impl MemoryState {
    /// Keys ~ N(0, 1/h), values ~ N(0, 1/d) (standard deviations `1/sqrt(h)`
    /// and `1/sqrt(d)`), gate projections Glorot-uniform.
    pub fn init(slots: usize, h: usize, d: usize, similarity: Similarity, rng: &mut ChaCha8Rng) -> Self {
        MemoryState {
            keys: rng::gaussian(rng, slots, h, 1.0 / (h as f64).sqrt()),
            values: rng::gaussian(rng, slots, d, 1.0 / (d as f64).sqrt()),
            w_erase: rng::glorot(rng, d, d),
            w_add: rng::glorot(rng, d, d),
            similarity,
            write_mode: WriteMode::BatchMean,
        }
    }

    pub fn slots(&self) -> usize {
        self.keys.rows()
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> MemoryVars {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        MemoryVars {
            keys: leaf(&self.keys),
            values: leaf(&self.values),
            w_erase: leaf(&self.w_erase),
            w_add: leaf(&self.w_add),
        }
    }

    /// Trainable tensors in the fixed order keys, values, w_erase, w_add.
    pub fn trainable_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.keys, &mut self.values, &mut self.w_erase, &mut self.w_add]
    }

    pub fn trainable(&self) -> [&Tensor; 4] {
        [&self.keys, &self.values, &self.w_erase, &self.w_add]
    }
}

/// Soft attention over the memory slots; a point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention(Vec<f64>);

impl Attention {
    /// Wraps raw weights without checking that they sum to one. Useful for
    /// probing the write rule outside the softmax range.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        Attention(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Attention of every query row (`B x h`) over the key rows, as a `B x N` matrix.
pub fn address_on_tape(tape: &mut Tape, queries: Var, keys: Var, similarity: Similarity) -> Result<Var> {
    let (q, k) = (tape.value(queries), tape.value(keys));
    if q.rank() != 2 || k.rank() != 2 || q.cols() != k.cols() {
        return Err(Error::dim(
            "address",
            format!("queries of width {}", k.cols()),
            format!("{:?}", q.shape()),
        ));
    }
    let scores = match similarity {
        Similarity::Dot => tape.matmul_t(queries, false, keys, true)?,
        Similarity::NegL2 => tape.neg_l2(queries, keys)?,
    };
    tape.softmax_rows(scores)
}

/// Tape handles produced by a memory write.
#[derive(Clone, Copy, Debug)]
pub struct WriteVars {
    /// `B x d` erase vectors `sigmoid(W_e v)`.
    pub erase: Var,
    /// `B x d` add vectors `tanh(W_a v)`.
    pub add: Var,
    /// Value slots after erasing and before adding (last sample's step in
    /// sequential mode).
    pub erased: Var,
    /// Value slots after the write.
    pub written: Var,
}

/// Writes the `B x d` full features into the value slots under the `B x N`
/// attention `alpha`.
pub fn write_on_tape(
    tape: &mut Tape,
    values: Var,
    alpha: Var,
    full: Var,
    w_erase: Var,
    w_add: Var,
    mode: WriteMode,
) -> Result<WriteVars> {
    let (n, d) = (tape.value(values).rows(), tape.value(values).cols());
    let av = tape.value(alpha);
    if av.rank() != 2 || av.cols() != n {
        return Err(Error::dim(
            "write",
            format!("attention over {n} slots"),
            format!("{:?}", av.shape()),
        ));
    }
    let b = av.rows();
    let fv = tape.value(full);
    if fv.rank() != 2 || fv.rows() != b || fv.cols() != d {
        return Err(Error::dim(
            "write",
            format!("{b} x {d} full features"),
            format!("{:?}", fv.shape()),
        ));
    }
    if b == 0 {
        return Err(Error::dim("write", "non-empty batch", 0));
    }

    let erase_pre = tape.matmul_t(full, false, w_erase, true)?;
    let erase = tape.sigmoid(erase_pre);
    let add_pre = tape.matmul_t(full, false, w_add, true)?;
    let add = tape.tanh(add_pre);

    match mode {
        WriteMode::BatchMean => {
            let inv_b = 1.0 / b as f64;
            // M[i] * (1/B) sum_b (1 - alpha_b[i] e_b) = M[i] * (1 - (1/B) sum_b alpha_b[i] e_b)
            let erase_mass = tape.matmul_t(alpha, true, erase, false)?;
            let keep = tape.linear(erase_mass, -inv_b, 1.0);
            let erased = tape.mul(values, keep)?;
            let add_mass = tape.matmul_t(alpha, true, add, false)?;
            let add_term = tape.scale(add_mass, inv_b);
            let written = tape.add(erased, add_term)?;
            Ok(WriteVars {
                erase,
                add,
                erased,
                written,
            })
        }
        WriteMode::Sequential => {
            let mut current = values;
            let mut erased = values;
            for i in 0..b {
                let mut onehot = vec![0.0; b];
                onehot[i] = 1.0;
                let sel = tape.constant(Tensor::matrix(1, b, onehot)?);
                let a_i = tape.matmul(sel, alpha)?;
                let e_i = tape.matmul(sel, erase)?;
                let add_i = tape.matmul(sel, add)?;
                let erase_mass = tape.matmul_t(a_i, true, e_i, false)?;
                let keep = tape.linear(erase_mass, -1.0, 1.0);
                erased = tape.mul(current, keep)?;
                let add_mass = tape.matmul_t(a_i, true, add_i, false)?;
                current = tape.add(erased, add_mass)?;
            }
            Ok(WriteVars {
                erase,
                add,
                erased,
                written: current,
            })
        }
    }
}

/// `x + alpha * M` for a `B x d` batch.
pub fn read_on_tape(tape: &mut Tape, x: Var, alpha: Var, values: Var) -> Result<Var> {
    let (xv, av, mv) = (tape.value(x), tape.value(alpha), tape.value(values));
    if av.rank() != 2 || av.cols() != mv.rows() || xv.rank() != 2 || xv.rows() != av.rows() || xv.cols() != mv.cols() {
        return Err(Error::dim(
            "read",
            format!("B x {} attention and B x {} features", mv.rows(), mv.cols()),
            format!("{:?} and {:?}", av.shape(), xv.shape()),
        ));
    }
    let r = tape.matmul(alpha, values)?;
    tape.add(x, r)
}

/// Attention of one query over the key slots.
pub fn address(q: &[f64], keys: &Tensor, similarity: Similarity) -> Result<Attention> {
    let mut tape = Tape::new();
    let qv = tape.constant(Tensor::matrix(1, q.len(), q.to_vec())?);
    let kv = tape.constant(keys.clone());
    let a = address_on_tape(&mut tape, qv, kv, similarity)?;
    Ok(Attention(tape.value(a).data().to_vec()))
}

/// Result of a plain (off-tape) write.
#[derive(Clone, Debug, PartialEq)]
pub struct WriteTrace {
    pub erase: Tensor,
    pub add: Tensor,
    pub erased: Tensor,
    pub written: Tensor,
}

/// Writes one full feature per attention into `values` and returns the
/// gates, the erased matrix and the new matrix. `values` is not modified.
pub fn write(
    values: &Tensor,
    attention: &[Attention],
    full: &Tensor,
    w_erase: &Tensor,
    w_add: &Tensor,
    mode: WriteMode,
) -> Result<WriteTrace> {
    let n = values.rows();
    if let Some(bad) = attention.iter().find(|a| a.len() != n) {
        return Err(Error::dim("write", format!("attention over {n} slots"), bad.len()));
    }
    let rows: Vec<&[f64]> = attention.iter().map(|a| a.weights()).collect();
    let mut tape = Tape::new();
    let alpha = tape.constant(Tensor::from_rows(&rows)?);
    let (m, f, we, wa) = (
        tape.constant(values.clone()),
        tape.constant(full.clone()),
        tape.constant(w_erase.clone()),
        tape.constant(w_add.clone()),
    );
    let w = write_on_tape(&mut tape, m, alpha, f, we, wa, mode)?;
    Ok(WriteTrace {
        erase: tape.value(w.erase).clone(),
        add: tape.value(w.add).clone(),
        erased: tape.value(w.erased).clone(),
        written: tape.value(w.written).clone(),
    })
}

/// `x + sum_i alpha[i] M[i]` for a single feature.
pub fn read(x: &[f64], attention: &Attention, values: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::matrix(1, x.len(), x.to_vec())?);
    let av = tape.constant(Tensor::matrix(1, attention.len(), attention.weights().to_vec())?);
    let mv = tape.constant(values.clone());
    let r = read_on_tape(&mut tape, xv, av, mv)?;
    Ok(tape.value(r).data().to_vec())
}

/// Tape handles produced by [`generate_on_tape`].
#[derive(Clone, Debug)]
pub struct Generated {
    /// `B x d` generated full features.
    pub v_hat: Var,
    /// `B x N` attention.
    pub alpha: Var,
    /// Present in train mode.
    pub write: Option<WriteVars>,
    /// Present in train mode.
    pub stats: Option<BatchStats>,
}

/// Encodes `x`, addresses memory and reads. Train mode first writes `full`
/// into the value slots and reads from the written slots; eval mode reads the
/// slots as they are.
#[allow(clippy::too_many_arguments)]
pub fn generate_on_tape(
    tape: &mut Tape,
    encoder: &EncoderParams,
    enc_vars: &EncoderVars,
    memory: &MemoryState,
    mem_vars: &MemoryVars,
    x: Var,
    full: Option<Var>,
    mode: Mode,
) -> Result<Generated> {
    let (q, stats) = encode_on_tape(tape, encoder, enc_vars, x, mode)?;
    let alpha = address_on_tape(tape, q, mem_vars.keys, memory.similarity)?;
    let (source, write) = match (mode, full) {
        (Mode::Train, Some(full)) => {
            let w = write_on_tape(
                tape,
                mem_vars.values,
                alpha,
                full,
                mem_vars.w_erase,
                mem_vars.w_add,
                memory.write_mode,
            )?;
            (w.written, Some(w))
        }
        (Mode::Train, None) => {
            return Err(Error::Contract(
                "train-mode generation needs the paired full features".into(),
            ));
        }
        (Mode::Eval, _) => (mem_vars.values, None),
    };
    let v_hat = read_on_tape(tape, x, alpha, source)?;
    Ok(Generated {
        v_hat,
        alpha,
        write,
        stats,
    })
}

/// Generates full features for a `B x d` batch. In train mode `full` is
/// written into memory and the encoder's running statistics are updated.
pub fn generate(
    x: &Tensor,
    full: Option<&Tensor>,
    encoder: &mut EncoderParams,
    memory: &mut MemoryState,
    mode: Mode,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let ev = encoder.register(&mut tape, false);
    let mv = memory.register(&mut tape, false);
    let xv = tape.constant(x.clone());
    let fv = full.map(|f| tape.constant(f.clone()));
    let g = generate_on_tape(&mut tape, encoder, &ev, memory, &mv, xv, fv, mode)?;
    if let Some(w) = &g.write {
        memory.values = tape.value(w.written).clone();
    }
    if let Some(stats) = &g.stats {
        encoder.update_running(stats);
    }
    Ok(tape.value(g.v_hat).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sigmoid, softmax};
    use crate::rng::{purpose, stream};

    fn one_hot(n: usize, j: usize) -> Attention {
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        Attention(w)
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::matrix(r, c, (0..r * c).map(|_| rng::normal(rng)).collect()).unwrap()
    }

    #[test]
    fn identical_keys_give_uniform_attention() {
        let keys = Tensor::from_rows(&[[0.3, -1.0], [0.3, -1.0], [0.3, -1.0], [0.3, -1.0]]).unwrap();
        for sim in [Similarity::Dot, Similarity::NegL2] {
            let a = address(&[2.0, 5.0], &keys, sim).unwrap();
            for w in a.weights() {
                assert!((w - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dot_addressing_is_softmax_of_scores() {
        // Scores q . k_i = 1, 2, 3.
        let keys = Tensor::from_rows(&[[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]).unwrap();
        let a = address(&[1.0, 7.0], &keys, Similarity::Dot).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (w, s) in a.weights().iter().zip([1.0f64, 2.0, 3.0]) {
            assert!((w - s.exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn neg_l2_addressing_picks_matching_key() {
        let keys = Tensor::from_rows(&[[0.0, 0.0], [10.0, 0.0], [0.0, -12.0], [8.0, 8.0]]).unwrap();
        let a = address(&[0.0, 0.0], &keys, Similarity::NegL2).unwrap();
        assert!(a.weights()[0] > 0.99);
        assert!(address(&[1.0], &keys, Similarity::NegL2).is_err());
    }

    #[test]
    fn zero_attention_leaves_memory_unchanged() {
        let mut rng = stream(9, purpose::MODEL_INIT, 0);
        let m = random(&mut rng, 3, 4);
        let v = random(&mut rng, 2, 4);
        let (we, wa) = (random(&mut rng, 4, 4), random(&mut rng, 4, 4));
        let zero = vec![Attention(vec![0.0; 3]), Attention(vec![0.0; 3])];
        let t = write(&m, &zero, &v, &we, &wa, WriteMode::BatchMean).unwrap();
        assert_eq!(t.written, m);
    }

    #[test]
    fn one_hot_write_touches_only_its_row() {
        let mut rng = stream(10, purpose::MODEL_INIT, 0);
        let m = random(&mut rng, 5, 4);
        let v = random(&mut rng, 1, 4);
        let (we, wa) = (random(&mut rng, 4, 4), random(&mut rng, 4, 4));
        let t = write(&m, &[one_hot(5, 2)], &v, &we, &wa, WriteMode::BatchMean).unwrap();
        for i in 0..5 {
            if i != 2 {
                assert_eq!(t.written.row(i), m.row(i));
            }
        }
        assert_ne!(t.written.row(2), m.row(2));
    }

    #[test]
    fn single_write_matches_elementwise_formula() {
        let mut rng = stream(11, purpose::MODEL_INIT, 0);
        let m = random(&mut rng, 3, 4);
        let v = random(&mut rng, 1, 4);
        let (we, wa) = (random(&mut rng, 4, 4), random(&mut rng, 4, 4));
        let t = write(&m, &[one_hot(3, 1)], &v, &we, &wa, WriteMode::BatchMean).unwrap();
        for j in 0..4 {
            let pre_e: f64 = (0..4).map(|k| we.row(j)[k] * v.row(0)[k]).sum();
            let pre_a: f64 = (0..4).map(|k| wa.row(j)[k] * v.row(0)[k]).sum();
            let (e, a) = (sigmoid(pre_e), pre_a.tanh());
            let expected = m.row(1)[j] * (1.0 - e) + a;
            assert!((t.written.row(1)[j] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn sequential_and_batch_mean_agree_for_one_sample() {
        let mut rng = stream(12, purpose::MODEL_INIT, 0);
        let m = random(&mut rng, 3, 4);
        let v = random(&mut rng, 1, 4);
        let (we, wa) = (random(&mut rng, 4, 4), random(&mut rng, 4, 4));
        let att = [Attention(softmax(&[0.1, -0.4, 1.0]).unwrap())];
        let a = write(&m, &att, &v, &we, &wa, WriteMode::BatchMean).unwrap();
        let b = write(&m, &att, &v, &we, &wa, WriteMode::Sequential).unwrap();
        assert!(a.written.max_abs_diff(&b.written) < 1e-15);
    }

    #[test]
    fn write_rejects_wrong_attention_length() {
        let m = Tensor::zeros(&[3, 2]);
        let v = Tensor::zeros(&[1, 2]);
        let w = Tensor::zeros(&[2, 2]);
        assert!(write(&m, &[Attention(vec![1.0, 0.0])], &v, &w, &w, WriteMode::BatchMean).is_err());
    }

    #[test]
    fn read_examples() {
        let x = [0.5, -1.0, 2.0];
        let zero = Tensor::zeros(&[2, 3]);
        assert_eq!(read(&x, &Attention(vec![0.3, 0.7]), &zero).unwrap(), x.to_vec());

        let m = Tensor::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let r = read(&x, &Attention(vec![0.25, 0.75]), &m).unwrap();
        assert_eq!(r, vec![0.75, -0.25, 2.0]);
        let r = read(&x, &one_hot(2, 1), &m).unwrap();
        assert_eq!(r, vec![0.5, 0.0, 2.0]);
        assert!(read(&x[..2], &one_hot(2, 1), &m).is_err());
    }

    fn small(seed: u64) -> (EncoderParams, MemoryState) {
        let mut rng = stream(seed, purpose::MODEL_INIT, 0);
        (
            EncoderParams::init(6, 5, 3, &mut rng),
            MemoryState::init(4, 3, 6, Similarity::Dot, &mut rng),
        )
    }

    #[test]
    fn eval_generation_is_pure() {
        let (mut enc, mut mem) = small(13);
        let mut rng = stream(13, purpose::SAMPLE, 0);
        let x = random(&mut rng, 3, 6);
        let (enc0, mem0) = (enc.clone(), mem.clone());
        let a = generate(&x, None, &mut enc, &mut mem, Mode::Eval).unwrap();
        let b = generate(&x, None, &mut enc, &mut mem, Mode::Eval).unwrap();
        assert_eq!(a, b);
        assert_eq!(enc, enc0);
        assert_eq!(mem, mem0);
    }

    #[test]
    fn train_generation_reads_written_memory() {
        let (mut enc, mut mem) = small(14);
        mem.values = Tensor::zeros(&[4, 6]);
        let mut rng = stream(14, purpose::SAMPLE, 0);
        let x = random(&mut rng, 3, 6);
        let v = random(&mut rng, 3, 6);

        // Oracle: attention from the train-mode encoder, write, then read.
        let mut enc_probe = enc.clone();
        let q = crate::encoder::encode_query(&x, &mut enc_probe, Mode::Train).unwrap();
        let att: Vec<Attention> = (0..3)
            .map(|b| address(q.row(b), &mem.keys, mem.similarity).unwrap())
            .collect();
        let written = write(&mem.values, &att, &v, &mem.w_erase, &mem.w_add, WriteMode::BatchMean)
            .unwrap()
            .written;

        let v_hat = generate(&x, Some(&v), &mut enc, &mut mem, Mode::Train).unwrap();
        assert_eq!(mem.values, written);
        for (b, a_b) in att.iter().enumerate().take(3) {
            let expected = read(x.row(b), a_b, &written).unwrap();
            for (a, e) in v_hat.row(b).iter().zip(&expected) {
                assert!((a - e).abs() < 1e-14);
            }
        }
        assert_eq!(enc, enc_probe);
    }

    #[test]
    fn train_generation_requires_full_features() {
        let (mut enc, mut mem) = small(15);
        let x = Tensor::zeros(&[2, 6]);
        let err = generate(&x, None, &mut enc, &mut mem, Mode::Train).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn similarity_names_round_trip() {
        for s in [Similarity::Dot, Similarity::NegL2] {
            assert_eq!(s.to_string().parse::<Similarity>().unwrap(), s);
        }
        for w in [WriteMode::BatchMean, WriteMode::Sequential] {
            assert_eq!(w.to_string().parse::<WriteMode>().unwrap(), w);
        }
        assert!("cosine".parse::<Similarity>().is_err());
    }
}
