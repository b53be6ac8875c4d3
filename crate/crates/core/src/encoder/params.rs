use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal};

use super::EncoderConfig;
use crate::rng::rng_for;

const INIT_STD: f64 = 0.02;

/// Weights of one post-norm transformer block. Projections are stored
/// input-major (`x · W`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

/// All trainable tensors of one encoder tower. The same type doubles as the
/// gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub layers: Vec<LayerParams>,
}

macro_rules! layer_fields {
    ($mac:ident, $layer:expr, $prefix:expr, $out:expr) => {
        $mac!($layer, $prefix, $out, wq, bq, wk, bk, wv, bv, wo, bo, ln1_gain, ln1_bias, w1, b1, w2, b2, ln2_gain, ln2_bias)
    };
}

macro_rules! push_ref {
    ($layer:expr, $prefix:expr, $out:expr, $($f:ident),*) => {
        $( $out.push((format!("{}.{}", $prefix, stringify!($f)), $layer.$f.shape().to_vec(), $layer.$f.as_slice().expect("standard layout"))); )*
    };
}

macro_rules! push_mut {
    ($layer:expr, $prefix:expr, $out:expr, $($f:ident),*) => {
        $( $out.push($layer.$f.as_slice_mut().expect("standard layout")); )*
    };
}

impl LayerParams {
    fn zeros(d: usize, f: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        let v = |n| Array1::zeros(n);
        LayerParams {
            wq: m(d, d),
            bq: v(d),
            wk: m(d, d),
            bk: v(d),
            wv: m(d, d),
            bv: v(d),
            wo: m(d, d),
            bo: v(d),
            ln1_gain: v(d),
            ln1_bias: v(d),
            w1: m(d, f),
            b1: v(f),
            w2: m(f, d),
            b2: v(d),
            ln2_gain: v(d),
            ln2_bias: v(d),
        }
    }
}

impl EncoderParams {
    pub fn zeros(config: &EncoderConfig, vocab_size: usize) -> Self {
        let d = config.embed_dim;
        EncoderParams {
            token_embedding: Array2::zeros((vocab_size, d)),
            position_embedding: Array2::zeros((config.max_seq_len, d)),
            layers: (0..config.num_layers)
                .map(|_| LayerParams::zeros(d, config.ffn_dim))
                .collect(),
        }
    }

    /// Weights ~ N(0, 0.02²), biases 0, normalisation gains 1.
    pub fn init(config: &EncoderConfig, vocab_size: usize, seed: u64) -> Self {
        let mut p = EncoderParams::zeros(config, vocab_size);
        let mut rng = rng_for(seed, &[0x1417]);
        let normal = Normal::new(0.0, INIT_STD).unwrap();
        let mut fill = |a: &mut Array2<f64>| a.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
        fill(&mut p.token_embedding);
        fill(&mut p.position_embedding);
        for l in &mut p.layers {
            for w in [&mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.w1, &mut l.w2] {
                fill(w);
            }
            l.ln1_gain.fill(1.0);
            l.ln2_gain.fill(1.0);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for s in self.tensors_mut() {
            s.fill(value);
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.token_embedding.nrows()
    }

    /// Named tensors with shapes, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = vec![
            (
                "token_embedding".to_string(),
                self.token_embedding.shape().to_vec(),
                self.token_embedding.as_slice().expect("standard layout"),
            ),
            (
                "position_embedding".to_string(),
                self.position_embedding.shape().to_vec(),
                self.position_embedding.as_slice().expect("standard layout"),
            ),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            layer_fields!(push_ref, layer, format!("layer{i}"), out);
        }
        out
    }

    /// Mutable tensors in the same order as [`EncoderParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.token_embedding.as_slice_mut().expect("standard layout"),
            self.position_embedding.as_slice_mut().expect("standard layout"),
        ];
        for layer in self.layers.iter_mut() {
            layer_fields!(push_mut, layer, (), out);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, _, s)| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, s)| s.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &EncoderParams, scale: f64) {
        let src = other.tensors();
        for (dst, (_, _, s)) in self.tensors_mut().into_iter().zip(src) {
            for (d, x) in dst.iter_mut().zip(s) {
                *d += scale * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = EncoderConfig::toy();
        let a = EncoderParams::init(&cfg, 11, 5);
        let b = EncoderParams::init(&cfg, 11, 5);
        let c = EncoderParams::init(&cfg, 11, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.token_embedding.shape(), &[11, 16]);
        assert_eq!(a.position_embedding.shape(), &[8, 16]);
        assert_eq!(a.layers.len(), 2);
        assert!(a.layers[0].ln1_gain.iter().all(|&g| g == 1.0));
        assert!(a.layers[1].b1.iter().all(|&b| b == 0.0));
        assert_eq!(a.tensors().len(), 2 + 2 * 16);
        assert_eq!(a.tensors().len(), a.clone().tensors_mut().len());
        let names: Vec<String> = a.tensors().into_iter().map(|t| t.0).collect();
        assert_eq!(names[2], "layer0.wq");
        assert_eq!(names[33], "layer1.ln2_bias");
    }

    #[test]
    fn add_scaled_accumulates() {
        let cfg = EncoderConfig::toy();
        let a = EncoderParams::init(&cfg, 4, 1);
        let mut z = a.zeros_like();
        z.add_scaled(&a, 2.0);
        z.add_scaled(&a, -1.0);
        assert_eq!(z, a);
    }
}
