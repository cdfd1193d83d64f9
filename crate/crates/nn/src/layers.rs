//! Dense, multilayer and gated-recurrent building blocks over a [`ParamStore`].

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Tanh => g.tanh(x),
            Activation::Relu => g.relu(x),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Linear {
            w: store.glorot(&format!("{name}.w"), inputs, outputs, rng),
            b: store.zeros(&format!("{name}.b"), 1, outputs),
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        g.affine(store, x, self.w, self.b)
    }
}

/// Feed-forward stack: activation after every layer but the last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `widths` lists input, hidden and output widths.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers, activation }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, store, h);
            if i + 1 < self.layers.len() {
                h = self.activation.apply(g, h);
            }
        }
        h
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }
}

/// Gated recurrent unit with reset, update and candidate gates packed as
/// `[r | u | n]` along the column axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gru {
    pub wx: ParamId,
    pub bx: ParamId,
    pub wh: ParamId,
    pub bh: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl Gru {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Gru {
            wx: store.glorot(&format!("{name}.wx"), inputs, 3 * hidden, rng),
            bx: store.zeros(&format!("{name}.bx"), 1, 3 * hidden),
            wh: store.glorot(&format!("{name}.wh"), hidden, 3 * hidden, rng),
            bh: store.zeros(&format!("{name}.bh"), 1, 3 * hidden),
            inputs,
            hidden,
        }
    }

    /// Input half of the gate pre-activations; may cover many time steps at once.
    pub fn project_inputs(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        g.affine(store, x, self.wx, self.bx)
    }

    /// One step from projected inputs `xp` (`B x 3H`) and state `h` (`B x H`).
    pub fn step(&self, g: &mut Graph, store: &ParamStore, xp: Var, h: Var) -> Var {
        let n = self.hidden;
        let hp = g.affine(store, h, self.wh, self.bh);
        let xr = g.slice_cols(xp, 0, 2 * n);
        let hr = g.slice_cols(hp, 0, 2 * n);
        let gates = g.add(xr, hr);
        let gates = g.sigmoid(gates);
        let r = g.slice_cols(gates, 0, n);
        let u = g.slice_cols(gates, n, 2 * n);
        let xn = g.slice_cols(xp, 2 * n, 3 * n);
        let hn = g.slice_cols(hp, 2 * n, 3 * n);
        let rh = g.mul(r, hn);
        let cand = g.add(xn, rh);
        let cand = g.tanh(cand);
        let diff = g.sub(h, cand);
        let keep = g.mul(u, diff);
        g.add(cand, keep)
    }
}
