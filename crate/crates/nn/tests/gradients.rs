use molxfer_nn::gradcheck::{numeric_input_grad, numeric_param_grad, relative_error};
use molxfer_nn::ndarray::Array2;
use molxfer_nn::{Activation, Graph, Gru, Mlp, ParamStore, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Checks d(loss)/d(input) for a unary graph function of one input matrix.
fn check_input<F>(x: Array2<f64>, build: F)
where
    F: Fn(&mut Graph, Var) -> Var,
{
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let loss = build(&mut g, xv);
    let analytic = g
        .backward(loss)
        .wrt(xv)
        .cloned()
        .unwrap_or_else(|| Array2::zeros(x.dim()));
    let numeric = numeric_input_grad(&x, 1e-6, |probe| {
        let mut g = Graph::new();
        let xv = g.constant(probe.clone());
        let loss = build(&mut g, xv);
        g.scalar(loss)
    });
    let err = relative_error(&analytic, &numeric);
    assert!(
        err < 1e-6,
        "relative error {err}\nanalytic {analytic}\nnumeric {numeric}"
    );
}

/// A fixed random weighting turns any matrix into a scalar with a generic gradient.
fn weigh(g: &mut Graph, y: Var, seed: u64) -> Var {
    let (r, c) = g.shape(y);
    let w = g.constant(random(r, c, &mut ChaCha8Rng::seed_from_u64(seed)));
    let p = g.mul(y, w);
    g.sum(p)
}

#[test]
fn elementwise_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(3, 4, &mut rng);
    check_input(x.clone(), |g, x| {
        let y = g.sigmoid(x);
        weigh(g, y, 2)
    });
    check_input(x.clone(), |g, x| {
        let y = g.tanh(x);
        weigh(g, y, 3)
    });
    check_input(x.mapv(|v| v * 8.0), |g, x| {
        let y = g.log_sigmoid(x);
        weigh(g, y, 28)
    });
    check_input(x.clone(), |g, x| {
        let y = g.exp(x);
        weigh(g, y, 4)
    });
    check_input(x.clone(), |g, x| {
        let y = g.square(x);
        weigh(g, y, 5)
    });
    check_input(x.mapv(|v| v.abs() + 0.5), |g, x| {
        let y = g.sqrt(x);
        weigh(g, y, 6)
    });
    check_input(x.mapv(|v| if v.abs() < 0.05 { 0.3 } else { v }), |g, x| {
        let y = g.relu(x);
        weigh(g, y, 7)
    });
    check_input(x.clone(), |g, x| {
        let y = g.scale(x, -2.5);
        let y = g.add_scalar(y, 1.0);
        let y = g.square(y);
        g.mean(y)
    });
}

#[test]
fn binary_and_broadcast_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(3, 4, &mut rng);
    let other = random(3, 4, &mut rng);
    let row = random(1, 4, &mut rng);
    let col = random(3, 1, &mut rng);
    let right = random(4, 2, &mut rng);
    check_input(x.clone(), |g, x| {
        let o = g.constant(other.clone());
        let a = g.mul(x, x);
        let b = g.sub(a, o);
        let c = g.add(b, x);
        let d = g.mul(c, o);
        weigh(g, d, 9)
    });
    check_input(x.clone(), |g, x| {
        let r = g.constant(row.clone());
        let y = g.add_row(x, r);
        let y = g.square(y);
        weigh(g, y, 10)
    });
    check_input(row.clone(), |g, r| {
        let xv = g.constant(x.clone());
        let y = g.add_row(xv, r);
        let y = g.tanh(y);
        weigh(g, y, 11)
    });
    check_input(col.clone(), |g, c| {
        let xv = g.constant(x.clone());
        let y = g.mul_col(xv, c);
        let y = g.square(y);
        weigh(g, y, 12)
    });
    check_input(x.clone(), |g, x| {
        let c = g.constant(col.clone());
        let y = g.mul_col(x, c);
        weigh(g, y, 13)
    });
    check_input(x.clone(), |g, x| {
        let w = g.constant(right.clone());
        let y = g.matmul(x, w);
        let y = g.tanh(y);
        weigh(g, y, 14)
    });
    check_input(right.clone(), |g, w| {
        let xv = g.constant(x.clone());
        let y = g.matmul(xv, w);
        let y = g.square(y);
        weigh(g, y, 15)
    });
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let x = random(4, 5, &mut rng);
    check_input(x.clone(), |g, x| {
        let a = g.slice_cols(x, 1, 3);
        let b = g.slice_rows(x, 2, 4);
        let bt = g.transpose(b);
        let c = g.concat_cols(&[a, x]);
        let d = g.concat_rows(&[a, a]);
        let s1 = weigh(g, c, 17);
        let s2 = weigh(g, d, 18);
        let s3 = weigh(g, bt, 19);
        let s = g.add(s1, s2);
        g.add(s, s3)
    });
    check_input(x.clone(), |g, x| {
        let r = g.row_sum(x);
        let r = g.square(r);
        weigh(g, r, 20)
    });
    check_input(x.clone(), |g, x| {
        let y = g.gather(x, &[3, 0, 3, 1]);
        let y = g.square(y);
        weigh(g, y, 21)
    });
}

#[test]
fn softmax_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = random(4, 3, &mut rng) * 3.0;
    check_input(x.clone(), |g, x| {
        let y = g.softmax(x);
        weigh(g, y, 23)
    });
    check_input(x.clone(), |g, x| {
        let y = g.logsumexp(x);
        weigh(g, y, 24)
    });
    check_input(x.clone(), |g, x| {
        g.nll(x, &[Some(0), None, Some(2), Some(1)])
    });
    let targets = Array2::from_shape_fn((4, 3), |(i, j)| ((i + j) % 2) as f64);
    check_input(x.clone(), |g, x| {
        let y = g.bce_logits(x, targets.clone());
        weigh(g, y, 25)
    });
}

#[test]
fn gradient_reversal_flips_sign_only_below_it() {
    let x = Array2::from_shape_vec((1, 2), vec![0.3, -0.7]).unwrap();
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let r = g.grad_reverse(xv, 1.0);
    let y = g.square(r);
    let loss = g.sum(y);
    let grads = g.backward(loss);
    assert_eq!(grads.wrt(r).unwrap(), &(&x * 2.0));
    assert_eq!(grads.wrt(xv).unwrap(), &(&x * -2.0));
}

#[test]
fn nll_matches_direct_formula() {
    let x = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
    let mut g = Graph::new();
    let xv = g.constant(x);
    let loss = g.nll(xv, &[Some(2), Some(1)]);
    let expected = -(3f64.exp() / (1f64.exp() + 2f64.exp() + 3f64.exp())).ln() + 3f64.ln();
    assert!((g.scalar(loss) - expected).abs() < 1e-12);
}

#[test]
fn mlp_and_gru_parameter_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut store = ParamStore::new(1);
    let mlp = Mlp::new(&mut store, "mlp", &[3, 5, 2], Activation::Tanh, &mut rng);
    let gru = Gru::new(&mut store, "gru", 2, 4, &mut rng);
    let xs: Vec<Array2<f64>> = (0..3).map(|_| random(2, 3, &mut rng)).collect();
    let loss_of = |store: &ParamStore| {
        let mut g = Graph::new();
        let mut h = g.constant(Array2::zeros((2, 4)));
        for x in &xs {
            let xv = g.constant(x.clone());
            let e = mlp.forward(&mut g, store, xv);
            let xp = gru.project_inputs(&mut g, store, e);
            h = gru.step(&mut g, store, xp, h);
        }
        let loss = weigh(&mut g, h, 27);
        (g, loss)
    };
    let (g, loss) = loss_of(&store);
    let grads = g.backward(loss);
    for id in store.ids() {
        let analytic = grads.param(id).cloned().unwrap();
        let numeric = numeric_param_grad(&store, id, 1e-6, |s| {
            let (g, l) = loss_of(s);
            g.scalar(l)
        });
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "{}: relative error {err}", store.name(id));
    }
}

#[test]
fn repeated_param_use_shares_one_leaf() {
    let mut store = ParamStore::new(1);
    let id = store.add("w", Array2::from_elem((1, 1), 3.0));
    let mut g = Graph::new();
    let a = g.param(&store, id);
    let b = g.param(&store, id);
    assert_eq!(a, b);
    let y = g.mul(a, b);
    let grads = g.backward(y);
    assert_eq!(grads.param(id).unwrap()[[0, 0]], 6.0);
    assert_eq!(grads.for_store(&store).len(), 1);
}

#[test]
fn log_sigmoid_is_stable_at_extremes() {
    let x = Array2::from_shape_vec((1, 3), vec![-800.0, 0.0, 800.0]).unwrap();
    let mut g = Graph::new();
    let xv = g.constant(x);
    let y = g.log_sigmoid(xv);
    let v = g.value(y);
    assert_eq!(v[[0, 0]], -800.0);
    assert!((v[[0, 1]] - 0.5f64.ln()).abs() < 1e-15);
    assert_eq!(v[[0, 2]], 0.0);
}
