//! Central finite-difference checks of tape gradients, per op and for whole
//! models.

use std::sync::Arc;

use msi_gnn::autodiff::Tape;
use msi_gnn::graph::Graph;
use msi_gnn::hop::compute_hop_adjacency;
use msi_gnn::models::{Model, ModelConfig, ModelKind, Propagation};
use msi_gnn::msi::MsiConfig;
use msi_gnn::rng::{seeded, DetRng};
use msi_gnn::sparse::SparseMatrix;
use ndarray::Array2;
use rand::Rng;

use super::{max_relative_error, numeric_gradient, random_graph};

pub const STEP: f64 = 1e-5;
/// Gradient magnitudes below this are compared in absolute terms.
pub const FLOOR: f64 = 1e-6;

fn random_matrix(rng: &mut DetRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn random_sparse(rng: &mut DetRng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    let dense = Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < density {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    SparseMatrix::from_dense(dense.view())
}

/// Reduces an op output to a scalar with fixed random row and column weights
/// so every output entry gets a distinct sensitivity.
fn project(tape: &mut Tape, out: msi_gnn::autodiff::Var, seed: u64) -> msi_gnn::autodiff::Var {
    let (rows, cols) = tape.shape(out);
    let mut rng = seeded(seed);
    let col_weights = tape.constant(random_matrix(&mut rng, cols, 1));
    let row_weights = Arc::new(SparseMatrix::from_dense(
        random_matrix(&mut rng, 1, rows).view(),
    ));
    let y = tape.matmul(out, col_weights).unwrap();
    let y = tape.spmm(&row_weights, y).unwrap();
    tape.sum(y).unwrap()
}

/// Checks the gradient of `scalar(build(inputs))` with respect to every
/// input. `build` receives the input handles and returns a scalar loss.
pub fn check_function(
    inputs: &[Array2<f64>],
    build: &dyn Fn(&mut Tape, &[msi_gnn::autodiff::Var]) -> msi_gnn::autodiff::Var,
) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[i], x.dim());
        let numeric = numeric_gradient(x, STEP, |probe| {
            let mut t = Tape::new();
            let vs: Vec<_> = inputs
                .iter()
                .enumerate()
                .map(|(j, y)| t.param(if j == i { probe.clone() } else { y.clone() }))
                .collect();
            let l = build(&mut t, &vs);
            t.value(l)[[0, 0]]
        });
        worst = worst.max(max_relative_error(&analytic, &numeric, FLOOR));
    }
    worst
}

/// Worst relative error per op, each on random inputs.
pub fn op_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let a = random_matrix(&mut rng, 4, 3);
    let b = random_matrix(&mut rng, 3, 5);
    let c = random_matrix(&mut rng, 4, 3);
    let bias = random_matrix(&mut rng, 1, 3);
    // keep ReLU inputs away from the kink
    let away = a.mapv(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let sparse = Arc::new(random_sparse(&mut rng, 6, 4, 0.5));
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();

    let mut out = Vec::new();
    out.push((
        "matmul",
        check_function(&[a.clone(), b.clone()], &|t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            project(t, y, 1)
        }),
    ));
    out.push((
        "matmul chain",
        check_function(
            &[a.clone(), b.clone(), random_matrix(&mut rng, 5, 2)],
            &|t, v| {
                let y = t.matmul(v[0], v[1]).unwrap();
                let y = t.matmul(y, v[2]).unwrap();
                project(t, y, 2)
            },
        ),
    ));
    out.push((
        "spmm",
        check_function(std::slice::from_ref(&a), &|t, v| {
            let y = t.spmm(&sparse, v[0]).unwrap();
            project(t, y, 3)
        }),
    ));
    out.push((
        "add",
        check_function(&[a.clone(), c.clone()], &|t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            project(t, y, 4)
        }),
    ));
    out.push((
        "add_row",
        check_function(&[a.clone(), bias.clone()], &|t, v| {
            let y = t.add_row(v[0], v[1]).unwrap();
            project(t, y, 5)
        }),
    ));
    out.push((
        "scale",
        check_function(std::slice::from_ref(&a), &|t, v| {
            let y = t.scale(v[0], -1.7).unwrap();
            project(t, y, 6)
        }),
    ));
    out.push((
        "relu",
        check_function(std::slice::from_ref(&away), &|t, v| {
            let y = t.relu(v[0]).unwrap();
            project(t, y, 7)
        }),
    ));
    out.push((
        "dropout",
        check_function(std::slice::from_ref(&a), &|t, v| {
            // same seed on every evaluation, so the mask is fixed
            let y = t.dropout(v[0], 0.4, true, &mut seeded(99)).unwrap();
            project(t, y, 8)
        }),
    ));
    out.push((
        "concat_cols",
        check_function(&[a.clone(), c.clone()], &|t, v| {
            let y = t.concat_cols(&[v[0], v[1], v[0]]).unwrap();
            project(t, y, 9)
        }),
    ));
    out.push((
        "sum",
        check_function(std::slice::from_ref(&a), &|t, v| t.sum(v[0]).unwrap()),
    ));
    out.push((
        "softmax_cross_entropy",
        check_function(std::slice::from_ref(&a), &|t, v| {
            t.softmax_cross_entropy(v[0], &labels, &[0, 2, 3]).unwrap()
        }),
    ));
    out
}

/// Model families covered by the full-model check.
pub fn model_configs() -> Vec<ModelConfig> {
    let msi = MsiConfig {
        t: 6,
        n: 0,
        lambda: 0.5,
        c_x: 1,
        c_a: vec![1, 2],
    };
    let mut configs = Vec::new();
    for kind in [
        ModelKind::Gcn,
        ModelKind::H2gcn { rounds: 2 },
        ModelKind::Gcnii {
            layers: 3,
            alpha: 0.1,
            beta: 0.5,
        },
        ModelKind::Gcnii {
            layers: 2,
            alpha: 0.2,
            beta: 1.5,
        },
    ] {
        let mut plain = ModelConfig::new(kind);
        plain.hidden = 4;
        plain.dropout = 0.3;
        let mut with_msi = plain.clone();
        with_msi.msi = Some(msi.clone());
        configs.push(plain);
        configs.push(with_msi);
    }
    configs
}

/// Loss of `model` on `graph` in training mode with a fixed dropout seed.
fn model_loss(
    model: &Model,
    prop: &Propagation,
    input: &Arc<SparseMatrix>,
    labels: &[usize],
) -> (Tape, msi_gnn::autodiff::Var, Vec<msi_gnn::autodiff::Var>) {
    let mut tape = Tape::new();
    let fwd = model
        .forward(&mut tape, prop, input, true, &mut seeded(5))
        .unwrap();
    let rows: Vec<usize> = (0..labels.len()).collect();
    let loss = tape
        .softmax_cross_entropy(fwd.logits, labels, &rows)
        .unwrap();
    (tape, loss, fwd.params)
}

/// Worst relative error over every parameter of a model on a random graph
/// with at most 10 nodes.
pub fn model_error(config: &ModelConfig, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let graph: Graph = random_graph(&mut rng, 9, 0.3, 3, 5);
    let hops = compute_hop_adjacency(&graph, 2);
    let prop = Propagation::new(&graph, &hops);
    let features = SparseMatrix::from_dense(graph.features().view());
    let input = match &config.msi {
        None => Arc::new(features),
        Some(msi) => {
            let labeled: Vec<usize> = (0..graph.num_nodes()).collect();
            let sel = msi_gnn::msi::select_structures(&graph, &hops, &labeled, msi).unwrap();
            Arc::new(msi_gnn::msi::build_msi_layer_sparse(Some(&features), &sel, msi).unwrap())
        }
    };
    let model = Model::new(config.clone(), input.cols(), graph.num_classes(), &mut rng).unwrap();
    let labels = graph.labels();

    let (mut tape, loss, vars) = model_loss(&model, &prop, &input, labels);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (slot, var) in vars.iter().enumerate() {
        let value = model.params.get(slot).value.clone();
        let analytic = grads.get_or_zeros(*var, value.dim());
        let numeric = numeric_gradient(&value, STEP, |probe| {
            let mut m = model.clone();
            m.params.get_mut(slot).value = probe.clone();
            let (t, l, _) = model_loss(&m, &prop, &input, labels);
            t.value(l)[[0, 0]]
        });
        worst = worst.max(max_relative_error(&analytic, &numeric, FLOOR));
    }
    worst
}
